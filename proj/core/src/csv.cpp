#include "taper/csv.hpp"

#include <charconv>
#include <cmath>

#include "taper/error.hpp"
#include "taper/model_io.hpp"

namespace taper {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw Error("format_double failed");
    return std::string(buf, ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

CsvWriter& CsvWriter::cell(const std::string& value) {
    if (in_row_) text_ += ',';
    text_ += value;
    ++in_row_;
    return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_double(value)); }

CsvWriter& CsvWriter::cell(std::size_t value) { return cell(std::to_string(value)); }

CsvWriter& CsvWriter::end_row() {
    if (in_row_ != columns_) throw Error("CSV row has wrong number of cells");
    text_ += '\n';
    in_row_ = 0;
    return *this;
}

void CsvWriter::save(const std::string& path) const { write_text_file(path, text_); }

}  // namespace taper
