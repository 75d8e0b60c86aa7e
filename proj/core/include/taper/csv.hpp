#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace taper {

/// Shortest round-trip decimal form of a double (deterministic; NaN prints
/// as "nan").
std::string format_double(double value);

/// Minimal CSV assembler with byte-stable numeric formatting.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    CsvWriter& cell(const std::string& value);
    CsvWriter& cell(double value);
    CsvWriter& cell(std::size_t value);
    CsvWriter& end_row();

    const std::string& text() const { return text_; }
    void save(const std::string& path) const;

private:
    std::string text_;
    std::size_t columns_ = 0;
    std::size_t in_row_ = 0;
};

}  // namespace taper
