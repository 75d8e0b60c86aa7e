#include "taper/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "taper/error.hpp"
#include "taper/rng.hpp"

namespace taper {

std::size_t Dataset::num_classes() const {
    int m = 0;
    for (int l : labels) m = std::max(m, l);
    return static_cast<std::size_t>(m) + 1;
}

void Dataset::validate() const {
    if (labels.empty()) throw Error("dataset is empty");
    if (inputs.dim(0) != labels.size()) throw Error("dataset inputs/labels length mismatch");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
        throw Error("train fraction must lie in (0, 1]");
    }
    for (int l : labels) {
        if (l < 0) throw Error("negative label in dataset");
    }
}

std::pair<Tensor, std::vector<int>> Dataset::Split::gather(const std::vector<std::size_t>& order,
                                                           std::size_t begin,
                                                           std::size_t end) const {
    const std::size_t stride = inputs.size() / inputs.dim(0);
    std::vector<std::size_t> shape = inputs.shape();
    shape[0] = end - begin;
    std::vector<double> data((end - begin) * stride);
    std::vector<int> out_labels(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t src = order[i];
        std::copy(inputs.data() + src * stride, inputs.data() + (src + 1) * stride,
                  data.begin() + (i - begin) * stride);
        out_labels[i - begin] = labels[src];
    }
    return {Tensor(std::move(shape), std::move(data)), std::move(out_labels)};
}

Dataset::Split Dataset::slice(std::size_t begin, std::size_t end) const {
    const std::size_t stride = inputs.size() / inputs.dim(0);
    std::vector<std::size_t> shape = inputs.shape();
    shape[0] = end - begin;
    std::vector<double> data(inputs.data() + begin * stride, inputs.data() + end * stride);
    return Split{Tensor(std::move(shape), std::move(data)),
                 std::vector<int>(labels.begin() + begin, labels.begin() + end)};
}

Dataset::Split Dataset::train_split() const {
    std::size_t n_train = static_cast<std::size_t>(
        std::ceil(train_fraction * static_cast<double>(size())));
    n_train = std::min(std::max<std::size_t>(n_train, 1), size());
    return slice(0, n_train);
}

Dataset::Split Dataset::val_split() const {
    std::size_t n_train = train_split().size();
    if (n_train == size()) return slice(0, size());  // degenerate: validate on train
    return slice(n_train, size());
}

Dataset make_blobs(std::size_t n, std::uint64_t seed, double separation, double train_fraction) {
    if (n == 0) throw Error("blobs dataset needs n >= 1");
    auto rng = make_rng(derive_seed(seed, "blobs"));
    std::vector<double> data(n * 2);
    std::vector<int> labels(n);
    const double half = separation / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 2);  // interleaved for balanced splits
        const double cx = cls == 0 ? -half : half;
        const double cy = cls == 0 ? -half : half;
        data[i * 2 + 0] = cx + normal(rng);
        data[i * 2 + 1] = cy + normal(rng);
        labels[i] = cls;
    }
    Dataset ds{Tensor({n, 2}, std::move(data)), std::move(labels), train_fraction};
    ds.validate();
    return ds;
}

Dataset load_csv_dataset(const std::string& path, double train_fraction) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        bool bad = false;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                if (used == 0) bad = true;
                fields.push_back(v);
            } catch (const std::exception&) {
                bad = true;
                break;
            }
        }
        if (bad) {
            if (first) {
                first = false;
                continue;  // header row
            }
            throw ConfigError("non-numeric cell in dataset row " + std::to_string(rows.size()));
        }
        first = false;
        if (fields.size() < 2) throw ConfigError("dataset rows need at least one feature + label");
        if (width == 0) width = fields.size();
        if (fields.size() != width) throw ConfigError("ragged dataset row");
        labels.push_back(static_cast<int>(std::llround(fields.back())));
        fields.pop_back();
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw ConfigError("dataset file '" + path + "' has no data rows");
    std::vector<double> data;
    data.reserve(rows.size() * (width - 1));
    for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
    Dataset ds{Tensor({rows.size(), width - 1}, std::move(data)), std::move(labels),
               train_fraction};
    ds.validate();
    return ds;
}

Dataset synthetic_dataset(const std::string& name, std::size_t n, std::uint64_t seed,
                          double train_fraction) {
    if (name == "blobs") return make_blobs(n, seed, 4.0, train_fraction);
    throw ConfigError("unknown synthetic dataset '" + name + "'");
}

}  // namespace taper
