#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taper/tensor.hpp"

namespace taper {

/// Labeled dataset with a deterministic train/validation split: the first
/// ceil(train_fraction * n) samples train, the rest validate.
struct Dataset {
    Tensor inputs;            // [n, ...]
    std::vector<int> labels;  // [n], values in [0, num_classes)
    double train_fraction = 0.9;

    std::size_t size() const { return labels.size(); }
    std::size_t num_classes() const;
    void validate() const;

    struct Split {
        Tensor inputs;
        std::vector<int> labels;
        std::size_t size() const { return labels.size(); }
        /// Mini-batch [begin, end) gathered through an index permutation.
        std::pair<Tensor, std::vector<int>> gather(const std::vector<std::size_t>& order,
                                                   std::size_t begin, std::size_t end) const;
    };
    Split train_split() const;
    Split val_split() const;

private:
    Split slice(std::size_t begin, std::size_t end) const;
};

/// Two linearly separable 2-D Gaussian blobs, classes interleaved so both
/// splits stay balanced.
Dataset make_blobs(std::size_t n, std::uint64_t seed, double separation = 4.0,
                   double train_fraction = 0.9);

/// CSV rows of (feature..., label). No header handling beyond skipping a
/// first row that fails numeric parsing.
Dataset load_csv_dataset(const std::string& path, double train_fraction = 0.9);

/// Generator registry keyed by name ("blobs").
Dataset synthetic_dataset(const std::string& name, std::size_t n, std::uint64_t seed,
                          double train_fraction = 0.9);

}  // namespace taper
