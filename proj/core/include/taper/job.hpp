#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taper/lc.hpp"
#include "taper/schemes.hpp"
#include "taper/search.hpp"
#include "taper/train.hpp"

namespace taper {

/// Chain-architecture layer declaration from the job config.
struct LayerDecl {
    std::string kind;  // dense | conv2d | relu | flatten
    std::size_t out = 0;
    std::size_t kernel_h = 3, kernel_w = 3;
    std::size_t stride = 1, padding = 0;
    bool bias = true;
};

/// Everything a run needs: task, model, scheme, objective, search and L-C
/// settings. One root seed fans out to named streams (init/train/lc).
struct JobConfig {
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    bool verbose = false;

    std::string task_kind = "blobs";  // blobs | csv | synthetic
    std::string dataset_path;         // csv tasks
    std::string task_curve;           // synthetic tasks
    std::size_t task_n = 200;
    double train_fraction = 0.9;

    std::vector<std::size_t> input_shape;
    std::vector<LayerDecl> layers;

    TrainConfig train;
    Scheme scheme = Scheme::prune();
    std::string objective = "footprint_min";  // footprint_min | flops_min | synthetic:<name>
    LevelSetConfig search;
    LcConfig lc;

    void validate() const;
};

JobConfig load_job_config(const std::string& path);  // .toml or .json
JobConfig parse_job_config(const std::string& text, bool toml);

/// Builds the (untrained) architecture declared by the config.
ModelGraph build_architecture(const JobConfig& cfg);

/// Builds the dataset declared by the config (blobs or csv tasks).
Dataset build_dataset(const JobConfig& cfg);

struct JobResult {
    double baseline_accuracy = 0.0;
    double s_acc = 0.0;
    double s_star = 0.0;
    double accuracy = 0.0;         // A(s_star)
    double objective_value = 0.0;  // f(s_star)
};

/// Full pipeline: train reference, two-stage search (each evaluation is one
/// lc_run), thin/quantize, and emit artifacts into output_dir. Throws
/// ConfigError / InfeasibleError / NumericError for the CLI exit codes.
JobResult run_job(const JobConfig& cfg);

// trace serialization shared between run_job and the CLI subcommands
std::string search_trace_csv(const std::vector<SearchSample>& rows);
std::string lc_trace_csv(const std::vector<LcTraceRow>& rows);
std::string result_json(const JobResult& result);

}  // namespace taper
