// taper: config-driven model-compression jobs.
//
// Subcommands:
//   train        train the reference model declared in the config
//   compress-at  single lc run at a fixed sparsity, or a profile sweep
//   thin         remove zero structures from a model given masks
//   report       footprint and FLOP reports for a model file
//   search       full two-stage sparsity search (the main pipeline)
//
// Exit codes: 0 ok, 1 config error, 2 infeasible search, 3 numeric failure.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "taper/csv.hpp"
#include "taper/error.hpp"
#include "taper/job.hpp"
#include "taper/model_io.hpp"
#include "taper/net.hpp"
#include "taper/objectives.hpp"
#include "taper/rng.hpp"
#include "taper/thinning.hpp"

namespace fs = std::filesystem;
using namespace taper;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool verbose = false;
};

JobConfig load_config(const CommonOpts& opts) {
    JobConfig cfg = load_job_config(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    cfg.verbose = cfg.verbose || opts.verbose;
    return cfg;
}

void log_line(const JobConfig& cfg, const std::string& message) {
    if (cfg.verbose) std::cerr << "[taper] " << message << "\n";
}

ModelGraph trained_reference(const JobConfig& cfg, const Dataset& dataset) {
    ModelGraph model = build_architecture(cfg);
    init_params(model, derive_seed(cfg.seed, "init"));
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = derive_seed(cfg.seed, "train");
    train(model, dataset, train_cfg);
    return model;
}

int cmd_train(const CommonOpts& opts) {
    JobConfig cfg = load_config(opts);
    cfg.validate();
    const Dataset dataset = build_dataset(cfg);
    ModelGraph model = build_architecture(cfg);
    init_params(model, derive_seed(cfg.seed, "init"));
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = derive_seed(cfg.seed, "train");
    log_line(cfg, "training reference model (" + std::to_string(train_cfg.epochs) + " epochs)");
    TrainHistory history = train(model, dataset, train_cfg);

    fs::create_directories(cfg.output_dir);
    save_model(model, (fs::path(cfg.output_dir) / "reference.json").string());
    CsvWriter csv({"epoch", "mean_loss", "train_accuracy", "val_accuracy"});
    for (std::size_t e = 0; e < history.size(); ++e) {
        csv.cell(e + 1)
            .cell(history[e].mean_loss)
            .cell(history[e].train_accuracy)
            .cell(history[e].val_accuracy)
            .end_row();
    }
    csv.save((fs::path(cfg.output_dir) / "train_history.csv").string());
    std::cout << "val_accuracy "
              << format_double(history.empty() ? 0.0 : history.back().val_accuracy) << "\n";
    return 0;
}

struct SweepPoint {
    double s = 0.0;
    double accuracy = 0.0;
    double dc_accuracy = 0.0;
    double constraint_gap = 0.0;
    std::size_t footprint_bytes = 0;
    std::size_t flops_total = 0;
};

SweepPoint run_point(const JobConfig& cfg, const ModelGraph& reference, const Dataset& dataset,
                     double s) {
    SweepPoint point;
    point.s = s;

    // direct compression: one projection, no recovery training
    CompressedState dc = project(reference, cfg.scheme, s);
    point.dc_accuracy = evaluate(decompress_model(reference, dc), dataset.val_split());

    LcConfig lc_cfg = cfg.lc;
    lc_cfg.seed = derive_seed(derive_seed(cfg.seed, "lc"),
                              static_cast<std::uint64_t>(std::llround(
                                  s * static_cast<double>(cfg.search.grid_size))));
    LcResult lc = lc_run(reference, cfg.scheme, s, dataset, lc_cfg);
    point.accuracy = lc.accuracy;
    point.constraint_gap = lc.trace.empty() ? 0.0 : lc.trace.back().constraint_gap;
    point.footprint_bytes = memory_footprint(reference, lc.state).bytes_total;
    if (cfg.scheme.is_structured()) {
        auto thinned = thin_model(lc.model, structure_masks(reference, lc.state));
        point.flops_total = count_flops(thinned).flops_total;
    } else {
        point.flops_total = count_flops(lc.model).flops_total;
    }
    return point;
}

int cmd_compress_at(const CommonOpts& opts, double sparsity, const std::string& model_path,
                    const std::vector<double>& sweep, std::size_t jobs) {
    JobConfig cfg = load_config(opts);
    cfg.validate();
    const Dataset dataset = build_dataset(cfg);
    const ModelGraph reference =
        model_path.empty() ? trained_reference(cfg, dataset) : load_model(model_path);
    fs::create_directories(cfg.output_dir);

    if (!sweep.empty()) {
        if (sweep.size() != 3) throw ConfigError("--sweep needs LO HI COUNT");
        const double lo = sweep[0], hi = sweep[1];
        const std::size_t count = static_cast<std::size_t>(sweep[2]);
        if (!(lo >= 0.0 && hi < 1.0 && hi >= lo) || count < 2) {
            throw ConfigError("--sweep needs 0 <= LO <= HI < 1 and COUNT >= 2");
        }
        std::vector<double> points(count);
        for (std::size_t i = 0; i < count; ++i) {
            points[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        }
        std::vector<SweepPoint> results(count);
        // evaluations are independent; worker threads just split the grid
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                results[i] = run_point(cfg, reference, dataset, points[i]);
            }
        };
        const std::size_t n_workers = std::max<std::size_t>(1, std::min(jobs, count));
        if (n_workers == 1) {
            worker();
        } else {
            std::vector<std::thread> threads;
            for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
            for (auto& t : threads) t.join();
        }
        CsvWriter csv({"s", "accuracy", "dc_accuracy", "constraint_gap", "footprint_bytes",
                       "flops_total"});
        for (const auto& p : results) {
            csv.cell(p.s)
                .cell(p.accuracy)
                .cell(p.dc_accuracy)
                .cell(p.constraint_gap)
                .cell(p.footprint_bytes)
                .cell(p.flops_total)
                .end_row();
        }
        csv.save((fs::path(cfg.output_dir) / "profile.csv").string());
        std::cout << "profile.csv with " << count << " points\n";
        return 0;
    }

    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
        throw ConfigError("--sparsity must lie in [0, 1)");
    }
    LcConfig lc_cfg = cfg.lc;
    lc_cfg.seed = derive_seed(derive_seed(cfg.seed, "lc"),
                              static_cast<std::uint64_t>(std::llround(
                                  sparsity * static_cast<double>(cfg.search.grid_size))));
    LcResult lc = lc_run(reference, cfg.scheme, sparsity, dataset, lc_cfg);
    save_model(lc.model, (fs::path(cfg.output_dir) / "compressed.json").string());
    write_text_file((fs::path(cfg.output_dir) / "lc_trace.csv").string(), lc_trace_csv(lc.trace));
    if (cfg.scheme.is_structured()) {
        auto masks = structure_masks(reference, lc.state);
        save_masks(reference, masks, (fs::path(cfg.output_dir) / "masks.json").string());
        save_model(thin_model(lc.model, masks),
                   (fs::path(cfg.output_dir) / "thinned.json").string());
    }
    std::cout << "accuracy " << format_double(lc.accuracy) << "\n";
    return 0;
}

int cmd_thin(const std::string& model_path, const std::string& masks_path,
             const std::string& out_path) {
    ModelGraph model = load_model(model_path);
    StructureMasks masks = load_masks(model, masks_path);
    save_model(thin_model(model, masks), out_path);
    return 0;
}

int cmd_report(const std::string& model_path) {
    ModelGraph model = load_model(model_path);
    FootprintReport footprint = memory_footprint(model);
    FlopReport flops = count_flops(model);
    nlohmann::json doc;
    doc["footprint"] = {{"bytes_total", footprint.bytes_total},
                        {"reference_bytes", footprint.reference_bytes},
                        {"compression_ratio", footprint.compression_ratio}};
    doc["flops"] = {{"flops_total", flops.flops_total},
                    {"speedup_ratio", flops.speedup_ratio}};
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t v = 0; v < model.node_count(); ++v) {
        layers.push_back({{"name", model.nodes[v].name},
                          {"nonzeros", footprint.nonzeros_per_layer[v]},
                          {"bytes", footprint.bytes_per_layer[v]},
                          {"flops", flops.flops_per_layer[v]}});
    }
    doc["layers"] = std::move(layers);
    std::cout << doc.dump(2) << "\n";
    return 0;
}

int cmd_search(const CommonOpts& opts) {
    JobConfig cfg = load_config(opts);
    log_line(cfg, "running two-stage search into " + cfg.output_dir);
    JobResult result = run_job(cfg);
    std::cout << "s_acc " << format_double(result.s_acc) << "\ns_star "
              << format_double(result.s_star) << "\naccuracy "
              << format_double(result.accuracy) << "\nobjective "
              << format_double(result.objective_value) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"taper: composable model compression with two-stage sparsity search"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", opts.config_path, "job config (.toml or .json)");
        if (needs_config) c->required();
        cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
        cmd->add_option("--seed", opts.seed, "seed override")
            ->each([&](const std::string&) { opts.seed_set = true; });
        cmd->add_flag("--verbose", opts.verbose, "progress logging on stderr");
    };

    auto* train_cmd = app.add_subcommand("train", "train the reference model");
    add_common(train_cmd, true);

    auto* compress_cmd =
        app.add_subcommand("compress-at", "compress at a fixed sparsity (no search)");
    add_common(compress_cmd, true);
    double sparsity = 0.0;
    std::string model_path;
    std::vector<double> sweep;
    std::size_t jobs = 1;
    compress_cmd->add_option("--sparsity", sparsity, "target sparsity in [0, 1)");
    compress_cmd->add_option("--model", model_path, "reference model file (skips training)");
    compress_cmd->add_option("--sweep", sweep, "profile sweep: LO HI COUNT")->expected(3);
    compress_cmd->add_option("--jobs", jobs, "worker threads for sweeps");

    auto* thin_cmd = app.add_subcommand("thin", "remove zero structures from a model");
    std::string thin_model_path, thin_masks_path, thin_out_path;
    thin_cmd->add_option("--model", thin_model_path, "model JSON")->required();
    thin_cmd->add_option("--masks", thin_masks_path, "masks JSON")->required();
    thin_cmd->add_option("--out", thin_out_path, "output model JSON")->required();

    auto* report_cmd = app.add_subcommand("report", "footprint and FLOP reports");
    std::string report_model_path;
    report_cmd->add_option("--model", report_model_path, "model JSON")->required();

    auto* search_cmd = app.add_subcommand("search", "full two-stage sparsity search");
    add_common(search_cmd, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train_cmd)) return cmd_train(opts);
        if (app.got_subcommand(compress_cmd)) {
            return cmd_compress_at(opts, sparsity, model_path, sweep, jobs);
        }
        if (app.got_subcommand(thin_cmd)) {
            return cmd_thin(thin_model_path, thin_masks_path, thin_out_path);
        }
        if (app.got_subcommand(report_cmd)) return cmd_report(report_model_path);
        if (app.got_subcommand(search_cmd)) return cmd_search(opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
