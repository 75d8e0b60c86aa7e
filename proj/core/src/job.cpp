#include "taper/job.hpp"

#include <cmath>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "taper/csv.hpp"
#include "taper/model_io.hpp"
#include "taper/net.hpp"
#include "taper/objectives.hpp"
#include "taper/rng.hpp"
#include "taper/thinning.hpp"
#include "toml.hpp"

namespace taper {

namespace {

using nlohmann::json;

Scheme scheme_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind")) {
        throw ConfigError("scheme needs a 'kind' field");
    }
    const std::string kind = j.at("kind").get<std::string>();
    Scheme scheme;
    if (kind == "prune") {
        scheme = Scheme::prune();
    } else if (kind == "quantize") {
        if (j.contains("dtype") && j.at("dtype").get<std::string>() != "float16") {
            throw ConfigError("quantize supports dtype 'float16' only");
        }
        scheme = Scheme::quantize();
    } else if (kind == "neuron_prune") {
        scheme = Scheme::neuron_prune();
    } else if (kind == "filter_prune") {
        scheme = Scheme::filter_prune();
    } else if (kind == "block_prune") {
        std::vector<std::size_t> bs = {5, 1};
        if (j.contains("block_shape")) bs = j.at("block_shape").get<std::vector<std::size_t>>();
        scheme = Scheme::block_prune(Criteria::MeanAbs, bs);
    } else if (kind == "compose") {
        if (!j.contains("schemes") || !j.at("schemes").is_array() || j.at("schemes").empty()) {
            throw ConfigError("compose needs a nonempty 'schemes' array");
        }
        std::vector<Scheme> children;
        for (const auto& child : j.at("schemes")) children.push_back(scheme_from_json(child));
        return Scheme::compose(std::move(children));
    } else {
        throw ConfigError("unknown scheme kind '" + kind + "'");
    }
    if (j.contains("criteria")) {
        scheme.criteria = criteria_from_name(j.at("criteria").get<std::string>());
    }
    if (j.contains("layers")) {
        scheme.layer_filter = j.at("layers").get<std::vector<std::string>>();
    }
    return scheme;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

JobConfig config_from_json(const json& doc) {
    JobConfig cfg;
    try {
        read_field(doc, "seed", cfg.seed);
        read_field(doc, "output_dir", cfg.output_dir);
        read_field(doc, "verbose", cfg.verbose);
        read_field(doc, "objective", cfg.objective);

        if (doc.contains("task")) {
            const auto& t = doc.at("task");
            read_field(t, "kind", cfg.task_kind);
            read_field(t, "path", cfg.dataset_path);
            read_field(t, "curve", cfg.task_curve);
            read_field(t, "n", cfg.task_n);
            read_field(t, "train_fraction", cfg.train_fraction);
        }
        if (doc.contains("model")) {
            const auto& m = doc.at("model");
            read_field(m, "input_shape", cfg.input_shape);
            if (m.contains("layers")) {
                for (const auto& jl : m.at("layers")) {
                    LayerDecl decl;
                    decl.kind = jl.at("kind").get<std::string>();
                    read_field(jl, "out_features", decl.out);
                    read_field(jl, "out_channels", decl.out);
                    if (jl.contains("kernel")) {
                        if (jl.at("kernel").is_array()) {
                            auto k = jl.at("kernel").get<std::vector<std::size_t>>();
                            if (k.size() != 2) throw ConfigError("kernel must be [h, w]");
                            decl.kernel_h = k[0];
                            decl.kernel_w = k[1];
                        } else {
                            decl.kernel_h = decl.kernel_w = jl.at("kernel").get<std::size_t>();
                        }
                    }
                    read_field(jl, "stride", decl.stride);
                    read_field(jl, "padding", decl.padding);
                    read_field(jl, "bias", decl.bias);
                    cfg.layers.push_back(std::move(decl));
                }
            }
        }
        if (doc.contains("train")) {
            const auto& t = doc.at("train");
            read_field(t, "learning_rate", cfg.train.learning_rate);
            read_field(t, "momentum", cfg.train.momentum);
            read_field(t, "batch_size", cfg.train.batch_size);
            read_field(t, "epochs", cfg.train.epochs);
        }
        if (doc.contains("scheme")) cfg.scheme = scheme_from_json(doc.at("scheme"));
        if (doc.contains("search")) {
            const auto& s = doc.at("search");
            read_field(s, "epsilon", cfg.search.epsilon);
            read_field(s, "gamma", cfg.search.gamma);
            read_field(s, "max_evals", cfg.search.max_evals);
            read_field(s, "grid_size", cfg.search.grid_size);
            read_field(s, "kappa", cfg.search.kappa);
            read_field(s, "noise", cfg.search.noise);
            if (s.contains("kernel")) {
                const auto& k = s.at("kernel");
                read_field(k, "length_scale", cfg.search.kernel.length_scale);
                read_field(k, "signal_variance", cfg.search.kernel.signal_variance);
                read_field(k, "jitter", cfg.search.kernel.jitter);
            }
        }
        if (doc.contains("lc")) {
            const auto& l = doc.at("lc");
            read_field(l, "mu0", cfg.lc.mu0);
            read_field(l, "growth", cfg.lc.growth);
            read_field(l, "outer_iters", cfg.lc.outer_iters);
            read_field(l, "l_step_batches", cfg.lc.l_step_batches);
            read_field(l, "first_l_step_batches", cfg.lc.first_l_step_batches);
            read_field(l, "lr_hi", cfg.lc.lr_hi);
            read_field(l, "lr_lo", cfg.lc.lr_lo);
            read_field(l, "momentum", cfg.lc.momentum);
            read_field(l, "batch_size", cfg.lc.batch_size);
            read_field(l, "fine_tune_batches", cfg.lc.fine_tune_batches);
            if (l.contains("multiplier_mode")) {
                const std::string mode = l.at("multiplier_mode").get<std::string>();
                if (mode == "penalty_only") {
                    cfg.lc.mode = LcConfig::MultiplierMode::PenaltyOnly;
                } else if (mode == "augmented_lagrangian") {
                    cfg.lc.mode = LcConfig::MultiplierMode::AugmentedLagrangian;
                } else {
                    throw ConfigError("unknown multiplier_mode '" + mode + "'");
                }
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return cfg;
}

}  // namespace

void JobConfig::validate() const {
    if (!(search.epsilon > 0.0 && search.epsilon < 1.0)) {
        throw ConfigError("search.epsilon must lie in (0, 1)");
    }
    search.validate();
    lc.validate();
    train.validate();
    if (task_kind != "blobs" && task_kind != "csv" && task_kind != "synthetic") {
        throw ConfigError("unknown task kind '" + task_kind + "'");
    }
    if (task_kind == "csv" && dataset_path.empty()) {
        throw ConfigError("csv task needs task.path");
    }
    if (task_kind == "synthetic") {
        if (task_curve.empty()) throw ConfigError("synthetic task needs task.curve");
        SyntheticCurve::make(task_curve, seed);  // validates the name
        if (objective.rfind("synthetic:", 0) != 0) {
            throw ConfigError("synthetic tasks support synthetic:<name> objectives only");
        }
    } else {
        if (layers.empty()) throw ConfigError("model.layers must not be empty");
        for (const auto& decl : layers) {
            if (decl.kind != "dense" && decl.kind != "conv2d" && decl.kind != "relu" &&
                decl.kind != "flatten") {
                throw ConfigError("unknown layer kind '" + decl.kind + "' in model.layers");
            }
            if ((decl.kind == "dense" || decl.kind == "conv2d") && decl.out == 0) {
                throw ConfigError("layer '" + decl.kind + "' needs a positive output size");
            }
        }
    }
    if (objective != "footprint_min" && objective != "flops_min" &&
        objective.rfind("synthetic:", 0) != 0) {
        throw ConfigError("unknown objective '" + objective + "'");
    }
    if (objective.rfind("synthetic:", 0) == 0) {
        SyntheticCurve::make(objective.substr(10), seed);
    }
}

JobConfig parse_job_config(const std::string& text, bool toml) {
    json doc;
    if (toml) {
        doc = detail::parse_toml(text);
    } else {
        try {
            doc = json::parse(text);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config JSON parse error: ") + e.what());
        }
    }
    return config_from_json(doc);
}

JobConfig load_job_config(const std::string& path) {
    const std::string text = [&] {
        try {
            return read_text_file(path);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }();
    const bool toml = path.size() < 5 || path.substr(path.size() - 5) != ".json";
    return parse_job_config(text, toml);
}

ModelGraph build_architecture(const JobConfig& cfg) {
    std::vector<std::size_t> input_shape = cfg.input_shape;
    if (input_shape.empty()) {
        if (cfg.task_kind == "blobs") {
            input_shape = {2};
        } else {
            throw ConfigError("model.input_shape is required for csv tasks");
        }
    }
    std::vector<LayerSpec> layers;
    std::vector<std::size_t> shape = input_shape;
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        const auto& decl = cfg.layers[i];
        const std::string name = decl.kind + std::to_string(i);
        if (decl.kind == "dense") {
            if (shape.size() != 1) {
                throw ConfigError("dense layer " + std::to_string(i) +
                                  " needs a flat input; add a flatten layer");
            }
            layers.push_back(dense_layer(name, shape[0], decl.out, decl.bias));
        } else if (decl.kind == "conv2d") {
            if (shape.size() != 3) {
                throw ConfigError("conv2d layer " + std::to_string(i) + " needs a [c,h,w] input");
            }
            layers.push_back(conv2d_layer(name, shape[0], decl.out, decl.kernel_h, decl.kernel_w,
                                          decl.stride, decl.padding, decl.bias));
        } else if (decl.kind == "relu") {
            layers.push_back(relu_layer(name));
        } else {
            layers.push_back(flatten_layer(name));
        }
        shape = infer_out_shape(layers.back(), shape);
    }
    return chain_graph(input_shape, std::move(layers));
}

Dataset build_dataset(const JobConfig& cfg) {
    if (cfg.task_kind == "blobs") {
        return make_blobs(cfg.task_n, derive_seed(cfg.seed, "data"), 4.0, cfg.train_fraction);
    }
    if (cfg.task_kind == "csv") {
        return load_csv_dataset(cfg.dataset_path, cfg.train_fraction);
    }
    throw ConfigError("task kind '" + cfg.task_kind + "' has no dataset");
}

std::string search_trace_csv(const std::vector<SearchSample>& rows) {
    CsvWriter csv({"stage", "t", "s", "y", "domain_lo", "acq_value", "feasible"});
    for (const auto& row : rows) {
        csv.cell(static_cast<std::size_t>(row.stage))
            .cell(row.t)
            .cell(row.s)
            .cell(row.y)
            .cell(row.domain_lo)
            .cell(row.acq)
            .cell(std::string(row.feasible ? "1" : "0"))
            .end_row();
    }
    return csv.text();
}

std::string lc_trace_csv(const std::vector<LcTraceRow>& rows) {
    CsvWriter csv({"iter", "mu", "loss", "constraint_gap", "val_accuracy"});
    for (const auto& row : rows) {
        csv.cell(row.iter)
            .cell(row.mu)
            .cell(row.loss)
            .cell(row.constraint_gap)
            .cell(row.val_accuracy)
            .end_row();
    }
    return csv.text();
}

std::string result_json(const JobResult& result) {
    json doc;
    doc["s_acc"] = result.s_acc;
    doc["s_star"] = result.s_star;
    doc["accuracy"] = result.accuracy;
    doc["objective"] = result.objective_value;
    return doc.dump(2) + "\n";
}

namespace {

namespace fs = std::filesystem;

struct Evaluation {
    LcResult lc;
    std::size_t index;  // 1-based order of first evaluation
};

JobResult run_synthetic_job(const JobConfig& cfg, const fs::path& out_dir) {
    const SyntheticCurve accuracy_curve = SyntheticCurve::make(cfg.task_curve, cfg.seed);
    const SyntheticCurve objective_curve =
        SyntheticCurve::make(cfg.objective.substr(10), cfg.seed);
    const double baseline = accuracy_curve.baseline();

    JobResult result;
    result.baseline_accuracy = baseline;

    BlackBox acc_box([&](double s) { return accuracy_curve(s); }, cfg.search.grid_size);
    Stage1Result stage1 = [&] {
        try {
            return stage1_level_set(acc_box, baseline, cfg.search);
        } catch (const InfeasibleError& e) {
            write_text_file((out_dir / "search_trace.csv").string(),
                            search_trace_csv(e.trace()));
            throw;
        }
    }();

    BlackBox obj_box([&](double s) { return objective_curve(s); }, cfg.search.grid_size);
    Stage2Result stage2 =
        stage2_optimize(obj_box, stage1.s_acc, Direction::Maximize, cfg.search);

    result.s_acc = stage1.s_acc;
    result.s_star = stage2.s_star;
    result.accuracy = accuracy_curve(stage2.s_star);
    result.objective_value = stage2.objective;

    std::vector<SearchSample> all_rows = stage1.state.trace;
    all_rows.insert(all_rows.end(), stage2.state.trace.begin(), stage2.state.trace.end());
    write_text_file((out_dir / "search_trace.csv").string(), search_trace_csv(all_rows));
    write_text_file((out_dir / "result.json").string(), result_json(result));
    return result;
}

}  // namespace

JobResult run_job(const JobConfig& cfg) {
    cfg.validate();  // config errors must precede any artifact

    const fs::path out_dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + cfg.output_dir + "'");

    if (cfg.task_kind == "synthetic") return run_synthetic_job(cfg, out_dir);

    // train the reference model
    const Dataset dataset = build_dataset(cfg);
    ModelGraph reference = build_architecture(cfg);
    init_params(reference, derive_seed(cfg.seed, "init"));
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = derive_seed(cfg.seed, "train");
    train(reference, dataset, train_cfg);
    const double baseline = evaluate(reference, dataset.val_split());
    save_model(reference, (out_dir / "reference.json").string());

    JobResult result;
    result.baseline_accuracy = baseline;

    // each black-box evaluation is one lc_run, memoized by grid key
    std::map<long long, Evaluation> evaluations;
    std::size_t eval_counter = 0;
    auto grid_key = [&](double s) {
        return std::llround(s * static_cast<double>(cfg.search.grid_size));
    };
    auto evaluate_lc = [&](double s) -> const Evaluation& {
        const long long key = grid_key(s);
        auto it = evaluations.find(key);
        if (it != evaluations.end()) return it->second;
        LcConfig lc_cfg = cfg.lc;
        lc_cfg.seed = derive_seed(derive_seed(cfg.seed, "lc"),
                                  static_cast<std::uint64_t>(key));
        Evaluation ev{lc_run(reference, cfg.scheme, s, dataset, lc_cfg), ++eval_counter};
        write_text_file((out_dir / ("lc_trace_" + std::to_string(ev.index) + ".csv")).string(),
                        lc_trace_csv(ev.lc.trace));
        return evaluations.emplace(key, std::move(ev)).first->second;
    };

    BlackBox acc_box([&](double s) { return evaluate_lc(s).lc.accuracy; }, cfg.search.grid_size);
    Stage1Result stage1 = [&] {
        try {
            return stage1_level_set(acc_box, baseline, cfg.search);
        } catch (const InfeasibleError& e) {
            write_text_file((out_dir / "search_trace.csv").string(),
                            search_trace_csv(e.trace()));
            throw;
        }
    }();

    // stage 2: user objective over the restricted domain
    Direction direction = Direction::Minimize;
    std::function<double(double)> objective_fn;
    if (cfg.objective == "footprint_min") {
        objective_fn = [&](double s) {
            const auto& ev = evaluate_lc(s);
            return static_cast<double>(memory_footprint(reference, ev.lc.state).bytes_total);
        };
    } else if (cfg.objective == "flops_min") {
        objective_fn = [&](double s) {
            const auto& ev = evaluate_lc(s);
            if (cfg.scheme.is_structured()) {
                auto masks = structure_masks(reference, ev.lc.state);
                auto thinned = thin_model(ev.lc.model, masks);
                return static_cast<double>(count_flops(thinned).flops_total);
            }
            return static_cast<double>(count_flops(ev.lc.model).flops_total);
        };
    } else {  // synthetic:<name>
        const SyntheticCurve curve = SyntheticCurve::make(cfg.objective.substr(10), cfg.seed);
        direction = Direction::Maximize;
        objective_fn = [curve](double s) { return curve(s); };
    }

    BlackBox obj_box(objective_fn, cfg.search.grid_size);
    Stage2Result stage2 = stage2_optimize(obj_box, stage1.s_acc, direction, cfg.search);

    result.s_acc = stage1.s_acc;
    result.s_star = stage2.s_star;
    result.objective_value = stage2.objective;
    const auto& final_eval = evaluate_lc(stage2.s_star);
    result.accuracy = final_eval.lc.accuracy;

    save_model(final_eval.lc.model, (out_dir / "compressed.json").string());
    if (cfg.scheme.is_structured()) {
        auto masks = structure_masks(reference, final_eval.lc.state);
        save_masks(reference, masks, (out_dir / "masks.json").string());
        save_model(thin_model(final_eval.lc.model, masks), (out_dir / "thinned.json").string());
    }

    std::vector<SearchSample> all_rows = stage1.state.trace;
    all_rows.insert(all_rows.end(), stage2.state.trace.begin(), stage2.state.trace.end());
    write_text_file((out_dir / "search_trace.csv").string(), search_trace_csv(all_rows));
    write_text_file((out_dir / "result.json").string(), result_json(result));
    return result;
}

}  // namespace taper
