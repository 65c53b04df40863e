#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ikan/adam.hpp"
#include "ikan/baselines.hpp"
#include "ikan/data.hpp"
#include "ikan/encoder.hpp"
#include "ikan/kan.hpp"
#include "ikan/metrics.hpp"
#include "ikan/mlp.hpp"
#include "ikan/redistribution.hpp"
#include "ikan/task_manager.hpp"

namespace ikan {

// ---------------------------------------------------------------------------
// Configuration

enum class Method { ikan, ewc, replay };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::ikan: return "ikan";
        case Method::ewc: return "ewc";
        case Method::replay: return "replay";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "ikan") return Method::ikan;
    if (s == "ewc") return Method::ewc;
    if (s == "replay") return Method::replay;
    throw ConfigError("unknown method '" + s + "' (expected ikan, ewc or replay)");
}

struct EncoderStageConfig {
    std::size_t epochs = 100;
    std::size_t patience = 30;
    double lr = 0.1;
    std::size_t batch = 512;
    std::size_t head_hidden = 128;
};

struct ClassifierStageConfig {
    std::size_t epochs = 30;
    double lr = 0.1;
    std::size_t batch = 512;
};

// A stream entry: a dataset directory or a synthetic task.
struct TaskSource {
    std::optional<SynthTaskSpec> synth;
    std::string path;
    std::optional<std::size_t> stride;  // dataset windows; default W/2
};

struct ExperimentConfig {
    Method method = Method::ikan;
    std::vector<TaskSource> tasks;
    std::size_t n_tasks = 6;
    double beta = 4.0;
    std::size_t grid_number = 30;
    std::size_t spline_order = 3;
    bool use_base = false;
    std::vector<std::size_t> kan_hidden;
    double ewc_lambda = 80.0;
    std::size_t fisher_samples = 4096;
    std::size_t replay_m = 200;
    std::size_t conv_channels = 10;
    std::size_t fusion_dim = 8;
    std::size_t mlp_hidden = 128;
    EncoderStageConfig stage1;
    ClassifierStageConfig stage2;
    std::uint64_t model_seed = 0;
    std::uint64_t fold_seed = 0;

    void validate() const {
        if (tasks.empty()) throw ConfigError("task stream is empty");
        if (tasks.size() > n_tasks)
            throw ConfigError("stream has " + std::to_string(tasks.size()) + " tasks but n_tasks is " +
                              std::to_string(n_tasks));
        if (grid_number == 0) throw ConfigError("grid_number must be at least 1");
        if (beta < 0.0) throw ConfigError("beta must be non-negative");
        if (stage1.batch == 0 || stage2.batch == 0) throw ConfigError("batch sizes must be positive");
        if (!(stage1.lr > 0.0) || !(stage2.lr > 0.0)) throw ConfigError("learning rates must be positive");
        if (ewc_lambda < 0.0) throw ConfigError("ewc_lambda must be non-negative");
    }
};

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : c.tasks) {
        nlohmann::json e;
        if (t.synth) e["synth"] = synth_to_json(*t.synth);
        else e["path"] = t.path;
        if (t.stride) e["stride"] = *t.stride;
        tasks.push_back(e);
    }
    return {{"method", to_string(c.method)},
            {"tasks", tasks},
            {"n_tasks", c.n_tasks},
            {"beta", c.beta},
            {"grid_number", c.grid_number},
            {"spline_order", c.spline_order},
            {"use_base", c.use_base},
            {"kan_hidden", c.kan_hidden},
            {"ewc_lambda", c.ewc_lambda},
            {"fisher_samples", c.fisher_samples},
            {"replay_m", c.replay_m},
            {"conv_channels", c.conv_channels},
            {"fusion_dim", c.fusion_dim},
            {"mlp_hidden", c.mlp_hidden},
            {"stage1",
             {{"epochs", c.stage1.epochs},
              {"patience", c.stage1.patience},
              {"lr", c.stage1.lr},
              {"batch", c.stage1.batch},
              {"head_hidden", c.stage1.head_hidden}}},
            {"stage2", {{"epochs", c.stage2.epochs}, {"lr", c.stage2.lr}, {"batch", c.stage2.batch}}},
            {"seeds", {{"model", c.model_seed}, {"fold", c.fold_seed}}}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.method = method_from_string(j.value("method", std::string("ikan")));
        for (const auto& e : j.at("tasks")) {
            TaskSource t;
            if (e.contains("synth")) t.synth = synth_from_json(e.at("synth"));
            else if (e.contains("path")) t.path = e.at("path").get<std::string>();
            else throw ConfigError("task entries need either 'synth' or 'path'");
            if (e.contains("stride")) t.stride = e.at("stride").get<std::size_t>();
            c.tasks.push_back(std::move(t));
        }
        c.n_tasks = j.value("n_tasks", c.n_tasks);
        c.beta = j.value("beta", c.beta);
        c.grid_number = j.value("grid_number", c.grid_number);
        c.spline_order = j.value("spline_order", c.spline_order);
        c.use_base = j.value("use_base", c.use_base);
        c.kan_hidden = j.value("kan_hidden", c.kan_hidden);
        c.ewc_lambda = j.value("ewc_lambda", c.ewc_lambda);
        c.fisher_samples = j.value("fisher_samples", c.fisher_samples);
        c.replay_m = j.value("replay_m", c.replay_m);
        c.conv_channels = j.value("conv_channels", c.conv_channels);
        c.fusion_dim = j.value("fusion_dim", c.fusion_dim);
        c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
        if (j.contains("stage1")) {
            const auto& s = j.at("stage1");
            c.stage1.epochs = s.value("epochs", c.stage1.epochs);
            c.stage1.patience = s.value("patience", c.stage1.patience);
            c.stage1.lr = s.value("lr", c.stage1.lr);
            c.stage1.batch = s.value("batch", c.stage1.batch);
            c.stage1.head_hidden = s.value("head_hidden", c.stage1.head_hidden);
        }
        if (j.contains("stage2")) {
            const auto& s = j.at("stage2");
            c.stage2.epochs = s.value("epochs", c.stage2.epochs);
            c.stage2.lr = s.value("lr", c.stage2.lr);
            c.stage2.batch = s.value("batch", c.stage2.batch);
        }
        if (j.contains("seeds")) {
            c.model_seed = j.at("seeds").value("model", c.model_seed);
            c.fold_seed = j.at("seeds").value("fold", c.fold_seed);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// splitmix64 of (seed, stream): independent generator seeds per purpose.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Stage 1: encoder + two-layer head per task

struct EncoderStageResult {
    std::shared_ptr<Encoder> encoder;
    Normalizer normalizer;
    double reference_score = 0.0;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double best_validation = 0.0;
};

namespace detail {

inline std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

inline std::vector<int> gather_labels(const std::vector<int>& labels, std::span<const std::size_t> idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(labels[i]);
    return out;
}

struct HeadScore {
    double f1 = 0.0;
    double loss = 0.0;
};

inline HeadScore head_score(Encoder& enc, MlpClassifier& head, const WindowSet& ws, std::size_t classes) {
    if (ws.size() == 0) return {};
    const Tensor logits = head.forward(enc.encode(ws.windows));
    std::vector<int> pred(logits.dim(0));
    for (std::size_t r = 0; r < pred.size(); ++r) pred[r] = static_cast<int>(masked_argmax(logits.row(r), classes));
    return {weighted_f1(ws.labels, pred), softmax_cross_entropy(logits, ws.labels).loss};
}

}  // namespace detail

// Trains encoder + head with Adam and cross-entropy, early-stopping on the
// validation weighted F1 (ties go to the lower validation loss). Restores the
// best epoch, freezes the encoder, fits the normalizer on training features
// and scores the head on the test split.
inline EncoderStageResult train_encoder_stage(const Split& split, const EncoderSpec& spec, std::size_t class_count,
                                              const EncoderStageConfig& cfg, std::uint64_t seed) {
    if (split.train.size() == 0) throw EmptyDataError("task has no training windows");
    constexpr std::size_t kMicroBatch = 64;
    auto encoder = std::make_shared<Encoder>(build_encoder(spec, derive_seed(seed, 1)));
    MlpClassifier head(spec.feature_dim(), cfg.head_hidden, class_count, derive_seed(seed, 2));
    std::mt19937_64 rng(derive_seed(seed, 3));
    const AdamConfig adam{cfg.lr};

    ParamRefs params = encoder->trainable_parameters();
    for (auto* p : head.parameters()) params.push_back(p);
    zero_grads(params);

    const WindowSet& val = split.validation.size() ? split.validation : split.train;
    EncoderStageResult res;
    detail::HeadScore best{-1.0, 0.0};
    std::vector<Tensor> best_params = snapshot(params);
    std::size_t since_best = 0;
    std::vector<std::size_t> order = detail::iota_indices(split.train.size());

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            const double batch_n = static_cast<double>(end - start);
            double loss = 0.0;
            for (std::size_t ms = start; ms < end; ms += kMicroBatch) {
                const std::size_t me = std::min(end, ms + kMicroBatch);
                std::span<const std::size_t> idx(order.data() + ms, me - ms);
                const auto labels = detail::gather_labels(split.train.labels, idx);
                Tensor logits = head.forward(encoder->forward(split.train.windows.gather_rows(idx)));
                auto lg = softmax_cross_entropy(logits, labels);
                const double scale = static_cast<double>(me - ms) / batch_n;
                for (auto& g : lg.grad.values()) g *= scale;
                loss += lg.loss * scale;
                encoder->backward(head.backward(lg.grad));
            }
            if (!std::isfinite(loss))
                throw TrainingDivergedError("encoder training diverged at epoch " + std::to_string(epoch));
            adam_step(params, adam);
        }
        res.epochs_run = epoch;
        const detail::HeadScore score = detail::head_score(*encoder, head, val, class_count);
        if (score.f1 > best.f1 || (score.f1 == best.f1 && score.loss < best.loss)) {
            best = score;
            best_params = snapshot(params);
            res.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    restore(params, best_params);
    res.best_validation = best.f1;
    encoder->freeze();
    res.normalizer = fit_normalizer(encoder->encode(split.train.windows));
    res.reference_score = detail::head_score(*encoder, head, split.test, class_count).f1;
    res.encoder = std::move(encoder);
    return res;
}

// A task after stage 1: everything stage 2 needs, independent of the method.
struct PreparedTask {
    std::string name;
    DatasetMeta meta;
    Split split;
    EncoderStageResult stage1;
    Tensor train_features;  // frozen-encoder outputs
    Tensor test_features;
    std::uint64_t encoder_hash = 0;
    double stage1_seconds = 0.0;
    std::vector<std::string> warnings;
};

struct PreparedStream {
    nlohmann::json fingerprint;  // the config fields stage 1 depends on
    std::vector<PreparedTask> tasks;
};

inline nlohmann::json stage1_fingerprint(const ExperimentConfig& c) {
    nlohmann::json j = config_to_json(c);
    return {{"tasks", j["tasks"]},
            {"conv_channels", j["conv_channels"]},
            {"fusion_dim", j["fusion_dim"]},
            {"stage1", j["stage1"]},
            {"seeds", j["seeds"]}};
}

inline PreparedTask prepare_task(const TaskSource& src, std::size_t index, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    PreparedTask t;
    WindowSet windows;
    if (src.synth) {
        SynthTask st = synth_task(*src.synth);
        t.meta = st.meta;
        windows = std::move(st.windows);
    } else {
        Dataset ds = load_dataset(src.path);
        t.warnings = ds.warnings;
        t.meta = ds.meta;
        const std::size_t stride = src.stride.value_or(std::max<std::size_t>(1, ds.meta.window_size / 2));
        auto wr = make_windows(ds.recordings, ds.meta, stride);
        t.warnings.insert(t.warnings.end(), wr.warnings.begin(), wr.warnings.end());
        windows = std::move(wr.windows);
    }
    t.name = t.meta.name;
    t.split = split_leave_n_subjects(windows, t.meta, derive_seed(cfg.fold_seed, index));
    EncoderSpec spec{t.meta.window_size, t.meta.channels, cfg.conv_channels, cfg.fusion_dim};
    t.stage1 =
        train_encoder_stage(t.split, spec, t.meta.class_count, cfg.stage1, derive_seed(cfg.model_seed, 100 + index));
    t.train_features = t.stage1.encoder->encode(t.split.train.windows);
    t.test_features = t.stage1.encoder->encode(t.split.test.windows);
    t.encoder_hash = parameter_hash(t.stage1.encoder->parameters());
    t.stage1_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return t;
}

inline PreparedStream prepare_stream(const ExperimentConfig& cfg) {
    cfg.validate();
    PreparedStream ps;
    ps.fingerprint = stage1_fingerprint(cfg);
    for (std::size_t i = 0; i < cfg.tasks.size(); ++i) ps.tasks.push_back(prepare_task(cfg.tasks[i], i, cfg));
    return ps;
}

// ---------------------------------------------------------------------------
// Stage 2: one shared classifier over the task stream

struct ClassifierStageResult {
    ResultMatrix matrix;
    std::shared_ptr<TaskRegistry> registry;
    std::shared_ptr<Classifier> classifier;
    std::size_t kan_clamp_events = 0;
    std::size_t normalizer_clamp_events = 0;
    std::vector<double> stage2_seconds;
    std::vector<std::vector<double>> final_losses;  // per task, per epoch mean loss
};

inline std::shared_ptr<Classifier> make_classifier(const ExperimentConfig& cfg, std::size_t feature_dim) {
    const std::uint64_t seed = derive_seed(cfg.model_seed, 7);
    if (cfg.method == Method::ikan) {
        KanClassifierConfig kc;
        kc.in_dim = feature_dim;
        kc.out_dim = kClassifierOutputs;
        kc.hidden = cfg.kan_hidden;
        kc.grid_number = cfg.grid_number;
        kc.order = cfg.spline_order;
        kc.use_base = cfg.use_base;
        return std::make_shared<KanClassifier>(kc, seed);
    }
    return std::make_shared<MlpClassifier>(feature_dim, cfg.mlp_hidden, kClassifierOutputs, seed);
}

inline ClassifierStageResult train_classifier_stage(const PreparedStream& stream, const ExperimentConfig& cfg) {
    if (stream.fingerprint != stage1_fingerprint(cfg))
        throw ConfigError("prepared stream was built from a different stage-1 configuration");
    const std::size_t k_tasks = stream.tasks.size();
    ClassifierStageResult res;
    res.matrix = ResultMatrix(k_tasks);
    res.registry =
        std::make_shared<TaskRegistry>(RedistributionConfig{cfg.n_tasks, cfg.beta}, cfg.method == Method::ikan);
    const std::size_t feature_dim = 2 * cfg.conv_channels;
    res.classifier = make_classifier(cfg, feature_dim);
    Classifier& model = *res.classifier;
    const ParamRefs params = model.parameters();
    const AdamConfig adam{cfg.stage2.lr};
    std::mt19937_64 shuffle_rng(derive_seed(cfg.model_seed, 8));
    std::mt19937_64 replay_rng(derive_seed(cfg.model_seed, 9));
    ReplayBuffer buffer(cfg.replay_m, derive_seed(cfg.model_seed, 10));
    std::vector<FisherAnchor> anchors;

    std::vector<Tensor> test_inputs;
    for (std::size_t k = 0; k < k_tasks; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const PreparedTask& task = stream.tasks[k];
        TaskDescriptor d;
        d.name = task.name;
        d.shape = {task.meta.window_size, task.meta.channels};
        d.class_count = task.meta.class_count;
        d.encoder = task.stage1.encoder;
        d.normalizer = task.stage1.normalizer;
        const std::size_t id = res.registry->register_task(std::move(d));

        const Tensor train_x = res.registry->features_to_inputs(id, task.train_features);
        test_inputs.push_back(res.registry->features_to_inputs(id, task.test_features));
        const std::vector<int>& train_y = task.split.train.labels;

        reset_optimizer(params);
        zero_grads(params);
        std::vector<std::size_t> order = detail::iota_indices(train_x.dim(0));
        std::vector<double> epoch_losses;
        for (std::size_t epoch = 1; epoch <= cfg.stage2.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            double loss_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t start = 0; start < order.size(); start += cfg.stage2.batch) {
                const std::size_t end = std::min(order.size(), start + cfg.stage2.batch);
                std::span<const std::size_t> idx(order.data() + start, end - start);
                const Tensor xb = train_x.gather_rows(idx);
                const auto yb = detail::gather_labels(train_y, idx);
                double loss = 0.0;
                if (cfg.method == Method::replay) {
                    loss = replay_train_step(model, xb, yb, buffer, replay_rng).loss;
                } else {
                    auto lg = softmax_cross_entropy(model.forward(xb), yb);
                    model.backward(lg.grad);
                    loss = lg.loss;
                    if (cfg.method == Method::ewc && !anchors.empty()) {
                        loss += ewc_penalty(model, anchors);
                        ewc_penalty_backward(model, anchors);
                    }
                }
                if (!std::isfinite(loss))
                    throw TrainingDivergedError("classifier training diverged on task " + std::to_string(k) +
                                                " at epoch " + std::to_string(epoch));
                adam_step(params, adam);
                loss_sum += loss;
                ++batches;
            }
            epoch_losses.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
        }
        res.final_losses.push_back(std::move(epoch_losses));

        if (cfg.method == Method::ewc)
            anchors.push_back(ewc_fisher(model, train_x, task.meta.class_count, cfg.ewc_lambda, cfg.fisher_samples));
        if (cfg.method == Method::replay)
            for (std::size_t r = 0; r < train_x.dim(0); ++r)
                replay_add(buffer, train_x.row(r), globalize(id, static_cast<std::size_t>(train_y[r])));

        for (std::size_t i = 0; i <= k; ++i) {
            const PreparedTask& ti = stream.tasks[i];
            if (ti.split.test.size() == 0) throw EmptyDataError("task '" + ti.name + "' has no test windows");
            const auto pred = predict_local(model, test_inputs[i], ti.meta.class_count);
            res.matrix.set(i, k, weighted_f1(ti.split.test.labels, pred));
        }
        res.stage2_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    if (auto* kan = dynamic_cast<KanClassifier*>(res.classifier.get()))
        res.kan_clamp_events = kan->input_clamp_events();
    res.normalizer_clamp_events = res.registry->normalizer_clamp_events();
    return res;
}

// ---------------------------------------------------------------------------
// Report

struct ResultsReport {
    ExperimentConfig config;
    std::vector<std::string> task_names;
    ResultMatrix matrix;
    std::vector<double> reference_scores;
    double last_performance = 0.0;
    double aip = 0.0;
    double forgetting = 0.0;       // F after the last task
    double forgetting_mean = 0.0;  // mean of F_1..F_{K-1}
    std::vector<double> forgetting_curve;
    double intransigence = 0.0;
    std::vector<double> intransigence_per_task;
    std::vector<double> stage_performance;
    std::size_t kan_clamp_events = 0;
    std::size_t normalizer_clamp_events = 0;
    bool encoders_unchanged = true;
    nlohmann::json tasks_info = nlohmann::json::array();
    // Wall-clock timings; written to timing.json, never to report.json.
    std::vector<double> stage1_seconds;
    std::vector<double> stage2_seconds;
};

inline void compute_metrics(ResultsReport& r) {
    const std::size_t k = r.matrix.n_tasks();
    r.stage_performance.clear();
    for (std::size_t s = 0; s < k; ++s) r.stage_performance.push_back(stage_performance(r.matrix, s));
    r.last_performance = last_performance(r.matrix);
    r.aip = aip(r.matrix);
    r.forgetting_curve = forgetting_curve(r.matrix);
    r.forgetting = r.forgetting_curve.empty() ? 0.0 : r.forgetting_curve.back();
    r.forgetting_mean = r.forgetting_curve.empty()
                            ? 0.0
                            : std::accumulate(r.forgetting_curve.begin(), r.forgetting_curve.end(), 0.0) /
                                  static_cast<double>(r.forgetting_curve.size());
    r.intransigence_per_task = intransigence_per_task(r.matrix, r.reference_scores);
    r.intransigence = intransigence(r.matrix, r.reference_scores);
}

inline ResultsReport make_report(const ExperimentConfig& cfg, const PreparedStream& stream,
                                 const ClassifierStageResult& stage2) {
    ResultsReport r;
    r.config = cfg;
    r.matrix = stage2.matrix;
    for (const auto& t : stream.tasks) {
        r.task_names.push_back(t.name);
        r.reference_scores.push_back(t.stage1.reference_score);
        r.stage1_seconds.push_back(t.stage1_seconds);
        r.encoders_unchanged = r.encoders_unchanged && parameter_hash(t.stage1.encoder->parameters()) == t.encoder_hash;
        r.tasks_info.push_back({{"name", t.name},
                                {"window", t.meta.window_size},
                                {"channels", t.meta.channels},
                                {"class_count", t.meta.class_count},
                                {"train_windows", t.split.train.size()},
                                {"validation_windows", t.split.validation.size()},
                                {"test_windows", t.split.test.size()},
                                {"reference_score", t.stage1.reference_score},
                                {"stage1_epochs", t.stage1.epochs_run},
                                {"stage1_best_epoch", t.stage1.best_epoch},
                                {"warnings", t.warnings}});
    }
    r.stage2_seconds = stage2.stage2_seconds;
    r.kan_clamp_events = stage2.kan_clamp_events;
    r.normalizer_clamp_events = stage2.normalizer_clamp_events;
    compute_metrics(r);
    return r;
}

inline ResultsReport run_experiment(const ExperimentConfig& cfg, const PreparedStream& stream) {
    return make_report(cfg, stream, train_classifier_stage(stream, cfg));
}

inline ResultsReport run_experiment(const ExperimentConfig& cfg) {
    const PreparedStream stream = prepare_stream(cfg);
    return run_experiment(cfg, stream);
}

inline nlohmann::json matrix_to_json(const ResultMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.n_tasks(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < m.n_tasks(); ++k) {
            auto v = m.get(i, k);
            if (v) row.push_back(*v);
            else row.push_back(nullptr);
        }
        rows.push_back(row);
    }
    return rows;
}

inline ResultMatrix matrix_from_json(const nlohmann::json& j) {
    ResultMatrix m(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        for (std::size_t k = 0; k < j[i].size(); ++k)
            if (!j[i][k].is_null()) m.set(i, k, j[i][k].get<double>());
    return m;
}

inline nlohmann::json report_to_json(const ResultsReport& r) {
    return {{"config", config_to_json(r.config)},
            {"tasks", r.tasks_info},
            {"task_names", r.task_names},
            {"result_matrix", matrix_to_json(r.matrix)},
            {"reference_scores", r.reference_scores},
            {"metrics",
             {{"last_performance", r.last_performance},
              {"aip", r.aip},
              {"forgetting", r.forgetting},
              {"forgetting_mean", r.forgetting_mean},
              {"forgetting_curve", r.forgetting_curve},
              {"intransigence", r.intransigence},
              {"intransigence_per_task", r.intransigence_per_task},
              {"stage_performance", r.stage_performance}}},
            {"diagnostics",
             {{"kan_clamp_events", r.kan_clamp_events},
              {"normalizer_clamp_events", r.normalizer_clamp_events},
              {"encoders_unchanged", r.encoders_unchanged}}}};
}

// Parses report.json and recomputes every metric from the embedded matrix.
inline ResultsReport report_from_json(const nlohmann::json& j) {
    ResultsReport r;
    try {
        r.config = config_from_json(j.at("config"));
        r.task_names = j.at("task_names").get<std::vector<std::string>>();
        r.matrix = matrix_from_json(j.at("result_matrix"));
        r.reference_scores = j.at("reference_scores").get<std::vector<double>>();
        r.tasks_info = j.at("tasks");
        const auto& d = j.at("diagnostics");
        r.kan_clamp_events = d.at("kan_clamp_events").get<std::size_t>();
        r.normalizer_clamp_events = d.at("normalizer_clamp_events").get<std::size_t>();
        r.encoders_unchanged = d.at("encoders_unchanged").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
    compute_metrics(r);
    return r;
}

inline std::string format_cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::string matrix_csv(const ResultMatrix& m, const std::vector<std::string>& names) {
    std::string s = "task";
    for (const auto& n : names) s += ",after_" + n;
    s += '\n';
    for (std::size_t i = 0; i < m.n_tasks(); ++i) {
        s += names[i];
        for (std::size_t k = 0; k < m.n_tasks(); ++k) {
            s += ',';
            if (auto v = m.get(i, k)) s += format_cell(*v);
        }
        s += '\n';
    }
    return s;
}

// report.json, matrix.csv and timing.json under `dir`.
inline void emit_report(const ResultsReport& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "report.json", report_to_json(r).dump(2) + "\n");
    write_text(dir / "matrix.csv", matrix_csv(r.matrix, r.task_names));
    nlohmann::json timing{{"stage1_seconds", r.stage1_seconds}, {"stage2_seconds", r.stage2_seconds}};
    write_text(dir / "timing.json", timing.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Grid sweep

struct SweepRow {
    std::size_t grid = 0;
    double forgetting = 0.0;
    double forgetting_mean = 0.0;
    double intransigence = 0.0;
    double last_performance = 0.0;
    double aip = 0.0;
};

// One iKAN run per grid number over a shared stage-1 preparation.
inline std::vector<SweepRow> sweep_grid(const ExperimentConfig& base, const std::vector<std::size_t>& grids,
                                        const PreparedStream& stream) {
    std::vector<SweepRow> rows;
    for (std::size_t g : grids) {
        if (g == 0) throw ConfigError("grid numbers must be at least 1");
        ExperimentConfig cfg = base;
        cfg.method = Method::ikan;
        cfg.grid_number = g;
        const ResultsReport r = run_experiment(cfg, stream);
        rows.push_back({g, r.forgetting, r.forgetting_mean, r.intransigence, r.last_performance, r.aip});
    }
    return rows;
}

inline std::vector<SweepRow> sweep_grid(const ExperimentConfig& base, const std::vector<std::size_t>& grids) {
    return sweep_grid(base, grids, prepare_stream(base));
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string s = "grid,forgetting,forgetting_mean,intransigence,last_performance,aip\n";
    for (const auto& r : rows)
        s += std::to_string(r.grid) + "," + format_cell(r.forgetting) + "," + format_cell(r.forgetting_mean) + "," +
             format_cell(r.intransigence) + "," + format_cell(r.last_performance) + "," + format_cell(r.aip) + "\n";
    return s;
}

// "5..30" (step 1), "5..30..5", or "5,15,30".
inline std::vector<std::size_t> parse_grid_list(const std::string& text) {
    std::vector<std::size_t> out;
    auto to_num = [&](const std::string& s) -> std::size_t {
        try {
            std::size_t used = 0;
            long v = std::stol(s, &used);
            if (used != s.size() || v < 1) throw std::invalid_argument(s);
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ConfigError("bad grid value '" + s + "' in '" + text + "'");
        }
    };
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const std::string rest = text.substr(dots + 2);
        const auto dots2 = rest.find("..");
        const std::size_t lo = to_num(text.substr(0, dots));
        const std::size_t hi = to_num(rest.substr(0, dots2));
        const std::size_t step = dots2 == std::string::npos ? 1 : to_num(rest.substr(dots2 + 2));
        if (hi < lo) throw ConfigError("empty grid range '" + text + "'");
        for (std::size_t g = lo; g <= hi; g += step) out.push_back(g);
        return out;
    }
    std::string cell;
    std::istringstream is(text);
    while (std::getline(is, cell, ',')) out.push_back(to_num(cell));
    if (out.empty()) throw ConfigError("no grid values in '" + text + "'");
    return out;
}

}  // namespace ikan
