#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "ikan/kan.hpp"
#include "ikan/mlp.hpp"
#include "ikan/task_manager.hpp"

namespace ikan {

// Checkpoint of a trained pipeline: the task registry (descriptors, frozen
// encoders, normalizers) and the shared classifier, in one JSON document.

namespace detail {

inline nlohmann::json tensors_to_json(const ParamRefs& params) {
    nlohmann::json out = nlohmann::json::array();
    for (const Parameter* p : params) out.push_back({{"shape", p->value.shape()}, {"data", p->value.storage()}});
    return out;
}

inline void tensors_from_json(const nlohmann::json& j, const ParamRefs& params, const std::string& what) {
    if (j.size() != params.size())
        throw FormatError(what + ": " + std::to_string(j.size()) + " tensors stored, " +
                          std::to_string(params.size()) + " expected");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Shape shape = j[i].at("shape").get<Shape>();
        if (shape != params[i]->value.shape())
            throw FormatError(what + ": tensor " + std::to_string(i) + " has shape " + shape_str(shape) +
                              ", expected " + shape_str(params[i]->value.shape()));
        params[i]->assign(Tensor(shape, j[i].at("data").get<std::vector<double>>()));
    }
}

}  // namespace detail

struct Checkpoint {
    std::shared_ptr<TaskRegistry> registry;
    std::shared_ptr<Classifier> classifier;
};

inline nlohmann::json checkpoint_to_json(const TaskRegistry& registry, Classifier& classifier) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const TaskDescriptor& d : registry.tasks()) {
        const EncoderSpec& s = d.encoder->spec();
        tasks.push_back({{"name", d.name},
                         {"window", d.shape.window},
                         {"channels", d.shape.channels},
                         {"class_count", d.class_count},
                         {"manual_id", d.manual_id},
                         {"conv_channels", s.conv_channels},
                         {"fusion_dim", s.fusion_dim},
                         {"encoder", detail::tensors_to_json(d.encoder->parameters())},
                         {"normalizer", {{"min", d.normalizer.min}, {"max", d.normalizer.max}}}});
    }
    nlohmann::json model{{"kind", classifier.kind()}, {"parameters", detail::tensors_to_json(classifier.parameters())}};
    if (auto* kan = dynamic_cast<KanClassifier*>(&classifier)) {
        const auto& c = kan->config();
        model["in_dim"] = c.in_dim;
        model["out_dim"] = c.out_dim;
        model["hidden"] = c.hidden;
        model["grid_number"] = c.grid_number;
        model["order"] = c.order;
        model["use_base"] = c.use_base;
        model["range_min"] = c.range_min;
        model["range_max"] = c.range_max;
    } else if (auto* mlp = dynamic_cast<MlpClassifier*>(&classifier)) {
        model["in_dim"] = mlp->input_dim();
        model["hidden"] = mlp->hidden_dim();
        model["out_dim"] = mlp->output_dim();
    } else {
        throw FormatError("cannot checkpoint classifier of kind '" + classifier.kind() + "'");
    }
    const auto& rc = registry.redistribution();
    return {{"registry",
             {{"total_tasks", rc.total_tasks},
              {"beta", rc.beta},
              {"redistribute", registry.redistributes()},
              {"output_dim", registry.output_dim()},
              {"tasks", tasks}}},
            {"classifier", model}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    Checkpoint out;
    try {
        const auto& r = j.at("registry");
        out.registry = std::make_shared<TaskRegistry>(
            RedistributionConfig{r.at("total_tasks").get<std::size_t>(), r.at("beta").get<double>()},
            r.at("redistribute").get<bool>(), r.at("output_dim").get<std::size_t>());
        for (const auto& t : r.at("tasks")) {
            EncoderSpec spec{t.at("window").get<std::size_t>(), t.at("channels").get<std::size_t>(),
                             t.at("conv_channels").get<std::size_t>(), t.at("fusion_dim").get<std::size_t>()};
            auto enc = std::make_shared<Encoder>(spec);
            detail::tensors_from_json(t.at("encoder"), enc->parameters(),
                                      "encoder of '" + t.at("name").get<std::string>() + "'");
            enc->freeze();
            TaskDescriptor d;
            d.name = t.at("name").get<std::string>();
            d.shape = {spec.window, spec.channels};
            d.class_count = t.at("class_count").get<std::size_t>();
            d.manual_id = t.at("manual_id").get<bool>();
            d.encoder = std::move(enc);
            d.normalizer.min = t.at("normalizer").at("min").get<std::vector<double>>();
            d.normalizer.max = t.at("normalizer").at("max").get<std::vector<double>>();
            out.registry->register_task(std::move(d));
        }
        const auto& m = j.at("classifier");
        const std::string kind = m.at("kind").get<std::string>();
        if (kind == "kan") {
            KanClassifierConfig c;
            c.in_dim = m.at("in_dim").get<std::size_t>();
            c.out_dim = m.at("out_dim").get<std::size_t>();
            c.hidden = m.at("hidden").get<std::vector<std::size_t>>();
            c.grid_number = m.at("grid_number").get<std::size_t>();
            c.order = m.at("order").get<std::size_t>();
            c.use_base = m.at("use_base").get<bool>();
            c.range_min = m.at("range_min").get<double>();
            c.range_max = m.at("range_max").get<double>();
            out.classifier = std::make_shared<KanClassifier>(c);
        } else if (kind == "mlp") {
            out.classifier = std::make_shared<MlpClassifier>(
                m.at("in_dim").get<std::size_t>(), m.at("hidden").get<std::size_t>(),
                 m.at("out_dim").get<std::size_t>());
        } else {
            throw FormatError("unknown classifier kind '" + kind + "'");
        }
        detail::tensors_from_json(m.at("parameters"), out.classifier->parameters(), "classifier");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const TaskRegistry& registry, Classifier& classifier) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << checkpoint_to_json(registry, classifier).dump() << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace ikan
