// Command-line front end: run, sweep, gen-synth, inspect.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ikan/checkpoint.hpp"
#include "ikan/experiment.hpp"

namespace {

using namespace ikan;

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void print_summary(const ResultsReport& r) {
    std::printf("method            %s\n", to_string(r.config.method).c_str());
    std::printf("tasks             %zu\n", r.task_names.size());
    std::printf("last performance  %.6f\n", r.last_performance);
    std::printf("aip               %.6f\n", r.aip);
    std::printf("forgetting        %.6f\n", r.forgetting);
    std::printf("intransigence     %.6f\n", r.intransigence);
    std::printf("kan clamps        %zu\n", r.kan_clamp_events);
    std::printf("normalizer clamps %zu\n", r.normalizer_clamp_events);
}

int cmd_run(const std::string& config_path, const std::string& out) {
    const ExperimentConfig cfg = load_config(config_path);
    const PreparedStream stream = prepare_stream(cfg);
    const ClassifierStageResult stage2 = train_classifier_stage(stream, cfg);
    const ResultsReport report = make_report(cfg, stream, stage2);
    emit_report(report, out);
    save_checkpoint(std::filesystem::path(out) / "checkpoint.json", *stage2.registry, *stage2.classifier);
    print_summary(report);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& grids, const std::string& out) {
    const ExperimentConfig cfg = load_config(config_path);
    const auto rows = sweep_grid(cfg, parse_grid_list(grids));
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out + ": " + ec.message());
    const std::string csv = sweep_csv(rows);
    write_text(std::filesystem::path(out) / "sweep.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_gen_synth(const std::string& spec_path, const std::string& out) {
    const SynthTaskSpec spec = synth_from_json(read_json(spec_path));
    const Dataset ds = synth_recordings(spec);
    write_dataset(out, ds);
    std::printf("wrote %zu subjects of '%s' to %s\n", ds.recordings.size(), ds.meta.name.c_str(), out.c_str());
    return 0;
}

// Recomputes every metric from the stored matrix and compares with the
// stored values.
int cmd_inspect(const std::string& report_path) {
    const nlohmann::json j = read_json(report_path);
    const ResultsReport r = report_from_json(j);
    print_summary(r);
    const auto& m = j.at("metrics");
    const std::pair<const char*, double> checks[] = {{"last_performance", r.last_performance},
                                                     {"aip", r.aip},
                                                     {"forgetting", r.forgetting},
                                                     {"intransigence", r.intransigence}};
    for (const auto& [key, value] : checks)
        if (std::abs(m.at(key).get<double>() - value) > 1e-12)
            throw FormatError(std::string("stored ") + key + " does not match the result matrix");
    std::printf("metrics consistent with the result matrix\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iKAN continual-learning toolkit"};
    app.require_subcommand(1);

    std::string config, out = "out", grids = "5..30", spec, report;
    auto* run = app.add_subcommand("run", "train one method over a task stream");
    run->add_option("--config", config, "experiment config JSON")->required();
    run->add_option("--out", out, "output directory");
    auto* sweep = app.add_subcommand("sweep", "iKAN grid-number sweep");
    sweep->add_option("--config", config, "experiment config JSON")->required();
    sweep->add_option("--grids", grids, "grid list: 5..30, 5..30..5 or 5,15,30");
    sweep->add_option("--out", out, "output directory");
    auto* gen = app.add_subcommand("gen-synth", "write a synthetic task as a dataset directory");
    gen->add_option("--spec", spec, "synthetic task JSON")->required();
    gen->add_option("--out", out, "dataset directory")->required();
    auto* inspect = app.add_subcommand("inspect", "summarize and verify a report");
    inspect->add_option("--report", report, "report.json")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config, out);
        if (*sweep) return cmd_sweep(config, grids, out);
        if (*gen) return cmd_gen_synth(spec, out);
        if (*inspect) return cmd_inspect(report);
    } catch (const ikan::Error& e) {
        std::fprintf(stderr, "%s: %s\n", e.kind(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "Error: %s\n", e.what());
        return 2;
    }
    return 1;
}
