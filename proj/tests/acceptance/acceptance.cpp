// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "ikan/ikan.hpp"

using namespace ikan;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void report(int id, const char* name, const std::function<Verdict()>& body) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const ikan::Error& e) {
        v = {false, std::string(e.kind()) + ": " + e.what()};
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("%s %d %s: %s [%.2fs]\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
}

double weighted_sum(const Tensor& out, const Tensor& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
    return s;
}

Tensor uniform(Shape shape, std::uint64_t seed, double lo, double hi) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    fill_uniform(t, lo, hi, rng);
    return t;
}

// ---------------------------------------------------------------------------

Verdict spline_correctness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> points(1000);
    for (auto& x : points) x = unit(rng);
    double worst = 0.0;
    std::size_t max_nonzero = 0;
    for (std::size_t g = 5; g <= 30; ++g) {
        const KnotVector kv = make_knots(0.0, 1.0, g, 3);
        for (double x : points) {
            const auto b = bspline_basis(kv, x);
            double sum = 0.0;
            std::size_t nz = 0;
            for (double v : b) {
                sum += v;
                nz += v != 0.0;
            }
            worst = std::max(worst, std::abs(sum - 1.0));
            max_nonzero = std::max(max_nonzero, nz);
        }
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-9 && max_nonzero <= 4 && t < 5.0,
            fmt("max |sum-1| = %.3g over G=5..30 x 1000 points, max nonzero = %zu, %.3fs", worst, max_nonzero, t)};
}

Verdict gradient_fidelity() {
    const auto t0 = Clock::now();
    std::vector<std::pair<std::string, double>> errors;

    {
        Linear l(6, 4);
        std::mt19937_64 rng(2);
        l.init(rng);
        Tensor x = uniform({5, 6}, 3, -1, 1), gx;
        const Tensor w = uniform({5, 4}, 4, -1, 1);
        ParamRefs params{&l.weights, &l.bias};
        auto targets = grad_targets(params);
        targets.push_back({&x, &gx});
        errors.emplace_back("linear", grad_check([&] { return weighted_sum(l.forward(x), w); },
                                                 [&] {
                                                     zero_grads(params);
                                                     l.forward(x);
                                                     gx = l.backward(w);
                                                 },
                                                 targets)
                                          .max_relative_error);
    }
    {
        ChannelConv c(2, 3);
        std::mt19937_64 rng(5);
        c.init(rng);
        Tensor x = uniform({2, 2, 7, 3}, 6, -1, 1), gx;
        const Tensor w = uniform({2, 3, 5, 3}, 7, -1, 1);
        ParamRefs params{&c.kernels, &c.bias};
        auto targets = grad_targets(params);
        targets.push_back({&x, &gx});
        errors.emplace_back("conv", grad_check([&] { return weighted_sum(c.forward(x), w); },
                                               [&] {
                                                   zero_grads(params);
                                                   c.forward(x);
                                                   gx = c.backward(w);
                                               },
                                               targets)
                                        .max_relative_error);
    }
    {
        Encoder e = build_encoder({14, 3, 3, 2}, 9);
        std::mt19937_64 rng(10);
        fill_uniform(e.aggregate().scores.value, -0.5, 0.5, rng);
        const Tensor x = uniform({2, 1, 14, 3}, 11, -1, 1);
        const Tensor w = uniform({2, 6}, 12, -1, 1);
        ParamRefs params = e.parameters();
        errors.emplace_back("encoder", grad_check([&] { return weighted_sum(e.forward(x), w); },
                                                  [&] {
                                                      zero_grads(params);
                                                      e.forward(x);
                                                      e.backward(w);
                                                  },
                                                  grad_targets(params))
                                           .max_relative_error);
    }
    for (bool use_base : {false, true}) {
        KanLayer layer(KanLayerConfig{4, 3, 0.0, 1.0, 8, 3, use_base});
        std::mt19937_64 rng(13);
        layer.init(rng);
        Tensor x = uniform({6, 4}, 14, 0.02, 0.98), gx;
        const Tensor w = uniform({6, 3}, 15, -1, 1);
        ParamRefs params = layer.parameters();
        auto targets = grad_targets(params);
        targets.push_back({&x, &gx});
        errors.emplace_back(use_base ? "kan+base" : "kan", grad_check([&] { return weighted_sum(layer.forward(x), w); },
                                                                    [&] {
                                                                        zero_grads(params);
                                                                        layer.forward(x);
                                                                        gx = layer.backward(w);
                                                                    },
                                                                    targets)
                                                             .max_relative_error);
    }
    const double t = seconds_since(t0);
    bool ok = t < 60.0;
    std::string detail;
    for (const auto& [name, err] : errors) {
        ok = ok && err < 1e-4;
        detail += fmt("%s %.2e, ", name.c_str(), err);
    }
    return {ok, detail + fmt("eps 1e-5, %.2fs", t)};
}

Verdict locality_theorem() {
    const RedistributionConfig rc{6, 4.0};
    KanClassifierConfig kc;
    kc.grid_number = 30;
    kc.order = 3;
    kc.use_base = false;
    KanClassifier model(kc, 17);
    const auto [lo, hi] = task_interval(rc, 2);

    std::mt19937_64 rng(18);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, 12);
    const std::size_t n = 256;
    Tensor x({n, kc.in_dim});
    std::vector<int> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < kc.in_dim; ++i) {
            const double u = r == 0 ? 0.0 : r == 1 ? 1.0 : unit(rng);
            x[r * kc.in_dim + i] = redistribute(rc, 2, u);
        }
        y[r] = label(rng);
    }

    const Tensor before = model.layers()[0].spline_coefs.value;
    const ParamRefs params = model.parameters();
    for (int step = 0; step < 100; ++step) {
        auto lg = softmax_cross_entropy(model.forward(x), y);
        model.backward(lg.grad);
        adam_step(params, AdamConfig{0.1});
    }
    const Tensor& after = model.layers()[0].spline_coefs.value;

    const KnotVector kv = make_knots(0.0, 1.0, 30, 3);
    const auto fp = locality_footprint(kv, lo, hi);
    const std::set<std::size_t> inside(fp.begin(), fp.end());
    const std::size_t nb = kv.basis_count();
    std::size_t outside = 0, outside_changed = 0, inside_changed = 0;
    for (std::size_t e = 0; e < after.size(); ++e) {
        const bool same = std::bit_cast<std::uint64_t>(after[e]) == std::bit_cast<std::uint64_t>(before[e]);
        if (inside.count(e % nb)) {
            inside_changed += !same;
        } else {
            ++outside;
            outside_changed += !same;
        }
    }
    return {outside_changed == 0 && inside_changed > 0 && model.input_clamp_events() == 0,
            fmt("interval [%.4f, %.4f], footprint %zu of %zu bases; %zu outside coefficients, %zu changed; "
                "%zu inside changed",
                lo, hi, inside.size(), nb, outside, outside_changed, inside_changed)};
}

double oracle_f1(const std::vector<int>& t, const std::vector<int>& p, int classes) {
    std::vector<std::vector<double>> cm(classes, std::vector<double>(classes, 0.0));
    for (std::size_t i = 0; i < t.size(); ++i) cm[t[i]][p[i]] += 1.0;
    double total = 0.0;
    for (int c = 0; c < classes; ++c) {
        double row = 0.0, col = 0.0;
        for (int o = 0; o < classes; ++o) {
            row += cm[c][o];
            col += cm[o][c];
        }
        if (row == 0.0) continue;
        const double prec = col > 0.0 ? cm[c][c] / col : 0.0;
        const double rec = cm[c][c] / row;
        total += (prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0) * row;
    }
    return total / static_cast<double>(t.size());
}

Verdict metric_oracles() {
    double worst = 0.0;
    auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

    const std::vector<int> t{0, 0, 1}, p{0, 1, 1};
    check(weighted_f1(t, p), 2.0 / 3.0);
    const std::vector<int> t2{0, 1, 1, 2}, wrong{3, 3, 3, 3};
    check(weighted_f1(t2, wrong), 0.0);
    check(weighted_f1(t2, t2), 1.0);

    ResultMatrix m2(2);
    m2.set(0, 0, 0.8);
    m2.set(0, 1, 0.8);
    m2.set(1, 1, 0.9);
    check(last_performance(m2), 0.85);
    check(aip(m2), 0.825);

    ResultMatrix mf(2);
    mf.set(0, 0, 0.9);
    mf.set(0, 1, 0.7);
    mf.set(1, 1, 0.8);
    check(forgetting(mf, 1), 0.2);

    ResultMatrix m3(3);
    m3.set(0, 0, 0.9);
    m3.set(0, 1, 0.8);
    m3.set(0, 2, 0.85);
    m3.set(1, 1, 0.8);
    m3.set(1, 2, 0.8);
    m3.set(2, 2, 0.8);
    check(forgetting_of(m3, 0, 2), 0.05);

    ResultMatrix m1(1);
    m1.set(0, 0, 0.88);
    const std::vector<double> ref{0.9};
    check(intransigence(m1, ref), 0.02);

    std::mt19937_64 rng(2024);
    double worst_random = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng() % 5;
        const int classes = 2 + static_cast<int>(rng() % 6);
        std::uniform_int_distribution<int> cls(0, classes - 1);
        std::vector<std::vector<double>> perf(k, std::vector<double>(k));
        ResultMatrix m(k);
        for (std::size_t stage = 0; stage < k; ++stage)
            for (std::size_t task = 0; task <= stage; ++task) {
                std::vector<int> yt(40), yp(40);
                const double acc = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
                for (std::size_t n = 0; n < 40; ++n) {
                    yt[n] = cls(rng);
                    yp[n] = std::uniform_real_distribution<double>(0, 1)(rng) < acc ? yt[n] : cls(rng);
                }
                perf[task][stage] = oracle_f1(yt, yp, classes);
                m.set(task, stage, weighted_f1(yt, yp));
            }
        double aip_sum = 0.0;
        for (std::size_t s = 0; s < k; ++s) {
            double col = 0.0;
            for (std::size_t i = 0; i <= s; ++i) col += perf[i][s];
            aip_sum += col / static_cast<double>(s + 1);
        }
        worst_random = std::max(worst_random, std::abs(aip(m) - aip_sum / static_cast<double>(k)));
        for (std::size_t i = 1; i < k; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                double best = perf[j][j];
                for (std::size_t s = j + 1; s < i; ++s) best = std::max(best, perf[j][s]);
                sum += best - perf[j][i];
            }
            worst_random = std::max(worst_random, std::abs(forgetting(m, i) - sum / static_cast<double>(i)));
        }
    }
    return {worst <= 1e-12 && worst_random <= 1e-12,
            fmt("hand examples max error %.2e; 50 random logs max error %.2e", worst, worst_random)};
}

// ---------------------------------------------------------------------------
// Criteria 5 to 9 share one stage-1 preparation of the synthetic stream.

struct Shared {
    ExperimentConfig base;
    std::optional<PreparedStream> stream;
    double stage1_seconds = 0.0;
    std::optional<ResultsReport> ikan, ewc, replay10, replay200;
    std::optional<ClassifierStageResult> ikan_stage2;
    double ikan_seconds = 0.0, ewc_seconds = 0.0, replay10_seconds = 0.0;
};

fs::path config_path() { return fs::path(IKAN_SOURCE_DIR) / "configs" / "acceptance_stream.json"; }

void prepare(Shared& s) {
    if (s.stream) return;
    s.base = load_config(config_path());
    const auto t0 = Clock::now();
    s.stream = prepare_stream(s.base);
    s.stage1_seconds = seconds_since(t0);
}

ResultsReport run_method(Shared& s, Method m, std::size_t replay_m, double* secs) {
    ExperimentConfig c = s.base;
    c.method = m;
    c.replay_m = replay_m;
    const auto t0 = Clock::now();
    ResultsReport r = run_experiment(c, *s.stream);
    if (secs) *secs = seconds_since(t0);
    return r;
}

Verdict label_algebra(Shared& s) {
    std::size_t round_trips = 0;
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t c = 0; c < 13; ++c) round_trips += localize(globalize(t, c)) == std::make_pair(t, c);

    bool disjoint = true;
    for (double beta : {1.0, 4.0, 10.0}) {
        const RedistributionConfig rc{6, beta};
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = i + 1; j < 6; ++j) {
                const auto a = task_interval(rc, i), b = task_interval(rc, j);
                disjoint = disjoint && (a.second < b.first || b.second < a.first);
            }
    }

    prepare(s);
    const auto t0 = Clock::now();
    s.ikan_stage2 = train_classifier_stage(*s.stream, s.base);
    s.ikan = make_report(s.base, *s.stream, *s.ikan_stage2);
    s.ikan_seconds = seconds_since(t0);
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < s.stream->tasks.size(); ++i) {
        const auto& task = s.stream->tasks[i];
        for (const Tensor* f : {&task.train_features, &task.test_features}) {
            const Tensor x = s.ikan_stage2->registry->features_to_inputs(i, *f);
            for (double v : x.values()) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    const bool in_range = lo >= 0.0 && hi < 1.0;
    return {round_trips == 78 && disjoint && in_range && s.ikan->kan_clamp_events == 0,
            fmt("%zu/78 round trips, intervals disjoint for beta 1,4,10: %s; end-to-end inputs in [%.4f, %.4f], "
                "KAN clamp events %zu (normalizer clamps on unseen-subject features: %zu)",
                round_trips, disjoint ? "yes" : "no", lo, hi, s.ikan->kan_clamp_events,
                s.ikan->normalizer_clamp_events)};
}

Verdict continual_benchmark(Shared& s) {
    prepare(s);
    if (!s.ikan) s.ikan = run_method(s, Method::ikan, s.base.replay_m, &s.ikan_seconds);
    s.ewc = run_method(s, Method::ewc, s.base.replay_m, &s.ewc_seconds);
    s.replay10 = run_method(s, Method::replay, 10, &s.replay10_seconds);
    const auto& r = *s.ikan;
    const double mean_ref =
        std::accumulate(r.reference_scores.begin(), r.reference_scores.end(), 0.0) / r.reference_scores.size();
    const double runtime = s.stage1_seconds + s.ikan_seconds + s.ewc_seconds + s.replay10_seconds;
    const bool ok = r.forgetting < 0.02 && std::abs(r.last_performance - mean_ref) <= 0.02 &&
                    s.ewc->forgetting >= 3.0 * r.forgetting && s.replay10->forgetting >= 3.0 * r.forgetting &&
                    r.last_performance > s.replay10->last_performance &&
                    s.replay10->last_performance > s.ewc->last_performance && runtime < 600.0;
    return {ok, fmt("iKAN LP %.4f F %.4f (mean ref %.4f); replay m=10 LP %.4f F %.4f; EWC LP %.4f F %.4f; "
                    "stage 1 %.1fs, total %.1fs",
                    r.last_performance, r.forgetting, mean_ref, s.replay10->last_performance, s.replay10->forgetting,
                    s.ewc->last_performance, s.ewc->forgetting, s.stage1_seconds, runtime)};
}

Verdict grid_sweep(Shared& s) {
    prepare(s);
    const auto t0 = Clock::now();
    const auto rows = sweep_grid(s.base, parse_grid_list("5..30"), *s.stream);
    const double runtime = s.stage1_seconds + seconds_since(t0);
    const SweepRow& g5 = rows.front();
    const SweepRow& g30 = rows.back();
    std::size_t below = 0;
    for (const auto& row : rows) below += row.forgetting < 0.02;
    return {g5.grid == 5 && g30.grid == 30 && g5.forgetting > g30.forgetting && g5.forgetting > 0.1 &&
                g30.forgetting < 0.02 && runtime < 1800.0,
            fmt("F(G=5) %.4f, F(G=30) %.4f, %zu of %zu grids below 0.02, %.1fs including stage 1", g5.forgetting,
                g30.forgetting, below, rows.size(), runtime)};
}

Verdict replay_memory(Shared& s) {
    prepare(s);
    if (!s.replay10) s.replay10 = run_method(s, Method::replay, 10, nullptr);
    s.replay200 = run_method(s, Method::replay, 200, nullptr);
    return {s.replay200->forgetting <= s.replay10->forgetting,
            fmt("F(m=200) %.4f <= F(m=10) %.4f (mean over stages %.4f vs %.4f)", s.replay200->forgetting,
                s.replay10->forgetting, s.replay200->forgetting_mean, s.replay10->forgetting_mean)};
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict determinism() {
    const fs::path root = fs::temp_directory_path() / "ikan_acceptance_determinism";
    fs::remove_all(root);
    std::string reports[2];
    for (int i = 0; i < 2; ++i) {
        const fs::path out = root / ("run" + std::to_string(i));
        const std::string cmd = std::string("\"") + IKAN_CLI_PATH + "\" run --config \"" + config_path().string() +
                                "\" --out \"" + out.string() + "\" > /dev/null";
        const int status = std::system(cmd.c_str());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "ikan_cli run failed: " + cmd};
        reports[i] = read_bytes(out / "report.json");
    }
    const bool same = !reports[0].empty() && reports[0] == reports[1];
    return {same, fmt("two CLI runs from %s: report.json %zu bytes, %s", config_path().filename().c_str(),
                      reports[0].size(), same ? "byte-identical" : "different")};
}

}  // namespace

int main() {
    Shared shared;
    report(1, "spline correctness", spline_correctness);
    report(2, "gradient fidelity", gradient_fidelity);
    report(3, "locality theorem", locality_theorem);
    report(4, "metric oracles", metric_oracles);
    report(5, "label and redistribution algebra", [&] { return label_algebra(shared); });
    report(6, "desk-scale continual benchmark", [&] { return continual_benchmark(shared); });
    report(7, "grid-sweep trend", [&] { return grid_sweep(shared); });
    report(8, "replay memory monotonicity", [&] { return replay_memory(shared); });
    report(9, "determinism", determinism);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures;
}
