#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ikan/tensor.hpp"
#include "ikan/task_manager.hpp"

namespace ikan {

struct DatasetMeta {
    std::string name;
    std::size_t channels = 0;
    double sampling_rate = 0.0;
    std::size_t window_size = 0;
    std::size_t class_count = 0;
    std::vector<int> subjects;
    std::size_t leave_out_n = 1;
    std::vector<std::string> class_names;
};

// One subject's continuous recording: length x channels samples, row-major.
struct Recording {
    int subject = 0;
    std::size_t channels = 0;
    std::vector<double> samples;
    std::vector<int> labels;

    std::size_t length() const { return labels.size(); }
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Recording> recordings;
    std::vector<std::string> warnings;
};

struct WindowSet {
    Tensor windows;  // (M,1,W,C)
    std::vector<int> labels;
    std::vector<int> subjects;

    std::size_t size() const { return labels.size(); }

    WindowSet subset(std::span<const std::size_t> idx) const {
        WindowSet out;
        out.windows = windows.gather_rows(idx);
        for (std::size_t i : idx) {
            out.labels.push_back(labels[i]);
            out.subjects.push_back(subjects[i]);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// On-disk format: meta.json plus subject_<id>.csv with header
// t,ch_0,...,ch_{C-1},label.

inline nlohmann::json meta_to_json(const DatasetMeta& m) {
    return {{"name", m.name},
            {"channels", m.channels},
            {"sampling_rate", m.sampling_rate},
            {"window_size", m.window_size},
            {"class_count", m.class_count},
            {"leave_out_n", m.leave_out_n},
            {"class_names", m.class_names}};
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
    DatasetMeta m;
    try {
        m.name = j.at("name").get<std::string>();
        m.channels = j.at("channels").get<std::size_t>();
        m.sampling_rate = j.at("sampling_rate").get<double>();
        m.window_size = j.at("window_size").get<std::size_t>();
        m.class_count = j.at("class_count").get<std::size_t>();
        m.leave_out_n = j.at("leave_out_n").get<std::size_t>();
        m.class_names = j.value("class_names", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("meta.json: ") + e.what());
    }
    if (m.channels == 0 || m.window_size == 0 || m.class_count == 0 || !(m.sampling_rate > 0.0))
        throw FormatError("meta.json: channels, window_size, class_count and sampling_rate must be positive");
    if (m.class_count > kClassifierOutputs)
        throw FormatError("meta.json: class_count " + std::to_string(m.class_count) + " exceeds " +
                          std::to_string(kClassifierOutputs));
    return m;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && s[i] == ' ') ++i;
    return s.substr(i);
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(where + ": '" + s + "' is not a number");
    }
}

inline std::string csv_header(std::size_t channels) {
    std::string h = "t";
    for (std::size_t c = 0; c < channels; ++c) h += ",ch_" + std::to_string(c);
    return h + ",label";
}

}  // namespace detail

inline Recording load_subject_csv(const std::filesystem::path& file, int subject, const DatasetMeta& meta) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    Recording rec;
    rec.subject = subject;
    rec.channels = meta.channels;
    std::string line;
    if (!std::getline(in, line)) return rec;
    const auto header = detail::split_csv(detail::trim(line));
    if (header.size() != meta.channels + 2)
        throw SchemaError(file.string() + ": header has " + std::to_string(header.size() - 2) +
                          " channels but meta declares " + std::to_string(meta.channels));
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        const std::string where = file.filename().string() + ":" + std::to_string(row);
        if (cells.size() != meta.channels + 2)
            throw SchemaError(where + ": row has " + std::to_string(cells.size() >= 2 ? cells.size() - 2 : 0) +
                              " channels but meta declares " + std::to_string(meta.channels));
        for (std::size_t c = 0; c < meta.channels; ++c)
            rec.samples.push_back(detail::parse_double(detail::trim(cells[c + 1]), where));
        const std::string lab = detail::trim(cells.back());
        int label = 0;
        auto [ptr, ec] = std::from_chars(lab.data(), lab.data() + lab.size(), label);
        if (ec != std::errc() || ptr != lab.data() + lab.size())
            throw LabelError(where + ": label '" + lab + "' is not an integer");
        if (label < 0 || static_cast<std::size_t>(label) >= meta.class_count)
            throw LabelError(where + ": label " + std::to_string(label) + " outside [0," +
                             std::to_string(meta.class_count) + ")");
        rec.labels.push_back(label);
    }
    return rec;
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path meta_path = dir / "meta.json";
    if (!fs::exists(meta_path)) throw FormatError("missing " + meta_path.string());
    std::ifstream in(meta_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(meta_path.string() + ": " + e.what());
    }
    Dataset ds;
    ds.meta = meta_from_json(j);

    std::map<int, fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string fname = entry.path().filename().string();
        if (fname.rfind("subject_", 0) != 0 || entry.path().extension() != ".csv") continue;
        const std::string id = fname.substr(8, fname.size() - 8 - 4);
        int sid = 0;
        auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), sid);
        if (ec != std::errc() || ptr != id.data() + id.size())
            throw FormatError(fname + ": subject id must be an integer");
        files[sid] = entry.path();
    }
    for (const auto& [sid, path] : files) {
        Recording rec = load_subject_csv(path, sid, ds.meta);
        if (rec.length() == 0) {
            ds.warnings.push_back(path.filename().string() + " has no samples; skipped");
            continue;
        }
        ds.meta.subjects.push_back(sid);
        ds.recordings.push_back(std::move(rec));
    }
    return ds;
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    {
        std::ofstream out(dir / "meta.json");
        if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
        out << meta_to_json(ds.meta).dump(2) << '\n';
    }
    char buf[32];
    for (const auto& rec : ds.recordings) {
        const fs::path path = dir / ("subject_" + std::to_string(rec.subject) + ".csv");
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        out << detail::csv_header(rec.channels) << '\n';
        for (std::size_t t = 0; t < rec.length(); ++t) {
            out << t;
            for (std::size_t c = 0; c < rec.channels; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", rec.samples[t * rec.channels + c]);
                out << ',' << buf;
            }
            out << ',' << rec.labels[t] << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Windowing and splitting

struct WindowingResult {
    WindowSet windows;
    std::vector<std::string> warnings;
};

// Sliding windows of meta.window_size with the given stride, never crossing a
// recording boundary. A window takes the majority label (lowest on ties).
inline WindowingResult make_windows(const std::vector<Recording>& recordings, const DatasetMeta& meta,
                                    std::size_t stride) {
    if (stride == 0) throw RangeError("window stride must be at least 1");
    const std::size_t w = meta.window_size, c = meta.channels;
    WindowingResult res;
    std::vector<double> data;
    for (const auto& rec : recordings) {
        if (rec.channels != c)
            throw SchemaError("subject " + std::to_string(rec.subject) + " has " + std::to_string(rec.channels) +
                              " channels, meta declares " + std::to_string(c));
        if (rec.length() < w) {
            res.warnings.push_back("subject " + std::to_string(rec.subject) + " is shorter than one window");
            continue;
        }
        for (std::size_t start = 0; start + w <= rec.length(); start += stride) {
            data.insert(data.end(), rec.samples.begin() + static_cast<long>(start * c),
                        rec.samples.begin() + static_cast<long>((start + w) * c));
            std::map<int, std::size_t> votes;
            for (std::size_t t = start; t < start + w; ++t) votes[rec.labels[t]]++;
            auto best = std::max_element(votes.begin(), votes.end(),
                                         [](const auto& a, const auto& b) { return a.second < b.second; });
            res.windows.labels.push_back(best->first);
            res.windows.subjects.push_back(rec.subject);
        }
    }
    res.windows.windows = Tensor({res.windows.labels.size(), 1, w, c}, std::move(data));
    return res;
}

struct Split {
    WindowSet train;
    WindowSet validation;
    WindowSet test;
};

// leave_out_n seeded subjects form the test split; 10% of the remaining
// windows (seeded) are carved out for validation.
inline Split split_leave_n_subjects(const WindowSet& ws, const DatasetMeta& meta, std::uint64_t fold_seed,
                                    double validation_fraction = 0.1) {
    std::set<int> subject_set(ws.subjects.begin(), ws.subjects.end());
    std::vector<int> subjects(subject_set.begin(), subject_set.end());
    if (meta.leave_out_n == 0 || meta.leave_out_n >= subjects.size())
        throw RangeError("cannot leave " + std::to_string(meta.leave_out_n) + " of " +
                         std::to_string(subjects.size()) + " subjects out");
    std::mt19937_64 rng(fold_seed);
    std::shuffle(subjects.begin(), subjects.end(), rng);
    const std::set<int> test_subjects(subjects.begin(), subjects.begin() + static_cast<long>(meta.leave_out_n));

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < ws.size(); ++i)
        (test_subjects.count(ws.subjects[i]) ? test_idx : train_idx).push_back(i);

    std::vector<std::size_t> shuffled = train_idx;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const double n_val_real = validation_fraction * static_cast<double>(shuffled.size());
    std::size_t n_val = static_cast<std::size_t>(std::floor(n_val_real));
    if (n_val == 0 && shuffled.size() >= 2 && validation_fraction > 0.0) n_val = 1;
    std::vector<std::size_t> val_idx(shuffled.begin(), shuffled.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> fit_idx(shuffled.begin() + static_cast<long>(n_val), shuffled.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(fit_idx.begin(), fit_idx.end());
    return {ws.subset(fit_idx), ws.subset(val_idx), ws.subset(test_idx)};
}

// ---------------------------------------------------------------------------
// Synthetic heterogeneous tasks

struct SynthTaskSpec {
    std::string name = "synth";
    std::size_t window = 64;
    std::size_t channels = 4;
    std::size_t class_count = 5;
    std::size_t samples_per_class = 10;  // windows per class per subject
    std::size_t subjects = 5;
    std::size_t leave_out_n = 1;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
};

inline nlohmann::json synth_to_json(const SynthTaskSpec& s) {
    return {{"name", s.name},
            {"window", s.window},
            {"channels", s.channels},
            {"class_count", s.class_count},
            {"samples_per_class", s.samples_per_class},
            {"subjects", s.subjects},
            {"leave_out_n", s.leave_out_n},
            {"noise_sigma", s.noise_sigma},
            {"seed", s.seed}};
}

inline SynthTaskSpec synth_from_json(const nlohmann::json& j) {
    SynthTaskSpec s;
    try {
        s.name = j.value("name", s.name);
        s.window = j.at("window").get<std::size_t>();
        s.channels = j.at("channels").get<std::size_t>();
        s.class_count = j.at("class_count").get<std::size_t>();
        s.samples_per_class = j.value("samples_per_class", s.samples_per_class);
        s.subjects = j.value("subjects", s.subjects);
        s.leave_out_n = j.value("leave_out_n", s.leave_out_n);
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic task spec: ") + e.what());
    }
    return s;
}

// Continuous per-subject recordings. Class y occupies one contiguous segment
// of samples_per_class * W steps per subject; within it
//
//   x[t,c] = sum_{h=0..2} a[y,h] * sin(2*pi*f[y,h]*t/W + phi[s,c,h]) + noise,
//
// with per-class frequencies/amplitudes fixed per task, per-subject phases
// phi[s,c,h] = channel_phase[c,h] + offset[s,h] + jitter, and Gaussian noise
// of standard deviation noise_sigma. Primary frequencies sit in distinct slots
// of the band [0.03W, 0.2W] cycles per window.
inline Dataset synth_recordings(const SynthTaskSpec& spec) {
    if (spec.class_count == 0 || spec.class_count > kClassifierOutputs)
        throw RangeError("synthetic class count must lie in [1," + std::to_string(kClassifierOutputs) + "]");
    if (spec.window == 0 || spec.channels == 0 || spec.subjects == 0 || spec.samples_per_class == 0)
        throw RangeError("synthetic task extents must be positive");
    constexpr std::size_t kHarmonics = 3;
    const double two_pi = 2.0 * std::numbers::pi;
    const auto w = static_cast<double>(spec.window);
    const std::size_t k = spec.class_count;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::size_t> slot(k);
    std::iota(slot.begin(), slot.end(), std::size_t{0});
    std::shuffle(slot.begin(), slot.end(), rng);

    const double band_lo = 0.03 * w, band_hi = 0.2 * w;
    const double slot_width = (band_hi - band_lo) / static_cast<double>(k);
    std::vector<std::array<double, kHarmonics>> freq(k), amp(k);
    for (std::size_t y = 0; y < k; ++y) {
        freq[y][0] = band_lo + (static_cast<double>(slot[y]) + 0.25 + 0.5 * unit(rng)) * slot_width;
        amp[y][0] = 0.6 + 0.8 * unit(rng);
        for (std::size_t h = 1; h < kHarmonics; ++h) {
            freq[y][h] = band_lo + (band_hi - band_lo) * unit(rng);
            amp[y][h] = 0.05 + 0.15 * unit(rng);
        }
    }

    Dataset ds;
    ds.meta.name = spec.name;
    ds.meta.channels = spec.channels;
    ds.meta.sampling_rate = 50.0;
    ds.meta.window_size = spec.window;
    ds.meta.class_count = k;
    ds.meta.leave_out_n = spec.leave_out_n;
    for (std::size_t y = 0; y < k; ++y) ds.meta.class_names.push_back("class_" + std::to_string(y));

    // Channel phases are fixed per task; a subject shifts every harmonic by
    // its own offset and adds a small per-channel jitter.
    std::vector<double> channel_phase(spec.channels * kHarmonics);
    for (auto& p : channel_phase) p = two_pi * unit(rng);

    std::normal_distribution<double> noise(0.0, 1.0);
    const std::size_t seg = spec.samples_per_class * spec.window;
    for (std::size_t s = 0; s < spec.subjects; ++s) {
        std::array<double, kHarmonics> offset{};
        for (auto& o : offset) o = two_pi * unit(rng);
        std::vector<double> phase(spec.channels * kHarmonics);
        for (std::size_t c = 0; c < spec.channels; ++c)
            for (std::size_t h = 0; h < kHarmonics; ++h)
                phase[c * kHarmonics + h] =
                    channel_phase[c * kHarmonics + h] + offset[h] + 0.5 * (unit(rng) - 0.5);
        Recording rec;
        rec.subject = static_cast<int>(s);
        rec.channels = spec.channels;
        rec.samples.reserve(k * seg * spec.channels);
        for (std::size_t y = 0; y < k; ++y) {
            for (std::size_t i = 0; i < seg; ++i) {
                const auto t = static_cast<double>(y * seg + i);
                for (std::size_t c = 0; c < spec.channels; ++c) {
                    double v = 0.0;
                    for (std::size_t h = 0; h < kHarmonics; ++h)
                        v += amp[y][h] * std::sin(two_pi * freq[y][h] * t / w + phase[c * kHarmonics + h]);
                    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(rng);
                    rec.samples.push_back(v);
                }
                rec.labels.push_back(static_cast<int>(y));
            }
        }
        ds.meta.subjects.push_back(rec.subject);
        ds.recordings.push_back(std::move(rec));
    }
    return ds;
}

struct SynthTask {
    DatasetMeta meta;
    WindowSet windows;
};

// Non-overlapping windows over synth_recordings: every window is single-label.
inline SynthTask synth_task(const SynthTaskSpec& spec) {
    Dataset ds = synth_recordings(spec);
    return {ds.meta, make_windows(ds.recordings, ds.meta, spec.window).windows};
}

}  // namespace ikan
