#include "mfc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mfc/common.hpp"
#include "mfc/error.hpp"

namespace mfc {

namespace {

struct Path {
    std::vector<double> x, y; // standardized coordinates
};

std::vector<double> sample_times(Rng& rng, double scale) {
    std::uniform_int_distribution<int> count(40, 60);
    std::uniform_real_distribution<double> step(15.0, 35.0);
    const int T = count(rng);
    std::vector<double> t(static_cast<std::size_t>(T));
    t[0] = std::round(std::uniform_real_distribution<double>(0.0, 50.0)(rng));
    for (std::size_t j = 1; j < t.size(); ++j) t[j] = t[j - 1] + std::round(step(rng) * scale);
    return t;
}

std::vector<double> progress(const std::vector<double>& t) {
    std::vector<double> tau(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) tau[j] = (t[j] - t.front()) / (t.back() - t.front());
    return tau;
}

Path peak_path(const std::vector<double>& tau, double amplitude) {
    Path p;
    for (double s : tau) {
        p.x.push_back(0.1 + 0.8 * s);
        p.y.push_back(0.2 + 0.3 * amplitude * std::sin(std::numbers::pi * s));
    }
    return p;
}

double wave_y(double u) { return 0.5 + 0.15 * std::sin(2.0 * std::numbers::pi * u); }

// Position along the common path; class 2 runs forward to `turn`, back to `back`, then to the end.
Path wave_path(const std::vector<double>& tau, double gamma, bool revisit, double turn, double back) {
    Path p;
    for (double s : tau) {
        const double w = std::pow(s, gamma);
        double u = w;
        if (revisit) {
            if (w < 0.45) u = turn * w / 0.45;
            else if (w < 0.65) u = turn + (back - turn) * (w - 0.45) / 0.2;
            else u = back + (1.0 - back) * (w - 0.65) / 0.35;
        }
        p.x.push_back(0.1 + 0.8 * u);
        p.y.push_back(wave_y(u));
    }
    return p;
}

RawRecord to_record(std::size_t i, const std::vector<double>& t, const Path& path, Rng& rng) {
    std::uniform_int_distribution<int> width(1000, 1600), height(700, 1000);
    std::normal_distribution<double> noise(0.0, 0.003);
    const Viewport vp{static_cast<double>(width(rng)), static_cast<double>(height(rng))};
    std::vector<double> values;
    for (std::size_t j = 0; j < t.size(); ++j) {
        values.push_back(std::round((path.x[j] + noise(rng)) * vp.width * 10.0) / 10.0);
        values.push_back(std::round((path.y[j] + noise(rng)) * vp.height * 10.0) / 10.0);
    }
    char id[32];
    std::snprintf(id, sizeof id, "r%04zu", i + 1);
    return RawRecord{id, "q1", Curve(t, std::move(values), 2), vp};
}

} // namespace

const std::vector<std::string>& synth_scenarios() {
    static const std::vector<std::string> names{"amplitude", "timewarp", "xor"};
    return names;
}

SynthData synthesize(const std::string& scenario, std::size_t n, std::uint64_t seed) {
    if (std::find(synth_scenarios().begin(), synth_scenarios().end(), scenario) == synth_scenarios().end())
        throw InvalidInput("unknown scenario '" + scenario + "' (expected amplitude, timewarp or xor)");
    SynthData out{{}, {}, AoiPartition({{'A', 0.0, 0.0, 0.35, 0.6}, {'B', 0.35, 0.0, 0.65, 0.6}, {'C', 0.65, 0.0, 1.0, 0.6}}, 'O')};
    const std::uint64_t tag = hash_string(scenario);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, {tag, i}));
        int label = static_cast<int>(i % 2) + 1;
        std::vector<double> t;
        Path path;
        if (scenario == "amplitude") {
            t = sample_times(rng, 1.0);
            const double a = std::normal_distribution<double>(label == 1 ? 1.0 : 2.0, 0.1)(rng);
            path = peak_path(progress(t), a);
        } else if (scenario == "timewarp") {
            t = sample_times(rng, 1.0);
            const double gamma = std::uniform_real_distribution<double>(0.7, 1.4)(rng);
            const double turn = std::uniform_real_distribution<double>(0.6, 0.7)(rng);
            const double back = std::uniform_real_distribution<double>(0.25, 0.35)(rng);
            path = wave_path(progress(t), gamma, label == 2, turn, back);
        } else {
            std::bernoulli_distribution attribute(0.3);
            const bool high = attribute(rng);
            const bool slow = attribute(rng);
            label = (high != slow) ? 2 : 1;
            t = sample_times(rng, slow ? 2.0 : 1.0);
            const double a = std::normal_distribution<double>(high ? 2.0 : 1.0, 0.1)(rng);
            path = peak_path(progress(t), a);
        }
        RawRecord rec = to_record(i, t, path, rng);
        out.labels[{rec.id, rec.question}] = label;
        out.records.push_back(std::move(rec));
    }
    return out;
}

RunConfig synth_config(std::uint64_t seed) {
    RunConfig c = default_config();
    c.data.trajectories = "trajectories.csv";
    c.data.labels = "labels.csv";
    c.data.aoi = "aoi.json";
    c.seed = seed;
    c.output = "out";
    c.roster.clear();
    for (const char* n : {"L2", "dcor", "dtw", "frechet", "hausdorff", "mean", "globMax-x", "globMax-y", "globMax",
                          "globRange-y"})
        c.roster.push_back({n, 0});
    // Derivative curves and velocity measures see height and speed as one product, which
    // would separate the xor classes on its own; the compact roster leaves them out.
    for (const char* n : {"measure:RT", "measure:flips2d"}) c.roster.push_back({n, 0});
    c.roster.push_back({"aitchison", 0});
    c.roster.push_back({"levenshtein", 0, "euclidean", true});
    return c;
}

void write_synth(const std::filesystem::path& dir, const std::string& scenario, std::size_t n, std::uint64_t seed) {
    const SynthData data = synthesize(scenario, n, seed);
    std::filesystem::create_directories(dir);
    write_trajectories(dir / "trajectories.csv", data.records);
    write_labels(dir / "labels.csv", data.labels);
    write_aoi(dir / "aoi.json", data.aoi);
    save_config(dir / "config.json", synth_config(seed));
}

} // namespace mfc
