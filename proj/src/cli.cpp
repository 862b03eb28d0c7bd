#include "mfc/cli.hpp"

#include <cctype>
#include <iostream>

#include <CLI11.hpp>

#include "mfc/cvharness.hpp"
#include "mfc/distance_matrix.hpp"
#include "mfc/error.hpp"
#include "mfc/synth.hpp"

namespace mfc {

RunConfig effective_config(const CliOptions& opts) {
    if (opts.config.empty()) throw ConfigError("--config is required");
    RunConfig c = load_config(opts.config);
    if (opts.seed) c.seed = *opts.seed;
    if (opts.gate) c.ensemble.gate = *opts.gate;
    if (opts.out) c.output = std::filesystem::absolute(*opts.out).string();
    return c;
}

std::filesystem::path cmd_preprocess(const CliOptions& opts, std::ostream& log) {
    const RunConfig c = effective_config(opts);
    const Dataset data = load_dataset(c);
    std::filesystem::create_directories(c.output_dir());
    const auto path = c.output_dir() / "preprocessed.json";
    write_preprocessed(path, data);
    log << "preprocessed " << data.size() << " samples (" << data.class_count << " classes, "
        << data.skipped_unlabeled << " unlabeled skipped) -> " << path.string() << "\n";
    return path;
}

void cmd_distances(const CliOptions& opts, bool csv, std::ostream& log) {
    const RunConfig c = effective_config(opts);
    const Dataset data = load_dataset(c);
    for (const auto& spec : resolve_roster(c)) {
        bool hit = false;
        const DistanceMatrix m = load_or_compute(c.cache_dir(), data, spec, opts.jobs, &hit);
        log << spec.key() << (hit ? " cached " : " computed ") << cache_path(c.cache_dir(), spec, data.fingerprint()).string()
            << "\n";
        if (csv) {
            std::string stem;
            for (char ch : spec.key()) stem.push_back(std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' ? ch : '_');
            std::filesystem::create_directories(c.output_dir() / "distances");
            write_csv(c.output_dir() / "distances" / (stem + ".csv"), m);
        }
    }
}

std::filesystem::path cmd_run(const CliOptions& opts, std::ostream& log) {
    const RunConfig c = effective_config(opts);
    const RunReport report = run_pipeline(c, opts.jobs, [&](const std::string& stage) { log << "[" << stage << "]" << std::endl; });
    write_report(c.output_dir(), report, c.ensemble.save_models);
    for (const auto& b : report.bases) {
        log << base_name(b.base) << ": " << b.candidates.size() << " of " << b.weak.size()
            << " weak learners passed the gate\n";
        for (const auto& e : b.ensembles) {
            if (e.skipped) log << "  " << e.name << ": skipped (" << e.note << ")\n";
            else log << "  " << e.name << ": inner " << e.mean_inner << ", outer " << e.mean_outer << "\n";
        }
    }
    log << "report written to " << (c.output_dir() / "report.json").string() << "\n";
    return c.output_dir() / "report.json";
}

void cmd_synth(const std::string& scenario, std::size_t n, std::uint64_t seed, const std::filesystem::path& out) {
    write_synth(out, scenario, n, seed);
}

void cmd_config_init(std::ostream& out) { out << config_to_json(default_config()).dump(2) << "\n"; }

int run_cli(int argc, char** argv) {
    CLI::App app{"Multivariate functional data classification with semi-metric ensembles", "mfclass"};
    app.require_subcommand(1);

    CliOptions opts;
    std::string config_path, out_path, gate;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub, bool with_gate) {
        sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
        sub->add_option("--seed", seed, "Override the master seed");
        sub->add_option("--jobs", opts.jobs, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_path, "Output directory (overrides the config)");
        if (with_gate) sub->add_option("--gate", gate, "Candidate gate")->check(CLI::IsMember({"outer", "inner"}));
    };

    auto* pre = app.add_subcommand("preprocess", "Preprocess trajectories and write the dataset summary");
    add_common(pre, false);
    auto* dist = app.add_subcommand("distances", "Compute or refresh cached distance matrices");
    add_common(dist, false);
    bool csv = false;
    dist->add_flag("--csv", csv, "Also write each matrix as CSV");
    auto* run = app.add_subcommand("run", "Run the nested cross-validation protocol and write the report");
    add_common(run, true);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario directory");
    std::string scenario;
    std::size_t n = 200;
    std::uint64_t synth_seed = 42;
    std::string synth_out;
    synth->add_option("--scenario", scenario, "amplitude, timewarp or xor")->required();
    synth->add_option("--n", n, "Number of trajectories");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output directory")->required();

    auto* config = app.add_subcommand("config", "Emit the default configuration or validate one");
    bool init = false;
    std::string config_check, config_out;
    config->add_flag("--init", init, "Print the default configuration");
    config->add_option("--config", config_check, "Validate and print a configuration");
    config->add_option("--out", config_out, "Write to this file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    opts.config = config_path;
    if (pre->parsed() || dist->parsed() || run->parsed()) {
        auto* sub = pre->parsed() ? pre : dist->parsed() ? dist : run;
        if (sub->count("--seed")) opts.seed = seed;
        if (!out_path.empty()) opts.out = out_path;
        if (!gate.empty()) opts.gate = gate == "outer" ? GateMode::Outer : GateMode::Inner;
    }

    try {
        if (pre->parsed()) cmd_preprocess(opts, std::cout);
        else if (dist->parsed()) cmd_distances(opts, csv, std::cout);
        else if (run->parsed()) cmd_run(opts, std::cout);
        else if (synth->parsed()) {
            if (std::find(synth_scenarios().begin(), synth_scenarios().end(), scenario) == synth_scenarios().end()) {
                std::cerr << "error: unknown scenario '" << scenario << "' (expected amplitude, timewarp or xor)\n";
                return kExitUsage;
            }
            cmd_synth(scenario, n, synth_seed, synth_out);
        } else if (config->parsed()) {
            std::string text;
            if (init) text = config_to_json(default_config()).dump(2) + "\n";
            else if (!config_check.empty()) text = config_to_json(load_config(config_check)).dump(2) + "\n";
            else {
                std::cerr << "error: config needs --init or --config PATH\n";
                return kExitUsage;
            }
            if (config_out.empty()) std::cout << text;
            else {
                std::ofstream f(config_out);
                if (!f) throw DataError("cannot write " + config_out);
                f << text;
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const InvalidInput& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const InvariantViolation& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInvariant;
    }
    return kExitOk;
}

} // namespace mfc
