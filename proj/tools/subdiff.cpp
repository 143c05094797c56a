// subdiff: command-line driver for the change-detection experiments.
//
//   subdiff entropy-sweep    [--config FILE] [--out DIR] [--seed N] [--workers N]
//   subdiff threshold-sweep  ...
//   subdiff latency-ensemble ... [--trace FILE]
//   subdiff verify           [--config FILE] [--workers N]
//
// Exit codes: 0 success, 1 I/O or unexpected failure, 2 config or usage
// error, 3 numerical failure, 4 verify check failed.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "subdiff/subdiff.hpp"

namespace fs = std::filesystem;
using namespace subdiff;

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kConfigError = 2, kNumericalError = 3, kVerifyFailed = 4 };

struct Flags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    std::string trace_path;
    bool quiet = false;
};

ExperimentConfig load_config(const Flags& f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path, std::ios::binary);
        if (!in) throw ConfigError("", "cannot read config file '" + f.config_path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        cfg = parse_config(ss.str());
    }
    if (f.seed) cfg.detector.master_seed = *f.seed;
    if (!f.out_dir.empty()) cfg.output.directory = f.out_dir;
    return cfg;
}

void emit(const ExperimentResult& r, const ExperimentConfig& cfg) {
    const fs::path dir = cfg.output.directory;
    fs::create_directories(dir);
    // The CSV is always written: plots are views of it.
    write_text_file((dir / (r.name + ".csv")).string(), to_csv(r.table));
    std::cout << (dir / (r.name + ".csv")).string() << "\n";
    if (cfg.output.wants("svg")) {
        write_text_file((dir / (r.name + ".svg")).string(), to_svg(r.plot));
        std::cout << (dir / (r.name + ".svg")).string() << "\n";
    }
    if (cfg.output.wants("json")) {
        nlohmann::ordered_json j;
        j["summary"] = r.summary;
        j["config"] = to_json(cfg);
        write_text_file((dir / (r.name + ".json")).string(), j.dump(2) + "\n");
        std::cout << (dir / (r.name + ".json")).string() << "\n";
    }
}

RunOptions run_options(const Flags& f) {
    RunOptions ro;
    ro.workers = f.workers;
    if (!f.quiet) ro.progress = [](const std::string& m) { std::cerr << "[subdiff] " << m << "\n"; };
    return ro;
}

// ---------------------------------------------------------------------------
// verify: fast self-checks against closed forms and invariants.

struct Check {
    std::string name;
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::vector<Check> run_verify(const ExperimentConfig& cfg, int workers) {
    std::vector<Check> out;
    const Psf gauss = Psf::make(PsfKind::gaussian);

    {
        // Uniform unit square against its four corners.
        ObjectSpec sq{"square", RectanglesSpec{{Rectangle{{0, 0}, {1, 1}, std::nullopt}}}, 256};
        ObjectSpec corners{"corners", PointsSpec{{{{-0.5, -0.5}, 1}, {{0.5, -0.5}, 1}, {{-0.5, 0.5}, 1}, {{0.5, 0.5}, 1}}},
                           256};
        const double g = 0.1;
        const Scenario sc = make_scenario(build_object(sq), build_object(corners), g, 500, gauss);
        const double expect = 0.5 * (1.0 / 12 - 0.25 + 0.25 * std::log(3.0)) * g * g;
        const double got = qre_leading_order(sc).value;
        out.push_back({"leading-order QRE closed form", std::abs(got / expect - 1) < 1e-9,
                       fmt("got %.12g expected %.12g", got, expect)});
    }
    {
        const Scenario sc = scenario_from_config(cfg, 0.05);
        const double q = qre_leading_order(sc).value;
        const double t = poisson_re_per_step(trispade_channels(sc)) / sc.photons_per_step;
        const bool applicable = cfg.scenario.psf == PsfKind::gaussian && q > 0;
        out.push_back({"three-mode RE matches QRE at gamma=0.05", !applicable || std::abs(t / q - 1) < 0.05,
                       applicable ? fmt("ratio %.6f", t / q) : "not applicable (non-Gaussian or zero QRE)"});
    }
    {
        ExperimentConfig same = cfg;
        same.scenario.post = same.scenario.pre;
        const Scenario sc = scenario_from_config(same, 0.25);
        const double z = qre_leading_order(sc).value + poisson_re_per_step(trispade_channels(sc));
        out.push_back({"identical objects give zero entropy", z == 0.0, fmt("sum %.3g", z)});
    }
    {
        const ExperimentConfig again = parse_config(serialize_config(cfg));
        out.push_back({"config round trip", again == cfg, ""});
    }
    {
        const Scenario sc = scenario_from_config(cfg, cfg.scenario.gamma);
        const StepSampler s(trispade_channels(sc));
        EnsembleOptions o;
        o.h = cfg.detector.resolved_threshold();
        o.change_time = cfg.detector.change_time;
        o.n_trials = 64;
        o.max_steps = cfg.detector.max_steps;
        o.master_seed = cfg.detector.master_seed;
        o.workers = 1;
        const auto a = run_trials(s, o);
        o.workers = std::max(2, resolve_workers(workers));
        const auto b = run_trials(s, o);
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i)
            same = a[i].trigger_time == b[i].trigger_time && a[i].overshoot == b[i].overshoot;
        out.push_back({"ensemble independent of worker count", same, ""});
    }
    {
        const PoissonTable t(500.0);
        Rng rng(7);
        double m = 0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) m += static_cast<double>(t(rng));
        m /= n;
        const double z = (m - 500.0) / std::sqrt(500.0 / n);
        out.push_back({"Poisson sampler mean", std::abs(z) < 5.0, fmt("mean %.4f (z = %.2f)", m, z)});
    }
    return out;
}

int run(const std::string& cmd, const Flags& f) {
    const ExperimentConfig cfg = load_config(f);
    if (cmd == "verify") {
        bool ok = true;
        for (const auto& c : run_verify(cfg, f.workers)) {
            std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
            ok = ok && c.pass;
        }
        return ok ? kOk : kVerifyFailed;
    }
    const RunOptions ro = run_options(f);
    ExperimentResult r;
    if (cmd == "entropy-sweep")
        r = cmd_entropy_sweep(cfg, ro);
    else if (cmd == "threshold-sweep")
        r = cmd_threshold_sweep(cfg, ro);
    else
        r = cmd_latency_ensemble(cfg, ro);
    emit(r, cfg);
    if (!f.trace_path.empty()) {
        const auto rows = cusum_trace(cfg);
        std::ofstream os(f.trace_path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open '" + f.trace_path + "' for writing");
        write_trace_csv(os, rows);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sub-diffraction change detection: entropy sweeps, CUSUM threshold sweeps and latency ensembles"};
    app.require_subcommand(1);
    Flags flags;
    std::uint64_t seed = 0;
    std::string chosen;

    auto add_common = [&](CLI::App* sub, bool outputs) {
        sub->add_option("-c,--config", flags.config_path, "experiment config (JSON, comments allowed)")
            ->check(CLI::ExistingFile);
        sub->add_option("-w,--workers", flags.workers,
                        "worker threads (default: $" + std::string(kWorkersEnv) + " or hardware concurrency)")
            ->check(CLI::PositiveNumber);
        sub->add_option("-s,--seed", seed, "master seed override");
        if (outputs) {
            sub->add_option("-o,--out", flags.out_dir, "output directory override");
            sub->add_option("--trace", flags.trace_path, "also write one CUSUM trace (CSV)");
            sub->add_flag("-q,--quiet", flags.quiet, "no progress messages");
        }
        sub->callback([&chosen, sub] { chosen = sub->get_name(); });
    };
    add_common(app.add_subcommand("entropy-sweep", "relative entropies per photon versus gamma"), true);
    add_common(app.add_subcommand("threshold-sweep", "CUSUM latency and false-alarm time versus threshold"), true);
    add_common(app.add_subcommand("latency-ensemble", "mean latency per receiver versus gamma"), true);
    add_common(app.add_subcommand("verify", "fast self-checks; exit code 4 on failure"), false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }
    for (auto* sub : app.get_subcommands())
        if (sub->count("--seed")) flags.seed = seed;

    try {
        return run(chosen, flags);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}
