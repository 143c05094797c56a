#pragma once

// The three reproducible experiments behind the CLI: relative-entropy sweep
// over gamma, CUSUM threshold sweep, and latency ensemble over gamma.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "subdiff/channels.hpp"
#include "subdiff/config.hpp"
#include "subdiff/report.hpp"
#include "subdiff/sim.hpp"

namespace subdiff {

struct RunOptions {
    int workers = 0;                                 // 0: SUBDIFF_WORKERS or hardware concurrency
    std::function<void(const std::string&)> progress;  // optional status sink
};

struct ExperimentResult {
    std::string name;
    Table table;
    LogLogPlot plot;
    nlohmann::ordered_json summary;  // scalar results; never timing data
};

/// 0.125 * 2^{k/4}, k = 0..12: gamma from 1/8 to 1.
inline std::vector<double> default_latency_gamma_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 12; ++k) g.push_back(0.125 * std::pow(2.0, k / 4.0));
    return g;
}

inline std::vector<double> default_entropy_gamma_grid() { return {0.05, 0.07, 0.1, 0.14, 0.2}; }

namespace exp_detail {

inline bool has(const ExperimentConfig& cfg, Receiver r) {
    for (auto x : cfg.receivers)
        if (x == r) return true;
    return false;
}

inline void note(const RunOptions& ro, const std::string& msg) {
    if (ro.progress) ro.progress(msg);
}

inline bool point_masses_only(const ExperimentConfig& cfg) {
    return std::holds_alternative<PointsSpec>(cfg.scenario.pre.shape) &&
           std::holds_alternative<PointsSpec>(cfg.scenario.post.shape);
}

inline double or_missing(const std::optional<Estimate>& e, double Estimate::*field) {
    return e ? (*e).*field : kMissing;
}

inline double count_of(const std::optional<Estimate>& e) { return e ? static_cast<double>(e->count) : 0.0; }

// Independent seed streams per experiment, grid point and run kind.
enum class Stream : std::uint64_t { latency_trispade = 1, latency_direct = 2, false_alarm = 3, trace = 4 };

inline std::uint64_t seed_for(std::uint64_t master, std::uint64_t point, Stream kind) {
    return stream_seed(stream_seed(master, point), static_cast<std::uint64_t>(kind));
}

inline ChannelModel channels_for(const ExperimentConfig& cfg, const Scenario& sc, Receiver r) {
    if (r == Receiver::trispade) return trispade_channels(sc);
    return direct_channels(sc, cfg.direct.grid(cfg.scenario.psf), cfg.direct.airy_object_cells);
}

inline std::optional<double> slope_of(const std::vector<double>& g, const std::vector<double>& v) {
    std::vector<ScalingPoint> pts;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::isfinite(v[i]) && v[i] > 0.0) pts.push_back({g[i], v[i]});
    if (pts.size() < 3) return std::nullopt;
    try {
        return fit_log_slope(pts);
    } catch (const InvalidInput&) {
        return std::nullopt;
    }
}

}  // namespace exp_detail

// ---------------------------------------------------------------------------

/// Relative entropies per photon versus gamma for the configured receivers.
inline ExperimentResult cmd_entropy_sweep(const ExperimentConfig& cfg, const RunOptions& ro = {}) {
    using namespace exp_detail;
    const std::vector<double> grid =
        cfg.scenario.gamma_grid.empty() ? default_entropy_gamma_grid() : cfg.scenario.gamma_grid;
    const bool numerical = cfg.scenario.psf == PsfKind::gaussian && point_masses_only(cfg);
    const double N = cfg.scenario.photons_per_step;

    ExperimentResult res;
    res.name = "entropy_sweep";
    res.table.title = "relative entropy per photon versus object-PSF ratio";
    res.table.units = "gamma dimensionless; entropies in nats per photon; converged is 1/0";
    res.table.columns = {"gamma",        "qre_leading", "qre_numerical", "qre_numerical_converged",
                         "trispade_re", "direct_re"};
    res.table.notes.push_back("psf: " + std::string(to_string(cfg.scenario.psf)));

    ObjectModel pre = build_object(cfg.scenario.pre);
    ObjectModel post = build_object(cfg.scenario.post);
    const Psf psf = Psf::make(cfg.scenario.psf);
    std::vector<std::string> warnings;
    for (double g : grid) {
        note(ro, "entropy sweep: gamma = " + format_number(g));
        const Scenario sc = make_scenario(pre, post, g, N, psf);
        for (const auto& w : sc.warnings) warnings.push_back(w);
        const QreResult lead = qre_leading_order(sc);
        double qn = kMissing, conv = kMissing;
        if (numerical) {
            const QreResult q = qre_numerical(sc, cfg.qre.n_max);
            qn = q.value;
            conv = q.converged ? 1.0 : 0.0;
        }
        const double tri = has(cfg, Receiver::trispade) ? poisson_re_per_step(trispade_channels(sc)) / N : kMissing;
        const double dir =
            has(cfg, Receiver::direct) ? poisson_re_per_step(channels_for(cfg, sc, Receiver::direct)) / N : kMissing;
        res.table.add_row({g, lead.value, qn, conv, tri, dir});
    }

    auto& s = res.summary;
    s["experiment"] = res.name;
    s["psf"] = std::string(to_string(cfg.scenario.psf));
    nlohmann::ordered_json slopes = nlohmann::ordered_json::object();
    for (const char* col : {"qre_leading", "qre_numerical", "trispade_re", "direct_re"}) {
        const auto sl = slope_of(grid, res.table.values(col));
        slopes[col] = sl ? nlohmann::ordered_json(*sl) : nlohmann::ordered_json(nullptr);
        if (sl) res.table.notes.push_back(std::string("log-slope ") + col + ": " + format_number(*sl));
    }
    s["log_slopes"] = slopes;
    s["warnings"] = warnings;

    res.plot.title = "Relative entropy per photon";
    res.plot.x_label = "gamma (object size / PSF width)";
    res.plot.y_label = "nats per photon";
    const char* colors[] = {"#000000", "#7f7f7f", "#1f77b4", "#d62728"};
    const char* labels[] = {"QRE (leading order)", "QRE (numerical)", "TriSPADE RE", "direct imaging RE"};
    const char* cols[] = {"qre_leading", "qre_numerical", "trispade_re", "direct_re"};
    for (int i = 0; i < 4; ++i) {
        Series se{labels[i], grid, res.table.values(cols[i]), colors[i], i < 2, i >= 2};
        bool any = false;
        for (double v : se.y) any = any || std::isfinite(v);
        if (any) res.plot.series.push_back(se);
    }
    return res;
}

// ---------------------------------------------------------------------------

/// Mean latency and mean time to false alarm of the three-mode receiver as
/// functions of the CUSUM threshold, against their overshoot-corrected
/// predictions. Latency runs start post-change (change time 0), the
/// worst case for the CUSUM statistic.
inline ExperimentResult cmd_threshold_sweep(const ExperimentConfig& cfg, const RunOptions& ro = {}) {
    using namespace exp_detail;
    const DetectorConfig& d = cfg.detector;
    if (d.h_grid.empty()) throw InvalidInput("threshold sweep needs a non-empty h grid");
    const Scenario sc = scenario_from_config(cfg, cfg.scenario.gamma);
    const ChannelModel cm = trispade_channels(sc);
    const double D = poisson_re_per_step(cm);
    if (!(D > 0.0)) throw NumericalError("the two hypotheses are indistinguishable (zero relative entropy)");
    const StepSampler sampler(cm);

    ExperimentResult res;
    res.name = "threshold_sweep";
    res.table.title = "CUSUM latency and false-alarm time versus threshold (three-mode receiver)";
    res.table.units = "h and overshoots in nats; latency and times in steps; fractions dimensionless";
    res.table.columns = {"h",
                         "latency_mean",
                         "latency_se",
                         "latency_trials",
                         "e0_overshoot",
                         "latency_prediction",
                         "tfa_mean",
                         "tfa_se",
                         "tfa_trials",
                         "tfa_censored_fraction",
                         "einf_exp_neg_overshoot",
                         "tfa_bound"};
    char buf[160];
    std::snprintf(buf, sizeof buf, "gamma: %.10g; photons per step: %.10g; info rate: %.10g nats/step",
                  sc.gamma, sc.photons_per_step, D);
    res.table.notes.push_back(buf);

    for (std::size_t i = 0; i < d.h_grid.size(); ++i) {
        const double h = d.h_grid[i];
        note(ro, "threshold sweep: h = " + format_number(h));
        EnsembleOptions lo;
        lo.h = h;
        lo.change_time = 0;
        lo.n_trials = d.n_trials;
        lo.max_steps = d.max_steps;
        lo.master_seed = seed_for(d.master_seed, i, Stream::latency_trispade);
        lo.workers = ro.workers;
        const EnsembleStats lat = run_ensemble(sampler, lo);
        const double x0 = or_missing(lat.e0_overshoot, &Estimate::mean);
        const double pred = std::isfinite(x0) ? latency_prediction(h, x0, D) : kMissing;

        double tfa = kMissing, tfa_se = kMissing, tfa_n = 0.0, cens = kMissing, einf = kMissing, bound = kMissing;
        if (d.fa_trials > 0) {
            EnsembleOptions fo;
            fo.h = h;
            fo.change_time = std::nullopt;
            fo.n_trials = d.fa_trials;
            const double cap = std::min(d.fa_cap_factor * std::exp(h), static_cast<double>(d.max_steps));
            fo.max_steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(cap));
            fo.master_seed = seed_for(d.master_seed, i, Stream::false_alarm);
            fo.workers = ro.workers;
            const EnsembleStats fa = run_ensemble(sampler, fo);
            tfa = or_missing(fa.tfa, &Estimate::mean);
            tfa_se = or_missing(fa.tfa, &Estimate::se);
            tfa_n = count_of(fa.tfa);
            cens = fa.censored_fraction;
            einf = or_missing(fa.einf_exp_neg_overshoot, &Estimate::mean);
            if (std::isfinite(einf) && einf > 0.0) bound = false_alarm_bound(h, einf);
        }
        res.table.add_row({h, or_missing(lat.latency, &Estimate::mean), or_missing(lat.latency, &Estimate::se),
                           count_of(lat.latency), x0, pred, tfa, tfa_se, tfa_n, cens, einf, bound});
    }

    auto& s = res.summary;
    s["experiment"] = res.name;
    s["gamma"] = sc.gamma;
    s["info_rate_nats_per_step"] = D;
    s["warnings"] = sc.warnings;

    res.plot.title = "CUSUM latency and false-alarm time versus threshold";
    res.plot.x_label = "threshold h (nats)";
    res.plot.y_label = "steps";
    res.plot.log_x = false;
    const auto hs = res.table.values("h");
    res.plot.series.push_back({"mean latency", hs, res.table.values("latency_mean"), "#1f77b4", false, true});
    res.plot.series.push_back(
        {"(h + E0[x]) / (N S)", hs, res.table.values("latency_prediction"), "#1f77b4", true, false});
    if (d.fa_trials > 0) {
        res.plot.series.push_back({"mean time to false alarm", hs, res.table.values("tfa_mean"), "#d62728", false, true});
        res.plot.series.push_back({"e^h / E[e^-x]", hs, res.table.values("tfa_bound"), "#d62728", true, false});
    }
    return res;
}

// ---------------------------------------------------------------------------

/// Mean detection latency per gamma and receiver against the quantum limit
/// ln(T_FA) / (N S). T_FA is measured on the three-mode receiver at the
/// same threshold (falling back to e^h when no false-alarm runs are made).
inline ExperimentResult cmd_latency_ensemble(const ExperimentConfig& cfg, const RunOptions& ro = {}) {
    using namespace exp_detail;
    const DetectorConfig& d = cfg.detector;
    const std::vector<double> grid =
        cfg.scenario.gamma_grid.empty() ? default_latency_gamma_grid() : cfg.scenario.gamma_grid;
    const double h = d.resolved_threshold();
    const double N = cfg.scenario.photons_per_step;

    ExperimentResult res;
    res.name = "latency_ensemble";
    res.table.title = "mean CUSUM latency versus object-PSF ratio";
    res.table.units = "gamma dimensionless; rates in nats per step; latencies and times in steps";
    res.table.columns = {"gamma",
                         "qre_rate",
                         "tfa",
                         "tfa_censored_fraction",
                         "quantum_limit",
                         "trispade_rate",
                         "trispade_latency_mean",
                         "trispade_latency_se",
                         "trispade_latency_trials",
                         "trispade_early_alarms",
                         "trispade_prediction",
                         "direct_rate",
                         "direct_latency_mean",
                         "direct_latency_se",
                         "direct_latency_trials",
                         "direct_early_alarms",
                         "direct_prediction"};
    char buf[160];
    std::snprintf(buf, sizeof buf, "h: %.10g nats; change time: %lld; photons per step: %.10g", h,
                  static_cast<long long>(d.change_time), N);
    res.table.notes.push_back(buf);

    ObjectModel pre = build_object(cfg.scenario.pre);
    ObjectModel post = build_object(cfg.scenario.post);
    const Psf psf = Psf::make(cfg.scenario.psf);
    std::vector<std::string> warnings;

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double g = grid[i];
        const Scenario sc = make_scenario(pre, post, g, N, psf);
        for (const auto& w : sc.warnings) warnings.push_back(w);
        const double qre_rate = N * qre_leading_order(sc).value;
        std::vector<double> row{g, qre_rate, kMissing, kMissing, kMissing};

        const ChannelModel tri_cm = trispade_channels(sc);
        const StepSampler tri(tri_cm);
        double tfa = std::exp(h), cens = kMissing;
        if (d.fa_trials > 0) {
            note(ro, "latency ensemble: gamma = " + format_number(g) + ", false-alarm runs");
            EnsembleOptions fo;
            fo.h = h;
            fo.n_trials = d.fa_trials;
            const double cap = std::min(d.fa_cap_factor * std::exp(h), static_cast<double>(d.max_steps));
            fo.max_steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(cap));
            fo.master_seed = seed_for(d.master_seed, i, Stream::false_alarm);
            fo.workers = ro.workers;
            const EnsembleStats fa = run_ensemble(tri, fo);
            if (fa.tfa) tfa = fa.tfa->mean;
            cens = fa.censored_fraction;
        }
        row[2] = tfa;
        row[3] = cens;
        row[4] = (qre_rate > 0.0 && std::isfinite(qre_rate)) ? quantum_limit_latency(std::max(tfa, 1.0), qre_rate)
                                                             : kMissing;

        for (Receiver r : {Receiver::trispade, Receiver::direct}) {
            if (!has(cfg, r)) {
                row.insert(row.end(), 6, kMissing);
                continue;
            }
            note(ro, "latency ensemble: gamma = " + format_number(g) + ", " + std::string(to_string(r)));
            const ChannelModel cm = r == Receiver::trispade ? tri_cm : channels_for(cfg, sc, r);
            const double D = poisson_re_per_step(cm);
            EnsembleOptions lo;
            lo.h = h;
            lo.change_time = d.change_time;
            lo.n_trials = r == Receiver::trispade ? d.n_trials : d.direct_trials;
            lo.max_steps = d.max_steps;
            lo.master_seed =
                seed_for(d.master_seed, i, r == Receiver::trispade ? Stream::latency_trispade : Stream::latency_direct);
            lo.workers = ro.workers;
            const EnsembleStats st = r == Receiver::trispade ? run_ensemble(tri, lo) : run_ensemble(cm, lo);
            const double x0 = or_missing(st.e0_overshoot, &Estimate::mean);
            const double pred = (D > 0.0 && std::isfinite(x0)) ? latency_prediction(h, x0, D) : kMissing;
            row.insert(row.end(), {D, or_missing(st.latency, &Estimate::mean), or_missing(st.latency, &Estimate::se),
                                   count_of(st.latency), static_cast<double>(st.false_alarms), pred});
        }
        res.table.add_row(row);
    }

    auto& s = res.summary;
    s["experiment"] = res.name;
    s["threshold"] = h;
    s["warnings"] = warnings;

    res.plot.title = "Mean CUSUM latency versus object size";
    res.plot.x_label = "gamma (object size / PSF width)";
    res.plot.y_label = "mean latency (steps)";
    res.plot.series.push_back({"quantum limit", grid, res.table.values("quantum_limit"), "#000000", true, false});
    if (has(cfg, Receiver::trispade))
        res.plot.series.push_back(
            {"TriSPADE", grid, res.table.values("trispade_latency_mean"), "#1f77b4", false, true});
    if (has(cfg, Receiver::direct))
        res.plot.series.push_back(
            {"direct imaging", grid, res.table.values("direct_latency_mean"), "#d62728", false, true});
    return res;
}

/// CUSUM trace of one post-change trial of the three-mode receiver at the
/// configured gamma and threshold.
inline std::vector<TraceRow> cusum_trace(const ExperimentConfig& cfg) {
    const Scenario sc = scenario_from_config(cfg, cfg.scenario.gamma);
    const StepSampler sampler(trispade_channels(sc));
    std::vector<TraceRow> rows;
    run_trial(sampler, cfg.detector.resolved_threshold(), cfg.detector.change_time, cfg.detector.max_steps,
              exp_detail::seed_for(cfg.detector.master_seed, 0, exp_detail::Stream::trace), &rows);
    return rows;
}

}  // namespace subdiff
