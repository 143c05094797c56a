#pragma once

// Monte Carlo orchestration: count sampling, CUSUM trials, ensemble
// statistics and the latency / false-alarm theory predictors.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "subdiff/channels.hpp"
#include "subdiff/detect.hpp"
#include "subdiff/errors.hpp"
#include "subdiff/random.hpp"

namespace subdiff {

enum class Hypothesis { pre, post };

/// Draws one time step of counts (or directly its log-likelihood ratio)
/// under either hypothesis. Few channels are sampled independently; many
/// channels use an equivalent total-count Poisson draw plus per-photon
/// alias-table assignment, which never materializes the count vector when
/// only the LLR is needed.
class StepSampler {
public:
    static constexpr std::size_t kPerChannelLimit = 32;

    explicit StepSampler(const ChannelModel& cm) : coeff_(LlrCoefficients::from(cm)), n_(cm.channels.size()) {
        validate(cm);
        std::size_t active = 0;
        for (const auto& c : cm.channels) active += (c.lambda_pre > 0.0 || c.lambda_post > 0.0);
        per_channel_ = active <= kPerChannelLimit;
        if (per_channel_) {
            for (std::size_t k = 0; k < n_; ++k) {
                const auto& c = cm.channels[k];
                if (c.lambda_pre == 0.0 && c.lambda_post == 0.0) continue;
                active_.push_back(k);
                pre_.tables.emplace_back(c.lambda_pre);
                post_.tables.emplace_back(c.lambda_post);
            }
        } else {
            build_photon_mode(cm, Hypothesis::pre, pre_);
            build_photon_mode(cm, Hypothesis::post, post_);
        }
    }

    std::size_t channel_count() const noexcept { return n_; }
    bool per_channel() const noexcept { return per_channel_; }
    const LlrCoefficients& coefficients() const noexcept { return coeff_; }

    std::vector<std::int64_t> counts(Hypothesis h, Rng& rng) const {
        std::vector<std::int64_t> out(n_, 0);
        const Side& s = side(h);
        if (per_channel_) {
            for (std::size_t i = 0; i < active_.size(); ++i) out[active_[i]] = s.tables[i](rng);
        } else {
            const std::int64_t total = s.total(rng);
            for (std::int64_t p = 0; p < total; ++p) ++out[s.channel[s.alias(rng)]];
        }
        return out;
    }

    double llr(Hypothesis h, Rng& rng) const {
        const Side& s = side(h);
        double sum = 0.0;
        if (per_channel_) {
            bool pos_inf = false, neg_inf = false;
            for (std::size_t i = 0; i < active_.size(); ++i) {
                const std::int64_t n = s.tables[i](rng);
                if (n == 0) continue;
                const double a = coeff_.slope[active_[i]];
                if (std::isinf(a))
                    (a > 0 ? pos_inf : neg_inf) = true;
                else
                    sum += static_cast<double>(n) * a;
            }
            if (pos_inf) return std::numeric_limits<double>::infinity();
            if (neg_inf) return -std::numeric_limits<double>::infinity();
        } else {
            const std::int64_t total = s.total(rng);
            for (std::int64_t p = 0; p < total; ++p) sum += s.slope[s.alias(rng)];
            if (std::isinf(sum)) return sum;
        }
        return sum - coeff_.offset;
    }

private:
    struct Side {
        std::vector<PoissonTable> tables;  // per-channel mode
        PoissonTable total;                // photon mode
        AliasTable alias;
        std::vector<std::size_t> channel;
        std::vector<double> slope;
    };

    const Side& side(Hypothesis h) const { return h == Hypothesis::pre ? pre_ : post_; }

    void build_photon_mode(const ChannelModel& cm, Hypothesis h, Side& s) {
        std::vector<double> w;
        double total = 0.0;
        for (std::size_t k = 0; k < n_; ++k) {
            const double l = h == Hypothesis::pre ? cm.channels[k].lambda_pre : cm.channels[k].lambda_post;
            if (l <= 0.0) continue;
            w.push_back(l);
            s.channel.push_back(k);
            s.slope.push_back(coeff_.slope[k]);
            total += l;
        }
        s.total = PoissonTable(total);
        if (!w.empty()) s.alias = AliasTable(w);
    }

    LlrCoefficients coeff_;
    std::size_t n_ = 0;
    bool per_channel_ = true;
    std::vector<std::size_t> active_;
    Side pre_, post_;
};

/// Independent Poisson counts for one time step.
inline std::vector<std::int64_t> sample_counts(const ChannelModel& cm, Hypothesis h, Rng& rng) {
    return StepSampler(cm).counts(h, rng);
}

struct TrialRecord {
    std::optional<std::int64_t> trigger_time;  // empty when censored
    std::optional<std::int64_t> change_time;   // empty: no change (pure false-alarm run)
    std::optional<std::int64_t> latency;       // trigger_time - change_time, when positive
    bool false_alarm = false;
    bool censored = false;
    double overshoot = 0.0;  // g - h at trigger, nats
    std::uint64_t seed = 0;
};

/// One CUSUM run: pre-change counts for t <= change_time, post-change after.
inline TrialRecord run_trial(const StepSampler& sampler, double h, std::optional<std::int64_t> change_time,
                             std::int64_t max_steps, std::uint64_t seed, std::vector<TraceRow>* trace = nullptr) {
    if (max_steps < 1) throw InvalidInput("max_steps must be >= 1");
    CusumState st = CusumState::start(h);
    Rng rng(seed);
    TrialRecord rec;
    rec.change_time = change_time;
    rec.seed = seed;
    while (st.t < max_steps) {
        const bool after = change_time && st.t + 1 > *change_time;
        const double x = sampler.llr(after ? Hypothesis::post : Hypothesis::pre, rng);
        st = cusum_update(st, x);
        if (trace) trace->push_back({st.t, x, st.g});
        if (st.triggered) break;
    }
    if (!st.triggered) {
        rec.censored = true;
        return rec;
    }
    rec.trigger_time = st.trigger_time;
    rec.overshoot = st.overshoot();
    if (change_time && *st.trigger_time > *change_time)
        rec.latency = *st.trigger_time - *change_time;
    else
        rec.false_alarm = true;
    return rec;
}

inline TrialRecord run_trial(const ChannelModel& cm, double h, std::optional<std::int64_t> change_time,
                             std::int64_t max_steps, std::uint64_t seed) {
    return run_trial(StepSampler(cm), h, change_time, max_steps, seed);
}

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::int64_t count = 0;
};

inline std::optional<Estimate> estimate(std::span<const double> xs) {
    if (xs.empty()) return std::nullopt;
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    const auto n = static_cast<double>(xs.size());
    const double se = xs.size() > 1 ? std::sqrt(v / (n - 1.0) / n) : 0.0;
    return Estimate{m, se, static_cast<std::int64_t>(xs.size())};
}

struct EnsembleOptions {
    double h = 0.0;
    std::optional<std::int64_t> change_time;  // empty: no-change (false-alarm) runs
    std::int64_t n_trials = 2000;
    std::int64_t max_steps = 1'000'000;
    std::uint64_t master_seed = 1;
    int workers = 0;              // 0: SUBDIFF_WORKERS or hardware concurrency
    std::int64_t fa_window = 0;   // > 0: report P(trigger <= window) for no-change runs
};

struct EnsembleStats {
    std::int64_t n_trials = 0;
    std::optional<Estimate> latency;                 // post-change triggers
    std::optional<Estimate> tfa;                     // trigger time of no-change runs
    std::optional<Estimate> e0_overshoot;            // overshoot of post-change triggers
    std::optional<Estimate> einf_exp_neg_overshoot;  // e^{-x} of no-change triggers
    std::int64_t false_alarms = 0;
    std::int64_t censored = 0;
    double censored_fraction = 0.0;
    std::optional<double> fa_rate_within_window;
    std::string diagnostic;
};

inline constexpr const char* kWorkersEnv = "SUBDIFF_WORKERS";

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv(kWorkersEnv)) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs trial i with seed stream_seed(master_seed, i); records come back in
/// trial-index order whatever the worker count.
inline std::vector<TrialRecord> run_trials(const StepSampler& sampler, const EnsembleOptions& opt) {
    if (opt.n_trials < 1) throw InvalidInput("n_trials must be >= 1");
    std::vector<TrialRecord> out(static_cast<std::size_t>(opt.n_trials));
    const int workers = static_cast<int>(std::min<std::int64_t>(resolve_workers(opt.workers), opt.n_trials));
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        constexpr std::int64_t kChunk = 16;
        for (;;) {
            const std::int64_t begin = next.fetch_add(kChunk);
            if (begin >= opt.n_trials) return;
            const std::int64_t end = std::min(begin + kChunk, opt.n_trials);
            try {
                for (std::int64_t i = begin; i < end; ++i)
                    out[static_cast<std::size_t>(i)] =
                        run_trial(sampler, opt.h, opt.change_time, opt.max_steps,
                                  stream_seed(opt.master_seed, static_cast<std::uint64_t>(i)));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = opt.n_trials;
                return;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

inline EnsembleStats aggregate(std::span<const TrialRecord> trials, const EnsembleOptions& opt) {
    EnsembleStats s;
    s.n_trials = static_cast<std::int64_t>(trials.size());
    std::vector<double> lat, x0, tfa, einf;
    std::int64_t in_window = 0;
    for (const auto& r : trials) {
        if (r.censored) {
            ++s.censored;
            continue;
        }
        if (r.latency) {
            lat.push_back(static_cast<double>(*r.latency));
            x0.push_back(r.overshoot);
        } else {
            ++s.false_alarms;
        }
        if (!r.change_time) {
            tfa.push_back(static_cast<double>(*r.trigger_time));
            einf.push_back(std::exp(-r.overshoot));
            if (opt.fa_window > 0 && *r.trigger_time <= opt.fa_window) ++in_window;
        }
    }
    s.censored_fraction = s.n_trials ? static_cast<double>(s.censored) / static_cast<double>(s.n_trials) : 0.0;
    s.latency = estimate(lat);
    s.e0_overshoot = estimate(x0);
    s.tfa = estimate(tfa);
    s.einf_exp_neg_overshoot = estimate(einf);
    if (!opt.change_time && opt.fa_window > 0 && opt.max_steps >= opt.fa_window)
        s.fa_rate_within_window = static_cast<double>(in_window) / static_cast<double>(s.n_trials);
    if (s.censored == s.n_trials) s.diagnostic = "every trial was censored; no mean reported";
    return s;
}

inline EnsembleStats run_ensemble(const StepSampler& sampler, const EnsembleOptions& opt) {
    const auto trials = run_trials(sampler, opt);
    return aggregate(trials, opt);
}

inline EnsembleStats run_ensemble(const ChannelModel& cm, const EnsembleOptions& opt) {
    return run_ensemble(StepSampler(cm), opt);
}

// ---------------------------------------------------------------------------
// Theory predictors.

/// Lower bound on mean latency at a given mean time to false alarm:
/// ln(tfa) / info_rate, info_rate in nats per step.
inline double quantum_limit_latency(double tfa, double info_rate) {
    if (!(tfa >= 1.0)) throw InvalidInput("mean time to false alarm must be >= 1");
    if (!(info_rate > 0.0)) throw InvalidInput("information rate must be positive");
    return std::log(tfa) / info_rate;
}

/// Mean CUSUM latency including the mean threshold overshoot.
inline double latency_prediction(double h, double e0_overshoot, double info_rate) {
    if (!(h > 0.0)) throw InvalidInput("threshold must be positive");
    if (!(e0_overshoot >= 0.0)) throw InvalidInput("mean overshoot must be non-negative");
    if (!(info_rate > 0.0)) throw InvalidInput("information rate must be positive");
    return (h + e0_overshoot) / info_rate;
}

/// Lower bound e^h / E_inf[e^{-x}] on the mean time to false alarm.
inline double false_alarm_bound(double h, double einf_exp_neg_overshoot) {
    if (!(einf_exp_neg_overshoot > 0.0 && einf_exp_neg_overshoot <= 1.0))
        throw InvalidInput("E[exp(-overshoot)] must lie in (0, 1]");
    return std::exp(h) / einf_exp_neg_overshoot;
}

struct ScalingPoint {
    double gamma = 0.0;
    double value = 0.0;
};

/// Least-squares slope of ln(value) against ln(gamma).
inline double fit_log_slope(std::span<const ScalingPoint> pts) {
    if (pts.size() < 3) throw InvalidInput("log-slope fit needs at least 3 points");
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        if (!(p.gamma > 0.0) || !(p.value > 0.0) || !std::isfinite(p.value))
            throw InvalidInput("log-slope fit needs positive finite abscissae and values");
        mx += std::log(p.gamma);
        my += std::log(p.value);
    }
    const auto n = static_cast<double>(pts.size());
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        const double dx = std::log(p.gamma) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(p.value) - my);
    }
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            if (pts[i].gamma == pts[j].gamma) throw InvalidInput("log-slope fit needs distinct abscissae");
    if (sxx <= 0.0) throw InvalidInput("degenerate abscissae in log-slope fit");
    return sxy / sxx;
}

}  // namespace subdiff
