#pragma once

// CUSUM detection on per-step Poisson count vectors.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "subdiff/channels.hpp"
#include "subdiff/errors.hpp"

namespace subdiff {

/// Per-channel log-likelihood ratio coefficients: llr = sum_k n_k a_k - offset.
struct LlrCoefficients {
    std::vector<double> slope;  // ln(lambda_post / lambda_pre); +-inf on singular channels
    double offset = 0.0;        // sum_k (lambda_post - lambda_pre)

    static LlrCoefficients from(const ChannelModel& cm) {
        LlrCoefficients c;
        c.slope.reserve(cm.channels.size());
        for (const auto& ch : cm.channels) {
            const double a = ch.lambda_pre, b = ch.lambda_post;
            double s = 0.0;
            if (a == 0.0 && b == 0.0)
                s = 0.0;
            else if (a == 0.0)
                s = std::numeric_limits<double>::infinity();
            else if (b == 0.0)
                s = -std::numeric_limits<double>::infinity();
            else
                s = std::log(b / a);
            c.slope.push_back(s);
            c.offset += b - a;
        }
        return c;
    }

    template <class Count>
    double evaluate(std::span<const Count> counts) const {
        if (counts.size() != slope.size()) throw InvalidInput("count vector length does not match channel count");
        double sum = 0.0;
        bool pos_inf = false, neg_inf = false;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (counts[k] == 0) continue;
            if (std::isinf(slope[k]))
                (slope[k] > 0 ? pos_inf : neg_inf) = true;
            else
                sum += static_cast<double>(counts[k]) * slope[k];
        }
        if (pos_inf && neg_inf) throw InvalidInput("counts are impossible under both hypotheses");
        if (pos_inf) return std::numeric_limits<double>::infinity();
        if (neg_inf) return -std::numeric_limits<double>::infinity();
        return sum - offset;
    }
};

/// Log-likelihood ratio ln(P_post / P_pre) of one step's counts.
template <class Count>
double llr_step(const ChannelModel& cm, std::span<const Count> counts) {
    return LlrCoefficients::from(cm).evaluate(counts);
}

inline double llr_step(const ChannelModel& cm, const std::vector<std::int64_t>& counts) {
    return llr_step(cm, std::span<const std::int64_t>(counts));
}

struct CusumState {
    double g = 0.0;
    std::int64_t t = 0;
    double h = 0.0;
    bool triggered = false;
    std::optional<std::int64_t> trigger_time;

    static CusumState start(double threshold) {
        if (!(threshold > 0.0)) throw InvalidInput("CUSUM threshold must be positive");
        return CusumState{0.0, 0, threshold, false, std::nullopt};
    }

    double overshoot() const { return g - h; }
};

/// g' = max(0, g + llr); triggers when g' > h (strict).
inline CusumState cusum_update(const CusumState& s, double llr) {
    if (s.triggered) throw InvalidInput("CUSUM state already triggered");
    if (std::isnan(llr)) throw InvalidInput("log-likelihood ratio is NaN");
    CusumState n = s;
    n.g = std::max(0.0, s.g + llr);
    n.t = s.t + 1;
    if (n.g > n.h) {
        n.triggered = true;
        n.trigger_time = n.t;
    }
    return n;
}

/// Threshold h = ln(window / pfa).
inline double threshold_for_pfa(double pfa, std::int64_t window) {
    if (!(pfa > 0.0 && pfa < 1.0)) throw InvalidInput("false-alarm probability must lie in (0, 1)");
    if (window < 1) throw InvalidInput("false-alarm window must be >= 1");
    return std::log(static_cast<double>(window) / pfa);
}

struct TraceRow {
    std::int64_t t = 0;
    double llr = 0.0;
    double g = 0.0;
};

inline void write_trace_csv(std::ostream& os, std::span<const TraceRow> rows) {
    os << "# CUSUM trace; llr and g in nats\n";
    os << "t,llr,g\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%lld,%.10g,%.10g\n", static_cast<long long>(r.t), r.llr, r.g);
        os << buf;
    }
}

}  // namespace subdiff
