#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "oracles.hpp"
#include "subdiff/sim.hpp"

using namespace subdiff;

namespace {

ChannelModel model(std::vector<std::pair<double, double>> rates, Receiver r = Receiver::direct) {
    ChannelModel cm;
    cm.receiver = r;
    for (std::size_t k = 0; k < rates.size(); ++k)
        cm.channels.push_back({"c" + std::to_string(k), rates[k].first, rates[k].second});
    return cm;
}

ChannelModel three_mode() { return model({{480, 470}, {8, 15}, {12, 15}}, Receiver::trispade); }

ChannelModel many_channels(int n) {
    std::vector<std::pair<double, double>> r;
    for (int k = 0; k < n; ++k) r.push_back({5.0 + 0.05 * k, 5.0 + 0.05 * (n - k)});
    return model(r);
}

}  // namespace

TEST(Sim, PerChannelCountsHaveTheRightMeans) {
    const auto cm = three_mode();
    const StepSampler s(cm);
    EXPECT_TRUE(s.per_channel());
    Rng rng(1);
    std::vector<double> m(3, 0.0);
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto c = s.counts(Hypothesis::post, rng);
        for (int k = 0; k < 3; ++k) m[k] += static_cast<double>(c[k]);
    }
    for (int k = 0; k < 3; ++k)
        EXPECT_NEAR(m[k] / n, cm.channels[k].lambda_post, 5 * std::sqrt(cm.channels[k].lambda_post / n));
}

TEST(Sim, PhotonModeCountsAreIndependentPoisson) {
    const auto cm = many_channels(60);
    const StepSampler s(cm);
    EXPECT_FALSE(s.per_channel());
    Rng rng(2);
    const int n = 20000;
    std::vector<double> m(60, 0.0), v(60, 0.0);
    double cov01 = 0;
    for (int i = 0; i < n; ++i) {
        const auto c = s.counts(Hypothesis::pre, rng);
        for (int k = 0; k < 60; ++k) {
            m[k] += static_cast<double>(c[k]);
            v[k] += static_cast<double>(c[k] * c[k]);
        }
        cov01 += static_cast<double>(c[0] * c[1]);
    }
    for (int k = 0; k < 60; k += 7) {
        const double lam = cm.channels[k].lambda_pre;
        const double mean = m[k] / n, var = v[k] / n - mean * mean;
        EXPECT_NEAR(mean, lam, 5 * std::sqrt(lam / n));
        EXPECT_NEAR(var / lam, 1.0, 0.06);
    }
    const double c01 = cov01 / n - (m[0] / n) * (m[1] / n);
    EXPECT_NEAR(c01, 0.0, 5 * 5.0 / std::sqrt(n));
}

TEST(Sim, MeanLlrIsTheRelativeEntropy) {
    for (const auto& cm : {three_mode(), many_channels(50)}) {
        const StepSampler s(cm);
        Rng rng(3);
        const int n = 40000;
        double sum = 0, sum2 = 0;
        for (int i = 0; i < n; ++i) {
            const double x = s.llr(Hypothesis::post, rng);
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
        EXPECT_NEAR(mean, poisson_re_per_step(cm), 4 * se);
    }
}

TEST(Sim, LlrPathMatchesCountPath) {
    // Same seed, same draws: the fused LLR equals the LLR of the sampled counts.
    for (const auto& cm : {three_mode(), many_channels(40)}) {
        const StepSampler s(cm);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng a(seed), b(seed);
            const auto counts = s.counts(Hypothesis::post, a);
            EXPECT_NEAR(s.llr(Hypothesis::post, b), llr_step(cm, counts), 1e-9);
        }
    }
}

TEST(Sim, SingularChannelTriggersRightAfterTheChange) {
    const auto cm = model({{50, 50}, {0, 20}});
    const StepSampler s(cm);
    const auto rec = run_trial(s, 100.0, 30, 1000, 7);
    ASSERT_TRUE(rec.trigger_time);
    EXPECT_EQ(*rec.trigger_time, 31);
    EXPECT_EQ(*rec.latency, 1);
    EXPECT_FALSE(rec.false_alarm);
}

TEST(Sim, CensoringIsReported) {
    const auto cm = model({{50, 50}, {10, 10}});
    EnsembleOptions o;
    o.h = 5;
    o.change_time = 10;
    o.n_trials = 20;
    o.max_steps = 50;
    const auto st = run_ensemble(cm, o);
    EXPECT_EQ(st.censored, 20);
    EXPECT_DOUBLE_EQ(st.censored_fraction, 1.0);
    EXPECT_FALSE(st.latency);
    EXPECT_FALSE(st.diagnostic.empty());
}

TEST(Sim, EnsembleIsIndependentOfWorkerCount) {
    const StepSampler s(three_mode());
    EnsembleOptions o;
    o.h = 6;
    o.change_time = 25;
    o.n_trials = 300;
    o.max_steps = 100000;
    o.master_seed = 99;
    o.workers = 1;
    const auto a = run_trials(s, o);
    o.workers = 8;
    const auto b = run_trials(s, o);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].trigger_time, b[i].trigger_time);
        EXPECT_EQ(a[i].overshoot, b[i].overshoot);
        EXPECT_EQ(a[i].seed, stream_seed(99, i));
    }
    const auto sa = aggregate(a, o), sb = aggregate(b, o);
    EXPECT_EQ(sa.latency->mean, sb.latency->mean);
    EXPECT_EQ(sa.latency->se, sb.latency->se);
}

TEST(Sim, WorkerCountFromEnvironment) {
    ::setenv(kWorkersEnv, "3", 1);
    EXPECT_EQ(resolve_workers(0), 3);
    EXPECT_EQ(resolve_workers(5), 5);
    ::setenv(kWorkersEnv, "junk", 1);
    EXPECT_GE(resolve_workers(0), 1);
    ::unsetenv(kWorkersEnv);
}

// Property: every detected (non-FA, non-censored) trial has latency >= 1,
// and false alarms are exactly the triggers at or before the change.
TEST(SimProperty, LatencyPositivity) {
    oracle::Gen gen(51);
    const StepSampler s(three_mode());
    for (int i = 0; i < 400; ++i) {
        const auto tc = gen.integer(0, 40);
        const auto rec = run_trial(s, gen.uniform(0.5, 6.0), tc, 10000, static_cast<std::uint64_t>(i));
        ASSERT_FALSE(rec.censored);
        if (rec.false_alarm) {
            EXPECT_LE(*rec.trigger_time, tc);
            EXPECT_FALSE(rec.latency);
        } else {
            EXPECT_GE(*rec.latency, 1);
            EXPECT_EQ(*rec.latency, *rec.trigger_time - tc);
        }
        EXPECT_GT(rec.overshoot, 0.0);
    }
}

// Wald's identity for the unreflected LLR sum at the CUSUM stopping time:
// E[S_T] = D E[T] when sampling post-change from t = 1.
TEST(SimProperty, WaldIdentityAtTheStoppingTime) {
    const auto cm = three_mode();
    const StepSampler s(cm);
    const double D = poisson_re_per_step(cm);
    const int n = 3000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<TraceRow> tr;
        run_trial(s, 8.0, 0, 100000, stream_seed(5, i), &tr);
        double S = 0;
        for (const auto& r : tr) S += r.llr;
        const double d = S - D * static_cast<double>(tr.size());
        sum += d;
        sum2 += d * d;
    }
    const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, 0.0, 4 * se);
}

// Property: mean latency grows with the threshold.
TEST(SimProperty, LatencyMonotoneInThreshold) {
    const StepSampler s(three_mode());
    double prev = 0;
    for (double h : {2.0, 4.0, 6.0, 8.0}) {
        EnsembleOptions o;
        o.h = h;
        o.change_time = 0;
        o.n_trials = 800;
        o.max_steps = 100000;
        const auto st = run_ensemble(s, o);
        EXPECT_GT(st.latency->mean, prev - 3 * st.latency->se);
        prev = st.latency->mean;
    }
}

TEST(Sim, QuantumLimitLatency) {
    EXPECT_NEAR(quantum_limit_latency(25000, 0.4), std::log(25000.0) / 0.4, 1e-12);
    EXPECT_NEAR(quantum_limit_latency(25000, 0.4), 25.32, 0.01);
    EXPECT_EQ(quantum_limit_latency(1.0, 3.0), 0.0);
    EXPECT_NEAR(quantum_limit_latency(std::exp(10.0), 1), 10, 1e-12);
    EXPECT_NEAR(quantum_limit_latency(std::exp(10.0), 2), 5, 1e-12);
    EXPECT_THROW(quantum_limit_latency(0.5, 1), InvalidInput);
    EXPECT_THROW(quantum_limit_latency(10, 0), InvalidInput);
}

TEST(Sim, LatencyPredictionAndFalseAlarmBound) {
    EXPECT_DOUBLE_EQ(latency_prediction(10, 0, 0.5), 20);
    EXPECT_DOUBLE_EQ(latency_prediction(10, 1, 0.5), 22);
    EXPECT_THROW(latency_prediction(10, 0, 0), InvalidInput);
    EXPECT_THROW(latency_prediction(10, -1, 1), InvalidInput);
    EXPECT_NEAR(false_alarm_bound(5, 0.5), 2 * std::exp(5.0), 1e-9);
    EXPECT_THROW(false_alarm_bound(5, 0.0), InvalidInput);
}

TEST(Sim, FitLogSlope) {
    std::vector<ScalingPoint> p4, p2;
    for (double g : {0.05, 0.1, 0.2, 0.4}) {
        p4.push_back({g, 3.0 * std::pow(g, 4)});
        p2.push_back({g, 0.7 * g * g});
    }
    EXPECT_NEAR(fit_log_slope(p4), 4.0, 1e-12);
    EXPECT_NEAR(fit_log_slope(p2), 2.0, 1e-12);
    EXPECT_THROW(fit_log_slope(std::vector<ScalingPoint>{{0.1, 1}, {0.2, 2}}), InvalidInput);
    EXPECT_THROW(fit_log_slope(std::vector<ScalingPoint>{{0.1, 1}, {0.1, 2}, {0.2, 3}}), InvalidInput);
    EXPECT_THROW(fit_log_slope(std::vector<ScalingPoint>{{0.1, 1}, {0.2, 0}, {0.3, 3}}), InvalidInput);
}

TEST(Sim, EstimateMeanAndStandardError) {
    const std::vector<double> x{1, 2, 3, 4};
    const auto e = estimate(x);
    ASSERT_TRUE(e);
    EXPECT_DOUBLE_EQ(e->mean, 2.5);
    EXPECT_NEAR(e->se, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
    EXPECT_FALSE(estimate(std::vector<double>{}));
}
