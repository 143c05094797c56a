#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "subdiff/errors.hpp"

namespace subdiff {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of stream `index` under `master`: a pure function of the pair, so
/// trials can be scheduled on any worker.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

/// Poisson sampler by table inversion with a guide table. The table spans
/// mean +- 12 standard deviations (+20); the truncated mass is below 1e-17,
/// under the resolution of a 53-bit uniform.
class PoissonTable {
public:
    PoissonTable() = default;

    explicit PoissonTable(double mean) : mean_(mean) {
        if (!(mean >= 0.0) || !std::isfinite(mean)) throw InvalidInput("Poisson mean must be finite and >= 0");
        if (mean == 0.0) return;
        const double sd = std::sqrt(mean);
        lo_ = static_cast<std::int64_t>(std::max(0.0, std::floor(mean - 12.0 * sd - 20.0)));
        const auto hi = static_cast<std::int64_t>(std::ceil(mean + 12.0 * sd + 20.0));
        cdf_.resize(static_cast<std::size_t>(hi - lo_ + 1));
        const double log_mean = std::log(mean);
        double acc = 0.0;
        for (std::size_t i = 0; i < cdf_.size(); ++i) {
            const double k = static_cast<double>(lo_ + static_cast<std::int64_t>(i));
            acc += std::exp(k * log_mean - mean - std::lgamma(k + 1.0));
            cdf_[i] = acc;
        }
        for (double& c : cdf_) c /= acc;
        cdf_.back() = 1.0;
        guide_.resize(cdf_.size());
        std::size_t j = 0;
        for (std::size_t g = 0; g < guide_.size(); ++g) {
            const double u = static_cast<double>(g) / static_cast<double>(guide_.size());
            while (cdf_[j] <= u) ++j;
            guide_[g] = static_cast<std::uint32_t>(j);
        }
    }

    double mean() const noexcept { return mean_; }

    std::int64_t operator()(Rng& rng) const {
        if (cdf_.empty()) return 0;
        const double u = rng.uniform();
        std::size_t j = guide_[static_cast<std::size_t>(u * static_cast<double>(guide_.size()))];
        while (cdf_[j] <= u) ++j;
        return lo_ + static_cast<std::int64_t>(j);
    }

private:
    double mean_ = 0.0;
    std::int64_t lo_ = 0;
    std::vector<double> cdf_;
    std::vector<std::uint32_t> guide_;
};

/// Walker/Vose alias table over a discrete distribution.
class AliasTable {
public:
    AliasTable() = default;

    explicit AliasTable(std::span<const double> weights) {
        const std::size_t n = weights.size();
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (n == 0 || !(total > 0.0)) throw InvalidInput("alias table needs positive total weight");
        prob_.assign(n, 0.0);
        alias_.assign(n, 0);
        std::vector<double> scaled(n);
        std::vector<std::uint32_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = weights[i] * static_cast<double>(n) / total;
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
        }
        while (!small.empty() && !large.empty()) {
            const auto s = small.back();
            small.pop_back();
            const auto l = large.back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (auto i : large) prob_[i] = 1.0;
        for (auto i : small) prob_[i] = 1.0;
    }

    std::size_t size() const noexcept { return prob_.size(); }

    std::size_t operator()(Rng& rng) const {
        const double u = rng.uniform() * static_cast<double>(prob_.size());
        const auto i = static_cast<std::size_t>(u);
        return (u - static_cast<double>(i)) < prob_[i] ? i : alias_[i];
    }

private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

}  // namespace subdiff
