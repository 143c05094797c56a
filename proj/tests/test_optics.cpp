#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "subdiff/optics.hpp"
#include "subdiff/quadrature.hpp"

using namespace subdiff;

TEST(Quadrature, GaussLegendreIntegratesPolynomialsExactly) {
    const auto rule = quad::gauss_legendre(8);
    // Degree 15 is the highest exact degree for 8 nodes.
    EXPECT_NEAR(quad::integrate([](double x) { return std::pow(x, 14); }, -1.0, 1.0, 1, rule), 2.0 / 15, 1e-14);
    double wsum = 0;
    for (double w : rule.weights) wsum += w;
    EXPECT_NEAR(wsum, 2.0, 1e-14);
}

TEST(Optics, GaussianAmplitudeAndNorm) {
    const Psf p = Psf::gaussian();
    EXPECT_NEAR(psf_amplitude(p, {0, 0}), 1.0 / std::sqrt(2 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(p.measured_norm(), 1.0, 1e-10);
    EXPECT_NEAR(oracle::integrate_2d([](double x, double y) { return std::pow(oracle::gauss_psi(x, y), 2); }, 12, 241),
                1.0, 1e-9);
}

TEST(Optics, GaussianAutocorrelationMatchesQuadrature) {
    const Psf p = Psf::gaussian();
    for (Vec2 s : {Vec2{0, 0}, Vec2{0.5, 0}, Vec2{1.0, -0.7}, Vec2{2.0, 1.5}}) {
        const double num = oracle::integrate_2d(
            [&](double x, double y) { return oracle::gauss_psi(x, y) * oracle::gauss_psi(x - s.x, y - s.y); }, 14, 281);
        EXPECT_NEAR(autocorrelation(p, s), num, 1e-9) << s.x << "," << s.y;
    }
    EXPECT_NEAR(autocorrelation(p, {1, 0}), std::exp(-1.0 / 8), 1e-15);
}

TEST(Optics, GaussianCurvatures) {
    const auto c = gamma_curvatures(Psf::gaussian());
    EXPECT_DOUBLE_EQ(c.gx2, 0.25);
    EXPECT_DOUBLE_EQ(c.gy2, 0.25);
}

TEST(Optics, AiryNormAndCurvature) {
    const Psf p = Psf::airy();
    EXPECT_NEAR(p.measured_norm(), 1.0, 1e-6);
    const auto c = p.curvatures();
    EXPECT_NEAR(c.gx2, std::numbers::pi * std::numbers::pi / 4, 1e-6);
    EXPECT_NEAR(c.gy2, c.gx2, 1e-12);
}

// Pupil-domain check: Gamma is the Fourier transform of the uniform pupil
// intensity, a disk of radius 1/2 in spatial frequency.
TEST(Optics, AiryAutocorrelationMatchesPupilIntegral) {
    const Psf p = Psf::airy();
    for (double r : {0.0, 0.3, 0.8, 1.22, 2.0, 3.7}) {
        const double num = quad::integrate(
                               [&](double rho) { return 2 * std::numbers::pi * rho * std::cyl_bessel_j(0.0, 2 * std::numbers::pi * rho * r); },
                               0.0, 0.5, 40) /
                           (std::numbers::pi * 0.25);
        EXPECT_NEAR(autocorrelation(p, {r, 0}), num, 1e-10) << r;
    }
}

TEST(Optics, AiryAutocorrelationMatchesPositionSpaceQuadrature) {
    // Truncated position-space overlap; the truncation leaves ~2/(pi^2 R)
    // of the norm outside, so the tolerance is loose.
    const Psf p = Psf::airy();
    auto psi = [](double x, double y) {
        const double r = std::hypot(x, y);
        if (r < 1e-12) return std::sqrt(std::numbers::pi) / 2.0;
        return std::cyl_bessel_j(1.0, std::numbers::pi * r) / (std::sqrt(std::numbers::pi) * r);
    };
    const double s = 0.6;
    const double num = oracle::integrate_2d([&](double x, double y) { return psi(x, y) * psi(x - s, y); }, 16, 641);
    EXPECT_NEAR(autocorrelation(p, {s, 0}), num, 2e-2);
}

TEST(Optics, AiryGradientMatchesFiniteDifference) {
    const Psf p = Psf::airy();
    for (Vec2 s : {Vec2{0.01, 0.02}, Vec2{0.3, -0.2}, Vec2{1.1, 0.4}}) {
        const double h = 1e-5;
        const double dx = (p.autocorrelation({s.x + h, s.y}) - p.autocorrelation({s.x - h, s.y})) / (2 * h);
        const double dy = (p.autocorrelation({s.x, s.y + h}) - p.autocorrelation({s.x, s.y - h})) / (2 * h);
        const Vec2 g = p.autocorrelation_gradient(s);
        EXPECT_NEAR(g.x, dx, 1e-8);
        EXPECT_NEAR(g.y, dy, 1e-8);
    }
}

TEST(Optics, AiryIntensityTableMatchesBessel) {
    const Psf p = Psf::airy();
    for (double r : {0.0, 0.05, 0.61, 1.0, 1.2197, 2.5, 7.3, 20.0}) {
        const double a = r == 0 ? std::sqrt(std::numbers::pi) / 2
                                : std::cyl_bessel_j(1.0, std::numbers::pi * r) / (std::sqrt(std::numbers::pi) * r);
        EXPECT_NEAR(p.intensity({r, 0}), a * a, 1e-9 * std::max(1.0, a * a)) << r;
    }
}

TEST(Optics, ModeProbabilitiesAtOriginAndSmallOffsets) {
    const Psf g = Psf::gaussian();
    const auto m0 = mode_probabilities(g, {0, 0});
    EXPECT_DOUBLE_EQ(m0.p00, 1.0);
    EXPECT_DOUBLE_EQ(m0.p10, 0.0);
    EXPECT_DOUBLE_EQ(m0.p01, 0.0);
    // Gaussian: HG overlaps give p00 = e^{-d^2/4}, p10 = (dx^2/4) e^{-d^2/4}.
    const Vec2 d{0.3, -0.2};
    const double d2 = d.x * d.x + d.y * d.y;
    const auto m = mode_probabilities(g, d);
    EXPECT_NEAR(m.p00, std::exp(-d2 / 4), 1e-15);
    EXPECT_NEAR(m.p10, d.x * d.x / 4 * std::exp(-d2 / 4), 1e-15);
    EXPECT_NEAR(m.p01, d.y * d.y / 4 * std::exp(-d2 / 4), 1e-15);
    EXPECT_NEAR(m.p00 + m.p10 + m.p01 + m.p_res, 1.0, 1e-15);
}

TEST(Optics, GaussianModeProbabilitiesMatchOverlapQuadrature) {
    // Unnormalized first-order mode along x; n10 is its squared norm.
    const Vec2 d{0.7, 0.2};
    auto phi10 = [](double x, double y) { return x * oracle::gauss_psi(x, y); };
    const double a00 = oracle::integrate_2d(
        [&](double x, double y) { return oracle::gauss_psi(x, y) * oracle::gauss_psi(x - d.x, y - d.y); }, 14, 281);
    const double a10 = oracle::integrate_2d(
        [&](double x, double y) { return phi10(x, y) * oracle::gauss_psi(x - d.x, y - d.y); }, 14, 281);
    const double n10 = oracle::integrate_2d([&](double x, double y) { return phi10(x, y) * phi10(x, y); }, 14, 281);
    const auto m = mode_probabilities(Psf::gaussian(), d);
    EXPECT_NEAR(m.p00, a00 * a00, 1e-9);
    EXPECT_NEAR(m.p10, a10 * a10 / n10, 1e-9);
}

// Property: probabilities are in [0, 1] and sum to one for random offsets.
TEST(OpticsProperty, ModeProbabilitiesFormADistribution) {
    oracle::Gen gen(21);
    for (const Psf& p : {Psf::gaussian(), Psf::airy()}) {
        for (int i = 0; i < 500; ++i) {
            const Vec2 d{gen.uniform(-1.5, 1.5), gen.uniform(-1.5, 1.5)};
            const auto m = mode_probabilities(p, d);
            for (double v : {m.p00, m.p10, m.p01, m.p_res}) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0 + 1e-12);
            }
            EXPECT_NEAR(m.p00 + m.p10 + m.p01 + m.p_res, 1.0, 1e-12);
        }
    }
}

// Property: autocorrelation is even, bounded by 1 and rotation invariant.
TEST(OpticsProperty, AutocorrelationSymmetries) {
    oracle::Gen gen(22);
    for (const Psf& p : {Psf::gaussian(), Psf::airy()}) {
        for (int i = 0; i < 300; ++i) {
            const Vec2 s{gen.uniform(-3, 3), gen.uniform(-3, 3)};
            const double g = p.autocorrelation(s);
            EXPECT_NEAR(g, p.autocorrelation({-s.x, -s.y}), 1e-15);
            EXPECT_NEAR(g, p.autocorrelation({s.y, -s.x}), 1e-15);
            EXPECT_LE(std::abs(g), 1.0 + 1e-15);
        }
    }
}

TEST(Optics, ParsePsfKind) {
    EXPECT_EQ(parse_psf_kind("gaussian"), PsfKind::gaussian);
    EXPECT_EQ(parse_psf_kind("airy"), PsfKind::airy);
    EXPECT_THROW(parse_psf_kind("bessel"), InvalidInput);
}
