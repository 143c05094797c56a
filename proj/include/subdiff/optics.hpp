#pragma once

// Coherent point-spread functions in units of the PSF width, their
// autocorrelation functions and the photon-sorting probabilities of the
// three-mode (zeroth + two first-order PSF-adapted modes) receiver.

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "subdiff/errors.hpp"
#include "subdiff/quadrature.hpp"
#include "subdiff/scene.hpp"

namespace subdiff {

enum class PsfKind { gaussian, airy };

inline std::string_view to_string(PsfKind k) { return k == PsfKind::gaussian ? "gaussian" : "airy"; }

inline PsfKind parse_psf_kind(std::string_view s) {
    if (s == "gaussian") return PsfKind::gaussian;
    if (s == "airy") return PsfKind::airy;
    throw InvalidInput("unknown PSF kind '" + std::string(s) + "' (expected gaussian or airy)");
}

/// Negative second derivatives of the autocorrelation at the origin.
struct Curvatures {
    double gx2 = 0.0;
    double gy2 = 0.0;
};

/// Per-photon sorting probabilities for a point source at a given offset.
struct ModeProbabilities {
    double p00 = 0.0;
    double p10 = 0.0;
    double p01 = 0.0;
    double p_res = 0.0;
};

namespace detail {

inline constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2 pi)
inline const double kSqrtPi = std::sqrt(std::numbers::pi);

inline double bessel_j(int n, double z) { return std::cyl_bessel_j(static_cast<double>(n), z); }

inline double airy_amplitude(double r) {
    const double z = std::numbers::pi * r;
    if (z < 1e-4) return 0.5 * kSqrtPi * (1.0 - z * z / 8.0);
    return bessel_j(1, z) / (kSqrtPi * r);
}

inline double airy_amplitude_derivative(double r) {
    const double z = std::numbers::pi * r;
    if (z < 1e-4) return -0.5 * kSqrtPi * std::numbers::pi * z / 4.0;
    return (z * bessel_j(0, z) - 2.0 * bessel_j(1, z)) / (kSqrtPi * r * r);
}

/// Cubic Hermite table of the Airy amplitude on [0, r_max]; the square of
/// the interpolant keeps the quadratic zeros of the intensity.
class AiryTable {
public:
    static constexpr double kStep = 1.0 / 1024.0;
    static constexpr double kRMax = 32.0;

    AiryTable() {
        const int n = static_cast<int>(kRMax / kStep) + 2;
        value_.resize(n);
        slope_.resize(n);
        for (int i = 0; i < n; ++i) {
            value_[i] = airy_amplitude(i * kStep);
            slope_[i] = airy_amplitude_derivative(i * kStep);
        }
    }

    double amplitude(double r) const {
        if (r >= kRMax) return airy_amplitude(r);
        const double u = r / kStep;
        const auto i = static_cast<std::size_t>(u);
        const double t = u - static_cast<double>(i);
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        return h00 * value_[i] + h10 * kStep * slope_[i] + h01 * value_[i + 1] + h11 * kStep * slope_[i + 1];
    }

    static const AiryTable& instance() {
        static const AiryTable table;
        return table;
    }

private:
    std::vector<double> value_;
    std::vector<double> slope_;
};

// Second central difference refined by two Richardson levels over steps
// {h, h/2, h/4}.
template <class F>
double richardson_second_derivative(F&& f, double h) {
    const double f0 = f(0.0);
    auto d = [&](double s) { return (f(s) - 2.0 * f0 + f(-s)) / (s * s); };
    const double d1 = d(h), d2 = d(h / 2), d3 = d(h / 4);
    const double r1 = d2 + (d2 - d1) / 3.0;
    const double r2 = d3 + (d3 - d2) / 3.0;
    return r2 + (r2 - r1) / 15.0;
}

}  // namespace detail

class Psf {
public:
    static constexpr double kNormTolerance = 1e-6;
    static constexpr double kRichardsonStep = 0.1;

    /// Builds and validates a PSF (L2 norm by radial quadrature, curvatures,
    /// vanishing cross-curvature).
    static Psf make(PsfKind kind) {
        Psf p(kind);
        const double norm = p.radial_norm();
        if (std::abs(norm - 1.0) > kNormTolerance)
            throw NumericalError("PSF normalization check failed: |psi|^2 integrates to " + std::to_string(norm));
        p.curv_ = p.compute_curvatures();
        const double h = kRichardsonStep;
        const double cross = (p.autocorrelation({h, h}) - p.autocorrelation({h, -h}) -
                              p.autocorrelation({-h, h}) + p.autocorrelation({-h, -h})) /
                             (4 * h * h);
        if (std::abs(cross) > 1e-9 * p.curv_.gx2)
            throw InvalidInput("PSF has nonzero cross-curvature; first-order modes would not be orthogonal");
        if (!(p.curv_.gx2 > 0.0) || !(p.curv_.gy2 > 0.0)) throw NumericalError("PSF curvature is not positive");
        return p;
    }

    static Psf gaussian() { return make(PsfKind::gaussian); }
    static Psf airy() { return make(PsfKind::airy); }

    PsfKind kind() const noexcept { return kind_; }
    const Curvatures& curvatures() const noexcept { return curv_; }
    /// Integral of |psi|^2 measured at construction.
    double measured_norm() const { return radial_norm(); }

    double amplitude(Vec2 x) const {
        const double r = std::hypot(x.x, x.y);
        if (kind_ == PsfKind::gaussian) return detail::kInvSqrt2Pi * std::exp(-0.25 * r * r);
        return detail::airy_amplitude(r);
    }

    /// |psi|^2; the Airy branch uses the interpolation table.
    double intensity(Vec2 x) const {
        if (kind_ == PsfKind::gaussian) return 0.5 / std::numbers::pi * std::exp(-0.5 * (x.x * x.x + x.y * x.y));
        const double a = detail::AiryTable::instance().amplitude(std::hypot(x.x, x.y));
        return a * a;
    }

    double autocorrelation(Vec2 s) const {
        const double r2 = s.x * s.x + s.y * s.y;
        if (kind_ == PsfKind::gaussian) return std::exp(-r2 / 8.0);
        // Hard circular pupil: the autocorrelation is the normalized jinc.
        const double z = std::numbers::pi * std::sqrt(r2);
        if (z < 1e-4) return 1.0 - z * z / 8.0;
        return 2.0 * detail::bessel_j(1, z) / z;
    }

    Vec2 autocorrelation_gradient(Vec2 s) const {
        const double r2 = s.x * s.x + s.y * s.y;
        if (kind_ == PsfKind::gaussian) {
            const double g = -0.25 * std::exp(-r2 / 8.0);
            return {g * s.x, g * s.y};
        }
        constexpr double pi2 = std::numbers::pi * std::numbers::pi;
        const double z = std::numbers::pi * std::sqrt(r2);
        const double g = z < 1e-4 ? -pi2 / 4.0 + pi2 * pi2 * r2 / 48.0 : -2.0 * detail::bessel_j(2, z) / r2;
        return {g * s.x, g * s.y};
    }

private:
    explicit Psf(PsfKind k) : kind_(k) {}

    double radial_norm() const {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        if (kind_ == PsfKind::gaussian) {
            return quad::integrate([&](double r) { return two_pi * r * std::pow(amplitude({r, 0.0}), 2); }, 0.0, 40.0,
                                   80);
        }
        // Integrate to R, then add the asymptotic tail 2/(pi^2 R) of
        // 2 int J1(pi r)^2 / r dr.
        constexpr double R = 1000.0;
        const double body = quad::integrate(
            [&](double r) { return two_pi * r * std::pow(detail::airy_amplitude(r), 2); }, 0.0, R, 4000);
        return body + 2.0 / (std::numbers::pi * std::numbers::pi * R);
    }

    Curvatures compute_curvatures() const {
        if (kind_ == PsfKind::gaussian) return {0.25, 0.25};
        const double gx =
            -detail::richardson_second_derivative([&](double h) { return autocorrelation({h, 0.0}); }, kRichardsonStep);
        const double gy =
            -detail::richardson_second_derivative([&](double h) { return autocorrelation({0.0, h}); }, kRichardsonStep);
        return {gx, gy};
    }

    PsfKind kind_;
    Curvatures curv_{};
};

inline double psf_amplitude(const Psf& psf, Vec2 point) { return psf.amplitude(point); }
inline double autocorrelation(const Psf& psf, Vec2 displacement) { return psf.autocorrelation(displacement); }
inline Curvatures gamma_curvatures(const Psf& psf) { return psf.curvatures(); }

/// Probabilities that a photon from a point source displaced by `offset`
/// lands in the PSF-matched mode, either first-order mode, or elsewhere.
inline ModeProbabilities mode_probabilities(const Psf& psf, Vec2 offset) {
    const double g = psf.autocorrelation(offset);
    const Vec2 grad = psf.autocorrelation_gradient(offset);
    const Curvatures& c = psf.curvatures();
    ModeProbabilities p;
    p.p00 = g * g;
    p.p10 = grad.x * grad.x / c.gx2;
    p.p01 = grad.y * grad.y / c.gy2;
    p.p_res = 1.0 - p.p00 - p.p10 - p.p01;
    if (p.p_res < -1e-9)
        throw NumericalError("mode probabilities exceed one (residual " + std::to_string(p.p_res) + ")");
    if (p.p_res < 0.0) p.p_res = 0.0;
    return p;
}

}  // namespace subdiff
