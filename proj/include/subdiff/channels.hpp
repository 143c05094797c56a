#pragma once

// Poisson measurement channels for the three-mode sorter and for a pixelated
// focal-plane array, plus the relative entropies that set detection latency.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "subdiff/errors.hpp"
#include "subdiff/optics.hpp"
#include "subdiff/scene.hpp"

namespace subdiff {

enum class Receiver { trispade, direct };

inline std::string_view to_string(Receiver r) { return r == Receiver::trispade ? "trispade" : "direct"; }

inline Receiver parse_receiver(std::string_view s) {
    if (s == "trispade") return Receiver::trispade;
    if (s == "direct") return Receiver::direct;
    throw InvalidInput("unknown receiver '" + std::string(s) + "' (expected trispade or direct)");
}

struct Channel {
    std::string id;
    double lambda_pre = 0.0;   // mean counts per time step before the change
    double lambda_post = 0.0;  // ... and after
};

/// Square focal-plane array centered on the optical axis, in PSF-width units.
struct PixelGrid {
    double pitch = 0.1;
    double half_extent = 6.0;

    int pixels_per_side() const { return static_cast<int>(std::lround(2.0 * half_extent / pitch)); }
};

inline PixelGrid default_pixel_grid(PsfKind kind) {
    return kind == PsfKind::gaussian ? PixelGrid{0.1, 6.0} : PixelGrid{0.025, 10.0};
}

struct ChannelModel {
    Receiver receiver = Receiver::trispade;
    std::vector<Channel> channels;
    double photons_per_step = 0.0;
    std::optional<PixelGrid> grid;  // direct imaging only

    double total_pre() const {
        double s = 0.0;
        for (const auto& c : channels) s += c.lambda_pre;
        return s;
    }
    double total_post() const {
        double s = 0.0;
        for (const auto& c : channels) s += c.lambda_post;
        return s;
    }
};

/// Throws InvalidInput when a channel model breaks its invariants.
inline void validate(const ChannelModel& cm) {
    for (const auto& c : cm.channels)
        if (!std::isfinite(c.lambda_pre) || !std::isfinite(c.lambda_post) || c.lambda_pre < 0.0 || c.lambda_post < 0.0)
            throw InvalidInput("channel '" + c.id + "': rates must be finite and non-negative");
    if (cm.receiver == Receiver::trispade && cm.channels.size() != 3)
        throw InvalidInput("three-mode channel model must have exactly 3 channels");
    const double slack = cm.photons_per_step + 1e-9;
    if (cm.photons_per_step > 0.0 && (cm.total_pre() > slack || cm.total_post() > slack))
        throw InvalidInput("channel rates exceed the photon budget per step");
}

struct Scenario {
    ObjectModel pre;
    ObjectModel post;
    double gamma = 0.25;
    double photons_per_step = 500.0;
    Psf psf = Psf::gaussian();
    std::vector<std::string> warnings;
};

inline constexpr double kCentroidTolerance = 1e-12;

/// Assembles a scenario, re-checking that both objects share the origin as
/// centroid.
inline Scenario make_scenario(ObjectModel pre, ObjectModel post, double gamma, double photons_per_step, Psf psf) {
    for (const ObjectModel* o : {&pre, &post}) {
        const Vec2 c = o->centroid();
        if (std::abs(c.x) > kCentroidTolerance || std::abs(c.y) > kCentroidTolerance)
            throw InvalidInput("object '" + o->label() + "' is not centroid-registered");
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be positive");
    if (!(photons_per_step > 0.0) || !std::isfinite(photons_per_step))
        throw InvalidInput("photons_per_step must be positive");
    Scenario sc{std::move(pre), std::move(post), gamma, photons_per_step, std::move(psf), {}};
    if (gamma > 1.0) sc.warnings.push_back("gamma > 1 is outside the sub-diffraction regime");
    return sc;
}

// ---------------------------------------------------------------------------

inline ChannelModel trispade_channels(const Scenario& sc) {
    auto rates = [&](const ObjectModel& obj) {
        std::array<double, 3> r{};
        obj.for_each_mass([&](Vec2 p, double w) {
            const auto m = mode_probabilities(sc.psf, sc.gamma * p);
            r[0] += w * m.p00;
            r[1] += w * m.p10;
            r[2] += w * m.p01;
        });
        for (double& v : r) v *= sc.photons_per_step;
        return r;
    };
    const auto pre = rates(sc.pre);
    const auto post = rates(sc.post);
    ChannelModel cm;
    cm.receiver = Receiver::trispade;
    cm.photons_per_step = sc.photons_per_step;
    const char* ids[] = {"00", "10", "01"};
    for (int k = 0; k < 3; ++k) cm.channels.push_back({ids[k], pre[k], post[k]});
    return cm;
}

namespace detail {

// Intensity sampled at 2x2 sub-pixel points, row-major (row = y), in units
// of probability per unit area.
inline Eigen::MatrixXd subsampled_image(const Scenario& sc, const ObjectModel& obj, const PixelGrid& g,
                                        int airy_object_cells) {
    const int n = g.pixels_per_side();
    const int s = 2 * n;
    const double h = g.pitch / 2.0;
    Eigen::VectorXd u(s);
    for (int i = 0; i < s; ++i) u[i] = -g.half_extent + (i + 0.5) * h;

    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(s, s);
    if (sc.psf.kind() == PsfKind::gaussian) {
        // |psi(u - c)|^2 = (1/2pi) exp(-(ux-cx)^2/2) exp(-(uy-cy)^2/2)
        auto axis = [&](double c) {
            Eigen::VectorXd e(s);
            for (int i = 0; i < s; ++i) e[i] = std::exp(-0.5 * (u[i] - c) * (u[i] - c));
            return e;
        };
        for (const auto& p : obj.points()) {
            const Vec2 c = sc.gamma * p.position;
            img.noalias() += p.weight * axis(c.y) * axis(c.x).transpose();
        }
        if (const auto& r = obj.raster()) {
            Eigen::MatrixXd ex(r->nx, s), ey(r->ny, s), w(r->ny, r->nx);
            for (int ix = 0; ix < r->nx; ++ix) ex.row(ix) = axis(sc.gamma * r->center(ix, 0).x).transpose();
            for (int iy = 0; iy < r->ny; ++iy) ey.row(iy) = axis(sc.gamma * r->center(0, iy).y).transpose();
            for (int iy = 0; iy < r->ny; ++iy)
                for (int ix = 0; ix < r->nx; ++ix) w(iy, ix) = r->at(ix, iy);
            img.noalias() += ey.transpose() * (w * ex);
        }
        img *= 0.5 / std::numbers::pi;
    } else {
        const auto masses = coarsened_masses(obj, airy_object_cells);
        for (int iy = 0; iy < s; ++iy)
            for (int ix = 0; ix < s; ++ix) {
                double v = 0.0;
                for (const auto& m : masses)
                    v += m.weight * sc.psf.intensity({u[ix] - sc.gamma * m.position.x, u[iy] - sc.gamma * m.position.y});
                img(iy, ix) = v;
            }
    }
    return img;
}

}  // namespace detail

inline constexpr double kMinCapturedProbability = 0.95;

/// Pixel rates of an idealized focal-plane array: midpoint quadrature over
/// 2x2 sub-pixel samples. `airy_object_cells` bounds the raster resolution
/// used for the (non-separable) Airy intensity sum.
inline ChannelModel direct_channels(const Scenario& sc, const PixelGrid& grid, int airy_object_cells = 16) {
    if (!(grid.pitch > 0.0)) throw InvalidInput("pixel pitch must be positive");
    if (!(grid.half_extent >= 3.0)) throw InvalidInput("pixel grid half-extent must be at least 3 PSF widths");
    const int n = grid.pixels_per_side();
    if (std::abs(n * grid.pitch - 2.0 * grid.half_extent) > 1e-9 * grid.half_extent)
        throw InvalidInput("pixel grid: 2*half_extent must be a multiple of the pitch");

    const double sub_area = 0.25 * grid.pitch * grid.pitch;
    auto pixel_rates = [&](const ObjectModel& obj) {
        const Eigen::MatrixXd img = detail::subsampled_image(sc, obj, grid, airy_object_cells);
        std::vector<double> r(static_cast<std::size_t>(n) * n);
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
                r[static_cast<std::size_t>(iy) * n + ix] =
                    sc.photons_per_step * sub_area *
                    (img(2 * iy, 2 * ix) + img(2 * iy, 2 * ix + 1) + img(2 * iy + 1, 2 * ix) + img(2 * iy + 1, 2 * ix + 1));
        return r;
    };
    const auto pre = pixel_rates(sc.pre);
    const auto post = pixel_rates(sc.post);

    ChannelModel cm;
    cm.receiver = Receiver::direct;
    cm.photons_per_step = sc.photons_per_step;
    cm.grid = grid;
    cm.channels.reserve(pre.size());
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            const auto k = static_cast<std::size_t>(iy) * n + ix;
            cm.channels.push_back({"px" + std::to_string(ix) + "_" + std::to_string(iy), pre[k], post[k]});
        }
    const double captured = std::min(cm.total_pre(), cm.total_post()) / sc.photons_per_step;
    if (captured < kMinCapturedProbability)
        throw NumericalError("pixel grid captures only " + std::to_string(captured) + " of the light");
    return cm;
}

inline ChannelModel direct_channels(const Scenario& sc) {
    return direct_channels(sc, default_pixel_grid(sc.psf.kind()));
}

// ---------------------------------------------------------------------------
// Information quantities.

namespace detail {

// t ln t - t + 1, accurate near t = 1.
inline double entropy_kernel(double t) {
    const double u = t - 1.0;
    if (std::abs(u) < 0.5) return (1.0 + u) * std::log1p(u) - u;
    return t * std::log(t) - t + 1.0;
}

// b ln(b/a) - b + a with 0 ln 0 = 0.
inline double poisson_divergence(double a, double b) {
    if (b == 0.0) return a;
    if (a == 0.0) return std::numeric_limits<double>::infinity();
    return std::max(0.0, a * entropy_kernel(b / a));
}

}  // namespace detail

/// Relative entropy D(post || pre) of one time step's count vector, in nats.
inline double poisson_re_per_step(const ChannelModel& cm) {
    double d = 0.0;
    for (const auto& c : cm.channels) d += detail::poisson_divergence(c.lambda_pre, c.lambda_post);
    return d;
}

struct QreResult {
    double value = 0.0;  // nats per photon
    bool converged = true;
    double lower_order_value = std::numeric_limits<double>::quiet_NaN();
    std::string diagnostic;
};

/// Leading small-gamma quantum relative entropy per photon.
inline QreResult qre_leading_order(const Scenario& sc) {
    const Moments m1 = moments(sc.pre);
    const Moments m2 = moments(sc.post);
    const Curvatures& g = sc.psf.curvatures();
    QreResult r;
    const double tx = detail::poisson_divergence(m1.mx2, m2.mx2);
    const double ty = detail::poisson_divergence(m1.my2, m2.my2);
    if (std::isinf(tx) || std::isinf(ty)) {
        r.value = std::numeric_limits<double>::infinity();
        r.diagnostic = "post-change object extends along an axis where the pre-change object has zero extent";
        return r;
    }
    r.value = (tx * g.gx2 + ty * g.gy2) * sc.gamma * sc.gamma;
    return r;
}

struct QreOptions {
    int n_max = 8;
    double eigen_floor = 1e-14;
    double support_tolerance = 1e-6;
    double convergence_tolerance = 0.01;
};

namespace detail {

inline Eigen::MatrixXd hermite_gauss_state(const ObjectModel& obj, double gamma, int n_max) {
    const int dim = (n_max + 1) * (n_max + 2) / 2;
    std::vector<double> inv_sqrt_fact(n_max + 1);
    double f = 1.0;
    for (int k = 0; k <= n_max; ++k) {
        if (k > 0) f *= k;
        inv_sqrt_fact[k] = 1.0 / std::sqrt(f);
    }
    Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd v(dim);
    std::vector<double> px(n_max + 1), py(n_max + 1);
    for (const auto& p : obj.points()) {
        const Vec2 s = gamma * p.position;
        const double env = std::exp(-(s.x * s.x + s.y * s.y) / 8.0);
        px[0] = py[0] = 1.0;
        for (int k = 1; k <= n_max; ++k) {
            px[k] = px[k - 1] * s.x / 2.0;
            py[k] = py[k - 1] * s.y / 2.0;
        }
        int idx = 0;
        for (int order = 0; order <= n_max; ++order)
            for (int ny = 0; ny <= order; ++ny) {
                const int nx = order - ny;
                v[idx++] = env * px[nx] * py[ny] * inv_sqrt_fact[nx] * inv_sqrt_fact[ny];
            }
        rho.noalias() += p.weight * v * v.transpose();
    }
    return rho / rho.trace();
}

inline QreResult qre_truncated(const Scenario& sc, int n_max, const QreOptions& opt) {
    const Eigen::MatrixXd rho1 = hermite_gauss_state(sc.pre, sc.gamma, n_max);
    const Eigen::MatrixXd rho2 = hermite_gauss_state(sc.post, sc.gamma, n_max);
    if (rho1 == rho2) return {};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(rho1), e2(rho2);

    double s22 = 0.0;
    for (Eigen::Index i = 0; i < e2.eigenvalues().size(); ++i) {
        const double l = e2.eigenvalues()[i];
        if (l > 0.0) s22 += l * std::log(std::max(l, opt.eigen_floor));
    }
    double s21 = 0.0, null_weight = 0.0;
    for (Eigen::Index j = 0; j < e1.eigenvalues().size(); ++j) {
        const auto vec = e1.eigenvectors().col(j);
        const double overlap = vec.dot(rho2 * vec);
        const double l = e1.eigenvalues()[j];
        if (l < opt.eigen_floor) null_weight += overlap;
        s21 += overlap * std::log(std::max(l, opt.eigen_floor));
    }
    QreResult r;
    if (null_weight > opt.support_tolerance) {
        r.value = std::numeric_limits<double>::infinity();
        r.diagnostic = "post-change state has weight " + std::to_string(null_weight) +
                       " outside the support of the pre-change state";
        return r;
    }
    r.value = std::max(0.0, s22 - s21);
    return r;
}

}  // namespace detail

/// Quantum relative entropy per photon from single-photon density matrices
/// in a truncated 2D Hermite-Gauss basis (Gaussian PSF, point masses only).
inline QreResult qre_numerical(const Scenario& sc, const QreOptions& opt = {}) {
    if (sc.psf.kind() != PsfKind::gaussian) throw InvalidInput("numerical QRE requires the Gaussian PSF");
    if (sc.pre.has_raster() || sc.post.has_raster()) throw InvalidInput("numerical QRE requires point-mass objects");
    if (opt.n_max < 2) throw InvalidInput("numerical QRE needs n_max >= 2");

    QreResult r = detail::qre_truncated(sc, opt.n_max, opt);
    if (std::isinf(r.value)) return r;
    const QreResult lower = detail::qre_truncated(sc, opt.n_max - 2, opt);
    r.lower_order_value = lower.value;
    const double diff = std::abs(r.value - lower.value);
    r.converged = std::isfinite(lower.value) && (diff <= opt.convergence_tolerance * r.value || diff < 1e-15);
    if (!r.converged) r.diagnostic = "truncated-basis QRE not converged at n_max=" + std::to_string(opt.n_max);
    return r;
}

inline QreResult qre_numerical(const Scenario& sc, int n_max) {
    QreOptions o;
    o.n_max = n_max;
    return qre_numerical(sc, o);
}

}  // namespace subdiff
