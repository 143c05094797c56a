#pragma once

// Incoherent object models in nondimensional units. Lengths are in units of
// the scenario extent: every object lives in the square [-1/2, 1/2]^2 after
// its centroid has been moved to the origin.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "subdiff/errors.hpp"

namespace subdiff {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct PointMass {
    Vec2 position;
    double weight = 1.0;

    friend bool operator==(const PointMass&, const PointMass&) = default;
};

/// Regular grid of cells. Cell (ix, iy) is centered at
/// origin + ((ix + 1/2) cell, (iy + 1/2) cell); weights are row-major in iy.
struct Raster {
    Vec2 origin;
    double cell = 1.0;
    int nx = 0;
    int ny = 0;
    std::vector<double> weights;

    Vec2 center(int ix, int iy) const {
        return {origin.x + (ix + 0.5) * cell, origin.y + (iy + 0.5) * cell};
    }
    double at(int ix, int iy) const { return weights[static_cast<std::size_t>(iy) * nx + ix]; }

    friend bool operator==(const Raster&, const Raster&) = default;
};

struct Moments {
    double mx2 = 0.0;
    double my2 = 0.0;
};

// ---------------------------------------------------------------------------
// Object descriptions (what a config file names) and the validated model.

struct PointsSpec {
    std::vector<PointMass> points;
    friend bool operator==(const PointsSpec&, const PointsSpec&) = default;
};

/// Uniform-brightness axis-aligned rectangles. A rectangle's weight is its
/// share of the total intensity; when absent it defaults to the area.
struct Rectangle {
    Vec2 center;
    Vec2 size;
    std::optional<double> weight;
    friend bool operator==(const Rectangle&, const Rectangle&) = default;
};

struct RectanglesSpec {
    std::vector<Rectangle> rectangles;
    friend bool operator==(const RectanglesSpec&, const RectanglesSpec&) = default;
};

/// Uniform-brightness simple polygon (even-odd fill).
struct PolygonSpec {
    std::vector<Vec2> vertices;
    friend bool operator==(const PolygonSpec&, const PolygonSpec&) = default;
};

struct RasterSpec {
    Raster raster;
    friend bool operator==(const RasterSpec&, const RasterSpec&) = default;
};

struct ObjectSpec {
    std::string label;
    std::variant<PointsSpec, RectanglesSpec, PolygonSpec, RasterSpec> shape;
    /// Raster resolution used when rectangles or polygons are rasterized.
    int raster_cells = 256;

    friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

class ObjectModel {
public:
    const std::string& label() const noexcept { return label_; }
    std::span<const PointMass> points() const noexcept { return points_; }
    const std::optional<Raster>& raster() const noexcept { return raster_; }

    /// Calls f(position, weight) for every point mass and nonzero raster cell.
    template <class F>
    void for_each_mass(F&& f) const {
        for (const auto& p : points_) f(p.position, p.weight);
        if (!raster_) return;
        for (int iy = 0; iy < raster_->ny; ++iy)
            for (int ix = 0; ix < raster_->nx; ++ix) {
                const double w = raster_->at(ix, iy);
                if (w != 0.0) f(raster_->center(ix, iy), w);
            }
    }

    double total_weight() const {
        double s = 0.0;
        for_each_mass([&](Vec2, double w) { s += w; });
        return s;
    }

    Vec2 centroid() const {
        Vec2 c;
        for_each_mass([&](Vec2 p, double w) { c = c + w * p; });
        return c;
    }

    /// Largest |coordinate| over the support.
    double half_extent() const {
        double e = 0.0;
        for_each_mass([&](Vec2 p, double) { e = std::max({e, std::abs(p.x), std::abs(p.y)}); });
        return e;
    }

    bool has_raster() const noexcept { return raster_.has_value(); }

    /// Copy displaced by d (models a misregistered object; scenario assembly
    /// rejects it unless d = 0).
    ObjectModel translated(Vec2 d) const {
        ObjectModel o = *this;
        for (auto& p : o.points_) p.position = p.position + d;
        if (o.raster_) o.raster_->origin = o.raster_->origin + d;
        return o;
    }

private:
    friend ObjectModel build_object(const ObjectSpec& spec);

    std::string label_;
    std::vector<PointMass> points_;
    std::optional<Raster> raster_;
};

inline constexpr double kSupportTolerance = 1e-12;

namespace detail {

inline double overlap(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

inline Vec2 polygon_centroid(std::span<const Vec2> v, double* area_out) {
    double a = 0.0;
    Vec2 c;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2 p = v[i];
        const Vec2 q = v[(i + 1) % v.size()];
        const double cross = p.x * q.y - q.x * p.y;
        a += cross;
        c = c + cross * (p + q);
    }
    a *= 0.5;
    if (area_out) *area_out = a;
    if (a == 0.0) throw InvalidInput("polygon has zero area");
    return (1.0 / (6.0 * a)) * c;
}

inline bool inside_polygon(std::span<const Vec2> v, Vec2 p) {
    bool in = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].y > p.y) != (v[j].y > p.y)) {
            const double xc = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (p.x < xc) in = !in;
        }
    }
    return in;
}

inline void check_inside(Vec2 p, const std::string& label) {
    const double lim = 0.5 + kSupportTolerance;
    if (std::abs(p.x) > lim || std::abs(p.y) > lim)
        throw InvalidInput("object '" + label + "': support exceeds [-1/2, 1/2]^2 after centering");
}

// Grid of `cells`^2 covering [c - 1/2, c + 1/2]^2.
inline Raster empty_grid(Vec2 c, int cells) {
    if (cells < 1) throw InvalidInput("raster_cells must be >= 1");
    Raster r;
    r.origin = {c.x - 0.5, c.y - 0.5};
    r.cell = 1.0 / cells;
    r.nx = r.ny = cells;
    r.weights.assign(static_cast<std::size_t>(cells) * cells, 0.0);
    return r;
}

inline Raster rasterize(const RectanglesSpec& s, int cells, const std::string& label) {
    if (s.rectangles.empty()) throw InvalidInput("object '" + label + "': no rectangles");
    double total = 0.0;
    Vec2 c;
    for (const auto& r : s.rectangles) {
        if (!(r.size.x > 0.0) || !(r.size.y > 0.0))
            throw InvalidInput("object '" + label + "': rectangle sizes must be positive");
        const double w = r.weight.value_or(r.size.x * r.size.y);
        if (!(w >= 0.0)) throw InvalidInput("object '" + label + "': negative weight");
        total += w;
        c = c + w * r.center;
    }
    if (total <= 0.0) throw InvalidInput("object '" + label + "': all weights are zero");
    c = (1.0 / total) * c;

    for (const auto& r : s.rectangles) {
        check_inside(r.center - 0.5 * r.size - c, label);
        check_inside(r.center + 0.5 * r.size - c, label);
    }

    Raster g = empty_grid(c, cells);
    for (const auto& r : s.rectangles) {
        const double w = r.weight.value_or(r.size.x * r.size.y);
        if (w == 0.0) continue;
        const double density = w / (r.size.x * r.size.y);
        const double x0 = r.center.x - 0.5 * r.size.x, x1 = r.center.x + 0.5 * r.size.x;
        const double y0 = r.center.y - 0.5 * r.size.y, y1 = r.center.y + 0.5 * r.size.y;
        for (int iy = 0; iy < g.ny; ++iy) {
            const double cy0 = g.origin.y + iy * g.cell;
            const double oy = overlap(y0, y1, cy0, cy0 + g.cell);
            if (oy == 0.0) continue;
            for (int ix = 0; ix < g.nx; ++ix) {
                const double cx0 = g.origin.x + ix * g.cell;
                const double ox = overlap(x0, x1, cx0, cx0 + g.cell);
                g.weights[static_cast<std::size_t>(iy) * g.nx + ix] += density * ox * oy;
            }
        }
    }
    return g;
}

inline Raster rasterize(const PolygonSpec& s, int cells, const std::string& label) {
    if (s.vertices.size() < 3) throw InvalidInput("object '" + label + "': polygon needs >= 3 vertices");
    const Vec2 c = polygon_centroid(s.vertices, nullptr);
    for (const auto& v : s.vertices) check_inside(v - c, label);

    constexpr int kSub = 4;
    Raster g = empty_grid(c, cells);
    const double sub = g.cell / kSub;
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            int hits = 0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const Vec2 p{g.origin.x + ix * g.cell + (sx + 0.5) * sub,
                                 g.origin.y + iy * g.cell + (sy + 0.5) * sub};
                    hits += inside_polygon(s.vertices, p);
                }
            g.weights[static_cast<std::size_t>(iy) * g.nx + ix] = hits;
        }
    return g;
}

}  // namespace detail

/// Validates, normalizes and centers an object description.
inline ObjectModel build_object(const ObjectSpec& spec) {
    ObjectModel obj;
    obj.label_ = spec.label;
    const std::string& label = spec.label;

    if (const auto* pts = std::get_if<PointsSpec>(&spec.shape)) {
        if (pts->points.empty()) throw InvalidInput("object '" + label + "': empty point list");
        double total = 0.0;
        Vec2 c;
        for (const auto& p : pts->points) {
            if (!(p.weight >= 0.0) || !std::isfinite(p.weight))
                throw InvalidInput("object '" + label + "': weights must be finite and non-negative");
            total += p.weight;
            c = c + p.weight * p.position;
        }
        if (total <= 0.0) throw InvalidInput("object '" + label + "': all weights are zero");
        c = (1.0 / total) * c;
        for (const auto& p : pts->points) {
            if (p.weight == 0.0) continue;
            obj.points_.push_back({p.position - c, p.weight / total});
        }
    } else {
        Raster r;
        if (const auto* rs = std::get_if<RectanglesSpec>(&spec.shape)) {
            r = detail::rasterize(*rs, spec.raster_cells, label);
        } else if (const auto* ps = std::get_if<PolygonSpec>(&spec.shape)) {
            r = detail::rasterize(*ps, spec.raster_cells, label);
        } else {
            r = std::get<RasterSpec>(spec.shape).raster;
            if (r.nx < 1 || r.ny < 1 || !(r.cell > 0.0) ||
                r.weights.size() != static_cast<std::size_t>(r.nx) * r.ny)
                throw InvalidInput("object '" + label + "': malformed raster");
        }
        double total = 0.0;
        for (double w : r.weights) {
            if (!(w >= 0.0) || !std::isfinite(w))
                throw InvalidInput("object '" + label + "': weights must be finite and non-negative");
            total += w;
        }
        if (total <= 0.0) throw InvalidInput("object '" + label + "': all weights are zero");
        for (double& w : r.weights) w /= total;
        obj.raster_ = std::move(r);
    }

    // Final registration: removes the residual discrete centroid (raster
    // midpoints differ slightly from the analytic centroid).
    const Vec2 c = obj.centroid();
    for (auto& p : obj.points_) p.position = p.position - c;
    if (obj.raster_) obj.raster_->origin = obj.raster_->origin - c;

    obj.for_each_mass([&](Vec2 p, double) { detail::check_inside(p, label); });
    return obj;
}

/// Second moments about the origin. Raster cells count as uniformly bright
/// squares, each adding cell^2 / 12 to both moments.
inline Moments moments(const ObjectModel& obj) {
    Moments m;
    obj.for_each_mass([&](Vec2 p, double w) {
        m.mx2 += w * p.x * p.x;
        m.my2 += w * p.y * p.y;
    });
    if (const auto& r = obj.raster()) {
        const double c = r->cell * r->cell / 12.0;
        double w = 0.0;
        for (double v : r->weights) w += v;
        m.mx2 += w * c;
        m.my2 += w * c;
    }
    return m;
}

/// Collapses a raster into at most `max_cells` x `max_cells` point masses,
/// each placed at its block's weighted centroid. Mass and centroid are
/// preserved exactly; point masses pass through unchanged.
inline std::vector<PointMass> coarsened_masses(const ObjectModel& obj, int max_cells) {
    std::vector<PointMass> out(obj.points().begin(), obj.points().end());
    if (!obj.raster()) return out;
    const Raster& r = *obj.raster();
    const int bx = (r.nx + max_cells - 1) / max_cells;
    const int by = (r.ny + max_cells - 1) / max_cells;
    for (int y0 = 0; y0 < r.ny; y0 += by)
        for (int x0 = 0; x0 < r.nx; x0 += bx) {
            double w = 0.0;
            Vec2 c;
            for (int iy = y0; iy < std::min(y0 + by, r.ny); ++iy)
                for (int ix = x0; ix < std::min(x0 + bx, r.nx); ++ix) {
                    const double wi = r.at(ix, iy);
                    w += wi;
                    c = c + wi * r.center(ix, iy);
                }
            if (w > 0.0) out.push_back({(1.0 / w) * c, w});
        }
    return out;
}

// ---------------------------------------------------------------------------
// Reference "shattering square" scenario.

struct ShatteredSquare {
    double pre_side = 0.5;
    double fragment_side = 0.25;
    /// Fragment centers; defaults to (+-0.3, +-0.3).
    std::vector<Vec2> fragment_centers{{-0.3, -0.3}, {0.3, -0.3}, {-0.3, 0.3}, {0.3, 0.3}};
    int raster_cells = 256;
};

inline ObjectSpec shattered_square_pre(const ShatteredSquare& s = {}) {
    RectanglesSpec r;
    r.rectangles.push_back({{0.0, 0.0}, {s.pre_side, s.pre_side}, std::nullopt});
    return {"square", r, s.raster_cells};
}

inline ObjectSpec shattered_square_post(const ShatteredSquare& s = {}) {
    RectanglesSpec r;
    for (const auto& c : s.fragment_centers)
        r.rectangles.push_back({c, {s.fragment_side, s.fragment_side}, std::nullopt});
    return {"fragments", r, s.raster_cells};
}

}  // namespace subdiff
