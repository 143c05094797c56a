#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "subdiff/channels.hpp"
#include "subdiff/scene.hpp"

using namespace subdiff;

namespace {

ObjectSpec points(std::vector<PointMass> p) { return {"pts", PointsSpec{std::move(p)}, 256}; }

double total(const ObjectModel& o) { return o.total_weight(); }

}  // namespace

TEST(Scene, PointMassesAreNormalizedAndCentered) {
    const auto obj = build_object(points({{{0.1, 0.2}, 2.0}, {{-0.3, 0.0}, 1.0}, {{0.0, -0.1}, 1.0}}));
    EXPECT_NEAR(total(obj), 1.0, 1e-15);
    const Vec2 c = obj.centroid();
    EXPECT_LE(std::abs(c.x), 1e-12);
    EXPECT_LE(std::abs(c.y), 1e-12);
    EXPECT_NEAR(obj.points()[0].weight, 0.5, 1e-15);
}

TEST(Scene, ZeroWeightPointsAreDropped) {
    const auto obj = build_object(points({{{0.1, 0.0}, 1.0}, {{-0.1, 0.0}, 1.0}, {{0.4, 0.4}, 0.0}}));
    EXPECT_EQ(obj.points().size(), 2u);
}

TEST(Scene, RejectsEmptyNegativeAndAllZero) {
    EXPECT_THROW(build_object(points({})), InvalidInput);
    EXPECT_THROW(build_object(points({{{0, 0}, -1.0}, {{0.1, 0}, 2.0}})), InvalidInput);
    EXPECT_THROW(build_object(points({{{0, 0}, 0.0}})), InvalidInput);
}

TEST(Scene, RejectsSupportBeyondUnitExtent) {
    // Centroid at 0; second point at 0.6 is outside [-1/2, 1/2].
    EXPECT_THROW(build_object(points({{{-0.6, 0.0}, 1.0}, {{0.6, 0.0}, 1.0}})), InvalidInput);
    EXPECT_NO_THROW(build_object(points({{{-0.5, 0.0}, 1.0}, {{0.5, 0.0}, 1.0}})));
}

TEST(Scene, UnitSquareRasterMatchesDirectSummation) {
    Rectangle r{{0, 0}, {1, 1}, std::nullopt};
    ObjectSpec spec{"square", RectanglesSpec{{r}}, 64};
    const auto obj = build_object(spec);
    ASSERT_TRUE(obj.has_raster());
    const Raster& ras = *obj.raster();
    double w = 0, cx = 0, cy = 0, mx = 0;
    for (int iy = 0; iy < ras.ny; ++iy)
        for (int ix = 0; ix < ras.nx; ++ix) {
            const double v = ras.weights[static_cast<std::size_t>(iy) * ras.nx + ix];
            const double x = ras.origin.x + (ix + 0.5) * ras.cell, y = ras.origin.y + (iy + 0.5) * ras.cell;
            w += v;
            cx += v * x;
            cy += v * y;
            mx += v * x * x;
        }
    EXPECT_NEAR(w, 1.0, 1e-13);
    EXPECT_LE(std::abs(cx), 1e-12);
    EXPECT_LE(std::abs(cy), 1e-12);
    // Cell midpoints give 1/12 - h^2/12; uniform cells restore the exact 1/12.
    const double h = 1.0 / 64;
    EXPECT_NEAR(mx, 1.0 / 12 - h * h / 12, 1e-12);
    EXPECT_NEAR(moments(obj).mx2, 1.0 / 12, 1e-15);
}

TEST(Scene, ShatteredSquareMoments) {
    const auto pre = build_object(shattered_square_pre());
    const auto post = build_object(shattered_square_post());
    EXPECT_NEAR(moments(pre).mx2, 0.25 / 12, 1e-15);
    EXPECT_NEAR(moments(pre).my2, moments(pre).mx2, 1e-15);
    // Fragment edges are not cell-aligned: partial cells sit at cell centers.
    EXPECT_NEAR(moments(post).mx2, 0.09 + 0.0625 / 12, 1e-5);
}

TEST(Scene, RectangleOutsideUnitExtentIsRejected) {
    ObjectSpec spec{"wide", RectanglesSpec{{Rectangle{{0, 0}, {1.2, 0.2}, std::nullopt}}}, 64};
    EXPECT_THROW(build_object(spec), InvalidInput);
}

TEST(Scene, ExplicitRectangleWeightsShiftTheCentroid) {
    // Two equal-area squares, the right one three times brighter.
    ObjectSpec spec{"pair",
                    RectanglesSpec{{Rectangle{{-0.2, 0}, {0.1, 0.1}, 1.0}, Rectangle{{0.2, 0}, {0.1, 0.1}, 3.0}}}, 128};
    const auto obj = build_object(spec);
    EXPECT_LE(std::abs(obj.centroid().x), 1e-12);
    // Separation 0.4 split 3:1 puts the masses at -0.3 and +0.1.
    EXPECT_NEAR(moments(obj).mx2, 0.25 * 0.09 + 0.75 * 0.01 + 0.01 / 12, 2e-4);
}

TEST(Scene, TriangleIsRecenteredOnItsCentroid) {
    ObjectSpec spec{"tri", PolygonSpec{{{0.0, 0.0}, {0.6, 0.0}, {0.0, 0.6}}}, 128};
    const auto obj = build_object(spec);
    EXPECT_NEAR(obj.total_weight(), 1.0, 1e-13);
    EXPECT_LE(std::abs(obj.centroid().x), 1e-12);
    EXPECT_LE(std::abs(obj.centroid().y), 1e-12);
    // Right triangle with legs a: Var(x) = a^2 / 18.
    EXPECT_NEAR(moments(obj).mx2, 0.36 / 18, 2e-4);
}

TEST(Scene, MalformedRasterIsRejected) {
    Raster r{{-0.5, -0.5}, 0.5, 2, 2, {1, 1, 1}};
    EXPECT_THROW(build_object({"bad", RasterSpec{r}, 256}), InvalidInput);
}

TEST(Scene, CoarseningPreservesMassAndCentroid) {
    const auto obj = build_object(shattered_square_post());
    const auto c = coarsened_masses(obj, 16);
    EXPECT_LE(c.size(), 256u);
    double w = 0, x = 0, y = 0;
    for (const auto& p : c) {
        w += p.weight;
        x += p.weight * p.position.x;
        y += p.weight * p.position.y;
    }
    EXPECT_NEAR(w, 1.0, 1e-12);
    EXPECT_LE(std::abs(x), 1e-12);
    EXPECT_LE(std::abs(y), 1e-12);
}

TEST(Scene, TranslatedObjectIsRejectedByScenarioAssembly) {
    const auto obj = build_object(points({{{0.1, 0}, 1}, {{-0.1, 0}, 1}}));
    EXPECT_THROW(make_scenario(obj.translated({0.01, 0}), obj, 0.1, 500, Psf::gaussian()), InvalidInput);
    EXPECT_THROW(make_scenario(obj, obj.translated({0, 1e-9}), 0.1, 500, Psf::gaussian()), InvalidInput);
    EXPECT_NO_THROW(make_scenario(obj, obj.translated({0, 0}), 0.1, 500, Psf::gaussian()));
}

// Property: for random point clouds, construction yields unit mass, zero
// centroid, and second moments equal to the weighted variance of the input.
TEST(SceneProperty, RandomPointCloudsRegisterExactly) {
    oracle::Gen gen(11);
    for (int trial = 0; trial < 200; ++trial) {
        auto pts = gen.points(gen.integer(1, 12), 0.2);
        const auto obj = build_object(points(pts));
        double tw = 0, mx = 0, my = 0;
        for (const auto& p : pts) {
            tw += p.weight;
            mx += p.weight * p.position.x;
            my += p.weight * p.position.y;
        }
        mx /= tw;
        my /= tw;
        double vx = 0;
        for (const auto& p : pts) vx += p.weight / tw * (p.position.x - mx) * (p.position.x - mx);
        EXPECT_NEAR(obj.total_weight(), 1.0, 1e-13);
        EXPECT_LE(std::abs(obj.centroid().x), 1e-12);
        EXPECT_LE(std::abs(obj.centroid().y), 1e-12);
        EXPECT_NEAR(moments(obj).mx2, vx, 1e-13);
    }
}

// Property: scaling all weights leaves the model unchanged.
TEST(SceneProperty, WeightScaleInvariance) {
    oracle::Gen gen(12);
    for (int trial = 0; trial < 100; ++trial) {
        auto pts = gen.points(gen.integer(2, 8), 0.2);
        auto scaled = pts;
        const double k = gen.uniform(0.01, 100.0);
        for (auto& p : scaled) p.weight *= k;
        const auto a = build_object(points(pts)), b = build_object(points(scaled));
        ASSERT_EQ(a.points().size(), b.points().size());
        for (std::size_t i = 0; i < a.points().size(); ++i) {
            EXPECT_NEAR(a.points()[i].weight, b.points()[i].weight, 1e-14);
            EXPECT_NEAR(a.points()[i].position.x, b.points()[i].position.x, 1e-14);
        }
    }
}
