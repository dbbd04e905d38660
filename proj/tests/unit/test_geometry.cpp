#include "levelflow/analysis.hpp"
#include "levelflow/errors.hpp"
#include "levelflow/geometry.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace levelflow {
namespace {

using testing::brute_dilation;
using testing::brute_signed_distance;
using testing::make_field;
using testing::random_blob;

constexpr double kPi = std::numbers::pi;

Grid square_grid(double half, double dx) { return Grid::from_box(2, {-half, -half}, {half, half}, dx); }

BinarySet indicator(const Grid& g, const std::function<bool(double, double)>& in)
{
    BinarySet s(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto p = g.point(i);
        s.member[i] = in(p[0], p[1]) ? 1 : 0;
    }
    return s;
}

TEST(GridTest, RejectsDegenerateCounts)
{
    EXPECT_THROW(Grid(1, {0.0, 0.0}, 0.1, {1, 1}), Error);
    EXPECT_THROW(Grid(2, {0.0, 0.0}, -0.1, {4, 4}), Error);
    Grid g = Grid::from_box(2, {-1, -1}, {1, 1}, 0.5);
    EXPECT_EQ(g.nx(), 5);
    EXPECT_EQ(g.ny(), 5);
    EXPECT_DOUBLE_EQ(g.upper()[0], 1.0);
}

TEST(SignedDistanceTest, HalfLineIn1D)
{
    Grid g = Grid::from_box(1, {-2, 0}, {2, 0}, 1.0 / 16);
    BinarySet s = indicator(g, [](double x, double) { return x <= 0.0; });
    SignedDistanceField sdf = signed_distance(s);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.x(g.ix(i));
        // Centre-to-centre distances sit half a cell off the continuum boundary.
        double expected = x <= 0.0 ? x - g.dx() : x;
        EXPECT_NEAR(sdf.values[i], expected, 1e-12) << "x=" << x;
    }
}

TEST(SignedDistanceTest, DiskWithinOneDiagonal)
{
    Grid g = square_grid(1.0, 1.0 / 32);
    const double r = 0.6;
    BinarySet s = indicator(g, [&](double x, double y) { return std::hypot(x, y) <= r; });
    SignedDistanceField sdf = signed_distance(s);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto p = g.point(i);
        EXPECT_NEAR(sdf.values[i], std::hypot(p[0], p[1]) - r, g.dx() * std::sqrt(2.0));
    }
}

TEST(SignedDistanceTest, MatchesBruteForceOnRandomBlobs)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        int n = 8 + static_cast<int>(rng() % 25); // up to 32 x 32
        Grid g(2, {0.0, 0.0}, 1.0 / n, {n, n});
        BinarySet s = random_blob(g, rng);
        if (s.empty() || s.full())
            continue;
        SignedDistanceField sdf = signed_distance(s);
        std::vector<double> ref = brute_signed_distance(s);
        for (std::size_t i = 0; i < g.size(); ++i)
            ASSERT_NEAR(sdf.values[i], ref[i], 1e-12) << "seed " << seed << " cell " << i;
    }
}

TEST(SignedDistanceTest, EmptyAndFullSetsAreFlagged)
{
    Grid g = square_grid(1.0, 0.25);
    SignedDistanceField e = signed_distance(BinarySet(g, false));
    SignedDistanceField f = signed_distance(BinarySet(g, true));
    EXPECT_EQ(e.flag, SetFlag::Empty);
    EXPECT_EQ(f.flag, SetFlag::Full);
    EXPECT_TRUE(std::isinf(e.values[0]) && e.values[0] > 0);
    EXPECT_TRUE(std::isinf(f.values[0]) && f.values[0] < 0);
}

TEST(SignedDistanceTest, TranslationEquivariance)
{
    Grid g(2, {0.0, 0.0}, 1.0 / 24, {24, 24});
    BinarySet a = indicator(g, [](double x, double y) { return std::hypot(x - 0.4, y - 0.45) < 0.2; });
    BinarySet b(g);
    const int shift = 3;
    for (int j = 0; j < g.ny(); ++j)
        for (int i = shift; i < g.nx(); ++i)
            b.member[g.index(i, j)] = a.member[g.index(i - shift, j)];
    SignedDistanceField sa = signed_distance(a), sb = signed_distance(b);
    for (int j = 0; j < g.ny(); ++j)
        for (int i = shift; i + shift < g.nx(); ++i)
            EXPECT_NEAR(sb.values[g.index(i, j)], sa.values[g.index(i - shift, j)], 1e-12);
}

TEST(ParallelSetTest, ZeroRadiusOpenIsTheSetItself)
{
    std::mt19937_64 rng(4);
    Grid g(2, {0.0, 0.0}, 1.0 / 32, {32, 32});
    BinarySet s = random_blob(g, rng);
    BinarySet p = parallel_set(signed_distance(s), 0.0, Closure::Open);
    EXPECT_EQ(p.member, s.member);
}

TEST(ParallelSetTest, DilationMatchesBruteForce)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        Grid g(2, {0.0, 0.0}, 1.0 / 24, {24, 24});
        BinarySet s = random_blob(g, rng, 2);
        if (s.empty() || s.full())
            continue;
        const double r = 3.0 * g.dx();
        BinarySet p = parallel_set(signed_distance(s), r, Closure::Closed);
        EXPECT_EQ(p.member, brute_dilation(s, r).member) << "seed " << seed;
    }
}

TEST(ParallelSetTest, NestingAndClosureOrdering)
{
    std::mt19937_64 rng(9);
    Grid g(2, {0.0, 0.0}, 1.0 / 32, {32, 32});
    SignedDistanceField sdf = signed_distance(random_blob(g, rng));
    double prev = -0.3;
    BinarySet prevSet = parallel_set(sdf, prev, Closure::Open);
    for (double s = -0.25; s <= 0.3; s += 0.05) {
        BinarySet open = parallel_set(sdf, s, Closure::Open);
        BinarySet closed = parallel_set(sdf, s, Closure::Closed);
        for (std::size_t i = 0; i < g.size(); ++i) {
            EXPECT_LE(prevSet.member[i], open.member[i]);
            EXPECT_LE(open.member[i], closed.member[i]);
        }
        prevSet = open;
    }
}

TEST(ParallelSetTest, DiskGrowsByTheRadius)
{
    const double dx = 1.0 / 64, r = 0.5, a = 0.25;
    Grid g = square_grid(1.2, dx);
    BinarySet disk = indicator(g, [&](double x, double y) { return std::hypot(x, y) <= r; });
    BinarySet grown = parallel_set(signed_distance(disk), a, Closure::Closed);
    BinarySet exact = indicator(g, [&](double x, double y) { return std::hypot(x, y) <= r + a; });
    std::size_t diff = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        diff += grown.member[i] != exact.member[i];
    EXPECT_LE(diff * g.cell_volume(), 4.0 * dx * 2.0 * kPi * (r + a));
}

TEST(PerimeterTest, SquareAndDisk)
{
    const double L = 1.0, h = L / 64;
    Grid g = square_grid(1.0, h);
    // Shifted by half a cell so that exactly 64 x 64 centres are members.
    BinarySet sq = indicator(g, [&](double x, double y) { return std::abs(x - h / 2) < L / 2 && std::abs(y - h / 2) < L / 2; });
    EXPECT_NEAR(perimeter(sq).value, 4.0 * L, 0.02 * 4.0 * L);
    const double r = 0.5;
    Grid gd = square_grid(1.0, r / 64);
    BinarySet disk = indicator(gd, [&](double x, double y) { return std::hypot(x, y) <= r; });
    EXPECT_NEAR(perimeter(disk).value, 2.0 * kPi * r, 0.02 * 2.0 * kPi * r);
}

TEST(PerimeterTest, OneDimensionalCountsBoundaryPoints)
{
    Grid g = Grid::from_box(1, {-3, 0}, {3, 0}, 0.01);
    BinarySet s = indicator(g, [](double x, double) { return (x > -2 && x < -1) || (x > 0.5 && x < 2); });
    EXPECT_DOUBLE_EQ(perimeter(s).value, 4.0);
}

TEST(PerimeterTest, EmptySetWarns)
{
    Grid g = square_grid(1.0, 0.1);
    PerimeterResult r = perimeter(BinarySet(g));
    EXPECT_TRUE(r.emptyWarning);
    EXPECT_EQ(r.value, 0.0);
}

TEST(PerimeterTest, FractalSetAgainstBoundaryCellCount)
{
    const int depth = 2;
    std::array<double, 2> lo, hi;
    kruskal_box(0.05, lo, hi);
    // Smallest balls span four cells in radius.
    Grid g = Grid::from_box(2, lo, hi, std::ldexp(1.0, -2 * depth) / 32);
    BinarySet s = build_kruskal_set(depth, g);
    // Crofton-style estimate: member/non-member edges times dx times pi/4.
    std::size_t edges = 0;
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            std::size_t c = g.index(i, j);
            if (i + 1 < g.nx() && s.member[c] != s.member[c + 1])
                ++edges;
            if (j + 1 < g.ny() && s.member[c] != s.member[g.index(i, j + 1)])
                ++edges;
        }
    double crofton = edges * g.dx() * kPi / 4.0;
    double p = perimeter(s).value;
    EXPECT_GT(p, crofton / 1.5);
    EXPECT_LT(p, crofton * 1.5);
}

TEST(SteinerTest, DiskCoefficients)
{
    Grid g = square_grid(1.8, 2.0 / 64);
    BinarySet disk = indicator(g, [](double x, double y) { return std::hypot(x, y) <= 1.0; });
    std::vector<double> s;
    for (int i = 0; i <= 10; ++i)
        s.push_back(0.05 * i);
    SteinerFit f = steiner_check(disk, s);
    EXPECT_NEAR(f.phi0, kPi, 0.03 * kPi);
    EXPECT_NEAR(f.phi1, 2 * kPi, 0.03 * 2 * kPi);
    EXPECT_NEAR(f.phi2, kPi, 0.03 * kPi);
}

TEST(SteinerTest, SquareCoefficients)
{
    const double h = 1.0 / 64;
    Grid g = square_grid(1.0, h);
    BinarySet sq = indicator(g, [&](double x, double y) { return std::abs(x - h / 2) < 0.5 && std::abs(y - h / 2) < 0.5; });
    std::vector<double> s;
    for (int i = 0; i <= 10; ++i)
        s.push_back(0.025 * i);
    SteinerFit f = steiner_check(sq, s);
    EXPECT_NEAR(f.phi0, 1.0, 0.03);
    EXPECT_NEAR(f.phi1, 4.0, 0.03 * 4);
    EXPECT_NEAR(f.phi2, kPi, 0.03 * kPi);
}

TEST(SteinerTest, RandomConvexHullIsQuadratic)
{
    std::mt19937_64 rng(21);
    Grid g = square_grid(1.5, 1.0 / 128);
    std::vector<std::array<double, 2>> pts(8);
    for (auto& p : pts)
        p = {testing::uniform(rng, -0.7, 0.7), testing::uniform(rng, -0.7, 0.7)};
    // Point-in-hull via the half-planes of the hull edges (gift wrapping).
    std::vector<std::array<double, 2>> hull;
    std::size_t start = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i][0] < pts[start][0])
            start = i;
    std::size_t cur = start;
    do {
        hull.push_back(pts[cur]);
        std::size_t next = (cur + 1) % pts.size();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double cross = (pts[next][0] - pts[cur][0]) * (pts[i][1] - pts[cur][1]) -
                           (pts[next][1] - pts[cur][1]) * (pts[i][0] - pts[cur][0]);
            if (cross < 0)
                next = i;
        }
        cur = next;
    } while (cur != start);
    BinarySet set = indicator(g, [&](double x, double y) {
        for (std::size_t k = 0; k < hull.size(); ++k) {
            auto a = hull[k], b = hull[(k + 1) % hull.size()];
            if ((b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) < 0)
                return false;
        }
        return true;
    });
    std::vector<double> s;
    for (int i = 0; i <= 8; ++i)
        s.push_back(0.02 * i);
    SteinerFit f = steiner_check(set, s);
    EXPECT_LT(f.relResidual, 0.01);
    EXPECT_NEAR(f.phi0, f.directArea, 0.01 * f.directArea);
}

TEST(SteinerTest, RejectsNonConvexInput)
{
    Grid g = square_grid(1.5, 1.0 / 32);
    BinarySet l = indicator(g, [](double x, double y) {
        return (x > -1 && x < 1 && y > -1 && y < -0.6) || (x > -1 && x < -0.6 && y > -1 && y < 1);
    });
    std::vector<double> s{0.0, 0.05, 0.1, 0.15};
    try {
        steiner_check(l, s);
        FAIL() << "expected NonConvexInput";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonConvexInput);
    }
}

TEST(SublevelSetsTest, BallIsNestedPair)
{
    Grid g = square_grid(2.0, 1.0 / 32);
    ScalarField u = make_field(g, [](double x, double y) { return std::hypot(x, y); });
    SublevelPair p = sublevel_sets(u, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_LE(p.strict.member[i], p.closed.member[i]);
        EXPECT_EQ(p.closed.member[i] != 0, u[i] <= 1.0);
    }
}

TEST(SublevelSetsTest, IntervalAndIsolatedPoint)
{
    Grid g = Grid::from_box(1, {-3.5, 0}, {5.5, 0}, 1.0 / 64);
    ScalarField u = make_field(g, [](double x, double) { return std::min(std::abs(x + 1) + 1, std::abs(x - 2)); });
    SublevelPair p = sublevel_sets(u, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.x(static_cast<int>(i));
        EXPECT_EQ(p.strict.member[i] != 0, x > 1.0 && x < 3.0) << x;
        EXPECT_EQ(p.closed.member[i] != 0, x == -1.0 || (x >= 1.0 && x <= 3.0)) << x;
    }
}

TEST(SublevelSetsTest, MatchesDirectThresholdOnRandomField)
{
    std::mt19937_64 rng(3);
    Grid g = square_grid(2.0, 1.0 / 16);
    ScalarField u = testing::random_smooth_field(g, rng);
    for (double h : {0.3, 0.7, 1.1}) {
        SublevelPair p = sublevel_sets(u, h);
        for (std::size_t i = 0; i < g.size(); ++i) {
            EXPECT_EQ(p.strict.member[i] != 0, u[i] < h);
            EXPECT_EQ(p.closed.member[i] != 0, u[i] <= h);
        }
    }
}

TEST(SublevelSetsTest, FrameContactIsACoercivityViolation)
{
    Grid g = square_grid(1.0, 0.1);
    ScalarField u = make_field(g, [](double x, double y) { return std::hypot(x, y); });
    try {
        sublevel_sets(u, 1.05);
        FAIL() << "expected CoercivityViolation";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CoercivityViolation);
    }
}

TEST(SublevelDistanceTest, SignFollowsExactMembership)
{
    Grid g = square_grid(2.0, 1.0 / 16);
    ScalarField u = make_field(g, [](double x, double y) { return std::hypot(x, y); });
    for (Closure c : {Closure::Open, Closure::Closed}) {
        SignedDistanceField sdf = sublevel_signed_distance(u, 1.0, c);
        for (std::size_t i = 0; i < g.size(); ++i) {
            bool member = c == Closure::Open ? u[i] < 1.0 : u[i] <= 1.0;
            // Nodes exactly on the level line carry distance 0 on either side.
            if (member)
                EXPECT_LE(sdf.values[i], 0.0);
            else
                EXPECT_GE(sdf.values[i], 0.0);
            EXPECT_NEAR(sdf.values[i], u[i] - 1.0, 0.02);
        }
    }
}

} // namespace
} // namespace levelflow
