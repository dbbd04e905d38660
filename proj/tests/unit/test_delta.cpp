#include "levelflow/delta.hpp"
#include "levelflow/errors.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace levelflow {
namespace {

using testing::make_field;
using testing::rk4;

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no levelflow::Error thrown";
    return ErrorCode::ConfigInvalid;
}

SpeedCurve analytic_curve(const std::function<double(double)>& g, double lo, double hi, double dx,
                          Branch branch = Branch::D)
{
    SpeedCurve c;
    c.branch = branch;
    c.s = s_grid(dx, 0.0, lo, hi);
    for (double s : c.s)
        c.g.push_back(g(s));
    return c;
}

// Piecewise-linear interpolant of a sampled curve, the RK4 oracle's right-hand side.
double interp(const SpeedCurve& c, double s)
{
    if (s <= c.s.front())
        return c.g.front();
    if (s >= c.s.back())
        return c.g.back();
    std::size_t j = std::upper_bound(c.s.begin(), c.s.end(), s) - c.s.begin();
    double w = (s - c.s[j - 1]) / (c.s[j] - c.s[j - 1]);
    return (1 - w) * c.g[j - 1] + w * c.g[j];
}

std::vector<double> time_grid(double horizon, double dt)
{
    std::vector<double> t;
    int n = static_cast<int>(std::llround(horizon / dt));
    for (int m = 0; m <= n; ++m)
        t.push_back(m * dt);
    return t;
}

TEST(TravelTimeTest, ConstantSpeedIsExact)
{
    SpeedCurve c = analytic_curve([](double) { return 0.8; }, 0.0, 0.5, 1e-2);
    TravelTime tt = travel_time(c, +1, 1.0);
    for (std::size_t i = 0; i < tt.sigma.size(); ++i)
        EXPECT_NEAR(tt.T[i], tt.sigma[i] / 0.8, 1e-14);
    EXPECT_FALSE(tt.degenerate);
}

TEST(TravelTimeTest, AffineSpeedLogarithm)
{
    SpeedCurve c = analytic_curve([](double s) { return 2 * s + 1; }, 0.0, 0.3, 1.0 / 512);
    TravelTime tt = travel_time(c, +1, 2.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < tt.sigma.size(); ++i)
        worst = std::max(worst, std::abs(tt.T[i] - std::log(2 * tt.sigma[i] + 1) / 2));
    EXPECT_LT(worst, 1e-4);
}

TEST(TravelTimeTest, SquareRootSpeedConverges)
{
    SpeedCurve c = analytic_curve([](double s) { return s < 0 ? -std::sqrt(-s) : std::sqrt(s); }, -0.25, 0.0,
                                  1.0 / 1024);
    TravelTime tt = travel_time(c, -1, 1.0);
    EXPECT_TRUE(tt.degenerate);
    EXPECT_FALSE(tt.divergent);
    for (std::size_t i = 1; i < tt.sigma.size(); ++i)
        EXPECT_NEAR(tt.T[i], 2 * std::sqrt(tt.sigma[i]), 2e-3 * tt.T[i]) << tt.sigma[i];
    EXPECT_NEAR(tt.tailExponent, 0.5, 0.05);
}

TEST(TravelTimeTest, LinearSpeedDiverges)
{
    SpeedCurve c = analytic_curve([](double s) { return s; }, -0.25, 0.0, 1.0 / 1024);
    TravelTime tt = travel_time(c, -1, 1.0);
    EXPECT_TRUE(tt.degenerate);
    EXPECT_TRUE(tt.divergent);
    EXPECT_TRUE(std::isinf(tt.T.back()));
}

TEST(TravelTimeTest, OpposingSpeedIsASignChange)
{
    SpeedCurve c = analytic_curve([](double) { return -0.5; }, 0.0, 0.3, 1e-2);
    EXPECT_EQ(code_of([&] { travel_time(c, +1, 1.0); }), ErrorCode::SignChange);
}

TEST(SolveDeltaTest, ZeroLawStaysAtZero)
{
    SpeedCurve c = analytic_curve([](double) { return 0.0; }, -0.3, 0.3, 1e-2);
    std::vector<double> t = time_grid(1.0, 0.1);
    for (LevelPosition pos : {LevelPosition::Below, LevelPosition::Above}) {
        LevelSolution s = solve_delta(c, pos, t, 1.0);
        EXPECT_EQ(s.selection, Selection::Regular);
        for (double d : s.delta)
            EXPECT_EQ(d, 0.0);
    }
}

TEST(SolveDeltaTest, AgreesWithRk4AwayFromCritical)
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        double a = testing::uniform(rng, 0.2, 1.0), b = testing::uniform(rng, 0.0, 2.0);
        double c2 = testing::uniform(rng, -0.5, 0.5);
        auto g = [&](double s) { return a + b * s + c2 * s * std::abs(s); };
        SpeedCurve up = analytic_curve(g, 0.0, 1.0, 1.0 / 256);
        std::vector<double> t = time_grid(0.5, 0.05);
        LevelSolution sol = solve_delta(up, LevelPosition::Above, t, 5.0);
        for (std::size_t m = 0; m < t.size(); ++m) {
            double ref = rk4([&](double y) { return interp(up, y); }, 0.0, t[m], 1e-4);
            EXPECT_NEAR(sol.delta[m], ref, 1e-5) << "trial " << trial << " t=" << t[m];
        }
        auto gneg = [&](double s) { return -a + b * s; };
        SpeedCurve down = analytic_curve(gneg, -1.0, 0.0, 1.0 / 256);
        LevelSolution soln = solve_delta(down, LevelPosition::Below, t, 5.0);
        for (std::size_t m = 0; m < t.size(); ++m) {
            double ref = rk4([&](double y) { return interp(down, y); }, 0.0, t[m], 1e-4);
            EXPECT_NEAR(soln.delta[m], ref, 1e-5) << "trial " << trial << " t=" << t[m];
        }
    }
}

TEST(SolveDeltaTest, OneDimensionalExampleAtLevelOne)
{
    const double dx = 1.0 / 512;
    Grid g = Grid::from_box(1, {-3.5, 0}, {5.5, 0}, dx);
    ScalarField u0 = make_field(g, [](double x, double) { return std::min(std::abs(x + 1) + 1, std::abs(x - 2)); });
    DensityField d = lebesgue_density(g);
    VelocitySpec f = affine_clamped(1, -1, 0, 10);
    std::vector<double> t{0.0, 0.05, 0.1, 0.15};
    LevelSolution sd = solve_delta(speed_curve(u0, d, f, 1.0, Branch::D, 0, 0.5), LevelPosition::Above, t, 10);
    LevelSolution se = solve_delta(speed_curve(u0, d, f, 1.0, Branch::E, 0, 0.5), LevelPosition::Above, t, 10);
    for (std::size_t m = 0; m < t.size(); ++m) {
        EXPECT_NEAR(sd.delta[m], (std::exp(2 * t[m]) - 1) / 2, 1e-3);
        EXPECT_NEAR(se.delta[m], (std::exp(4 * t[m]) - 1) / 4, 1e-3);
    }
    EXPECT_NEAR(sd.delta[2], 0.1107014, 1e-3);
    EXPECT_NEAR(se.delta[2], 0.1229561, 1e-3);
}

TEST(SolveDeltaTest, RestartReproducesTheTrajectory)
{
    const double dx = 1.0 / 256;
    Grid g = Grid::from_box(2, {-2.5, -2.5}, {2.5, 2.5}, dx);
    ScalarField u0 = make_field(g, [](double x, double y) { return std::hypot(x, 0.7 * y); });
    DensityField d = gaussian_density(g, 1.0);
    VelocitySpec f = affine_clamped(2, -0.5, 0, 1);
    const double h = 1.2;
    SignedDistanceField sdf = sublevel_signed_distance(u0, h, Closure::Open);
    ParallelMassProfile mass(sdf, d);
    SpeedCurve full = sample_speed_curve(mass, f, h, Branch::D, s_grid(dx, 0.0, 0.0, 0.6));
    std::vector<double> t = time_grid(0.6, 0.05);
    LevelSolution sol = solve_delta(full, LevelPosition::Above, t, f.bound());
    for (std::size_t m1 : {2u, 5u, 8u}) {
        double origin = sol.delta[m1];
        SpeedCurve rest = sample_speed_curve(mass, f, h, Branch::D, s_grid(dx, origin, 0.0, 0.6 - origin), origin);
        std::vector<double> tail;
        for (std::size_t m = m1; m < t.size(); ++m)
            tail.push_back(t[m] - t[m1]);
        LevelSolution r = solve_delta(rest, LevelPosition::Above, tail, f.bound());
        for (std::size_t k = 0; k < tail.size(); ++k)
            EXPECT_NEAR(r.delta[k], sol.delta[m1 + k], 2e-5) << "restart at " << t[m1];
    }
}

struct TableFixture {
    Grid grid;
    ScalarField u0;
    DensityField density;
    VelocitySpec vel;
    double hBar;
};

TableFixture random_fixture(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Grid g = Grid::from_box(2, {-2.5, -2.5}, {2.5, 2.5}, 1.0 / 16);
    ScalarField u = testing::random_smooth_field(g, rng);
    DensityField d = gaussian_density(g, 1.0);
    VelocitySpec f = affine_clamped(2, -1, 0, 1);
    double hBar = find_threshold(u, d, f, 1e-10).hBar;
    return {g, u, d, f, hBar};
}

void check_table_invariants(const DeltaTable& tb)
{
    const std::size_t L = tb.level_count(), T = tb.time_count();
    for (Branch b : {Branch::D, Branch::E}) {
        for (std::size_t k = 0; k < L; ++k) {
            for (std::size_t m = 0; m < T; ++m) {
                double v = tb.at(b, k, m);
                if (m > 0) {
                    EXPECT_LE(std::abs(v - tb.at(b, k, m - 1)), tb.speedBound * (tb.times[m] - tb.times[m - 1]) + 1e-12);
                }
                if (tb.levels[k] > tb.hBar) {
                    EXPECT_GE(v, 0.0);
                    EXPECT_GE(v, m > 0 ? tb.at(b, k, m - 1) : 0.0);
                } else if (tb.levels[k] < tb.hBar) {
                    EXPECT_LE(v, 0.0);
                    EXPECT_LE(v, m > 0 ? tb.at(b, k, m - 1) : 0.0);
                }
                EXPECT_LE(k > 0 ? tb.at(b, k - 1, m) : v, v);
                EXPECT_LE(b == Branch::D ? v : tb.at(Branch::D, k, m), tb.at(Branch::E, k, m) + 1e-12);
            }
        }
    }
}

TEST(DeltaTableTest, ConstantLawMovesEveryLevelUniformly)
{
    Grid g = Grid::from_box(2, {-3, -3}, {3, 3}, 1.0 / 16);
    ScalarField u = make_field(g, [](double x, double y) { return std::hypot(x, y); });
    DeltaTableOptions opt;
    opt.horizon = 1.0;
    std::vector<double> levels{0.5, 0.75, 1.0, 1.25};
    DeltaTable tb = build_delta_table(u, lebesgue_density(g), constant_velocity(0.6), -1.0, levels,
                                      time_grid(1.0, 0.1), opt);
    for (Branch b : {Branch::D, Branch::E})
        for (std::size_t k = 0; k < levels.size(); ++k)
            for (std::size_t m = 0; m < tb.time_count(); ++m)
                EXPECT_NEAR(tb.at(b, k, m), 0.6 * tb.times[m], 1e-12);
    check_table_invariants(tb);
}

TEST(DeltaTableTest, OneDimensionalPiecewiseFormulas)
{
    Grid g = Grid::from_box(1, {-3.5, 0}, {5.5, 0}, 1.0 / 512);
    ScalarField u = make_field(g, [](double x, double) { return std::min(std::abs(x + 1) + 1, std::abs(x - 2)); });
    DensityField d = lebesgue_density(g);
    VelocitySpec f = affine_clamped(1, -1, 0, 10);
    std::vector<double> levels;
    for (int k = 0; k <= 16; ++k)
        levels.push_back(0.75 + k / 32.0);
    DeltaTableOptions opt;
    opt.horizon = 0.15;
    std::vector<double> t{0.0, 0.05, 0.1, 0.15};
    DeltaTable tb = build_delta_table(u, d, f, 0.5, levels, t, opt);
    for (std::size_t k = 0; k < levels.size(); ++k) {
        double h = levels[k];
        for (std::size_t m = 0; m < t.size(); ++m) {
            double upper = (std::exp(4 * t[m]) - 1) * (h - 0.75), lower = (std::exp(2 * t[m]) - 1) * (h - 0.5);
            // At h = 1 the closed set already carries the isolated point, so E switches there and D after.
            double eExpect = h >= 1.0 ? upper : lower, dExpect = h > 1.0 ? upper : lower;
            EXPECT_NEAR(tb.at(Branch::E, k, m), eExpect, 5e-3) << "h=" << h << " t=" << t[m];
            EXPECT_NEAR(tb.at(Branch::D, k, m), dExpect, 5e-3) << "h=" << h << " t=" << t[m];
        }
    }
    check_table_invariants(tb);
}

TEST(DeltaTableTest, RandomFieldsMatchPerLevelRk4)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        TableFixture fx = random_fixture(seed);
        std::vector<double> levels;
        for (int k = 0; k < 8; ++k) {
            double h = 0.3 + 0.1 * k;
            if (std::abs(h - fx.hBar) > 0.05)
                levels.push_back(h);
        }
        std::map<std::pair<std::size_t, int>, SignedDistanceField> sdfs;
        DeltaTableOptions opt;
        opt.horizon = 0.3;
        std::vector<double> t = time_grid(0.3, 0.05);
        DeltaTable tb = build_delta_table(fx.u0, fx.density, fx.vel, fx.hBar, levels, t, opt,
                                          [&](std::size_t k, Branch b, const SignedDistanceField& sdf) {
                                              sdfs[{k, b == Branch::D ? 0 : 1}] = sdf;
                                          });
        check_table_invariants(tb);
        for (std::size_t k = 0; k < levels.size(); ++k) {
            for (int bi = 0; bi < 2; ++bi) {
                ParallelMassProfile mass(sdfs.at({k, bi}), fx.density);
                auto g = [&](double s) { return fx.vel(levels[k], mass.mass(s)); };
                for (std::size_t m = 0; m < t.size(); ++m) {
                    double ref = rk4(g, 0.0, t[m], 1e-4);
                    EXPECT_NEAR(tb.at(bi == 0 ? Branch::D : Branch::E, k, m), ref, 1e-3)
                        << "seed " << seed << " h=" << levels[k] << " t=" << t[m];
                }
            }
        }
    }
}

TEST(DeltaTableTest, OverflowWithoutTruncation)
{
    Grid g = Grid::from_box(2, {-1.5, -1.5}, {1.5, 1.5}, 1.0 / 16);
    ScalarField u = make_field(g, [](double x, double y) { return std::hypot(x, y); });
    DeltaTableOptions opt;
    opt.horizon = 2.0;
    std::vector<double> levels{0.5, 1.0};
    EXPECT_EQ(code_of([&] {
                  build_delta_table(u, lebesgue_density(g), constant_velocity(1.0), -1.0, levels,
                                    time_grid(2.0, 0.1), opt);
              }),
              ErrorCode::DomainOverflow);
    opt.allowTruncation = true;
    DeltaTable tb =
        build_delta_table(u, lebesgue_density(g), constant_velocity(1.0), -1.0, levels, time_grid(2.0, 0.1), opt);
    EXPECT_TRUE(tb.any_truncated());
    EXPECT_THROW(tb.at_time(Branch::D, 0, 2.5), Error);
}

TEST(DeltaTableTest, CsvHeader)
{
    Grid g = Grid::from_box(2, {-3, -3}, {3, 3}, 1.0 / 8);
    ScalarField u = make_field(g, [](double x, double y) { return std::hypot(x, y); });
    DeltaTableOptions opt;
    opt.horizon = 0.2;
    DeltaTable tb =
        build_delta_table(u, lebesgue_density(g), constant_velocity(0.5), -1.0, {1.0}, time_grid(0.2, 0.1), opt);
    std::ostringstream os;
    write_delta_csv(os, tb);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "branch,h,t,delta,selection,repair");
    int rows = 0;
    for (std::string line; std::getline(is, line);)
        ++rows;
    EXPECT_EQ(rows, 2 * 3);
}

} // namespace
} // namespace levelflow
