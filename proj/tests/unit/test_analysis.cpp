#include "levelflow/analysis.hpp"
#include "levelflow/config.hpp"
#include "levelflow/errors.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace levelflow {
namespace {

using testing::make_field;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

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

// 1D fixture: u0 = |x| with Lebesgue measure, so mu(D_h(s)) = 2(h + s) and the
// threshold mass 1 sits at h = 1/2. The law decides the shape of g near 0.
struct CriticalFixture {
    Grid grid = Grid::from_box(1, {-2, 0}, {2, 0}, 1.0 / 1024);
    ScalarField u0 = make_field(grid, [](double x, double) { return std::abs(x); });
    DensityField density = lebesgue_density(grid);
};

// Lipschitz in q: g(-s) = -2s near the threshold.
VelocitySpec lipschitz_law() { return affine_clamped(1, -1, 0, 4); }

// g(-s) = f(1 - 2s) = -sqrt(s): square-root degeneracy below the threshold mass.
VelocitySpec sqrt_law()
{
    return VelocitySpec(
        [](double, double q) { return q < 1.0 ? -std::sqrt((1.0 - q) / 2.0) : std::sqrt((q - 1.0) / 2.0); }, 2.0,
        VelocityFamily::Separable, "signed square root of the mass excess");
}

std::vector<double> times(double horizon, double dt)
{
    return uniform_times(horizon, dt);
}

TEST(FitPowerTest, ExactPowerLaw)
{
    std::vector<double> x, y;
    for (int i = 1; i <= 20; ++i) {
        x.push_back(0.01 * i);
        y.push_back(3.0 * std::pow(0.01 * i, 0.7));
    }
    x.push_back(0.0);
    y.push_back(1.0); // ignored: x <= 0
    PowerFit f = fit_power(x, y);
    EXPECT_NEAR(f.exponent, 0.7, 1e-12);
    EXPECT_NEAR(f.constant, 3.0, 1e-12);
    EXPECT_LT(f.rms, 1e-12);
    EXPECT_EQ(f.samples, 20);
}

TEST(OracleTest, PartialFatteningValues)
{
    DeltaPair z = oracle_partial_fattening(0.0, 1.0);
    EXPECT_EQ(z.dD, 0.0);
    EXPECT_EQ(z.dE, 0.0);
    DeltaPair p = oracle_partial_fattening(0.1, 1.0);
    EXPECT_NEAR(p.dD, 0.1107014, 5e-8);
    EXPECT_NEAR(p.dE, 0.1229562, 5e-8);
    EXPECT_EQ(code_of([] { oracle_partial_fattening(0.1, 2.5); }), ErrorCode::OutOfValidityWindow);
    EXPECT_EQ(code_of([] { oracle_partial_fattening(-0.1, 1.0); }), ErrorCode::OutOfValidityWindow);
}

TEST(OracleTest, RadialDecayResidual)
{
    for (double t = 0.0; t <= 6.0; t += 0.25) {
        double res = 1.0;
        double r = oracle_radial_decay(2.0, t, &res);
        EXPECT_LE(res, 1e-10) << t;
        EXPECT_LE(std::abs(r - 1.0), std::exp((2.0 - t) / 2.0) + 1e-12) << t;
        EXPECT_NEAR(std::exp(r) * (r - 1) * (r - 1), std::exp(2.0 - t), 1e-9 * std::exp(2.0));
    }
    for (double r0 : {0.0, 0.4, 1.0, 1.7, 3.0}) {
        double prev = oracle_radial_decay(r0, 0.0);
        EXPECT_NEAR(prev, r0, 1e-12);
        for (double t = 0.5; t <= 4.0; t += 0.5) {
            double r = oracle_radial_decay(r0, t);
            EXPECT_LE(std::abs(r - 1.0), std::abs(prev - 1.0) + 1e-12);
            prev = r;
        }
    }
    EXPECT_EQ(code_of([] { oracle_radial_decay(-1.0, 0.5); }), ErrorCode::OutOfValidityWindow);
}

TEST(FatteningTest, StrictlyMonotoneRadialDataDoesNotFatten)
{
    Grid g = Grid::from_box(2, {-2.5, -2.5}, {2.5, 2.5}, 1.0 / 32);
    ScalarField u0 = make_field(g, [](double x, double y) { return std::hypot(x, 0.8 * y); });
    DensityField d = gaussian_density(g, 1.0);
    RepresentationOptions o;
    o.levels = make_levels(0.1, 1.6, 24, kNaN, {});
    o.times = times(0.3, 0.05);
    o.snapshots = {0.3};
    o.horizon = 0.3;
    o.allowTruncation = true;
    RepresentationResult r = run_representation(u0, d, affine_clamped(2, -0.5, 0, 1), o);
    FatteningReport f = fattening_report(r.table, r.cache, d);
    EXPECT_EQ(f.fatteningLevels, 0u);
    for (const auto& l : f.levels) {
        EXPECT_EQ(l.regularity, InitialRegularity::ClosureMatches) << l.h;
        EXPECT_LE(l.maxGap, 1e-3) << l.h;
    }
}

TEST(FatteningTest, OneDimensionalIsolatedPoint)
{
    Grid g = Grid::from_box(1, {-3.5, 0}, {5.5, 0}, 1.0 / 512);
    ScalarField u0 = make_field(g, [](double x, double) { return std::min(std::abs(x + 1) + 1, std::abs(x - 2)); });
    DensityField d = lebesgue_density(g);
    RepresentationOptions o;
    o.levels = make_levels(0, 2, 32, kNaN, {1.0});
    o.times = times(0.15, 0.05);
    o.snapshots = {0.1};
    o.horizon = 0.15;
    o.allowTruncation = true;
    RepresentationResult r = run_representation(u0, d, affine_clamped(1, -1, 0, 10), o);
    FatteningReport f = fattening_report(r.table, r.cache, d);
    auto it = std::find_if(f.levels.begin(), f.levels.end(), [](const LevelFattening& l) { return l.h == 1.0; });
    ASSERT_NE(it, f.levels.end());
    EXPECT_EQ(it->regularity, InitialRegularity::StrictInclusion);
    EXPECT_TRUE(it->fattens);
    std::size_t m = std::find(f.times.begin(), f.times.end(), 0.1) - f.times.begin();
    ASSERT_LT(m, f.times.size());
    EXPECT_NEAR(it->gap[m], 0.0122547, 1e-3);
    for (std::size_t j = 1; j < it->gap.size(); ++j)
        EXPECT_GE(it->gap[j], it->gap[j - 1] - 1e-9);
}

TEST(FatteningTest, PlanarAnalogueFattensAtBothComponents)
{
    const double dx = 1.0 / 64;
    Grid g = Grid::from_box(2, {-3, -2}, {3, 2}, dx);
    const std::array<double, 2> p{-1.5, 0.0}, q{1.0, 0.0};
    ScalarField u0 = make_field(g, [&](double x, double y) {
        return std::min(std::hypot(x - p[0], y - p[1]) + 1.0, std::hypot(x - q[0], y - q[1]));
    });
    DensityField d = lebesgue_density(g);
    RepresentationOptions o;
    o.levels = make_levels(0.2, 1.4, 24, kNaN, {1.0});
    o.times = times(0.1, 0.025);
    o.snapshots = {0.1};
    o.horizon = 0.1;
    o.allowTruncation = true;
    RepresentationResult r = run_representation(u0, d, affine_clamped(1, -2, 0, 30), o);
    ASSERT_LT(r.threshold.hBar, 1.0);
    const SolutionSnapshot& snap = r.snapshots.front();
    double massP = 0.0, massQ = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(snap.uE[i] <= 1.0 && snap.uD[i] >= 1.0))
            continue;
        auto x = g.point(i);
        (std::hypot(x[0] - p[0], x[1] - p[1]) < 0.5 ? massP : massQ) += d.weight[i];
    }
    EXPECT_GT(massP, 10 * dx * dx);
    EXPECT_GT(massQ, 10 * dx * dx);
}

TEST(CriticalTest, LipschitzLawIsPinned)
{
    CriticalFixture fx;
    VelocitySpec f = lipschitz_law();
    double hBar = find_threshold(fx.u0, fx.density, f, 1e-12).hBar;
    ASSERT_NEAR(hBar, 0.5, 1e-6);
    CriticalClassification c = classify_critical(fx.u0, fx.density, f, hBar);
    EXPECT_EQ(c.sideD.regime, CriticalRegime::PinnedAtZero) << c.sideD.reason;
    EXPECT_EQ(c.sideE.regime, CriticalRegime::PinnedAtZero) << c.sideE.reason;
    EXPECT_NEAR(c.sideD.fit.exponent, 1.0, 0.05);
    DeltaTableOptions opt;
    opt.horizon = 0.5;
    DeltaTable tb = build_delta_table(fx.u0, fx.density, f, hBar, {0.3, hBar, 0.7}, times(0.5, 0.05), opt);
    for (std::size_t m = 0; m < tb.time_count(); ++m) {
        EXPECT_LE(std::abs(tb.at(Branch::D, 1, m)), 1e-12);
        EXPECT_LE(std::abs(tb.at(Branch::E, 1, m)), 1e-12);
    }
}

TEST(CriticalTest, SquareRootLawDepartsInstantly)
{
    CriticalFixture fx;
    VelocitySpec f = sqrt_law();
    double hBar = find_threshold(fx.u0, fx.density, f, 1e-12).hBar;
    ASSERT_NEAR(hBar, 0.5, 1e-6);
    CriticalClassification c = classify_critical(fx.u0, fx.density, f, hBar);
    EXPECT_EQ(c.sideD.regime, CriticalRegime::InstantDeparture) << c.sideD.reason;
    EXPECT_NEAR(c.sideD.fit.exponent, 0.5, 0.1);
    EXPECT_TRUE(c.sideD.travelConverges);
    DeltaTableOptions opt;
    opt.horizon = 0.6;
    DeltaTable tb = build_delta_table(fx.u0, fx.density, f, hBar, {0.2, hBar, 0.8}, times(0.6, 0.05), opt);
    EXPECT_EQ(tb.info[1].departure[0], Departure::Instant);
    for (std::size_t m = 0; m < tb.time_count(); ++m) {
        double t = tb.times[m];
        EXPECT_NEAR(tb.at(Branch::D, 1, m), -(t / 2) * (t / 2), 1e-3) << t;
    }
    EXPECT_LT(tb.at(Branch::D, 1, 1), 0.0);
}

TEST(CriticalTest, StrictlySignedSpeedAwayFromThreshold)
{
    // Off the threshold the speed at s = 0 is f(2h) - no degeneracy to fit.
    CriticalFixture fx;
    CriticalClassification c = classify_critical(fx.u0, fx.density, lipschitz_law(), 0.3);
    EXPECT_EQ(c.sideD.regime, CriticalRegime::StrictlySigned) << c.sideD.reason;
    EXPECT_EQ(c.sideE.regime, CriticalRegime::StrictlySigned) << c.sideE.reason;
}

TEST(CriticalTest, CoarseGridWithholdsTheVerdict)
{
    Grid g = Grid::from_box(1, {-2, 0}, {2, 0}, 0.25);
    ScalarField u0 = make_field(g, [](double x, double) { return std::abs(x); });
    DensityField d = lebesgue_density(g);
    CriticalClassification c = classify_critical(u0, d, lipschitz_law(), 0.5);
    EXPECT_EQ(c.sideD.regime, CriticalRegime::Withheld);
    EXPECT_FALSE(c.sideD.reason.empty());
}

// Independent union-of-balls membership for the construction.
bool kruskal_brute(int depth, double x, double y)
{
    if (std::hypot(x + 1.0, y) <= 1.0 / 28)
        return true;
    for (int k = 0; k <= depth; ++k) {
        const double l = std::ldexp(1.0, -2 * k), x0 = 2.0 - std::ldexp(1.0, 1 - k);
        const int nx = 1 << k, ny = 1 << (2 * k);
        for (int a = 0; a < nx; ++a)
            for (int b = 0; b < ny; ++b)
                if (std::hypot(x - (x0 + (a + 0.5) * l), y - (b + 0.5) * l) <= l / 8)
                    return true;
    }
    return false;
}

TEST(KruskalTest, DepthZeroHasOneBallAndTheAnchor)
{
    std::array<double, 2> lo, hi;
    kruskal_box(0.05, lo, hi);
    Grid g = Grid::from_box(2, lo, hi, 1.0 / 128);
    BinarySet s = build_kruskal_set(0, g);
    std::size_t expected = 0, nearBall = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto p = g.point(i);
        expected += kruskal_brute(0, p[0], p[1]);
        if (s[i] && std::hypot(p[0] - 0.5, p[1] - 0.5) <= 0.125 + 1e-12)
            ++nearBall;
    }
    EXPECT_EQ(s.count(), expected);
    EXPECT_GT(nearBall, 0u);
    EXPECT_LT(nearBall, s.count());
}

TEST(KruskalTest, DepthThreeMatchesBruteForce)
{
    std::array<double, 2> lo, hi;
    kruskal_box(0.05, lo, hi);
    Grid g = Grid::from_box(2, lo, hi, std::ldexp(1.0, -6) / 4);
    BinarySet s = build_kruskal_set(3, g);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto p = g.point(i);
        // Only cells near the strips can be members.
        bool brute = (p[0] < -0.9 || p[0] > -0.001) && kruskal_brute(3, p[0], p[1]);
        mismatches += brute != s[i];
    }
    EXPECT_EQ(mismatches, 0u);
}

TEST(KruskalTest, ResolutionGuard)
{
    std::array<double, 2> lo, hi;
    kruskal_box(0.05, lo, hi);
    Grid g = Grid::from_box(2, lo, hi, 1.0 / 64);
    EXPECT_EQ(code_of([&] { build_kruskal_set(3, g); }), ErrorCode::ResolutionTooCoarse);
    EXPECT_EQ(code_of([&] { build_kruskal_set(7, g); }), ErrorCode::ResolutionTooCoarse);
}

// Synthetic snapshots with e(t) prescribed on the window.
std::vector<ScalarField> synthetic(const Grid& g, const std::vector<double>& t, double hBar,
                                   const std::function<double(double)>& e)
{
    std::vector<ScalarField> out;
    for (double tt : t)
        out.push_back(make_field(g, [&](double x, double y) { return hBar + e(tt) * std::exp(-(x * x + y * y)); }));
    return out;
}

TEST(AsymptoticsTest, ExponentialDecayRate)
{
    Grid g = Grid::from_box(2, {-1, -1}, {1, 1}, 0.125);
    BinarySet window(g, true);
    std::vector<double> t = times(8.0, 0.25);
    auto fields = synthetic(g, t, 1.0, [](double s) { return 0.8 * std::exp(-0.5 * s); });
    AsymptoticsReport a = asymptotics(t, fields, 1.0, window, 1e-6);
    EXPECT_TRUE(a.fitted);
    EXPECT_FALSE(a.stabilized);
    EXPECT_NEAR(a.lambda, 0.5, 1e-9);
    EXPECT_NEAR(a.constant, 0.8, 1e-9);
}

TEST(AsymptoticsTest, FiniteTimeStabilization)
{
    Grid g = Grid::from_box(2, {-1, -1}, {1, 1}, 0.125);
    BinarySet window(g, true);
    std::vector<double> t = times(3.0, 0.1);
    const double floor = 0.01;
    auto fields = synthetic(g, t, 1.0, [](double s) { return std::max(1.0 - s, 0.0); });
    AsymptoticsReport a = asymptotics(t, fields, 1.0, window, floor);
    EXPECT_TRUE(a.stabilized);
    EXPECT_NEAR(a.stabilizationTime, 1.0, 0.1 + 1e-9);
}

TEST(AsymptoticsTest, FrozenErrorIsTooShort)
{
    Grid g = Grid::from_box(2, {-1, -1}, {1, 1}, 0.125);
    BinarySet window(g, true);
    std::vector<double> t = times(3.0, 0.1);
    auto fields = synthetic(g, t, 1.0, [](double) { return 0.7; });
    EXPECT_EQ(code_of([&] { asymptotics(t, fields, 1.0, window, 1e-3); }), ErrorCode::TailTooShort);
}

TEST(RegInitialTest, RadialConstantAndQuasiconvex)
{
    // Disk masses 2r/(r+1): the worst quotient is (m(3.5) - m(1.5))/2 = 8/45.
    Grid g = Grid::from_box(2, {-4.5, -4.5}, {4.5, 4.5}, 1.0 / 32);
    ScalarField u0 = make_field(g, [](double x, double y) { return std::hypot(x, y); });
    DensityField d = cauchy2d_density(g);
    VelocitySpec f = affine_clamped(1, -1, 0, 2);
    double hBar = find_threshold(u0, d, f, 1e-10).hBar;
    RegInitialResult radial = check_reg_initial(u0, d, f, hBar, 0.5);
    EXPECT_NEAR(radial.a, 8.0 / 45.0, 0.01);
    RegInitialResult flat = check_reg_initial(u0, d, shifted(1.0, 2.0), 1.0, 0.5);
    EXPECT_EQ(flat.a, 0.0);

    Grid gq = Grid::from_box(2, {-4, -4}, {4, 4}, 1.0 / 16);
    ScalarField q = quasiconvex_random(gq, 7);
    DensityField dq = gaussian_density(gq, 1.0);
    VelocitySpec fq = affine_clamped(2, -0.5, 0, 1);
    double hq = find_threshold(q, dq, fq, 1e-10).hBar;
    EXPECT_GT(check_reg_initial(q, dq, fq, hq, 1.0).a, 0.0);
}

} // namespace
} // namespace levelflow
