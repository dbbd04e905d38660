#include "levelflow/analysis.hpp"

#include "levelflow/errors.hpp"
#include "levelflow/parallel.hpp"
#include "levelflow/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace levelflow {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    return f;
}
} // namespace

PowerFit fit_power(const std::vector<double>& x, const std::vector<double>& y)
{
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    PowerFit p;
    p.samples = static_cast<int>(lx.size());
    if (lx.size() < 2)
        return p;
    LineFit f = fit_line(lx, ly);
    p.exponent = f.slope;
    p.constant = std::exp(f.intercept);
    p.rms = f.rms;
    return p;
}

// ---------------------------------------------------------------------------
// Fattening
// ---------------------------------------------------------------------------

const char* to_string(InitialRegularity r)
{
    return r == InitialRegularity::ClosureMatches ? "closure-matches" : "strict-inclusion";
}

FatteningReport fattening_report(const DeltaTable& table, const SdfCache& cache, const DensityField& density)
{
    require_same_grid(cache.grid(), density.grid, "fattening_report: grids differ");
    const std::size_t K = table.level_count();
    const std::size_t M = table.time_count();
    const std::size_t N = density.grid.size();
    const double dx = density.grid.dx();
    FatteningReport rep;
    rep.times = table.times;
    rep.levels.resize(K);

    parallel_for(K, [&](std::size_t k) {
        LevelFattening& lf = rep.levels[k];
        lf.h = table.levels[k];
        for (std::size_t i = 0; i < N; ++i) {
            double sdD = cache.at(Branch::D, k, i);
            double sdE = cache.at(Branch::E, k, i);
            if (sdE <= 0.0 && !(sdD < 0.0)) {
                lf.initialSdGap = std::max(lf.initialSdGap, sdD);
                lf.initialMassGap += density.weight[i];
                if (sdE < -dx)
                    lf.interiorMassGap += density.weight[i];
            }
        }
        lf.regularity = lf.initialSdGap <= tol::kRegularGapFactor * dx ? InitialRegularity::ClosureMatches
                                                                        : InitialRegularity::StrictInclusion;
        lf.gap.resize(M);
        lf.thickness.resize(M);
        for (std::size_t m = 0; m < M; ++m) {
            double dD = table.at(Branch::D, k, m);
            double dE = table.at(Branch::E, k, m);
            lf.gap[m] = dE - dD;
            lf.maxGap = std::max(lf.maxGap, lf.gap[m]);
            if (m > 0)
                lf.maxGapDecrease = std::max(lf.maxGapDecrease, lf.gap[m - 1] - lf.gap[m]);
            double thick = 0.0;
            for (std::size_t i = 0; i < N; ++i)
                if (cache.at(Branch::E, k, i) <= dE && !(cache.at(Branch::D, k, i) < dD))
                    thick += density.weight[i];
            lf.thickness[m] = thick;
        }
        bool allPositive = M > 1;
        for (std::size_t m = 1; m < M; ++m)
            allPositive = allPositive && lf.gap[m] > 0.0;
        lf.fattens = lf.regularity == InitialRegularity::StrictInclusion && allPositive;
    });

    for (const auto& lf : rep.levels) {
        if (lf.fattens)
            ++rep.fatteningLevels;
        if (lf.regularity == InitialRegularity::StrictInclusion && lf.maxGapDecrease > tol::kGapAbort)
            throw Error(ErrorCode::MonotonicityViolation, "fattening gap of level " + std::to_string(lf.h) +
                                                              " decreases by " + std::to_string(lf.maxGapDecrease));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Critical level
// ---------------------------------------------------------------------------

const char* to_string(CriticalRegime r)
{
    switch (r) {
    case CriticalRegime::InstantDeparture: return "instant-departure";
    case CriticalRegime::PinnedAtZero: return "pinned-at-zero";
    case CriticalRegime::StrictlySigned: return "strictly-signed";
    case CriticalRegime::Withheld: return "withheld";
    }
    return "?";
}

PowerFit perimeter_power_fit(const SignedDistanceField& sdf, double sLo, double sHi, int samples)
{
    if (!(sLo > 0.0) || !(sHi > sLo) || samples < 2)
        throw Error(ErrorCode::ConfigInvalid, "perimeter fit needs 0 < sLo < sHi and two samples");
    std::vector<double> s(samples);
    for (int i = 0; i < samples; ++i)
        s[i] = sLo * std::pow(sHi / sLo, static_cast<double>(i) / (samples - 1));
    return fit_power(s, contour_lengths(sdf, s));
}

CriticalClassification classify_critical(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel,
                                         double hBar)
{
    const double dx = u0.grid.dx();
    const double lo = tol::kFitLoFactor * dx;
    const double hi = tol::kFitHiFactor * dx;
    const double M = vel.bound();
    CriticalClassification cc;
    cc.hBar = hBar;

    for (Branch branch : {Branch::D, Branch::E}) {
        CriticalSide& side = branch == Branch::D ? cc.sideD : cc.sideE;
        side.branch = branch;
        const int dir = branch == Branch::D ? -1 : 1;
        SignedDistanceField sdf = sublevel_signed_distance(u0, hBar, closure_of(branch));
        double reach = hi * 1.001;
        if (dir > 0)
            reach = std::min(reach, frame_distance(sdf) - dx);
        SpeedCurve curve = dir < 0 ? speed_curve(sdf, density, vel, hBar, branch, -reach, 0.0)
                                   : speed_curve(sdf, density, vel, hBar, branch, 0.0, reach);
        std::vector<double> xs, ys;
        for (std::size_t j = 0; j < curve.s.size(); ++j) {
            double s = curve.s[j] * dir;
            if (curve.s[j] == 0.0)
                side.g0 = curve.g[j];
            if (s >= lo && s <= hi) {
                xs.push_back(s);
                ys.push_back(std::abs(curve.g[j]));
            }
        }
        side.fit = fit_power(xs, ys);
        if (std::abs(side.g0) > tol::kZeroSpeedFactor * std::max(M, 1e-300)) {
            side.regime = CriticalRegime::StrictlySigned;
            side.travelConverges = true;
            continue;
        }
        TravelTime tt = travel_time(curve, dir, M);
        side.travelConverges = !tt.divergent;
        const double alpha = side.fit.exponent;
        if (side.fit.samples < tol::kFitMinSamples) {
            side.reason = "fewer than 6 usable samples";
        } else if (side.fit.rms > tol::kFitMaxRms) {
            side.reason = "power fit residual too large";
        } else if (alpha < 1.0 - tol::kFitEps && side.travelConverges) {
            side.regime = CriticalRegime::InstantDeparture;
        } else if (alpha >= 1.0 - tol::kFitEps && !side.travelConverges) {
            side.regime = CriticalRegime::PinnedAtZero;
        } else {
            side.reason = "exponent and travel-time verdict disagree";
        }
    }

    if (u0.grid.dim() == 2) {
        SignedDistanceField sdfE = sublevel_signed_distance(u0, hBar, Closure::Closed);
        double top = std::min(1e-2, frame_distance(sdfE) - dx);
        if (top > 4.0 * dx) {
            cc.perimeterFit = perimeter_power_fit(sdfE, 2.0 * dx, top);
            cc.sigmaHat = -cc.perimeterFit.exponent;
        }
    }
    return cc;
}

// ---------------------------------------------------------------------------
// Kruskal-type set
// ---------------------------------------------------------------------------

namespace {
constexpr double kAnchorRadius = 1.0 / 28.0;

double kruskal_side(int k) { return std::ldexp(1.0, -2 * k); }
} // namespace

bool kruskal_contains(int depth, double x, double y)
{
    if ((x + 1.0) * (x + 1.0) + y * y <= kAnchorRadius * kAnchorRadius)
        return true;
    if (x < 0.0 || x >= 2.0 || y < 0.0 || y > 1.0)
        return false;
    // Strip k covers [2 - 2^(1-k), 2 - 2^-k).
    int k = static_cast<int>(std::floor(std::log2(2.0 / (2.0 - x))));
    double x0 = 2.0 - std::ldexp(1.0, 1 - k);
    if (x < x0) {
        --k;
        x0 = 2.0 - std::ldexp(1.0, 1 - k);
    } else if (x >= 2.0 - std::ldexp(1.0, -k)) {
        ++k;
        x0 = 2.0 - std::ldexp(1.0, 1 - k);
    }
    if (k > depth)
        return false;
    const double l = kruskal_side(k);
    const double r = tol::kKruskalRadiusRatio * l;
    double cx = x0 + (std::floor((x - x0) / l) + 0.5) * l;
    double cy = (std::min(std::floor(y / l), std::ldexp(1.0, 2 * k) - 1.0) + 0.5) * l;
    return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
}

void kruskal_box(double margin, std::array<double, 2>& lower, std::array<double, 2>& upper)
{
    lower = {-1.0 - kAnchorRadius - margin, -kAnchorRadius - margin};
    upper = {2.0 + margin, 1.0 + margin};
}

BinarySet build_kruskal_set(int depth, const Grid& grid)
{
    if (grid.dim() != 2)
        throw Error(ErrorCode::ConfigInvalid, "the Kruskal set lives in 2D");
    if (depth < 0 || depth > 6)
        throw Error(ErrorCode::ResolutionTooCoarse, "Kruskal depth must lie in [0, 6]");
    if (grid.dx() > kruskal_side(depth) / 4.0)
        throw Error(ErrorCode::ResolutionTooCoarse, "dx=" + std::to_string(grid.dx()) +
                                                        " exceeds a quarter of the smallest square at depth " +
                                                        std::to_string(depth));
    BinarySet set(grid);
    parallel_for(static_cast<std::size_t>(grid.ny()), [&](std::size_t j) {
        for (int i = 0; i < grid.nx(); ++i)
            set.member[grid.index(i, static_cast<int>(j))] =
                kruskal_contains(depth, grid.x(i), grid.y(static_cast<int>(j))) ? 1 : 0;
    });
    return set;
}

// ---------------------------------------------------------------------------
// Large time
// ---------------------------------------------------------------------------

namespace {

std::vector<double> window_error(const std::vector<ScalarField>& fields, double hBar, const BinarySet& window)
{
    std::vector<double> e(fields.size(), 0.0);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        require_same_grid(fields[i].grid, window.grid, "asymptotics: grids differ");
        for (std::size_t c = 0; c < window.member.size(); ++c) {
            double v = fields[i].values[c];
            if (window.member[c] && std::isfinite(v))
                e[i] = std::max(e[i], std::abs(v - hBar));
        }
    }
    return e;
}

struct TailFit {
    std::size_t start = 0;
    std::size_t end = 0; // exclusive
    bool stabilized = false;
    std::size_t floorIndex = 0;
    LineFit line;
    int samples = 0;
};

TailFit fit_tail(const std::vector<double>& times, const std::vector<double>& e, double floor)
{
    TailFit tf;
    tf.start = e.size();
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] < 0.5 * e[0]) {
            tf.start = i;
            break;
        }
    }
    tf.floorIndex = e.size();
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] <= floor) {
            tf.stabilized = true;
            tf.floorIndex = i;
            break;
        }
    }
    tf.end = tf.floorIndex;
    std::vector<double> t, le;
    for (std::size_t i = tf.start; i < tf.end; ++i) {
        t.push_back(times[i]);
        le.push_back(std::log(e[i]));
    }
    tf.samples = static_cast<int>(t.size());
    if (tf.samples >= 2)
        tf.line = fit_line(t, le);
    return tf;
}

} // namespace

AsymptoticsReport asymptotics(const std::vector<double>& times, const std::vector<ScalarField>& fields, double hBar,
                              const BinarySet& window, double floor, const std::vector<DecayWindow>& nested)
{
    if (times.size() != fields.size() || times.empty())
        throw Error(ErrorCode::ConfigInvalid, "asymptotics needs one field per time");
    AsymptoticsReport rep;
    rep.times = times;
    rep.floor = floor;
    rep.error = window_error(fields, hBar, window);
    TailFit tf = fit_tail(times, rep.error, floor);
    rep.transientEnd = tf.start < times.size() ? times[tf.start] : kInf;
    rep.stabilized = tf.stabilized;
    rep.stabilizationTime = tf.stabilized ? times[tf.floorIndex] : kInf;
    rep.fitSamples = tf.samples;
    if (tf.samples >= tol::kAsymptoticMinSamples) {
        rep.fitted = true;
        rep.lambda = -tf.line.slope;
        rep.constant = std::exp(tf.line.intercept);
    } else if (!tf.stabilized) {
        throw Error(ErrorCode::TailTooShort, "only " + std::to_string(tf.samples) +
                                                 " samples after the transient; extend the horizon");
    }
    for (const auto& w : nested) {
        std::vector<double> e = window_error(fields, hBar, w.mask);
        TailFit f = fit_tail(times, e, floor);
        WindowRate wr;
        wr.name = w.name;
        wr.samples = f.samples;
        wr.fitted = f.samples >= tol::kAsymptoticMinSamples;
        wr.lambda = wr.fitted ? -f.line.slope : 0.0;
        rep.windows.push_back(wr);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

DeltaPair oracle_partial_fattening(double t, double h)
{
    if (!(t >= 0.0) || !(h > 0.0) || !(h < 2.0))
        throw Error(ErrorCode::OutOfValidityWindow, "closed form needs t >= 0 and 0 < h < 2");
    // h <= 1: one interval (2-h, 2+h), mass 2h + 2 delta.
    // h > 1: two intervals, mass 4h - 2 + 4 delta until they merge at delta = 2 - h.
    auto single = [&](double hh) {
        double d = (hh - 0.5) * std::expm1(2.0 * t);
        if (hh + d <= 0.0 || 2.0 * (hh + d) > 10.0)
            throw Error(ErrorCode::OutOfValidityWindow, "single-interval regime left at t=" + std::to_string(t));
        return d;
    };
    auto pair = [&](double hh) {
        double d = (hh - 0.75) * std::expm1(4.0 * t);
        if (d >= 2.0 - hh)
            throw Error(ErrorCode::OutOfValidityWindow, "components merge before t=" + std::to_string(t));
        return d;
    };
    DeltaPair p;
    p.dD = h <= 1.0 ? single(h) : pair(h);
    p.dE = h < 1.0 ? single(h) : pair(h);
    return p;
}

double oracle_radial_decay(double r0, double t, double* residual)
{
    if (!(r0 >= 0.0) || !(t >= 0.0) || !std::isfinite(r0))
        throw Error(ErrorCode::OutOfValidityWindow, "radial closed form needs r0 >= 0 and t >= 0");
    auto F = [](double r) { return std::exp(r) * (r - 1.0) * (r - 1.0); };
    const double target = (r0 - 1.0) * (r0 - 1.0) * std::exp(r0 - t);
    if (r0 == 1.0) {
        if (residual)
            *residual = 0.0;
        return 1.0;
    }
    // F increases on [1, inf) and decreases on [-1, 1]; stay on r0's side.
    double a = std::min(r0, 1.0), b = std::max(r0, 1.0);
    const bool increasing = r0 > 1.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (a + b);
        if (mid == a || mid == b)
            break;
        bool above = F(mid) > target;
        if (above == increasing)
            b = mid;
        else
            a = mid;
    }
    double r = 0.5 * (a + b);
    if (residual)
        *residual = target > 0.0 ? std::abs(F(r) / target - 1.0) : std::abs(F(r));
    return r;
}

// ---------------------------------------------------------------------------
// Initial regularity
// ---------------------------------------------------------------------------

RegInitialResult check_reg_initial(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel,
                                   double hBar, double b, int levelSamples, int radiusSamples)
{
    if (!(b > 0.0) || levelSamples < 1 || radiusSamples < 1)
        throw Error(ErrorCode::ConfigInvalid, "check_reg_initial needs b > 0 and positive sample counts");
    RegInitialResult res;
    res.a = kInf;
    const double sMax = 1.0 / b;
    for (int i = 0; i < levelSamples; ++i) {
        double h = levelSamples == 1 ? hBar : hBar + b * i / (levelSamples - 1);
        SignedDistanceField sdf = sublevel_signed_distance(u0, h, Closure::Closed);
        if (sMax >= frame_distance(sdf))
            throw Error(ErrorCode::DomainOverflow,
                        "E_h(1/b) reaches the grid frame at h=" + std::to_string(h) + "; enlarge the domain");
        ParallelMassProfile mass(sdf, density);
        const double f0 = vel(h, mass.mass(0.0));
        for (int j = 1; j <= radiusSamples; ++j) {
            double s = sMax * j / radiusSamples;
            double a = (vel(h, mass.mass(s)) - f0) / s;
            ++res.samples;
            if (a < res.a) {
                res.a = a;
                res.argH = h;
                res.argS = s;
            }
        }
    }
    res.a = std::max(res.a, 0.0);
    return res;
}

} // namespace levelflow
