#include "levelflow/delta.hpp"

#include "levelflow/errors.hpp"
#include "levelflow/parallel.hpp"
#include "levelflow/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace levelflow {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// log1p(r) / r and expm1(x) / x, continuous through 0.
double log_ratio(double r) { return std::abs(r) < 1e-8 ? 1.0 - 0.5 * r : std::log1p(r) / r; }
double exp_ratio(double x) { return std::abs(x) < 1e-8 ? 1.0 + 0.5 * x : std::expm1(x) / x; }
} // namespace

const char* to_string(LevelPosition p)
{
    switch (p) {
    case LevelPosition::Below: return "below";
    case LevelPosition::Critical: return "critical";
    case LevelPosition::Above: return "above";
    }
    return "?";
}

const char* to_string(Selection s)
{
    switch (s) {
    case Selection::Regular: return "regular";
    case Selection::MinimalAtCritical: return "minimal-at-critical";
    case Selection::MaximalAtCritical: return "maximal-at-critical";
    }
    return "?";
}

const char* to_string(Departure d)
{
    switch (d) {
    case Departure::Moving: return "moving";
    case Departure::Instant: return "instant";
    case Departure::Pinned: return "pinned";
    }
    return "?";
}

LevelPosition level_position(double h, double hBar)
{
    if (h < hBar)
        return LevelPosition::Below;
    if (h > hBar)
        return LevelPosition::Above;
    return LevelPosition::Critical;
}

int traversal_side(LevelPosition pos, Branch branch)
{
    switch (pos) {
    case LevelPosition::Above: return 1;
    case LevelPosition::Below: return -1;
    case LevelPosition::Critical: return branch == Branch::D ? -1 : 1;
    }
    return 1;
}

// ---------------------------------------------------------------------------
// Travel time
// ---------------------------------------------------------------------------

TravelTime travel_time(const SpeedCurve& curve, int side, double speedBound)
{
    auto it = std::find(curve.s.begin(), curve.s.end(), curve.origin);
    if (it == curve.s.end())
        throw Error(ErrorCode::ConfigInvalid, "speed curve does not sample its origin");
    const std::ptrdiff_t j0 = it - curve.s.begin();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(curve.s.size());

    TravelTime tt;
    tt.side = side;
    tt.origin = curve.origin;
    for (std::ptrdiff_t j = j0; j >= 0 && j < n; j += side) {
        tt.sigma.push_back(side * (curve.s[j] - curve.origin));
        tt.G.push_back(side * curve.g[j]);
    }
    const double snap = tol::kZeroSpeedFactor * std::max(speedBound, 1e-300);
    if (std::abs(tt.G[0]) <= snap)
        tt.G[0] = 0.0;
    if (tt.G[0] < 0.0)
        throw Error(ErrorCode::SignChange, "speed " + std::to_string(tt.G[0] * side) +
                                               " at the origin points away from the traversed side");
    // G is nondecreasing after rearrangement; clear the snapped noise.
    for (std::size_t j = 1; j < tt.G.size(); ++j)
        tt.G[j] = std::max(tt.G[j], tt.G[j - 1]);
    tt.G0 = tt.G[0];
    tt.degenerate = tt.G0 == 0.0;

    const std::size_t m = tt.sigma.size();
    const double cap = speedBound > 0.0 ? tol::kDivergenceFactor / speedBound : kInf;
    tt.T.assign(m, 0.0);
    std::size_t start = 1;
    if (tt.degenerate && m > 1) {
        bool ok = m >= 4 && tt.G[1] > 0.0;
        if (ok) {
            double c1 = 0.5 * (tt.sigma[2] - tt.sigma[1]) * (1.0 / tt.G[1] + 1.0 / tt.G[2]);
            double c2 = 0.5 * (tt.sigma[3] - tt.sigma[2]) * (1.0 / tt.G[2] + 1.0 / tt.G[3]);
            tt.tailRatio = c1 / c2;
            ok = tt.tailRatio < tol::kRatioTest;
        }
        if (!ok) {
            tt.divergent = true;
            std::fill(tt.T.begin() + 1, tt.T.end(), kInf);
            return tt;
        }
        double rho = tt.sigma[2] / tt.sigma[1];
        tt.tailExponent = std::clamp(-std::log(tt.tailRatio) / std::log(rho), 1e-6, 1.0);
        // Integral of 1/(C sigma^alpha) over (0, sigma_1].
        tt.T[1] = tt.sigma[1] / (tt.G[1] * tt.tailExponent);
        start = 2;
    }
    // G is linear between samples, so 1/G integrates exactly to a logarithm.
    for (std::size_t j = start; j < m; ++j) {
        double step = (tt.sigma[j] - tt.sigma[j - 1]) / tt.G[j - 1] * log_ratio((tt.G[j] - tt.G[j - 1]) / tt.G[j - 1]);
        tt.T[j] = tt.T[j - 1] + step;
    }
    for (std::size_t j = 1; j < m; ++j)
        if (tt.T[j] > cap)
            tt.T[j] = kInf;
    if (m > 1 && std::isinf(tt.T[1]))
        tt.divergent = true;
    return tt;
}

double TravelTime::sigma_at(double t) const
{
    if (t <= 0.0 || divergent || sigma.size() < 2)
        return 0.0;
    if (!(t < T.back()))
        return sigma.back();
    std::size_t j = std::upper_bound(T.begin(), T.end(), t) - T.begin(); // T[j-1] <= t < T[j]
    if (j == 1 && degenerate)
        return sigma[1] * std::pow(t / T[1], 1.0 / tailExponent);
    // Exact inverse on the linear segment: sigma - sigma0 = G0 tau expm1(k tau) / (k tau).
    const double ds = sigma[j] - sigma[j - 1];
    const double k = (G[j] - G[j - 1]) / ds;
    const double tau = t - T[j - 1];
    return sigma[j - 1] + std::min(ds, G[j - 1] * tau * exp_ratio(k * tau));
}

// ---------------------------------------------------------------------------
// Per-level solve
// ---------------------------------------------------------------------------

LevelSolution solve_delta(const SpeedCurve& curve, LevelPosition pos, const std::vector<double>& times,
                          double speedBound)
{
    const int side = traversal_side(pos, curve.branch);
    LevelSolution sol;
    sol.travel = travel_time(curve, side, speedBound);
    const TravelTime& tt = sol.travel;

    if (pos == LevelPosition::Critical)
        sol.selection = curve.branch == Branch::D ? Selection::MinimalAtCritical : Selection::MaximalAtCritical;

    bool frozen = false;
    if (!tt.degenerate) {
        sol.departure = Departure::Moving;
    } else {
        // The minimal solution may only leave 0 downwards and the maximal one
        // upwards; the other direction keeps the equilibrium.
        bool outward = (curve.branch == Branch::E && side > 0) || (curve.branch == Branch::D && side < 0);
        if (outward && !tt.divergent) {
            sol.departure = Departure::Instant;
        } else {
            sol.departure = Departure::Pinned;
            frozen = true;
        }
    }

    sol.reachTime = frozen ? kInf : tt.reach_time();
    sol.delta.resize(times.size());
    sol.reached.resize(times.size());
    for (std::size_t m = 0; m < times.size(); ++m) {
        if (frozen) {
            sol.delta[m] = 0.0;
            sol.reached[m] = 1;
            continue;
        }
        double t = times[m];
        bool ok = t <= sol.reachTime;
        sol.reached[m] = ok ? 1 : 0;
        if (!ok)
            sol.truncated = true;
        sol.delta[m] = curve.origin + side * tt.sigma_at(t);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Table
// ---------------------------------------------------------------------------

double DeltaTable::at_time(Branch b, std::size_t k, double t) const
{
    if (times.empty() || t < times.front() || t > times.back())
        throw Error(ErrorCode::OutOfTable, "time " + std::to_string(t) + " outside the delta table");
    std::size_t m = std::upper_bound(times.begin(), times.end(), t) - times.begin();
    if (m >= times.size())
        return at(b, k, times.size() - 1);
    double w = (t - times[m - 1]) / (times[m] - times[m - 1]);
    return (1.0 - w) * at(b, k, m - 1) + w * at(b, k, m);
}

bool DeltaTable::reached_at(Branch b, std::size_t k, double t) const
{
    std::size_t m = std::lower_bound(times.begin(), times.end(), t) - times.begin();
    if (m >= times.size())
        return false;
    return is_reached(b, k, m) && (m == 0 || is_reached(b, k, m - 1));
}

bool DeltaTable::any_truncated() const
{
    for (const auto& r : reached)
        for (auto v : r)
            if (!v)
                return true;
    return false;
}

namespace {

// Least-squares nondecreasing fit (pool adjacent violators), unit weights.
void pava(std::vector<double>& y)
{
    std::vector<double> sum, val;
    std::vector<std::size_t> len;
    for (double v : y) {
        sum.push_back(v);
        len.push_back(1);
        val.push_back(v);
        while (val.size() > 1 && val[val.size() - 2] > val.back()) {
            double s = sum.back() + sum[sum.size() - 2];
            std::size_t l = len.back() + len[len.size() - 2];
            sum.pop_back();
            len.pop_back();
            val.pop_back();
            sum.back() = s;
            len.back() = l;
            val.back() = s / static_cast<double>(l);
        }
    }
    std::size_t pos = 0;
    for (std::size_t b = 0; b < val.size(); ++b)
        for (std::size_t i = 0; i < len[b]; ++i)
            y[pos++] = val[b];
}

} // namespace

void project_monotone(DeltaTable& table)
{
    const std::size_t K = table.level_count();
    const std::size_t M = table.time_count();
    std::vector<double> raw[2] = {table.delta[0], table.delta[1]};
    std::vector<std::size_t> ks;
    std::vector<double> col;
    for (int iter = 0; iter < 200; ++iter) {
        double change = 0.0;
        for (int b = 0; b < 2; ++b) {
            for (std::size_t m = 0; m < M; ++m) {
                ks.clear();
                col.clear();
                for (std::size_t k = 0; k < K; ++k) {
                    if (table.reached[b][k * M + m]) {
                        ks.push_back(k);
                        col.push_back(table.delta[b][k * M + m]);
                    }
                }
                if (std::is_sorted(col.begin(), col.end()))
                    continue;
                pava(col);
                for (std::size_t i = 0; i < ks.size(); ++i) {
                    double& v = table.delta[b][ks[i] * M + m];
                    change = std::max(change, std::abs(v - col[i]));
                    v = col[i];
                }
            }
        }
        for (std::size_t i = 0; i < K * M; ++i) {
            if (!table.reached[0][i] || !table.reached[1][i])
                continue;
            double& d = table.delta[0][i];
            double& e = table.delta[1][i];
            if (d > e) {
                double mid = 0.5 * (d + e);
                change = std::max(change, d - mid);
                d = mid;
                e = mid;
            }
        }
        if (change == 0.0)
            break;
    }

    table.maxRepair = 0.0;
    table.repairedEntries = 0;
    for (int b = 0; b < 2; ++b) {
        table.repair[b].assign(K * M, 0.0);
        for (std::size_t i = 0; i < K * M; ++i) {
            double r = std::abs(table.delta[b][i] - raw[b][i]);
            table.repair[b][i] = r;
            if (r > 0.0)
                ++table.repairedEntries;
            table.maxRepair = std::max(table.maxRepair, r);
        }
    }
    if (table.maxRepair > tol::kRepairLogFactor * table.dx) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "monotone projection moved an entry by %.3g (%.2f dx)", table.maxRepair,
                      table.maxRepair / table.dx);
        table.warnings.emplace_back(buf);
    }
    if (table.maxRepair > tol::kRepairAbortFactor * table.dx)
        throw Error(ErrorCode::MonotonicityRepairExceeded,
                    "monotone projection moved an entry by " + std::to_string(table.maxRepair / table.dx) + " dx");
}

DeltaTable build_delta_table(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel, double hBar,
                             const std::vector<double>& levels, const std::vector<double>& times,
                             const DeltaTableOptions& opts, const SdfSink& sink)
{
    require_same_grid(u0.grid, density.grid, "build_delta_table: grids differ");
    if (levels.empty() || std::adjacent_find(levels.begin(), levels.end(), std::greater_equal<double>()) != levels.end())
        throw Error(ErrorCode::ConfigInvalid, "levels must be strictly increasing");
    if (times.empty() || times.front() != 0.0 ||
        std::adjacent_find(times.begin(), times.end(), std::greater_equal<double>()) != times.end())
        throw Error(ErrorCode::ConfigInvalid, "times must start at 0 and increase strictly");

    DeltaTable table;
    table.levels = levels;
    table.times = times;
    table.hBar = hBar;
    table.speedBound = vel.bound();
    table.dx = u0.grid.dx();
    const std::size_t K = levels.size();
    const std::size_t M = times.size();
    for (int b = 0; b < 2; ++b) {
        table.delta[b].assign(K * M, 0.0);
        table.reached[b].assign(K * M, 1);
    }
    table.info.resize(K);

    const double dx = u0.grid.dx();
    const double need = vel.bound() * opts.horizon + 2.0 * dx;
    parallel_for(K, [&](std::size_t k) {
        LevelInfo& li = table.info[k];
        li.h = levels[k];
        li.position = level_position(levels[k], hBar);
        for (Branch branch : {Branch::D, Branch::E}) {
            const int b = branch == Branch::D ? 0 : 1;
            SignedDistanceField sdf = sublevel_signed_distance(u0, levels[k], closure_of(branch), opts.tauLvl);
            if (sink)
                sink(k, branch, sdf);
            const int side = traversal_side(li.position, branch);
            double lo = 0.0, hi = 0.0;
            if (side > 0) {
                hi = need;
                double room = frame_distance(sdf) - dx;
                if (hi > room) {
                    hi = std::max(room, 0.0);
                    li.capped[b] = true;
                }
            } else {
                lo = -need;
            }
            SpeedCurve curve = speed_curve(sdf, density, vel, levels[k], branch, lo, hi);
            LevelSolution sol = solve_delta(curve, li.position, times, vel.bound());
            li.selection[b] = sol.selection;
            li.departure[b] = sol.departure;
            li.g0[b] = curve.g[std::find(curve.s.begin(), curve.s.end(), 0.0) - curve.s.begin()];
            li.tailExponent[b] = sol.travel.tailExponent;
            li.reachTime[b] = sol.reachTime;
            li.truncated[b] = sol.truncated;
            li.rearranged[b] = curve.rearranged;
            li.maxDescent[b] = curve.maxDescent;
            if (sol.truncated && !opts.allowTruncation)
                throw Error(ErrorCode::DomainOverflow,
                            std::string("branch ") + to_string(branch) + " of level " + std::to_string(levels[k]) +
                                " leaves the grid at t=" + std::to_string(sol.reachTime) +
                                " before the horizon; enlarge the domain");
            for (std::size_t m = 0; m < M; ++m) {
                table.delta[b][k * M + m] = sol.delta[m];
                table.reached[b][k * M + m] = sol.reached[m];
            }
        }
    });
    project_monotone(table);
    return table;
}

void write_delta_csv(std::ostream& out, const DeltaTable& table)
{
    out << "branch,h,t,delta,selection,repair\n";
    char buf[256];
    const std::size_t M = table.time_count();
    for (Branch branch : {Branch::D, Branch::E}) {
        const int b = branch == Branch::D ? 0 : 1;
        for (std::size_t k = 0; k < table.level_count(); ++k) {
            for (std::size_t m = 0; m < M; ++m) {
                std::size_t i = k * M + m;
                double rep = table.repair[b].empty() ? 0.0 : table.repair[b][i];
                std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%s,%.17g\n", to_string(branch), table.levels[k],
                              table.times[m], table.delta[b][i], to_string(table.info[k].selection[b]), rep);
                out << buf;
            }
        }
    }
}

} // namespace levelflow
