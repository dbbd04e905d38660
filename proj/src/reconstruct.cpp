#include "levelflow/reconstruct.hpp"

#include "levelflow/errors.hpp"
#include "levelflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace levelflow {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Tri : std::uint8_t { False, True, Unknown };
} // namespace

BallRule ball_rule(Branch branch, double h, double hBar, double delta)
{
    // D: min over B(x, delta_D) if h > hBar, max over B(x, -delta_D) if h <= hBar.
    // E: min over B(x, delta_E) if h >= hBar, max over B(x, -delta_E) if h < hBar.
    bool minSide = branch == Branch::D ? h > hBar : h >= hBar;
    return {minSide, std::max(minSide ? delta : -delta, 0.0)};
}

SdfCache::SdfCache(const Grid& grid, std::size_t levelCount) : grid_(grid), n_(grid.size()), levels_(levelCount)
{
    data_[0].assign(n_ * levelCount, 0.0f);
    data_[1].assign(n_ * levelCount, 0.0f);
}

void SdfCache::store(std::size_t k, Branch b, const SignedDistanceField& sdf)
{
    require_same_grid(grid_, sdf.grid, "sdf cache: grid differs");
    float* dst = data_[b == Branch::D ? 0 : 1].data() + k * n_;
    for (std::size_t i = 0; i < n_; ++i)
        dst[i] = static_cast<float>(sdf.values[i]);
}

double height_U(const ScalarField& u0, std::size_t cell, double t, std::size_t k, Branch branch,
                const DeltaTable& table)
{
    if (k >= table.level_count())
        throw Error(ErrorCode::OutOfTable, "level index outside the delta table");
    const double h = table.levels[k];
    BallRule rule = ball_rule(branch, h, table.hBar, table.at_time(branch, k, t));
    const Grid& g = u0.grid;
    const double dx = g.dx();
    const int reach = static_cast<int>(std::floor(rule.radius / dx + 1e-9));
    const double r2 = (rule.radius / dx) * (rule.radius / dx) + 1e-9;
    const int ci = g.ix(cell), cj = g.iy(cell);
    const int jlo = g.dim() == 1 ? 0 : std::max(0, cj - reach);
    const int jhi = g.dim() == 1 ? 0 : std::min(g.ny() - 1, cj + reach);
    double best = u0.values[cell];
    for (int j = jlo; j <= jhi; ++j) {
        for (int i = std::max(0, ci - reach); i <= std::min(g.nx() - 1, ci + reach); ++i) {
            double di = i - ci, dj = j - cj;
            if (di * di + dj * dj > r2)
                continue;
            double v = u0.values[g.index(i, j)];
            best = rule.takeMin ? std::min(best, v) : std::max(best, v);
        }
    }
    return best - h;
}

bool height_predicate(const SdfCache& cache, std::size_t cell, std::size_t k, Branch branch, double delta)
{
    double sd = cache.at(branch, k, cell);
    return branch == Branch::D ? sd >= delta : sd <= delta;
}

SolutionSnapshot reconstruct_u(double t, const DeltaTable& table, const SdfCache& cache, const ScalarField& u0)
{
    require_same_grid(u0.grid, cache.grid(), "reconstruct_u: grids differ");
    const std::size_t K = table.level_count();
    if (cache.level_count() != K)
        throw Error(ErrorCode::GridMismatch, "sdf cache and delta table disagree on the level count");
    const auto& lv = table.levels;

    std::vector<double> dD(K), dE(K);
    std::vector<std::uint8_t> rD(K), rE(K);
    std::vector<int> sideD(K), sideE(K);
    for (std::size_t k = 0; k < K; ++k) {
        dD[k] = table.at_time(Branch::D, k, t);
        dE[k] = table.at_time(Branch::E, k, t);
        rD[k] = table.reached_at(Branch::D, k, t);
        rE[k] = table.reached_at(Branch::E, k, t);
        sideD[k] = traversal_side(table.info[k].position, Branch::D);
        sideE[k] = traversal_side(table.info[k].position, Branch::E);
    }

    // Unreached entries only bound delta: |delta| is at least the stored value
    // on the traversed side.
    auto predD = [&](std::size_t k, std::size_t cell) {
        double sd = cache.at(Branch::D, k, cell);
        if (rD[k])
            return sd >= dD[k] ? Tri::True : Tri::False;
        if (sideD[k] > 0)
            return sd < dD[k] ? Tri::False : Tri::Unknown;
        return sd >= dD[k] ? Tri::True : Tri::Unknown;
    };
    auto predE = [&](std::size_t k, std::size_t cell) {
        double sd = cache.at(Branch::E, k, cell);
        if (rE[k])
            return sd <= dE[k] ? Tri::True : Tri::False;
        if (sideE[k] > 0)
            return sd <= dE[k] ? Tri::True : Tri::Unknown;
        return sd > dE[k] ? Tri::False : Tri::Unknown;
    };

    SolutionSnapshot snap;
    snap.t = t;
    snap.uD = ScalarField(u0.grid, kNaN);
    snap.uE = ScalarField(u0.grid, kNaN);
    const std::size_t N = u0.grid.size();
    const std::size_t chunk = 4096;
    const std::size_t chunks = (N + chunk - 1) / chunk;
    std::vector<std::size_t> outOfRange(chunks, 0), undetermined(chunks, 0), inRangeMiss(chunks, 0);
    std::vector<double> disc(chunks, 0.0), viol(chunks, 0.0);

    parallel_for(chunks, [&](std::size_t c) {
        for (std::size_t cell = c * chunk; cell < std::min(N, (c + 1) * chunk); ++cell) {
            bool expectInRange = u0.values[cell] >= lv.front() && u0.values[cell] <= lv.back() &&
                                 table.hBar >= lv.front() && table.hBar <= lv.back();
            bool failed = false;
            bool unknown = false;

            // uD = sup{h : sd^D_h >= delta_D}: last level where the predicate holds.
            std::size_t lo = 0, hi = K; // predicate true below lo, false from hi
            while (lo < hi) {
                std::size_t mid = (lo + hi) / 2;
                if (predD(mid, cell) == Tri::True)
                    lo = mid + 1;
                else
                    hi = mid;
            }
            double valD = kNaN;
            if (lo == 0) {
                if (predD(0, cell) == Tri::Unknown)
                    unknown = true;
                else
                    failed = true;
            } else if (lo == K) {
                // The bounds min(u0,hBar) <= uE <= uD <= max(u0,hBar) pin an edge hit.
                if (std::max(u0.values[cell], table.hBar) <= lv.back())
                    valD = lv.back();
                else
                    failed = true;
            } else if (predD(lo, cell) != Tri::False) {
                unknown = true;
            } else {
                std::size_t k = lo - 1;
                double phiPlus = cache.at(Branch::E, k, cell) - dE[k];
                if (phiPlus < 0.0) {
                    valD = lv[k];
                } else {
                    double phiNext = cache.at(Branch::D, k + 1, cell) - dD[k + 1];
                    valD = lv[k] + (lv[k + 1] - lv[k]) * phiPlus / (phiPlus - phiNext);
                }
            }

            // uE = inf{h : sd^E_h <= delta_E}: first level where the predicate holds.
            lo = 0;
            hi = K;
            while (lo < hi) {
                std::size_t mid = (lo + hi) / 2;
                if (predE(mid, cell) == Tri::True)
                    hi = mid;
                else
                    lo = mid + 1;
            }
            double valE = kNaN;
            if (lo == K) {
                if (predE(K - 1, cell) == Tri::Unknown)
                    unknown = true;
                else
                    failed = true;
            } else if (lo == 0) {
                if (std::min(u0.values[cell], table.hBar) >= lv.front())
                    valE = lv.front();
                else
                    failed = true;
            } else if (predE(lo - 1, cell) != Tri::False) {
                unknown = true;
            } else {
                std::size_t k = lo;
                double psiMinus = cache.at(Branch::D, k, cell) - dD[k];
                if (psiMinus > 0.0) {
                    valE = lv[k];
                } else {
                    double psiPrev = cache.at(Branch::E, k - 1, cell) - dE[k - 1];
                    valE = lv[k - 1] + (lv[k] - lv[k - 1]) * psiPrev / (psiPrev - psiMinus);
                }
            }

            if (failed) {
                ++outOfRange[c];
                if (expectInRange && !unknown)
                    ++inRangeMiss[c];
                continue;
            }
            if (unknown) {
                ++undetermined[c];
                continue;
            }
            snap.uD.values[cell] = valD;
            snap.uE.values[cell] = valE;
            disc[c] = std::max(disc[c], std::abs(valD - valE));
            double lower = std::min(u0.values[cell], table.hBar);
            double upper = std::max(u0.values[cell], table.hBar);
            viol[c] = std::max({viol[c], lower - valE, valD - upper, valE - valD});
        }
    });

    std::size_t miss = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        snap.outOfRange += outOfRange[c];
        snap.undetermined += undetermined[c];
        snap.discrepancy = std::max(snap.discrepancy, disc[c]);
        snap.boundsViolation = std::max(snap.boundsViolation, viol[c]);
        miss += inRangeMiss[c];
    }
    if (miss > 0)
        throw Error(ErrorCode::LevelRangeExhausted, std::to_string(miss) +
                                                        " cells ran off the level table at t=" + std::to_string(t) +
                                                        "; widen the level range");
    return snap;
}

ConsistencyReport level_set_consistency(double t, std::size_t k, const SolutionSnapshot& snap,
                                        const DeltaTable& table, const SdfCache& cache, const DensityField& density)
{
    require_same_grid(snap.uD.grid, density.grid, "level_set_consistency: grids differ");
    const double h = table.levels[k];
    const double dD = table.at_time(Branch::D, k, t);
    const double dE = table.at_time(Branch::E, k, t);
    ConsistencyReport r;
    for (std::size_t i = 0; i < snap.uD.values.size(); ++i) {
        double uD = snap.uD.values[i], uE = snap.uE.values[i];
        if (std::isnan(uD) || std::isnan(uE))
            continue;
        bool inD = uD < h;
        bool parD = cache.at(Branch::D, k, i) < dD;
        if (inD != parD) {
            ++r.cellsD;
            r.massD += density.weight[i];
        }
        bool inE = uE <= h;
        bool parE = cache.at(Branch::E, k, i) <= dE;
        if (inE != parE) {
            ++r.cellsE;
            r.massE += density.weight[i];
        }
    }
    return r;
}

std::vector<double> make_levels(double lower, double upper, int count, double hBar, const std::vector<double>& probes)
{
    if (count < 2 || !(upper > lower))
        throw Error(ErrorCode::ConfigInvalid, "level grid needs count >= 2 and upper > lower");
    const double spacing = (upper - lower) / (count - 1);
    std::vector<double> extra;
    for (double e : probes)
        if (e >= lower && e <= upper)
            extra.push_back(e);
    if (hBar >= lower && hBar <= upper)
        extra.push_back(hBar);
    std::vector<double> out;
    for (int i = 0; i < count; ++i) {
        double h = i == count - 1 ? upper : lower + i * spacing;
        bool clash = std::any_of(extra.begin(), extra.end(),
                                 [&](double e) { return std::abs(e - h) <= 1e-9 * spacing; });
        if (!clash)
            out.push_back(h);
    }
    out.insert(out.end(), extra.begin(), extra.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> uniform_times(double horizon, double step)
{
    if (!(horizon >= 0.0) || !(step > 0.0))
        throw Error(ErrorCode::ConfigInvalid, "time grid needs horizon >= 0 and step > 0");
    std::vector<double> t{0.0};
    for (long m = 1;; ++m) {
        double v = m * step;
        if (v >= horizon * (1.0 - 1e-12))
            break;
        t.push_back(v);
    }
    if (horizon > 0.0)
        t.push_back(horizon);
    return t;
}

RepresentationResult run_representation(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel,
                                        const RepresentationOptions& opts)
{
    if (opts.levels.size() < 2)
        throw Error(ErrorCode::ConfigInvalid, "representation needs at least two levels");
    RepresentationResult res;
    double rLo = std::min(opts.levels.front(), u0.min());
    double rHi = std::max(opts.levels.back(), u0.max());
    res.audit = verify_velocity(vel, rLo, rHi, density.totalMass);
    res.threshold = find_threshold(u0, density, vel, opts.thresholdTol, MassModel::Subcell, opts.tauLvl);
    const double hBar = res.threshold.hBar;

    std::vector<double> levels = opts.levels;
    if (hBar > levels.front() && hBar < levels.back()) {
        double spacing = (levels.back() - levels.front()) / static_cast<double>(levels.size() - 1);
        std::erase_if(levels, [&](double h) { return std::abs(h - hBar) <= 1e-9 * spacing; });
        levels.push_back(hBar);
        std::sort(levels.begin(), levels.end());
    }

    std::vector<double> times = opts.times.empty() ? std::vector<double>{0.0} : opts.times;
    for (double s : opts.snapshots)
        if (s >= 0.0)
            times.push_back(s);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    res.cache = SdfCache(u0.grid, levels.size());
    DeltaTableOptions topts;
    topts.horizon = std::max(opts.horizon, times.back());
    topts.allowTruncation = opts.allowTruncation;
    topts.tauLvl = opts.tauLvl;
    res.table = build_delta_table(u0, density, vel, hBar, levels, times, topts,
                                  [&](std::size_t k, Branch b, const SignedDistanceField& sdf) {
                                      res.cache.store(k, b, sdf);
                                  });
    for (double s : opts.snapshots)
        res.snapshots.push_back(reconstruct_u(s, res.table, res.cache, u0));
    return res;
}

ComparisonReport comparison_check(const ScalarField& u0Low, const ScalarField& u0High, const DensityField& density,
                                  const VelocitySpec& vel, const RepresentationOptions& opts, double t)
{
    require_same_grid(u0Low.grid, u0High.grid, "comparison_check: grids differ");
    RepresentationOptions o = opts;
    o.snapshots = {t};
    RepresentationResult low = run_representation(u0Low, density, vel, o);
    RepresentationResult high = run_representation(u0High, density, vel, o);
    const SolutionSnapshot& a = low.snapshots.front();
    const SolutionSnapshot& b = high.snapshots.front();
    ComparisonReport r;
    for (std::size_t i = 0; i < u0Low.values.size(); ++i) {
        double pairs[2][2] = {{a.uD.values[i], b.uD.values[i]}, {a.uE.values[i], b.uE.values[i]}};
        bool counted = false;
        for (auto& p : pairs) {
            if (std::isnan(p[0]) || std::isnan(p[1]))
                continue;
            r.maxViolation = std::max(r.maxViolation, p[0] - p[1]);
            counted = true;
        }
        if (counted)
            ++r.comparedCells;
    }
    return r;
}

} // namespace levelflow
