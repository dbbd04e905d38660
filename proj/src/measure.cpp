#include "levelflow/measure.hpp"

#include "levelflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace levelflow {

// ---------------------------------------------------------------------------
// ExactSum
// ---------------------------------------------------------------------------

void ExactSum::add(double x)
{
    std::size_t i = 0;
    for (double y : partials_) {
        if (std::abs(x) < std::abs(y))
            std::swap(x, y);
        double hi = x + y;
        double lo = y - (hi - x);
        if (lo != 0.0)
            partials_[i++] = lo;
        x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
}

double ExactSum::value() const
{
    std::size_t n = partials_.size();
    if (n == 0)
        return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
        double x = hi;
        double y = partials_[--n];
        hi = x + y;
        double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0)
            break;
    }
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
        double y = lo * 2.0;
        double x = hi + y;
        double yr = x - hi;
        if (y == yr)
            hi = x;
    }
    return hi;
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

DensityField make_density(const Grid& g, std::vector<double> theta, double tailBound, std::string name)
{
    if (theta.size() != g.size())
        throw Error(ErrorCode::GridMismatch, "density size does not match grid");
    DensityField d;
    d.grid = g;
    d.name = std::move(name);
    d.tailBound = tailBound;
    d.weight.resize(theta.size());
    ExactSum total;
    const double vol = g.cell_volume();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!(theta[i] > 0.0) || !std::isfinite(theta[i]))
            throw Error(ErrorCode::ConfigInvalid, "density must be positive and finite at every cell");
        d.weight[i] = theta[i] * vol;
        d.thetaMax = std::max(d.thetaMax, theta[i]);
        total.add(d.weight[i]);
    }
    d.theta = std::move(theta);
    d.totalMass = total.value();
    return d;
}

DensityField lebesgue_density(const Grid& g)
{
    return make_density(g, std::vector<double>(g.size(), 1.0), 0.0, "lebesgue");
}

namespace {
// Distance from the origin to the nearest grid edge (0 if the origin is outside).
double inner_radius(const Grid& g)
{
    double r = std::numeric_limits<double>::infinity();
    auto up = g.upper();
    for (int a = 0; a < g.dim(); ++a) {
        double lo = g.origin()[a];
        if (lo > 0.0 || up[a] < 0.0)
            return 0.0;
        r = std::min({r, -lo, up[a]});
    }
    return r;
}
} // namespace

DensityField cauchy2d_density(const Grid& g)
{
    if (g.dim() != 2)
        throw Error(ErrorCode::ConfigInvalid, "cauchy2d density needs a 2D grid");
    // Theta = 1 / (pi |x| (1 + |x|)^2), so that mu(B_rho) = 2 rho / (rho + 1).
    auto theta = [](double x, double y) {
        double r = std::hypot(x, y);
        return 1.0 / (std::numbers::pi * r * (1.0 + r) * (1.0 + r));
    };
    const double dx = g.dx();
    std::vector<double> values(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto p = g.point(i);
        double r = std::hypot(p[0], p[1]);
        if (r >= 32.0 * dx) {
            values[i] = theta(p[0], p[1]);
            continue;
        }
        // Cell average near the integrable singularity at the origin.
        const int kSub = r < 4.0 * dx ? 64 : 16;
        double sum = 0.0;
        for (int a = 0; a < kSub; ++a)
            for (int b = 0; b < kSub; ++b)
                sum += theta(p[0] + ((a + 0.5) / kSub - 0.5) * dx, p[1] + ((b + 0.5) / kSub - 0.5) * dx);
        values[i] = sum / (kSub * kSub);
    }
    // mu(R^2 \ B_R) = 2 / (R + 1)
    return make_density(g, std::move(values), 2.0 / (inner_radius(g) + 1.0), "cauchy2d");
}

DensityField gaussian_density(const Grid& g, double sigma)
{
    if (!(sigma > 0.0))
        throw Error(ErrorCode::ConfigInvalid, "gaussian density needs sigma > 0");
    std::vector<double> theta(g.size());
    double norm = g.dim() == 1 ? 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi))
                               : 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto p = g.point(i);
        double r2 = p[0] * p[0] + p[1] * p[1];
        theta[i] = norm * std::exp(-r2 / (2.0 * sigma * sigma));
    }
    double R = inner_radius(g);
    double tail = g.dim() == 1 ? std::erfc(R / (sigma * std::sqrt(2.0))) : std::exp(-R * R / (2.0 * sigma * sigma));
    return make_density(g, std::move(theta), tail, "gaussian");
}

DensityField table_density(const ScalarField& theta, double tailBound)
{
    return make_density(theta.grid, theta.values, tailBound, "table");
}

// ---------------------------------------------------------------------------
// Measures
// ---------------------------------------------------------------------------

double mu(const BinarySet& set, const DensityField& density)
{
    require_same_grid(set.grid, density.grid, "mu: set and density grids differ");
    ExactSum sum;
    for (std::size_t i = 0; i < set.member.size(); ++i)
        if (set.member[i])
            sum.add(density.weight[i]);
    return sum.value();
}

double mu_corrected(const SignedDistanceField& sdf, const DensityField& density, double s)
{
    require_same_grid(sdf.grid, density.grid, "mu_corrected: field and density grids differ");
    const double dx = sdf.grid.dx();
    double sum = 0.0;
    for (std::size_t i = 0; i < sdf.values.size(); ++i) {
        double frac = std::clamp(0.5 + (s - sdf.calibrated(i)) / dx, 0.0, 1.0);
        sum += frac * density.weight[i];
    }
    return sum;
}

ParallelMassProfile::ParallelMassProfile(const SignedDistanceField& sdf, const DensityField& density)
{
    require_same_grid(sdf.grid, density.grid, "mass profile: field and density grids differ");
    dx_ = sdf.grid.dx();
    const std::size_t n = sdf.values.size();
    std::vector<std::pair<double, double>> items(n);
    for (std::size_t i = 0; i < n; ++i)
        items[i] = {sdf.calibrated(i), density.weight[i]};
    std::sort(items.begin(), items.end());
    sd_.resize(n);
    pw_.assign(n + 1, 0.0);
    pwsd_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sd_[i] = items[i].first;
        pw_[i + 1] = pw_[i] + items[i].second;
        double v = std::isfinite(items[i].first) ? items[i].second * items[i].first : 0.0;
        pwsd_[i + 1] = pwsd_[i] + v;
    }
    total_ = pw_[n];
}

double ParallelMassProfile::mass(double s) const
{
    if (sd_.empty())
        return 0.0;
    const double half = 0.5 * dx_;
    std::size_t lo = std::lower_bound(sd_.begin(), sd_.end(), s - half) - sd_.begin();
    std::size_t hi = std::lower_bound(sd_.begin() + lo, sd_.end(), s + half) - sd_.begin();
    double band = pw_[hi] - pw_[lo];
    double bandSd = pwsd_[hi] - pwsd_[lo];
    double m = pw_[lo] + (0.5 + s / dx_) * band - bandSd / dx_;
    return std::clamp(m, pw_[lo], pw_[hi]);
}

double mu_sublevel_subcell(const ScalarField& u0, const DensityField& density, double h, Closure closure,
                           double tauLvl)
{
    require_same_grid(u0.grid, density.grid, "mu_sublevel_subcell: grids differ");
    InterfaceBand band = sublevel_interface_band(u0, h, closure, tauLvl);
    const double dx = u0.grid.dx();
    std::vector<std::uint8_t> inBand(u0.grid.size(), 0);
    double sum = 0.0;
    for (std::size_t k = 0; k < band.nodes.size(); ++k) {
        std::size_t i = band.nodes[k];
        inBand[i] = 1;
        sum += std::clamp(0.5 - band.sd[k] / dx, 0.0, 1.0) * density.weight[i];
    }
    for (std::size_t i = 0; i < u0.grid.size(); ++i)
        if (band.member[i] && !inBand[i])
            sum += density.weight[i];
    return sum;
}

// ---------------------------------------------------------------------------
// LevelMeasureProfile
// ---------------------------------------------------------------------------

LevelMeasureProfile::LevelMeasureProfile(const ScalarField& field, const DensityField& density)
{
    require_same_grid(field.grid, density.grid, "level_measure_profile: grids differ");
    const std::size_t n = field.values.size();
    // Sorting (value, index) pairs keeps the comparisons cache friendly.
    std::vector<std::pair<double, std::size_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i)
        keyed[i] = {field.values[i], i};
    std::sort(keyed.begin(), keyed.end());
    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        order_[i] = keyed[i].second;
    groupOf_.resize(n);
    ExactSum running;
    std::size_t pos = 0;
    while (pos < n) {
        double v = field.values[order_[pos]];
        strict_.push_back(running.value());
        levels_.push_back(v);
        std::size_t g = levels_.size() - 1;
        while (pos < n && field.values[order_[pos]] == v) {
            running.add(density.weight[order_[pos]]);
            groupOf_[pos] = g;
            ++pos;
        }
        closed_.push_back(running.value());
    }
}

double LevelMeasureProfile::strict_mass(double h) const
{
    std::size_t k = std::lower_bound(levels_.begin(), levels_.end(), h) - levels_.begin();
    return k == 0 ? 0.0 : closed_[k - 1];
}

double LevelMeasureProfile::closed_mass(double h) const
{
    std::size_t k = std::upper_bound(levels_.begin(), levels_.end(), h) - levels_.begin();
    return k == 0 ? 0.0 : closed_[k - 1];
}

std::vector<double> LevelMeasureProfile::per_cell_strict_mass() const
{
    std::vector<double> out(order_.size());
    for (std::size_t pos = 0; pos < order_.size(); ++pos)
        out[order_[pos]] = strict_[groupOf_[pos]];
    return out;
}

} // namespace levelflow
