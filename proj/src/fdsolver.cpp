#include "levelflow/fdsolver.hpp"

#include "levelflow/errors.hpp"
#include "levelflow/parallel.hpp"
#include "levelflow/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace levelflow {

namespace {

void record(FdState& s)
{
    s.history.t.push_back(s.t);
    s.history.sup.push_back(s.u.max());
    s.history.inf.push_back(s.u.min());
}

double cfl_number(const Grid& g, double M, double dt) { return M * dt * g.dim() / g.dx(); }

} // namespace

FdState fd_init(const ScalarField& u0, const VelocitySpec& vel, double cfl)
{
    if (!(cfl > 0.0) || cfl > tol::kCflMax)
        throw Error(ErrorCode::CflViolation, "requested CFL number " + std::to_string(cfl) + " outside (0, 0.9]");
    FdState s;
    s.u = u0;
    s.cfl = cfl;
    const double M = vel.bound();
    s.dt = M > 0.0 ? cfl * u0.grid.dx() / (M * u0.grid.dim()) : std::numeric_limits<double>::infinity();
    record(s);
    return s;
}

void fd_step(FdState& state, const DensityField& density, const VelocitySpec& vel, double dt)
{
    const Grid& g = state.u.grid;
    require_same_grid(g, density.grid, "fd_step: grids differ");
    if (cfl_number(g, vel.bound(), dt) > tol::kCflMax * (1.0 + 1e-12))
        throw Error(ErrorCode::CflViolation, "step violates the CFL bound");

    LevelMeasureProfile profile(state.u, density);
    const std::vector<double> mass = profile.per_cell_strict_mass();
    const std::vector<double>& u = state.u.values;
    std::vector<double> next(u.size());
    const double inv = 1.0 / g.dx();
    const int nx = g.nx(), ny = g.ny();
    const bool twoD = g.dim() == 2;

    parallel_for(static_cast<std::size_t>(ny), [&](std::size_t jj) {
        const int j = static_cast<int>(jj);
        for (int i = 0; i < nx; ++i) {
            const std::size_t c = g.index(i, j);
            const double v = u[c];
            const double speed = vel(v, mass[c]);
            if (speed == 0.0) {
                next[c] = v;
                continue;
            }
            // Missing neighbours across the frame contribute a zero difference.
            double dxm = i > 0 ? (v - u[c - 1]) * inv : 0.0;
            double dxp = i + 1 < nx ? (u[c + 1] - v) * inv : 0.0;
            double dym = 0.0, dyp = 0.0;
            if (twoD) {
                dym = j > 0 ? (v - u[c - nx]) * inv : 0.0;
                dyp = j + 1 < ny ? (u[c + nx] - v) * inv : 0.0;
            }
            double g2;
            if (speed > 0.0) {
                double a = std::max(dxm, 0.0), b = std::min(dxp, 0.0);
                double cc = std::max(dym, 0.0), d = std::min(dyp, 0.0);
                g2 = a * a + b * b + cc * cc + d * d;
            } else {
                double a = std::min(dxm, 0.0), b = std::max(dxp, 0.0);
                double cc = std::min(dym, 0.0), d = std::max(dyp, 0.0);
                g2 = a * a + b * b + cc * cc + d * d;
            }
            next[c] = v - dt * speed * std::sqrt(g2);
        }
    });
    state.u.values = std::move(next);
    state.t += dt;
    record(state);
}

FdRunResult fd_run(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel, double hBar,
                   const std::vector<double>& snapshotTimes, double cfl)
{
    std::vector<double> targets = snapshotTimes;
    std::sort(targets.begin(), targets.end());
    if (!targets.empty() && targets.front() < 0.0)
        throw Error(ErrorCode::ConfigInvalid, "snapshot times must be nonnegative");

    FdState state = fd_init(u0, vel, cfl);
    FdRunResult res;
    res.dt = state.dt;
    auto sandwich = [&](const ScalarField& u) {
        double worst = 0.0;
        for (std::size_t i = 0; i < u.values.size(); ++i) {
            double lo = std::min(u0.values[i], hBar), hi = std::max(u0.values[i], hBar);
            worst = std::max({worst, lo - u.values[i], u.values[i] - hi});
        }
        return worst;
    };
    for (double target : targets) {
        while (state.t < target) {
            double dt = std::min(state.dt, target - state.t);
            // Avoid a sliver step right before the target.
            if (target - state.t - dt < 1e-12 * std::max(1.0, target))
                dt = target - state.t;
            fd_step(state, density, vel, dt);
            if (state.t > target - 1e-12 * std::max(1.0, target))
                state.t = target;
            ++res.steps;
            res.sandwichViolation = std::max(res.sandwichViolation, sandwich(state.u));
        }
        res.times.push_back(target);
        res.snapshots.push_back(state.u);
    }
    res.history = std::move(state.history);
    return res;
}

} // namespace levelflow
