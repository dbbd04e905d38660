/**
 * @file fdsolver.hpp
 * @brief Monotone upwind finite differences for u_t + |grad u| f(u, mu({u < u(x)})) = 0.
 *
 * Independent of the representation pipeline; used to cross-check it.
 */
#pragma once

#include "levelflow/dynamics.hpp"

#include <vector>

namespace levelflow {

struct FdHistory {
    std::vector<double> t;
    std::vector<double> sup;
    std::vector<double> inf;
};

struct FdState {
    ScalarField u;
    double t = 0.0;
    double dt = 0.0;
    double cfl = 0.0;
    FdHistory history;
};

/// Picks dt from the requested CFL number: cfl = M dt dim / dx.
FdState fd_init(const ScalarField& u0, const VelocitySpec& vel, double cfl);

/// One forward-Euler step of length dt (<= state.dt). Throws CflViolation if
/// M dt dim / dx exceeds 0.9.
void fd_step(FdState& state, const DensityField& density, const VelocitySpec& vel, double dt);

struct FdRunResult {
    std::vector<double> times;
    std::vector<ScalarField> snapshots;
    FdHistory history;
    std::size_t steps = 0;
    double dt = 0.0;
    double sandwichViolation = 0.0; // max excursion outside [min(u0,hBar), max(u0,hBar)]
};

/// Steps are shortened to land on every snapshot time exactly.
FdRunResult fd_run(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel, double hBar,
                   const std::vector<double>& snapshotTimes, double cfl);

} // namespace levelflow
