#pragma once

// Every numerical tolerance and convention used by the pipeline. The manifest
// writer dumps this table, so a new constant must also be added there.

namespace levelflow::tol {

// geometry
inline constexpr double kClassifyFactor = 1e-9;      // tau_cls = factor * dx
inline constexpr double kLevelSnapFactor = 1e-12;    // tau_lvl = factor * level range (opt-in)

// s-grid for speed curves
inline constexpr double kSMinFactor = 0.25;          // s_min = factor * dx
inline constexpr double kSRatio = 1.15;              // geometric ratio rho
inline constexpr double kSMaxStepFactor = 2.0;       // spacing cap = factor * dx

// speed curves
inline constexpr double kRearrangeFactor = 1e-12;    // silent rearrangement below factor * M
inline constexpr double kDescentAbortFactor = 4.0;   // abort above factor * Lip_f * Theta_max * Per * dx
inline constexpr double kZeroSpeedFactor = 1e-9;     // |g(0)| <= factor * M counts as zero

// travel time
inline constexpr double kDivergenceFactor = 1e6;     // T > factor / M is infinite
inline constexpr double kRatioTest = 0.999;          // tail ratio at or above this diverges

// delta table repair
inline constexpr double kRepairLogFactor = 2.0;      // repairs above factor * dx are warnings
inline constexpr double kRepairAbortFactor = 5.0;    // repairs above factor * dx abort

// threshold bisection
inline constexpr double kThresholdTol = 1e-10;

// velocity verification
inline constexpr double kMonotoneEpsFactor = 1e-6;   // eps = factor * massScale
inline constexpr int kMonotoneLatticeR = 33;
inline constexpr int kMonotoneLatticeQ = 65;

// finite differences
inline constexpr double kCflMax = 0.9;
inline constexpr double kCflDefault = 0.8;
inline constexpr double kSandwichFactor = 2.0;       // eps_grid = factor * dx * M per unit time

// critical classification
inline constexpr double kFitLoFactor = 0.5;          // fit window [lo*dx, hi*dx]
inline constexpr double kFitHiFactor = 32.0;
inline constexpr double kFitEps = 0.1;
inline constexpr int kFitMinSamples = 6;
inline constexpr double kFitMaxRms = 0.25;           // rms residual gate in log space

// fattening report
inline constexpr double kRegularGapFactor = 2.0;     // initial sd gap <= factor * dx is regular
inline constexpr double kRegularMassFactor = 2.0;    // mass gap <= factor * dx * Theta_max * Per
inline constexpr double kGapAbort = 1e-9;            // gap(t) decrease tolerance

// analysis
inline constexpr double kKruskalRadiusRatio = 0.125; // r_k = ratio * l_k
inline constexpr double kTransientFraction = 0.5;    // tail starts when e < fraction * e(0)
inline constexpr int kAsymptoticMinSamples = 6;
inline constexpr double kSteinerConvexExcess = 0.02;

} // namespace levelflow::tol
