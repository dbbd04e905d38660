/**
 * @file analysis.hpp
 * @brief Fattening diagnostics, critical-level classification, decay rates,
 *        closed-form references and the Kruskal-type fractal set.
 */
#pragma once

#include "levelflow/reconstruct.hpp"

#include <string>
#include <vector>

namespace levelflow {

struct PowerFit {
    double exponent = 0.0; // slope of log y against log x
    double constant = 0.0; // y ~ constant * x^exponent
    double rms = 0.0;      // rms residual in log space
    int samples = 0;
};

/// Least squares in log-log space over the samples with x > 0 and y > 0.
PowerFit fit_power(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Fattening
// ---------------------------------------------------------------------------

enum class InitialRegularity {
    ClosureMatches,  // cl D_h(0) = E_h(0) up to the grid: no fattening expected
    StrictInclusion, // E_h(0) is strictly larger than cl D_h(0)
};
const char* to_string(InitialRegularity r);

struct LevelFattening {
    double h = 0.0;
    InitialRegularity regularity = InitialRegularity::ClosureMatches;
    double initialSdGap = 0.0;    // max sd^D over E_h(0) \ D_h(0)
    double initialMassGap = 0.0;  // mu(E_h(0) \ D_h(0))
    double interiorMassGap = 0.0; // mu(int E_h(0) \ D_h(0)), cells deeper than dx in E
    std::vector<double> gap;       // delta_E - delta_D per table time
    std::vector<double> thickness; // mu(E_h(delta_E) \ D_h(delta_D)) per table time
    double maxGap = 0.0;
    double maxGapDecrease = 0.0;
    bool fattens = false;          // gap > 0 at every positive time
};

struct FatteningReport {
    std::vector<double> times;
    std::vector<LevelFattening> levels;
    std::size_t fatteningLevels = 0;
};

/// Throws MonotonicityViolation if the gap of a strict-inclusion level
/// decreases by more than 1e-9.
FatteningReport fattening_report(const DeltaTable& table, const SdfCache& cache, const DensityField& density);

// ---------------------------------------------------------------------------
// Critical level
// ---------------------------------------------------------------------------

enum class CriticalRegime { InstantDeparture, PinnedAtZero, StrictlySigned, Withheld };
const char* to_string(CriticalRegime r);

struct CriticalSide {
    Branch branch = Branch::D;
    double g0 = 0.0;
    PowerFit fit;                // |g| against |s| on [dx/2, 32 dx]
    bool travelConverges = false;
    CriticalRegime regime = CriticalRegime::Withheld;
    std::string reason;
};

struct CriticalClassification {
    double hBar = 0.0;
    CriticalSide sideD;
    CriticalSide sideE;
    PowerFit perimeterFit;       // Per(E(s)) against s; exponent is -sigma
    double sigmaHat = 0.0;
};

CriticalClassification classify_critical(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel,
                                         double hBar);

/// Length of {sd = s} against s on [sLo, sHi] (geometric samples).
PowerFit perimeter_power_fit(const SignedDistanceField& sdf, double sLo, double sHi, int samples = 16);

// ---------------------------------------------------------------------------
// Kruskal-type set
// ---------------------------------------------------------------------------

/// Balls of radius r_k = l_k / 8 centred in the 8^k squares of side l_k = 4^-k
/// tiling the strip [2 - 2^(1-k), 2 - 2^-k] x [0, 1], k <= depth, plus the
/// ball of radius 1/28 around (-1, 0). Throws ResolutionTooCoarse when
/// depth > 6 or dx > l_depth / 4.
BinarySet build_kruskal_set(int depth, const Grid& grid);
bool kruskal_contains(int depth, double x, double y);
/// Bounding box [lower, upper] of the construction, widened by margin.
void kruskal_box(double margin, std::array<double, 2>& lower, std::array<double, 2>& upper);

// ---------------------------------------------------------------------------
// Large time
// ---------------------------------------------------------------------------

struct DecayWindow {
    std::string name;
    BinarySet mask;
};

struct WindowRate {
    std::string name;
    double lambda = 0.0;
    int samples = 0;
    bool fitted = false;
};

struct AsymptoticsReport {
    std::vector<double> times;
    std::vector<double> error;    // e(t) = sup_K |u - hBar|
    double floor = 0.0;
    double transientEnd = 0.0;
    double lambda = 0.0;
    double constant = 0.0;
    int fitSamples = 0;
    bool fitted = false;
    bool stabilized = false;      // Type I: e reached the floor
    double stabilizationTime = 0.0;
    std::vector<WindowRate> windows;
};

/// fields[i] is u at times[i]; NaN cells inside K are skipped. Throws
/// TailTooShort when e never reaches the floor and fewer than 6 tail samples remain.
AsymptoticsReport asymptotics(const std::vector<double>& times, const std::vector<ScalarField>& fields, double hBar,
                              const BinarySet& window, double floor,
                              const std::vector<DecayWindow>& nested = {});

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

struct DeltaPair {
    double dD = 0.0;
    double dE = 0.0;
};

/// 1D example u0 = min(|x+1|+1, |x-2|), f = q - 1, Lebesgue measure. Valid for
/// 0 < h < 2 while the parallel sets keep their topology.
DeltaPair oracle_partial_fattening(double t, double h);

/// Radial example, v0 = identity: root of e^r (r-1)^2 = (r0-1)^2 e^(r0-t) on
/// the monotone branch containing r0 >= 0.
double oracle_radial_decay(double r0, double t, double* residual = nullptr);

// ---------------------------------------------------------------------------
// Initial regularity
// ---------------------------------------------------------------------------

struct RegInitialResult {
    double a = 0.0;      // largest a with f(h,mu(E_h(s))) - f(h,mu(E_h(0))) >= a s on the lattice
    double argH = 0.0;
    double argS = 0.0;
    int samples = 0;
};

RegInitialResult check_reg_initial(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel,
                                   double hBar, double b, int levelSamples = 11, int radiusSamples = 20);

} // namespace levelflow
