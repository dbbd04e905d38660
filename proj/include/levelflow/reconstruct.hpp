/**
 * @file reconstruct.hpp
 * @brief Value functions U_D, U_E and the solutions u_D, u_E recovered from
 *        the delta table and per-level signed distances.
 */
#pragma once

#include "levelflow/delta.hpp"

#include <cstdint>
#include <vector>

namespace levelflow {

/// The four-case convention for U: which extremum over which ball radius.
struct BallRule {
    bool takeMin = true; // min of u0 - h over the ball (else max)
    double radius = 0.0; // |delta|, >= 0
};
BallRule ball_rule(Branch branch, double h, double hBar, double delta);

/// Per-level sub-cell signed distances, stored in single precision.
class SdfCache {
public:
    SdfCache() = default;
    SdfCache(const Grid& grid, std::size_t levelCount);

    void store(std::size_t k, Branch b, const SignedDistanceField& sdf);
    float at(Branch b, std::size_t k, std::size_t cell) const
    {
        return data_[b == Branch::D ? 0 : 1][k * n_ + cell];
    }
    const Grid& grid() const { return grid_; }
    std::size_t level_count() const { return levels_; }
    std::size_t bytes() const { return 2 * data_[0].size() * sizeof(float); }

private:
    Grid grid_;
    std::size_t n_ = 0;
    std::size_t levels_ = 0;
    std::vector<float> data_[2];
};

/// Direct form of U: extremum of u0 - h over the discrete ball |y - x| <= |delta(t, h_k)|.
double height_U(const ScalarField& u0, std::size_t cell, double t, std::size_t k, Branch branch,
                const DeltaTable& table);

/// Sign test of U through the cached distances: U_D >= 0 iff sd^D >= delta_D,
/// U_E <= 0 iff sd^E <= delta_E.
bool height_predicate(const SdfCache& cache, std::size_t cell, std::size_t k, Branch branch, double delta);

struct SolutionSnapshot {
    double t = 0.0;
    ScalarField uD;
    ScalarField uE;
    double discrepancy = 0.0;      // sup |uD - uE| over determined cells
    std::size_t outOfRange = 0;    // cells whose value lies beyond the level range (NaN)
    std::size_t undetermined = 0;  // cells decided by truncated table entries (NaN)
    double boundsViolation = 0.0;  // largest excursion outside [min(u0,hBar), max(u0,hBar)]
};

/// Throws LevelRangeExhausted if a cell with u0 and hBar inside the level range
/// still runs off the table.
SolutionSnapshot reconstruct_u(double t, const DeltaTable& table, const SdfCache& cache, const ScalarField& u0);

struct ConsistencyReport {
    std::size_t cellsD = 0;
    std::size_t cellsE = 0;
    double massD = 0.0;
    double massE = 0.0;
};

/// Symmetric differences {uD < h_k} vs D_h(delta_D) and {uE <= h_k} vs E_h(delta_E).
ConsistencyReport level_set_consistency(double t, std::size_t k, const SolutionSnapshot& snap, const DeltaTable& table,
                                        const SdfCache& cache, const DensityField& density);

/// Uniform levels on [lower, upper] merged with hBar and probe levels. Any
/// uniform level within 1e-9 spacing of an inserted level is dropped.
std::vector<double> make_levels(double lower, double upper, int count, double hBar, const std::vector<double>& probes);

struct RepresentationOptions {
    std::vector<double> levels;   // explicit levels, hBar is merged in
    std::vector<double> times;    // table time grid (starts at 0)
    std::vector<double> snapshots;
    double horizon = 1.0;
    bool allowTruncation = false;
    double thresholdTol = 1e-10;
    double tauLvl = 0.0;
};

struct RepresentationResult {
    ThresholdResult threshold;
    VelocityAudit audit;
    DeltaTable table;
    SdfCache cache;
    std::vector<SolutionSnapshot> snapshots;
};

/// Threshold, delta table, sdf cache and snapshots in one call.
RepresentationResult run_representation(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel,
                                        const RepresentationOptions& opts);

/// Uniform time grid 0, step, ..., horizon (last step shortened).
std::vector<double> uniform_times(double horizon, double step);

struct ComparisonReport {
    double maxViolation = 0.0; // max over cells of uLow - uHigh (both branches)
    std::size_t comparedCells = 0;
};

ComparisonReport comparison_check(const ScalarField& u0Low, const ScalarField& u0High, const DensityField& density,
                                  const VelocitySpec& vel, const RepresentationOptions& opts, double t);

} // namespace levelflow
