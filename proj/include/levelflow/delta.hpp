/**
 * @file delta.hpp
 * @brief Displacement ODE delta' = g_h(delta), delta(0) = 0, solved per level by
 *        travel-time quadrature, and the (branch x level x time) table.
 */
#pragma once

#include "levelflow/dynamics.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace levelflow {

/// Travel time along one side of a speed curve, in mirrored coordinates:
/// sigma = side * (s - origin) >= 0 and G(sigma) = side * g(s) >= 0.
struct TravelTime {
    int side = 1;
    double origin = 0.0;
    std::vector<double> sigma; // sigma[0] = 0, ascending
    std::vector<double> G;
    std::vector<double> T;     // T[0] = 0, nondecreasing, +inf once divergent
    double G0 = 0.0;           // after snapping |G0| <= 1e-9 M to 0
    bool degenerate = false;   // G0 == 0
    bool divergent = false;    // T = +inf for every sigma > 0
    double tailRatio = 0.0;    // inner/outer contribution ratio near 0 (degenerate only)
    double tailExponent = 1.0; // beta = 1 - alpha of G ~ C sigma^alpha near 0

    double reach() const { return sigma.back(); }
    double reach_time() const { return T.back(); }
    /// Inverse of T, piecewise linear (power law inside the first interval of
    /// a convergent degenerate curve). Clamped to reach() beyond reach_time().
    double sigma_at(double t) const;
};

/// Throws SignChange when G(0) < 0, i.e. the curve pushes the other way.
TravelTime travel_time(const SpeedCurve& curve, int side, double speedBound);

enum class LevelPosition { Below, Critical, Above };
enum class Selection { Regular, MinimalAtCritical, MaximalAtCritical };
enum class Departure {
    Moving,  // g(0) != 0, regular integration
    Instant, // g(0) = 0 with integrable 1/g: extremal solution leaves 0 at once
    Pinned,  // g(0) = 0 and the extremal solution stays at 0
};

const char* to_string(LevelPosition p);
const char* to_string(Selection s);
const char* to_string(Departure d);

LevelPosition level_position(double h, double hBar);
/// +1 when the branch's solution lives on s >= 0, -1 otherwise.
int traversal_side(LevelPosition pos, Branch branch);

struct LevelSolution {
    std::vector<double> delta;          // one value per time
    std::vector<std::uint8_t> reached;  // 0 where the sampled range ran out first
    Selection selection = Selection::Regular;
    Departure departure = Departure::Moving;
    double reachTime = 0.0;             // time at which the sampled range ends
    bool truncated = false;
    TravelTime travel;
};

LevelSolution solve_delta(const SpeedCurve& curve, LevelPosition pos, const std::vector<double>& times,
                          double speedBound);

struct LevelInfo {
    double h = 0.0;
    LevelPosition position = LevelPosition::Below;
    Selection selection[2] = {Selection::Regular, Selection::Regular};
    Departure departure[2] = {Departure::Moving, Departure::Moving};
    double g0[2] = {0.0, 0.0};
    double tailExponent[2] = {1.0, 1.0};
    double reachTime[2] = {0.0, 0.0};
    bool truncated[2] = {false, false};
    bool capped[2] = {false, false}; // sampled range shortened by the grid frame
    int rearranged[2] = {0, 0};
    double maxDescent[2] = {0.0, 0.0};
};

struct DeltaTableOptions {
    double horizon = 1.0;
    bool allowTruncation = false;
    double tauLvl = 0.0;
};

class DeltaTable {
public:
    std::vector<double> levels;
    std::vector<double> times;
    double hBar = 0.0;
    double speedBound = 0.0;
    double dx = 0.0;
    std::vector<double> delta[2];          // [branch][k * times.size() + m]
    std::vector<std::uint8_t> reached[2];
    std::vector<double> repair[2];         // |projected - raw| per entry
    std::vector<LevelInfo> info;
    double maxRepair = 0.0;
    std::size_t repairedEntries = 0;
    std::vector<std::string> warnings;

    std::size_t level_count() const { return levels.size(); }
    std::size_t time_count() const { return times.size(); }
    double at(Branch b, std::size_t k, std::size_t m) const { return delta[idx(b)][k * times.size() + m]; }
    bool is_reached(Branch b, std::size_t k, std::size_t m) const { return reached[idx(b)][k * times.size() + m]; }

    /// Linear interpolation in t. Throws OutOfTable outside [t_0, t_last].
    double at_time(Branch b, std::size_t k, double t) const;
    bool reached_at(Branch b, std::size_t k, double t) const;
    bool any_truncated() const;

private:
    static int idx(Branch b) { return b == Branch::D ? 0 : 1; }
};

/// Isotonic projection across levels per (branch, time) plus the pairwise
/// D <= E fix, iterated to a fixed point. Fills repair/maxRepair/warnings and
/// throws MonotonicityRepairExceeded above 5 dx.
void project_monotone(DeltaTable& table);

/// Called once per (level, branch) with the sublevel sdf used for the curve.
using SdfSink = std::function<void(std::size_t k, Branch b, const SignedDistanceField& sdf)>;

/// levels must be strictly increasing; times start at 0 and increase.
DeltaTable build_delta_table(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel, double hBar,
                             const std::vector<double>& levels, const std::vector<double>& times,
                             const DeltaTableOptions& opts, const SdfSink& sink = {});

/// Rows: branch,h,t,delta,selection,repair.
void write_delta_csv(std::ostream& out, const DeltaTable& table);

} // namespace levelflow
