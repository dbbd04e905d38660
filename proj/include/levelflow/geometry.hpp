/**
 * @file geometry.hpp
 * @brief Signed distance fields, parallel sets, perimeter and Steiner fits.
 */
#pragma once

#include "levelflow/grid.hpp"

#include <string>
#include <vector>

namespace levelflow {

enum class SetFlag { Regular, Empty, Full };

enum class SdfProvenance {
    CellCenters,      // exact transform of a cell-centre indicator
    SubcellInterface, // distance to the linearly interpolated level line of a field
};

struct SignedDistanceField {
    Grid grid;
    std::vector<double> values;
    SdfProvenance provenance = SdfProvenance::CellCenters;
    SetFlag flag = SetFlag::Regular;

    // Half a cell for cell-centre fields, 0 for sub-cell fields. Measure and
    // perimeter estimates treat the set boundary as sitting this far from the
    // outermost member centres.
    double boundary_offset() const;
    double calibrated(std::size_t i) const;
};

struct SublevelPair {
    BinarySet strict;
    BinarySet closed;
};

/// Exact Euclidean signed distance between cell centres (separable lower
/// envelope transform, run on the set and on its complement).
SignedDistanceField signed_distance(const BinarySet& set);

/// Signed distance to the sublevel set {u0 < h} (Open) or {u0 <= h} (Closed)
/// whose boundary is the piecewise-linear level line through edge crossings.
/// Membership of each node follows the strict/non-strict comparison exactly.
/// Throws CoercivityViolation when a member touches the grid frame.
SignedDistanceField sublevel_signed_distance(const ScalarField& u0, double h, Closure closure,
                                             double tauLvl = 0.0);

/// Nodes adjacent to the sub-cell level line of {u0 < h} / {u0 <= h} with their
/// signed distance to the nearest segment in the touching cells. Exact for any
/// node within half a cell of the line. Does not check coercivity.
struct InterfaceBand {
    std::vector<std::uint8_t> member;
    std::vector<std::size_t> nodes;
    std::vector<double> sd;
};
InterfaceBand sublevel_interface_band(const ScalarField& u0, double h, Closure closure, double tauLvl = 0.0);

BinarySet parallel_set(const SignedDistanceField& sdf, double s, Closure closure);

/// Smallest signed distance found on the grid frame (+inf for an empty set).
double frame_distance(const SignedDistanceField& sdf);

struct PerimeterResult {
    double value = 0.0;
    bool emptyWarning = false;
};

PerimeterResult perimeter(const BinarySet& set);

/// Length of the level line {sd = level} (boundary point count in 1D).
double contour_length(const SignedDistanceField& sdf, double level);
std::vector<double> contour_lengths(const SignedDistanceField& sdf, const std::vector<double>& levels);

struct SteinerFit {
    double phi0 = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;
    double relResidual = 0.0; // rms residual / phi0
    double hullExcess = 0.0;
    double directArea = 0.0;
};

SteinerFit steiner_check(const BinarySet& convexSet, const std::vector<double>& sRange);

SublevelPair sublevel_sets(const ScalarField& u0, double h, double tauLvl = 0.0);

/// Area of the convex hull of the member centres (2D only).
double member_hull_area(const BinarySet& set, double* hullPerimeter = nullptr);

} // namespace levelflow
