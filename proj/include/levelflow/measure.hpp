/**
 * @file measure.hpp
 * @brief Weighted measures mu(A) = sum Theta * cellVolume and sublevel profiles.
 */
#pragma once

#include "levelflow/geometry.hpp"
#include "levelflow/grid.hpp"

#include <string>
#include <vector>

namespace levelflow {

// Correctly rounded floating-point sum (Shewchuk partials, as in Python's
// fsum). The result does not depend on the order of the terms, which keeps
// profile queries and direct summation bit-identical.
class ExactSum {
public:
    void add(double x);
    double value() const;

private:
    std::vector<double> partials_;
};

struct DensityField {
    Grid grid;
    std::vector<double> theta;
    std::vector<double> weight; // theta * cellVolume
    double totalMass = 0.0;
    double tailBound = 0.0;     // declared mass outside the grid (error budgets only)
    double thetaMax = 0.0;
    std::string name;
};

DensityField make_density(const Grid& g, std::vector<double> theta, double tailBound, std::string name);
DensityField lebesgue_density(const Grid& g);
DensityField cauchy2d_density(const Grid& g);
DensityField gaussian_density(const Grid& g, double sigma);
DensityField table_density(const ScalarField& theta, double tailBound = 0.0);

double mu(const BinarySet& set, const DensityField& density);

/// Boundary-corrected mass of {sd < s}: each cell contributes the fraction
/// clamp(1/2 + (s - sd)/dx, 0, 1) of its weight (sd calibrated per provenance).
double mu_corrected(const SignedDistanceField& sdf, const DensityField& density, double s = 0.0);

/// Fast repeated evaluation of mu_corrected over many s for one field.
class ParallelMassProfile {
public:
    ParallelMassProfile() = default;
    ParallelMassProfile(const SignedDistanceField& sdf, const DensityField& density);

    double mass(double s) const;
    double total() const { return total_; }

private:
    double dx_ = 1.0;
    double total_ = 0.0;
    std::vector<double> sd_;   // sorted calibrated distances
    std::vector<double> pw_;   // prefix sums of weights
    std::vector<double> pwsd_; // prefix sums of weight * sd (finite entries only)
};

/// Corrected mass of {u0 < h} (Open) or {u0 <= h} (Closed) at s = 0 using the
/// sub-cell level line; only nodes next to the level line are fractional.
double mu_sublevel_subcell(const ScalarField& u0, const DensityField& density, double h, Closure closure,
                           double tauLvl = 0.0);

class LevelMeasureProfile {
public:
    LevelMeasureProfile() = default;
    LevelMeasureProfile(const ScalarField& field, const DensityField& density);

    const std::vector<double>& levels() const { return levels_; }
    const std::vector<double>& strict_masses() const { return strict_; }
    const std::vector<double>& closed_masses() const { return closed_; }

    double strict_mass(double h) const; // mu({field < h})
    double closed_mass(double h) const; // mu({field <= h})
    double total() const { return closed_.empty() ? 0.0 : closed_.back(); }

    // Strict mass for every cell of the field, mu({field < field(i)}).
    std::vector<double> per_cell_strict_mass() const;

private:
    std::vector<double> levels_;
    std::vector<double> strict_;
    std::vector<double> closed_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> groupOf_; // sorted position -> level index
};

} // namespace levelflow
