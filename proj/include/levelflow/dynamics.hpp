/**
 * @file dynamics.hpp
 * @brief Velocity laws f(r, q), the critical level and speed curves g_h(s).
 */
#pragma once

#include "levelflow/geometry.hpp"
#include "levelflow/measure.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace levelflow {

enum class VelocityFamily { AffineClamped, Separable, Tabulated };

class VelocitySpec {
public:
    using Fn = std::function<double(double r, double q)>;

    VelocitySpec() = default;
    VelocitySpec(Fn f, double bound, VelocityFamily family, std::string description,
                 bool dependsOnMass = true, std::optional<double> lipschitzQ = std::nullopt);

    double operator()(double r, double q) const { return f_(r, q); }
    double bound() const { return bound_; }
    VelocityFamily family() const { return family_; }
    const std::string& description() const { return description_; }
    bool depends_on_mass() const { return dependsOnMass_; }
    std::optional<double> lipschitz_q() const { return lipschitzQ_; }

private:
    Fn f_;
    double bound_ = 0.0;
    VelocityFamily family_ = VelocityFamily::Separable;
    std::string description_;
    bool dependsOnMass_ = true;
    std::optional<double> lipschitzQ_;
};

/// f = clamp(a q + b, f(qlo), f(qhi)), a > 0.
VelocitySpec affine_clamped(double a, double b, double qlo, double qhi);
/// f = clamp(r - c, -cap, cap); independent of the mass.
VelocitySpec shifted(double c, double cap = 10.0);
/// f = c everywhere.
VelocitySpec constant_velocity(double c);
/// Bilinear interpolation on an (r, q) lattice, clamped to the lattice edges.
/// values[i * qs.size() + j] = f(rs[i], qs[j]).
VelocitySpec tabulated(std::vector<double> rs, std::vector<double> qs, std::vector<double> values);
/// CSV with a header row "r,q,f" and one line per lattice node.
VelocitySpec load_velocity_table(const std::string& path);

struct VelocityAudit {
    double maxAbs = 0.0;
    double minMassIncrement = 0.0; // smallest f(r, q + eps) - f(r, q) seen
    bool strictInMass = true;
};

/// Samples (A1)/(A2) on a lattice of r in [rLo, rHi], q in [0, massScale].
/// Throws MonotonicityViolation on a decrease in r or q, a non-strict increase
/// in q for mass-dependent laws, or |f| above the declared bound.
VelocityAudit verify_velocity(const VelocitySpec& vel, double rLo, double rHi, double massScale);

enum class Branch { D, E };
inline Closure closure_of(Branch b) { return b == Branch::D ? Closure::Open : Closure::Closed; }
const char* to_string(Branch b);

enum class MassModel {
    CellCount, // mu of the cell-centre sublevel sets (LevelMeasureProfile)
    Subcell,   // boundary-corrected mass of the sub-cell level line
};

struct ThresholdResult {
    double hBar = 0.0;
    double fAtStrict = 0.0;
    double fAtClosed = 0.0;
    double bracket = 0.0;
    MassModel model = MassModel::Subcell;
};

ThresholdResult find_threshold(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel,
                               double tol, MassModel model = MassModel::Subcell, double tauLvl = 0.0);

struct SpeedCurve {
    double h = 0.0;
    Branch branch = Branch::D;
    double origin = 0.0;        // travel times are measured from here
    std::vector<double> s;      // strictly increasing, contains origin
    std::vector<double> g;      // nondecreasing after rearrangement
    int rearranged = 0;         // samples lifted by the rearrangement
    double maxDescent = 0.0;    // largest raw descent
};

/// Refined sample positions on [origin + lo, origin + hi] (lo <= 0 <= hi):
/// geometric from dx/4 with ratio 1.15 away from the origin, spacing capped.
std::vector<double> s_grid(double dx, double origin, double lo, double hi);

/// Samples g(s) = f(h, mass(s)) on the given positions and rearranges tiny
/// descents. Descents above descentAbort throw DescentAbort.
SpeedCurve sample_speed_curve(const ParallelMassProfile& mass, const VelocitySpec& vel, double h, Branch branch,
                              std::vector<double> s, double origin = 0.0,
                              double descentAbort = std::numeric_limits<double>::infinity());

/// Builds the sub-cell sdf of the h-sublevel set for the branch and samples
/// g on s in [sLo, sHi]. Throws DomainOverflow when sHi reaches the frame.
SpeedCurve speed_curve(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel, double h,
                       Branch branch, double sLo, double sHi, double tauLvl = 0.0);
SpeedCurve speed_curve(const SignedDistanceField& sdf, const DensityField& density, const VelocitySpec& vel,
                       double h, Branch branch, double sLo, double sHi);

} // namespace levelflow
