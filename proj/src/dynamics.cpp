#include "levelflow/dynamics.hpp"

#include "levelflow/errors.hpp"
#include "levelflow/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace levelflow {

VelocitySpec::VelocitySpec(Fn f, double bound, VelocityFamily family, std::string description, bool dependsOnMass,
                           std::optional<double> lipschitzQ)
    : f_(std::move(f)), bound_(bound), family_(family), description_(std::move(description)),
      dependsOnMass_(dependsOnMass), lipschitzQ_(lipschitzQ)
{
}

const char* to_string(Branch b) { return b == Branch::D ? "D" : "E"; }

VelocitySpec affine_clamped(double a, double b, double qlo, double qhi)
{
    if (!(a > 0.0) || !(qlo < qhi))
        throw Error(ErrorCode::ConfigInvalid, "affine_clamped needs a > 0 and qlo < qhi");
    double flo = a * qlo + b;
    double fhi = a * qhi + b;
    std::ostringstream desc;
    desc << "affine_clamped(a=" << a << ",b=" << b << ",qlo=" << qlo << ",qhi=" << qhi << ")";
    return VelocitySpec([=](double, double q) { return std::clamp(a * q + b, flo, fhi); },
                        std::max(std::abs(flo), std::abs(fhi)), VelocityFamily::AffineClamped, desc.str(), true, a);
}

VelocitySpec shifted(double c, double cap)
{
    if (!(cap > 0.0))
        throw Error(ErrorCode::ConfigInvalid, "shifted needs a positive cap");
    std::ostringstream desc;
    desc << "shifted(c=" << c << ",cap=" << cap << ")";
    return VelocitySpec([=](double r, double) { return std::clamp(r - c, -cap, cap); }, cap,
                        VelocityFamily::Separable, desc.str(), false, 0.0);
}

VelocitySpec constant_velocity(double c)
{
    std::ostringstream desc;
    desc << "constant(c=" << c << ")";
    return VelocitySpec([=](double, double) { return c; }, std::abs(c), VelocityFamily::Separable, desc.str(), false,
                        0.0);
}

namespace {

std::size_t bracket_index(const std::vector<double>& axis, double v)
{
    std::size_t k = std::upper_bound(axis.begin(), axis.end(), v) - axis.begin();
    if (k == 0)
        return 0;
    return std::min(k - 1, axis.size() - 2);
}

} // namespace

VelocitySpec tabulated(std::vector<double> rs, std::vector<double> qs, std::vector<double> values)
{
    if (rs.size() < 2 || qs.size() < 2 || values.size() != rs.size() * qs.size())
        throw Error(ErrorCode::ConfigInvalid, "velocity table needs at least a 2x2 lattice");
    if (!std::is_sorted(rs.begin(), rs.end()) || !std::is_sorted(qs.begin(), qs.end()) ||
        std::adjacent_find(rs.begin(), rs.end()) != rs.end() || std::adjacent_find(qs.begin(), qs.end()) != qs.end())
        throw Error(ErrorCode::ConfigInvalid, "velocity table axes must be strictly increasing");
    double bound = 0.0;
    for (double v : values)
        bound = std::max(bound, std::abs(v));
    double lip = 0.0;
    const std::size_t nq = qs.size();
    for (std::size_t i = 0; i < rs.size(); ++i)
        for (std::size_t j = 0; j + 1 < nq; ++j)
            lip = std::max(lip, std::abs(values[i * nq + j + 1] - values[i * nq + j]) / (qs[j + 1] - qs[j]));
    std::ostringstream desc;
    desc << "table(" << rs.size() << "x" << qs.size() << ")";
    auto eval = [rs = std::move(rs), qs = std::move(qs), values = std::move(values)](double r, double q) {
        const std::size_t nq = qs.size();
        double rc = std::clamp(r, rs.front(), rs.back());
        double qc = std::clamp(q, qs.front(), qs.back());
        std::size_t i = bracket_index(rs, rc);
        std::size_t j = bracket_index(qs, qc);
        double tr = (rc - rs[i]) / (rs[i + 1] - rs[i]);
        double tq = (qc - qs[j]) / (qs[j + 1] - qs[j]);
        double f00 = values[i * nq + j], f01 = values[i * nq + j + 1];
        double f10 = values[(i + 1) * nq + j], f11 = values[(i + 1) * nq + j + 1];
        return (1 - tr) * ((1 - tq) * f00 + tq * f01) + tr * ((1 - tq) * f10 + tq * f11);
    };
    return VelocitySpec(eval, bound, VelocityFamily::Tabulated, desc.str(), true, lip);
}

VelocitySpec load_velocity_table(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot open velocity table " + path);
    std::string line;
    std::getline(in, line);
    std::map<std::pair<double, double>, double> cells;
    std::vector<double> rs, qs;
    int lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty())
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double r, q, f;
        if (!(fields >> r >> q >> f))
            throw Error(ErrorCode::ConfigInvalid, path + ":" + std::to_string(lineNo) + ": expected r,q,f");
        cells[{r, q}] = f;
        rs.push_back(r);
        qs.push_back(q);
    }
    std::sort(rs.begin(), rs.end());
    rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
    std::sort(qs.begin(), qs.end());
    qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
    std::vector<double> values;
    for (double r : rs) {
        for (double q : qs) {
            auto it = cells.find({r, q});
            if (it == cells.end())
                throw Error(ErrorCode::ConfigInvalid, path + ": lattice is not complete");
            values.push_back(it->second);
        }
    }
    return tabulated(std::move(rs), std::move(qs), std::move(values));
}

VelocityAudit verify_velocity(const VelocitySpec& vel, double rLo, double rHi, double massScale)
{
    VelocityAudit audit;
    const int nr = tol::kMonotoneLatticeR;
    const int nq = tol::kMonotoneLatticeQ;
    const double eps = tol::kMonotoneEpsFactor * massScale;
    const double slack = 1e-12 * std::max(1.0, vel.bound());
    audit.minMassIncrement = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nr; ++i) {
        double r = rLo + (rHi - rLo) * i / (nr - 1);
        double rNext = rLo + (rHi - rLo) * (i + 1) / (nr - 1);
        for (int j = 0; j < nq; ++j) {
            double q = massScale * j / (nq - 1);
            double f = vel(r, q);
            if (!std::isfinite(f) || std::abs(f) > vel.bound() + slack)
                throw Error(ErrorCode::MonotonicityViolation, "velocity exceeds its declared bound at r=" +
                                                                  std::to_string(r) + " q=" + std::to_string(q));
            audit.maxAbs = std::max(audit.maxAbs, std::abs(f));
            if (i + 1 < nr && vel(rNext, q) < f - slack)
                throw Error(ErrorCode::MonotonicityViolation,
                            "velocity decreases in r at r=" + std::to_string(r) + " q=" + std::to_string(q));
            if (j + 1 < nq && vel(r, massScale * (j + 1) / (nq - 1)) < f - slack)
                throw Error(ErrorCode::MonotonicityViolation,
                            "velocity decreases in q at r=" + std::to_string(r) + " q=" + std::to_string(q));
            double q2 = std::min(q + eps, massScale);
            if (q2 > q) {
                double inc = vel(r, q2) - f;
                audit.minMassIncrement = std::min(audit.minMassIncrement, inc);
                if (!(inc > 0.0))
                    audit.strictInMass = false;
            }
        }
    }
    if (!audit.strictInMass && vel.depends_on_mass())
        throw Error(ErrorCode::MonotonicityViolation, "velocity is not strictly increasing in the mass on [0, " +
                                                          std::to_string(massScale) + "]");
    return audit;
}

ThresholdResult find_threshold(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel,
                               double tol, MassModel model, double tauLvl)
{
    require_same_grid(u0.grid, density.grid, "find_threshold: grids differ");
    LevelMeasureProfile profile;
    if (model == MassModel::CellCount)
        profile = LevelMeasureProfile(u0, density);
    auto massD = [&](double h) {
        return model == MassModel::CellCount ? profile.strict_mass(h - tauLvl)
                                             : mu_sublevel_subcell(u0, density, h, Closure::Open, tauLvl);
    };
    auto massE = [&](double h) {
        return model == MassModel::CellCount ? profile.closed_mass(h + tauLvl)
                                             : mu_sublevel_subcell(u0, density, h, Closure::Closed, tauLvl);
    };
    auto phiD = [&](double h) { return vel(h, massD(h)); };
    auto phiE = [&](double h) { return vel(h, massE(h)); };

    double lo = u0.min();
    double hi = u0.max();
    if (phiE(lo) > 0.0)
        throw Error(ErrorCode::NoThreshold, "f(min u0, mu({u0 <= min u0})) > 0: sublevel sets only expand");
    if (phiD(hi) < 0.0)
        throw Error(ErrorCode::NoThreshold, "f(max u0, mu({u0 < max u0})) < 0: sublevel sets only shrink");
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        if (phiD(mid) <= 0.0)
            lo = mid;
        else
            hi = mid;
    }

    ThresholdResult res;
    res.model = model;
    res.bracket = hi - lo;
    double pick = 0.5 * (lo + hi);
    if (phiE(lo) >= 0.0) {
        pick = lo;
    } else if (phiD(hi) <= 0.0) {
        pick = hi;
    } else if (model == MassModel::CellCount) {
        const auto& lv = profile.levels();
        for (auto it = std::lower_bound(lv.begin(), lv.end(), lo); it != lv.end() && *it <= hi; ++it) {
            if (phiD(*it) <= 0.0 && phiE(*it) >= 0.0) {
                pick = *it;
                break;
            }
        }
    }
    res.hBar = pick;
    res.fAtStrict = phiD(pick);
    res.fAtClosed = phiE(pick);
    return res;
}

std::vector<double> s_grid(double dx, double origin, double lo, double hi)
{
    const double sMin = tol::kSMinFactor * dx;
    const double cap = tol::kSMaxStepFactor * dx;
    auto side = [&](double end) {
        std::vector<double> off;
        double cur = sMin;
        while (cur < end) {
            off.push_back(cur);
            cur = std::min(cur * tol::kSRatio, cur + cap);
        }
        if (end > 0.0)
            off.push_back(end);
        return off;
    };
    std::vector<double> neg = side(-lo);
    std::vector<double> pos = side(hi);
    std::vector<double> s;
    s.reserve(neg.size() + pos.size() + 1);
    for (auto it = neg.rbegin(); it != neg.rend(); ++it)
        s.push_back(origin - *it);
    s.push_back(origin);
    for (double v : pos)
        s.push_back(origin + v);
    return s;
}

SpeedCurve sample_speed_curve(const ParallelMassProfile& mass, const VelocitySpec& vel, double h, Branch branch,
                              std::vector<double> s, double origin, double descentAbort)
{
    SpeedCurve c;
    c.h = h;
    c.branch = branch;
    c.origin = origin;
    c.s = std::move(s);
    c.g.resize(c.s.size());
    for (std::size_t j = 0; j < c.s.size(); ++j)
        c.g[j] = vel(h, mass.mass(c.s[j]));
    for (std::size_t j = 1; j < c.g.size(); ++j) {
        double descent = c.g[j - 1] - c.g[j];
        if (descent <= 0.0)
            continue;
        c.maxDescent = std::max(c.maxDescent, descent);
        if (descent > descentAbort)
            throw Error(ErrorCode::DescentAbort, "speed curve at level " + std::to_string(h) + " descends by " +
                                                     std::to_string(descent) + " at s=" + std::to_string(c.s[j]));
        c.g[j] = c.g[j - 1];
        ++c.rearranged;
    }
    return c;
}

SpeedCurve speed_curve(const SignedDistanceField& sdf, const DensityField& density, const VelocitySpec& vel,
                       double h, Branch branch, double sLo, double sHi)
{
    const double dx = sdf.grid.dx();
    if (sHi > 0.0 && sHi >= frame_distance(sdf))
        throw Error(ErrorCode::DomainOverflow,
                    "parallel set of level " + std::to_string(h) + " at s=" + std::to_string(sHi) + " reaches the frame");
    double abortAt = std::numeric_limits<double>::infinity();
    if (auto lip = vel.lipschitz_q(); lip && *lip > 0.0 && sdf.flag == SetFlag::Regular) {
        double per = std::max(contour_length(sdf, 0.0), sdf.grid.dim() == 1 ? 1.0 : dx);
        abortAt = tol::kDescentAbortFactor * *lip * density.thetaMax * per * dx;
    }
    ParallelMassProfile mass(sdf, density);
    return sample_speed_curve(mass, vel, h, branch, s_grid(dx, 0.0, sLo, sHi), 0.0, abortAt);
}

SpeedCurve speed_curve(const ScalarField& u0, const DensityField& density, const VelocitySpec& vel, double h,
                       Branch branch, double sLo, double sHi, double tauLvl)
{
    require_same_grid(u0.grid, density.grid, "speed_curve: grids differ");
    SignedDistanceField sdf = sublevel_signed_distance(u0, h, closure_of(branch), tauLvl);
    return speed_curve(sdf, density, vel, h, branch, sLo, sHi);
}

} // namespace levelflow
