#include "levelflow/geometry.hpp"

#include "levelflow/errors.hpp"
#include "levelflow/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace levelflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Felzenszwalb-Huttenlocher squared distance transform along one line.
// f holds 0 at seeds and +inf elsewhere (or the result of an earlier pass).
// ---------------------------------------------------------------------------
void edt_line(const double* f, int n, std::ptrdiff_t stride, double* out, std::vector<int>& v,
              std::vector<double>& z)
{
    v.resize(n);
    z.resize(n + 1);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        double fq = f[q * stride];
        if (fq == kInf)
            continue;
        double key = fq + double(q) * q;
        while (k >= 0) {
            int p = v[k];
            double s = (key - (f[p * stride] + double(p) * p)) / (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
                continue;
            }
            ++k;
            v[k] = q;
            z[k] = s;
            break;
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
        }
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q)
            out[q * stride] = kInf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q)
            ++j;
        double d = double(q - v[j]);
        out[q * stride] = d * d + f[v[j] * stride];
    }
}

// Squared distance (in cells) from every node to the nearest seed node.
std::vector<double> squared_edt(const Grid& g, const std::vector<std::uint8_t>& member, std::uint8_t seedValue)
{
    const int nx = g.nx();
    const int ny = g.ny();
    std::vector<double> f(g.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = member[i] == seedValue ? 0.0 : kInf;

    std::vector<int> v;
    std::vector<double> z;
    std::vector<double> line(std::max(nx, ny));
    std::vector<double> tmp(std::max(nx, ny));
    // x pass
    for (int j = 0; j < ny; ++j) {
        double* row = f.data() + g.index(0, j);
        std::copy(row, row + nx, tmp.begin());
        edt_line(tmp.data(), nx, 1, row, v, z);
    }
    if (g.dim() == 2) {
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j)
                tmp[j] = f[g.index(i, j)];
            edt_line(tmp.data(), ny, 1, line.data(), v, z);
            for (int j = 0; j < ny; ++j)
                f[g.index(i, j)] = line[j];
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Level-line segments and nearest-segment propagation.
// ---------------------------------------------------------------------------
struct Segment {
    double ax, ay, bx, by;
};

double segment_dist2(const Segment& s, double px, double py)
{
    double ex = s.bx - s.ax;
    double ey = s.by - s.ay;
    double wx = px - s.ax;
    double wy = py - s.ay;
    double len2 = ex * ex + ey * ey;
    double t = len2 > 0.0 ? std::clamp((wx * ex + wy * ey) / len2, 0.0, 1.0) : 0.0;
    double dx = wx - t * ex;
    double dy = wy - t * ey;
    return dx * dx + dy * dy;
}

// Crossing point on the edge a-b where exactly one endpoint is a member. The
// fraction is measured from the member endpoint, using values relative to the
// level (negative/zero inside).
struct EdgePoint {
    double x, y;
};

class LevelLine {
public:
    LevelLine(const Grid& g, const std::vector<double>& phi, const std::vector<std::uint8_t>& member)
        : g_(g), phi_(phi), member_(member) {}

    // Segments grouped by quad (2D) or edge (1D); start_[c] .. start_[c+1].
    void build()
    {
        const int nx = g_.nx();
        if (g_.dim() == 1) {
            start_.assign(std::size_t(nx), 0);
            for (int i = 0; i + 1 < nx; ++i) {
                start_[i] = static_cast<int>(segs_.size());
                std::size_t a = g_.index(i), b = g_.index(i + 1);
                if (member_[a] != member_[b]) {
                    EdgePoint p = cross(a, b);
                    segs_.push_back({p.x, p.y, p.x, p.y});
                }
            }
            start_[nx - 1] = static_cast<int>(segs_.size());
            return;
        }
        const int ny = g_.ny();
        std::size_t quads = std::size_t(nx - 1) * std::size_t(ny - 1);
        start_.assign(quads + 1, 0);
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                std::size_t q = std::size_t(j) * (nx - 1) + i;
                start_[q] = static_cast<int>(segs_.size());
                quad_segments(i, j);
            }
        }
        start_[quads] = static_cast<int>(segs_.size());
    }

    const std::vector<Segment>& segments() const { return segs_; }

    // Segments of the cells touching node (i,j).
    template <class Fn>
    void for_adjacent(int i, int j, Fn&& fn) const
    {
        const int nx = g_.nx();
        if (g_.dim() == 1) {
            for (int e : {i - 1, i}) {
                if (e < 0 || e + 1 >= nx)
                    continue;
                for (int s = start_[e]; s < start_[e + 1]; ++s)
                    fn(s);
            }
            return;
        }
        const int ny = g_.ny();
        for (int qj = j - 1; qj <= j; ++qj) {
            if (qj < 0 || qj + 1 >= ny)
                continue;
            for (int qi = i - 1; qi <= i; ++qi) {
                if (qi < 0 || qi + 1 >= nx)
                    continue;
                std::size_t q = std::size_t(qj) * (nx - 1) + qi;
                for (int s = start_[q]; s < start_[q + 1]; ++s)
                    fn(s);
            }
        }
    }

private:
    EdgePoint cross(std::size_t a, std::size_t b) const
    {
        if (!member_[a])
            std::swap(a, b);
        double pa = phi_[a];
        double pb = phi_[b];
        double theta = (0.0 - pa) / (pb - pa);
        theta = std::clamp(theta, 0.0, 1.0);
        auto A = g_.point(a);
        auto B = g_.point(b);
        return {A[0] + theta * (B[0] - A[0]), A[1] + theta * (B[1] - A[1])};
    }

    void quad_segments(int i, int j)
    {
        std::size_t c[4] = {g_.index(i, j), g_.index(i + 1, j), g_.index(i + 1, j + 1), g_.index(i, j + 1)};
        bool m[4] = {member_[c[0]] != 0, member_[c[1]] != 0, member_[c[2]] != 0, member_[c[3]] != 0};
        int edgeA[4] = {0, 1, 3, 0};
        int edgeB[4] = {1, 2, 2, 3};
        bool mixed[4];
        int nMixed = 0;
        for (int e = 0; e < 4; ++e) {
            mixed[e] = m[edgeA[e]] != m[edgeB[e]];
            nMixed += mixed[e] ? 1 : 0;
        }
        if (nMixed == 0)
            return;
        EdgePoint p[4];
        for (int e = 0; e < 4; ++e)
            if (mixed[e])
                p[e] = cross(c[edgeA[e]], c[edgeB[e]]);
        auto add = [&](int e0, int e1) { segs_.push_back({p[e0].x, p[e0].y, p[e1].x, p[e1].y}); };
        if (nMixed == 2) {
            int e0 = -1, e1 = -1;
            for (int e = 0; e < 4; ++e) {
                if (!mixed[e])
                    continue;
                (e0 < 0 ? e0 : e1) = e;
            }
            add(e0, e1);
            return;
        }
        // Saddle: decide whether the centre is inside from the mean value.
        double centre = 0.25 * (phi_[c[0]] + phi_[c[1]] + phi_[c[2]] + phi_[c[3]]);
        bool centreIn = centre < 0.0 || (centre == 0.0 && closedTies_);
        // Corners separated from the centre get cut off individually.
        // Corner k sits between edges (k-1, k) in the ring e3,e0 | e0,e1 | e1,e2 | e2,e3.
        static const int cornerEdges[4][2] = {{3, 0}, {0, 1}, {1, 2}, {2, 3}};
        for (int k = 0; k < 4; ++k) {
            if (m[k] != centreIn)
                add(cornerEdges[k][0], cornerEdges[k][1]);
        }
    }

public:
    bool closedTies_ = false;

private:
    const Grid& g_;
    const std::vector<double>& phi_;
    const std::vector<std::uint8_t>& member_;
    std::vector<Segment> segs_;
    std::vector<int> start_;
};

// Nearest-segment labels propagated by forward/backward raster sweeps.
std::vector<double> nearest_segment_distance(const Grid& g, const LevelLine& line)
{
    const int nx = g.nx();
    const int ny = g.ny();
    const auto& segs = line.segments();
    std::vector<int> label(g.size(), -1);
    std::vector<double> d2(g.size(), kInf);

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            std::size_t idx = g.index(i, j);
            double px = g.x(i), py = g.y(j);
            line.for_adjacent(i, j, [&](int s) {
                double d = segment_dist2(segs[s], px, py);
                if (d < d2[idx]) {
                    d2[idx] = d;
                    label[idx] = s;
                }
            });
        }
    }

    auto relax = [&](int i, int j, int ni, int nj) -> bool {
        if (ni < 0 || nj < 0 || ni >= nx || nj >= ny)
            return false;
        int s = label[g.index(ni, nj)];
        if (s < 0)
            return false;
        std::size_t idx = g.index(i, j);
        if (label[idx] == s)
            return false;
        double d = segment_dist2(segs[s], g.x(i), g.y(j));
        if (d < d2[idx]) {
            d2[idx] = d;
            label[idx] = s;
            return true;
        }
        return false;
    };

    for (int round = 0; round < 4; ++round) {
        bool changed = false;
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                changed |= relax(i, j, i - 1, j);
                if (g.dim() == 2) {
                    changed |= relax(i, j, i - 1, j - 1);
                    changed |= relax(i, j, i, j - 1);
                    changed |= relax(i, j, i + 1, j - 1);
                }
            }
            for (int i = nx - 1; i >= 0; --i)
                changed |= relax(i, j, i + 1, j);
        }
        for (int j = ny - 1; j >= 0; --j) {
            for (int i = nx - 1; i >= 0; --i) {
                changed |= relax(i, j, i + 1, j);
                if (g.dim() == 2) {
                    changed |= relax(i, j, i + 1, j + 1);
                    changed |= relax(i, j, i, j + 1);
                    changed |= relax(i, j, i - 1, j + 1);
                }
            }
            for (int i = 0; i < nx; ++i)
                changed |= relax(i, j, i - 1, j);
        }
        if (!changed)
            break;
    }
    return d2;
}

// Generic marching-squares length of {phi = 0} with phi < 0 inside.
template <class Phi>
double level_line_length(const Grid& g, Phi&& phi)
{
    const int nx = g.nx();
    if (g.dim() == 1) {
        double count = 0.0;
        for (int i = 0; i + 1 < nx; ++i)
            if ((phi(g.index(i)) < 0.0) != (phi(g.index(i + 1)) < 0.0))
                count += 1.0;
        return count;
    }
    const int ny = g.ny();
    const double dx = g.dx();
    double total = 0.0;
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            double v[4] = {phi(g.index(i, j)), phi(g.index(i + 1, j)), phi(g.index(i + 1, j + 1)),
                           phi(g.index(i, j + 1))};
            bool m[4] = {v[0] < 0.0, v[1] < 0.0, v[2] < 0.0, v[3] < 0.0};
            if (m[0] == m[1] && m[1] == m[2] && m[2] == m[3])
                continue;
            // unit-square corner coordinates
            static const double cx[4] = {0, 1, 1, 0};
            static const double cy[4] = {0, 0, 1, 1};
            static const int ea[4] = {0, 1, 3, 0};
            static const int eb[4] = {1, 2, 2, 3};
            double px[4], py[4];
            bool mixed[4];
            int nMixed = 0;
            for (int e = 0; e < 4; ++e) {
                mixed[e] = m[ea[e]] != m[eb[e]];
                if (!mixed[e])
                    continue;
                ++nMixed;
                double a = v[ea[e]], b = v[eb[e]];
                double t = std::clamp(a / (a - b), 0.0, 1.0);
                px[e] = cx[ea[e]] + t * (cx[eb[e]] - cx[ea[e]]);
                py[e] = cy[ea[e]] + t * (cy[eb[e]] - cy[ea[e]]);
            }
            auto len = [&](int e0, int e1) { return std::hypot(px[e0] - px[e1], py[e0] - py[e1]); };
            if (nMixed == 2) {
                int e0 = -1, e1 = -1;
                for (int e = 0; e < 4; ++e) {
                    if (!mixed[e])
                        continue;
                    (e0 < 0 ? e0 : e1) = e;
                }
                total += len(e0, e1) * dx;
            } else {
                bool centreIn = 0.25 * (v[0] + v[1] + v[2] + v[3]) < 0.0;
                static const int cornerEdges[4][2] = {{3, 0}, {0, 1}, {1, 2}, {2, 3}};
                for (int k = 0; k < 4; ++k)
                    if (m[k] != centreIn)
                        total += len(cornerEdges[k][0], cornerEdges[k][1]) * dx;
            }
        }
    }
    return total;
}

double cross2(double ox, double oy, double ax, double ay, double bx, double by)
{
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox);
}

} // namespace

double SignedDistanceField::boundary_offset() const
{
    return provenance == SdfProvenance::CellCenters ? 0.5 * grid.dx() : 0.0;
}

double SignedDistanceField::calibrated(std::size_t i) const
{
    double v = values[i];
    if (provenance != SdfProvenance::CellCenters)
        return v;
    double off = 0.5 * grid.dx();
    return v < 0.0 ? v + off : v - off;
}

SignedDistanceField signed_distance(const BinarySet& set)
{
    const Grid& g = set.grid;
    SignedDistanceField out;
    out.grid = g;
    out.provenance = SdfProvenance::CellCenters;
    std::size_t members = set.count();
    if (members == 0) {
        out.flag = SetFlag::Empty;
        out.values.assign(g.size(), kInf);
        return out;
    }
    if (members == g.size()) {
        out.flag = SetFlag::Full;
        out.values.assign(g.size(), -kInf);
        return out;
    }
    std::vector<double> toMembers = squared_edt(g, set.member, 1);
    std::vector<double> toOutside = squared_edt(g, set.member, 0);
    out.values.resize(g.size());
    const double dx = g.dx();
    for (std::size_t i = 0; i < g.size(); ++i)
        out.values[i] = set.member[i] ? -std::sqrt(toOutside[i]) * dx : std::sqrt(toMembers[i]) * dx;
    return out;
}

SignedDistanceField sublevel_signed_distance(const ScalarField& u0, double h, Closure closure, double tauLvl)
{
    const Grid& g = u0.grid;
    const double level = closure == Closure::Open ? h - tauLvl : h + tauLvl;
    std::vector<double> phi(g.size());
    std::vector<std::uint8_t> member(g.size());
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        phi[i] = u0.values[i] - level;
        bool in = closure == Closure::Open ? phi[i] < 0.0 : phi[i] <= 0.0;
        member[i] = in ? 1 : 0;
        if (in) {
            ++count;
            if (g.on_frame(i))
                throw Error(ErrorCode::CoercivityViolation,
                            "sublevel set at level " + std::to_string(h) + " touches the grid frame");
        }
    }
    SignedDistanceField out;
    out.grid = g;
    out.provenance = SdfProvenance::SubcellInterface;
    if (count == 0) {
        out.flag = SetFlag::Empty;
        out.values.assign(g.size(), kInf);
        return out;
    }
    LevelLine line(g, phi, member);
    line.closedTies_ = closure == Closure::Closed;
    line.build();
    std::vector<double> d2 = nearest_segment_distance(g, line);
    out.values.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double d = std::sqrt(d2[i]);
        out.values[i] = member[i] ? -d : d;
    }
    return out;
}

InterfaceBand sublevel_interface_band(const ScalarField& u0, double h, Closure closure, double tauLvl)
{
    const Grid& g = u0.grid;
    const double level = closure == Closure::Open ? h - tauLvl : h + tauLvl;
    std::vector<double> phi(g.size());
    InterfaceBand band;
    band.member.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        phi[i] = u0.values[i] - level;
        band.member[i] = (closure == Closure::Open ? phi[i] < 0.0 : phi[i] <= 0.0) ? 1 : 0;
    }
    LevelLine line(g, phi, band.member);
    line.closedTies_ = closure == Closure::Closed;
    line.build();
    const auto& segs = line.segments();
    if (segs.empty())
        return band;
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            double best = kInf;
            double px = g.x(i), py = g.y(j);
            line.for_adjacent(i, j, [&](int s) { best = std::min(best, segment_dist2(segs[s], px, py)); });
            if (best == kInf)
                continue;
            std::size_t idx = g.index(i, j);
            double d = std::sqrt(best);
            band.nodes.push_back(idx);
            band.sd.push_back(band.member[idx] ? -d : d);
        }
    }
    return band;
}

BinarySet parallel_set(const SignedDistanceField& sdf, double s, Closure closure)
{
    BinarySet out(sdf.grid);
    const double tau = tol::kClassifyFactor * sdf.grid.dx();
    for (std::size_t i = 0; i < sdf.values.size(); ++i) {
        double v = sdf.values[i];
        bool in = closure == Closure::Open ? v < s - tau : v <= s + tau;
        out.member[i] = in ? 1 : 0;
    }
    return out;
}

double frame_distance(const SignedDistanceField& sdf)
{
    const Grid& g = sdf.grid;
    double best = kInf;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.on_frame(i))
            best = std::min(best, sdf.values[i]);
    return best;
}

PerimeterResult perimeter(const BinarySet& set)
{
    PerimeterResult r;
    std::size_t members = set.count();
    if (members == 0) {
        r.emptyWarning = true;
        return r;
    }
    if (members == set.member.size())
        return r;
    const Grid& g = set.grid;
    if (g.dim() == 1) {
        r.value = level_line_length(g, [&](std::size_t i) { return set.member[i] ? -1.0 : 1.0; });
        return r;
    }
    // Contour of the calibrated distance after one binomial smoothing pass; the
    // raw cell-centre staircase otherwise biases the length upward.
    SignedDistanceField sdf = signed_distance(set);
    const int nx = g.nx(), ny = g.ny();
    std::vector<double> base(g.size()), smooth(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        base[i] = sdf.calibrated(i);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            double acc = 0.0, wsum = 0.0;
            for (int dj = -1; dj <= 1; ++dj) {
                for (int di = -1; di <= 1; ++di) {
                    int a = i + di, b = j + dj;
                    if (a < 0 || b < 0 || a >= nx || b >= ny)
                        continue;
                    double w = (di == 0 ? 2.0 : 1.0) * (dj == 0 ? 2.0 : 1.0);
                    acc += w * base[g.index(a, b)];
                    wsum += w;
                }
            }
            smooth[g.index(i, j)] = acc / wsum;
        }
    }
    r.value = level_line_length(g, [&](std::size_t i) { return smooth[i]; });
    return r;
}

double contour_length(const SignedDistanceField& sdf, double level)
{
    return level_line_length(sdf.grid, [&](std::size_t i) { return sdf.calibrated(i) - level; });
}

std::vector<double> contour_lengths(const SignedDistanceField& sdf, const std::vector<double>& levels)
{
    std::vector<double> out;
    out.reserve(levels.size());
    for (double s : levels)
        out.push_back(contour_length(sdf, s));
    return out;
}

double member_hull_area(const BinarySet& set, double* hullPerimeter)
{
    const Grid& g = set.grid;
    std::vector<std::array<double, 2>> pts;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (set.member[i])
            pts.push_back(g.point(i));
    std::sort(pts.begin(), pts.end());
    std::vector<std::array<double, 2>> hull(2 * pts.size() + 1);
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross2(hull[k - 2][0], hull[k - 2][1], hull[k - 1][0], hull[k - 1][1], p[0], p[1]) <= 0)
            --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        const auto& p = pts[i];
        while (k >= t && cross2(hull[k - 2][0], hull[k - 2][1], hull[k - 1][0], hull[k - 1][1], p[0], p[1]) <= 0)
            --k;
        hull[k++] = p;
    }
    hull.resize(k > 0 ? k - 1 : 0);
    double area = 0.0, per = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        area += a[0] * b[1] - a[1] * b[0];
        per += std::hypot(b[0] - a[0], b[1] - a[1]);
    }
    if (hullPerimeter)
        *hullPerimeter = per;
    return 0.5 * std::abs(area);
}

SteinerFit steiner_check(const BinarySet& convexSet, const std::vector<double>& sRange)
{
    const Grid& g = convexSet.grid;
    if (g.dim() != 2)
        throw Error(ErrorCode::ConfigInvalid, "steiner_check needs a 2D set");
    if (sRange.size() < 3)
        throw Error(ErrorCode::ConfigInvalid, "steiner_check needs at least 3 dilation radii");
    SteinerFit fit;
    const double dx = g.dx();
    const double cell = g.cell_volume();
    fit.directArea = double(convexSet.count()) * cell;
    if (fit.directArea <= 0.0)
        throw Error(ErrorCode::NonConvexInput, "empty set");
    double hullPer = 0.0;
    double hullArea = member_hull_area(convexSet, &hullPer);
    // Member centres of a convex set span a hull no larger than the cell count.
    fit.hullExcess = hullArea / fit.directArea - 1.0;
    if (fit.hullExcess > tol::kSteinerConvexExcess)
        throw Error(ErrorCode::NonConvexInput,
                    "hull area exceeds set area by " + std::to_string(100.0 * fit.hullExcess) + "%");

    SignedDistanceField sdf = signed_distance(convexSet);
    if (frame_distance(sdf) <= sRange.back() + dx)
        throw Error(ErrorCode::DomainOverflow, "dilation reaches the grid frame");

    // Gap between the member hull and the set boundary, calibrated so the hull
    // dilated by it carries the direct area: dx/2 for axis-aligned edges, close
    // to 0 along curved ones. A fixed half-cell offset would bias Phi1.
    double gap = hullPer > 0.0 ? std::clamp((fit.directArea - hullArea) / hullPer, 0.0, 0.5 * dx) : 0.5 * dx;

    // Area of {dist to members < s + gap} with a linear sub-cell ramp of width dx.
    std::vector<double> area;
    for (double s : sRange) {
        double a = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            a += std::clamp(0.5 + (s + gap - sdf.values[i]) / dx, 0.0, 1.0);
        area.push_back(a * cell);
    }

    // Least squares for a + b s + c s^2 via normal equations.
    double S[5] = {0, 0, 0, 0, 0};
    double R[3] = {0, 0, 0};
    for (std::size_t k = 0; k < sRange.size(); ++k) {
        double p = 1.0;
        for (int e = 0; e < 5; ++e) {
            S[e] += p;
            if (e < 3)
                R[e] += p * area[k];
            p *= sRange[k];
        }
    }
    double A[3][4] = {{S[0], S[1], S[2], R[0]}, {S[1], S[2], S[3], R[1]}, {S[2], S[3], S[4], R[2]}};
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c]))
                piv = r;
        for (int k = 0; k < 4; ++k)
            std::swap(A[c][k], A[piv][k]);
        for (int r = 0; r < 3; ++r) {
            if (r == c)
                continue;
            double m = A[r][c] / A[c][c];
            for (int k = c; k < 4; ++k)
                A[r][k] -= m * A[c][k];
        }
    }
    fit.phi0 = A[0][3] / A[0][0];
    fit.phi1 = A[1][3] / A[1][1];
    fit.phi2 = A[2][3] / A[2][2];
    double rss = 0.0;
    for (std::size_t k = 0; k < sRange.size(); ++k) {
        double s = sRange[k];
        double r = area[k] - (fit.phi0 + fit.phi1 * s + fit.phi2 * s * s);
        rss += r * r;
    }
    fit.relResidual = std::sqrt(rss / double(sRange.size())) / fit.phi0;
    return fit;
}

SublevelPair sublevel_sets(const ScalarField& u0, double h, double tauLvl)
{
    const Grid& g = u0.grid;
    SublevelPair out{BinarySet(g), BinarySet(g)};
    for (std::size_t i = 0; i < g.size(); ++i) {
        double v = u0.values[i];
        if (!std::isfinite(v))
            throw Error(ErrorCode::ConfigInvalid, "initial data must be finite");
        out.strict.member[i] = v < h - tauLvl ? 1 : 0;
        out.closed.member[i] = v <= h + tauLvl ? 1 : 0;
        if (out.closed.member[i] && g.on_frame(i))
            throw Error(ErrorCode::CoercivityViolation,
                        "closed sublevel set at level " + std::to_string(h) + " touches the grid frame");
    }
    return out;
}

} // namespace levelflow
