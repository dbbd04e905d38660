#include "levelflow/grid.hpp"

#include "levelflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace levelflow {

namespace {
constexpr std::size_t kMaxCells = std::size_t(1) << 28;
}

Grid::Grid(int dim, std::array<double, 2> origin, double dx, std::array<int, 2> counts)
    : dim_(dim), origin_(origin), dx_(dx), n_(counts)
{
    if (dim != 1 && dim != 2)
        throw Error(ErrorCode::ConfigInvalid, "grid dimension must be 1 or 2");
    if (!(dx > 0.0) || !std::isfinite(dx))
        throw Error(ErrorCode::ConfigInvalid, "grid spacing must be positive");
    if (dim == 1) {
        n_[1] = 1;
        origin_[1] = 0.0;
    }
    if (n_[0] < 2 || (dim == 2 && n_[1] < 2))
        throw Error(ErrorCode::ConfigInvalid, "grid needs at least 2 cells per axis");
    if (size() > kMaxCells)
        throw Error(ErrorCode::ConfigInvalid, "grid exceeds the cell budget");
}

Grid Grid::from_box(int dim, std::array<double, 2> lower, std::array<double, 2> upper, double dx)
{
    std::array<int, 2> n{1, 1};
    for (int a = 0; a < dim; ++a) {
        double cells = (upper[a] - lower[a]) / dx;
        if (!(cells > 0.0) || cells > double(kMaxCells))
            throw Error(ErrorCode::ConfigInvalid, "grid box is empty or too large");
        n[a] = static_cast<int>(std::llround(cells)) + 1;
    }
    return Grid(dim, lower, dx, n);
}

bool Grid::on_frame(int i, int j) const
{
    if (i == 0 || i == n_[0] - 1)
        return true;
    return dim_ == 2 && (j == 0 || j == n_[1] - 1);
}

bool Grid::operator==(const Grid& other) const
{
    return dim_ == other.dim_ && n_ == other.n_ && dx_ == other.dx_ && origin_ == other.origin_;
}

void require_same_grid(const Grid& a, const Grid& b, const char* where)
{
    if (a != b)
        throw Error(ErrorCode::GridMismatch, where);
}

double ScalarField::min() const
{
    return values.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : *std::min_element(values.begin(), values.end());
}

double ScalarField::max() const
{
    return values.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : *std::max_element(values.begin(), values.end());
}

std::size_t BinarySet::count() const
{
    return static_cast<std::size_t>(std::count(member.begin(), member.end(), std::uint8_t(1)));
}

} // namespace levelflow
