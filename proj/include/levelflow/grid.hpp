/**
 * @file grid.hpp
 * @brief Uniform node-centred grids and the field types sampled on them.
 *
 * Sample k along an axis sits at origin + k*dx. Storage is row-major with x
 * fastest: index = j*nx + i.
 */
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace levelflow {

class Grid {
public:
    Grid() = default;
    Grid(int dim, std::array<double, 2> origin, double dx, std::array<int, 2> counts);

    // Grid covering [lower, upper] per axis; counts are rounded to the nearest node.
    static Grid from_box(int dim, std::array<double, 2> lower, std::array<double, 2> upper, double dx);

    int dim() const { return dim_; }
    double dx() const { return dx_; }
    int nx() const { return n_[0]; }
    int ny() const { return n_[1]; }
    std::array<int, 2> counts() const { return n_; }
    std::array<double, 2> origin() const { return origin_; }
    std::size_t size() const { return static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(n_[1]); }
    double cell_volume() const { return dim_ == 1 ? dx_ : dx_ * dx_; }

    std::size_t index(int i, int j = 0) const { return static_cast<std::size_t>(j) * n_[0] + i; }
    int ix(std::size_t idx) const { return static_cast<int>(idx % n_[0]); }
    int iy(std::size_t idx) const { return static_cast<int>(idx / n_[0]); }
    double x(int i) const { return origin_[0] + i * dx_; }
    double y(int j) const { return dim_ == 1 ? 0.0 : origin_[1] + j * dx_; }
    std::array<double, 2> point(std::size_t idx) const { return {x(ix(idx)), y(iy(idx))}; }

    bool on_frame(int i, int j) const;
    bool on_frame(std::size_t idx) const { return on_frame(ix(idx), iy(idx)); }
    std::array<double, 2> upper() const { return {x(n_[0] - 1), dim_ == 1 ? 0.0 : y(n_[1] - 1)}; }

    bool operator==(const Grid& other) const;
    bool operator!=(const Grid& other) const { return !(*this == other); }

private:
    int dim_ = 1;
    std::array<double, 2> origin_{0.0, 0.0};
    double dx_ = 1.0;
    std::array<int, 2> n_{2, 1};
};

void require_same_grid(const Grid& a, const Grid& b, const char* where);

struct ScalarField {
    Grid grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    double min() const;
    double max() const;
};

struct BinarySet {
    Grid grid;
    std::vector<std::uint8_t> member;

    BinarySet() = default;
    explicit BinarySet(const Grid& g, bool fill = false) : grid(g), member(g.size(), fill ? 1 : 0) {}
    bool operator[](std::size_t i) const { return member[i] != 0; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    bool full() const { return count() == member.size(); }
};

enum class Closure { Open, Closed };

} // namespace levelflow
