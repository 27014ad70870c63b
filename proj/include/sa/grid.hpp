// Cell-centered scalar grids over the workspace with multilinear interpolation.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sa/world.hpp"

namespace sa {

/// Number of cells along each axis (unused axes are 1).
struct GridSpec {
    std::array<int, 3> cells{1, 1, 1};

    static GridSpec uniform(int dims, int per_axis);
    /// 64 cells per axis in 2-D, 32 in 3-D.
    static GridSpec defaults(int dims);
};

/// Interpolation weights over at most 2^3 cells.
struct Stencil {
    std::array<std::size_t, 8> index{};
    std::array<double, 8> weight{};
    int count = 0;
};

enum class ValueKind { hard, soft };

class ValueGrid {
public:
    ValueGrid() = default;
    ValueGrid(Workspace ws, GridSpec spec, ValueKind kind, int target_id);

    [[nodiscard]] const Workspace& workspace() const { return ws_; }
    [[nodiscard]] const GridSpec& spec() const { return spec_; }
    [[nodiscard]] ValueKind kind() const { return kind_; }
    [[nodiscard]] int target_id() const { return target_id_; }

    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] int cells(int axis) const { return spec_.cells[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] double cell_width(int axis) const;
    /// Length of the cell diagonal.
    [[nodiscard]] double cell_diagonal() const;

    /// Row-major flattening with axis order x, y[, z] (last axis fastest).
    [[nodiscard]] std::size_t flat_index(const std::array<int, 3>& idx) const;
    [[nodiscard]] std::array<int, 3> unflatten(std::size_t flat) const;
    [[nodiscard]] Vec center(std::size_t flat) const;
    /// Cell whose box contains p (p clamped to the workspace first).
    [[nodiscard]] std::size_t cell_containing(const Vec& p) const;

    /// Multilinear stencil between cell centers; positions outside the
    /// center lattice are clamped onto it. Exact at centers.
    [[nodiscard]] Stencil stencil(const Vec& p) const;
    [[nodiscard]] double interpolate(const Vec& p) const;

    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::span<double> values() { return values_; }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    /// Cells treated as captured (zero cost-to-go).
    [[nodiscard]] const std::vector<std::uint8_t>& absorbing() const { return absorbing_; }
    void set_absorbing(std::vector<std::uint8_t> mask) { absorbing_ = std::move(mask); }

private:
    Workspace ws_;
    GridSpec spec_;
    ValueKind kind_ = ValueKind::hard;
    int target_id_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> absorbing_;
};

/// Multilinear interpolation of the stored cell values at x.
double eval_value(const ValueGrid& grid, const RobotState& x);

} // namespace sa
