#include "sa/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sa {

GridSpec GridSpec::uniform(int dims, int per_axis) {
    GridSpec s;
    for (int i = 0; i < dims; ++i) s.cells[static_cast<std::size_t>(i)] = per_axis;
    return s;
}

GridSpec GridSpec::defaults(int dims) { return uniform(dims, dims == 3 ? 32 : 64); }

ValueGrid::ValueGrid(Workspace ws, GridSpec spec, ValueKind kind, int target_id)
    : ws_(std::move(ws)), spec_(spec), kind_(kind), target_id_(target_id) {
    std::size_t total = 1;
    for (int a = 0; a < 3; ++a) {
        if (spec_.cells[static_cast<std::size_t>(a)] < 1) throw std::invalid_argument("grid: cells per axis must be >= 1");
        if (a >= ws_.dims && spec_.cells[static_cast<std::size_t>(a)] != 1) {
            throw std::invalid_argument("grid: unused axes must have exactly one cell");
        }
        total *= static_cast<std::size_t>(spec_.cells[static_cast<std::size_t>(a)]);
    }
    values_.assign(total, 0.0);
    absorbing_.assign(total, 0);
}

double ValueGrid::cell_width(int axis) const {
    return (ws_.upper[axis] - ws_.lower[axis]) / cells(axis);
}

double ValueGrid::cell_diagonal() const {
    double s = 0.0;
    for (int a = 0; a < ws_.dims; ++a) s += cell_width(a) * cell_width(a);
    return std::sqrt(s);
}

std::size_t ValueGrid::flat_index(const std::array<int, 3>& idx) const {
    return (static_cast<std::size_t>(idx[0]) * static_cast<std::size_t>(spec_.cells[1]) +
            static_cast<std::size_t>(idx[1])) *
               static_cast<std::size_t>(spec_.cells[2]) +
           static_cast<std::size_t>(idx[2]);
}

std::array<int, 3> ValueGrid::unflatten(std::size_t flat) const {
    std::array<int, 3> idx{};
    idx[2] = static_cast<int>(flat % static_cast<std::size_t>(spec_.cells[2]));
    flat /= static_cast<std::size_t>(spec_.cells[2]);
    idx[1] = static_cast<int>(flat % static_cast<std::size_t>(spec_.cells[1]));
    idx[0] = static_cast<int>(flat / static_cast<std::size_t>(spec_.cells[1]));
    return idx;
}

Vec ValueGrid::center(std::size_t flat) const {
    const auto idx = unflatten(flat);
    Vec c(ws_.dims);
    for (int a = 0; a < ws_.dims; ++a) {
        c[a] = ws_.lower[a] + (idx[static_cast<std::size_t>(a)] + 0.5) * cell_width(a);
    }
    return c;
}

std::size_t ValueGrid::cell_containing(const Vec& p) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = 0; a < ws_.dims; ++a) {
        const double s = (std::clamp(p[a], ws_.lower[a], ws_.upper[a]) - ws_.lower[a]) / cell_width(a);
        idx[static_cast<std::size_t>(a)] = std::clamp(static_cast<int>(std::floor(s)), 0, cells(a) - 1);
    }
    return flat_index(idx);
}

Stencil ValueGrid::stencil(const Vec& p) const {
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int a = 0; a < ws_.dims; ++a) {
        const int n = cells(a);
        if (n == 1) continue;
        double s = (p[a] - ws_.lower[a]) / cell_width(a) - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(n - 1));
        // Snap round-off so centers hit their own cell with weight exactly 1.
        const double r = std::round(s);
        if (std::abs(s - r) < 1e-9) s = r;
        int i0 = std::min(static_cast<int>(std::floor(s)), n - 2);
        base[static_cast<std::size_t>(a)] = i0;
        frac[static_cast<std::size_t>(a)] = s - i0;
    }

    Stencil st;
    const int corners = 1 << ws_.dims;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::array<int, 3> idx = base;
        for (int a = 0; a < ws_.dims; ++a) {
            const bool hi = (c >> a) & 1;
            const double f = frac[static_cast<std::size_t>(a)];
            w *= hi ? f : 1.0 - f;
            if (hi) idx[static_cast<std::size_t>(a)] += 1;
        }
        if (w == 0.0) continue;
        st.index[static_cast<std::size_t>(st.count)] = flat_index(idx);
        st.weight[static_cast<std::size_t>(st.count)] = w;
        ++st.count;
    }
    return st;
}

double ValueGrid::interpolate(const Vec& p) const {
    const Stencil st = stencil(p);
    double v = 0.0;
    for (int k = 0; k < st.count; ++k) v += st.weight[static_cast<std::size_t>(k)] * values_[st.index[static_cast<std::size_t>(k)]];
    return v;
}

double eval_value(const ValueGrid& grid, const RobotState& x) { return grid.interpolate(x.pos); }

} // namespace sa
