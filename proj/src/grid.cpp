#include "fmfg/grid.hpp"

#include <string>

namespace fmfg {

Grid::Grid(double x_max, Eigen::Index n) : x_max_(x_max), n_(n) {
    if (!(x_max > 0.0)) throw std::invalid_argument("grid: x_max must be positive");
    if (n < 3 || n % 2 == 0)
        throw std::invalid_argument("grid: node count must be odd and >= 3, got " + std::to_string(n));
    h_ = 2.0 * x_max / static_cast<double>(n - 1);
    nodes_.resize(n);
    const Eigen::Index c = (n - 1) / 2;
    // Built from the center outwards so the nodes are exactly antisymmetric.
    for (Eigen::Index j = 0; j <= c; ++j) {
        const double x = static_cast<double>(j) * h_;
        nodes_[c + j] = x;
        nodes_[c - j] = -x;
    }
    nodes_[0] = -x_max;
    nodes_[n - 1] = x_max;
}

Grid make_grid(double x_max, Eigen::Index n) {
    if (n < 9) throw std::invalid_argument("make_grid: need n >= 9, got " + std::to_string(n));
    return Grid(x_max, n);
}

WeightVector::WeightVector(const Grid& grid, double k) : k_(k) {
    values_ = grid.nodes().unaryExpr([k](double x) { return std::pow(bracket(x), k); });
}

double weighted_quadrature(const Grid& grid, const GridFunction& f, const WeightVector& w) {
    if (f.size() != grid.size() || w.values().size() != grid.size())
        throw std::invalid_argument("weighted_quadrature: grid mismatch");
    return trapezoid(f, w.values(), grid.h());
}

double moment(const Grid& grid, const GridFunction& m, double k) {
    const WeightVector w(grid, k);
    return grid.h() * m.dot(w.values());
}

}  // namespace fmfg
