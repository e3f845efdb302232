#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace fmfg {

/// Samples of a function on the grid nodes, one entry per node.
using GridFunction = Eigen::VectorXd;

/// Time-indexed field: column `n` holds the grid function at time node n.
using TimeField = Eigen::MatrixXd;

/// Uniform grid on [-x_max, x_max] with an odd node count so that 0 is a node.
class Grid {
public:
    Grid(double x_max, Eigen::Index n);

    double x_max() const { return x_max_; }
    Eigen::Index size() const { return n_; }
    double h() const { return h_; }
    Eigen::Index center() const { return (n_ - 1) / 2; }
    const Eigen::VectorXd& nodes() const { return nodes_; }
    double operator[](Eigen::Index i) const { return nodes_[i]; }

    bool same_as(const Grid& other) const { return n_ == other.n_ && x_max_ == other.x_max_; }

    GridFunction zeros() const { return GridFunction::Zero(n_); }
    GridFunction constant(double c) const { return GridFunction::Constant(n_, c); }

    template <typename F>
    GridFunction sample(F&& f) const {
        GridFunction out(n_);
        for (Eigen::Index i = 0; i < n_; ++i) out[i] = f(nodes_[i]);
        return out;
    }

private:
    double x_max_;
    Eigen::Index n_;
    double h_;
    Eigen::VectorXd nodes_;
};

/// Builds a grid; rejects even or too small node counts and non-positive half-widths.
Grid make_grid(double x_max, Eigen::Index n);

/// Japanese bracket <x> = sqrt(1 + x^2).
template <typename Scalar>
Scalar bracket(Scalar x) {
    using std::sqrt;
    return sqrt(Scalar(1) + x * x);
}

/// Weight vector <x_i>^k. Values are >= 1 with the minimum 1 at the center node.
class WeightVector {
public:
    WeightVector(const Grid& grid, double k);

    double k() const { return k_; }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd inverse() const { return values_.cwiseInverse(); }

private:
    double k_;
    Eigen::VectorXd values_;
};

/// Second-order derivative: centered in the interior, one-sided at the two ends.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
gradient(const Eigen::MatrixBase<Derived>& f, double h) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = f.size();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g(n);
    if (n < 3) throw std::invalid_argument("gradient: need at least 3 nodes");
    const Scalar inv2h = Scalar(1) / Scalar(2 * h);
    for (Eigen::Index i = 1; i + 1 < n; ++i) g[i] = (f[i + 1] - f[i - 1]) * inv2h;
    g[0] = (Scalar(-3) * f[0] + Scalar(4) * f[1] - f[2]) * inv2h;
    g[n - 1] = (Scalar(3) * f[n - 1] - Scalar(4) * f[n - 2] + f[n - 3]) * inv2h;
    return g;
}

inline GridFunction gradient(const Grid& grid, const GridFunction& f) {
    if (f.size() != grid.size()) throw std::invalid_argument("gradient: grid mismatch");
    return gradient(f, grid.h());
}

/// Trapezoid rule of f * w over the grid.
template <typename DerivedF, typename DerivedW>
typename DerivedF::Scalar trapezoid(const Eigen::MatrixBase<DerivedF>& f,
                                    const Eigen::MatrixBase<DerivedW>& w, double h) {
    const Eigen::Index n = f.size();
    auto prod = f.cwiseProduct(w);
    return h * (prod.sum() - 0.5 * (prod[0] + prod[n - 1]));
}

double weighted_quadrature(const Grid& grid, const GridFunction& f, const WeightVector& w);

/// Total mass of a discrete density: every node carries the cell mass h * m_i.
/// This is the quantity conserved exactly by the Fokker-Planck one-step matrices.
inline double mass(const Grid& grid, const GridFunction& m) { return grid.h() * m.sum(); }

/// Grid inner product <f, g>_h = h * sum f_i g_i.
inline double inner(const Grid& grid, const GridFunction& f, const GridFunction& g) {
    return grid.h() * f.dot(g);
}

/// k-moment of a density, h * sum <x_i>^k m_i.
double moment(const Grid& grid, const GridFunction& m, double k);

}  // namespace fmfg
