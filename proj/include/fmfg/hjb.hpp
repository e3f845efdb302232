#pragma once

#include "fmfg/grid.hpp"
#include "fmfg/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace fmfg {

/// First-order transport v . Du discretized by one-sided differences:
///   (P u)_i = backward_i (u_i - u_{i-1}) / h + forward_i (u_{i+1} - u_i) / h
/// with backward >= 0 and forward <= 0. The missing difference at each end node is zero,
/// so every row of P sums to zero.
struct UpwindCoefficients {
    GridFunction backward;
    GridFunction forward;
};

/// Splits a velocity field by sign: positive speeds use the backward difference.
UpwindCoefficients upwind_velocity(const GridFunction& v);

GridFunction transport(const Grid& grid, const UpwindCoefficients& c, const GridFunction& u);
/// Exact transpose of transport().
GridFunction transport_adjoint(const Grid& grid, const UpwindCoefficients& c, const GridFunction& m);
Eigen::MatrixXd transport_matrix(const Grid& grid, const UpwindCoefficients& c);

/// Monotone numerical Hamiltonian. Engquist-Osher for the kinetic-saturated family
/// (its minimum in p is at 0); Lax-Friedrichs with dissipation L_H otherwise.
GridFunction numerical_hamiltonian(const Grid& grid, const Hamiltonian& H, const GridFunction& u);

/// Gradient of numerical_hamiltonian with respect to u, in upwind form.
UpwindCoefficients hamiltonian_linearization(const Grid& grid, const Hamiltonian& H, const GridFunction& u);

/// Largest time step keeping the explicit Hamiltonian update monotone.
double cfl_limit(const Grid& grid, const Hamiltonian& H);

/// Backward IMEX scheme. One step reads
///   (I + dt (-L + B)) u^n = u^{n+1} - dt Hnum(u^{n+1}) + dt f^{n+1},
/// where B is the upwinded drift transport. The implicit matrix is an M-matrix;
/// its inverse is formed once and reused by the adjoint Fokker-Planck step.
class HjbScheme {
public:
    /// `hamiltonian` empty means H = 0. `levy` is the n x n matrix of the nonlocal operator.
    HjbScheme(const Grid& grid, const Eigen::MatrixXd& levy, const GridFunction& drift,
              std::optional<Hamiltonian> hamiltonian, double dt);
    /// Scheme of an instance: truncated drift and the instance time step.
    explicit HjbScheme(const ProblemInstance& instance);

    const Grid& grid() const { return grid_; }
    double dt() const { return dt_; }
    const GridFunction& drift() const { return drift_; }
    bool has_hamiltonian() const { return H_.has_value(); }
    const Hamiltonian& hamiltonian() const { return *H_; }

    /// -L + B, the stationary linear part.
    const Eigen::MatrixXd& generator() const { return generator_; }
    const Eigen::MatrixXd& implicit_matrix() const { return implicit_; }
    const Eigen::MatrixXd& implicit_inverse() const { return inverse_; }

    GridFunction flux(const GridFunction& u) const;
    UpwindCoefficients linearize(const GridFunction& u) const;

    /// u^n from u^{n+1} and the source at time n+1.
    GridFunction step(const GridFunction& u_next, const GridFunction& source_next) const;

    /// Linear step u^n = A^{-1} (I - dt P) u^{n+1}; its transpose is the Fokker-Planck step.
    GridFunction linear_step(const GridFunction& u_next, const UpwindCoefficients& c) const;
    /// m^{n+1} = A^{-T} (I - dt P)^T m^n.
    GridFunction adjoint_step(const GridFunction& m, const UpwindCoefficients& c) const;

private:
    Grid grid_;
    double dt_;
    GridFunction drift_;
    std::optional<Hamiltonian> H_;
    Eigen::MatrixXd generator_;
    Eigen::MatrixXd implicit_;
    Eigen::MatrixXd inverse_;
};

struct HjbSolution {
    Eigen::VectorXd times;
    TimeField u;   ///< column n at times[n]
    TimeField du;  ///< grid gradient of each column

    Eigen::Index steps() const { return u.cols() - 1; }
    /// Column closest to time t.
    Eigen::Index index_of(double t) const;
};

/// Backward solve from the terminal datum; `source` holds one column per time node.
HjbSolution solve_backward(const HjbScheme& scheme, const GridFunction& terminal, const TimeField& source);
HjbSolution solve_backward(const ProblemInstance& instance, const TimeField& source);
/// Time-independent source.
HjbSolution solve_backward(const ProblemInstance& instance, const GridFunction& source);

/// max of |Du| and of the neighbour difference quotients at the node nearest to t.
double lipschitz_seminorm(const HjbSolution& sol, const Grid& grid, double t);

/// max over |x| <= r, 0 < |y| <= min(1, r) and interior times of
/// |u(x+y) - 2u(x) + u(x-y)| / |y|^2.
double second_difference_bound(const HjbSolution& sol, const Grid& grid, double r);

/// One backward solve per truncation radius.
std::vector<HjbSolution> solve_truncated_family(const ProblemInstance& instance, const std::vector<double>& radii,
                                                const TimeField& source);

}  // namespace fmfg
