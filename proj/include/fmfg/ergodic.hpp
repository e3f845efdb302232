#pragma once

#include "fmfg/hjb.hpp"
#include "fmfg/model.hpp"

#include <optional>
#include <vector>

namespace fmfg {

/// Solution of  delta u + (-L + B) u + Hnum(u) = f.
struct DiscountedSolution {
    double delta = 0.0;
    GridFunction u;
    double residual = 0.0;  ///< max norm of the equation residual
    int iterations = 0;
    std::vector<double> history;
};

/// Policy iteration: freeze the upwind linearization of Hnum, solve the linear system, repeat.
/// Throws std::runtime_error with the residual history if the residual stalls above `tol`.
DiscountedSolution solve_discounted(const HjbScheme& scheme, const GridFunction& f, double delta, double tol = 1e-10,
                                    int max_iters = 100);
DiscountedSolution solve_discounted(const ProblemInstance& instance, const GridFunction& f, double delta);

struct ErgodicHjb {
    double lambda = 0.0;
    GridFunction u_bar;  ///< zero at the center node
    double residual = 0.0;  ///< max norm of  lambda + (-L + B) u + Hnum(u) - f
    /// delta u_delta(0) at each ladder level, and the two Richardson estimates.
    std::vector<double> deltas;
    std::vector<double> ladder;
    double richardson1 = 0.0;
    double richardson2 = 0.0;
    /// Lipschitz seminorm of u_delta - u_delta(0) at each ladder level.
    std::vector<double> lipschitz;
    int newton_iterations = 0;
};

struct ErgodicConfig {
    std::vector<double> deltas{0.1, 0.05, 0.025};
    double tol = 1e-10;            ///< residual of the ergodic HJB
    double extrapolation_tol = 1e-2;  ///< allowed gap between the two Richardson estimates
    double theta = 0.5;            ///< damping of the outer MFG iteration
    double mfg_tol = 1e-8;         ///< TV distance between successive densities
    int max_iters = 200;
    int threads = 1;               ///< ladder members solved concurrently

    void check() const;
};

/// Vanishing discount over the ladder, Richardson extrapolation of delta u_delta(0), then
/// Newton on the discrete ergodic system with u fixed to 0 at the center node.
ErgodicHjb solve_ergodic_hjb(const HjbScheme& scheme, const GridFunction& f, const ErgodicConfig& cfg = {});
ErgodicHjb solve_ergodic_hjb(const ProblemInstance& instance, const GridFunction& f, const ErgodicConfig& cfg = {});

/// Invariant density of the generator -L + B + P(control): the normalized null vector of
/// its transpose.
GridFunction stationary_density(const HjbScheme& scheme, const UpwindCoefficients& control);

struct ErgodicSolution {
    double lambda = 0.0;
    GridFunction u_bar;
    GridFunction m_bar;
    double residual_hjb = 0.0;
    double residual_fp = 0.0;  ///< max norm of  (-L + B + P)^T m_bar
    double moment_2k = 0.0;
    /// Mass of m_bar on the two end nodes, where jumps leaving the domain accumulate.
    double boundary_mass = 0.0;
    int iterations = 0;
    std::vector<double> history;
    bool converged = false;
};

/// Damped fixed point on the density: f = F(mu), ergodic HJB, stationary density, relax.
ErgodicSolution solve_ergodic_mfg(const ProblemInstance& instance, const ErgodicConfig& cfg = {},
                                  const std::optional<GridFunction>& initial = std::nullopt);

}  // namespace fmfg
