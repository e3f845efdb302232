#pragma once

#include "fmfg/fit.hpp"
#include "fmfg/hjb.hpp"
#include "fmfg/model.hpp"

#include <vector>

namespace fmfg {

/// Control part of the transport, one entry per time step n -> n+1.
/// The confining drift b is always part of the scheme; the control adds to it.
using ControlPath = std::vector<UpwindCoefficients>;

struct FpSolution {
    Eigen::VectorXd times;
    TimeField m;
    Eigen::VectorXd masses;
    Eigen::VectorXd moments;  ///< k-moments
};

/// Forward solve m^{n+1} = A^{-T} [(I - dt P_n)^T m^n + dt s^n], the transpose of the
/// linearized backward step. `source` (optional) has one column per step.
/// Throws std::runtime_error if a density entry drops below -1e-12.
FpSolution solve_forward(const HjbScheme& scheme, const GridFunction& m0, const ControlPath& control, double k,
                         const TimeField* source = nullptr);

/// Instance overloads. The control path must have instance.steps() entries; an empty
/// path means no control (pure drift b).
FpSolution solve_forward(const ProblemInstance& instance, const ControlPath& control);
FpSolution solve_forward(const ProblemInstance& instance, const GridFunction& m0, const ControlPath& control);
/// Extra velocity field v(t, x) added to b; column n is used for step n -> n+1.
FpSolution solve_forward(const ProblemInstance& instance, const TimeField& velocity);

struct StationaryDensity {
    GridFunction m;
    double residual = 0.0;  ///< h * |S m - m|_1 with S the one-step matrix
    int iterations = 0;
    bool converged = false;
};

/// Invariant density of the one-step matrix S = A^{-T} (I - dt P)^T by shifted inverse
/// iteration. Normalized to mass 1.
StationaryDensity solve_stationary(const HjbScheme& scheme, const UpwindCoefficients& control, int max_iter = 50,
                                   double tol = 1e-13);
StationaryDensity solve_stationary(const ProblemInstance& instance, const UpwindCoefficients& control);
/// Pure drift b, no control.
StationaryDensity solve_stationary(const ProblemInstance& instance);

/// Runs two forward solves with a common static control and fits
/// ||m_a(t) - m_b(t)||_{TV_k} on [0.5, T - 0.5].
ExponentialFit decay_rate(const ProblemInstance& instance, const UpwindCoefficients& control,
                          const GridFunction& m0_a, const GridFunction& m0_b);

}  // namespace fmfg
