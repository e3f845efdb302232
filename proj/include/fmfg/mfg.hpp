#pragma once

#include "fmfg/fokker_planck.hpp"
#include "fmfg/hjb.hpp"
#include "fmfg/model.hpp"

#include <optional>
#include <vector>

namespace fmfg {

struct FixedPointConfig {
    double theta = 0.5;  ///< damping in (0, 1]
    int max_iters = 100;
    double tol = 1e-6;  ///< on sup_t d0(m^{j+1}(t), m^j(t))
    /// Averaged iterates: the step at iteration j is 1/(j+2) instead of theta.
    bool fictitious_play = false;

    void check() const;
};

struct MfgSolution {
    HjbSolution hjb;
    FpSolution fp;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> history;
    bool converged = false;
};

/// Damped Picard iteration on the density path:
///   u^j = backward solve with source F(m^j),  m~ = forward solve driven by u^j,
///   m^{j+1} = (1 - theta) m^j + theta m~.
/// Returns the pair (u^j, m~) of the last iteration. The starting path defaults to m(t) = m0.
MfgSolution solve_mfg(const ProblemInstance& instance, const FixedPointConfig& cfg,
                      const std::optional<TimeField>& initial = std::nullopt);

/// The same iteration with the drift replaced by its truncation b chi_R.
MfgSolution solve_truncated_mfg(const ProblemInstance& instance, double R, const FixedPointConfig& cfg);

/// Uniqueness functional of two evolution pairs with the same initial and terminal data:
///   sum_n dt <F(m_a^n) - F(m_b^n), m_a^n - m_b^n> + sum_n dt (bregman_a^n + bregman_b^n),
/// where bregman_a^n = <Hnum(u_b^n) - Hnum(u_a^n) - P_a^n (u_b^n - u_a^n), m_a^n>.
/// `duality` evaluates the same quantity a second way, by pairing the residuals of each
/// backward equation with the densities and of each forward equation with the values.
struct LasryLions {
    double coupling = 0.0;
    double bregman_a = 0.0;
    double bregman_b = 0.0;
    double total = 0.0;
    double duality = 0.0;
};

LasryLions lasry_lions_functional(const ProblemInstance& instance, const MfgSolution& a, const MfgSolution& b);
LasryLions lasry_lions_functional(const ProblemInstance& instance, const TimeField& u_a, const TimeField& m_a,
                                  const TimeField& u_b, const TimeField& m_b);

}  // namespace fmfg
