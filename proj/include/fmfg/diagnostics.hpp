#pragma once

#include "fmfg/ergodic.hpp"
#include "fmfg/fit.hpp"
#include "fmfg/mfg.hpp"
#include "fmfg/model.hpp"

#include <array>
#include <string>
#include <vector>

namespace fmfg {

/// Distance of an evolution to the stationary triple, one entry per time node.
struct TurnpikeSeries {
    Eigen::VectorXd t;
    Eigen::VectorXd tv;    ///< ||m(t) - m_bar||_{TV_k}
    Eigen::VectorXd osc;   ///< osc_k of u(t) - u_bar - lambda (T - t)
    Eigen::VectorXd osc_raw;  ///< osc_k of u(t) - u_bar
    Eigen::VectorXd grad;  ///< grad_linf_k of u(t) - u_bar
    Eigen::VectorXd mass;
    Eigen::VectorXd moment;  ///< k-moment of m(t)
};

struct TurnpikeReport {
    TurnpikeSeries series;
    /// Fits per series in the order tv, osc, grad: left on [0.1T, 0.4T] against e^{-omega t},
    /// right on [0.6T, 0.9T] against e^{-omega (T - t)}.
    std::array<ExponentialFit, 3> left;
    std::array<ExponentialFit, 3> right;
    double omega_left = 0.0;   ///< smallest left rate
    double omega_right = 0.0;  ///< smallest right rate
    double omega = 0.0;        ///< min(omega_left, omega_right)
    double min_r_squared = 0.0;
    bool floor = false;        ///< some fit window reached the numeric floor
    std::array<double, 3> midpoint{};  ///< series values at the node nearest T/2
    double plateau = 0.0;      ///< largest of the three midpoint values
    /// Smallest M with every series <= M (e^{-omega t} + e^{-omega (T - t)}).
    double M = 0.0;
    double T = 0.0;

    /// Value of series s (0 tv, 1 osc, 2 grad) at the node nearest time t.
    double at(int s, double t) const;
};

TurnpikeReport turnpike_report(const ProblemInstance& instance, const MfgSolution& evolution,
                               const ErgodicSolution& ergodic);

/// Linear backward problem  -v_t - L v + b . Dv = f  with H = 0.
HjbScheme linear_scheme(const ProblemInstance& instance, const DriftField& drift);

struct DecayReport {
    Eigen::VectorXd t;
    Eigen::VectorXd series;  ///< osc_k(v(t))
    ExponentialFit fit;      ///< against e^{-omega (T - t)} on [0.1T, 0.9T]
};

/// Source-free linear backward solve from v_T; fits the decay of osc_k(v(t)).
DecayReport linear_decay_check(const ProblemInstance& instance, const DriftField& drift, const GridFunction& vT);

struct DuhamelReport {
    /// Semigroup constants from source-free runs on the probe data (v_T and the distinct
    /// source profiles): osc_k(S_tau g) <= K e^{-omega tau} osc_k(g), and
    /// grad_linf_k(S_tau g) <= K_grad (e^{-omega tau} + tau^{-1/sigma} 1{tau <= 1}) osc_k(g).
    double K = 0.0;
    double omega = 0.0;
    double K_grad = 0.0;
    int probes = 0;
    Eigen::VectorXd t;
    Eigen::VectorXd osc;        ///< osc_k(v(t))
    Eigen::VectorXd osc_bound;  ///< K e^{-omega (T-t)} [v_T] + K sum_{s > t} dt e^{-omega (s-t)} [f(s)]
    Eigen::VectorXd grad;       ///< grad_linf_k(v(t))
    Eigen::VectorXd grad_bound; ///< gradient envelope, evaluated for t <= T - 1
    double osc_ratio = 0.0;     ///< max osc / osc_bound
    double grad_ratio = 0.0;    ///< max grad / grad_bound over t <= T - 1
    double ratio = 0.0;         ///< max of the two
    /// Terminal layer: log-log slope of grad_linf_k(w(T - tau)) on tau in [0.1, 1], where w
    /// solves the same equation with zero terminal datum.
    ExponentialFit terminal_layer;
    double terminal_exponent = 0.0;
};

/// Sourced linear backward solve; `source` has one column per time node.
DuhamelReport duhamel_check(const ProblemInstance& instance, const DriftField& drift, const GridFunction& vT,
                            const TimeField& source);

struct ForcedFpReport {
    Eigen::VectorXd t;
    Eigen::VectorXd tv;  ///< ||mu(t)||_{TV_k}
    double omega = 0.0;  ///< decay rate of the unforced run
    double K_decay = 0.0;
    /// Per ladder value delta: fitted forcing constant and envelope ratio of the combined run.
    std::vector<double> deltas;
    std::vector<double> K_forcing;
    std::vector<double> ratios;
    double ratio = 0.0;
    double gamma = 0.0;
    double gamma_prime = 0.0;
    double integral = 0.0;   ///< int_0^T ||mu||_{TV_k}^{gamma'} dt
    double phi_sup = 0.0;    ///< sup_t ||Phi(t)||_{L^inf(<x>^{-k})}
    double phi_energy = 0.0; ///< int_0^T int |Phi|^2 dm_bar dt
    double rhs = 0.0;        ///< ||mu0||^{gamma'} + phi_sup^{gamma'-2} phi_energy
};

/// Solves mu_t - L* mu - div(b mu) = div(m_bar Phi) from mu0 (zero mass), with the source
/// assembled through the transpose of the upwind transport of Phi.
ForcedFpReport nonhomogeneous_fp_check(const ProblemInstance& instance, const DriftField& drift,
                                       const GridFunction& mu0, const TimeField& Phi, const GridFunction& m_bar,
                                       const std::vector<double>& deltas = {0.25, 0.5, 1.0});

/// Nonlinear backward solve with zero source from u_T; log-log slope of
/// grad_linf_k(u(T - tau)) over tau in [tau0, tau1] (the fit rate is minus the slope).
struct RegularizationReport {
    Eigen::VectorXd tau;
    Eigen::VectorXd grad;
    ExponentialFit fit;  ///< in log tau
    double slope = 0.0;
};

RegularizationReport regularizing_effect(const ProblemInstance& instance, const GridFunction& uT, double tau0,
                                         double tau1);

/// Terminal datum |sin x|^{1/2}, Hoelder continuous of order 1/2 only.
GridFunction holder_datum(const Grid& grid);

}  // namespace fmfg
