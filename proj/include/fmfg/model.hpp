#pragma once

#include "fmfg/grid.hpp"
#include "fmfg/levy.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace fmfg {

/// Confining vector field b with declared constants of
///   (b(x) - b(y))(x - y) >= alpha |x - y|^2 - beta |x - y|.
class DriftField {
public:
    enum class Kind { linear, cubic_saturated, custom };

    /// b(x) = alpha (x - shift) + wiggle sin(x); beta = 2 |wiggle|.
    static DriftField linear(double alpha, double shift = 0.0, double wiggle = 0.0);
    /// b(x) = alpha x + gain x^3 / (1 + x^2).
    static DriftField cubic_saturated(double alpha, double gain);
    /// Arbitrary callable with declared constants.
    static DriftField custom(std::function<double(double)> b, double alpha, double beta);
    /// Values tabulated on a grid, continued linearly between nodes and constantly outside.
    static DriftField table(const Grid& grid, const GridFunction& values, double alpha, double beta);

    Kind kind() const { return kind_; }
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    double operator()(double x) const { return b_(x); }
    GridFunction sample(const Grid& grid) const { return grid.sample(b_); }
    GridFunction derivative(const Grid& grid) const;

    /// b multiplied by the cutoff chi_R; the declared constants are kept.
    DriftField truncated(double R) const;

private:
    DriftField(Kind kind, std::function<double(double)> b, double alpha, double beta)
        : kind_(kind), b_(std::move(b)), alpha_(alpha), beta_(beta) {}

    Kind kind_;
    std::function<double(double)> b_;
    double alpha_;
    double beta_;
};

/// Smooth cutoff with chi = 1 on |x| <= R, chi = 0 on |x| >= 2R, |chi'| <= 2/R.
double cutoff(double x, double R);
double cutoff_derivative(double x, double R);

DriftField truncate_drift(const DriftField& drift, double R);

/// Hamiltonian H(x,p), convex in p. The default is the saturated kinetic energy
///   H(x,p) = c_H (sqrt(1 + p^2) - 1) + h0(x)
/// whose minimum in p sits at p = 0, which the Engquist-Osher flux relies on.
class Hamiltonian {
public:
    enum class Kind { kinetic_saturated, custom };

    /// `h0_bound` is the declared sup of |h0|; the growth constant is max(c_H, h0_bound).
    static Hamiltonian kinetic_saturated(double c_H, std::function<double(double)> h0 = {},
                                         double h0_bound = 0.0);
    /// Custom Hamiltonian: value, p-derivative and second p-derivative, plus the
    /// declared p-Lipschitz constant. Discretized with the Lax-Friedrichs flux.
    static Hamiltonian custom(std::function<double(double, double)> H,
                              std::function<double(double, double)> Hp,
                              std::function<double(double, double)> Hpp, double L_H, double C_H);

    Kind kind() const { return kind_; }
    double value(double x, double p) const;
    double dp(double x, double p) const;
    double dpp(double x, double p) const;
    double h0(double x) const { return h0_ ? h0_(x) : 0.0; }

    double lipschitz_p() const { return L_H_; }  ///< L_H
    double growth() const { return C_H_; }       ///< C_H
    double c_H() const { return c_H_; }

private:
    Kind kind_ = Kind::kinetic_saturated;
    double c_H_ = 1.0;
    double L_H_ = 1.0;
    double C_H_ = 1.0;
    std::function<double(double)> h0_;
    std::function<double(double, double)> H_, Hp_, Hpp_;
};

/// Nonlocal coupling F(x, m) = strength (rho * rho * m)(x) + f0(x), with rho a
/// triangular bump of half-width `width` and grid convolution. Linear in m:
/// F(m) = C m + f0 with C = strength R R symmetric positive semidefinite, so
/// the monotonicity integral is the square strength h |R (m1 - m2)|^2.
class Coupling {
public:
    Coupling(const Grid& grid, double strength, double width, std::function<double(double)> f0 = {});

    double strength() const { return strength_; }
    double width() const { return width_; }
    const Eigen::MatrixXd& matrix() const { return C_; }
    const Eigen::MatrixXd& mollifier() const { return R_; }
    const GridFunction& anchor() const { return f0_; }

    GridFunction operator()(const GridFunction& m) const { return C_ * m + f0_; }
    /// F applied to every column of a time field.
    TimeField apply(const TimeField& m) const;

    /// int (F(m1) - F(m2)) d(m1 - m2) = strength h |R (m1 - m2)|^2.
    double monotonicity_integral(const GridFunction& m1, const GridFunction& m2) const;

private:
    Grid grid_;
    double strength_;
    double width_;
    Eigen::MatrixXd R_;
    Eigen::MatrixXd C_;
    GridFunction f0_;
};

/// Complete problem data. Immutable; the assembled Levy operator is shared.
struct ProblemInstance {
    Grid grid;
    LevyKernel kernel;
    std::shared_ptr<const LevyOperator> levy;
    DriftField drift;
    Hamiltonian hamiltonian;
    Coupling coupling;
    GridFunction m0;
    GridFunction uT;
    double T = 1.0;
    double dt = 0.01;
    double k = 1.0;
    double R = std::numeric_limits<double>::infinity();  ///< drift truncation radius

    /// Number of time steps N with N dt = T.
    Eigen::Index steps() const;
    double step() const { return T / static_cast<double>(steps()); }
    Eigen::VectorXd times() const;

    /// Copy with a different horizon, terminal data, initial data or drift.
    ProblemInstance with_horizon(double T_new) const;
    ProblemInstance with_drift(DriftField d) const;
    ProblemInstance with_truncation(double R_new) const;
    ProblemInstance with_coupling(Coupling c) const;
    ProblemInstance with_data(GridFunction m0_new, GridFunction uT_new) const;

    /// The drift actually used by the solvers, b chi_R.
    DriftField effective_drift() const;
    /// Throws std::invalid_argument if m0 is not a probability density, k >= sigma, ...
    void check() const;
};

struct InstanceParams {
    double x_max = 10.0;
    Eigen::Index n = 401;
    double sigma = 1.5;
    double alpha = 1.0;
    double c_H = 1.0;
    double coupling_strength = 4.0;
    double coupling_width = 1.0;
    double anchor = 0.5;  ///< amplitude of f0(x) = anchor tanh(x)
    double m0_center = 2.0;
    double m0_std = 0.5;
    double uT_amplitude = -2.0;  ///< u_T(x) = uT_amplitude tanh(x)
    double T = 5.0;
    double dt = 0.01;
    double k = 1.0;
};

/// Default instance: OU drift, fractional kernel, kinetic-saturated H,
/// double-mollified coupling, Gaussian m0 and a tanh terminal profile.
ProblemInstance default_instance(const InstanceParams& p = {});

/// Normalized discrete Gaussian (mass h * sum = 1).
GridFunction gaussian_density(const Grid& grid, double center, double std);
GridFunction uniform_density(const Grid& grid);
GridFunction point_mass(const Grid& grid, Eigen::Index node);

struct AssumptionCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    double alpha = 0.0;
    double beta_measured = 0.0;
    double C_H = 0.0;
    double L_H = 0.0;
    double alpha_K = 0.0;
    double C_K = 0.0;
    double K_probe = 2.0;  ///< |p| <= K_probe for the convexity check
    double C_F = 0.0;
    double F3_oscillation = 0.0;  ///< sampled constant of the oscillation addend
    double F3_gradient = 0.0;     ///< sampled constant of the gradient addend
    double monotonicity_min = 0.0;
    double moment_k_m0 = 0.0;
    LyapunovCertificate certificate;

    bool all_passed() const;
    const AssumptionCheck* find(const std::string& name) const;
};

/// Runs every assumption validator. Deterministic: fixed sampling seed.
ValidationReport validate(const ProblemInstance& instance);

}  // namespace fmfg
