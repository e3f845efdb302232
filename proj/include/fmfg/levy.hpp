#pragma once

#include "fmfg/grid.hpp"

#include <Eigen/Dense>

namespace fmfg {

/// Power-law Levy density nu(dz) = c_side |z|^{-1-sigma} e^{-tempering |z|} dz,
/// with separate scales on the two half-lines.
struct LevyKernel {
    double sigma = 1.5;
    double scale_right = 1.0;  ///< c for z > 0
    double scale_left = 1.0;   ///< c for z < 0
    double tempering = 0.0;    ///< rate of the exponential tempering, 0 = off
    double z_cut = 40.0;       ///< integration limit for tempered tails and linear extension

    static LevyKernel symmetric(double sigma, double scale);
    /// Symmetric kernel normalized so that the operator is -(-Laplacian)^{sigma/2}.
    static LevyKernel fractional(double sigma);
    /// Normalization constant of the one-dimensional fractional Laplacian of order sigma.
    static double fractional_scale(double sigma);

    double density(double z) const;
    bool symmetric() const { return scale_left == scale_right; }
    /// Two-sided bound constant: c^{-1}|z|^{-1-sigma} <= dnu/dz <= c|z|^{-1-sigma} (untempered).
    double bound_constant() const;
    /// Throws std::invalid_argument unless sigma is in (1,2) and both scales are positive.
    void check() const;
};

/// How the operand of the operator is continued outside [-x_max, x_max].
enum class Extension {
    clamp,   ///< constant continuation by the boundary value; keeps the matrix monotone
    linear,  ///< affine continuation from the two nearest boundary nodes
};

/// Quadrature realization of the nonlocal operator
///   L phi(x) = int { phi(x+z) - phi(x) - phi'(x) z 1_{|z|<=1} } nu(dz)
/// as a dense n x n matrix with zero row sums. The adjoint is its exact transpose.
class LevyOperator {
public:
    LevyOperator(const LevyKernel& kernel, const Grid& grid, Extension ext = Extension::clamp);

    /// The zero operator (no jumps), for runs with the diffusion switched off.
    static LevyOperator none(const Grid& grid);
    bool active() const { return active_; }

    const LevyKernel& kernel() const { return kernel_; }
    const Grid& grid() const { return grid_; }
    Extension extension() const { return ext_; }
    const Eigen::MatrixXd& matrix() const { return matrix_; }

    /// Quadrature weight of the jump to offset +j (right) or -j (left), j >= 1.
    double weight_right(Eigen::Index j) const { return w_right_[j]; }
    double weight_left(Eigen::Index j) const { return w_left_[j]; }
    /// Coefficient of the second difference that replaces the band |z| < h/2.
    double inner_coefficient() const { return inner_coef_; }
    /// Drift coefficient of the compensator, nonzero only for asymmetric kernels.
    double compensator_drift() const { return comp_drift_; }
    /// Offsets beyond this many cells (z_cut / h) are not represented in the weight tables.
    Eigen::Index max_offset() const { return w_right_.size() - 1; }

    GridFunction apply(const GridFunction& f) const;
    GridFunction apply_adjoint(const GridFunction& m) const;

private:
    LevyKernel kernel_;
    Grid grid_;
    Extension ext_;
    Eigen::VectorXd w_right_;
    Eigen::VectorXd w_left_;
    Eigen::VectorXd tail_right_;  ///< mass of jumps beyond cell d, i.e. |z| > (d + 1/2) h
    Eigen::VectorXd tail_left_;
    double inner_coef_ = 0.0;
    double comp_drift_ = 0.0;
    Eigen::MatrixXd matrix_;
    bool active_ = true;

    explicit LevyOperator(const Grid& grid);
    void assemble();
};

/// Assembles the operator; rejects sigma outside (1,2), h >= 1 and z_cut < x_max.
LevyOperator assemble(const LevyKernel& kernel, const Grid& grid, Extension ext = Extension::clamp);

inline GridFunction apply(const LevyOperator& op, const GridFunction& f) { return op.apply(f); }
inline GridFunction apply_adjoint(const LevyOperator& op, const GridFunction& m) {
    return op.apply_adjoint(m);
}

/// Smallest c with L <x>^gamma <= c <x>^{gamma-1} on every node.
double growth_constant(const LevyOperator& op, double gamma);

/// Certificate that phi = <x>^gamma satisfies
///   -L phi + b phi' - L0 |phi'| >= omega0 phi - K
/// at every grid node.
struct LyapunovCertificate {
    double gamma = 0.0;
    double L0 = 0.0;
    double omega0 = 0.0;
    double K = 0.0;
    double margin = 0.0;
    bool valid = false;
};

/// For each trial omega0 the smallest admissible K is max_i(omega0 phi_i - E_i).
/// A pair is accepted when that maximum is attained in the inner part of the grid
/// (|x| <= interior_fraction * x_max) and K <= K_max: the inequality is then decided
/// by the dynamics and not by the truncation of the domain.
struct CertificateSearch {
    double omega_min = 1e-3;
    double omega_max = 1e2;
    int omega_levels = 241;  ///< log-spaced trial values
    double K_max = 1e6;
    double interior_fraction = 0.75;
};

/// Searches (omega0, K) maximizing omega0 subject to a nonnegative margin.
/// `drift` holds b sampled at the grid nodes. An invalid certificate signals that
/// the drift cannot dominate inside the truncated domain.
LyapunovCertificate lyapunov_certificate(const LevyOperator& op, const GridFunction& drift,
                                         double gamma, double L0,
                                         const CertificateSearch& search = {});

}  // namespace fmfg
