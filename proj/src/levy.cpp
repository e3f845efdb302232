#include "fmfg/levy.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fmfg {

namespace {

using boost::math::quadrature::gauss_kronrod;

// int_a^b z^p e^{-lambda z} dz for 0 <= a < b <= inf.
double power_integral(double p, double lambda, double a, double b) {
    if (lambda == 0.0) {
        if (std::isinf(b)) return -std::pow(a, p + 1.0) / (p + 1.0);  // requires p < -1
        return (std::pow(b, p + 1.0) - std::pow(a, p + 1.0)) / (p + 1.0);
    }
    auto f = [p, lambda](double z) { return std::pow(z, p) * std::exp(-lambda * z); };
    if (a == 0.0) {
        // Split off the singular part so that the integrand handed to the rule is smooth.
        const double head = std::pow(b, p + 1.0) / (p + 1.0);
        auto g = [p, lambda](double z) { return std::pow(z, p) * std::expm1(-lambda * z); };
        return head + gauss_kronrod<double, 31>::integrate(g, 0.0, b, 8, 1e-13);
    }
    return gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-13);
}

}  // namespace

LevyKernel LevyKernel::symmetric(double sigma, double scale) {
    LevyKernel k;
    k.sigma = sigma;
    k.scale_right = scale;
    k.scale_left = scale;
    return k;
}

double LevyKernel::fractional_scale(double sigma) {
    return sigma * std::pow(2.0, sigma - 1.0) * std::tgamma((1.0 + sigma) / 2.0) /
           (std::sqrt(std::numbers::pi) * std::tgamma(1.0 - sigma / 2.0));
}

LevyKernel LevyKernel::fractional(double sigma) { return symmetric(sigma, fractional_scale(sigma)); }

double LevyKernel::density(double z) const {
    if (z == 0.0) return std::numeric_limits<double>::infinity();
    const double a = std::abs(z);
    const double c = z > 0 ? scale_right : scale_left;
    return c * std::pow(a, -1.0 - sigma) * std::exp(-tempering * a);
}

double LevyKernel::bound_constant() const {
    const double hi = std::max(scale_left, scale_right);
    const double lo = std::min(scale_left, scale_right);
    return std::max(hi, 1.0 / lo);
}

void LevyKernel::check() const {
    if (!(sigma > 1.0 && sigma < 2.0)) throw std::invalid_argument("levy kernel: sigma must lie in (1,2)");
    if (!(scale_right > 0.0 && scale_left > 0.0))
        throw std::invalid_argument("levy kernel: density scales must be positive");
    if (tempering < 0.0) throw std::invalid_argument("levy kernel: tempering must be nonnegative");
}

LevyOperator::LevyOperator(const LevyKernel& kernel, const Grid& grid, Extension ext)
    : kernel_(kernel), grid_(grid), ext_(ext) {
    kernel_.check();
    if (!(grid.h() < 1.0)) throw std::invalid_argument("levy operator: mesh width must be < 1");
    if (kernel_.z_cut < grid.x_max()) throw std::invalid_argument("levy operator: z_cut must be >= x_max");
    assemble();
}

LevyOperator::LevyOperator(const Grid& grid) : grid_(grid), ext_(Extension::clamp), active_(false) {
    kernel_.scale_right = 0.0;
    kernel_.scale_left = 0.0;
    w_right_ = Eigen::VectorXd::Zero(2);
    w_left_ = Eigen::VectorXd::Zero(2);
    tail_right_ = Eigen::VectorXd::Zero(grid.size());
    tail_left_ = Eigen::VectorXd::Zero(grid.size());
    matrix_ = Eigen::MatrixXd::Zero(grid.size(), grid.size());
}

LevyOperator LevyOperator::none(const Grid& grid) { return LevyOperator(grid); }

void LevyOperator::assemble() {
    const double h = grid_.h();
    const double s = kernel_.sigma;
    const double lam = kernel_.tempering;
    const Eigen::Index n = grid_.size();
    const Eigen::Index J = std::max<Eigen::Index>(n, static_cast<Eigen::Index>(std::ceil(kernel_.z_cut / h)));

    // Second-moment matched cell weights: w_j (jh)^2 = int_cell z^2 dnu.
    // Matches quadratics exactly on every cell, which keeps the discrete symbol accurate.
    Eigen::VectorXd moment(J + 1);
    moment[0] = 0.0;
    for (Eigen::Index j = 1; j <= J; ++j) {
        const double a = (static_cast<double>(j) - 0.5) * h;
        const double b = (static_cast<double>(j) + 0.5) * h;
        const double z = static_cast<double>(j) * h;
        moment[j] = power_integral(1.0 - s, lam, a, b) / (z * z);
    }
    w_right_ = kernel_.scale_right * moment;
    w_left_ = kernel_.scale_left * moment;

    // Whole outer tail beyond cell d; lands on the boundary node under clamp extension.
    Eigen::VectorXd tail(n);
    for (Eigen::Index d = 0; d < n; ++d) {
        const double a = (static_cast<double>(d) + 0.5) * h;
        tail[d] = power_integral(-1.0 - s, lam, a, std::numeric_limits<double>::infinity());
    }
    tail_right_ = kernel_.scale_right * tail;
    tail_left_ = kernel_.scale_left * tail;

    const double inner = power_integral(1.0 - s, lam, 0.0, 0.5 * h);
    inner_coef_ = 0.5 * (kernel_.scale_right + kernel_.scale_left) * inner / (h * h);

    // Compensator over h/2 < |z| <= 1 with the discrete first moment of the weights.
    comp_drift_ = 0.0;
    if (!kernel_.symmetric()) {
        const auto J1 = static_cast<Eigen::Index>(std::floor(1.0 / h + 0.5));
        for (Eigen::Index j = 1; j <= J1; ++j)
            comp_drift_ += (w_right_[j] - w_left_[j]) * static_cast<double>(j) * h;
    }

    matrix_ = Eigen::MatrixXd::Zero(n, n);
    auto add = [&](Eigen::Index i, Eigen::Index col, double w) {
        matrix_(i, col) += w;
        matrix_(i, i) -= w;
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index dr = n - 1 - i;  // cells to the right boundary
        const Eigen::Index dl = i;
        for (Eigen::Index j = 1; j <= dr; ++j) add(i, i + j, w_right_[j]);
        for (Eigen::Index j = 1; j <= dl; ++j) add(i, i - j, w_left_[j]);

        if (ext_ == Extension::clamp) {
            add(i, n - 1, tail_right_[dr]);
            add(i, 0, tail_left_[dl]);
        } else {
            // Landing value phi_b + l (phi_b - phi_{b-1}) for the l-th cell past the boundary.
            for (Eigen::Index l = 1; dr + l <= J; ++l) {
                const double w = w_right_[dr + l];
                const double dl_ = static_cast<double>(l);
                matrix_(i, n - 1) += w * (1.0 + dl_);
                matrix_(i, n - 2) -= w * dl_;
                matrix_(i, i) -= w;
            }
            for (Eigen::Index l = 1; dl + l <= J; ++l) {
                const double w = w_left_[dl + l];
                const double dl_ = static_cast<double>(l);
                matrix_(i, 0) += w * (1.0 + dl_);
                matrix_(i, 1) -= w * dl_;
                matrix_(i, i) -= w;
            }
        }

        // Inner band: second difference, dropped at the two end nodes.
        if (i > 0 && i + 1 < n) {
            add(i, i + 1, inner_coef_);
            add(i, i - 1, inner_coef_);
        }

        // -g phi', upwinded so the off-diagonal entry stays nonnegative.
        if (comp_drift_ > 0.0 && i > 0) add(i, i - 1, comp_drift_ / h);
        if (comp_drift_ < 0.0 && i + 1 < n) add(i, i + 1, -comp_drift_ / h);
    }

    // Rebuild the diagonal from the off-diagonal row sums with Neumaier summation.
    for (Eigen::Index i = 0; i < n; ++i) {
        double sum = 0.0, c = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double v = matrix_(i, j);
            const double t = sum + v;
            c += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
            sum = t;
        }
        matrix_(i, i) = -(sum + c);
    }
}

GridFunction LevyOperator::apply(const GridFunction& f) const {
    if (f.size() != grid_.size()) throw std::invalid_argument("levy apply: grid mismatch");
    return matrix_ * f;
}

GridFunction LevyOperator::apply_adjoint(const GridFunction& m) const {
    if (m.size() != grid_.size()) throw std::invalid_argument("levy apply_adjoint: grid mismatch");
    return matrix_.transpose() * m;
}

LevyOperator assemble(const LevyKernel& kernel, const Grid& grid, Extension ext) {
    return LevyOperator(kernel, grid, ext);
}

double growth_constant(const LevyOperator& op, double gamma) {
    const Grid& g = op.grid();
    const GridFunction phi = g.sample([gamma](double x) { return std::pow(bracket(x), gamma); });
    const GridFunction lphi = op.apply(phi);
    double c = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < g.size(); ++i)
        c = std::max(c, lphi[i] / std::pow(bracket(g[i]), gamma - 1.0));
    return c;
}

LyapunovCertificate lyapunov_certificate(const LevyOperator& op, const GridFunction& drift,
                                         double gamma, double L0, const CertificateSearch& search) {
    if (!(gamma > 0.0 && gamma < op.kernel().sigma))
        throw std::invalid_argument("lyapunov_certificate: gamma must lie in (0, sigma)");
    if (L0 < 0.0) throw std::invalid_argument("lyapunov_certificate: L0 must be nonnegative");
    const Grid& g = op.grid();
    if (drift.size() != g.size()) throw std::invalid_argument("lyapunov_certificate: grid mismatch");

    const GridFunction phi = g.sample([gamma](double x) { return std::pow(bracket(x), gamma); });
    const GridFunction dphi =
        g.sample([gamma](double x) { return gamma * x * std::pow(bracket(x), gamma - 2.0); });
    // phi grows without bound, so it is continued affinely past the boundary rather than clamped.
    const GridFunction lphi = !op.active() || op.extension() == Extension::linear
                                  ? op.apply(phi)
                                  : LevyOperator(op.kernel(), g, Extension::linear).apply(phi);
    const GridFunction expr = -lphi + drift.cwiseProduct(dphi) - L0 * dphi.cwiseAbs();

    LyapunovCertificate best;
    best.gamma = gamma;
    best.L0 = L0;
    const double r_in = search.interior_fraction * g.x_max();
    const double l0 = std::log(search.omega_min);
    const double l1 = std::log(search.omega_max);
    for (int l = 0; l < search.omega_levels; ++l) {
        const double t = search.omega_levels > 1 ? static_cast<double>(l) / (search.omega_levels - 1) : 1.0;
        const double omega = std::exp(l0 + t * (l1 - l0));
        const GridFunction gap = omega * phi - expr;
        Eigen::Index arg = 0;
        const double K = std::max(0.0, gap.maxCoeff(&arg));
        if (std::abs(g[arg]) > r_in || K > search.K_max) continue;
        // Far field: the gap must not grow outward, otherwise the inequality fails beyond the grid.
        bool outward_decreasing = true;
        for (Eigen::Index i = 0; i + 1 < g.size(); ++i) {
            if (g[i + 1] <= -r_in && gap[i] > gap[i + 1]) outward_decreasing = false;
            if (g[i] >= r_in && gap[i + 1] > gap[i]) outward_decreasing = false;
        }
        if (!outward_decreasing) continue;
        best.omega0 = omega;
        best.K = K;
        best.valid = true;
    }
    if (best.valid) {
        best.margin = (expr - best.omega0 * phi).minCoeff() + best.K;
    } else {
        // Report the smallest trial so the caller can see how far off the drift is.
        best.omega0 = search.omega_min;
        best.K = std::min(search.K_max, std::max(0.0, (best.omega0 * phi - expr).maxCoeff()));
        best.margin = (expr - best.omega0 * phi).minCoeff() + best.K;
    }
    return best;
}

}  // namespace fmfg
