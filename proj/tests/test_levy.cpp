#include "doctest.h"

#include "fmfg/levy.hpp"

#include <cmath>
#include <functional>
#include <random>

using namespace fmfg;

namespace {

// Adaptive Simpson, independent of the operator's own integration routines.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 50) {
    auto simpson = [&](double lo, double hi, double flo, double fmid, double fhi) {
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    };
    std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps, int d) {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid);
            const double rm = 0.5 * (mid + hi);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = simpson(lo, mid, flo, flm, fmid);
            const double right = simpson(mid, hi, fmid, frm, fhi);
            if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
                return left + right + (left + right - whole) / 15.0;
            return rec(lo, mid, flo, flm, fmid, left, 0.5 * eps, d - 1) +
                   rec(mid, hi, fmid, frm, fhi, right, 0.5 * eps, d - 1);
        };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, depth);
}

// int (e^{-z^2} - 1) c |z|^{-1-sigma} dz over the real line.
double gaussian_reference(double sigma, double c) {
    auto f = [sigma](double z) { return std::expm1(-z * z) * std::pow(z, -1.0 - sigma); };
    const double z0 = 1e-6;
    // On [0, z0] the integrand is -z^{1-sigma} to relative accuracy z0^2.
    const double head = -std::pow(z0, 2.0 - sigma) / (2.0 - sigma);
    double body = 0.0;
    double lo = z0;
    for (double hi = 1e-4; lo < 60.0; lo = hi, hi *= 4.0) body += adaptive_simpson(f, lo, std::min(hi, 60.0), 1e-13);
    const double tail = -std::pow(60.0, -sigma) / sigma;
    return 2.0 * c * (head + body + tail);
}

GridFunction random_function(const Grid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    GridFunction v(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) v[i] = N(rng);
    return v;
}

}  // namespace

TEST_CASE("kernel validation") {
    CHECK_THROWS_AS(LevyOperator(LevyKernel::symmetric(1.0, 1.0), make_grid(5.0, 101)), std::invalid_argument);
    CHECK_THROWS_AS(LevyOperator(LevyKernel::symmetric(2.0, 1.0), make_grid(5.0, 101)), std::invalid_argument);
    CHECK_THROWS_AS(LevyOperator(LevyKernel::symmetric(1.5, 0.0), make_grid(5.0, 101)), std::invalid_argument);
    CHECK_THROWS_AS(LevyOperator(LevyKernel::fractional(1.5), make_grid(5.0, 9)), std::invalid_argument);
    CHECK(LevyKernel::symmetric(1.5, 0.5).bound_constant() == 2.0);
    CHECK(LevyKernel::fractional_scale(1.5) == doctest::Approx(0.29915).epsilon(1e-4));
}

TEST_CASE("matrix structure") {
    const Grid g = make_grid(10.0, 201);
    for (double sigma : {1.2, 1.5, 1.8}) {
        for (bool asym : {false, true}) {
            LevyKernel k = LevyKernel::fractional(sigma);
            if (asym) k.scale_left *= 0.5;
            for (Extension ext : {Extension::clamp, Extension::linear}) {
                const LevyOperator op(k, g, ext);
                CHECK(op.apply(g.constant(1.0)).cwiseAbs().maxCoeff() <= 1e-13);
                if (ext == Extension::linear) continue;
                const Eigen::MatrixXd& A = op.matrix();
                Eigen::MatrixXd off = A;
                off.diagonal().setZero();
                CHECK(off.minCoeff() >= 0.0);
                CHECK(A.diagonal().maxCoeff() <= 0.0);
            }
        }
    }
}

TEST_CASE("linear extension reproduces affine functions away from the boundary only in the interior") {
    const Grid g = make_grid(10.0, 201);
    const LevyOperator op(LevyKernel::fractional(1.5), g, Extension::linear);
    // Affine data continued affinely: the principal value vanishes at every node.
    CHECK(op.apply(g.nodes()).cwiseAbs().maxCoeff() <= 1e-11);
    const LevyOperator clamp(LevyKernel::fractional(1.5), g);
    CHECK(std::abs(clamp.apply(g.nodes())[g.center()]) <= 1e-12);
}

TEST_CASE("linearity and adjoint identity") {
    const Grid g = make_grid(8.0, 161);
    LevyKernel k = LevyKernel::fractional(1.6);
    k.scale_right *= 1.3;
    const LevyOperator op(k, g);
    std::mt19937_64 rng(42);
    for (int t = 0; t < 10; ++t) {
        const GridFunction f = random_function(g, rng);
        const GridFunction q = random_function(g, rng);
        const GridFunction m = random_function(g, rng);
        const GridFunction lin = op.apply(2.0 * f - 0.5 * q) - (2.0 * op.apply(f) - 0.5 * op.apply(q));
        CHECK(lin.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + op.apply(f).cwiseAbs().maxCoeff()));
        const double lhs = inner(g, op.apply(f), m);
        const double rhs = inner(g, f, op.apply_adjoint(m));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
    }
    const GridFunction delta = GridFunction::Unit(g.size(), 40);
    CHECK((op.apply_adjoint(delta) - op.matrix().row(40).transpose()).norm() == 0.0);
    CHECK_THROWS_AS(op.apply(GridFunction::Zero(5)), std::invalid_argument);
}

TEST_CASE("adjoint of an interior density has zero mass") {
    const Grid g = make_grid(10.0, 201);
    const LevyOperator op(LevyKernel::fractional(1.5), g);
    GridFunction m = g.sample([](double x) { return std::exp(-x * x); });
    CHECK(std::abs(mass(g, op.apply_adjoint(m))) <= 1e-12);
}

TEST_CASE("point value on a Gaussian against an adaptive quadrature oracle") {
    const double sigma = 1.5;
    const double c = LevyKernel::fractional_scale(sigma);
    const double ref = gaussian_reference(sigma, c);
    CHECK(ref == doctest::Approx(c * std::tgamma(-0.5 * sigma)).epsilon(1e-6));

    const Grid g = make_grid(20.0, 801);
    const LevyOperator op(LevyKernel::fractional(sigma), g);
    const GridFunction f = g.sample([](double x) { return std::exp(-x * x); });
    const double value = op.apply(f)[g.center()];
    CHECK(std::abs(value - ref) <= 0.02 * std::abs(ref));
}

TEST_CASE("symbol of the fractional Laplacian") {
    const Grid g = make_grid(40.0, 1601);
    for (double sigma : {1.3, 1.5, 1.8}) {
        const LevyOperator op(LevyKernel::fractional(sigma), g);
        const double xi_max = std::numbers::pi / (8.0 * g.h());
        for (double xi : {0.5, 1.0, 2.0, 4.0, xi_max}) {
            const GridFunction re = g.sample([xi](double x) { return std::cos(xi * x); });
            const GridFunction im = g.sample([xi](double x) { return std::sin(xi * x); });
            const GridFunction lre = op.apply(re);
            const GridFunction lim = op.apply(im);
            const double s = std::pow(xi, sigma);
            double worst = 0.0;
            for (Eigen::Index i = g.center() - 100; i <= g.center() + 100; ++i) {
                worst = std::max(worst, std::abs(lre[i] + s * re[i]) / s);
                worst = std::max(worst, std::abs(lim[i] + s * im[i]) / s);
            }
            CHECK_MESSAGE(worst <= 0.05, "sigma=" << sigma << " xi=" << xi << " err=" << worst);
        }
    }
}

TEST_CASE("growth of the Japanese bracket power") {
    const Grid g = make_grid(10.0, 201);
    const LevyOperator op(LevyKernel::fractional(1.5), g);
    const double gamma = 1.2;
    const double c = growth_constant(op, gamma);
    CHECK(std::isfinite(c));
    const GridFunction lphi = op.apply(g.sample([=](double x) { return std::pow(bracket(x), gamma); }));
    for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(lphi[i] <= c * std::pow(bracket(g[i]), gamma - 1.0) + 1e-12);
}

TEST_CASE("Lyapunov certificate") {
    const Grid g = make_grid(10.0, 201);
    const LevyOperator op(LevyKernel::fractional(1.5), g);
    const GridFunction b = g.nodes();

    const LyapunovCertificate cert = lyapunov_certificate(op, b, 1.2, 0.0);
    CHECK(cert.valid);
    CHECK(cert.omega0 > 0.0);
    CHECK(cert.margin >= 0.0);
    // Stated inequality, evaluated directly.
    const GridFunction phi = g.sample([](double x) { return std::pow(bracket(x), 1.2); });
    const GridFunction dphi = g.sample([](double x) { return 1.2 * x * std::pow(bracket(x), -0.8); });
    const LevyOperator lin(LevyKernel::fractional(1.5), g, Extension::linear);
    const GridFunction lhs = -lin.apply(phi) + b.cwiseProduct(dphi);
    CHECK(((lhs - cert.omega0 * phi).array() + cert.K).minCoeff() >= -1e-12);

    const LyapunovCertificate bad = lyapunov_certificate(op, b, 1.2, 1e6);
    CHECK_FALSE(bad.valid);

    const LyapunovCertificate lo = lyapunov_certificate(op, b, 0.5, 0.0);
    const LyapunovCertificate hi = lyapunov_certificate(op, b, 1.45, 0.0);
    CHECK(lo.valid);
    CHECK(hi.valid);
    // The coercivity rate is capped by alpha * gamma at infinity, so it grows with gamma.
    CHECK(lo.omega0 <= 0.5 * 1.05);
    CHECK(lo.omega0 < hi.omega0);

    const LyapunovCertificate budget = lyapunov_certificate(op, b, 1.2, 1.0);
    CHECK(budget.valid);
    CHECK(budget.margin >= 0.0);
    CHECK(budget.omega0 <= cert.omega0);

    CHECK_THROWS_AS(lyapunov_certificate(op, b, 1.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(lyapunov_certificate(op, b, 1.0, -1.0), std::invalid_argument);
}
