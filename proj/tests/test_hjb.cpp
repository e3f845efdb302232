#include "doctest.h"

#include "fmfg/hjb.hpp"
#include "fmfg/norms.hpp"

#include <cmath>
#include <random>

using namespace fmfg;

namespace {

InstanceParams small_params() {
    InstanceParams p;
    p.x_max = 10.0;
    p.n = 201;
    p.T = 2.0;
    p.dt = 0.02;
    return p;
}

}  // namespace

TEST_CASE("implicit matrix is an M-matrix") {
    const ProblemInstance inst = default_instance(small_params());
    const HjbScheme s(inst);
    const Eigen::MatrixXd& A = s.implicit_matrix();
    Eigen::MatrixXd off = A;
    off.diagonal().setZero();
    CHECK(off.maxCoeff() <= 0.0);
    CHECK(A.diagonal().minCoeff() > 0.0);
    for (Eigen::Index i = 0; i < A.rows(); ++i) CHECK(A(i, i) + off.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.implicit_inverse().minCoeff() >= -1e-15);
}

TEST_CASE("CFL is enforced") {
    InstanceParams p = small_params();
    p.dt = 0.06;  // h = 0.1, limit h / (2 L_H) = 0.05
    CHECK_THROWS_AS(HjbScheme(default_instance(p)), std::invalid_argument);
}

TEST_CASE("constants are exact solutions without Hamiltonian or drift") {
    const Grid g = make_grid(10.0, 201);
    const LevyOperator op(LevyKernel::fractional(1.5), g);
    const HjbScheme s(g, op.matrix(), g.zeros(), std::nullopt, 0.05);
    const HjbSolution sol = solve_backward(s, g.constant(2.5), TimeField::Zero(g.size(), 41));
    CHECK((sol.u.array() - 2.5).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("space-independent source gives the linear profile") {
    InstanceParams p = small_params();
    p.uT_amplitude = 0.0;
    const ProblemInstance inst = default_instance(p);
    const double s = 0.7;
    const HjbSolution sol = solve_backward(inst, inst.grid.constant(s));
    for (Eigen::Index n = 0; n < sol.u.cols(); ++n)
        CHECK((sol.u.col(n).array() - s * (inst.T - sol.times[n])).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("Engquist-Osher flux") {
    const Grid g = make_grid(4.0, 81);
    const Hamiltonian H = Hamiltonian::kinetic_saturated(1.0);
    const GridFunction x = g.nodes();
    // Affine data: consistent with H(p) away from the ends.
    const GridFunction f = numerical_hamiltonian(g, H, 2.0 * x);
    CHECK(f[40] == doctest::Approx(std::sqrt(5.0) - 1.0).epsilon(1e-12));
    const UpwindCoefficients c = hamiltonian_linearization(g, H, 2.0 * x);
    CHECK(c.backward[40] == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
    CHECK(c.forward[40] == 0.0);
    // Transport of the linearization is the gradient contraction.
    CHECK(transport(g, c, 2.0 * x)[40] == doctest::Approx(4.0 / std::sqrt(5.0)).epsilon(1e-12));
    // H_p(x, 0) = 0 and the flux of constants is H(x, 0) = 0.
    CHECK(numerical_hamiltonian(g, H, g.constant(1.0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(H.dp(0.3, 0.0) == 0.0);
}

TEST_CASE("transport adjoint is the transpose") {
    const Grid g = make_grid(3.0, 31);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N(0.0, 1.0);
    UpwindCoefficients c{GridFunction(g.size()), GridFunction(g.size())};
    GridFunction u(g.size()), m(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        c.backward[i] = std::abs(N(rng));
        c.forward[i] = -std::abs(N(rng));
        u[i] = N(rng);
        m[i] = N(rng);
    }
    const Eigen::MatrixXd P = transport_matrix(g, c);
    CHECK((P * u - transport(g, c, u)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((P.transpose() * m - transport_adjoint(g, c, m)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(P.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("comparison principle on random ordered data") {
    const ProblemInstance inst = default_instance(small_params());
    const HjbScheme s(inst);
    const Grid& g = inst.grid;
    std::mt19937_64 rng(99);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const Eigen::Index N_t = inst.steps() + 1;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        GridFunction u1(g.size());
        for (Eigen::Index i = 0; i < g.size(); ++i) u1[i] = std::sin(g[i] * (1.0 + N(rng))) + 0.3 * N(rng);
        const GridFunction u2 = u1 + g.sample([&](double) { return U(rng); });
        TimeField f1 = TimeField::NullaryExpr(g.size(), N_t, [&]() { return N(rng); });
        TimeField f2 = f1 + TimeField::NullaryExpr(g.size(), N_t, [&]() { return U(rng); });
        const HjbSolution a = solve_backward(s, u1, f1);
        const HjbSolution b = solve_backward(s, u2, f2);
        worst = std::max(worst, (a.u - b.u).maxCoeff());
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("sup bound from the data") {
    const ProblemInstance inst = default_instance(small_params());
    const Grid& g = inst.grid;
    const GridFunction f = g.sample([](double x) { return std::cos(x); });
    const ProblemInstance with_T = inst.with_data(inst.m0, g.sample([](double x) { return std::tanh(x); }));
    const HjbSolution sol = solve_backward(with_T, f);
    for (Eigen::Index n = 0; n < sol.u.cols(); ++n) {
        const double bound = 1.0 + (inst.T - sol.times[n]) * (0.0 + f.cwiseAbs().maxCoeff());
        CHECK(sol.u.col(n).cwiseAbs().maxCoeff() <= bound + 1e-12);
    }
}

TEST_CASE("Lipschitz seminorm and second differences of prescribed fields") {
    const Grid g = make_grid(5.0, 101);
    HjbSolution sol;
    sol.times = Eigen::VectorXd::LinSpaced(3, 0.0, 1.0);
    sol.u.resize(g.size(), 3);
    sol.du.resize(g.size(), 3);
    auto fill = [&](const GridFunction& v) {
        for (int c = 0; c < 3; ++c) {
            sol.u.col(c) = v;
            sol.du.col(c) = gradient(g, v);
        }
    };
    fill(g.constant(1.0));
    CHECK(lipschitz_seminorm(sol, g, 0.5) == 0.0);
    CHECK(second_difference_bound(sol, g, 2.0) == 0.0);
    fill(g.nodes());
    CHECK(lipschitz_seminorm(sol, g, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(second_difference_bound(sol, g, 2.0) <= 1e-11);
    fill(GridFunction(0.5 * g.nodes().array().square()));
    CHECK(second_difference_bound(sol, g, 2.0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS_AS(second_difference_bound(sol, g, 3.0), std::invalid_argument);
}

TEST_CASE("truncated drift family") {
    InstanceParams p = small_params();
    const ProblemInstance inst = default_instance(p);
    const Grid& g = inst.grid;
    const ProblemInstance data = inst.with_data(inst.m0, g.sample([](double x) { return std::tanh(x); }));
    const TimeField f = inst.coupling(inst.m0).replicate(1, inst.steps() + 1);

    const auto same = solve_truncated_family(data, {10.0}, f);
    const HjbSolution full = solve_backward(data, f);
    CHECK((same[0].u - full.u).cwiseAbs().maxCoeff() == 0.0);

    const auto family = solve_truncated_family(data, {2.0, 4.0, 8.0}, f);
    const double gap1 = (family[1].u - family[0].u).cwiseAbs().maxCoeff();
    const double gap2 = (family[2].u - family[1].u).cwiseAbs().maxCoeff();
    MESSAGE("R gaps " << gap1 << " " << gap2);
    CHECK(gap2 < gap1);

    const double C0 = 0.0 + f.cwiseAbs().maxCoeff();
    for (const HjbSolution& s : family) CHECK(s.u.cwiseAbs().maxCoeff() <= 1.0 + C0 * inst.T + 1e-12);
    CHECK_THROWS_AS(solve_truncated_family(data, {4.0, 2.0}, f), std::invalid_argument);
}
