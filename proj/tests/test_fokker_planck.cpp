#include "doctest.h"

#include "fmfg/fokker_planck.hpp"
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

TEST_CASE("frozen density without dynamics") {
    const Grid g = make_grid(10.0, 201);
    const LevyOperator none = LevyOperator::none(g);
    const HjbScheme s(g, none.matrix(), g.zeros(), std::nullopt, 0.05);
    const GridFunction m0 = gaussian_density(g, 1.0, 0.7);
    const ControlPath path(20, UpwindCoefficients{g.zeros(), g.zeros()});
    const FpSolution sol = solve_forward(s, m0, path, 1.0);
    for (Eigen::Index n = 0; n < sol.m.cols(); ++n) CHECK((sol.m.col(n) - m0).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("mass, positivity and TV contraction under a random control") {
    const ProblemInstance inst = default_instance(small_params());
    const HjbScheme s(inst);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    ControlPath path;
    for (Eigen::Index n = 0; n < inst.steps(); ++n) {
        GridFunction v(inst.grid.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = U(rng);
        path.push_back(upwind_velocity(v));
    }
    const FpSolution a = solve_forward(s, gaussian_density(inst.grid, -1.0, 0.5), path, inst.k);
    const FpSolution b = solve_forward(s, gaussian_density(inst.grid, 2.0, 0.3), path, inst.k);
    CHECK((a.masses.array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(a.m.minCoeff() >= 0.0);
    double prev = 2.0;
    for (Eigen::Index n = 0; n < a.m.cols(); ++n) {
        const GridFunction d = a.m.col(n) - b.m.col(n);
        const double tv = tv_k(inst.grid, d, 0.0);
        CHECK(tv <= prev + 1e-13);
        CHECK(std::abs(mass(inst.grid, d)) <= 1e-13);
        prev = tv;
    }
}

TEST_CASE("discrete duality of the one-step operators") {
    const ProblemInstance inst = default_instance(small_params());
    const HjbScheme s(inst);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> N(0.0, 1.0);
    GridFunction u(inst.grid.size()), m(inst.grid.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        u[i] = N(rng);
        m[i] = N(rng);
    }
    const UpwindCoefficients c = s.linearize(GridFunction(inst.grid.sample([](double x) { return std::sin(x); })));
    // <(I - dt P) A^{-1} u, m> = <u, A^{-T} (I - dt P)^T m>
    const GridFunction Su = s.implicit_inverse() * u;
    const double lhs = inner(inst.grid, GridFunction(Su - s.dt() * transport(inst.grid, c, Su)), m);
    const double rhs = inner(inst.grid, u, s.adjoint_step(m, c));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
    const double lhs2 = inner(inst.grid, s.linear_step(u, c), m);
    const GridFunction y = s.implicit_inverse().transpose() * m;
    const double rhs2 = inner(inst.grid, u, GridFunction(y - s.dt() * transport_adjoint(inst.grid, c, y)));
    CHECK(std::abs(lhs2 - rhs2) <= 1e-12 * (1.0 + std::abs(lhs2)));
}

TEST_CASE("moment bound is uniform in the truncation radius") {
    InstanceParams p = small_params();
    p.T = 5.0;
    p.m0_center = 3.0;
    const ProblemInstance inst = default_instance(p);
    double worst = 0.0;
    for (double R : {2.0, 4.0, 8.0}) {
        const FpSolution sol = solve_forward(inst.with_truncation(R), ControlPath{});
        worst = std::max(worst, sol.moments.maxCoeff() / sol.moments[0]);
        CHECK((sol.masses.array() - 1.0).abs().maxCoeff() <= 1e-12);
    }
    MESSAGE("C_T = " << worst);
    CHECK(worst < 3.0);
}

TEST_CASE("stationary density of the OU flow") {
    InstanceParams p = small_params();
    p.T = 30.0;
    p.dt = 0.05;
    const ProblemInstance inst = default_instance(p);
    const StationaryDensity st = solve_stationary(inst);
    CHECK(st.residual <= 1e-10);
    CHECK(std::abs(mass(inst.grid, st.m) - 1.0) <= 1e-12);
    CHECK(st.m.minCoeff() >= 0.0);
    const Eigen::Index c = inst.grid.center();
    for (Eigen::Index i = 0; i < c; ++i)
        CHECK(st.m[i] == doctest::Approx(st.m[inst.grid.size() - 1 - i]).epsilon(1e-8).scale(1e-12));
    // Jumps leaving the domain land on the end nodes, which therefore carry the outer tail mass.
    for (Eigen::Index i = 1; i < c; ++i) CHECK(st.m[i] <= st.m[i + 1] + 1e-15);
    const FpSolution run = solve_forward(inst, gaussian_density(inst.grid, 2.0, 0.5), ControlPath{});
    CHECK(tv_k(inst.grid, GridFunction(run.m.col(run.m.cols() - 1) - st.m), 0.0) <= 1e-4);

    const double a = 1.5;
    const StationaryDensity shifted = solve_stationary(inst.with_drift(DriftField::linear(1.0, a)));
    const double com0 = inner(inst.grid, inst.grid.nodes(), st.m);
    const double com1 = inner(inst.grid, inst.grid.nodes(), shifted.m);
    CHECK(std::abs(com1 - com0 - a) <= 2.0 * inst.grid.h());
}

TEST_CASE("decay of two-solution differences") {
    InstanceParams p = small_params();
    p.T = 8.0;
    p.dt = 0.02;
    const ProblemInstance inst = default_instance(p);
    const UpwindCoefficients none{inst.grid.zeros(), inst.grid.zeros()};
    const GridFunction a = gaussian_density(inst.grid, -1.0, 0.5);
    const GridFunction b = gaussian_density(inst.grid, 1.0, 0.5);
    const ExponentialFit same = decay_rate(inst, none, a, a);
    CHECK(same.floor);

    const ExponentialFit fit = decay_rate(inst, none, a, b);
    CHECK_FALSE(fit.floor);
    CHECK(fit.rate > 0.0);
    CHECK(fit.r_squared >= 0.98);

    InstanceParams q = p;
    q.alpha = 2.0;
    const ExponentialFit fast = decay_rate(default_instance(q), none, a, b);
    MESSAGE("omega(alpha=1)=" << fit.rate << " omega(alpha=2)=" << fast.rate);
    CHECK(fast.rate > fit.rate);
}
