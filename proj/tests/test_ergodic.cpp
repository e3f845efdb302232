#include "doctest.h"

#include "fmfg/ergodic.hpp"
#include "fmfg/fokker_planck.hpp"
#include "fmfg/mfg.hpp"
#include "fmfg/norms.hpp"

#include <cmath>
#include <random>

using namespace fmfg;

namespace {

InstanceParams small_params() {
    InstanceParams p;
    p.x_max = 10.0;
    p.n = 161;
    p.T = 2.0;
    p.dt = 0.02;
    return p;
}

GridFunction source(const Grid& g) {
    return g.sample([](double x) { return 0.5 * std::tanh(x) + 0.3 * std::exp(-x * x); });
}

}  // namespace

TEST_CASE("discounted problem with no dynamics") {
    const Grid g = make_grid(5.0, 51);
    const LevyOperator none = LevyOperator::none(g);
    const HjbScheme s(g, none.matrix(), g.zeros(), std::nullopt, 0.1);
    const DiscountedSolution d = solve_discounted(s, GridFunction::Constant(g.size(), 0.7), 0.25);
    CHECK((d.u.array() - 0.7 / 0.25).abs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(solve_discounted(s, g.zeros(), 0.0), std::invalid_argument);
}

TEST_CASE("discounted sup bound on random sources") {
    const ProblemInstance inst = default_instance(small_params());
    const HjbScheme s(inst);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    const double h0 = s.flux(inst.grid.zeros()).cwiseAbs().maxCoeff();
    for (int trial = 0; trial < 4; ++trial) {
        GridFunction f(inst.grid.size());
        for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = U(rng);
        for (double delta : {0.5, 0.05}) {
            const DiscountedSolution d = solve_discounted(s, f, delta);
            CHECK(d.residual <= 1e-10);
            CHECK(delta * d.u.cwiseAbs().maxCoeff() <= h0 + f.cwiseAbs().maxCoeff() + 1e-10);
        }
    }
}

TEST_CASE("vanishing discount ladder") {
    const ProblemInstance inst = default_instance(small_params());
    const ErgodicHjb e = solve_ergodic_hjb(inst, source(inst.grid));
    REQUIRE(e.ladder.size() == 3);
    const double d1 = e.ladder[0] - e.ladder[1];
    const double d2 = e.ladder[1] - e.ladder[2];
    MESSAGE("ladder " << e.ladder[0] << " " << e.ladder[1] << " " << e.ladder[2] << " lambda " << e.lambda);
    CHECK(d1 / d2 == doctest::Approx(2.0).epsilon(0.1));
    CHECK(std::abs(e.richardson2 - e.lambda) <= 1e-4);
    CHECK(std::abs(e.richardson2 - e.lambda) < std::abs(e.richardson1 - e.lambda));
    CHECK(e.residual <= 1e-10);
    CHECK(e.u_bar[inst.grid.center()] == 0.0);
    for (double L : e.lipschitz) CHECK(L == doctest::Approx(e.lipschitz.front()).epsilon(0.1));
}

TEST_CASE("additive gauge of the ergodic constant") {
    const ProblemInstance inst = default_instance(small_params());
    const GridFunction f = source(inst.grid);
    const ErgodicHjb a = solve_ergodic_hjb(inst, f);
    const ErgodicHjb b = solve_ergodic_hjb(inst, GridFunction(f.array() + 0.37));
    CHECK(std::abs(b.lambda - a.lambda - 0.37) <= 1e-8);
    CHECK((b.u_bar - a.u_bar).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("ergodic constant is monotone in the source") {
    const ProblemInstance inst = default_instance(small_params());
    const GridFunction f = source(inst.grid);
    const GridFunction bump = inst.grid.sample([](double x) { return std::exp(-(x - 1.0) * (x - 1.0)); });
    const ErgodicHjb a = solve_ergodic_hjb(inst, f);
    const ErgodicHjb b = solve_ergodic_hjb(inst, GridFunction(f + 0.5 * bump));
    CHECK(b.lambda > a.lambda);
}

TEST_CASE("ergodic constant matches the long-horizon parabolic slope") {
    const ProblemInstance inst = default_instance(small_params());
    const GridFunction f = source(inst.grid);
    const ErgodicHjb e = solve_ergodic_hjb(inst, f);
    const Eigen::Index x0 = inst.grid.center() + 10;
    const HjbSolution u10 = solve_backward(inst.with_horizon(10.0), f);
    const HjbSolution u20 = solve_backward(inst.with_horizon(20.0), f);
    const double slope = (u20.u(x0, 0) - u10.u(x0, 0)) / 10.0;
    MESSAGE("slope " << slope << " lambda " << e.lambda);
    CHECK(slope == doctest::Approx(e.lambda).epsilon(0.02));
}

TEST_CASE("stationary density agrees with inverse iteration") {
    InstanceParams p = small_params();
    p.T = 30.0;
    p.dt = 0.05;
    const ProblemInstance inst = default_instance(p);
    const HjbScheme s(inst);
    const UpwindCoefficients c = s.linearize(GridFunction(inst.grid.sample([](double x) { return 0.3 * std::sin(x); })));
    const GridFunction direct = stationary_density(s, c);
    const StationaryDensity iter = solve_stationary(s, c);
    CHECK(tv_k(inst.grid, GridFunction(direct - iter.m), 0.0) <= 1e-9);
}

TEST_CASE("ergodic mean field game") {
    const ProblemInstance inst = default_instance(small_params());
    const HjbScheme s(inst);

    SUBCASE("decoupled case needs one outer iteration") {
        InstanceParams p = small_params();
        p.coupling_strength = 0.0;
        const ProblemInstance free = default_instance(p);
        const ErgodicSolution e = solve_ergodic_mfg(free);
        CHECK(e.converged);
        CHECK(e.iterations == 1);
        const ErgodicHjb u0 = solve_ergodic_hjb(free, free.coupling.anchor());
        const GridFunction m = stationary_density(s, s.linearize(u0.u_bar));
        CHECK(tv_k(free.grid, GridFunction(e.m_bar - m), 0.0) <= 1e-12);
    }

    SUBCASE("triple is consistent and unique") {
        const ErgodicSolution a = solve_ergodic_mfg(inst);
        const ErgodicSolution b = solve_ergodic_mfg(inst, {}, uniform_density(inst.grid));
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        MESSAGE("lambda " << a.lambda << " iterations " << a.iterations << " moment_2k " << a.moment_2k
                          << " boundary mass " << a.boundary_mass);
        CHECK(a.residual_hjb <= 1e-7);
        CHECK(a.residual_fp <= 1e-7);
        CHECK(std::abs(mass(inst.grid, a.m_bar) - 1.0) <= 1e-12);
        CHECK(a.m_bar.minCoeff() >= 0.0);
        CHECK(a.u_bar[inst.grid.center()] == 0.0);
        CHECK(tv_k(inst.grid, GridFunction(a.m_bar - b.m_bar), 0.0) <= 1e-6);
        CHECK(std::abs(a.lambda - b.lambda) <= 1e-6);
    }

    SUBCASE("stationary triple is a fixed point of the evolution") {
        const ErgodicSolution e = solve_ergodic_mfg(inst);
        const ProblemInstance at = inst.with_data(e.m_bar, e.u_bar);
        FixedPointConfig cfg;
        cfg.tol = 1e-10;
        const MfgSolution evo = solve_mfg(at, cfg);
        const Eigen::VectorXd t = at.times();
        double worst_m = 0.0;
        double worst_u = 0.0;
        for (Eigen::Index n = 0; n < t.size(); ++n) {
            worst_m = std::max(worst_m, tv_k(inst.grid, GridFunction(evo.fp.m.col(n) - e.m_bar), inst.k));
            const GridFunction v = evo.hjb.u.col(n) - e.u_bar - GridFunction::Constant(e.u_bar.size(), e.lambda * (at.T - t[n]));
            worst_u = std::max(worst_u, v.cwiseAbs().maxCoeff());
        }
        CHECK(worst_m <= 1e-7);
        CHECK(worst_u <= 1e-7);
    }
}
