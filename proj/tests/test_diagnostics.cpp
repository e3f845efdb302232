#include "doctest.h"

#include "fmfg/diagnostics.hpp"
#include "fmfg/fokker_planck.hpp"
#include "fmfg/norms.hpp"

#include <cmath>

using namespace fmfg;

namespace {

InstanceParams small_params(double T) {
    InstanceParams p;
    p.x_max = 10.0;
    p.n = 161;
    p.T = T;
    p.dt = 0.02;
    return p;
}

GridFunction step_profile(const Grid& g) {
    return g.sample([](double x) { return x > 0.0 ? 0.5 : (x < 0.0 ? -0.5 : 0.0); });
}

}  // namespace

TEST_CASE("turnpike series vanish at the stationary triple") {
    const ProblemInstance inst = default_instance(small_params(4.0));
    const ErgodicSolution erg = solve_ergodic_mfg(inst);
    const ProblemInstance at = inst.with_data(erg.m_bar, erg.u_bar);
    FixedPointConfig cfg;
    cfg.tol = 1e-10;
    const MfgSolution evo = solve_mfg(at, cfg);
    const TurnpikeReport rep = turnpike_report(at, evo, erg);
    CHECK(rep.series.tv.maxCoeff() <= 1e-8);
    CHECK(rep.series.osc.maxCoeff() <= 1e-8);
    CHECK(rep.series.grad.maxCoeff() <= 1e-8);
    CHECK((rep.series.mass.array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("turnpike shape on a coarse default instance") {
    const ProblemInstance inst = default_instance(small_params(10.0));
    const ErgodicSolution erg = solve_ergodic_mfg(inst);
    FixedPointConfig cfg;
    cfg.tol = 1e-10;
    cfg.max_iters = 200;
    const MfgSolution evo = solve_mfg(inst, cfg);
    REQUIRE(evo.converged);
    const TurnpikeReport rep = turnpike_report(inst, evo, erg);
    MESSAGE("omega_left " << rep.omega_left << " omega_right " << rep.omega_right << " plateau " << rep.plateau
                          << " M " << rep.M << " min R2 " << rep.min_r_squared);
    for (int s = 0; s < 3; ++s) {
        CHECK(rep.at(s, 5.0) <= 0.2 * rep.at(s, 1.0));
        CHECK(rep.at(s, 5.0) <= 0.2 * rep.at(s, 9.0));
    }
    CHECK(rep.omega_left > 0.0);
    CHECK(rep.omega_right > 0.0);
    CHECK((rep.series.osc - rep.series.osc_raw).cwiseAbs().maxCoeff() <= 1e-10);
    for (Eigen::Index n = 0; n < rep.series.t.size(); ++n) {
        const double env = rep.M * (std::exp(-rep.omega * rep.series.t[n]) + std::exp(-rep.omega * (10.0 - rep.series.t[n])));
        CHECK(rep.series.tv[n] <= env * (1.0 + 1e-12));
    }
}

TEST_CASE("linear decay of the oscillation") {
    InstanceParams p = small_params(8.0);
    p.k = 1.2;
    const ProblemInstance inst = default_instance(p);
    const DriftField ou = DriftField::linear(1.0);

    const DecayReport flat = linear_decay_check(inst, ou, GridFunction::Constant(inst.grid.size(), 3.0));
    CHECK(flat.series.maxCoeff() <= 1e-12);
    CHECK(flat.fit.floor);

    const DecayReport rep = linear_decay_check(inst, ou, inst.grid.sample([](double x) { return std::tanh(x); }));
    MESSAGE("omega " << rep.fit.rate << " R2 " << rep.fit.r_squared);
    CHECK(rep.fit.rate > 0.0);
    CHECK(rep.fit.r_squared >= 0.98);

    // Same constants family as the dual Fokker-Planck decay.
    const UpwindCoefficients none{inst.grid.zeros(), inst.grid.zeros()};
    const ExponentialFit fp = decay_rate(inst, none, gaussian_density(inst.grid, -1.0, 0.5),
                                         gaussian_density(inst.grid, 1.0, 0.5));
    MESSAGE("Fokker-Planck omega " << fp.rate);
    CHECK(rep.fit.rate == doctest::Approx(fp.rate).epsilon(0.3));
}

TEST_CASE("Duhamel envelopes") {
    const ProblemInstance inst = default_instance(small_params(6.0));
    const DriftField ou = DriftField::linear(1.0);
    const Eigen::Index cols = inst.steps() + 1;
    const GridFunction vT = inst.grid.sample([](double x) { return 0.5 * std::tanh(x); });

    SUBCASE("no source reduces to the linear decay") {
        const DuhamelReport rep = duhamel_check(inst, ou, vT, TimeField::Zero(inst.grid.size(), cols));
        const DecayReport lin = linear_decay_check(inst, ou, vT);
        CHECK((rep.osc - lin.series).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK(rep.probes == 1);
        CHECK(rep.osc_ratio <= 1.0 + 1e-12);
    }

    SUBCASE("time-constant source is bounded uniformly in T") {
        const GridFunction f = inst.grid.sample([](double x) { return std::sin(x); });
        const DuhamelReport rep = duhamel_check(inst, ou, inst.grid.zeros(), f.replicate(1, cols));
        const double bound = rep.K / rep.omega * osc_k(inst.grid, f, inst.k);
        MESSAGE("K " << rep.K << " omega " << rep.omega << " sup osc " << rep.osc.maxCoeff() << " bound " << bound);
        CHECK(rep.osc.maxCoeff() <= bound);
        CHECK(rep.ratio <= 1.05);
    }

    SUBCASE("bounded source and Lipschitz terminal datum") {
        const DuhamelReport rep = duhamel_check(inst, ou, vT, step_profile(inst.grid).replicate(1, cols));
        const double sigma = inst.kernel.sigma;
        MESSAGE("osc ratio " << rep.osc_ratio << " grad ratio " << rep.grad_ratio << " terminal exponent "
                             << rep.terminal_exponent);
        CHECK(rep.ratio <= 1.05);
        CHECK(rep.terminal_exponent >= 1.0 - 1.0 / sigma - 0.15);
    }
}

TEST_CASE("forced Fokker-Planck estimates") {
    const ProblemInstance inst = default_instance(small_params(8.0));
    const DriftField ou = DriftField::linear(1.0);
    const Grid& g = inst.grid;
    const GridFunction m_bar = solve_stationary(inst).m;
    const GridFunction mu0 = gaussian_density(g, -1.0, 0.5) - gaussian_density(g, 1.5, 0.7);
    const GridFunction shape = g.sample([](double x) { return 0.2 * std::cos(x); });
    const TimeField Phi = shape.replicate(1, inst.steps());

    SUBCASE("no forcing reduces to the decay of differences") {
        const ForcedFpReport rep = nonhomogeneous_fp_check(inst, ou, mu0, TimeField::Zero(g.size(), inst.steps()), m_bar);
        CHECK(rep.omega > 0.0);
        CHECK(rep.ratio <= 1.0 + 1e-12);
        CHECK(rep.phi_energy == 0.0);
    }

    SUBCASE("envelope with fitted constants") {
        const ForcedFpReport rep = nonhomogeneous_fp_check(inst, ou, mu0, Phi, m_bar);
        MESSAGE("ratio " << rep.ratio << " omega " << rep.omega);
        CHECK(rep.ratio <= 1.05);
        CHECK(std::isfinite(rep.integral));
        CHECK(rep.gamma == doctest::Approx(0.5 * (1.0 + inst.kernel.sigma)));
    }

    SUBCASE("steady forcing saturates in proportion to its size") {
        const GridFunction zero = g.zeros();
        const ForcedFpReport one = nonhomogeneous_fp_check(inst, ou, zero, Phi, m_bar);
        const ForcedFpReport two = nonhomogeneous_fp_check(inst, ou, zero, TimeField(2.0 * Phi), m_bar);
        const Eigen::Index N = inst.steps();
        CHECK(two.tv[N] / one.tv[N] == doctest::Approx(2.0).epsilon(1e-9));
        const double measured = std::log2(two.integral / one.integral);
        const double predicted = std::log2(two.rhs / one.rhs);
        MESSAGE("integral exponent " << measured << " rhs exponent " << predicted);
        CHECK(measured / predicted == doctest::Approx(1.0).epsilon(0.2));
        // Saturated level at the horizon is flat in time.
        CHECK(std::abs(one.tv[N] - one.tv[N - 25]) <= 1e-3 * one.tv[N]);
    }

    SUBCASE("rejects data with mass") {
        CHECK_THROWS_AS(nonhomogeneous_fp_check(inst, ou, gaussian_density(g, 0.0, 1.0), Phi, m_bar),
                        std::invalid_argument);
    }
}

TEST_CASE("short-time gradient growth from Hoelder data") {
    InstanceParams p = small_params(1.0);
    p.n = 401;
    p.dt = 0.005;
    const ProblemInstance inst = default_instance(p);
    const RegularizationReport rep = regularizing_effect(inst, holder_datum(inst.grid), 4.0 * inst.dt, 0.5);
    MESSAGE("slope " << rep.slope << " R2 " << rep.fit.r_squared);
    CHECK(rep.slope < 0.0);
    CHECK(rep.fit.samples >= kMinFitSamples);
    CHECK_THROWS_AS(regularizing_effect(inst, holder_datum(inst.grid), 0.5, 0.1), std::invalid_argument);
}
