// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: fmfg_acceptance [name-substring...]

#include "fmfg/diagnostics.hpp"
#include "fmfg/ergodic.hpp"
#include "fmfg/fokker_planck.hpp"
#include "fmfg/hjb.hpp"
#include "fmfg/levy.hpp"
#include "fmfg/mfg.hpp"
#include "fmfg/model.hpp"
#include "fmfg/norms.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace fmfg;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    /// Records a named quantity and folds its condition into the verdict.
    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (detail.tellp() > 0) detail << "; ";
        detail << what << (ok ? "" : " [x]");
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

InstanceParams acceptance_params(double T) {
    InstanceParams p;
    p.n = 401;
    p.T = T;
    p.dt = 0.01;
    return p;
}

double lipschitz_sup(const HjbSolution& sol, const Grid& g) {
    double best = 0.0;
    for (Eigen::Index n = 0; n < sol.u.cols(); ++n) best = std::max(best, lipschitz_seminorm(sol, g, sol.times[n]));
    return best;
}

TimeField constant_path(const GridFunction& m, Eigen::Index cols) { return m.replicate(1, cols); }

/// Turnpike runs shared by several criteria.
class Context {
public:
    const ProblemInstance& instance(double T) {
        auto& slot = T == 10.0 ? inst10_ : inst20_;
        if (!slot) slot = default_instance(acceptance_params(T));
        return *slot;
    }

    const ErgodicSolution& ergodic() {
        if (!erg_) erg_ = solve_ergodic_mfg(instance(10.0));
        return *erg_;
    }

    static FixedPointConfig turnpike_solver() {
        FixedPointConfig cfg;
        cfg.tol = 1e-8;
        cfg.max_iters = 200;
        return cfg;
    }

    const TurnpikeReport& turnpike(double T) {
        auto& slot = T == 10.0 ? rep10_ : rep20_;
        if (!slot) {
            const MfgSolution evo = solve_mfg(instance(T), turnpike_solver());
            if (!evo.converged) throw std::runtime_error("turnpike fixed point did not converge");
            slot = turnpike_report(instance(T), evo, ergodic());
        }
        return *slot;
    }

private:
    std::optional<ProblemInstance> inst10_, inst20_;
    std::optional<ErgodicSolution> erg_;
    std::optional<TurnpikeReport> rep10_, rep20_;
};

// ---------------------------------------------------------------------------

void operator_correctness(Context&, Outcome& out) {
    const Grid g = make_grid(10.0, 401);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N(0.0, 1.0);
    double constants = 0.0, adjoint = 0.0;
    LevyKernel skew = LevyKernel::fractional(1.5);
    skew.scale_right *= 1.4;
    skew.scale_left *= 0.6;
    skew.tempering = 0.5;
    for (const LevyKernel& k : {LevyKernel::fractional(1.3), LevyKernel::fractional(1.5), LevyKernel::fractional(1.8), skew}) {
        const LevyOperator op(k, g);
        constants = std::max(constants, op.apply(g.constant(1.0)).cwiseAbs().maxCoeff());
        for (int trial = 0; trial < 5; ++trial) {
            const GridFunction f = g.sample([&](double x) { return std::sin(x * (1.0 + 0.3 * N(rng))) + 0.2 * N(rng); });
            GridFunction m = gaussian_density(g, N(rng), 1.0 + 0.2 * std::abs(N(rng)));
            const double lhs = inner(g, op.apply(f), m);
            const double rhs = inner(g, f, op.apply_adjoint(m));
            adjoint = std::max(adjoint, std::abs(lhs - rhs));
        }
    }
    out.check(constants <= 1e-13, "|L 1| " + fmt(constants));
    out.check(adjoint <= 1e-12, "adjoint gap " + fmt(adjoint));

    const Grid wide = make_grid(40.0, 1601);
    double symbol = 0.0;
    for (double sigma : {1.3, 1.5, 1.8}) {
        const LevyOperator op(LevyKernel::fractional(sigma), wide);
        const double xi_max = std::numbers::pi / (8.0 * wide.h());
        for (double xi : {0.5, 1.0, 2.0, 4.0, xi_max}) {
            const GridFunction re = wide.sample([xi](double x) { return std::cos(xi * x); });
            const GridFunction im = wide.sample([xi](double x) { return std::sin(xi * x); });
            const GridFunction lre = op.apply(re);
            const GridFunction lim = op.apply(im);
            const double s = std::pow(xi, sigma);
            for (Eigen::Index i = wide.center() - 100; i <= wide.center() + 100; ++i) {
                symbol = std::max(symbol, std::abs(lre[i] + s * re[i]) / s);
                symbol = std::max(symbol, std::abs(lim[i] + s * im[i]) / s);
            }
        }
    }
    out.check(symbol <= 0.05, "symbol error " + fmt(symbol));
}

void lyapunov(Context& ctx, Outcome& out) {
    const ProblemInstance& inst = ctx.instance(10.0);
    const Grid& g = inst.grid;
    const double gamma = std::min(1.2, 0.5 * (1.0 + inst.kernel.sigma));
    const double L0 = inst.hamiltonian.lipschitz_p();
    const GridFunction b = inst.effective_drift().sample(g);
    const LyapunovCertificate cert = lyapunov_certificate(*inst.levy, b, gamma, L0);
    out.check(cert.valid, "valid");
    out.check(cert.omega0 > 0.0, "omega0 " + fmt(cert.omega0) + " K " + fmt(cert.K));
    // The inequality at every node, with the operator applied to the affine continuation of phi.
    const LevyOperator lin(inst.kernel, g, Extension::linear);
    const GridFunction phi = g.sample([=](double x) { return std::pow(bracket(x), gamma); });
    const GridFunction dphi = g.sample([=](double x) { return gamma * x * std::pow(bracket(x), gamma - 2.0); });
    const GridFunction lhs = -lin.apply(phi) + b.cwiseProduct(dphi) - L0 * dphi.cwiseAbs();
    const double margin = ((lhs - cert.omega0 * phi).array() + cert.K).minCoeff();
    out.check(margin >= 0.0 && cert.margin >= 0.0, "min nodal margin " + fmt(margin));
}

void hjb(Context&, Outcome& out) {
    {
        const ProblemInstance inst = default_instance(acceptance_params(1.0));
        const HjbScheme s(inst);
        const Grid& g = inst.grid;
        std::mt19937_64 rng(2024);
        std::normal_distribution<double> N(0.0, 1.0);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const Eigen::Index cols = inst.steps() + 1;
        double worst = 0.0;
        for (int pair = 0; pair < 50; ++pair) {
            GridFunction u1(g.size());
            for (Eigen::Index i = 0; i < g.size(); ++i) u1[i] = std::sin(g[i] * (1.0 + N(rng))) + 0.3 * N(rng);
            const GridFunction u2 = u1 + g.sample([&](double) { return U(rng); });
            const TimeField f1 = TimeField::NullaryExpr(g.size(), cols, [&]() { return N(rng); });
            const TimeField f2 = f1 + TimeField::NullaryExpr(g.size(), cols, [&]() { return U(rng); });
            worst = std::max(worst, (solve_backward(s, u1, f1).u - solve_backward(s, u2, f2).u).maxCoeff());
        }
        out.check(worst <= 1e-10, "comparison violation " + fmt(worst) + " over 50 pairs");
    }
    {
        const ProblemInstance inst = default_instance(acceptance_params(5.0));
        const GridFunction f = inst.coupling(inst.m0);
        const double l5 = lipschitz_sup(solve_backward(inst, f), inst.grid);
        const double l10 = lipschitz_sup(solve_backward(inst.with_horizon(10.0), f), inst.grid);
        const double ratio = l5 / l10;
        out.check(ratio >= 0.8 && ratio <= 1.2, "Lipschitz T=5/T=10 " + fmt(ratio));
    }
    for (double sigma : {1.3, 1.5, 1.8}) {
        InstanceParams p = acceptance_params(1.0);
        p.sigma = sigma;
        p.dt = 0.005;
        const ProblemInstance inst = default_instance(p);
        const RegularizationReport rep = regularizing_effect(inst, holder_datum(inst.grid), 4.0 * inst.dt, 0.5);
        const double target = -1.0 / sigma;
        out.check(std::abs(rep.slope - target) <= 0.2,
                  "slope(sigma=" + fmt(sigma) + ") " + fmt(rep.slope) + " vs " + fmt(target));
    }
}

void fokker_planck(Context&, Outcome& out) {
    double mass_error = 0.0, min_density = 0.0;
    auto track = [&](const FpSolution& s) {
        mass_error = std::max(mass_error, (s.masses.array() - 1.0).abs().maxCoeff());
        min_density = std::min(min_density, s.m.minCoeff());
    };

    const ProblemInstance inst = default_instance(acceptance_params(8.0));
    const Grid& g = inst.grid;
    std::mt19937_64 rng(31);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int run = 0; run < 4; ++run) {
        const double a = N(rng), c = 1.0 + std::abs(N(rng));
        TimeField v(g.size(), inst.steps());
        for (Eigen::Index n = 0; n < v.cols(); ++n)
            v.col(n) = g.sample([&](double x) { return c * std::sin(x + a + 0.01 * static_cast<double>(n)); });
        track(solve_forward(inst, v));
    }

    std::vector<double> sups;
    const ProblemInstance shifted = inst.with_data(gaussian_density(g, 3.0, 0.5), inst.uT);
    for (double R : {2.0, 4.0, 8.0}) {
        const FpSolution s = solve_forward(shifted.with_truncation(R), ControlPath{});
        track(s);
        sups.push_back(s.moments.maxCoeff());
    }
    // Moment bound sup_t M_k(t) <= C (M_k(0) + 1) with one constant C for every radius.
    const double m0k = moment(g, shifted.m0, inst.k);
    double C = 0.0;
    for (double s : sups) C = std::max(C, s / (m0k + 1.0));
    const double spread = *std::max_element(sups.begin(), sups.end()) / *std::min_element(sups.begin(), sups.end());
    out.check(C <= 1.0 && spread <= 1.25,
              "moment sup over R=2,4,8 " + fmt(sups[0]) + "," + fmt(sups[1]) + "," + fmt(sups[2]) + " C " + fmt(C));

    const GridFunction a = gaussian_density(g, -1.0, 0.5);
    const GridFunction b = gaussian_density(g, 1.0, 0.5);
    track(solve_forward(inst, a, ControlPath{}));
    track(solve_forward(inst, b, ControlPath{}));
    const ExponentialFit fit = decay_rate(inst, UpwindCoefficients{g.zeros(), g.zeros()}, a, b);
    out.check(fit.rate > 0.0 && fit.r_squared >= 0.98 && !fit.floor,
              "TV_k decay omega " + fmt(fit.rate) + " R2 " + fmt(fit.r_squared));
    out.check(mass_error <= 1e-12, "mass error " + fmt(mass_error));
    out.check(min_density >= 0.0, "min density " + fmt(min_density));
}

void stationary_fp(Context&, Outcome& out) {
    const ProblemInstance inst = default_instance(acceptance_params(30.0));
    const StationaryDensity st = solve_stationary(inst);
    out.check(st.residual <= 1e-10, "residual " + fmt(st.residual));
    const FpSolution run = solve_forward(inst, ControlPath{});
    const double gap = tv_k(inst.grid, GridFunction(run.m.col(run.m.cols() - 1) - st.m), 0.0);
    out.check(gap <= 1e-4, "TV gap to T=30 run " + fmt(gap));
}

void mfg(Context& ctx, Outcome& out) {
    const ProblemInstance& inst = ctx.instance(10.0);
    const MfgSolution plain = solve_mfg(inst, FixedPointConfig{});
    out.check(plain.converged && plain.iterations <= 100,
              "residual " + fmt(plain.residual) + " after " + std::to_string(plain.iterations) + " iterations");

    FixedPointConfig tight;
    tight.tol = 1e-10;
    tight.max_iters = 200;
    const MfgSolution a = solve_mfg(inst, tight);
    const MfgSolution b = solve_mfg(inst, tight, constant_path(uniform_density(inst.grid), inst.steps() + 1));
    double tv = 0.0, grad = 0.0;
    for (Eigen::Index n = 0; n < a.fp.m.cols(); ++n) {
        tv = std::max(tv, tv_k(inst.grid, GridFunction(a.fp.m.col(n) - b.fp.m.col(n)), inst.k));
        grad = std::max(grad, (a.hjb.du.col(n) - b.hjb.du.col(n)).cwiseAbs().maxCoeff());
    }
    out.check(a.converged && b.converged && tv <= 5e-5 && grad <= 5e-5,
              "two starts: sup TV_k " + fmt(tv) + " sup |Du| " + fmt(grad));
    const LasryLions ll = lasry_lions_functional(inst, a, b);
    out.check(std::abs(ll.total) <= 1e-6, "Lasry-Lions " + fmt(ll.total));
    const double addend = std::min({ll.coupling, ll.bregman_a, ll.bregman_b});
    out.check(addend >= -1e-12, "min addend " + fmt(addend));
}

void ergodic(Context& ctx, Outcome& out) {
    const ProblemInstance& inst = ctx.instance(10.0);
    const ErgodicSolution& erg = ctx.ergodic();
    const GridFunction f = inst.coupling(erg.m_bar);
    const ErgodicHjb base = solve_ergodic_hjb(inst, f);
    double gauge = 0.0;
    for (double c : {-1.0, 0.5, 2.0}) {
        const ErgodicHjb shifted = solve_ergodic_hjb(inst, GridFunction(f.array() + c));
        gauge = std::max(gauge, std::abs(shifted.lambda - base.lambda - c));
    }
    out.check(gauge <= 1e-8, "gauge error " + fmt(gauge));

    const Eigen::Index x0 = inst.grid.center() + 10;
    const HjbSolution u10 = solve_backward(inst.with_horizon(10.0), f);
    const HjbSolution u20 = solve_backward(inst.with_horizon(20.0), f);
    const double slope = (u20.u(x0, 0) - u10.u(x0, 0)) / 10.0;
    const double rel = std::abs(slope - base.lambda) / std::abs(base.lambda);
    out.check(rel <= 0.02, "lambda " + fmt(base.lambda) + " parabolic slope " + fmt(slope));

    const ErgodicSolution other = solve_ergodic_mfg(inst, ErgodicConfig{}, uniform_density(inst.grid));
    const double tv = tv_k(inst.grid, GridFunction(erg.m_bar - other.m_bar), inst.k);
    out.check(erg.converged && other.converged && tv <= 1e-6, "two starts TV_k " + fmt(tv));
}

void turnpike(Context& ctx, Outcome& out) {
    const TurnpikeReport& r10 = ctx.turnpike(10.0);
    double worst_ratio = 0.0;
    for (int s = 0; s < 3; ++s)
        for (double t : {1.0, 9.0}) worst_ratio = std::max(worst_ratio, r10.at(s, 5.0) / r10.at(s, t));
    out.check(worst_ratio <= 0.2, "max series(T/2)/series(0.1T,0.9T) " + fmt(worst_ratio));
    out.check(r10.omega_left > 0.0 && r10.omega_right > 0.0 && r10.min_r_squared >= 0.95 && !r10.floor,
              "omega_l " + fmt(r10.omega_left) + " omega_r " + fmt(r10.omega_right) + " min R2 " +
                  fmt(r10.min_r_squared));

    const TurnpikeReport& r20 = ctx.turnpike(20.0);
    const double dl = std::abs(r20.omega_left / r10.omega_left - 1.0);
    const double dr = std::abs(r20.omega_right / r10.omega_right - 1.0);
    out.check(dl <= 0.25 && dr <= 0.25 && r20.min_r_squared >= 0.95,
              "T=20 omega_l " + fmt(r20.omega_left) + " omega_r " + fmt(r20.omega_right));
    const double omega_min = std::min({r10.omega, r20.omega});
    const double drop = r10.plateau / r20.plateau;
    const double needed = std::exp(5.0 * omega_min) / 2.0;
    out.check(drop >= needed, "plateau drop " + fmt(drop) + " >= " + fmt(needed));

    const ProblemInstance& inst = ctx.instance(10.0);
    const ErgodicSolution& erg = ctx.ergodic();
    const ProblemInstance at = inst.with_data(erg.m_bar, erg.u_bar);
    const FixedPointConfig cfg = Context::turnpike_solver();
    const MfgSolution evo = solve_mfg(at, cfg);
    const TurnpikeReport flat = turnpike_report(at, evo, erg);
    const double top = std::max({flat.series.tv.maxCoeff(), flat.series.osc.maxCoeff(), flat.series.grad.maxCoeff()});
    out.check(top <= 10.0 * cfg.tol, "from the stationary triple max series " + fmt(top));
}

void duhamel(Context&, Outcome& out) {
    const ProblemInstance inst = default_instance(acceptance_params(8.0));
    const Grid& g = inst.grid;
    const DriftField drift = inst.effective_drift();
    const double sigma = inst.kernel.sigma;
    const Eigen::Index cols = inst.steps() + 1;

    const GridFunction vT = g.sample([](double x) { return 0.5 * std::tanh(x); });
    const GridFunction step = g.sample([](double x) { return x > 0.0 ? 0.5 : (x < 0.0 ? -0.5 : 0.0); });
    const DuhamelReport d = duhamel_check(inst, drift, vT, step.replicate(1, cols));
    const DuhamelReport smooth = duhamel_check(inst, drift, g.zeros(), inst.coupling(inst.m0).replicate(1, cols));
    out.check(d.ratio <= 1.05 && smooth.ratio <= 1.05,
              "Duhamel ratios " + fmt(d.ratio) + ", " + fmt(smooth.ratio));
    out.check(d.terminal_exponent >= 1.0 - 1.0 / sigma - 0.15,
              "terminal exponent " + fmt(d.terminal_exponent) + " >= " + fmt(1.0 - 1.0 / sigma - 0.15));

    const GridFunction m_bar = solve_stationary(inst).m;
    const GridFunction mu0 = gaussian_density(g, -1.0, 0.5) - gaussian_density(g, 1.5, 0.7);
    const TimeField Phi = g.sample([](double x) { return 0.2 * std::cos(x); }).replicate(1, inst.steps());
    const ForcedFpReport f = nonhomogeneous_fp_check(inst, drift, mu0, Phi, m_bar);
    out.check(f.ratio <= 1.05, "forced FP ratio " + fmt(f.ratio));

    const ForcedFpReport one = nonhomogeneous_fp_check(inst, drift, g.zeros(), Phi, m_bar);
    const ForcedFpReport two = nonhomogeneous_fp_check(inst, drift, g.zeros(), TimeField(2.0 * Phi), m_bar);
    const double measured = std::log2(two.integral / one.integral);
    const double predicted = std::log2(two.rhs / one.rhs);
    out.check(std::isfinite(one.integral) && std::isfinite(two.integral) &&
                  std::abs(measured / predicted - 1.0) <= 0.2,
              "gamma' integral scaling exponent " + fmt(measured) + " vs " + fmt(predicted));
}

void grid_convergence(Context& ctx, Outcome& out) {
    const TurnpikeReport& coarse = ctx.turnpike(10.0);
    InstanceParams p = acceptance_params(10.0);
    p.n = 801;
    const ProblemInstance fine_inst = default_instance(p);
    const ErgodicSolution erg = solve_ergodic_mfg(fine_inst);
    const MfgSolution evo = solve_mfg(fine_inst, Context::turnpike_solver());
    const TurnpikeReport fine = turnpike_report(fine_inst, evo, erg);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(a); };
    const double dp = rel(coarse.plateau, fine.plateau);
    out.check(dp <= 0.10, "plateau " + fmt(coarse.plateau) + " -> " + fmt(fine.plateau));
    double worst = 0.0;
    for (int s = 0; s < 3; ++s) {
        worst = std::max(worst, rel(coarse.left[s].rate, fine.left[s].rate));
        worst = std::max(worst, rel(coarse.right[s].rate, fine.right[s].rate));
    }
    worst = std::max({worst, rel(coarse.omega_left, fine.omega_left), rel(coarse.omega_right, fine.omega_right)});
    out.check(worst <= 0.10, "largest rate change " + fmt(worst));
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<void(Context&, Outcome&)>>> criteria{
        {"operator-correctness", operator_correctness},
        {"lyapunov-certificate", lyapunov},
        {"hjb", hjb},
        {"fokker-planck", fokker_planck},
        {"stationary-fp", stationary_fp},
        {"mfg", mfg},
        {"ergodic", ergodic},
        {"turnpike", turnpike},
        {"duhamel-nonhomogeneous", duhamel},
        {"grid-convergence", grid_convergence},
    };
    Context ctx;
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        if (argc > 1) {
            bool wanted = false;
            for (int i = 1; i < argc; ++i) wanted = wanted || name.find(argv[i]) != std::string::npos;
            if (!wanted) continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            fn(ctx, out);
        } catch (const std::exception& e) {
            out.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        char head[96];
        std::snprintf(head, sizeof head, "%s %-24s %7.1fs  ", out.pass ? "PASS" : "FAIL", name.c_str(), secs);
        std::cout << head << out.detail.str() << std::endl;
        failures += out.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
