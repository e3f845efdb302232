#include "fmfg/mfg.hpp"

#include "fmfg/norms.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fmfg {

void FixedPointConfig::check() const {
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("fixed point: theta must lie in (0, 1]");
    if (!(tol > 0.0)) throw std::invalid_argument("fixed point: tolerance must be positive");
    if (max_iters < 1) throw std::invalid_argument("fixed point: max_iters must be >= 1");
}

namespace {

ControlPath control_path(const HjbScheme& scheme, const TimeField& u) {
    ControlPath path;
    path.reserve(static_cast<std::size_t>(u.cols() - 1));
    for (Eigen::Index n = 0; n + 1 < u.cols(); ++n) path.push_back(scheme.linearize(u.col(n)));
    return path;
}

}  // namespace

MfgSolution solve_mfg(const ProblemInstance& inst, const FixedPointConfig& cfg, const std::optional<TimeField>& initial) {
    cfg.check();
    inst.check();
    const Grid& g = inst.grid;
    const Eigen::Index N = inst.steps();
    const HjbScheme scheme(inst);

    TimeField m = initial ? *initial : TimeField(inst.m0.replicate(1, N + 1));
    if (m.rows() != g.size() || m.cols() != N + 1) throw std::invalid_argument("solve_mfg: initial guess has wrong shape");

    MfgSolution sol;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < cfg.max_iters; ++j) {
        HjbSolution u = solve_backward(scheme, inst.uT, inst.coupling.apply(m));
        FpSolution mt = solve_forward(scheme, inst.m0, control_path(scheme, u.u), inst.k);
        const double step = cfg.fictitious_play ? 1.0 / (j + 2.0) : cfg.theta;
        const double residual = step * sup_d0(g, mt.m, m);
        sol.history.push_back(residual);
        sol.iterations = j + 1;
        m += step * (mt.m - m);
        if (residual <= best) {
            best = residual;
            sol.hjb = std::move(u);
            sol.fp = std::move(mt);
            sol.residual = residual;
        }
        if (residual <= cfg.tol) {
            sol.converged = true;
            break;
        }
    }
    sol.hjb.times = inst.times();
    sol.fp.times = inst.times();
    return sol;
}

MfgSolution solve_truncated_mfg(const ProblemInstance& inst, double R, const FixedPointConfig& cfg) {
    if (!(R > 0.0)) throw std::invalid_argument("solve_truncated_mfg: R must be positive");
    return solve_mfg(inst.with_truncation(R), cfg);
}

LasryLions lasry_lions_functional(const ProblemInstance& inst, const TimeField& u_a, const TimeField& m_a,
                                  const TimeField& u_b, const TimeField& m_b) {
    const Grid& g = inst.grid;
    const Eigen::Index N = inst.steps();
    for (const TimeField* f : {&u_a, &m_a, &u_b, &m_b})
        if (f->rows() != g.size() || f->cols() != N + 1)
            throw std::invalid_argument("lasry_lions_functional: fields do not match the instance");
    const HjbScheme scheme(inst);
    const double dt = scheme.dt();

    const TimeField Fa = inst.coupling.apply(m_a);
    const TimeField Fb = inst.coupling.apply(m_b);

    LasryLions out;
    for (Eigen::Index n = 0; n <= N; ++n)
        out.coupling += dt * inner(g, GridFunction(Fa.col(n) - Fb.col(n)), GridFunction(m_a.col(n) - m_b.col(n)));
    for (Eigen::Index n = 0; n < N; ++n) {
        const GridFunction ua = u_a.col(n);
        const GridFunction ub = u_b.col(n);
        const GridFunction Ha = scheme.flux(ua);
        const GridFunction Hb = scheme.flux(ub);
        const GridFunction Pa = transport(g, scheme.linearize(ua), GridFunction(ub - ua));
        const GridFunction Pb = transport(g, scheme.linearize(ub), GridFunction(ua - ub));
        out.bregman_a += dt * inner(g, GridFunction(Hb - Ha - Pa), m_a.col(n));
        out.bregman_b += dt * inner(g, GridFunction(Ha - Hb - Pb), m_b.col(n));
    }
    out.total = out.coupling + out.bregman_a + out.bregman_b;

    // Residual pairing: rho^n = A u^n - g^{n+1}, eta^{n+1} = m^{n+1} - A^{-T}(I - dt P^n)^T m^n.
    auto g_next = [&](const TimeField& u, const TimeField& F, Eigen::Index n) -> GridFunction {
        return u.col(n + 1) - dt * scheme.flux(u.col(n + 1)) + dt * F.col(n + 1);
    };
    const Eigen::MatrixXd& A = scheme.implicit_matrix();
    for (Eigen::Index n = 0; n < N; ++n) {
        const GridFunction ga = g_next(u_a, Fa, n);
        const GridFunction gb = g_next(u_b, Fb, n);
        const GridFunction rho = (A * u_a.col(n) - ga) - (A * u_b.col(n) - gb);
        const GridFunction eta_a = m_a.col(n + 1) - scheme.adjoint_step(m_a.col(n), scheme.linearize(u_a.col(n)));
        const GridFunction eta_b = m_b.col(n + 1) - scheme.adjoint_step(m_b.col(n), scheme.linearize(u_b.col(n)));
        const GridFunction eta = eta_a - eta_b;
        const GridFunction dm = m_a.col(n + 1) - m_b.col(n + 1);
        out.duality += inner(g, eta, GridFunction(ga - gb)) - inner(g, GridFunction(dm - eta), rho);
    }
    return out;
}

LasryLions lasry_lions_functional(const ProblemInstance& inst, const MfgSolution& a, const MfgSolution& b) {
    return lasry_lions_functional(inst, a.hjb.u, a.fp.m, b.hjb.u, b.fp.m);
}

}  // namespace fmfg
