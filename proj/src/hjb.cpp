#include "fmfg/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fmfg {

UpwindCoefficients upwind_velocity(const GridFunction& v) {
    return {v.cwiseMax(0.0), v.cwiseMin(0.0)};
}

GridFunction transport(const Grid& grid, const UpwindCoefficients& c, const GridFunction& u) {
    const Eigen::Index n = grid.size();
    const double ih = 1.0 / grid.h();
    GridFunction out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dm = i > 0 ? (u[i] - u[i - 1]) * ih : 0.0;
        const double dp = i + 1 < n ? (u[i + 1] - u[i]) * ih : 0.0;
        out[i] = c.backward[i] * dm + c.forward[i] * dp;
    }
    return out;
}

GridFunction transport_adjoint(const Grid& grid, const UpwindCoefficients& c, const GridFunction& m) {
    const Eigen::Index n = grid.size();
    const double ih = 1.0 / grid.h();
    GridFunction out(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double diag = 0.0;
        if (j > 0) diag += c.backward[j] * ih;
        if (j + 1 < n) diag -= c.forward[j] * ih;
        double v = diag * m[j];
        if (j + 1 < n) v -= c.backward[j + 1] * ih * m[j + 1];
        if (j > 0) v += c.forward[j - 1] * ih * m[j - 1];
        out[j] = v;
    }
    return out;
}

Eigen::MatrixXd transport_matrix(const Grid& grid, const UpwindCoefficients& c) {
    const Eigen::Index n = grid.size();
    const double ih = 1.0 / grid.h();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i > 0) {
            P(i, i) += c.backward[i] * ih;
            P(i, i - 1) -= c.backward[i] * ih;
        }
        if (i + 1 < n) {
            P(i, i) -= c.forward[i] * ih;
            P(i, i + 1) += c.forward[i] * ih;
        }
    }
    return P;
}

GridFunction numerical_hamiltonian(const Grid& grid, const Hamiltonian& H, const GridFunction& u) {
    const Eigen::Index n = grid.size();
    const double ih = 1.0 / grid.h();
    GridFunction out(n);
    const bool eo = H.kind() == Hamiltonian::Kind::kinetic_saturated;
    const double L = H.lipschitz_p();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = grid[i];
        const double pm = i > 0 ? (u[i] - u[i - 1]) * ih : 0.0;
        const double pp = i + 1 < n ? (u[i + 1] - u[i]) * ih : 0.0;
        if (eo) {
            out[i] = H.value(x, std::max(pm, 0.0)) + H.value(x, std::min(pp, 0.0)) - H.value(x, 0.0);
        } else {
            out[i] = H.value(x, 0.5 * (pm + pp)) - 0.5 * L * (pp - pm);
        }
    }
    return out;
}

UpwindCoefficients hamiltonian_linearization(const Grid& grid, const Hamiltonian& H, const GridFunction& u) {
    const Eigen::Index n = grid.size();
    const double ih = 1.0 / grid.h();
    UpwindCoefficients c{GridFunction(n), GridFunction(n)};
    const bool eo = H.kind() == Hamiltonian::Kind::kinetic_saturated;
    const double L = H.lipschitz_p();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = grid[i];
        const double pm = i > 0 ? (u[i] - u[i - 1]) * ih : 0.0;
        const double pp = i + 1 < n ? (u[i + 1] - u[i]) * ih : 0.0;
        if (eo) {
            c.backward[i] = H.dp(x, std::max(pm, 0.0));
            c.forward[i] = H.dp(x, std::min(pp, 0.0));
        } else {
            const double g = 0.5 * H.dp(x, 0.5 * (pm + pp));
            c.backward[i] = g + 0.5 * L;
            c.forward[i] = g - 0.5 * L;
        }
    }
    return c;
}

double cfl_limit(const Grid& grid, const Hamiltonian& H) {
    // Engquist-Osher: both one-sided slopes may be active at a local maximum.
    const double factor = H.kind() == Hamiltonian::Kind::kinetic_saturated ? 2.0 : 1.0;
    return grid.h() / (factor * H.lipschitz_p());
}

HjbScheme::HjbScheme(const Grid& grid, const Eigen::MatrixXd& levy, const GridFunction& drift,
                     std::optional<Hamiltonian> hamiltonian, double dt)
    : grid_(grid), dt_(dt), drift_(drift), H_(std::move(hamiltonian)) {
    const Eigen::Index n = grid.size();
    if (levy.rows() != n || levy.cols() != n || drift.size() != n)
        throw std::invalid_argument("hjb scheme: grid mismatch");
    if (!(dt > 0.0)) throw std::invalid_argument("hjb scheme: dt must be positive");
    if (H_) {
        const double limit = cfl_limit(grid, *H_);
        if (dt > limit * (1.0 + 1e-12))
            throw std::invalid_argument("hjb scheme: CFL violated, dt=" + std::to_string(dt) +
                                        " > " + std::to_string(limit));
    }
    generator_ = -levy + transport_matrix(grid, upwind_velocity(drift));
    implicit_ = Eigen::MatrixXd::Identity(n, n) + dt * generator_;
    inverse_ = implicit_.partialPivLu().inverse();
}

HjbScheme::HjbScheme(const ProblemInstance& inst)
    : HjbScheme(inst.grid, inst.levy->matrix(), inst.effective_drift().sample(inst.grid), inst.hamiltonian,
                inst.step()) {}

GridFunction HjbScheme::flux(const GridFunction& u) const {
    if (!H_) return grid_.zeros();
    return numerical_hamiltonian(grid_, *H_, u);
}

UpwindCoefficients HjbScheme::linearize(const GridFunction& u) const {
    if (!H_) return {grid_.zeros(), grid_.zeros()};
    return hamiltonian_linearization(grid_, *H_, u);
}

GridFunction HjbScheme::step(const GridFunction& u_next, const GridFunction& source_next) const {
    GridFunction rhs = u_next + dt_ * source_next;
    if (H_) rhs -= dt_ * flux(u_next);
    return inverse_ * rhs;
}

GridFunction HjbScheme::linear_step(const GridFunction& u_next, const UpwindCoefficients& c) const {
    return inverse_ * (u_next - dt_ * transport(grid_, c, u_next));
}

GridFunction HjbScheme::adjoint_step(const GridFunction& m, const UpwindCoefficients& c) const {
    const GridFunction y = m - dt_ * transport_adjoint(grid_, c, m);
    return inverse_.transpose() * y;
}

Eigen::Index HjbSolution::index_of(double t) const {
    Eigen::Index best = 0;
    (times.array() - t).abs().minCoeff(&best);
    return best;
}

HjbSolution solve_backward(const HjbScheme& scheme, const GridFunction& terminal, const TimeField& source) {
    const Grid& g = scheme.grid();
    const Eigen::Index N = source.cols() - 1;
    if (N < 1) throw std::invalid_argument("solve_backward: source needs at least two time nodes");
    if (source.rows() != g.size() || terminal.size() != g.size())
        throw std::invalid_argument("solve_backward: grid mismatch");
    HjbSolution sol;
    sol.times = Eigen::VectorXd::LinSpaced(N + 1, 0.0, scheme.dt() * static_cast<double>(N));
    sol.u.resize(g.size(), N + 1);
    sol.du.resize(g.size(), N + 1);
    sol.u.col(N) = terminal;
    for (Eigen::Index n = N - 1; n >= 0; --n) sol.u.col(n) = scheme.step(sol.u.col(n + 1), source.col(n + 1));
    for (Eigen::Index n = 0; n <= N; ++n) sol.du.col(n) = gradient(g, GridFunction(sol.u.col(n)));
    return sol;
}

HjbSolution solve_backward(const ProblemInstance& inst, const TimeField& source) {
    if (source.cols() != inst.steps() + 1) throw std::invalid_argument("solve_backward: source has wrong time length");
    const HjbScheme scheme(inst);
    HjbSolution sol = solve_backward(scheme, inst.uT, source);
    sol.times = inst.times();
    return sol;
}

HjbSolution solve_backward(const ProblemInstance& inst, const GridFunction& source) {
    TimeField f = source.replicate(1, inst.steps() + 1);
    return solve_backward(inst, f);
}

double lipschitz_seminorm(const HjbSolution& sol, const Grid& grid, double t) {
    const Eigen::Index c = sol.index_of(t);
    const GridFunction u = sol.u.col(c);
    const Eigen::Index n = u.size();
    const double quotient = (u.tail(n - 1) - u.head(n - 1)).cwiseAbs().maxCoeff() / grid.h();
    return std::max(quotient, sol.du.col(c).cwiseAbs().maxCoeff());
}

double second_difference_bound(const HjbSolution& sol, const Grid& grid, double r) {
    if (!(r > 0.0) || r >= grid.x_max() / 2.0 + 1e-12)
        throw std::invalid_argument("second_difference_bound: need 0 < r < x_max / 2");
    const double h = grid.h();
    const auto jmax = static_cast<Eigen::Index>(std::floor(std::min(1.0, r) / h + 1e-9));
    const auto rmax = static_cast<Eigen::Index>(std::floor(r / h + 1e-9));
    const Eigen::Index c = grid.center();
    double best = 0.0;
    for (Eigen::Index t = 1; t + 1 < sol.u.cols(); ++t) {
        const auto u = sol.u.col(t);
        for (Eigen::Index i = c - rmax; i <= c + rmax; ++i)
            for (Eigen::Index j = 1; j <= jmax; ++j) {
                const double y = static_cast<double>(j) * h;
                best = std::max(best, std::abs(u[i + j] - 2.0 * u[i] + u[i - j]) / (y * y));
            }
    }
    return best;
}

std::vector<HjbSolution> solve_truncated_family(const ProblemInstance& inst, const std::vector<double>& radii,
                                                const TimeField& source) {
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0)) throw std::invalid_argument("solve_truncated_family: radii must be positive");
        if (i > 0 && radii[i] <= radii[i - 1])
            throw std::invalid_argument("solve_truncated_family: radii must increase");
    }
    std::vector<HjbSolution> out;
    out.reserve(radii.size());
    for (double R : radii) out.push_back(solve_backward(inst.with_truncation(R), source));
    return out;
}

}  // namespace fmfg
