#include "fmfg/fokker_planck.hpp"

#include "fmfg/norms.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fmfg {

FpSolution solve_forward(const HjbScheme& scheme, const GridFunction& m0, const ControlPath& control, double k,
                         const TimeField* source) {
    const Grid& g = scheme.grid();
    const auto N = static_cast<Eigen::Index>(control.size());
    if (N < 1) throw std::invalid_argument("solve_forward: need at least one step");
    if (m0.size() != g.size()) throw std::invalid_argument("solve_forward: grid mismatch");
    if (source && (source->rows() != g.size() || source->cols() < N))
        throw std::invalid_argument("solve_forward: source has wrong shape");

    FpSolution sol;
    sol.times = Eigen::VectorXd::LinSpaced(N + 1, 0.0, scheme.dt() * static_cast<double>(N));
    sol.m.resize(g.size(), N + 1);
    sol.m.col(0) = m0;
    const double dt = scheme.dt();
    for (Eigen::Index n = 0; n < N; ++n) {
        const GridFunction mn = sol.m.col(n);
        GridFunction y = mn - dt * transport_adjoint(g, control[static_cast<std::size_t>(n)], mn);
        if (source) y += dt * source->col(n);
        sol.m.col(n + 1) = scheme.implicit_inverse().transpose() * y;
        if (!source && sol.m.col(n + 1).minCoeff() < -1e-12)
            throw std::runtime_error("solve_forward: negative density at step " + std::to_string(n + 1));
    }
    const WeightVector w(g, k);
    sol.masses = g.h() * sol.m.colwise().sum().transpose();
    sol.moments = g.h() * (sol.m.transpose() * w.values());
    return sol;
}

FpSolution solve_forward(const ProblemInstance& inst, const GridFunction& m0, const ControlPath& control) {
    const HjbScheme scheme(inst);
    const auto N = static_cast<std::size_t>(inst.steps());
    const ControlPath zero(N, UpwindCoefficients{inst.grid.zeros(), inst.grid.zeros()});
    const ControlPath& path = control.empty() ? zero : control;
    if (path.size() != N) throw std::invalid_argument("solve_forward: control path length != steps");
    FpSolution sol = solve_forward(scheme, m0, path, inst.k);
    sol.times = inst.times();
    return sol;
}

FpSolution solve_forward(const ProblemInstance& inst, const ControlPath& control) {
    return solve_forward(inst, inst.m0, control);
}

FpSolution solve_forward(const ProblemInstance& inst, const TimeField& velocity) {
    if (velocity.rows() != inst.grid.size() || velocity.cols() < inst.steps())
        throw std::invalid_argument("solve_forward: velocity field has wrong shape");
    ControlPath path;
    path.reserve(static_cast<std::size_t>(inst.steps()));
    for (Eigen::Index n = 0; n < inst.steps(); ++n) path.push_back(upwind_velocity(velocity.col(n)));
    return solve_forward(inst, inst.m0, path);
}

StationaryDensity solve_stationary(const HjbScheme& scheme, const UpwindCoefficients& control, int max_iter,
                                   double tol) {
    const Grid& g = scheme.grid();
    const Eigen::Index n = g.size();
    const double dt = scheme.dt();
    // S^T = (I - dt P) A^{-1}; P is tridiagonal so this costs O(n^2).
    const Eigen::MatrixXd P = transport_matrix(g, control);
    const Eigen::MatrixXd St = scheme.implicit_inverse() - dt * (P * scheme.implicit_inverse());
    const Eigen::MatrixXd S = St.transpose();

    const double shift = 1.0 + 1e-7;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(S - shift * Eigen::MatrixXd::Identity(n, n));
    StationaryDensity out;
    GridFunction m = uniform_density(g);
    for (int it = 1; it <= max_iter; ++it) {
        GridFunction next = lu.solve(m);
        next /= mass(g, next);
        out.iterations = it;
        const double change = g.h() * (next - m).cwiseAbs().sum();
        m = next;
        if (change <= tol) break;
    }
    // Perron vector: entries are positive up to roundoff.
    m = m.cwiseMax(0.0);
    m /= mass(g, m);
    out.m = m;
    out.residual = g.h() * (S * m - m).cwiseAbs().sum();
    out.converged = out.residual <= 1e-10;
    if (!out.converged)
        throw std::runtime_error("solve_stationary: inverse iteration did not converge, residual " +
                                 std::to_string(out.residual));
    return out;
}

StationaryDensity solve_stationary(const ProblemInstance& inst, const UpwindCoefficients& control) {
    return solve_stationary(HjbScheme(inst), control);
}

StationaryDensity solve_stationary(const ProblemInstance& inst) {
    return solve_stationary(inst, UpwindCoefficients{inst.grid.zeros(), inst.grid.zeros()});
}

ExponentialFit decay_rate(const ProblemInstance& inst, const UpwindCoefficients& control, const GridFunction& m0_a,
                          const GridFunction& m0_b) {
    for (const GridFunction* m : {&m0_a, &m0_b})
        if (std::abs(mass(inst.grid, *m) - 1.0) > 1e-12) throw std::invalid_argument("decay_rate: densities need mass 1");
    const HjbScheme scheme(inst);
    const ControlPath path(static_cast<std::size_t>(inst.steps()), control);
    const FpSolution a = solve_forward(scheme, m0_a, path, inst.k);
    const FpSolution b = solve_forward(scheme, m0_b, path, inst.k);
    const Eigen::VectorXd t = inst.times();
    Eigen::VectorXd w(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) w[i] = tv_k(inst.grid, GridFunction(a.m.col(i) - b.m.col(i)), inst.k);
    return fit_exponential(t, w, 0.5, inst.T - 0.5);
}

}  // namespace fmfg
