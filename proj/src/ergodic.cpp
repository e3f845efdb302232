#include "fmfg/ergodic.hpp"

#include "fmfg/norms.hpp"

#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>

namespace fmfg {

namespace {

double sup_norm(const GridFunction& v) { return v.cwiseAbs().maxCoeff(); }

double lipschitz(const Grid& g, const GridFunction& u) {
    return (u.tail(u.size() - 1) - u.head(u.size() - 1)).cwiseAbs().maxCoeff() / g.h();
}

/// Weights w_j with sum_j w_j p(delta_j) = p(0) for polynomials of degree < size.
std::vector<double> extrapolation_weights(const std::vector<double>& d) {
    std::vector<double> w(d.size(), 1.0);
    for (std::size_t j = 0; j < d.size(); ++j)
        for (std::size_t i = 0; i < d.size(); ++i)
            if (i != j) w[j] *= d[i] / (d[i] - d[j]);
    return w;
}

std::string format_history(const std::vector<double>& h) {
    std::ostringstream os;
    os.precision(3);
    for (std::size_t i = 0; i < h.size(); ++i) os << (i ? ", " : "") << h[i];
    return os.str();
}

}  // namespace

void ErgodicConfig::check() const {
    if (deltas.empty()) throw std::invalid_argument("ergodic: empty discount ladder");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0.0)) throw std::invalid_argument("ergodic: discounts must be positive");
        if (i > 0 && !(deltas[i] < deltas[i - 1])) throw std::invalid_argument("ergodic: discounts must decrease");
    }
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("ergodic: theta must lie in (0, 1]");
    if (!(tol > 0.0) || !(mfg_tol > 0.0) || !(extrapolation_tol > 0.0))
        throw std::invalid_argument("ergodic: tolerances must be positive");
    if (max_iters < 1) throw std::invalid_argument("ergodic: max_iters must be >= 1");
    if (threads < 1) throw std::invalid_argument("ergodic: threads must be >= 1");
}

DiscountedSolution solve_discounted(const HjbScheme& scheme, const GridFunction& f, double delta, double tol,
                                    int max_iters) {
    if (!(delta > 0.0)) throw std::invalid_argument("solve_discounted: delta must be positive");
    const Grid& g = scheme.grid();
    if (f.size() != g.size()) throw std::invalid_argument("solve_discounted: grid mismatch");
    const Eigen::Index n = g.size();
    const Eigen::MatrixXd base = delta * Eigen::MatrixXd::Identity(n, n) + scheme.generator();
    auto residual_of = [&](const GridFunction& u) -> GridFunction {
        return base * u + scheme.flux(u) - f;
    };

    DiscountedSolution out;
    out.delta = delta;
    out.u = g.zeros();
    GridFunction r = residual_of(out.u);
    out.residual = sup_norm(r);
    out.history.push_back(out.residual);
    while (out.residual > tol) {
        if (out.iterations == max_iters)
            throw std::runtime_error("solve_discounted: residual stalled at " + std::to_string(out.residual) +
                                     " (history: " + format_history(out.history) + ")");
        ++out.iterations;
        const Eigen::MatrixXd J = base + transport_matrix(g, scheme.linearize(out.u));
        const GridFunction step = J.partialPivLu().solve(r);
        // Backtracking keeps the iteration monotone in the residual.
        double t = 1.0;
        GridFunction trial = out.u - step;
        GridFunction rt = residual_of(trial);
        while (sup_norm(rt) > out.residual && t > 1.0 / 64.0) {
            t *= 0.5;
            trial = out.u - t * step;
            rt = residual_of(trial);
        }
        out.u = trial;
        r = rt;
        out.residual = sup_norm(r);
        out.history.push_back(out.residual);
    }
    return out;
}

DiscountedSolution solve_discounted(const ProblemInstance& inst, const GridFunction& f, double delta) {
    return solve_discounted(HjbScheme(inst), f, delta);
}

ErgodicHjb solve_ergodic_hjb(const HjbScheme& scheme, const GridFunction& f, const ErgodicConfig& cfg) {
    cfg.check();
    const Grid& g = scheme.grid();
    const Eigen::Index n = g.size();
    const Eigen::Index c = g.center();

    std::vector<DiscountedSolution> levels(cfg.deltas.size());
    if (cfg.threads > 1 && cfg.deltas.size() > 1) {
        std::vector<std::future<DiscountedSolution>> jobs;
        for (double d : cfg.deltas)
            jobs.push_back(std::async(std::launch::async, [&scheme, &f, d] { return solve_discounted(scheme, f, d); }));
        for (std::size_t i = 0; i < jobs.size(); ++i) levels[i] = jobs[i].get();
    } else {
        for (std::size_t i = 0; i < cfg.deltas.size(); ++i) levels[i] = solve_discounted(scheme, f, cfg.deltas[i]);
    }

    ErgodicHjb out;
    out.deltas = cfg.deltas;
    const std::vector<double> w = extrapolation_weights(cfg.deltas);
    GridFunction u = g.zeros();
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double d = cfg.deltas[i];
        const GridFunction shifted = levels[i].u.array() - levels[i].u[c];
        out.ladder.push_back(d * levels[i].u[c]);
        out.lipschitz.push_back(lipschitz(g, shifted));
        out.richardson2 += w[i] * out.ladder.back();
        u += w[i] * shifted;
    }
    if (levels.size() >= 2) {
        const std::size_t a = levels.size() - 2;
        const std::size_t b = levels.size() - 1;
        const double da = cfg.deltas[a];
        const double db = cfg.deltas[b];
        out.richardson1 = (da * out.ladder[b] - db * out.ladder[a]) / (da - db);
    } else {
        out.richardson1 = out.richardson2;
    }
    if (std::abs(out.richardson1 - out.richardson2) > cfg.extrapolation_tol)
        throw std::runtime_error("solve_ergodic_hjb: Richardson estimates disagree (" +
                                 std::to_string(out.richardson1) + " vs " + std::to_string(out.richardson2) + ")");

    // Newton on  lambda + (-L + B) u + Hnum(u) = f  with the unknown u_c replaced by lambda.
    double lambda = out.richardson2;
    u[c] = 0.0;
    auto residual_of = [&](double lam, const GridFunction& v) -> GridFunction {
        return scheme.generator() * v + scheme.flux(v) - f + GridFunction::Constant(n, lam);
    };
    GridFunction r = residual_of(lambda, u);
    double res = sup_norm(r);
    const int max_newton = 50;
    while (res > cfg.tol) {
        if (out.newton_iterations == max_newton)
            throw std::runtime_error("solve_ergodic_hjb: Newton stalled at residual " + std::to_string(res));
        ++out.newton_iterations;
        Eigen::MatrixXd J = scheme.generator() + transport_matrix(g, scheme.linearize(u));
        J.col(c).setOnes();
        const GridFunction step = J.partialPivLu().solve(r);
        double t = 1.0;
        for (;;) {
            GridFunction trial = u - t * step;
            const double lam = lambda - t * step[c];
            trial[c] = 0.0;
            const GridFunction rt = residual_of(lam, trial);
            if (sup_norm(rt) <= res || t <= 1.0 / 64.0) {
                u = trial;
                lambda = lam;
                r = rt;
                res = sup_norm(rt);
                break;
            }
            t *= 0.5;
        }
    }
    out.lambda = lambda;
    out.u_bar = u;
    out.residual = res;
    return out;
}

ErgodicHjb solve_ergodic_hjb(const ProblemInstance& inst, const GridFunction& f, const ErgodicConfig& cfg) {
    return solve_ergodic_hjb(HjbScheme(inst), f, cfg);
}

GridFunction stationary_density(const HjbScheme& scheme, const UpwindCoefficients& control) {
    const Grid& g = scheme.grid();
    const Eigen::Index c = g.center();
    Eigen::MatrixXd M = (scheme.generator() + transport_matrix(g, control)).transpose();
    M.row(c).setConstant(g.h());
    GridFunction rhs = g.zeros();
    rhs[c] = 1.0;
    GridFunction m = M.partialPivLu().solve(rhs);
    if (m.minCoeff() < -1e-12) throw std::runtime_error("stationary_density: invariant vector is not positive");
    m = m.cwiseMax(0.0);
    return m / mass(g, m);
}

ErgodicSolution solve_ergodic_mfg(const ProblemInstance& inst, const ErgodicConfig& cfg,
                                  const std::optional<GridFunction>& initial) {
    cfg.check();
    inst.check();
    const Grid& g = inst.grid;
    const HjbScheme scheme(inst);
    GridFunction mu = initial ? *initial : inst.m0;
    if (mu.size() != g.size()) throw std::invalid_argument("solve_ergodic_mfg: initial density has wrong size");
    const bool decoupled = inst.coupling.strength() == 0.0;

    ErgodicSolution out;
    ErgodicHjb hjb;
    GridFunction m_bar;
    for (int j = 0; j < cfg.max_iters; ++j) {
        hjb = solve_ergodic_hjb(scheme, inst.coupling(mu), cfg);
        m_bar = stationary_density(scheme, scheme.linearize(hjb.u_bar));
        const double change = decoupled ? 0.0 : cfg.theta * tv_k(g, GridFunction(m_bar - mu), 0.0);
        out.history.push_back(change);
        out.iterations = j + 1;
        if (change <= cfg.mfg_tol) {
            out.converged = true;
            break;
        }
        mu += cfg.theta * (m_bar - mu);
    }
    // The returned triple is consistent: m_bar is stationary for the returned u_bar.
    out.lambda = hjb.lambda;
    out.u_bar = hjb.u_bar;
    out.m_bar = m_bar;
    out.residual_hjb = sup_norm(GridFunction(scheme.generator() * hjb.u_bar + scheme.flux(hjb.u_bar) -
                                             inst.coupling(m_bar) + GridFunction::Constant(g.size(), hjb.lambda)));
    const UpwindCoefficients control = scheme.linearize(hjb.u_bar);
    out.residual_fp =
        sup_norm(GridFunction((scheme.generator() + transport_matrix(g, control)).transpose() * m_bar));
    out.moment_2k = moment(g, m_bar, 2.0 * inst.k);
    out.boundary_mass = g.h() * (m_bar[0] + m_bar[g.size() - 1]);
    return out;
}

}  // namespace fmfg
