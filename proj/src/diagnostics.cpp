#include "fmfg/diagnostics.hpp"

#include "fmfg/fokker_planck.hpp"
#include "fmfg/norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fmfg {

namespace {

Eigen::Index nearest(const Eigen::VectorXd& t, double s) {
    Eigen::Index best = 0;
    (t.array() - s).abs().minCoeff(&best);
    return best;
}

/// max_i |v_i| / <x_i>^k
double weighted_sup(const Grid& g, const GridFunction& v, double k) {
    return (v.array() * WeightVector(g, k).inverse().array()).abs().maxCoeff();
}

/// Columns of `f` that are not multiples of an earlier column, at most `cap` of them.
std::vector<GridFunction> distinct_profiles(const TimeField& f, Eigen::Index first, std::size_t cap) {
    std::vector<GridFunction> out;
    for (Eigen::Index n = first; n < f.cols(); ++n) {
        const GridFunction c = f.col(n);
        const double norm = c.norm();
        if (norm == 0.0) continue;
        const bool seen = std::any_of(out.begin(), out.end(), [&](const GridFunction& p) {
            return std::abs(p.dot(c)) >= (1.0 - 1e-12) * p.norm() * norm;
        });
        if (!seen) out.push_back(c);
    }
    if (out.size() <= cap) return out;
    std::vector<GridFunction> thinned;
    for (std::size_t i = 0; i < cap; ++i) thinned.push_back(out[i * (out.size() - 1) / (cap - 1)]);
    return thinned;
}

}  // namespace

double TurnpikeReport::at(int s, double t) const {
    const Eigen::VectorXd* v = s == 0 ? &series.tv : s == 1 ? &series.osc : &series.grad;
    return (*v)[nearest(series.t, t)];
}

TurnpikeReport turnpike_report(const ProblemInstance& inst, const MfgSolution& evo, const ErgodicSolution& erg) {
    const Grid& g = inst.grid;
    const Eigen::Index N = inst.steps();
    if (evo.fp.m.cols() != N + 1 || evo.hjb.u.cols() != N + 1 || evo.fp.m.rows() != g.size())
        throw std::invalid_argument("turnpike_report: evolution does not match the instance");
    if (erg.m_bar.size() != g.size()) throw std::invalid_argument("turnpike_report: ergodic solution on another grid");

    TurnpikeReport rep;
    rep.T = inst.T;
    TurnpikeSeries& s = rep.series;
    s.t = inst.times();
    for (Eigen::VectorXd* v : {&s.tv, &s.osc, &s.osc_raw, &s.grad, &s.mass, &s.moment}) v->resize(N + 1);
    for (Eigen::Index n = 0; n <= N; ++n) {
        const GridFunction m = evo.fp.m.col(n);
        const GridFunction du = evo.hjb.u.col(n) - erg.u_bar;
        s.tv[n] = tv_k(g, GridFunction(m - erg.m_bar), inst.k);
        s.osc[n] = osc_k(g, GridFunction(du.array() - erg.lambda * (inst.T - s.t[n])), inst.k);
        s.osc_raw[n] = osc_k(g, du, inst.k);
        s.grad[n] = grad_linf_k(g, du, inst.k);
        s.mass[n] = mass(g, m);
        s.moment[n] = moment(g, m, inst.k);
    }

    const double T = inst.T;
    const std::array<const Eigen::VectorXd*, 3> all{&s.tv, &s.osc, &s.grad};
    rep.omega_left = rep.omega_right = std::numeric_limits<double>::infinity();
    rep.min_r_squared = 1.0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        rep.left[i] = fit_exponential(s.t, *all[i], 0.1 * T, 0.4 * T);
        rep.right[i] = fit_exponential_reversed(s.t, *all[i], T, 0.6 * T, 0.9 * T);
        for (const ExponentialFit* f : {&rep.left[i], &rep.right[i]}) {
            rep.floor = rep.floor || f->floor;
            rep.min_r_squared = std::min(rep.min_r_squared, f->r_squared);
        }
        rep.omega_left = std::min(rep.omega_left, rep.left[i].rate);
        rep.omega_right = std::min(rep.omega_right, rep.right[i].rate);
        rep.midpoint[i] = (*all[i])[nearest(s.t, 0.5 * T)];
    }
    rep.omega = std::min(rep.omega_left, rep.omega_right);
    rep.plateau = *std::max_element(rep.midpoint.begin(), rep.midpoint.end());
    for (Eigen::Index n = 0; n <= N; ++n) {
        const double env = std::exp(-rep.omega * s.t[n]) + std::exp(-rep.omega * (T - s.t[n]));
        for (const Eigen::VectorXd* v : all) rep.M = std::max(rep.M, (*v)[n] / env);
    }
    return rep;
}

HjbScheme linear_scheme(const ProblemInstance& inst, const DriftField& drift) {
    const ProblemInstance with = inst.with_drift(drift);
    return HjbScheme(with.grid, with.levy->matrix(), with.effective_drift().sample(with.grid), std::nullopt,
                     with.step());
}

DecayReport linear_decay_check(const ProblemInstance& inst, const DriftField& drift, const GridFunction& vT) {
    const HjbScheme scheme = linear_scheme(inst, drift);
    const Eigen::Index N = inst.steps();
    const HjbSolution sol = solve_backward(scheme, vT, TimeField::Zero(inst.grid.size(), N + 1));
    DecayReport rep;
    rep.t = inst.times();
    rep.series.resize(N + 1);
    for (Eigen::Index n = 0; n <= N; ++n) rep.series[n] = osc_k(inst.grid, sol.u.col(n), inst.k);
    rep.fit = fit_exponential_reversed(rep.t, rep.series, inst.T, 0.1 * inst.T, 0.9 * inst.T);
    return rep;
}

DuhamelReport duhamel_check(const ProblemInstance& inst, const DriftField& drift, const GridFunction& vT,
                            const TimeField& source) {
    const Grid& g = inst.grid;
    const Eigen::Index N = inst.steps();
    if (source.rows() != g.size() || source.cols() != N + 1)
        throw std::invalid_argument("duhamel_check: source needs one column per time node");
    const HjbScheme scheme = linear_scheme(inst, drift);
    const double dt = scheme.dt();
    const double sigma = inst.kernel.sigma;
    const double k = inst.k;
    const double T = inst.T;

    DuhamelReport rep;
    rep.t = inst.times();

    // Probe data: the terminal datum and every distinct source profile.
    std::vector<GridFunction> probes;
    if (osc_k(g, vT, k) > 0.0) probes.push_back(vT);
    for (GridFunction& p : distinct_profiles(source, 1, 16)) probes.push_back(std::move(p));
    if (probes.empty()) probes.push_back(g.sample([](double x) { return std::tanh(x); }));
    rep.probes = static_cast<int>(probes.size());

    const Eigen::VectorXd tau = rep.t;  // lag m dt of S^m
    std::vector<Eigen::VectorXd> osc_ratio;
    std::vector<Eigen::VectorXd> grad_ratio;
    rep.omega = std::numeric_limits<double>::infinity();
    for (const GridFunction& p : probes) {
        const double o = osc_k(g, p, k);
        Eigen::VectorXd r(N + 1), q(N + 1);
        GridFunction w = p;
        for (Eigen::Index m = 0; m <= N; ++m) {
            if (m > 0) w = scheme.implicit_inverse() * w;
            r[m] = osc_k(g, w, k) / o;
            q[m] = grad_linf_k(g, w, k) / o;
        }
        const ExponentialFit fit = fit_exponential(tau, r, 0.1 * T, 0.9 * T);
        rep.omega = std::min(rep.omega, fit.samples >= kMinFitSamples ? fit.rate : 0.0);
        osc_ratio.push_back(r);
        grad_ratio.push_back(q);
    }
    rep.omega = std::max(rep.omega, 0.0);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        for (Eigen::Index m = 0; m <= N; ++m) {
            rep.K = std::max(rep.K, osc_ratio[i][m] * std::exp(rep.omega * tau[m]));
            if (m == 0) continue;
            const double shape = std::exp(-rep.omega * tau[m]) + (tau[m] <= 1.0 ? std::pow(tau[m], -1.0 / sigma) : 0.0);
            rep.K_grad = std::max(rep.K_grad, grad_ratio[i][m] / shape);
        }
    }

    const HjbSolution sol = solve_backward(scheme, vT, source);
    Eigen::VectorXd f_osc(N + 1);
    for (Eigen::Index n = 0; n <= N; ++n) f_osc[n] = osc_k(g, source.col(n), k);
    const double vT_osc = osc_k(g, vT, k);
    const double layer = sigma / (sigma - 1.0);  // bounds dt sum of tau^{-1/sigma} over tau <= 1

    rep.osc.resize(N + 1);
    rep.grad.resize(N + 1);
    rep.osc_bound.resize(N + 1);
    rep.grad_bound = Eigen::VectorXd::Constant(N + 1, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index n = 0; n <= N; ++n) {
        rep.osc[n] = osc_k(g, sol.u.col(n), k);
        rep.grad[n] = grad_linf_k(g, sol.u.col(n), k);
        double integral = 0.0;
        double local_sup = 0.0;
        for (Eigen::Index j = n + 1; j <= N; ++j) {
            integral += dt * std::exp(-rep.omega * (rep.t[j] - rep.t[n])) * f_osc[j];
            if (rep.t[j] - rep.t[n] <= 1.0 + 1e-12) local_sup = std::max(local_sup, f_osc[j]);
        }
        const double decay = std::exp(-rep.omega * (T - rep.t[n])) * vT_osc;
        rep.osc_bound[n] = rep.K * (decay + integral);
        if (rep.osc_bound[n] > 0.0) rep.osc_ratio = std::max(rep.osc_ratio, rep.osc[n] / rep.osc_bound[n]);
        if (rep.t[n] <= T - 1.0 + 1e-12) {
            rep.grad_bound[n] = rep.K_grad * (decay + integral + layer * local_sup);
            if (rep.grad_bound[n] > 0.0) rep.grad_ratio = std::max(rep.grad_ratio, rep.grad[n] / rep.grad_bound[n]);
        }
    }
    rep.ratio = std::max(rep.osc_ratio, rep.grad_ratio);

    // Terminal layer in log-log coordinates, on the source part of the solution alone.
    const HjbSolution forced = solve_backward(scheme, g.zeros(), source);
    std::vector<double> ls, ex;
    for (Eigen::Index n = 0; n < N; ++n) {
        const double s = T - rep.t[n];
        if (s < 0.1 - 1e-12 || s > 1.0 + 1e-12) continue;
        ls.push_back(std::log(s));
        ex.push_back(grad_linf_k(g, forced.u.col(n), k));
    }
    if (!ls.empty()) {
        const Eigen::Map<const Eigen::VectorXd> x(ls.data(), static_cast<Eigen::Index>(ls.size()));
        const Eigen::Map<const Eigen::VectorXd> y(ex.data(), static_cast<Eigen::Index>(ex.size()));
        rep.terminal_layer = fit_exponential(x, y, std::log(0.1), 0.0);
        rep.terminal_exponent = -rep.terminal_layer.rate;
    }
    return rep;
}

ForcedFpReport nonhomogeneous_fp_check(const ProblemInstance& inst, const DriftField& drift, const GridFunction& mu0,
                                       const TimeField& Phi, const GridFunction& m_bar,
                                       const std::vector<double>& deltas) {
    const Grid& g = inst.grid;
    const Eigen::Index N = inst.steps();
    if (Phi.rows() != g.size() || Phi.cols() < N) throw std::invalid_argument("nonhomogeneous_fp_check: Phi has wrong shape");
    if (mu0.size() != g.size() || m_bar.size() != g.size())
        throw std::invalid_argument("nonhomogeneous_fp_check: grid mismatch");
    if (std::abs(mass(g, mu0)) > 1e-12) throw std::invalid_argument("nonhomogeneous_fp_check: mu0 must have zero mass");
    for (double d : deltas)
        if (!(d > 0.0)) throw std::invalid_argument("nonhomogeneous_fp_check: deltas must be positive");

    const HjbScheme scheme = linear_scheme(inst, drift);
    const double dt = scheme.dt();
    const double sigma = inst.kernel.sigma;
    const double k = inst.k;
    const ControlPath none(static_cast<std::size_t>(N), UpwindCoefficients{g.zeros(), g.zeros()});

    // div(m_bar Phi) as minus the transpose of the upwind transport along Phi.
    TimeField src(g.size(), N);
    Eigen::VectorXd phi_inf(N), phi_l2(N);
    for (Eigen::Index n = 0; n < N; ++n) {
        const GridFunction p = Phi.col(n);
        src.col(n) = -transport_adjoint(g, upwind_velocity(p), m_bar);
        phi_inf[n] = weighted_sup(g, p, k);
        phi_l2[n] = g.h() * (p.array().square() * m_bar.array()).sum();
    }
    const GridFunction zero = g.zeros();
    // Signed data: every run goes through the sourced path, which skips the positivity guard.
    const TimeField no_src = TimeField::Zero(g.size(), N);
    const FpSolution a = solve_forward(scheme, mu0, none, k, &no_src);
    const FpSolution b = solve_forward(scheme, zero, none, k, &src);
    const FpSolution c = solve_forward(scheme, mu0, none, k, &src);

    ForcedFpReport rep;
    rep.t = inst.times();
    auto tv_series = [&](const FpSolution& s) {
        Eigen::VectorXd v(N + 1);
        for (Eigen::Index n = 0; n <= N; ++n) v[n] = tv_k(g, s.m.col(n), k);
        return v;
    };
    const Eigen::VectorXd tva = tv_series(a);
    const Eigen::VectorXd tvb = tv_series(b);
    rep.tv = tv_series(c);

    const double tv0 = tva[0];
    if (tv0 > 0.0) {
        const ExponentialFit fit = fit_exponential(rep.t, tva, 0.1 * inst.T, 0.9 * inst.T);
        rep.omega = fit.samples >= kMinFitSamples ? std::max(fit.rate, 0.0) : 0.0;
        for (Eigen::Index n = 0; n <= N; ++n)
            rep.K_decay = std::max(rep.K_decay, tva[n] / (std::exp(-rep.omega * rep.t[n]) * tv0));
    }

    rep.deltas = deltas;
    for (double delta : deltas) {
        Eigen::VectorXd term(N + 1);
        for (Eigen::Index n = 0; n <= N; ++n) {
            const double lo = std::max(rep.t[n] - delta, 0.0);
            double sup = 0.0;
            double energy = 0.0;
            for (Eigen::Index j = 0; j < N; ++j) {
                // Phi column j acts on [t_j, t_{j+1}].
                if (rep.t[j + 1] > lo + 1e-12 && rep.t[j] < rep.t[n] - 1e-12) sup = std::max(sup, phi_inf[j]);
                if (rep.t[j + 1] <= lo + 1e-12) energy += dt * phi_l2[j];
            }
            term[n] = std::pow(delta, 1.0 - 1.0 / sigma) * sup + std::pow(delta, 0.5 - 1.0 / sigma) * std::sqrt(energy);
        }
        double Kf = 0.0;
        for (Eigen::Index n = 0; n <= N; ++n)
            if (term[n] > 0.0) Kf = std::max(Kf, tvb[n] / term[n]);
        double ratio = 0.0;
        for (Eigen::Index n = 0; n <= N; ++n) {
            const double env = rep.K_decay * std::exp(-rep.omega * rep.t[n]) * tv0 + Kf * term[n];
            if (env > 0.0) ratio = std::max(ratio, rep.tv[n] / env);
            else if (rep.tv[n] > 0.0) ratio = std::numeric_limits<double>::infinity();
        }
        rep.K_forcing.push_back(Kf);
        rep.ratios.push_back(ratio);
        rep.ratio = std::max(rep.ratio, ratio);
    }

    rep.gamma = 0.5 * (1.0 + sigma);
    rep.gamma_prime = rep.gamma / (rep.gamma - 1.0);
    const Eigen::VectorXd powered = rep.tv.array().pow(rep.gamma_prime);
    rep.integral = dt * (powered.sum() - 0.5 * (powered[0] + powered[N]));
    rep.phi_sup = phi_inf.maxCoeff();
    rep.phi_energy = dt * phi_l2.sum();
    rep.rhs = std::pow(tv0, rep.gamma_prime) +
              (rep.phi_sup > 0.0 ? std::pow(rep.phi_sup, rep.gamma_prime - 2.0) * rep.phi_energy : 0.0);
    return rep;
}

RegularizationReport regularizing_effect(const ProblemInstance& inst, const GridFunction& uT, double tau0,
                                         double tau1) {
    if (!(tau0 > 0.0 && tau1 > tau0 && tau1 <= inst.T))
        throw std::invalid_argument("regularizing_effect: need 0 < tau0 < tau1 <= T");
    const ProblemInstance with = inst.with_data(inst.m0, uT);
    const HjbSolution sol = solve_backward(with, with.grid.zeros());
    RegularizationReport rep;
    std::vector<double> ls, gs;
    for (Eigen::Index n = sol.steps(); n >= 0; --n) {
        const double s = inst.T - sol.times[n];
        if (s < tau0 - 1e-12 || s > tau1 + 1e-12) continue;
        ls.push_back(s);
        gs.push_back(grad_linf_k(inst.grid, sol.u.col(n), inst.k));
    }
    rep.tau = Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
    rep.grad = Eigen::Map<const Eigen::VectorXd>(gs.data(), static_cast<Eigen::Index>(gs.size()));
    const Eigen::VectorXd logs = rep.tau.array().log();
    rep.fit = fit_exponential(logs, rep.grad, std::log(tau0), std::log(tau1));
    rep.slope = -rep.fit.rate;
    return rep;
}

GridFunction holder_datum(const Grid& grid) {
    return grid.sample([](double x) { return std::sqrt(std::abs(std::sin(x))); });
}

}  // namespace fmfg
