#include "fmfg/model.hpp"

#include "fmfg/norms.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fmfg {

// ---------------------------------------------------------------------------
// Drift

DriftField DriftField::linear(double alpha, double shift, double wiggle) {
    if (!(alpha > 0.0)) throw std::invalid_argument("drift: alpha must be positive");
    auto b = [alpha, shift, wiggle](double x) { return alpha * (x - shift) + wiggle * std::sin(x); };
    return DriftField(Kind::linear, b, alpha, 2.0 * std::abs(wiggle));
}

DriftField DriftField::cubic_saturated(double alpha, double gain) {
    if (!(alpha > 0.0)) throw std::invalid_argument("drift: alpha must be positive");
    if (gain < 0.0) throw std::invalid_argument("drift: cubic gain must be nonnegative");
    auto b = [alpha, gain](double x) { return alpha * x + gain * x * x * x / (1.0 + x * x); };
    return DriftField(Kind::cubic_saturated, b, alpha, 0.0);
}

DriftField DriftField::custom(std::function<double(double)> b, double alpha, double beta) {
    if (!b) throw std::invalid_argument("drift: empty callable");
    return DriftField(Kind::custom, std::move(b), alpha, beta);
}

DriftField DriftField::table(const Grid& grid, const GridFunction& values, double alpha, double beta) {
    if (values.size() != grid.size()) throw std::invalid_argument("drift table: grid mismatch");
    const double x0 = -grid.x_max();
    const double h = grid.h();
    const Eigen::Index n = grid.size();
    auto b = [values, x0, h, n](double x) {
        const double s = (x - x0) / h;
        if (s <= 0.0) return values[0];
        if (s >= static_cast<double>(n - 1)) return values[n - 1];
        const auto i = static_cast<Eigen::Index>(std::floor(s));
        const double t = s - static_cast<double>(i);
        return (1.0 - t) * values[i] + t * values[std::min(i + 1, n - 1)];
    };
    return DriftField(Kind::custom, b, alpha, beta);
}

GridFunction DriftField::derivative(const Grid& grid) const { return gradient(grid, sample(grid)); }

DriftField DriftField::truncated(double R) const {
    if (!(R > 0.0)) throw std::invalid_argument("truncate_drift: R must be positive");
    if (std::isinf(R)) return *this;
    auto b = [inner = b_, R](double x) { return inner(x) * cutoff(x, R); };
    return DriftField(kind_, b, alpha_, beta_);
}

double cutoff(double x, double R) {
    const double t = (std::abs(x) - R) / R;
    if (t <= 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double cutoff_derivative(double x, double R) {
    const double t = (std::abs(x) - R) / R;
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    return -std::copysign(ds / R, x);
}

DriftField truncate_drift(const DriftField& drift, double R) { return drift.truncated(R); }

// ---------------------------------------------------------------------------
// Hamiltonian

Hamiltonian Hamiltonian::kinetic_saturated(double c_H, std::function<double(double)> h0, double h0_bound) {
    if (!(c_H > 0.0)) throw std::invalid_argument("hamiltonian: c_H must be positive");
    Hamiltonian H;
    H.kind_ = Kind::kinetic_saturated;
    H.c_H_ = c_H;
    H.L_H_ = c_H;
    H.C_H_ = std::max(c_H, h0_bound);
    H.h0_ = std::move(h0);
    return H;
}

Hamiltonian Hamiltonian::custom(std::function<double(double, double)> value,
                                std::function<double(double, double)> dp,
                                std::function<double(double, double)> dpp, double L_H, double C_H) {
    if (!value || !dp || !dpp) throw std::invalid_argument("hamiltonian: empty callable");
    if (!(L_H > 0.0)) throw std::invalid_argument("hamiltonian: L_H must be positive");
    Hamiltonian H;
    H.kind_ = Kind::custom;
    H.L_H_ = L_H;
    H.C_H_ = C_H;
    H.H_ = std::move(value);
    H.Hp_ = std::move(dp);
    H.Hpp_ = std::move(dpp);
    return H;
}

double Hamiltonian::value(double x, double p) const {
    if (kind_ == Kind::custom) return H_(x, p);
    return c_H_ * (std::sqrt(1.0 + p * p) - 1.0) + h0(x);
}

double Hamiltonian::dp(double x, double p) const {
    if (kind_ == Kind::custom) return Hp_(x, p);
    return c_H_ * p / std::sqrt(1.0 + p * p);
}

double Hamiltonian::dpp(double x, double p) const {
    if (kind_ == Kind::custom) return Hpp_(x, p);
    return c_H_ * std::pow(1.0 + p * p, -1.5);
}

// ---------------------------------------------------------------------------
// Coupling

Coupling::Coupling(const Grid& grid, double strength, double width, std::function<double(double)> f0)
    : grid_(grid), strength_(strength), width_(width) {
    if (strength < 0.0) throw std::invalid_argument("coupling: strength must be nonnegative");
    if (!(width >= grid.h())) throw std::invalid_argument("coupling: mollifier width must be at least h");
    const double h = grid.h();
    const Eigen::Index n = grid.size();

    // Triangular bump sampled at the offsets, normalized to unit discrete mass.
    const auto J = static_cast<Eigen::Index>(std::floor(width / h));
    Eigen::VectorXd rho(J + 1);
    for (Eigen::Index j = 0; j <= J; ++j) rho[j] = std::max(0.0, 1.0 - static_cast<double>(j) * h / width);
    const double total = h * (rho[0] + 2.0 * rho.tail(J).sum());
    rho /= total;

    R_ = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = std::max<Eigen::Index>(0, i - J); j <= std::min(n - 1, i + J); ++j)
            R_(i, j) = h * rho[std::abs(i - j)];
    C_ = strength * (R_ * R_);
    f0_ = f0 ? grid.sample(f0) : grid.zeros();
}

TimeField Coupling::apply(const TimeField& m) const {
    TimeField out = C_ * m;
    out.colwise() += f0_;
    return out;
}

double Coupling::monotonicity_integral(const GridFunction& m1, const GridFunction& m2) const {
    const GridFunction r = R_ * (m1 - m2);
    return strength_ * grid_.h() * r.squaredNorm();
}

// ---------------------------------------------------------------------------
// Instance

Eigen::Index ProblemInstance::steps() const {
    if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("instance: T and dt must be positive");
    return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(T / dt)));
}

Eigen::VectorXd ProblemInstance::times() const {
    const Eigen::Index N = steps();
    return Eigen::VectorXd::LinSpaced(N + 1, 0.0, T);
}

ProblemInstance ProblemInstance::with_horizon(double T_new) const {
    ProblemInstance p = *this;
    p.T = T_new;
    return p;
}

ProblemInstance ProblemInstance::with_drift(DriftField d) const {
    ProblemInstance p = *this;
    p.drift = std::move(d);
    return p;
}

ProblemInstance ProblemInstance::with_truncation(double R_new) const {
    ProblemInstance p = *this;
    p.R = R_new;
    return p;
}

ProblemInstance ProblemInstance::with_coupling(Coupling c) const {
    ProblemInstance p = *this;
    p.coupling = std::move(c);
    return p;
}

ProblemInstance ProblemInstance::with_data(GridFunction m0_new, GridFunction uT_new) const {
    ProblemInstance p = *this;
    p.m0 = std::move(m0_new);
    p.uT = std::move(uT_new);
    return p;
}

DriftField ProblemInstance::effective_drift() const { return drift.truncated(R); }

void ProblemInstance::check() const {
    if (!levy) throw std::invalid_argument("instance: missing Levy operator");
    if (!levy->grid().same_as(grid)) throw std::invalid_argument("instance: operator grid mismatch");
    if (m0.size() != grid.size() || uT.size() != grid.size())
        throw std::invalid_argument("instance: data size does not match grid");
    if (m0.minCoeff() < 0.0) throw std::invalid_argument("instance: m0 has negative entries");
    if (std::abs(mass(grid, m0) - 1.0) > 1e-12) throw std::invalid_argument("instance: m0 must have mass 1");
    if (!(k > 0.0 && k < kernel.sigma)) throw std::invalid_argument("instance: k must lie in (0, sigma)");
    if (!(R > 0.0)) throw std::invalid_argument("instance: truncation radius must be positive");
    steps();
}

GridFunction gaussian_density(const Grid& grid, double center, double std) {
    if (!(std > 0.0)) throw std::invalid_argument("gaussian_density: std must be positive");
    GridFunction m = grid.sample([=](double x) {
        const double z = (x - center) / std;
        return std::exp(-0.5 * z * z);
    });
    return m / mass(grid, m);
}

GridFunction uniform_density(const Grid& grid) { return grid.constant(1.0 / (grid.h() * grid.size())); }

GridFunction point_mass(const Grid& grid, Eigen::Index node) {
    if (node < 0 || node >= grid.size()) throw std::invalid_argument("point_mass: node out of range");
    GridFunction m = grid.zeros();
    m[node] = 1.0 / grid.h();
    return m;
}

ProblemInstance default_instance(const InstanceParams& p) {
    const Grid grid = make_grid(p.x_max, p.n);
    const LevyKernel kernel = LevyKernel::fractional(p.sigma);
    auto op = std::make_shared<const LevyOperator>(kernel, grid);
    const double anchor = p.anchor;
    const double terminal = p.uT_amplitude;
    ProblemInstance inst{
        grid,
        kernel,
        op,
        DriftField::linear(p.alpha),
        Hamiltonian::kinetic_saturated(p.c_H),
        Coupling(grid, p.coupling_strength, p.coupling_width, [anchor](double x) { return anchor * std::tanh(x); }),
        gaussian_density(grid, p.m0_center, p.m0_std),
        grid.sample([terminal](double x) { return terminal * std::tanh(x); }),
        p.T,
        p.dt,
        p.k,
    };
    inst.check();
    return inst;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.passed; });
}

const AssumptionCheck* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

std::string fmt(const char* label, double v) {
    std::ostringstream os;
    os.precision(6);
    os << label << '=' << v;
    return os.str();
}

}  // namespace

ValidationReport validate(const ProblemInstance& inst) {
    ValidationReport rep;
    const Grid& g = inst.grid;
    const Eigen::Index n = g.size();
    const double h = g.h();
    const DriftField drift = inst.effective_drift();
    const GridFunction b = drift.sample(g);
    std::mt19937_64 rng(20240917ULL);

    // Confinement on all grid pairs; beta_measured is the smallest beta that works for the declared alpha.
    {
        const double alpha = drift.alpha();
        double beta = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double d = g[j] - g[i];
                beta = std::max(beta, alpha * d - (b[j] - b[i]));
            }
        rep.alpha = alpha;
        rep.beta_measured = beta;
        const bool ok = beta <= drift.beta() + 1e-10;
        rep.checks.push_back({"B1", ok, fmt("alpha", alpha) + " " + fmt("beta", beta)});

        double lip = 0.0;
        for (Eigen::Index i = 0; i + 1 < n; ++i) lip = std::max(lip, std::abs(b[i + 1] - b[i]) / h);
        rep.checks.push_back({"B2", std::isfinite(lip), fmt("max difference quotient", lip)});
    }

    // Hamiltonian: sampled nodes times a p-lattice.
    const Hamiltonian& H = inst.hamiltonian;
    std::vector<double> xs;
    for (Eigen::Index i = 0; i < n; i += std::max<Eigen::Index>(1, n / 40)) xs.push_back(g[i]);
    xs.push_back(g[n - 1]);
    std::vector<double> ps;
    for (int j = -400; j <= 400; ++j) ps.push_back(0.125 * j);
    {
        double growth = 0.0;
        double lipp = 0.0;
        double lipx = 0.0;
        for (double x : xs)
            for (std::size_t a = 0; a < ps.size(); ++a) {
                const double p = ps[a];
                growth = std::max(growth, std::abs(H.value(x, p)) / (1.0 + std::abs(p)));
                lipp = std::max(lipp, std::abs(H.dp(x, p)));
                if (a + 1 < ps.size())
                    lipp = std::max(lipp, std::abs(H.value(x, ps[a + 1]) - H.value(x, p)) / (ps[a + 1] - p));
                const double dx = 1e-3;
                lipx = std::max(lipx, std::abs(H.value(x + dx, p) - H.value(x, p)) / dx / (1.0 + std::abs(p)));
            }
        rep.C_H = growth;
        rep.L_H = H.lipschitz_p();
        rep.checks.push_back({"H1", growth <= H.growth() * (1.0 + 1e-12) + 1e-14, fmt("C_H", growth)});
        rep.checks.push_back({"H2", lipp <= H.lipschitz_p() * (1.0 + 1e-12) + 1e-14, fmt("L_H", lipp)});
        rep.checks.push_back({"H3", std::isfinite(lipx), fmt("x-Lipschitz", lipx)});
    }
    {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (double x : xs)
            for (double p : ps) {
                if (std::abs(p) > rep.K_probe) continue;
                const double c = H.dpp(x, p);
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
        rep.alpha_K = lo;
        rep.C_K = hi;
        rep.checks.push_back({"H4", lo > 0.0 && std::isfinite(hi), fmt("alpha_K", lo) + " " + fmt("C_K", hi)});
    }
    {
        // Derivative consistency with central differences.
        double worst = 0.0;
        const double e = 1e-5;
        for (double x : xs)
            for (double p : ps) {
                if (std::abs(p) > 10.0) continue;
                const double fd1 = (H.value(x, p + e) - H.value(x, p - e)) / (2.0 * e);
                const double fd2 = (H.dp(x, p + e) - H.dp(x, p - e)) / (2.0 * e);
                worst = std::max(worst, std::abs(fd1 - H.dp(x, p)) / std::max(1.0, std::abs(H.dp(x, p))));
                worst = std::max(worst, std::abs(fd2 - H.dpp(x, p)) / std::max(1.0, std::abs(H.dpp(x, p))));
            }
        rep.checks.push_back({"H5", worst <= 1e-6, fmt("derivative mismatch", worst)});
    }

    // Coupling.
    const Coupling& F = inst.coupling;
    {
        std::uniform_real_distribution<double> U(0.0, 1.0);
        auto random_density = [&]() {
            GridFunction m(n);
            for (Eigen::Index i = 0; i < n; ++i) m[i] = U(rng);
            return GridFunction(m / mass(g, m));
        };
        double worst = std::numeric_limits<double>::infinity();
        for (int s = 0; s < 100; ++s) worst = std::min(worst, F.monotonicity_integral(random_density(), random_density()));
        rep.monotonicity_min = worst;
        rep.checks.push_back({"F1", worst >= -1e-12, fmt("min monotonicity integral", worst)});

        // F_i(m) = sum_j (C_ij / h) (h m_j): test functions of the d0 dual.
        const Eigen::MatrixXd kern = F.matrix() / h;
        double sup = 0.0;
        double lip_m = 0.0;
        double lip_x = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            sup = std::max(sup, kern.row(i).cwiseAbs().maxCoeff());
            for (Eigen::Index j = 0; j + 1 < n; ++j) lip_m = std::max(lip_m, std::abs(kern(i, j + 1) - kern(i, j)) / h);
        }
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            const double rowdiff = (kern.row(i + 1) - kern.row(i)).cwiseAbs().maxCoeff() / h;
            const double anchor = std::abs(F.anchor()[i + 1] - F.anchor()[i]) / h;
            lip_x = std::max(lip_x, rowdiff + anchor);
        }
        rep.C_F = sup + F.anchor().cwiseAbs().maxCoeff() + std::max({sup, lip_m, lip_x});
        rep.checks.push_back({"F2", std::isfinite(rep.C_F), fmt("C_F", rep.C_F)});

        // Zero-average perturbations normalized in TV_k.
        std::normal_distribution<double> N01(0.0, 1.0);
        double c_osc = 0.0;
        double c_grad = 0.0;
        for (int s = 0; s < 200; ++s) {
            GridFunction mu(n);
            for (Eigen::Index i = 0; i < n; ++i) mu[i] = N01(rng);
            if (s % 2 == 1) {
                // Localized dipoles probe the weight.
                mu.setZero();
                std::uniform_int_distribution<Eigen::Index> node(1, n - 2);
                const Eigen::Index a = node(rng);
                mu[a] = 1.0;
                mu[a + 1] = -1.0;
            }
            mu.array() -= mu.mean();
            const double tv = tv_k(g, mu, inst.k);
            if (tv == 0.0) continue;
            mu /= tv;
            const GridFunction dF = F.matrix() * mu;
            c_osc = std::max(c_osc, osc_k(g, dF, inst.k));
            c_grad = std::max(c_grad, grad_linf_k(g, dF, inst.k));
        }
        rep.F3_oscillation = c_osc;
        rep.F3_gradient = c_grad;
        rep.checks.push_back({"F3", std::isfinite(c_osc + c_grad),
                              fmt("oscillation addend", c_osc) + " " + fmt("gradient addend", c_grad)});
    }

    rep.moment_k_m0 = moment(g, inst.m0, inst.k);
    rep.checks.push_back({"m0", inst.m0.minCoeff() >= 0.0 && std::abs(mass(g, inst.m0) - 1.0) <= 1e-12 &&
                                    inst.k < inst.kernel.sigma,
                          fmt("mass", mass(g, inst.m0)) + " " + fmt("moment_k", rep.moment_k_m0)});

    const double gamma = std::min(1.2, 0.5 * (1.0 + inst.kernel.sigma));
    rep.certificate = lyapunov_certificate(*inst.levy, b, gamma, H.lipschitz_p());
    rep.checks.push_back({"lyapunov", rep.certificate.valid && rep.certificate.margin >= 0.0,
                          fmt("omega0", rep.certificate.omega0) + " " + fmt("K", rep.certificate.K)});
    return rep;
}

}  // namespace fmfg
