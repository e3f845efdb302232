#include "fmfg/norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fmfg {

namespace {

void check_size(const Grid& grid, const GridFunction& v, const char* what) {
    if (v.size() != grid.size()) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

}  // namespace

double tv_k(const Grid& grid, const GridFunction& mu, double k) {
    check_size(grid, mu, "tv_k");
    const WeightVector w(grid, k);
    return grid.h() * mu.cwiseAbs().dot(w.values());
}

double osc_k(const Grid& grid, const GridFunction& v, double k) {
    check_size(grid, v, "osc_k");
    const Eigen::ArrayXd w = WeightVector(grid, k).values().array();
    const Eigen::ArrayXd a = v.array();
    double best = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        best = std::max(best, ((a - a[i]).abs() / (w + w[i])).maxCoeff());
    return best;
}

double shifted_sup_k(const Grid& grid, const GridFunction& v, double k) {
    check_size(grid, v, "shifted_sup_k");
    const Eigen::ArrayXd winv = WeightVector(grid, k).inverse().array();
    const Eigen::ArrayXd a = v.array();
    auto cost = [&](double c) { return ((a + c).abs() * winv).maxCoeff(); };
    // Convex in c: golden-section search on the range of -v.
    double lo = -a.maxCoeff();
    double hi = -a.minCoeff();
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = cost(x1);
    double f2 = cost(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = cost(x2);
        }
    }
    return std::min({cost(lo), cost(hi), f1, f2});
}

double grad_linf_k(const Grid& grid, const GridFunction& v, double k) {
    check_size(grid, v, "grad_linf_k");
    const GridFunction dv = gradient(grid, v);
    return (dv.cwiseAbs().cwiseProduct(WeightVector(grid, k).inverse())).maxCoeff();
}

double d0(const Grid& grid, const GridFunction& mu, const GridFunction& nu) {
    check_size(grid, mu, "d0");
    check_size(grid, nu, "d0");
    const double h = grid.h();
    const Eigen::VectorXd delta = h * (mu - nu);

    // Vertices of the feasible set have every f_i on one of the two lattices
    // {-1 + jh} and {1 - jh}; their union is exact for the optimum.
    std::vector<double> levels;
    for (double f = -1.0; f <= 1.0 + 1e-12; f += h) levels.push_back(std::min(f, 1.0));
    for (double f = 1.0; f >= -1.0 - 1e-12; f -= h) levels.push_back(std::max(f, -1.0));
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 levels.end());
    const auto M = levels.size();

    // Window [lo, hi] of levels within distance h of each level.
    std::vector<std::size_t> lo(M), hi(M);
    for (std::size_t a = 0, l = 0, r = 0; a < M; ++a) {
        while (levels[l] < levels[a] - h - 1e-12) ++l;
        while (r + 1 < M && levels[r + 1] <= levels[a] + h + 1e-12) ++r;
        lo[a] = l;
        hi[a] = r;
    }

    std::vector<double> value(M), next(M);
    for (std::size_t a = 0; a < M; ++a) value[a] = levels[a] * delta[0];
    for (Eigen::Index i = 1; i < delta.size(); ++i) {
        for (std::size_t a = 0; a < M; ++a) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t b = lo[a]; b <= hi[a]; ++b) best = std::max(best, value[b]);
            next[a] = best + levels[a] * delta[i];
        }
        value.swap(next);
    }
    return std::max(0.0, *std::max_element(value.begin(), value.end()));
}

double sup_d0(const Grid& grid, const TimeField& a, const TimeField& b) {
    if (a.rows() != grid.size() || b.rows() != grid.size() || a.cols() != b.cols())
        throw std::invalid_argument("sup_d0: shape mismatch");
    const double h = grid.h();
    std::vector<std::pair<double, Eigen::Index>> order;
    order.reserve(static_cast<std::size_t>(a.cols()));
    for (Eigen::Index t = 0; t < a.cols(); ++t) {
        const GridFunction d = a.col(t) - b.col(t);
        double ub = std::min(2.0, h * d.cwiseAbs().sum());
        if (std::abs(h * d.sum()) < 1e-12) ub = std::min(ub, w1(grid, a.col(t), b.col(t)));
        order.emplace_back(ub, t);
    }
    std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    double best = 0.0;
    for (const auto& [ub, t] : order) {
        if (ub <= best) break;
        best = std::max(best, d0(grid, a.col(t), b.col(t)));
    }
    return best;
}

double w1(const Grid& grid, const GridFunction& mu, const GridFunction& nu) {
    check_size(grid, mu, "w1");
    check_size(grid, nu, "w1");
    const double h = grid.h();
    double cdf = 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i + 1 < mu.size(); ++i) {
        cdf += h * (mu[i] - nu[i]);
        total += std::abs(cdf) * h;
    }
    return total;
}

}  // namespace fmfg
