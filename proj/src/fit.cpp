#include "fmfg/fit.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fmfg {

ExponentialFit fit_exponential(const Eigen::VectorXd& t, const Eigen::VectorXd& w, double t0, double t1,
                               double floor) {
    if (t.size() != w.size()) throw std::invalid_argument("fit_exponential: size mismatch");
    ExponentialFit fit;
    fit.window_begin = t0;
    fit.window_end = t1;
    std::vector<double> xs;
    std::vector<double> ys;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (t[i] < t0 - 1e-12 || t[i] > t1 + 1e-12) continue;
        if (!(w[i] > floor)) {
            fit.floor = true;
            continue;
        }
        xs.push_back(t[i]);
        ys.push_back(std::log(w[i]));
    }
    fit.samples = static_cast<Eigen::Index>(xs.size());
    if (fit.samples < kMinFitSamples) {
        fit.floor = true;
        return fit;
    }
    const Eigen::Map<const Eigen::VectorXd> x(xs.data(), fit.samples);
    const Eigen::Map<const Eigen::VectorXd> y(ys.data(), fit.samples);
    const double xm = x.mean();
    const double ym = y.mean();
    const double sxx = (x.array() - xm).square().sum();
    const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
    const double syy = (y.array() - ym).square().sum();
    const double slope = sxy / sxx;
    fit.rate = -slope;
    fit.amplitude = std::exp(ym - slope * xm);
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

ExponentialFit fit_exponential_reversed(const Eigen::VectorXd& t, const Eigen::VectorXd& w, double T, double t0,
                                        double t1, double floor) {
    const Eigen::VectorXd s = (T - t.array()).matrix();
    ExponentialFit fit = fit_exponential(s, w, T - t1, T - t0, floor);
    fit.window_begin = t0;
    fit.window_end = t1;
    return fit;
}

}  // namespace fmfg
