#pragma once

#include <Eigen/Dense>

namespace fmfg {

/// Least-squares fit of log w(t) = log K - omega t on a window.
struct ExponentialFit {
    double amplitude = 0.0;  ///< K
    double rate = 0.0;       ///< omega
    double r_squared = 0.0;
    double window_begin = 0.0;
    double window_end = 0.0;
    Eigen::Index samples = 0;
    /// The series fell below the floor inside the window; `rate` is then a lower bound
    /// computed from the samples above the floor, or 0 if fewer than ten remain.
    bool floor = false;
};

inline constexpr double kSeriesFloor = 1e-13;
inline constexpr Eigen::Index kMinFitSamples = 10;

/// Fits w ~ K e^{-omega t} over t in [t0, t1]. Deterministic ordinary least squares.
ExponentialFit fit_exponential(const Eigen::VectorXd& t, const Eigen::VectorXd& w, double t0, double t1,
                               double floor = kSeriesFloor);

/// Fits w ~ K e^{-omega (T - t)}: growth towards the right end of the window.
ExponentialFit fit_exponential_reversed(const Eigen::VectorXd& t, const Eigen::VectorXd& w, double T, double t0,
                                        double t1, double floor = kSeriesFloor);

}  // namespace fmfg
