#include "doctest.h"

#include "fmfg/grid.hpp"

#include <cmath>
#include <numbers>

using namespace fmfg;

TEST_CASE("make_grid builds symmetric nodes") {
    const Grid g = make_grid(10.0, 401);
    CHECK(g.h() == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(g[200] == 0.0);
    CHECK(g[0] == -10.0);
    CHECK(g[400] == 10.0);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        CHECK(g[i] == -g[g.size() - 1 - i]);
        if (i > 0) CHECK(g[i] - g[i - 1] == doctest::Approx(g.h()).epsilon(1e-12));
    }
}

TEST_CASE("make_grid rejects bad input") {
    CHECK_THROWS_AS(make_grid(10.0, 400), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(0.0, 401), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(-1.0, 401), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, 7), std::invalid_argument);
}

TEST_CASE("three-node grid") {
    // The class itself accepts the illustrative n = 3 grid; make_grid enforces n >= 9.
    const Grid g(1.0, 3);
    CHECK(g[0] == -1.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 1.0);
    CHECK(g.h() == 1.0);
}

TEST_CASE("weight vector") {
    const Grid g = make_grid(5.0, 101);
    const WeightVector w(g, 1.3);
    CHECK(w.values().minCoeff() == 1.0);
    CHECK(w.values()[g.center()] == 1.0);
    for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(w.values()[i] == w.values()[g.size() - 1 - i]);
}

TEST_CASE("gradient is exact on affine and centered-exact on quadratics") {
    const Grid g = make_grid(10.0, 401);
    const GridFunction c = g.constant(3.5);
    CHECK(gradient(g, c).cwiseAbs().maxCoeff() == 0.0);

    const GridFunction x = g.nodes();
    CHECK((gradient(g, x).array() - 1.0).abs().maxCoeff() < 1e-12);

    const GridFunction q = g.nodes().array().square();
    const GridFunction dq = gradient(g, q);
    for (Eigen::Index i = 1; i + 1 < g.size(); ++i) CHECK(dq[i] == doctest::Approx(2.0 * g[i]).epsilon(1e-12));
    // Second-order one-sided stencils are exact on quadratics too.
    CHECK(dq[0] == doctest::Approx(-20.0).epsilon(1e-12));
}

TEST_CASE("gradient works for other scalar types") {
    Eigen::VectorXf f(5);
    f << 0.f, 1.f, 2.f, 3.f, 4.f;
    const Eigen::VectorXf d = gradient(f, 1.0);
    CHECK((d.array() - 1.f).abs().maxCoeff() < 1e-6f);
}

namespace {

double gauss(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Composite Simpson on [-a, a], independent of the grid code.
template <typename F>
double simpson(F f, double a, int panels) {
    const double h = 2.0 * a / panels;
    double s = f(-a) + f(a);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(-a + i * h);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("weighted quadrature against reference integrals") {
    const Grid g = make_grid(10.0, 801);
    const GridFunction f = g.sample(gauss);
    CHECK(weighted_quadrature(g, g.zeros(), WeightVector(g, 0.0)) == 0.0);
    CHECK(std::abs(weighted_quadrature(g, f, WeightVector(g, 0.0)) - 1.0) <= 1e-8);

    const double ref = simpson([](double x) { return std::sqrt(1.0 + x * x) * gauss(x); }, 10.0, 8000);
    CHECK(std::abs(weighted_quadrature(g, f, WeightVector(g, 1.0)) - ref) <= 1e-6);
}

TEST_CASE("weighted quadrature is linear, monotone and second-order") {
    const Grid g = make_grid(6.0, 121);
    const WeightVector w(g, 1.0);
    const GridFunction a = g.sample([](double x) { return std::cos(x) + 2.0; });
    const GridFunction b = g.sample([](double x) { return std::exp(-x * x); });
    CHECK(weighted_quadrature(g, 2.0 * a - 3.0 * b, w) ==
          doctest::Approx(2.0 * weighted_quadrature(g, a, w) - 3.0 * weighted_quadrature(g, b, w)).epsilon(1e-13));
    CHECK(weighted_quadrature(g, a, w) > 0.0);

    auto f = [](double x) { return 1.0 / (1.0 + x * x); };
    const Grid g1 = make_grid(6.0, 61);
    const Grid g2 = make_grid(6.0, 121);
    const Grid g3 = make_grid(6.0, 241);
    const double q1 = weighted_quadrature(g1, g1.sample(f), WeightVector(g1, 1.0));
    const double q2 = weighted_quadrature(g2, g2.sample(f), WeightVector(g2, 1.0));
    const double q3 = weighted_quadrature(g3, g3.sample(f), WeightVector(g3, 1.0));
    const double ratio = (q1 - q2) / (q2 - q3);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("mass and moments") {
    const Grid g = make_grid(10.0, 401);
    const GridFunction m = g.constant(1.0 / (g.h() * g.size()));
    CHECK(mass(g, m) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(moment(g, m, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(moment(g, m, 1.0) > 1.0);
}
