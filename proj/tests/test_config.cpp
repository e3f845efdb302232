#include "doctest.h"

#include "fmfg/config.hpp"

#include <sstream>

using namespace fmfg;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "cfg");
}

int error_line(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

std::string error_text(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("empty file gives the defaults") {
    const RunConfig c = parse("");
    CHECK(c.n == 401);
    CHECK(c.sigma == 1.5);
    CHECK(c.mode == Mode::turnpike);
    CHECK_FALSE(c.density_scale.has_value());
    CHECK(c.hash().size() == 16);
    CHECK(c.hash() == RunConfig{}.hash());
}

TEST_CASE("hash ignores layout, comments, explicit defaults and the output section") {
    const RunConfig a = parse("[grid]\nn = 401\n");
    const RunConfig b = parse("# comment\n\n[ grid ]\n  n=401   ; trailing\n[output]\ndirectory = elsewhere\n");
    CHECK(a.hash() == RunConfig{}.hash());
    CHECK(a.hash() == b.hash());
    CHECK(b.directory == "elsewhere");
    CHECK(parse("[grid]\nn = 403\n").hash() != a.hash());
    CHECK(parse("[kernel]\ndensity_scale = fractional\n").hash() == a.hash());
}

TEST_CASE("typed values") {
    const RunConfig c = parse(
        "[kernel]\nsigma = 1.8\ndensity_scale = 0.7\nasymmetry = 0.25\n"
        "[drift]\nkind = cubic\ngain = 0.5\ntruncation = 4\n"
        "[data]\nm0 = point(200)\nm1 = uniform\nuT = lipschitz-table(-1:0, 0:1, 1:0)\n"
        "[experiment]\nmode = fp-decay\nsweep_R = [2, 4, 8]\ndeltas = 0.5, 1\nseed = 7\n"
        "[fixed_point]\ntheta = 0.3\nfictitious_play = yes\n"
        "[output]\nformats = csv\n");
    CHECK(c.sigma == 1.8);
    CHECK(*c.density_scale == 0.7);
    CHECK(c.drift_kind == RunConfig::DriftKind::cubic);
    CHECK(c.truncation == 4.0);
    CHECK(c.m0.kind == DensitySpec::Kind::point);
    CHECK(c.m0.node == 200);
    CHECK(c.m1.kind == DensitySpec::Kind::uniform);
    CHECK(c.mode == Mode::fp_decay);
    CHECK(c.sweep_R == std::vector<double>{2.0, 4.0, 8.0});
    CHECK(c.deltas == std::vector<double>{0.5, 1.0});
    CHECK(c.seed == 7);
    CHECK(c.fixed_point.theta == 0.3);
    CHECK(c.fixed_point.fictitious_play);
    CHECK(c.write_csv);
    CHECK_FALSE(c.write_json);

    const Grid g = make_grid(2.0, 9);
    const GridFunction u = c.uT.sample(g);
    CHECK(u[0] == 0.0);
    CHECK(u[3] == doctest::Approx(0.5));
    CHECK(u[4] == doctest::Approx(1.0));
    CHECK(u[8] == 0.0);
}

TEST_CASE("errors are anchored at the offending line") {
    CHECK(error_line("[grid]\nn = 401\n[kernel]\nsigmaa = 1.6\n") == 4);
    CHECK(error_text("[grid]\nn = 401\n[kernel]\nsigmaa = 1.6\n").find("cfg:4:") == 0);
    CHECK(error_line("[grids]\nn = 401\n") == 1);
    CHECK(error_line("[grid]\nn = 401\nn = 403\n") == 3);
    CHECK(error_line("n = 401\n") == 1);
    CHECK(error_line("[grid]\nn = many\n") == 2);
    CHECK(error_line("[grid]\nn = 400\n") == 2);
    CHECK(error_line("[grid]\nx_max\n") == 2);
    CHECK(error_line("[time]\nT = 0.015\n") == 0);  // the default dt does not divide T
    CHECK(error_line("[time]\nT = 1\n\ndt = 0.3\n") == 4);
    CHECK(error_line("[time]\ndt = 0.05\n") == 2);  // above the CFL limit at n = 401
    CHECK(error_line("[kernel]\nsigma = 2.5\n") == 2);
    CHECK(error_line("[weights]\nk = 1.5\n") == 2);
    CHECK(error_line("[experiment]\nmode = dance\n") == 2);
    CHECK(error_line("[data]\nm0 = gaussian(1)\n") == 2);
    CHECK(error_line("[data]\nm0 = point(401)\n") == 2);
    CHECK(error_line("[data]\nuT = lipschitz-table(1:0, 0:1)\n") == 2);
    CHECK(error_line("[hamiltonian]\nkind = quartic\n") == 2);
    CHECK(error_line("[output]\nformats = csv, xml\n") == 2);
    CHECK(error_line("[grid]\n[grid]\n") == 2);
}

TEST_CASE("instance built from the default config is the default instance") {
    RunConfig c;
    c.n = 161;
    c.T = 2.0;
    const ProblemInstance a = build_instance(c);
    InstanceParams p;
    p.n = 161;
    p.T = 2.0;
    const ProblemInstance b = default_instance(p);
    CHECK((a.levy->matrix() - b.levy->matrix()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.m0 - b.m0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.uT - b.uT).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.coupling.matrix() - b.coupling.matrix()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.coupling.anchor() - b.coupling.anchor()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.steps() == b.steps());
}

TEST_CASE("kernel options reach the operator") {
    RunConfig c;
    c.n = 81;
    c.density_scale = 2.0;
    c.asymmetry = 0.5;
    c.tempering = 0.3;
    const ProblemInstance inst = build_instance(c);
    CHECK(inst.kernel.scale_right == 3.0);
    CHECK(inst.kernel.scale_left == 1.0);
    CHECK(inst.kernel.tempering == 0.3);
    CHECK(inst.levy->matrix().rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
}
