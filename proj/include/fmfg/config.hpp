#pragma once

#include "fmfg/mfg.hpp"
#include "fmfg/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fmfg {

/// Parse or validation error anchored at a line of the config file (line 0: no line).
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& source, int line, const std::string& message);
    int line() const { return line_; }

private:
    int line_;
};

enum class Mode { mfg, ergodic, turnpike, fp_decay, hjb_lipschitz, duhamel, fp_forced };

std::string to_string(Mode mode);

struct DensitySpec {
    enum class Kind { gaussian, uniform, point };
    Kind kind = Kind::gaussian;
    double center = 2.0;
    double std = 0.5;
    Eigen::Index node = 0;

    GridFunction sample(const Grid& grid) const;
    std::string canonical() const;
};

struct TerminalSpec {
    enum class Kind { zero, tanh, lipschitz_table, holder_test };
    Kind kind = Kind::tanh;
    double amplitude = -2.0;
    /// (x, value) knots of a piecewise linear profile, constant outside the knots.
    std::vector<std::pair<double, double>> table;

    GridFunction sample(const Grid& grid) const;
    std::string canonical() const;
};

/// Fully resolved run configuration. Every field has a default; the file overrides them.
///
///   [grid]        x_max, n
///   [kernel]      sigma, density_scale (number or "fractional"), tempering, asymmetry, z_cut
///   [drift]       kind (linear | cubic), alpha, offset, wiggle, gain, truncation
///   [hamiltonian] kind (kinetic), c_H
///   [coupling]    strength, width, anchor
///   [data]        m0, m1 (gaussian(c, s) | uniform | point(node)),
///                 uT (zero | tanh(a) | holder-test | lipschitz-table(x:v, ...))
///   [time]        T, dt
///   [weights]     k
///   [experiment]  mode, sweep_T, sweep_R, deltas, seed, pairs, tau0, tau1, forcing
///   [fixed_point] theta, max_iters, tol, fictitious_play
///   [output]      directory, formats (csv, json)
struct RunConfig {
    std::string source = "<defaults>";

    double x_max = 10.0;
    Eigen::Index n = 401;

    double sigma = 1.5;
    std::optional<double> density_scale;  ///< empty: fractional normalization
    double tempering = 0.0;
    double asymmetry = 0.0;  ///< scales c (1 + a) on z > 0 and c (1 - a) on z < 0
    double z_cut = 40.0;

    enum class DriftKind { linear, cubic };
    DriftKind drift_kind = DriftKind::linear;
    double alpha = 1.0;
    double offset = 0.0;
    double wiggle = 0.0;
    double gain = 0.0;
    double truncation = std::numeric_limits<double>::infinity();

    double c_H = 1.0;

    double coupling_strength = 4.0;
    double coupling_width = 1.0;
    double anchor = 0.5;

    DensitySpec m0{};
    DensitySpec m1{DensitySpec::Kind::gaussian, -1.0, 0.5, 0};
    TerminalSpec uT{};

    double T = 10.0;
    double dt = 0.01;
    double k = 1.0;

    Mode mode = Mode::turnpike;
    std::vector<double> sweep_T;
    std::vector<double> sweep_R;
    std::vector<double> deltas{0.25, 0.5, 1.0};
    std::uint64_t seed = 1;
    int pairs = 10;
    double tau0 = 0.04;
    double tau1 = 0.5;
    double forcing = 0.2;

    FixedPointConfig fixed_point{};

    std::string directory = "runs";
    bool write_csv = true;
    bool write_json = true;

    /// One `section.key = value` line per field in a fixed order, without the output
    /// section. Two configs describe the same computation iff their canonical forms agree.
    std::string canonical() const;
    /// 16 hex digits of the FNV-1a hash of `canonical()`.
    std::string hash() const;
};

/// Parses the sectioned key-value format. Comments start with '#' or ';'.
/// Unknown sections or keys, duplicates and malformed values raise ConfigError.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Builds the problem instance described by the config (horizon `T`).
ProblemInstance build_instance(const RunConfig& config);

}  // namespace fmfg
