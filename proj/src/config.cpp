#include "fmfg/config.hpp"

#include "fmfg/diagnostics.hpp"
#include "fmfg/hjb.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace fmfg {

namespace {

std::string anchor_message(const std::string& source, int line, const std::string& message) {
    std::ostringstream os;
    os << source << ':';
    if (line > 0) os << line << ':';
    os << ' ' << message;
    return os.str();
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"grid", {"x_max", "n"}},
        {"kernel", {"sigma", "density_scale", "tempering", "asymmetry", "z_cut"}},
        {"drift", {"kind", "alpha", "offset", "wiggle", "gain", "truncation"}},
        {"hamiltonian", {"kind", "c_H"}},
        {"coupling", {"strength", "width", "anchor"}},
        {"data", {"m0", "m1", "uT"}},
        {"time", {"T", "dt"}},
        {"weights", {"k"}},
        {"experiment", {"mode", "sweep_T", "sweep_R", "deltas", "seed", "pairs", "tau0", "tau1", "forcing"}},
        {"fixed_point", {"theta", "max_iters", "tol", "fictitious_play"}},
        {"output", {"directory", "formats"}},
    };
    return s;
}

struct Entry {
    std::string value;
    int line = 0;
};

/// Typed access to the parsed entries; every error names the line of the offending key.
class Reader {
public:
    Reader(std::string source, std::map<std::string, Entry> entries)
        : source_(std::move(source)), entries_(std::move(entries)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        throw ConfigError(source_, line(key), key + ": " + message);
    }

    int line(const std::string& key) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.line;
    }

    const std::string* raw(const std::string& key) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second.value;
    }

    double to_number(const std::string& key, const std::string& text) const {
        const std::string t = trim(text);
        if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(t.c_str(), &end);
        if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || std::isnan(v))
            fail(key, "expected a number, got '" + t + "'");
        return v;
    }

    void number(const std::string& key, double& out) const {
        if (const auto* v = raw(key)) out = to_number(key, *v);
    }

    template <typename Int>
    void integer(const std::string& key, Int& out) const {
        const auto* v = raw(key);
        if (!v) return;
        const std::string t = trim(*v);
        char* end = nullptr;
        errno = 0;
        const long long x = std::strtoll(t.c_str(), &end, 10);
        if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
            fail(key, "expected an integer, got '" + t + "'");
        if constexpr (std::is_unsigned_v<Int>) {
            if (x < 0) fail(key, "expected a nonnegative integer");
        }
        out = static_cast<Int>(x);
    }

    void boolean(const std::string& key, bool& out) const {
        const auto* v = raw(key);
        if (!v) return;
        const std::string t = trim(*v);
        if (t == "true" || t == "yes" || t == "1") out = true;
        else if (t == "false" || t == "no" || t == "0") out = false;
        else fail(key, "expected true or false, got '" + t + "'");
    }

    void list(const std::string& key, std::vector<double>& out) const {
        const auto* v = raw(key);
        if (!v) return;
        std::string t = trim(*v);
        if (!t.empty() && t.front() == '[') {
            if (t.back() != ']') fail(key, "unterminated list");
            t = trim(t.substr(1, t.size() - 2));
        }
        out.clear();
        if (t.empty()) return;
        for (const auto& item : split(t, ',')) out.push_back(to_number(key, item));
    }

    /// Splits `name(arg, arg)` into the name and its arguments.
    std::pair<std::string, std::vector<std::string>> call(const std::string& key) const {
        const std::string t = trim(*raw(key));
        const auto open = t.find('(');
        if (open == std::string::npos) return {t, {}};
        if (t.back() != ')') fail(key, "expected ')' at the end of '" + t + "'");
        const std::string inner = trim(t.substr(open + 1, t.size() - open - 2));
        std::vector<std::string> args;
        if (!inner.empty()) args = split(inner, ',');
        return {trim(t.substr(0, open)), args};
    }

    const std::string& source() const { return source_; }

private:
    std::string source_;
    std::map<std::string, Entry> entries_;
};

void read_density(const Reader& r, const std::string& key, DensitySpec& d) {
    if (!r.raw(key)) return;
    const auto [name, args] = r.call(key);
    if (name == "gaussian") {
        if (args.size() != 2) r.fail(key, "gaussian takes (center, std)");
        d.kind = DensitySpec::Kind::gaussian;
        d.center = r.to_number(key, args[0]);
        d.std = r.to_number(key, args[1]);
        if (!(d.std > 0.0)) r.fail(key, "gaussian std must be positive");
    } else if (name == "uniform") {
        if (!args.empty()) r.fail(key, "uniform takes no arguments");
        d.kind = DensitySpec::Kind::uniform;
    } else if (name == "point") {
        if (args.size() != 1) r.fail(key, "point takes (node)");
        const double node = r.to_number(key, args[0]);
        if (node != std::floor(node) || node < 0.0) r.fail(key, "point node must be a nonnegative integer");
        d.kind = DensitySpec::Kind::point;
        d.node = static_cast<Eigen::Index>(node);
    } else {
        r.fail(key, "unknown density '" + name + "' (gaussian, uniform, point)");
    }
}

void read_terminal(const Reader& r, const std::string& key, TerminalSpec& u) {
    if (!r.raw(key)) return;
    const auto [name, args] = r.call(key);
    u.table.clear();
    if (name == "zero") {
        u.kind = TerminalSpec::Kind::zero;
    } else if (name == "tanh") {
        if (args.size() != 1) r.fail(key, "tanh takes (amplitude)");
        u.kind = TerminalSpec::Kind::tanh;
        u.amplitude = r.to_number(key, args[0]);
    } else if (name == "holder-test") {
        u.kind = TerminalSpec::Kind::holder_test;
    } else if (name == "lipschitz-table") {
        if (args.size() < 2) r.fail(key, "lipschitz-table needs at least two x:value knots");
        u.kind = TerminalSpec::Kind::lipschitz_table;
        for (const auto& a : args) {
            const auto colon = a.find(':');
            if (colon == std::string::npos) r.fail(key, "knot '" + a + "' is not of the form x:value");
            u.table.emplace_back(r.to_number(key, a.substr(0, colon)), r.to_number(key, a.substr(colon + 1)));
        }
        for (std::size_t i = 1; i < u.table.size(); ++i)
            if (!(u.table[i].first > u.table[i - 1].first)) r.fail(key, "knots must have increasing x");
    } else {
        r.fail(key, "unknown terminal datum '" + name + "' (zero, tanh, holder-test, lipschitz-table)");
    }
    if (name != "tanh" && name != "lipschitz-table" && !args.empty()) r.fail(key, name + " takes no arguments");
}

Mode parse_mode(const Reader& r, const std::string& key) {
    const std::string t = trim(*r.raw(key));
    for (Mode m : {Mode::mfg, Mode::ergodic, Mode::turnpike, Mode::fp_decay, Mode::hjb_lipschitz, Mode::duhamel,
                   Mode::fp_forced})
        if (to_string(m) == t) return m;
    r.fail(key, "unknown mode '" + t + "' (mfg, ergodic, turnpike, fp-decay, hjb-lipschitz, duhamel, fp-forced)");
}

void validate_ranges(const Reader& r, const RunConfig& c) {
    auto require = [&](bool ok, const std::string& key, const std::string& message) {
        if (!ok) r.fail(key, message);
    };
    require(c.x_max > 0.0 && std::isfinite(c.x_max), "grid.x_max", "must be positive");
    require(c.n >= 3 && c.n % 2 == 1, "grid.n", "must be odd and at least 3");
    require(2.0 * c.x_max / static_cast<double>(c.n - 1) < 1.0, "grid.n", "mesh width must be below 1");
    require(c.sigma > 1.0 && c.sigma < 2.0, "kernel.sigma", "must lie in (1,2)");
    require(!c.density_scale || *c.density_scale > 0.0, "kernel.density_scale", "must be positive");
    require(c.tempering >= 0.0, "kernel.tempering", "must be nonnegative");
    require(std::abs(c.asymmetry) < 1.0, "kernel.asymmetry", "must lie in (-1,1)");
    require(c.z_cut >= c.x_max, "kernel.z_cut", "must be at least x_max");
    require(c.alpha > 0.0, "drift.alpha", "must be positive");
    require(c.drift_kind != RunConfig::DriftKind::cubic || c.gain >= 0.0, "drift.gain", "must be nonnegative");
    require(c.truncation > 0.0, "drift.truncation", "must be positive");
    require(c.c_H > 0.0, "hamiltonian.c_H", "must be positive");
    require(c.coupling_strength >= 0.0, "coupling.strength", "must be nonnegative");
    require(c.coupling_width > 0.0, "coupling.width", "must be positive");
    for (const char* key : {"data.m0", "data.m1"}) {
        const DensitySpec& d = std::string(key) == "data.m0" ? c.m0 : c.m1;
        require(d.kind != DensitySpec::Kind::point || d.node < c.n, key, "point node outside the grid");
    }
    require(c.T > 0.0 && std::isfinite(c.T), "time.T", "must be positive");
    require(c.dt > 0.0, "time.dt", "must be positive");
    auto whole_steps = [&](double T) {
        const double N = T / c.dt;
        return std::abs(N - std::round(N)) <= 1e-9 * std::max(1.0, N) && std::round(N) >= 1.0;
    };
    require(whole_steps(c.T), "time.dt", "must divide T");
    const Grid grid = make_grid(c.x_max, c.n);
    const double cfl = cfl_limit(grid, Hamiltonian::kinetic_saturated(c.c_H));
    require(c.dt <= cfl, "time.dt", "exceeds the CFL limit " + num(cfl));
    require(c.k > 0.0 && c.k < c.sigma, "weights.k", "must lie in (0, sigma)");
    for (double T : c.sweep_T) {
        require(T > 0.0 && std::isfinite(T), "experiment.sweep_T", "entries must be positive");
        require(whole_steps(T), "experiment.sweep_T", "entries must be multiples of dt");
    }
    for (std::size_t i = 0; i < c.sweep_R.size(); ++i) {
        require(c.sweep_R[i] > 0.0, "experiment.sweep_R", "entries must be positive");
        require(i == 0 || c.sweep_R[i] > c.sweep_R[i - 1], "experiment.sweep_R", "entries must increase");
    }
    require(!c.deltas.empty(), "experiment.deltas", "must not be empty");
    for (double d : c.deltas) require(d > 0.0, "experiment.deltas", "entries must be positive");
    require(c.pairs >= 0, "experiment.pairs", "must be nonnegative");
    require(c.tau0 > 0.0, "experiment.tau0", "must be positive");
    require(c.tau1 > c.tau0, "experiment.tau1", "must exceed tau0");
    if (c.mode == Mode::hjb_lipschitz && c.uT.kind == TerminalSpec::Kind::holder_test) {
        require(c.tau0 >= c.dt, "experiment.tau0", "must be at least dt");
        require(c.tau1 <= c.T, "experiment.tau1", "must not exceed T");
    }
    require(c.forcing >= 0.0, "experiment.forcing", "must be nonnegative");
    require(c.fixed_point.theta > 0.0 && c.fixed_point.theta <= 1.0, "fixed_point.theta", "must lie in (0,1]");
    require(c.fixed_point.max_iters >= 1, "fixed_point.max_iters", "must be at least 1");
    require(c.fixed_point.tol > 0.0, "fixed_point.tol", "must be positive");
    require(!c.directory.empty(), "output.directory", "must not be empty");
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::invalid_argument(anchor_message(source, line, message)), line_(line) {}

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::mfg: return "mfg";
        case Mode::ergodic: return "ergodic";
        case Mode::turnpike: return "turnpike";
        case Mode::fp_decay: return "fp-decay";
        case Mode::hjb_lipschitz: return "hjb-lipschitz";
        case Mode::duhamel: return "duhamel";
        case Mode::fp_forced: return "fp-forced";
    }
    return "?";
}

GridFunction DensitySpec::sample(const Grid& grid) const {
    switch (kind) {
        case Kind::gaussian: return gaussian_density(grid, center, std);
        case Kind::uniform: return uniform_density(grid);
        case Kind::point: return point_mass(grid, node);
    }
    return grid.zeros();
}

std::string DensitySpec::canonical() const {
    switch (kind) {
        case Kind::gaussian: return "gaussian(" + num(center) + ", " + num(std) + ")";
        case Kind::uniform: return "uniform";
        case Kind::point: return "point(" + std::to_string(node) + ")";
    }
    return "?";
}

GridFunction TerminalSpec::sample(const Grid& grid) const {
    switch (kind) {
        case Kind::zero: return grid.zeros();
        case Kind::tanh: {
            const double a = amplitude;
            return grid.sample([a](double x) { return a * std::tanh(x); });
        }
        case Kind::holder_test: return holder_datum(grid);
        case Kind::lipschitz_table: {
            const auto& t = table;
            return grid.sample([&t](double x) {
                if (x <= t.front().first) return t.front().second;
                if (x >= t.back().first) return t.back().second;
                const auto hi = std::upper_bound(t.begin(), t.end(), x,
                                                 [](double v, const auto& knot) { return v < knot.first; });
                const auto lo = hi - 1;
                const double s = (x - lo->first) / (hi->first - lo->first);
                return (1.0 - s) * lo->second + s * hi->second;
            });
        }
    }
    return grid.zeros();
}

std::string TerminalSpec::canonical() const {
    switch (kind) {
        case Kind::zero: return "zero";
        case Kind::tanh: return "tanh(" + num(amplitude) + ")";
        case Kind::holder_test: return "holder-test";
        case Kind::lipschitz_table: {
            std::string s = "lipschitz-table(";
            for (std::size_t i = 0; i < table.size(); ++i)
                s += (i ? ", " : "") + num(table[i].first) + ":" + num(table[i].second);
            return s + ")";
        }
    }
    return "?";
}

std::string RunConfig::canonical() const {
    auto list = [](const std::vector<double>& v) {
        std::string s = "[";
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
        return s + "]";
    };
    std::ostringstream os;
    os << "grid.x_max = " << num(x_max) << '\n'
       << "grid.n = " << n << '\n'
       << "kernel.sigma = " << num(sigma) << '\n'
       << "kernel.density_scale = " << (density_scale ? num(*density_scale) : "fractional") << '\n'
       << "kernel.tempering = " << num(tempering) << '\n'
       << "kernel.asymmetry = " << num(asymmetry) << '\n'
       << "kernel.z_cut = " << num(z_cut) << '\n'
       << "drift.kind = " << (drift_kind == DriftKind::linear ? "linear" : "cubic") << '\n'
       << "drift.alpha = " << num(alpha) << '\n'
       << "drift.offset = " << num(offset) << '\n'
       << "drift.wiggle = " << num(wiggle) << '\n'
       << "drift.gain = " << num(gain) << '\n'
       << "drift.truncation = " << num(truncation) << '\n'
       << "hamiltonian.kind = kinetic\n"
       << "hamiltonian.c_H = " << num(c_H) << '\n'
       << "coupling.strength = " << num(coupling_strength) << '\n'
       << "coupling.width = " << num(coupling_width) << '\n'
       << "coupling.anchor = " << num(anchor) << '\n'
       << "data.m0 = " << m0.canonical() << '\n'
       << "data.m1 = " << m1.canonical() << '\n'
       << "data.uT = " << uT.canonical() << '\n'
       << "time.T = " << num(T) << '\n'
       << "time.dt = " << num(dt) << '\n'
       << "weights.k = " << num(k) << '\n'
       << "experiment.mode = " << to_string(mode) << '\n'
       << "experiment.sweep_T = " << list(sweep_T) << '\n'
       << "experiment.sweep_R = " << list(sweep_R) << '\n'
       << "experiment.deltas = " << list(deltas) << '\n'
       << "experiment.seed = " << seed << '\n'
       << "experiment.pairs = " << pairs << '\n'
       << "experiment.tau0 = " << num(tau0) << '\n'
       << "experiment.tau1 = " << num(tau1) << '\n'
       << "experiment.forcing = " << num(forcing) << '\n'
       << "fixed_point.theta = " << num(fixed_point.theta) << '\n'
       << "fixed_point.max_iters = " << fixed_point.max_iters << '\n'
       << "fixed_point.tol = " << num(fixed_point.tol) << '\n'
       << "fixed_point.fictitious_play = " << (fixed_point.fictitious_play ? "true" : "false") << '\n';
    return os.str();
}

std::string RunConfig::hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
    std::map<std::string, Entry> entries;
    std::set<std::string> seen_sections;
    std::string section;
    std::string text;
    int line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        std::string line = trim(text);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(source, line_no, "malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (!schema().count(section)) throw ConfigError(source, line_no, "unknown section [" + section + "]");
            if (!seen_sections.insert(section).second)
                throw ConfigError(source, line_no, "section [" + section + "] appears twice");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(source, line_no, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        for (char c : {'#', ';'}) {
            const auto pos = value.find(std::string(" ") + c);
            if (pos != std::string::npos) value = trim(value.substr(0, pos));
        }
        if (section.empty()) throw ConfigError(source, line_no, "key '" + key + "' outside of any section");
        if (key.empty()) throw ConfigError(source, line_no, "empty key");
        if (!schema().at(section).count(key))
            throw ConfigError(source, line_no, "unknown key '" + key + "' in section [" + section + "]");
        if (value.empty()) throw ConfigError(source, line_no, "missing value for '" + key + "'");
        const std::string full = section + "." + key;
        if (entries.count(full))
            throw ConfigError(source, line_no,
                              "duplicate key '" + full + "' (first set on line " +
                                  std::to_string(entries[full].line) + ")");
        entries[full] = Entry{value, line_no};
    }

    const Reader r(source, std::move(entries));
    RunConfig c;
    c.source = source;
    r.number("grid.x_max", c.x_max);
    r.integer("grid.n", c.n);
    r.number("kernel.sigma", c.sigma);
    if (const auto* v = r.raw("kernel.density_scale"))
        c.density_scale = trim(*v) == "fractional" ? std::nullopt
                                                   : std::optional<double>(r.to_number("kernel.density_scale", *v));
    r.number("kernel.tempering", c.tempering);
    r.number("kernel.asymmetry", c.asymmetry);
    r.number("kernel.z_cut", c.z_cut);
    if (const auto* v = r.raw("drift.kind")) {
        const std::string t = trim(*v);
        if (t == "linear") c.drift_kind = RunConfig::DriftKind::linear;
        else if (t == "cubic") c.drift_kind = RunConfig::DriftKind::cubic;
        else r.fail("drift.kind", "unknown drift '" + t + "' (linear, cubic)");
    }
    r.number("drift.alpha", c.alpha);
    r.number("drift.offset", c.offset);
    r.number("drift.wiggle", c.wiggle);
    r.number("drift.gain", c.gain);
    r.number("drift.truncation", c.truncation);
    if (const auto* v = r.raw("hamiltonian.kind"); v && trim(*v) != "kinetic")
        r.fail("hamiltonian.kind", "unknown Hamiltonian '" + trim(*v) + "' (kinetic)");
    r.number("hamiltonian.c_H", c.c_H);
    r.number("coupling.strength", c.coupling_strength);
    r.number("coupling.width", c.coupling_width);
    r.number("coupling.anchor", c.anchor);
    read_density(r, "data.m0", c.m0);
    read_density(r, "data.m1", c.m1);
    read_terminal(r, "data.uT", c.uT);
    r.number("time.T", c.T);
    r.number("time.dt", c.dt);
    r.number("weights.k", c.k);
    if (r.raw("experiment.mode")) c.mode = parse_mode(r, "experiment.mode");
    r.list("experiment.sweep_T", c.sweep_T);
    r.list("experiment.sweep_R", c.sweep_R);
    r.list("experiment.deltas", c.deltas);
    r.integer("experiment.seed", c.seed);
    r.integer("experiment.pairs", c.pairs);
    r.number("experiment.tau0", c.tau0);
    r.number("experiment.tau1", c.tau1);
    r.number("experiment.forcing", c.forcing);
    r.number("fixed_point.theta", c.fixed_point.theta);
    r.integer("fixed_point.max_iters", c.fixed_point.max_iters);
    r.number("fixed_point.tol", c.fixed_point.tol);
    r.boolean("fixed_point.fictitious_play", c.fixed_point.fictitious_play);
    if (const auto* v = r.raw("output.directory")) c.directory = trim(*v);
    if (r.raw("output.formats")) {
        c.write_csv = c.write_json = false;
        for (const auto& f : split(trim(*r.raw("output.formats")), ',')) {
            if (f == "csv") c.write_csv = true;
            else if (f == "json") c.write_json = true;
            else r.fail("output.formats", "unknown format '" + f + "' (csv, json)");
        }
    }
    validate_ranges(r, c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
    return parse_config(in, path.string());
}

ProblemInstance build_instance(const RunConfig& c) {
    const Grid grid = make_grid(c.x_max, c.n);
    LevyKernel kernel = LevyKernel::fractional(c.sigma);
    const double scale = c.density_scale ? *c.density_scale : kernel.scale_right;
    kernel.scale_right = scale * (1.0 + c.asymmetry);
    kernel.scale_left = scale * (1.0 - c.asymmetry);
    kernel.tempering = c.tempering;
    kernel.z_cut = c.z_cut;
    auto op = std::make_shared<const LevyOperator>(kernel, grid);
    const DriftField drift = c.drift_kind == RunConfig::DriftKind::linear
                                 ? DriftField::linear(c.alpha, c.offset, c.wiggle)
                                 : DriftField::cubic_saturated(c.alpha, c.gain);
    const double anchor = c.anchor;
    ProblemInstance inst{
        grid,
        kernel,
        op,
        drift,
        Hamiltonian::kinetic_saturated(c.c_H),
        Coupling(grid, c.coupling_strength, c.coupling_width, [anchor](double x) { return anchor * std::tanh(x); }),
        c.m0.sample(grid),
        c.uT.sample(grid),
        c.T,
        c.dt,
        c.k,
    };
    if (std::isfinite(c.truncation)) inst = inst.with_truncation(c.truncation);
    inst.check();
    return inst;
}

}  // namespace fmfg
