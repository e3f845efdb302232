#include "fmfg/runner.hpp"

#include "fmfg/diagnostics.hpp"
#include "fmfg/ergodic.hpp"
#include "fmfg/fokker_planck.hpp"
#include "fmfg/hjb.hpp"
#include "fmfg/mfg.hpp"
#include "fmfg/norms.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#ifndef FMFG_VERSION
#define FMFG_VERSION "0.0.0"
#endif

namespace fmfg {

namespace fs = std::filesystem;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

void dump(const Json& j, std::ostream& os, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(indent * depth), ' ');
    const char* nl = indent > 0 ? "\n" : "";
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                return;
            }
            os << '{' << nl;
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) os << ',' << nl;
                first = false;
                os << pad << Json(it.key()).dump() << (indent > 0 ? ": " : ":");
                dump(it.value(), os, indent, depth + 1);
            }
            os << nl << close << '}';
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                os << "[]";
                return;
            }
            os << '[' << nl;
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) os << ',' << nl;
                os << pad;
                dump(j[i], os, indent, depth + 1);
            }
            os << nl << close << ']';
            return;
        }
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            os << (std::isfinite(v) ? format_double(v) : "null");
            return;
        }
        default: os << j.dump();
    }
}

}  // namespace

std::string dump_json(const Json& value, int indent) {
    std::ostringstream os;
    dump(value, os, indent, 0);
    return os.str();
}

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Columns of a CSV file, written with `format_double`.
struct Table {
    std::vector<std::string> header;
    std::vector<Eigen::VectorXd> columns;
};

/// Result of one experiment member before it is written.
struct Output {
    Json summary;
    std::map<std::string, Table> tables;  ///< file name -> table
};

Json base_summary(Mode mode) {
    Json s;
    s["mode"] = to_string(mode);
    for (const char* key : {"omega_left", "omega_right", "plateau", "M", "lambda", "residual_hjb", "residual_fp",
                            "iterations"})
        s[key] = nullptr;
    return s;
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json fit_json(const ExponentialFit& f) {
    return Json{{"rate", number(f.rate)},
                {"amplitude", number(f.amplitude)},
                {"r_squared", number(f.r_squared)},
                {"window", Json::array({f.window_begin, f.window_end})},
                {"samples", f.samples},
                {"floor", f.floor}};
}

Table series_table(const Eigen::VectorXd& t, const Eigen::VectorXd& tv, const Eigen::VectorXd& osc,
                   const Eigen::VectorXd& grad, const Eigen::VectorXd& mass, const Eigen::VectorXd& moment) {
    return Table{{"t", "tv_k", "osc_k", "grad_linf_k", "mass", "moment_k"}, {t, tv, osc, grad, mass, moment}};
}

Eigen::VectorXd nan_column(Eigen::Index n) { return Eigen::VectorXd::Constant(n, kNaN); }

void write_table(const fs::path& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t c = 0; c < table.header.size(); ++c) out << (c ? "," : "") << table.header[c];
    out << '\n';
    const Eigen::Index rows = table.columns.empty() ? 0 : table.columns.front().size();
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << format_double(table.columns[c][r]);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

/// Runs fn(i) for i < count on up to `threads` workers; the first exception is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::string label(const char* prefix, double v) {
    std::ostringstream os;
    os << prefix << v;
    return os.str();
}

double spread(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo > 0.0 ? *hi / *lo - 1.0 : kNaN;
}

// ---------------------------------------------------------------------------
// Experiment members

Output turnpike_member(const ProblemInstance& inst, const ErgodicSolution& erg, const FixedPointConfig& fp) {
    const MfgSolution evo = solve_mfg(inst, fp);
    const TurnpikeReport rep = turnpike_report(inst, evo, erg);
    Output out;
    Json& s = out.summary = base_summary(Mode::turnpike);
    s["omega_left"] = number(rep.omega_left);
    s["omega_right"] = number(rep.omega_right);
    s["plateau"] = number(rep.plateau);
    s["M"] = number(rep.M);
    s["lambda"] = erg.lambda;
    s["residual_hjb"] = erg.residual_hjb;
    s["residual_fp"] = erg.residual_fp;
    s["iterations"] = evo.iterations;
    s["T"] = inst.T;
    s["omega"] = number(rep.omega);
    s["min_r_squared"] = number(rep.min_r_squared);
    s["floor"] = rep.floor;
    s["picard_residual"] = evo.residual;
    s["converged"] = evo.converged;
    const char* names[3] = {"tv_k", "osc_k", "grad_linf_k"};
    Json fits;
    for (int i = 0; i < 3; ++i) {
        fits[names[i]] = Json{{"left", fit_json(rep.left[i])},
                              {"right", fit_json(rep.right[i])},
                              {"at_0.1T", rep.at(i, 0.1 * inst.T)},
                              {"at_T/2", rep.midpoint[i]},
                              {"at_0.9T", rep.at(i, 0.9 * inst.T)}};
    }
    s["series"] = fits;
    const TurnpikeSeries& z = rep.series;
    out.tables["series.csv"] = series_table(z.t, z.tv, z.osc, z.grad, z.mass, z.moment);
    return out;
}

Output mfg_member(const ProblemInstance& inst, const FixedPointConfig& fp) {
    const MfgSolution evo = solve_mfg(inst, fp);
    const Grid& g = inst.grid;
    const Eigen::Index cols = evo.hjb.u.cols();
    Eigen::VectorXd tv(cols), osc(cols), grad(cols);
    for (Eigen::Index n = 0; n < cols; ++n) {
        tv[n] = tv_k(g, evo.fp.m.col(n), inst.k);
        osc[n] = osc_k(g, evo.hjb.u.col(n), inst.k);
        grad[n] = grad_linf_k(g, evo.hjb.u.col(n), inst.k);
    }
    Output out;
    Json& s = out.summary = base_summary(Mode::mfg);
    s["iterations"] = evo.iterations;
    s["T"] = inst.T;
    s["picard_residual"] = evo.residual;
    s["converged"] = evo.converged;
    s["history"] = evo.history;
    out.tables["series.csv"] = series_table(evo.hjb.times, tv, osc, grad, evo.fp.masses, evo.fp.moments);
    return out;
}

Output ergodic_member(const ProblemInstance& inst, int threads) {
    ErgodicConfig ec;
    ec.threads = threads;
    const ErgodicSolution erg = solve_ergodic_mfg(inst, ec);
    Output out;
    Json& s = out.summary = base_summary(Mode::ergodic);
    s["lambda"] = erg.lambda;
    s["residual_hjb"] = erg.residual_hjb;
    s["residual_fp"] = erg.residual_fp;
    s["iterations"] = erg.iterations;
    s["converged"] = erg.converged;
    s["moment_2k"] = erg.moment_2k;
    s["boundary_mass"] = erg.boundary_mass;
    out.tables["profile.csv"] = Table{{"x", "u_bar", "m_bar"}, {inst.grid.nodes(), erg.u_bar, erg.m_bar}};
    return out;
}

Output fp_decay_member(const ProblemInstance& inst, const GridFunction& m1) {
    const FpSolution a = solve_forward(inst, inst.m0, ControlPath{});
    const FpSolution b = solve_forward(inst, m1, ControlPath{});
    const Grid& g = inst.grid;
    const Eigen::Index cols = a.m.cols();
    Eigen::VectorXd tv(cols);
    for (Eigen::Index n = 0; n < cols; ++n) tv[n] = tv_k(g, a.m.col(n) - b.m.col(n), inst.k);
    const ExponentialFit fit = fit_exponential(a.times, tv, 0.5, inst.T - 0.5);
    Output out;
    Json& s = out.summary = base_summary(Mode::fp_decay);
    s["T"] = inst.T;
    s["omega"] = number(fit.rate);
    s["K"] = number(fit.amplitude);
    s["r_squared"] = number(fit.r_squared);
    s["floor"] = fit.floor;
    s["status"] = fit.floor ? "decayed to floor" : "exponential decay";
    const double mass_error = std::max((a.masses.array() - 1.0).abs().maxCoeff(), (b.masses.array() - 1.0).abs().maxCoeff());
    s["mass_error"] = mass_error;
    s["min_density"] = std::min(a.m.minCoeff(), b.m.minCoeff());
    s["moment_sup"] = a.moments.maxCoeff();
    out.tables["series.csv"] = series_table(a.times, tv, nan_column(cols), nan_column(cols), a.masses, a.moments);
    return out;
}

Output hjb_member(const ProblemInstance& inst) {
    const HjbSolution sol = solve_backward(inst, inst.coupling(inst.m0));
    const Grid& g = inst.grid;
    const Eigen::Index cols = sol.u.cols();
    Eigen::VectorXd osc(cols), grad(cols);
    double lip = 0.0;
    for (Eigen::Index n = 0; n < cols; ++n) {
        osc[n] = osc_k(g, sol.u.col(n), inst.k);
        grad[n] = grad_linf_k(g, sol.u.col(n), inst.k);
        lip = std::max(lip, lipschitz_seminorm(sol, g, sol.times[n]));
    }
    Output out;
    Json& s = out.summary = base_summary(Mode::hjb_lipschitz);
    s["T"] = inst.T;
    s["lipschitz_sup"] = lip;
    out.tables["series.csv"] =
        series_table(sol.times, nan_column(cols), osc, grad, nan_column(cols), nan_column(cols));
    return out;
}

/// Largest positive part of u_1 - u_2 over random ordered data u_1(T) <= u_2(T), f_1 <= f_2.
double comparison_violation(const ProblemInstance& inst, int pairs, std::uint64_t seed) {
    const HjbScheme scheme(inst);
    const Grid& g = inst.grid;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const Eigen::Index cols = inst.steps() + 1;
    double worst = 0.0;
    for (int p = 0; p < pairs; ++p) {
        GridFunction u1(g.size());
        for (Eigen::Index i = 0; i < g.size(); ++i) u1[i] = std::sin(g[i] * (1.0 + N(rng))) + 0.3 * N(rng);
        const GridFunction u2 = u1 + g.sample([&](double) { return U(rng); });
        const TimeField f1 = TimeField::NullaryExpr(g.size(), cols, [&]() { return N(rng); });
        const TimeField f2 = f1 + TimeField::NullaryExpr(g.size(), cols, [&]() { return U(rng); });
        const HjbSolution a = solve_backward(scheme, u1, f1);
        const HjbSolution b = solve_backward(scheme, u2, f2);
        worst = std::max(worst, (a.u - b.u).maxCoeff());
    }
    return worst;
}

Output duhamel_member(const ProblemInstance& inst) {
    const Eigen::Index cols = inst.steps() + 1;
    const TimeField source = inst.coupling(inst.m0).replicate(1, cols);
    const DuhamelReport rep = duhamel_check(inst, inst.effective_drift(), inst.uT, source);
    Output out;
    Json& s = out.summary = base_summary(Mode::duhamel);
    s["T"] = inst.T;
    s["K"] = rep.K;
    s["omega"] = number(rep.omega);
    s["K_grad"] = rep.K_grad;
    s["probes"] = rep.probes;
    s["osc_ratio"] = number(rep.osc_ratio);
    s["grad_ratio"] = number(rep.grad_ratio);
    s["ratio"] = number(rep.ratio);
    s["terminal_exponent"] = number(rep.terminal_exponent);
    s["terminal_layer"] = fit_json(rep.terminal_layer);
    out.tables["series.csv"] = series_table(rep.t, nan_column(cols), rep.osc, rep.grad, nan_column(cols), nan_column(cols));
    out.tables["envelope.csv"] =
        Table{{"t", "osc_k", "osc_bound", "grad_linf_k", "grad_bound"}, {rep.t, rep.osc, rep.osc_bound, rep.grad, rep.grad_bound}};
    return out;
}

Output fp_forced_member(const ProblemInstance& inst, const GridFunction& m1, double forcing,
                        const std::vector<double>& deltas) {
    const Grid& g = inst.grid;
    const GridFunction m_bar = solve_stationary(inst).m;
    const GridFunction shape = g.sample([forcing](double x) { return forcing * std::cos(x); });
    const TimeField Phi = shape.replicate(1, inst.steps());
    const ForcedFpReport rep = nonhomogeneous_fp_check(inst, inst.effective_drift(), inst.m0 - m1, Phi, m_bar, deltas);
    const Eigen::Index cols = rep.t.size();
    Output out;
    Json& s = out.summary = base_summary(Mode::fp_forced);
    s["T"] = inst.T;
    s["omega"] = number(rep.omega);
    s["K_decay"] = rep.K_decay;
    s["deltas"] = rep.deltas;
    s["K_forcing"] = rep.K_forcing;
    s["ratios"] = rep.ratios;
    s["ratio"] = number(rep.ratio);
    s["gamma"] = rep.gamma;
    s["gamma_prime"] = rep.gamma_prime;
    s["integral"] = number(rep.integral);
    s["phi_sup"] = rep.phi_sup;
    s["phi_energy"] = rep.phi_energy;
    s["rhs"] = number(rep.rhs);
    out.tables["series.csv"] =
        series_table(rep.t, rep.tv, nan_column(cols), nan_column(cols), nan_column(cols), nan_column(cols));
    return out;
}

Json validators_json(const ValidationReport& v) {
    Json arr = Json::array();
    for (const auto& c : v.checks) arr.push_back(Json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    return arr;
}

/// Writes one member's files into `dir` and returns their paths relative to `root`.
std::vector<std::string> write_output(const Output& out, const fs::path& root, const fs::path& sub,
                                      const RunConfig& cfg) {
    std::vector<std::string> files;
    const fs::path dir = root / sub;
    fs::create_directories(dir);
    if (cfg.write_json) {
        write_text(dir / "summary.json", dump_json(out.summary) + "\n");
        files.push_back((sub / "summary.json").generic_string());
    }
    if (cfg.write_csv)
        for (const auto& [name, table] : out.tables) {
            write_table(dir / name, table);
            files.push_back((sub / name).generic_string());
        }
    return files;
}

struct Sweep {
    std::vector<std::string> labels;
    std::vector<Output> members;
};

/// Evaluates `make(i)` for every member, in parallel when allowed.
Sweep run_members(const std::vector<std::string>& labels, int threads,
                  const std::function<Output(std::size_t)>& make) {
    Sweep sweep{labels, std::vector<Output>(labels.size())};
    parallel_for(labels.size(), threads, [&](std::size_t i) { sweep.members[i] = make(i); });
    return sweep;
}

Output execute(const RunConfig& cfg, const ProblemInstance& inst, int threads, std::vector<std::pair<std::string, Output>>& subs) {
    const std::vector<double>& Ts = cfg.sweep_T;
    std::vector<std::string> T_labels;
    for (double T : Ts) T_labels.push_back(label("T_", T));
    const GridFunction m1 = cfg.m1.sample(inst.grid);

    switch (cfg.mode) {
        case Mode::mfg: return mfg_member(inst, cfg.fixed_point);
        case Mode::ergodic: return ergodic_member(inst, threads);
        case Mode::turnpike: {
            ErgodicConfig ec;
            ec.threads = Ts.empty() ? threads : 1;
            const ErgodicSolution erg = solve_ergodic_mfg(inst, ec);
            if (Ts.empty()) return turnpike_member(inst, erg, cfg.fixed_point);
            Sweep sw = run_members(T_labels, threads, [&](std::size_t i) {
                return turnpike_member(inst.with_horizon(Ts[i]), erg, cfg.fixed_point);
            });
            Output top;
            top.summary = base_summary(Mode::turnpike);
            top.summary["lambda"] = erg.lambda;
            top.summary["residual_hjb"] = erg.residual_hjb;
            top.summary["residual_fp"] = erg.residual_fp;
            Table table{{"T", "omega_left", "omega_right", "omega", "plateau", "M", "min_r_squared"}, {}};
            table.columns.assign(7, Eigen::VectorXd(Ts.size()));
            std::vector<double> left, right;
            Json rows = Json::array();
            for (std::size_t i = 0; i < Ts.size(); ++i) {
                const Json& m = sw.members[i].summary;
                auto val = [&](const char* key) { return m[key].is_null() ? kNaN : m[key].get<double>(); };
                const double vals[7] = {Ts[i], val("omega_left"), val("omega_right"), val("omega"),
                                        val("plateau"), val("M"), val("min_r_squared")};
                for (int c = 0; c < 7; ++c) table.columns[c][static_cast<Eigen::Index>(i)] = vals[c];
                left.push_back(vals[1]);
                right.push_back(vals[2]);
                rows.push_back(Json{{"T", Ts[i]}, {"omega_left", m["omega_left"]}, {"omega_right", m["omega_right"]},
                                    {"plateau", m["plateau"]}, {"M", m["M"]}, {"iterations", m["iterations"]}});
            }
            top.summary["sweep"] = rows;
            top.summary["rate_spread_left"] = number(spread(left));
            top.summary["rate_spread_right"] = number(spread(right));
            top.tables["sweep.csv"] = table;
            for (std::size_t i = 0; i < Ts.size(); ++i) subs.emplace_back(sw.labels[i], std::move(sw.members[i]));
            return top;
        }
        case Mode::fp_decay: {
            Output top = fp_decay_member(inst, m1);
            if (!cfg.sweep_R.empty()) {
                const auto& Rs = cfg.sweep_R;
                Eigen::VectorXd R(Rs.size()), sup(Rs.size());
                std::vector<double> sups(Rs.size());
                parallel_for(Rs.size(), threads, [&](std::size_t i) {
                    sups[i] = solve_forward(inst.with_truncation(Rs[i]), ControlPath{}).moments.maxCoeff();
                });
                for (std::size_t i = 0; i < Rs.size(); ++i) {
                    R[static_cast<Eigen::Index>(i)] = Rs[i];
                    sup[static_cast<Eigen::Index>(i)] = sups[i];
                }
                top.summary["moment_sup_by_R"] = sups;
                top.summary["moment_spread"] = number(spread(sups));
                top.tables["moments.csv"] = Table{{"R", "moment_sup"}, {R, sup}};
            }
            return top;
        }
        case Mode::hjb_lipschitz: {
            Output top;
            if (Ts.empty()) {
                top = hjb_member(inst);
            } else {
                Sweep sw = run_members(T_labels, threads, [&](std::size_t i) { return hjb_member(inst.with_horizon(Ts[i])); });
                top.summary = base_summary(Mode::hjb_lipschitz);
                std::vector<double> lips;
                Json rows = Json::array();
                for (std::size_t i = 0; i < Ts.size(); ++i) {
                    lips.push_back(sw.members[i].summary["lipschitz_sup"].get<double>());
                    rows.push_back(Json{{"T", Ts[i]}, {"lipschitz_sup", lips.back()}});
                }
                top.summary["sweep"] = rows;
                top.summary["lipschitz_spread"] = number(spread(lips));
                for (std::size_t i = 0; i < Ts.size(); ++i) subs.emplace_back(sw.labels[i], std::move(sw.members[i]));
            }
            if (cfg.pairs > 0) {
                top.summary["comparison_pairs"] = cfg.pairs;
                top.summary["comparison_violation"] = comparison_violation(inst, cfg.pairs, cfg.seed);
            }
            if (cfg.uT.kind == TerminalSpec::Kind::holder_test) {
                const RegularizationReport reg = regularizing_effect(inst, inst.uT, cfg.tau0, cfg.tau1);
                top.summary["regularizing_slope"] = number(reg.slope);
                top.summary["regularizing_target"] = -1.0 / inst.kernel.sigma;
                top.summary["regularizing_r_squared"] = number(reg.fit.r_squared);
                top.tables["regularization.csv"] = Table{{"tau", "grad_linf_k"}, {reg.tau, reg.grad}};
            }
            return top;
        }
        case Mode::duhamel: return duhamel_member(inst);
        case Mode::fp_forced: return fp_forced_member(inst, m1, cfg.forcing, cfg.deltas);
    }
    throw std::logic_error("unhandled mode");
}

Json config_json(const RunConfig& cfg) {
    Json j = Json::object();
    std::istringstream in(cfg.canonical());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

}  // namespace

std::string run_directory_name(const RunConfig& config) { return to_string(config.mode) + "-" + config.hash(); }

RunRecord run(const RunConfig& cfg, const RunOptions& options) {
    const auto start = Clock::now();
    const fs::path root = options.out ? *options.out : fs::path(cfg.directory);
    const std::string name = run_directory_name(cfg);
    const fs::path final_dir = root / name;
    const fs::path staging = root / ("." + name + ".partial");

    RunRecord rec;
    rec.hash = cfg.hash();
    rec.version = FMFG_VERSION;
    rec.mode = cfg.mode;
    rec.directory = final_dir;

    fs::create_directories(root);
    fs::remove_all(staging);
    try {
        const ProblemInstance inst = build_instance(cfg);
        std::vector<std::pair<std::string, Output>> subs;
        Output top = execute(cfg, inst, std::max(1, options.threads), subs);
        if (options.validators) top.summary["validators"] = validators_json(validate(inst));

        fs::create_directories(staging);
        for (const auto& [sub, out] : subs) {
            const auto files = write_output(out, staging, sub, cfg);
            rec.files.insert(rec.files.end(), files.begin(), files.end());
        }
        const auto files = write_output(top, staging, "", cfg);
        rec.files.insert(rec.files.end(), files.begin(), files.end());
        write_text(staging / "config.ini", cfg.canonical());
        rec.files.push_back("config.ini");
        rec.summary = top.summary;
        rec.wall_clock = std::chrono::duration<double>(Clock::now() - start).count();

        Json record{{"config_hash", rec.hash},
                    {"version", rec.version},
                    {"mode", to_string(cfg.mode)},
                    {"source", cfg.source},
                    {"threads", std::max(1, options.threads)},
                    {"wall_clock_seconds", rec.wall_clock},
                    {"files", rec.files},
                    {"config", config_json(cfg)}};
        write_text(staging / "record.json", dump_json(record) + "\n");
        rec.files.push_back("record.json");
        if (options.before_commit) options.before_commit(staging);

        fs::remove_all(final_dir);
        fs::rename(staging, final_dir);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }
    return rec;
}

namespace {

std::string short_double(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

}  // namespace

void print_summary(const RunRecord& rec, std::ostream& os) {
    os << "mode " << to_string(rec.mode) << "  hash " << rec.hash << "  version " << rec.version << '\n';
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.1f", rec.wall_clock);
    os << "output " << rec.directory.string() << "  (" << rec.files.size() << " files, " << wall << " s)\n";
    for (auto it = rec.summary.begin(); it != rec.summary.end(); ++it) {
        const Json& v = it.value();
        if (it.key() == "mode" || it.key() == "status") continue;
        if (v.is_number() || v.is_boolean())
            os << "  " << std::left << std::setw(24) << it.key() << std::right
               << (v.is_number_float() ? short_double(v.get<double>()) : v.dump()) << '\n';
    }
    if (rec.summary.contains("sweep")) {
        os << "  sweep:\n";
        for (const auto& row : rec.summary["sweep"]) os << "    " << row.dump() << '\n';
    }
    if (rec.summary.contains("status")) os << "  " << rec.summary["status"].get<std::string>() << '\n';
    if (rec.summary.contains("validators")) {
        os << "assumption validators:\n";
        for (const auto& c : rec.summary["validators"])
            os << "  " << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << "  "
               << c["detail"].get<std::string>() << '\n';
    }
}

// ---------------------------------------------------------------------------
// compare

namespace {

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("missing record file " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument("malformed " + path.string() + ": " + e.what());
    }
}

bool gated(const std::string& key) {
    static const char* keys[] = {"omega_left", "omega_right", "omega", "plateau", "M", "lambda", "lipschitz_sup"};
    return std::any_of(std::begin(keys), std::end(keys), [&](const char* k) { return key == k; });
}

void diff_scalars(const Json& a, const Json& b, const std::string& prefix, bool refuse, double tol,
                  CompareReport& report) {
    std::vector<std::string> keys;
    for (auto it = a.begin(); it != a.end(); ++it) keys.push_back(it.key());
    for (auto it = b.begin(); it != b.end(); ++it)
        if (!a.contains(it.key())) keys.push_back(it.key());
    for (const auto& key : keys) {
        if (key == "validators" || key == "mode") continue;
        const Json va = a.contains(key) ? a[key] : Json(nullptr);
        const Json vb = b.contains(key) ? b[key] : Json(nullptr);
        const std::string name = prefix + key;
        if (key == "sweep" && va.is_array() && vb.is_array()) {
            if (va.size() != vb.size()) {
                report.diffs.push_back({name, std::to_string(va.size()) + " rows", std::to_string(vb.size()) + " rows",
                                        std::numeric_limits<double>::infinity(), 0.0, false});
                continue;
            }
            for (std::size_t i = 0; i < va.size(); ++i)
                diff_scalars(va[i], vb[i], name + "[" + std::to_string(i) + "].", refuse, tol, report);
            continue;
        }
        if (va.is_object() || vb.is_object() || va.is_array() || vb.is_array()) {
            if (va != vb) report.diffs.push_back({name, "<structured>", "<structured>", kNaN, 0.0, false});
            continue;
        }
        if (refuse && gated(key)) {
            report.incomparable.push_back(name);
            continue;
        }
        if (va == vb) continue;
        MetricDiff d{name, va.dump(), vb.dump(), std::numeric_limits<double>::infinity(), gated(key) ? tol : 0.0, false};
        if (va.is_number() && vb.is_number()) {
            d.a = va.is_number_float() ? format_double(va.get<double>()) : va.dump();
            d.b = vb.is_number_float() ? format_double(vb.get<double>()) : vb.dump();
            const double x = va.get<double>(), y = vb.get<double>();
            const double scale = std::max(std::abs(x), std::abs(y));
            d.relative = scale > 0.0 ? std::abs(x - y) / scale : 0.0;
            if (d.relative == 0.0) continue;
        }
        d.exceeded = d.tolerance > 0.0 && !(d.relative <= d.tolerance);
        report.diffs.push_back(d);
    }
}

}  // namespace

bool CompareReport::ok() const {
    if (!incomparable.empty()) return false;
    return std::none_of(diffs.begin(), diffs.end(), [](const MetricDiff& d) { return d.exceeded; });
}

CompareReport compare(const fs::path& a, const fs::path& b, const CompareOptions& options) {
    const Json rec_a = read_json(a / "record.json");
    const Json rec_b = read_json(b / "record.json");
    const Json sum_a = read_json(a / "summary.json");
    const Json sum_b = read_json(b / "summary.json");
    const std::string mode_a = rec_a.at("mode").get<std::string>();
    const std::string mode_b = rec_b.at("mode").get<std::string>();
    if (mode_a != mode_b)
        throw std::invalid_argument("cannot compare a " + mode_a + " record with a " + mode_b + " record");

    CompareReport report;
    report.mode = mode_a;
    const Json& ca = rec_a.at("config");
    const Json& cb = rec_b.at("config");
    for (const char* key : {"kernel.sigma", "weights.k"}) {
        const Json x = ca.contains(key) ? ca[key] : Json(nullptr);
        const Json y = cb.contains(key) ? cb[key] : Json(nullptr);
        if (x != y) report.reasons.push_back(std::string(key) + " differs: " + x.dump() + " vs " + y.dump());
    }
    diff_scalars(sum_a, sum_b, "", !report.reasons.empty(), options.tolerance, report);
    return report;
}

void print_compare(const CompareReport& report, std::ostream& os) {
    os << "mode " << report.mode << '\n';
    for (const auto& r : report.reasons) os << "refused: " << r << '\n';
    if (!report.incomparable.empty()) {
        os << "incomparable fields:";
        for (const auto& f : report.incomparable) os << ' ' << f;
        os << '\n';
    }
    for (const auto& d : report.diffs) {
        os << (d.exceeded ? "FAIL " : (d.tolerance > 0.0 ? "ok   " : "info ")) << d.name << "  " << d.a << " vs "
           << d.b;
        if (std::isfinite(d.relative)) os << "  rel " << short_double(d.relative);
        if (d.tolerance > 0.0) os << "  tol " << d.tolerance;
        os << '\n';
    }
    os << (report.ok() ? "records agree within tolerance" : "records differ") << '\n';
}

}  // namespace fmfg
