#pragma once

#include "fmfg/config.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fmfg {

using Json = nlohmann::ordered_json;

/// Fixed-width rendering used by every output file: 17 significant digits, "nan" and
/// "inf" spelled out.
std::string format_double(double v);
/// JSON with every floating point value written by `format_double`; non-finite values become null.
std::string dump_json(const Json& value, int indent = 2);

struct RunOptions {
    int threads = 1;
    /// Root for the content-addressed run directory; the config's [output] directory otherwise.
    std::optional<std::filesystem::path> out;
    /// Run the assumption validators and add their outcomes to the summary.
    bool validators = true;
    /// Called with the staging directory once every file is written, before it is moved
    /// into place. An exception aborts the run like any solver failure.
    std::function<void(const std::filesystem::path&)> before_commit;
};

struct RunRecord {
    std::string hash;
    std::string version;
    Mode mode = Mode::turnpike;
    double wall_clock = 0.0;  ///< seconds
    std::filesystem::path directory;
    std::vector<std::string> files;  ///< relative to `directory`
    Json summary;
};

/// Executes the configured experiment and writes
///   <root>/<mode>-<hash>/{record.json, config.ini, summary.json, series.csv, ...}.
/// Outputs are staged in a sibling directory and moved into place only after every file
/// has been written; on failure the staging directory is removed and the error rethrown.
RunRecord run(const RunConfig& config, const RunOptions& options = {});

/// Directory name `<mode>-<hash>` of a config.
std::string run_directory_name(const RunConfig& config);

/// One-screen report: scalar metrics, status lines and validator outcomes.
void print_summary(const RunRecord& record, std::ostream& os);

struct MetricDiff {
    std::string name;
    std::string a;
    std::string b;
    double relative = 0.0;  ///< |a - b| / max(|a|, |b|); infinite when only one side is numeric
    double tolerance = 0.0; ///< 0 for informational metrics
    bool exceeded = false;
};

struct CompareReport {
    std::string mode;
    std::vector<MetricDiff> diffs;          ///< only metrics that differ
    std::vector<std::string> incomparable;  ///< gated metrics skipped because the runs differ in sigma or k
    std::vector<std::string> reasons;

    bool ok() const;
};

struct CompareOptions {
    /// Relative tolerance on rates, plateau, envelope constant and ergodic constant.
    double tolerance = 0.10;
};

/// Metric-by-metric comparison of two run directories. Throws std::invalid_argument if
/// either record is missing or the experiment modes differ.
CompareReport compare(const std::filesystem::path& a, const std::filesystem::path& b,
                      const CompareOptions& options = {});

void print_compare(const CompareReport& report, std::ostream& os);

}  // namespace fmfg
