/**
 * @file app.hpp
 * @brief Experiment orchestration behind the levelflow CLI: pipeline runs,
 *        deterministic output trees, the manifest and the pinned examples.
 */
#pragma once

#include "levelflow/config.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace levelflow {

inline constexpr const char* kToolVersion = "1.0.0";

enum class Command { Run, Solve, Compare, Fattening, Asymptotics };
const char* to_string(Command c);

struct CompareRow {
    double t = 0.0;
    double gap = 0.0;        // max distance of the FD value to [uE, uD] in the window, band excluded
    double gapAll = 0.0;     // same without the band exclusion
    std::size_t cells = 0;   // compared cells
};

struct PipelineResult {
    ExperimentConfig cfg;
    Command command = Command::Run;
    ScalarField u0;
    DensityField density;
    VelocitySpec vel;
    std::vector<double> levels;       // requested levels (before hBar is merged)
    double levelSpacing = 0.0;
    std::vector<double> snapshotTimes;
    ThresholdResult threshold;
    VelocityAudit audit;
    std::optional<RepresentationResult> rep;
    std::optional<FdRunResult> fd;
    std::vector<CompareRow> compare;
    std::optional<FatteningReport> fattening;
    std::optional<CriticalClassification> critical;
    std::optional<AsymptoticsReport> asymptotics;
    std::optional<RegInitialResult> regInitial;
};

/// Runs the stages the command needs. Errors propagate as levelflow::Error.
PipelineResult run_pipeline(const ExperimentConfig& cfg, Command command);

/// Manifest: config echo, tool version, every tolerance and convention, and
/// the selection/repair diagnostics of the run.
nlohmann::ordered_json manifest(const PipelineResult& r);

/// Writes the full output tree into dir (created if needed). Byte-identical
/// for identical configs, independent of the thread count.
void write_outputs(const PipelineResult& r, const std::string& dir);

/// key=value verdict lines.
std::string verdict_block(const PipelineResult& r);

// ---------------------------------------------------------------------------
// Pinned examples
// ---------------------------------------------------------------------------

struct Check {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ExampleReport {
    std::string name;
    std::vector<Check> checks;
    std::optional<PipelineResult> result; // absent for kruskal
    bool pass() const;
};

std::vector<std::string> example_names();
/// Pinned JSON configuration of an example (also shipped under configs/).
std::string example_config_text(const std::string& name);
ExampleReport run_example(const std::string& name);
std::string format_checks(const ExampleReport& rep);

/// Band of the 1D example where u equals 1 at time t, as closed intervals.
std::vector<std::array<double, 2>> paper1d_band(double t);

} // namespace levelflow
