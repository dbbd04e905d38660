/**
 * @file config.hpp
 * @brief Strict JSON experiment configuration ("schema": "levelflow/v1") and
 *        builders for the grid, initial data, density and velocity.
 *
 * Unknown keys are errors at every nesting level. Relative file paths are
 * resolved against the directory of the config file.
 */
#pragma once

#include "levelflow/analysis.hpp"
#include "levelflow/fdsolver.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace levelflow {

inline constexpr const char* kSchema = "levelflow/v1";

struct GridSpec {
    int dim = 2;
    std::array<double, 2> lower{0.0, 0.0};
    std::array<double, 2> upper{1.0, 1.0};
    double dx = 0.0;
};

struct InitialSpec {
    // paper1d | radial | cone | quasiconvex-random | table | kruskal
    std::string type;
    std::array<double, 2> center{0.0, 0.0};
    std::array<double, 2> axes{1.0, 1.0};
    std::uint64_t seed = 0;
    std::string file;
    int depth = 0;
    double level = 0.0;
};

struct DensitySpec {
    std::string type; // lebesgue | cauchy2d | gaussian | table
    double sigma = 1.0;
    std::string file;
    double tailBound = 0.0;
};

struct VelocityConfig {
    std::string type; // affine_clamped | shifted | constant | table
    double a = 1.0;
    double b = 0.0;
    double qlo = 0.0;
    double qhi = 1.0;
    double c = 0.0;
    double cap = 10.0;
    std::string file;
};

struct LevelSpec {
    int count = 64;
    double lower = 0.0;
    double upper = 1.0;
    std::vector<double> probes;
    bool allowTruncation = false;
    bool snapTies = false; // tau_lvl = 1e-12 * (upper - lower)
};

struct TimeSpec {
    double horizon = 0.0;
    double step = 0.01;           // delta table time step
    std::vector<double> snapshots;
    double snapshotStep = 0.0;    // > 0 adds 0, step, 2 step, ... <= horizon
};

/// Annulus {inner <= |x - center| <= outer} or box [lower, upper].
struct WindowSpec {
    std::string shape = "annulus";
    std::array<double, 2> center{0.0, 0.0};
    double inner = 0.0;
    double outer = 1.0;
    std::array<double, 2> lower{0.0, 0.0};
    std::array<double, 2> upper{0.0, 0.0};
};

struct AnalysisSpec {
    bool fattening = false;
    bool critical = false;
    bool asymptotics = false;
    WindowSpec window;
    std::vector<WindowSpec> nested;
    std::optional<double> floor;  // default: one level spacing
    std::optional<WindowSpec> compareWindow; // default: inner half of the box
    std::optional<double> regInitialB;
};

enum class SolverChoice { Representation, Fd, Both };
const char* to_string(SolverChoice s);

struct ExperimentConfig {
    std::string name;
    GridSpec grid;
    InitialSpec initial;
    DensitySpec density;
    VelocityConfig velocity;
    LevelSpec levels;
    TimeSpec time;
    SolverChoice solver = SolverChoice::Representation;
    double cfl = 0.8;
    AnalysisSpec analysis;
    std::string outDir;
    bool writeFields = true;
    bool writeCsvFields = false;
    std::string baseDir; // for relative paths; not echoed
};

/// Throws ConfigInvalid with the offending key path.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& baseDir = ".");
ExperimentConfig parse_config_text(const std::string& text, const std::string& baseDir = ".");
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON form (schema included); parse_config(to_json(c)) == c.
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

struct Overrides {
    std::optional<double> dx;
    std::optional<int> levels;
    std::optional<double> horizon;
    std::optional<std::string> outDir;
};
void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

/// Cross-field checks (level count >= 16, positive spacing, ...). Throws ConfigInvalid.
void validate(const ExperimentConfig& cfg);

Grid build_grid(const ExperimentConfig& cfg);
ScalarField build_initial(const ExperimentConfig& cfg, const Grid& grid);
DensityField build_density(const ExperimentConfig& cfg, const Grid& grid);
VelocitySpec build_velocity(const ExperimentConfig& cfg);
BinarySet build_window(const WindowSpec& w, const Grid& grid);
std::vector<double> snapshot_times(const ExperimentConfig& cfg);
std::string resolve_path(const ExperimentConfig& cfg, const std::string& file);

/// Seeded quasiconvex field: phi(||A (x - c)||_p) with random SPD A, p in
/// [1.5, 4] and phi(r) = r + kappa r^2. Identical seeds give identical fields.
ScalarField quasiconvex_random(const Grid& grid, std::uint64_t seed);

} // namespace levelflow
