#include "levelflow/config.hpp"

#include "levelflow/errors.hpp"
#include "levelflow/io.hpp"
#include "levelflow/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

namespace levelflow {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg)
{
    throw Error(ErrorCode::ConfigInvalid, path + ": " + msg);
}

// Object reader that remembers which keys were consumed.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            bad(path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& get(const std::string& key)
    {
        seen_.insert(key);
        if (!j_.contains(key))
            bad(at(key), "missing required key");
        return j_.at(key);
    }

    double number(const std::string& key)
    {
        const json& v = get(key);
        if (!v.is_number())
            bad(at(key), "expected a number");
        double d = v.get<double>();
        if (!std::isfinite(d))
            bad(at(key), "must be finite");
        return d;
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : (seen_.insert(key), fallback); }

    int integer(const std::string& key)
    {
        const json& v = get(key);
        if (!v.is_number_integer())
            bad(at(key), "expected an integer");
        return v.get<int>();
    }
    int integer(const std::string& key, int fallback) { return has(key) ? integer(key) : fallback; }

    std::uint64_t unsigned_integer(const std::string& key)
    {
        const json& v = get(key);
        if (!v.is_number_unsigned())
            bad(at(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = get(key);
        if (!v.is_boolean())
            bad(at(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key)
    {
        const json& v = get(key);
        if (!v.is_string())
            bad(at(key), "expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) { return has(key) ? string(key) : fallback; }

    std::vector<double> numbers(const std::string& key)
    {
        const json& v = get(key);
        if (!v.is_array())
            bad(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number() || !std::isfinite(e.get<double>()))
                bad(at(key), "expected an array of finite numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::array<double, 2> pair(const std::string& key, int dim)
    {
        std::vector<double> v = numbers(key);
        if (static_cast<int>(v.size()) != dim)
            bad(at(key), "expected " + std::to_string(dim) + " entries");
        return {v[0], dim == 2 ? v[1] : 0.0};
    }

    Obj child(const std::string& key)
    {
        return Obj(get(key), at(key));
    }

    void finish() const
    {
        for (const auto& [key, value] : j_.items()) {
            (void)value;
            if (!seen_.count(key))
                bad(at(key), "unknown key");
        }
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void expect_one_of(const std::string& path, const std::string& value, std::initializer_list<const char*> allowed)
{
    for (const char* a : allowed)
        if (value == a)
            return;
    std::string list;
    for (const char* a : allowed)
        list += std::string(list.empty() ? "" : ", ") + a;
    bad(path, "'" + value + "' is not one of " + list);
}

WindowSpec parse_window(Obj o, int dim)
{
    WindowSpec w;
    w.shape = o.string("shape");
    expect_one_of(o.at("shape"), w.shape, {"annulus", "box"});
    if (w.shape == "annulus") {
        if (o.has("center"))
            w.center = o.pair("center", dim);
        w.inner = o.number("inner");
        w.outer = o.number("outer");
        if (!(w.inner >= 0.0 && w.outer > w.inner))
            bad(o.at("outer"), "need 0 <= inner < outer");
    } else {
        w.lower = o.pair("lower", dim);
        w.upper = o.pair("upper", dim);
        for (int a = 0; a < dim; ++a)
            if (!(w.upper[a] > w.lower[a]))
                bad(o.at("upper"), "need lower < upper");
    }
    o.finish();
    return w;
}

ordered_json window_json(const WindowSpec& w, int dim)
{
    auto vec = [dim](const std::array<double, 2>& p) {
        return dim == 2 ? ordered_json::array({p[0], p[1]}) : ordered_json::array({p[0]});
    };
    ordered_json j;
    j["shape"] = w.shape;
    if (w.shape == "annulus") {
        j["center"] = vec(w.center);
        j["inner"] = w.inner;
        j["outer"] = w.outer;
    } else {
        j["lower"] = vec(w.lower);
        j["upper"] = vec(w.upper);
    }
    return j;
}

// Uniform double in [lo, hi) from the top 53 bits; independent of the
// standard library's distribution implementations.
double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

const char* to_string(SolverChoice s)
{
    switch (s) {
    case SolverChoice::Representation: return "representation";
    case SolverChoice::Fd: return "fd";
    case SolverChoice::Both: return "both";
    }
    return "?";
}

ExperimentConfig parse_config(const json& doc, const std::string& baseDir)
{
    ExperimentConfig cfg;
    cfg.baseDir = baseDir;
    Obj root(doc, "$");
    std::string schema = root.string("schema");
    if (schema != kSchema)
        bad("$.schema", "expected \"" + std::string(kSchema) + "\", got \"" + schema + "\"");
    cfg.name = root.string("name", "experiment");

    {
        Obj g = root.child("grid");
        cfg.grid.dim = g.integer("dim");
        if (cfg.grid.dim != 1 && cfg.grid.dim != 2)
            bad(g.at("dim"), "must be 1 or 2");
        cfg.grid.lower = g.pair("lower", cfg.grid.dim);
        cfg.grid.upper = g.pair("upper", cfg.grid.dim);
        cfg.grid.dx = g.number("dx");
        g.finish();
    }
    const int dim = cfg.grid.dim;

    {
        Obj o = root.child("initial");
        InitialSpec& s = cfg.initial;
        s.type = o.string("type");
        expect_one_of(o.at("type"), s.type, {"paper1d", "radial", "cone", "quasiconvex-random", "table", "kruskal"});
        if (s.type == "radial" || s.type == "cone")
            if (o.has("center"))
                s.center = o.pair("center", dim);
        if (s.type == "cone")
            s.axes = o.pair("axes", dim);
        if (s.type == "quasiconvex-random")
            s.seed = o.unsigned_integer("seed");
        if (s.type == "table")
            s.file = o.string("file");
        if (s.type == "kruskal") {
            s.depth = o.integer("depth");
            s.level = o.number("level", 0.0);
        }
        o.finish();
    }

    {
        Obj o = root.child("density");
        DensitySpec& d = cfg.density;
        d.type = o.string("type");
        expect_one_of(o.at("type"), d.type, {"lebesgue", "cauchy2d", "gaussian", "table"});
        if (d.type == "gaussian")
            d.sigma = o.number("sigma");
        if (d.type == "table") {
            d.file = o.string("file");
            d.tailBound = o.number("tail_bound", 0.0);
        }
        o.finish();
    }

    {
        Obj o = root.child("velocity");
        VelocityConfig& v = cfg.velocity;
        v.type = o.string("type");
        expect_one_of(o.at("type"), v.type, {"affine_clamped", "shifted", "constant", "table"});
        if (v.type == "affine_clamped") {
            v.a = o.number("a");
            v.b = o.number("b");
            v.qlo = o.number("qlo");
            v.qhi = o.number("qhi");
        } else if (v.type == "shifted") {
            v.c = o.number("c");
            v.cap = o.number("cap", 10.0);
        } else if (v.type == "constant") {
            v.c = o.number("c");
        } else {
            v.file = o.string("file");
        }
        o.finish();
    }

    {
        Obj o = root.child("levels");
        LevelSpec& l = cfg.levels;
        l.count = o.integer("count");
        l.lower = o.number("lower");
        l.upper = o.number("upper");
        if (o.has("probes"))
            l.probes = o.numbers("probes");
        l.allowTruncation = o.boolean("allow_truncation", false);
        l.snapTies = o.boolean("snap_ties", false);
        o.finish();
    }

    {
        Obj o = root.child("time");
        TimeSpec& t = cfg.time;
        t.horizon = o.number("horizon");
        t.step = o.number("step");
        if (o.has("snapshots"))
            t.snapshots = o.numbers("snapshots");
        t.snapshotStep = o.number("snapshot_step", 0.0);
        o.finish();
    }

    {
        std::string solver = root.string("solver", "representation");
        expect_one_of("$.solver", solver, {"representation", "fd", "both"});
        cfg.solver = solver == "fd" ? SolverChoice::Fd : solver == "both" ? SolverChoice::Both
                                                                          : SolverChoice::Representation;
    }

    if (root.has("fd")) {
        Obj o = root.child("fd");
        cfg.cfl = o.number("cfl", 0.8);
        o.finish();
    }

    if (root.has("analysis")) {
        Obj o = root.child("analysis");
        AnalysisSpec& a = cfg.analysis;
        a.fattening = o.boolean("fattening", false);
        a.critical = o.boolean("critical", false);
        if (o.has("asymptotics")) {
            Obj as = o.child("asymptotics");
            a.asymptotics = true;
            a.window = parse_window(as.child("window"), dim);
            if (as.has("nested")) {
                const json& arr = as.get("nested");
                if (!arr.is_array())
                    bad(as.at("nested"), "expected an array of windows");
                for (std::size_t i = 0; i < arr.size(); ++i)
                    a.nested.push_back(parse_window(Obj(arr[i], as.at("nested") + "[" + std::to_string(i) + "]"), dim));
            }
            if (as.has("floor"))
                a.floor = as.number("floor");
            as.finish();
        }
        if (o.has("compare_window"))
            a.compareWindow = parse_window(o.child("compare_window"), dim);
        if (o.has("reg_initial_b"))
            a.regInitialB = o.number("reg_initial_b");
        o.finish();
    }

    if (root.has("output")) {
        Obj o = root.child("output");
        cfg.outDir = o.string("dir", "");
        cfg.writeFields = o.boolean("fields", true);
        cfg.writeCsvFields = o.boolean("csv_fields", false);
        o.finish();
    }
    root.finish();
    validate(cfg);
    return cfg;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& baseDir)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc, baseDir);
}

ExperimentConfig load_config(const std::string& path)
{
    std::string text = read_text(path);
    std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_config_text(text, dir.empty() ? "." : dir);
}

ordered_json to_json(const ExperimentConfig& cfg)
{
    const int dim = cfg.grid.dim;
    auto vec = [dim](const std::array<double, 2>& p) {
        return dim == 2 ? ordered_json::array({p[0], p[1]}) : ordered_json::array({p[0]});
    };
    ordered_json j;
    j["schema"] = kSchema;
    j["name"] = cfg.name;
    j["grid"] = {{"dim", dim}, {"lower", vec(cfg.grid.lower)}, {"upper", vec(cfg.grid.upper)}, {"dx", cfg.grid.dx}};

    ordered_json init;
    init["type"] = cfg.initial.type;
    const std::string& it = cfg.initial.type;
    if (it == "radial" || it == "cone")
        init["center"] = vec(cfg.initial.center);
    if (it == "cone")
        init["axes"] = vec(cfg.initial.axes);
    if (it == "quasiconvex-random")
        init["seed"] = cfg.initial.seed;
    if (it == "table")
        init["file"] = cfg.initial.file;
    if (it == "kruskal") {
        init["depth"] = cfg.initial.depth;
        init["level"] = cfg.initial.level;
    }
    j["initial"] = init;

    ordered_json dens;
    dens["type"] = cfg.density.type;
    if (cfg.density.type == "gaussian")
        dens["sigma"] = cfg.density.sigma;
    if (cfg.density.type == "table") {
        dens["file"] = cfg.density.file;
        dens["tail_bound"] = cfg.density.tailBound;
    }
    j["density"] = dens;

    ordered_json vel;
    const VelocityConfig& v = cfg.velocity;
    vel["type"] = v.type;
    if (v.type == "affine_clamped") {
        vel["a"] = v.a;
        vel["b"] = v.b;
        vel["qlo"] = v.qlo;
        vel["qhi"] = v.qhi;
    } else if (v.type == "shifted") {
        vel["c"] = v.c;
        vel["cap"] = v.cap;
    } else if (v.type == "constant") {
        vel["c"] = v.c;
    } else {
        vel["file"] = v.file;
    }
    j["velocity"] = vel;

    j["levels"] = {{"count", cfg.levels.count},
                   {"lower", cfg.levels.lower},
                   {"upper", cfg.levels.upper},
                   {"probes", cfg.levels.probes},
                   {"allow_truncation", cfg.levels.allowTruncation},
                   {"snap_ties", cfg.levels.snapTies}};
    j["time"] = {{"horizon", cfg.time.horizon},
                 {"step", cfg.time.step},
                 {"snapshots", cfg.time.snapshots},
                 {"snapshot_step", cfg.time.snapshotStep}};
    j["solver"] = to_string(cfg.solver);
    j["fd"] = {{"cfl", cfg.cfl}};

    ordered_json an;
    an["fattening"] = cfg.analysis.fattening;
    an["critical"] = cfg.analysis.critical;
    if (cfg.analysis.asymptotics) {
        ordered_json as;
        as["window"] = window_json(cfg.analysis.window, dim);
        ordered_json nested = ordered_json::array();
        for (const auto& w : cfg.analysis.nested)
            nested.push_back(window_json(w, dim));
        as["nested"] = nested;
        if (cfg.analysis.floor)
            as["floor"] = *cfg.analysis.floor;
        an["asymptotics"] = as;
    }
    if (cfg.analysis.compareWindow)
        an["compare_window"] = window_json(*cfg.analysis.compareWindow, dim);
    if (cfg.analysis.regInitialB)
        an["reg_initial_b"] = *cfg.analysis.regInitialB;
    j["analysis"] = an;
    j["output"] = {{"dir", cfg.outDir}, {"fields", cfg.writeFields}, {"csv_fields", cfg.writeCsvFields}};
    return j;
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o)
{
    if (o.dx)
        cfg.grid.dx = *o.dx;
    if (o.levels)
        cfg.levels.count = *o.levels;
    if (o.horizon) {
        cfg.time.horizon = *o.horizon;
        auto& snaps = cfg.time.snapshots;
        snaps.erase(std::remove_if(snaps.begin(), snaps.end(), [&](double t) { return t > *o.horizon; }), snaps.end());
    }
    if (o.outDir)
        cfg.outDir = *o.outDir;
    validate(cfg);
}

void validate(const ExperimentConfig& cfg)
{
    const GridSpec& g = cfg.grid;
    if (!(g.dx > 0.0))
        bad("$.grid.dx", "must be positive");
    for (int a = 0; a < g.dim; ++a)
        if (!(g.upper[a] - g.lower[a] >= g.dx))
            bad("$.grid.upper", "box must span at least one cell per axis");
    if (cfg.initial.type == "paper1d" && g.dim != 1)
        bad("$.initial.type", "paper1d is one-dimensional");
    if (cfg.initial.type == "kruskal" && g.dim != 2)
        bad("$.initial.type", "kruskal is two-dimensional");
    if (cfg.density.type == "cauchy2d" && g.dim != 2)
        bad("$.density.type", "cauchy2d is two-dimensional");
    if (cfg.density.type == "gaussian" && !(cfg.density.sigma > 0.0))
        bad("$.density.sigma", "must be positive");
    if (cfg.initial.type == "cone" && !(cfg.initial.axes[0] > 0.0 && (g.dim == 1 || cfg.initial.axes[1] > 0.0)))
        bad("$.initial.axes", "must be positive");
    if (cfg.velocity.type == "affine_clamped" && !(cfg.velocity.a > 0.0 && cfg.velocity.qhi > cfg.velocity.qlo))
        bad("$.velocity", "affine_clamped needs a > 0 and qlo < qhi");
    if (cfg.levels.count < 16)
        bad("$.levels.count", "at least 16 levels are required");
    if (!(cfg.levels.upper > cfg.levels.lower))
        bad("$.levels.upper", "must exceed lower");
    if (!(cfg.time.horizon >= 0.0))
        bad("$.time.horizon", "must be non-negative");
    if (!(cfg.time.step > 0.0))
        bad("$.time.step", "must be positive");
    if (cfg.time.snapshotStep < 0.0)
        bad("$.time.snapshot_step", "must be non-negative");
    for (double t : cfg.time.snapshots)
        if (t < 0.0 || t > cfg.time.horizon)
            bad("$.time.snapshots", "every snapshot must lie in [0, horizon]");
    if (!(cfg.cfl > 0.0 && cfg.cfl <= tol::kCflMax))
        bad("$.fd.cfl", "must lie in (0, 0.9]");
    if (cfg.analysis.regInitialB && !(*cfg.analysis.regInitialB > 0.0))
        bad("$.analysis.reg_initial_b", "must be positive");
    if (cfg.analysis.floor && !(*cfg.analysis.floor > 0.0))
        bad("$.analysis.asymptotics.floor", "must be positive");
}

std::string resolve_path(const ExperimentConfig& cfg, const std::string& file)
{
    std::filesystem::path p(file);
    if (p.is_absolute())
        return p.string();
    return (std::filesystem::path(cfg.baseDir) / p).lexically_normal().string();
}

Grid build_grid(const ExperimentConfig& cfg)
{
    return Grid::from_box(cfg.grid.dim, cfg.grid.lower, cfg.grid.upper, cfg.grid.dx);
}

ScalarField quasiconvex_random(const Grid& grid, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::array<double, 2> lo = grid.origin(), hi = grid.upper();
    std::array<double, 2> c{}, half{};
    for (int a = 0; a < grid.dim(); ++a) {
        half[a] = 0.5 * (hi[a] - lo[a]);
        double mid = 0.5 * (hi[a] + lo[a]);
        c[a] = uniform(rng, mid - 0.1 * half[a], mid + 0.1 * half[a]);
    }
    const double theta = uniform(rng, 0.0, M_PI);
    const double e1 = uniform(rng, 0.8, 1.6), e2 = uniform(rng, 0.8, 1.6);
    const double p = uniform(rng, 1.5, 4.0);
    const double kappa = uniform(rng, 0.0, 0.5);
    const double ct = std::cos(theta), st = std::sin(theta);
    // A = R diag(e1, e2) R^T
    const double a11 = e1 * ct * ct + e2 * st * st;
    const double a22 = e1 * st * st + e2 * ct * ct;
    const double a12 = (e1 - e2) * ct * st;
    ScalarField u(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto x = grid.point(i);
        double r;
        if (grid.dim() == 1) {
            r = e1 * std::abs(x[0] - c[0]);
        } else {
            double dxv = x[0] - c[0], dyv = x[1] - c[1];
            double y1 = a11 * dxv + a12 * dyv, y2 = a12 * dxv + a22 * dyv;
            r = std::pow(std::pow(std::abs(y1), p) + std::pow(std::abs(y2), p), 1.0 / p);
        }
        u[i] = r + kappa * r * r;
    }
    return u;
}

ScalarField build_initial(const ExperimentConfig& cfg, const Grid& grid)
{
    const InitialSpec& s = cfg.initial;
    ScalarField u(grid);
    if (s.type == "paper1d") {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double x = grid.x(grid.ix(i));
            u[i] = std::min(std::abs(x + 1.0) + 1.0, std::abs(x - 2.0));
        }
    } else if (s.type == "radial") {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            auto x = grid.point(i);
            u[i] = std::hypot(x[0] - s.center[0], x[1] - s.center[1]);
        }
    } else if (s.type == "cone") {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            auto x = grid.point(i);
            double a = (x[0] - s.center[0]) / s.axes[0];
            double b = grid.dim() == 2 ? (x[1] - s.center[1]) / s.axes[1] : 0.0;
            u[i] = std::hypot(a, b);
        }
    } else if (s.type == "quasiconvex-random") {
        u = quasiconvex_random(grid, s.seed);
    } else if (s.type == "table") {
        u = read_grid(resolve_path(cfg, s.file));
        require_same_grid(u.grid, grid, "initial table");
        for (double v : u.values)
            if (!std::isfinite(v))
                throw Error(ErrorCode::ConfigInvalid, "initial table contains non-finite values");
    } else if (s.type == "kruskal") {
        SignedDistanceField sdf = signed_distance(build_kruskal_set(s.depth, grid));
        for (std::size_t i = 0; i < grid.size(); ++i)
            u[i] = s.level + sdf.values[i];
    }
    return u;
}

DensityField build_density(const ExperimentConfig& cfg, const Grid& grid)
{
    const DensitySpec& d = cfg.density;
    if (d.type == "lebesgue")
        return lebesgue_density(grid);
    if (d.type == "cauchy2d")
        return cauchy2d_density(grid);
    if (d.type == "gaussian")
        return gaussian_density(grid, d.sigma);
    ScalarField theta = read_grid(resolve_path(cfg, d.file));
    require_same_grid(theta.grid, grid, "density table");
    return table_density(theta, d.tailBound);
}

VelocitySpec build_velocity(const ExperimentConfig& cfg)
{
    const VelocityConfig& v = cfg.velocity;
    if (v.type == "affine_clamped")
        return affine_clamped(v.a, v.b, v.qlo, v.qhi);
    if (v.type == "shifted")
        return shifted(v.c, v.cap);
    if (v.type == "constant")
        return constant_velocity(v.c);
    return load_velocity_table(resolve_path(cfg, v.file));
}

BinarySet build_window(const WindowSpec& w, const Grid& grid)
{
    BinarySet set(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto x = grid.point(i);
        bool in;
        if (w.shape == "annulus") {
            double r = std::hypot(x[0] - w.center[0], grid.dim() == 2 ? x[1] - w.center[1] : 0.0);
            in = r >= w.inner && r <= w.outer;
        } else {
            in = x[0] >= w.lower[0] && x[0] <= w.upper[0] &&
                 (grid.dim() == 1 || (x[1] >= w.lower[1] && x[1] <= w.upper[1]));
        }
        set.member[i] = in ? 1 : 0;
    }
    return set;
}

std::vector<double> snapshot_times(const ExperimentConfig& cfg)
{
    std::vector<double> t = cfg.time.snapshots;
    if (cfg.time.snapshotStep > 0.0) {
        std::vector<double> u = uniform_times(cfg.time.horizon, cfg.time.snapshotStep);
        t.insert(t.end(), u.begin(), u.end());
    }
    if (t.empty())
        t.push_back(cfg.time.horizon);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end(), [](double a, double b) { return std::abs(a - b) <= 1e-12; }), t.end());
    return t;
}

} // namespace levelflow
