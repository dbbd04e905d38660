#include "levelflow/app.hpp"
#include "levelflow/errors.hpp"
#include "levelflow/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace levelflow;

namespace {

struct Options {
    std::string config;
    std::string positional;
    std::optional<std::string> out;
    int threads = 0;
    std::optional<double> dx;
    std::optional<int> levels;
    std::optional<double> horizon;
    std::string example;
};

int run_command(Command command, const Options& opt)
{
    std::string path = !opt.positional.empty() ? opt.positional : opt.config;
    if (path.empty())
        throw Error(ErrorCode::ConfigInvalid, "no config file given (positional or --config)");
    ExperimentConfig cfg = load_config(path);
    apply_overrides(cfg, Overrides{opt.dx, opt.levels, opt.horizon, opt.out});
    std::string dir = cfg.outDir.empty() ? "out/" + cfg.name : cfg.outDir;
    PipelineResult result = run_pipeline(cfg, command);
    write_outputs(result, dir);
    std::cout << verdict_block(result) << "out=" << dir << "\n";
    return 0;
}

int run_example_command(const Options& opt)
{
    ExampleReport rep = run_example(opt.example);
    std::cout << format_checks(rep);
    if (opt.out && rep.result)
        write_outputs(*rep.result, *opt.out);
    return rep.pass() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"levelflow: nonlocal level-set evolution by parallel sets and value functions"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("--config", opt.config, "experiment config (JSON)");
    app.add_option("--out", opt.out, "output directory (overrides output.dir)");
    app.add_option("--threads", opt.threads, "worker threads (default: LEVELFLOW_THREADS, else 1)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--dx", opt.dx, "grid spacing override")->check(CLI::PositiveNumber);
    app.add_option("--levels", opt.levels, "level count override");
    app.add_option("--horizon", opt.horizon, "horizon override")->check(CLI::NonNegativeNumber);

    struct Sub {
        const char* name;
        const char* help;
        Command command;
    };
    const Sub subs[] = {
        {"run", "full pipeline with the analyses enabled in the config", Command::Run},
        {"solve", "solvers only", Command::Solve},
        {"compare", "representation against finite differences", Command::Compare},
        {"fattening", "fattening report and critical-level classification", Command::Fattening},
        {"asymptotics", "large-time decay rates", Command::Asymptotics},
    };
    std::optional<Command> chosen;
    for (const Sub& s : subs) {
        CLI::App* sc = app.add_subcommand(s.name, s.help)->fallthrough();
        sc->add_option("config", opt.positional, "experiment config (JSON)");
        Command c = s.command;
        sc->callback([&chosen, c] { chosen = c; });
    }
    CLI::App* ex = app.add_subcommand("example", "run a pinned reproduction and check its tolerances")->fallthrough();
    ex->add_option("name", opt.example, "paper1d | radial | kruskal")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        set_thread_limit(opt.threads);
        if (ex->parsed())
            return run_example_command(opt);
        return run_command(*chosen, opt);
    } catch (const Error& e) {
        std::cerr << "levelflow: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "levelflow: " << e.what() << "\n";
        return 1;
    }
}
