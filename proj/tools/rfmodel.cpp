// rfmodel: dataset generation, training, evaluation and gradient checks for
// the neural behavioral amplifier model.

#include "rfmodel/cli/commands.hpp"
#include "rfmodel/cli/config.hpp"
#include "rfmodel/error.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace rfmodel;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string which = "time";
    bool inject_fault = false;
    bool print_config = false;
};

cli::RunConfig resolve(const Options& o)
{
    cli::RunConfig cfg = o.config.empty() ? cli::desk_config() : cli::load_config(o.config);
    if (o.seed)
        cfg.seed = *o.seed;
    cfg.root = o.out.empty() ? fs::path(".") : fs::path(o.out);
    if (!fs::is_directory(cfg.root)) {
        const fs::path parent = cfg.root.parent_path();
        if (!parent.empty() && !fs::is_directory(parent))
            throw Error(ErrorCode::io, "cannot create output directory '" + cfg.root.string() +
                                           "': parent directory '" + parent.string() + "' does not exist");
        std::error_code ec;
        fs::create_directory(cfg.root, ec);
        if (ec)
            throw Error(ErrorCode::io, "cannot create output directory '" + cfg.root.string() + "': " + ec.message());
    }
    cfg.validate();
    return cfg;
}

template <class Fn>
int run_locked(const Options& o, Fn&& fn)
{
    const auto cfg = resolve(o);
    cli::DirLock lock(cfg.root);
    cli::Logger log(cli::log_level_from_env());
    log.attach_file(cfg.root / cli::kLogName);
    return fn(cfg, log);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Neural behavioral modeling of an RF amplifier: generate, train, eval, gradcheck"};
    app.require_subcommand(1);
    app.footer("Environment: RFMODEL_LOG=quiet|info|debug sets console verbosity (default info).");

    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON run configuration (desk defaults when omitted)")
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Master seed; overrides the config");
        sub->add_option("--out", o.out, "Run directory; relative config paths resolve against it");
    };

    auto* gen = app.add_subcommand("generate", "Synthesize the dataset suite and its manifest");
    add_common(gen);
    gen->add_flag("--print-config", o.print_config, "Print the resolved configuration and exit");

    auto* trn = app.add_subcommand("train", "Train the model on the uniform-noise captures");
    add_common(trn);

    auto* evl = app.add_subcommand("eval", "Compare model and measurements");
    add_common(evl);
    evl->add_option("--which", o.which, "time, gain_freq, gain_power, oip3 or all")
        ->check(CLI::IsMember({"time", "gain_freq", "gain_power", "oip3", "all"}));

    auto* gc = app.add_subcommand("gradcheck", "Backprop versus finite differences on small networks");
    gc->add_flag("--inject-bn-fault", o.inject_fault, "Corrupt the batch-norm backward pass (harness self-test)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? cli::kExitOk : cli::kExitUsage;
    }

    try {
        if (*gc) {
            cli::Logger log(cli::log_level_from_env());
            return cmd_gradcheck(log, o.inject_fault).passed ? cli::kExitOk : cli::kExitGradCheck;
        }
        if (*gen && o.print_config) {
            std::cout << cli::dump_config(resolve(o));
            return cli::kExitOk;
        }
        if (*gen)
            return run_locked(o, [](const cli::RunConfig& cfg, cli::Logger& log) {
                cli::cmd_generate(cfg, log);
                return cli::kExitOk;
            });
        if (*trn)
            return run_locked(o, [](const cli::RunConfig& cfg, cli::Logger& log) {
                cli::cmd_train(cfg, log);
                return cli::kExitOk;
            });
        return run_locked(o, [&](const cli::RunConfig& cfg, cli::Logger& log) {
            if (o.which == "all") {
                for (auto mode : {cli::EvalMode::time, cli::EvalMode::gain_freq, cli::EvalMode::gain_power,
                                  cli::EvalMode::oip3})
                    cli::cmd_eval(cfg, mode, log);
            } else {
                cli::cmd_eval(cfg, cli::parse_eval_mode(o.which), log);
            }
            return cli::kExitOk;
        });
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kExitUnexpected;
    }
}
