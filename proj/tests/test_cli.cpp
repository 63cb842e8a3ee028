#include "rfmodel/cli/commands.hpp"
#include "rfmodel/cli/config.hpp"
#include "rfmodel/error.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace rfmodel;
using namespace rfmodel::cli;
namespace fs = std::filesystem;

namespace {

std::string error_text(const std::string& json, ErrorCode expected = ErrorCode::config)
{
    try {
        parse_config(json);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), expected) << e.what();
        return e.what();
    }
    ADD_FAILURE() << "accepted: " << json;
    return {};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Relative path -> contents for every regular file under dir.
std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
    return out;
}

fs::path fresh_dir(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("rfmodel_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunConfig tiny(const fs::path& root)
{
    auto c = parse_config(R"({
        "seed": 5,
        "plan": {"training": {"count": 4}},
        "train": {"epochs": 2, "val_files": 1, "window_count": 128, "batch_size": 64},
        "arch": {"hidden_width": 16, "n_blocks": 1}
    })");
    c.root = root;
    return c;
}

}  // namespace

TEST(Config, EmptyDocumentIsDeskDefaults)
{
    EXPECT_EQ(dump_config(parse_config("{}")), dump_config(desk_config()));
    EXPECT_NO_THROW(desk_config().validate());
}

TEST(Config, DumpParseRoundTrip)
{
    auto c = desk_config();
    c.seed = 99;
    c.dut.a3 = -3.5;
    c.dut.pre_filter = {0.5, 0.25, 0.25};
    c.dut.inverting = true;
    c.plan.sine.count = 7;
    c.plan.time_test.bands = testbench::contiguous_bands(0.01, 0.31, 3);
    c.train.lr = 3e-4;
    c.train.lr_final_ratio = 0.1;
    c.arch = nn::ArchSpec::autoencoder({32, 8, 32});
    c.data.window_count = 100;
    c.paths.report_dir = "out/reports";
    const auto text = dump_config(c);
    const auto back = parse_config(text);
    EXPECT_EQ(dump_config(back), text);
    EXPECT_EQ(back.arch, c.arch);
    EXPECT_EQ(back.train, c.train);
    EXPECT_EQ(back.dut.pre_filter, c.dut.pre_filter);
    EXPECT_EQ(back.plan.time_test.bands.size(), 3u);
    EXPECT_EQ(back.paths.report_dir, fs::path("out/reports"));
}

TEST(Config, RejectsUnknownKeysAndBadValues)
{
    EXPECT_NE(error_text(R"({"sed": 1})").find("sed"), std::string::npos);
    EXPECT_NE(error_text(R"({"plan": {"sine": {"cnt": 3}}})").find("plan.sine.cnt"), std::string::npos);
    EXPECT_NE(error_text(R"({"plan": {"sine": {"count": -1}}})").find("plan.sine.count"), std::string::npos);
    EXPECT_NE(error_text(R"({"train": {"lr": "fast"}})").find("train.lr"), std::string::npos);
    EXPECT_NE(error_text(R"({"arch": {"kind": "mamba"}})").find("mamba"), std::string::npos);
    EXPECT_NE(error_text("{\"seed\": 1,").find("malformed"), std::string::npos);
}

TEST(Config, ValidationNamesTheField)
{
    auto c = desk_config();
    c.data.val_files = c.plan.training.count;
    try {
        c.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::config);
        EXPECT_NE(std::string(e.what()).find("train.val_files"), std::string::npos);
    }
    c = desk_config();
    c.train.batch_size = 1;
    EXPECT_THROW(c.validate(), Error);
    c = desk_config();
    c.arch.input_width = c.plan.samples_per_file + 1;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Config, LoadFromFile)
{
    const auto dir = fresh_dir("load");
    {
        std::ofstream(dir / "c.json") << R"({"seed": 17})";
    }
    EXPECT_EQ(load_config(dir / "c.json").seed, 17u);
    try {
        load_config(dir / "missing.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(exit_code_for(e), kExitIo);
    }
    fs::remove_all(dir);
}

TEST(Cli, ExitCodes)
{
    EXPECT_EQ(exit_code_for(Error(ErrorCode::config, "")), kExitConfig);
    EXPECT_EQ(exit_code_for(Error(ErrorCode::invalid_argument, "")), kExitConfig);
    EXPECT_EQ(exit_code_for(Error(ErrorCode::io, "")), kExitIo);
    EXPECT_EQ(exit_code_for(ParseError("f", 3, "bad")), kExitParse);
    EXPECT_EQ(exit_code_for(Error(ErrorCode::divergence, "")), kExitDivergence);
    EXPECT_EQ(exit_code_for(Error(ErrorCode::metrology, "")), kExitMetrology);
}

TEST(Cli, EvalModes)
{
    for (auto m : {EvalMode::time, EvalMode::gain_freq, EvalMode::gain_power, EvalMode::oip3})
        EXPECT_EQ(parse_eval_mode(to_string(m)), m);
    EXPECT_THROW(parse_eval_mode("phase"), Error);
}

TEST(Cli, LogLevelFromEnvironment)
{
    ::setenv("RFMODEL_LOG", "debug", 1);
    EXPECT_EQ(log_level_from_env(), LogLevel::debug);
    ::setenv("RFMODEL_LOG", "quiet", 1);
    EXPECT_EQ(log_level_from_env(), LogLevel::quiet);
    ::unsetenv("RFMODEL_LOG");
    EXPECT_EQ(log_level_from_env(), LogLevel::info);
}

TEST(Cli, LoggerLevelsAndFile)
{
    const auto dir = fresh_dir("log");
    std::ostringstream console;
    Logger log(LogLevel::info, &console);
    log.attach_file(dir / kLogName);
    log.info("hello");
    log.debug("hidden");
    EXPECT_EQ(console.str(), "hello\n");
    const auto file = slurp(dir / kLogName);
    EXPECT_NE(file.find("hello"), std::string::npos);
    EXPECT_NE(file.find("hidden"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, DirectoryLockIsExclusive)
{
    const auto dir = fresh_dir("lock");
    {
        DirLock a(dir);
        EXPECT_TRUE(fs::exists(dir / kLockName));
        try {
            DirLock b(dir);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::io);
        }
    }
    EXPECT_FALSE(fs::exists(dir / kLockName));
    EXPECT_NO_THROW(DirLock c(dir));
    fs::remove_all(dir);
}

TEST(Cli, TrainWithoutDataIsAnIoError)
{
    const auto dir = fresh_dir("nodata");
    std::ostringstream sink;
    Logger log(LogLevel::quiet, &sink);
    try {
        cmd_train(tiny(dir), log);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::io) << e.what();
    }
    fs::remove_all(dir);
}

TEST(Cli, GradCheckPassesAndCatchesFault)
{
    std::ostringstream sink;
    Logger log(LogLevel::quiet, &sink);
    const auto ok = cmd_gradcheck(log);
    EXPECT_TRUE(ok.passed);
    EXPECT_LT(ok.max_rel_error, kGradCheckTolerance);
    EXPECT_EQ(ok.reports.size(), 2u);
    EXPECT_FALSE(cmd_gradcheck(log, true).passed);
}

TEST(Cli, EndToEndIsDeterministic)
{
    std::map<std::string, std::string> runs[2];
    for (int r = 0; r < 2; ++r) {
        const auto dir = fresh_dir("e2e" + std::to_string(r));
        const auto cfg = tiny(dir);
        std::ostringstream sink;
        Logger log(LogLevel::quiet, &sink);
        const auto manifest = cmd_generate(cfg, log);
        EXPECT_EQ(manifest.entries.size(), 4u + 6 + 10 + 10 + 20);
        const auto summary = cmd_train(cfg, log);
        EXPECT_EQ(summary.model.history.size(), 2u);
        EXPECT_TRUE(fs::exists(summary.model_path));
        for (long lag : summary.train_lags)
            EXPECT_EQ(lag, long(cfg.dut.delay_samples));
        std::istringstream hist(slurp(summary.history_path));
        std::string line;
        std::getline(hist, line);
        EXPECT_EQ(line, "epoch,train_mse,val_mse");
        std::size_t rows = 0;
        while (std::getline(hist, line))
            ++rows;
        EXPECT_EQ(rows, cfg.train.epochs);

        for (auto m : {EvalMode::time, EvalMode::gain_freq, EvalMode::gain_power, EvalMode::oip3}) {
            const auto res = cmd_eval(cfg, m, log);
            EXPECT_FALSE(res.files.empty());
            for (const auto& f : res.files)
                EXPECT_TRUE(fs::exists(f)) << f;
        }
        runs[r] = snapshot(dir);
        fs::remove_all(dir);
    }
    ASSERT_EQ(runs[0].size(), runs[1].size());
    for (const auto& [name, content] : runs[0]) {
        ASSERT_TRUE(runs[1].count(name)) << name;
        EXPECT_TRUE(runs[1].at(name) == content) << name << " differs between runs";
    }
    EXPECT_TRUE(runs[0].count("model/model.json"));
    EXPECT_TRUE(runs[0].count("report/gain_freq.csv"));
}
