#pragma once

#include "rfmodel/dutsim.hpp"
#include "rfmodel/nn/model.hpp"
#include "rfmodel/nn/network.hpp"
#include "rfmodel/testbench.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace rfmodel::cli {

struct Paths {
    std::filesystem::path data_dir = "data";
    std::filesystem::path model_path = "model/model.json";
    std::filesystem::path report_dir = "report";
};

/// How the training group of the dataset is turned into windows.
struct DataConfig {
    std::size_t val_files = 6;  // taken from the end of the training group
    std::size_t window_count = pipeline::kDefaultWindowCount;
    std::size_t max_lag = pipeline::kDefaultMaxLag;
};

struct RunConfig {
    dutsim::DutSpec dut = dutsim::pw210_like();
    testbench::DatasetPlan plan = testbench::desk_plan();
    nn::TrainConfig train;
    nn::ArchSpec arch = nn::ArchSpec::residual();
    DataConfig data;
    Paths paths;
    std::uint64_t seed = 1;

    /// Relative paths are taken against this directory.
    std::filesystem::path root = ".";

    std::filesystem::path data_dir() const { return root / paths.data_dir; }
    std::filesystem::path model_path() const { return root / paths.model_path; }
    std::filesystem::path report_dir() const { return root / paths.report_dir; }

    /// Throws a config error naming the offending field.
    void validate() const;
};

/// Desk defaults: 26 noise files split 20/6, residual 128x4, 60 epochs with
/// cosine decay to 2% of the initial rate.
RunConfig desk_config();

/// Reads a JSON config. Missing keys keep their desk defaults; unknown keys
/// and ill-typed values are rejected with the dotted field path.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& json_text, const std::string& source = "<config>");

/// Every field, as JSON, in the same schema load_config accepts.
std::string dump_config(const RunConfig& cfg);

}  // namespace rfmodel::cli
