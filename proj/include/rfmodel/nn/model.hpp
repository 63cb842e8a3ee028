#pragma once

#include "rfmodel/nn/network.hpp"
#include "rfmodel/pipeline.hpp"
#include "rfmodel/waveform.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rfmodel::nn {

struct TrainConfig {
    std::size_t batch_size = 256;
    std::size_t epochs = 100;
    double lr = 1e-3;
    // Cosine decay from lr down to lr * lr_final_ratio over the run; 1 keeps
    // the rate constant.
    double lr_final_ratio = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
    AdamConfig adam() const { return {lr, beta1, beta2, eps}; }
    /// Learning rate for a 1-based epoch.
    double lr_at(std::size_t epoch) const;

    bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0;
    double val_mse = 0;

    bool operator==(const EpochRecord&) const = default;
};

/// A trained network together with everything inference needs.
struct ModelArtifact {
    ArchSpec arch;
    std::vector<ParamSlice> slices;
    std::vector<double> parameters;
    pipeline::NormStats norm_stats;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;

    /// Throws if the parameters do not match the architecture or a running
    /// variance is not positive.
    void validate() const;
    std::span<const double> slice(const std::string& name) const;
};

/// Fresh model with initial_parameters(arch, seed).
ModelArtifact make_model(const ArchSpec& arch, const pipeline::NormStats& stats, std::uint64_t seed);

/// Versioned JSON container: format, version, arch, norm_stats, best_epoch,
/// history, slices, parameters. Doubles round-trip exactly.
void save_model(const ModelArtifact& model, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on the MSE loss.
///
/// Each epoch visits the training rows in a fresh seeded permutation, in
/// batches of cfg.batch_size (a trailing batch of one row is skipped since
/// batch norm needs two). Records train MSE (mean over the epoch's batches,
/// weighted by batch size) and eval-mode validation MSE, and returns the
/// parameters of the epoch with the lowest validation MSE.
ModelArtifact train(const ArchSpec& arch, const pipeline::WindowedDataset& train_set,
                    const pipeline::WindowedDataset& val_set, const TrainConfig& cfg,
                    const EpochCallback& on_epoch = {});

/// Eval-mode MSE on the normalized scale.
double evaluate_mse(const ModelArtifact& model, const pipeline::WindowedDataset& data);

/// Eval-mode inference wrapper that keeps one network instance alive.
class Predictor {
public:
    explicit Predictor(const ModelArtifact& model);

    const ModelArtifact& model() const noexcept { return model_; }

    /// Predictions for rows of normalized windows (row-major, count x width);
    /// results stay on the normalized scale.
    std::vector<double> predict_normalized(std::span<const double> windows);

    /// Predicts response[start .. start + n) from the measured stimulus:
    /// each window is stimulus[i - W + 1 .. i], never previous predictions.
    /// Output is denormalized with the stored statistics.
    Waveform predict_sequence(const Waveform& stimulus, std::size_t n, std::size_t start);

private:
    ModelArtifact model_;
    Network<double> net_;
};

inline constexpr std::size_t kDefaultPredictLength = 5000;

/// Convenience wrapper; start defaults to the first index with a full window.
Waveform predict_sequence(const ModelArtifact& model, const Waveform& stimulus,
                          std::size_t n = kDefaultPredictLength, std::optional<std::size_t> start = {});

struct GradCheckOptions {
    std::size_t batch = 4;
    std::uint64_t seed = 1234;
    bool inject_batchnorm_fault = false;
    double residual_scale = 1e-3;  // targets = outputs + U(-s, s); 0 gives zero loss
};

struct GradCheckReport {
    double max_rel_error = 0;
    double max_abs_grad = 0;
    std::string worst_slice;
    std::size_t checked = 0;
    std::vector<std::pair<std::string, double>> per_slice;  // max relative error per trainable slice
};

/// Backprop versus fourth-order central differences (step `eps`) for every trainable
/// parameter of a randomly initialized 64-bit network in train mode.
/// Relative error is |a - n| / max(|a|, |n|, 1e-7).
GradCheckReport grad_check(const ArchSpec& arch, double eps, const GradCheckOptions& options = {});

}  // namespace rfmodel::nn
