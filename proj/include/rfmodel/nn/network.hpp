#pragma once

#include "rfmodel/nn/ops.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rfmodel::nn {

enum class ArchKind { residual, autoencoder };

/// Network shape. Both kinds map input_width inputs to one output.
///
/// residual:    dense(in -> W), n_blocks x [dense, BN, SiLU, dense, BN, +skip,
///              SiLU], dense(W -> 1)
/// autoencoder: for each width w in ae_widths: dense(prev -> w), BN, SiLU;
///              then dense(last -> 1)
struct ArchSpec {
    ArchKind kind = ArchKind::residual;
    std::size_t input_width = 1024;
    std::size_t hidden_width = 128;
    std::size_t n_blocks = 4;
    std::vector<std::size_t> ae_widths{256, 64, 16, 64};

    static ArchSpec residual(std::size_t width = 128, std::size_t blocks = 4, std::size_t input = 1024);
    static ArchSpec autoencoder(std::vector<std::size_t> widths = {256, 64, 16, 64}, std::size_t input = 1024);

    bool operator==(const ArchSpec&) const = default;
};

std::string to_string(ArchKind kind);
ArchKind parse_arch_kind(const std::string& text);

/// Named region of the flat parameter vector. Matrices are column-major
/// rows x cols; vectors have cols == 1. Non-trainable slices hold batch-norm
/// running statistics.
struct ParamSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 1;
    bool trainable = true;

    std::size_t size() const noexcept { return rows * cols; }
    bool operator==(const ParamSlice&) const = default;
};

/// Parameter layout implied by an architecture.
std::vector<ParamSlice> parameter_layout(const ArchSpec& arch);
std::size_t parameter_count(const ArchSpec& arch);

/// Initial parameters: dense weights and biases ~ U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)) drawn slice by slice in layout order; BN gamma = 1,
/// beta = 0, running mean = 0, running variance = 1.
std::vector<double> initial_parameters(const ArchSpec& arch, std::uint64_t seed);

/// Dense network over a flat parameter vector of scalar type T.
///
/// Inputs are input_width x batch matrices (one sample per column); the
/// output is 1 x batch. backward() accumulates into grads(), so call
/// zero_grad() between steps.
template <typename T>
class Network {
public:
    explicit Network(const ArchSpec& arch);
    Network(const ArchSpec& arch, std::span<const double> values);
    ~Network();
    Network(Network&&) noexcept;
    Network& operator=(Network&&) noexcept;

    const ArchSpec& arch() const noexcept { return arch_; }
    const std::vector<ParamSlice>& layout() const noexcept { return layout_; }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }
    std::span<T> grads() noexcept { return grads_; }
    std::span<const T> grads() const noexcept { return grads_; }

    void load(std::span<const double> values);
    std::vector<double> export_values() const;

    Matrix<T> forward(const Matrix<T>& x, Mode mode);
    void backward(const Matrix<T>& dy);
    void zero_grad();

    /// Test hook: drops the variance term from every batch-norm backward pass.
    void set_batchnorm_fault(bool on) noexcept { bn_fault_ = on; }

    class Layer;

private:
    ArchSpec arch_;
    std::vector<ParamSlice> layout_;
    // Aligned so vectorized kernels see the same layout on every run; a
    // heap-dependent offset would change rounding.
    std::vector<T, Eigen::aligned_allocator<T>> values_;
    std::vector<T, Eigen::aligned_allocator<T>> grads_;
    std::vector<std::unique_ptr<Layer>> layers_;
    bool bn_fault_ = false;
};

extern template class Network<double>;
extern template class Network<float>;

}  // namespace rfmodel::nn
