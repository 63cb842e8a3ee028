#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace rfmodel::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// SiLU

template <typename T>
T sigmoid(T x)
{
    if (x >= T(0))
        return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

/// x * sigmoid(x)
template <typename T>
T silu(T x)
{
    return x * sigmoid(x);
}

/// d/dx silu(x) = s (1 + x (1 - s)) with s = sigmoid(x)
template <typename T>
T silu_grad(T x)
{
    const T s = sigmoid(x);
    return s * (T(1) + x * (T(1) - s));
}

template <typename T>
Matrix<T> silu(const Matrix<T>& x)
{
    return x.unaryExpr([](T v) { return silu(v); });
}

// ---------------------------------------------------------------------------
// Batch normalization over the columns (samples) of a features x batch matrix.

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormCache {
    Matrix<T> x_hat;
    Vector<T> inv_std;
    Mode mode = Mode::train;
};

/// Train mode uses batch mean/variance (biased) and folds them into the
/// running statistics with an exponential moving average; the running
/// variance receives the unbiased batch variance. Eval mode uses the running
/// statistics only.
template <typename T>
Matrix<T> batchnorm_forward(const Matrix<T>& x, const Eigen::Ref<const Vector<T>>& gamma,
                            const Eigen::Ref<const Vector<T>>& beta, Eigen::Ref<Vector<T>> running_mean,
                            Eigen::Ref<Vector<T>> running_var, Mode mode, BatchNormCache<T>& cache,
                            T eps = T(kBatchNormEps), T momentum = T(kBatchNormMomentum));

/// Returns dL/dx and accumulates dL/dgamma, dL/dbeta.
template <typename T>
Matrix<T> batchnorm_backward(const BatchNormCache<T>& cache, const Matrix<T>& dy,
                             const Eigen::Ref<const Vector<T>>& gamma, Eigen::Ref<Vector<T>> dgamma,
                             Eigen::Ref<Vector<T>> dbeta, bool drop_variance_term = false);

// ---------------------------------------------------------------------------
// Loss

/// Mean squared error. Throws on length mismatch or empty input.
double mse(std::span<const double> pred, std::span<const double> target);

/// Gradient of mse with respect to pred: 2 (pred - target) / N.
std::vector<double> mse_grad(std::span<const double> pred, std::span<const double> target);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update:
///   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
///   theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Throws a divergence error if any gradient is not finite.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg);

}  // namespace rfmodel::nn
