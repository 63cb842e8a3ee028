#include "rfmodel/nn/ops.hpp"

#include "rfmodel/error.hpp"

#include <string>

namespace rfmodel::nn {

template <typename T>
Matrix<T> batchnorm_forward(const Matrix<T>& x, const Eigen::Ref<const Vector<T>>& gamma,
                            const Eigen::Ref<const Vector<T>>& beta, Eigen::Ref<Vector<T>> running_mean,
                            Eigen::Ref<Vector<T>> running_var, Mode mode, BatchNormCache<T>& cache, T eps,
                            T momentum)
{
    const auto batch = x.cols();
    cache.mode = mode;
    if (mode == Mode::train) {
        if (batch < 2)
            throw Error(ErrorCode::invalid_argument, "batchnorm: degenerate batch, train mode needs >= 2 samples");
        const Vector<T> mean = x.rowwise().mean();
        const Matrix<T> centered = x.colwise() - mean;
        const Vector<T> var = centered.array().square().rowwise().mean();
        cache.inv_std = (var.array() + eps).rsqrt();
        cache.x_hat = centered.array().colwise() * cache.inv_std.array();
        const T unbias = T(batch) / T(batch - 1);
        running_mean = (T(1) - momentum) * running_mean + momentum * mean;
        running_var = (T(1) - momentum) * running_var + (momentum * unbias) * var;
    } else {
        cache.inv_std = (running_var.array() + eps).rsqrt();
        cache.x_hat = (x.colwise() - Vector<T>(running_mean)).array().colwise() * cache.inv_std.array();
    }
    Matrix<T> y = cache.x_hat.array().colwise() * gamma.array();
    y.colwise() += Vector<T>(beta);
    return y;
}

template <typename T>
Matrix<T> batchnorm_backward(const BatchNormCache<T>& cache, const Matrix<T>& dy,
                             const Eigen::Ref<const Vector<T>>& gamma, Eigen::Ref<Vector<T>> dgamma,
                             Eigen::Ref<Vector<T>> dbeta, bool drop_variance_term)
{
    dgamma += (dy.array() * cache.x_hat.array()).rowwise().sum().matrix();
    dbeta += dy.rowwise().sum();
    const Matrix<T> dx_hat = dy.array().colwise() * gamma.array();
    if (cache.mode == Mode::eval)
        return dx_hat.array().colwise() * cache.inv_std.array();

    const T n = T(dy.cols());
    const Vector<T> sum_dx_hat = dx_hat.rowwise().sum();
    const Vector<T> sum_dx_hat_xhat = (dx_hat.array() * cache.x_hat.array()).rowwise().sum();
    Matrix<T> dx = (dx_hat * n).colwise() - sum_dx_hat;
    if (!drop_variance_term)
        dx -= (cache.x_hat.array().colwise() * sum_dx_hat_xhat.array()).matrix();
    return dx.array().colwise() * (cache.inv_std.array() / n);
}

template Matrix<double> batchnorm_forward<double>(const Matrix<double>&, const Eigen::Ref<const Vector<double>>&,
                                                  const Eigen::Ref<const Vector<double>>&,
                                                  Eigen::Ref<Vector<double>>, Eigen::Ref<Vector<double>>, Mode,
                                                  BatchNormCache<double>&, double, double);
template Matrix<float> batchnorm_forward<float>(const Matrix<float>&, const Eigen::Ref<const Vector<float>>&,
                                                const Eigen::Ref<const Vector<float>>&, Eigen::Ref<Vector<float>>,
                                                Eigen::Ref<Vector<float>>, Mode, BatchNormCache<float>&, float,
                                                float);
template Matrix<double> batchnorm_backward<double>(const BatchNormCache<double>&, const Matrix<double>&,
                                                   const Eigen::Ref<const Vector<double>>&,
                                                   Eigen::Ref<Vector<double>>, Eigen::Ref<Vector<double>>, bool);
template Matrix<float> batchnorm_backward<float>(const BatchNormCache<float>&, const Matrix<float>&,
                                                 const Eigen::Ref<const Vector<float>>&, Eigen::Ref<Vector<float>>,
                                                 Eigen::Ref<Vector<float>>, bool);

double mse(std::span<const double> pred, std::span<const double> target)
{
    if (pred.size() != target.size())
        fail("mse: length mismatch (" + std::to_string(pred.size()) + " vs " + std::to_string(target.size()) + ")");
    if (pred.empty())
        fail("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

std::vector<double> mse_grad(std::span<const double> pred, std::span<const double> target)
{
    if (pred.size() != target.size() || pred.empty())
        fail("mse_grad: length mismatch or empty input");
    std::vector<double> g(pred.size());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        g[i] = scale * (pred[i] - target[i]);
    return g;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg)
{
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        fail("adam_step: shape mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i]))
            throw Error(ErrorCode::divergence,
                        "training diverged: non-finite gradient at parameter " + std::to_string(i));
    }
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

}  // namespace rfmodel::nn
