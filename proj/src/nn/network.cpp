#include "rfmodel/nn/network.hpp"

#include "rfmodel/error.hpp"
#include "rfmodel/rng.hpp"

#include <cmath>

namespace rfmodel::nn {

ArchSpec ArchSpec::residual(std::size_t width, std::size_t blocks, std::size_t input)
{
    ArchSpec a;
    a.kind = ArchKind::residual;
    a.hidden_width = width;
    a.n_blocks = blocks;
    a.input_width = input;
    return a;
}

ArchSpec ArchSpec::autoencoder(std::vector<std::size_t> widths, std::size_t input)
{
    ArchSpec a;
    a.kind = ArchKind::autoencoder;
    a.ae_widths = std::move(widths);
    a.input_width = input;
    return a;
}

std::string to_string(ArchKind kind) { return kind == ArchKind::residual ? "residual" : "autoencoder"; }

ArchKind parse_arch_kind(const std::string& text)
{
    if (text == "residual")
        return ArchKind::residual;
    if (text == "autoencoder")
        return ArchKind::autoencoder;
    throw Error(ErrorCode::config, "unknown architecture '" + text + "' (expected residual or autoencoder)");
}

namespace detail {

template <typename T>
struct Context {
    T* values;
    T* grads;
    bool bn_fault;
};

}  // namespace detail

using detail::Context;

namespace {

class LayoutBuilder {
public:
    explicit LayoutBuilder(std::vector<ParamSlice>& slices) : slices_(slices) {}

    std::size_t add(std::string name, std::size_t rows, std::size_t cols, bool trainable = true)
    {
        const std::size_t off = next_;
        slices_.push_back({std::move(name), off, rows, cols, trainable});
        next_ += rows * cols;
        return off;
    }

    std::size_t total() const { return next_; }

private:
    std::vector<ParamSlice>& slices_;
    std::size_t next_ = 0;
};

}  // namespace

template <typename T>
class Network<T>::Layer {
public:
    virtual ~Layer() = default;
    virtual Matrix<T> forward(Context<T>& ctx, const Matrix<T>& x, Mode mode) = 0;
    virtual Matrix<T> backward(Context<T>& ctx, const Matrix<T>& dy) = 0;
};

namespace {

template <typename T>
using LayerBase = typename Network<T>::Layer;

template <typename T>
class Dense final : public LayerBase<T> {
public:
    Dense(LayoutBuilder& lb, const std::string& name, std::size_t in, std::size_t out, bool input_grad = true)
        : in_(in), out_(out), input_grad_(input_grad)
    {
        w_ = lb.add(name + ".W", out, in);
        b_ = lb.add(name + ".b", out, 1);
    }

    Matrix<T> forward(Context<T>& ctx, const Matrix<T>& x, Mode mode) override
    {
        Eigen::Map<const Matrix<T>> w(ctx.values + w_, Eigen::Index(out_), Eigen::Index(in_));
        Eigen::Map<const Vector<T>> b(ctx.values + b_, Eigen::Index(out_));
        Matrix<T> y(w.rows(), x.cols());
        if (mode == Mode::eval) {
            // Column by column: the blocked product rounds differently
            // depending on batch width, and eval outputs must be a pure
            // function of each window.
            for (Eigen::Index j = 0; j < x.cols(); ++j)
                y.col(j).noalias() = w * x.col(j);
        } else {
            x_ = x;
            y.noalias() = w * x;
        }
        y.colwise() += b;
        return y;
    }

    Matrix<T> backward(Context<T>& ctx, const Matrix<T>& dy) override
    {
        Eigen::Map<Matrix<T>> dw(ctx.grads + w_, Eigen::Index(out_), Eigen::Index(in_));
        Eigen::Map<Vector<T>> db(ctx.grads + b_, Eigen::Index(out_));
        dw.noalias() += dy * x_.transpose();
        db += dy.rowwise().sum();
        if (!input_grad_)
            return {};
        Eigen::Map<const Matrix<T>> w(ctx.values + w_, Eigen::Index(out_), Eigen::Index(in_));
        return w.transpose() * dy;
    }

private:
    std::size_t in_, out_, w_ = 0, b_ = 0;
    bool input_grad_;
    Matrix<T> x_;
};

template <typename T>
class BatchNorm final : public LayerBase<T> {
public:
    BatchNorm(LayoutBuilder& lb, const std::string& name, std::size_t features) : n_(features)
    {
        gamma_ = lb.add(name + ".gamma", features, 1);
        beta_ = lb.add(name + ".beta", features, 1);
        mean_ = lb.add(name + ".running_mean", features, 1, false);
        var_ = lb.add(name + ".running_var", features, 1, false);
    }

    Matrix<T> forward(Context<T>& ctx, const Matrix<T>& x, Mode mode) override
    {
        const auto n = Eigen::Index(n_);
        return batchnorm_forward<T>(x, Eigen::Map<const Vector<T>>(ctx.values + gamma_, n),
                                    Eigen::Map<const Vector<T>>(ctx.values + beta_, n),
                                    Eigen::Map<Vector<T>>(ctx.values + mean_, n),
                                    Eigen::Map<Vector<T>>(ctx.values + var_, n), mode, cache_);
    }

    Matrix<T> backward(Context<T>& ctx, const Matrix<T>& dy) override
    {
        const auto n = Eigen::Index(n_);
        return batchnorm_backward<T>(cache_, dy, Eigen::Map<const Vector<T>>(ctx.values + gamma_, n),
                                     Eigen::Map<Vector<T>>(ctx.grads + gamma_, n),
                                     Eigen::Map<Vector<T>>(ctx.grads + beta_, n), ctx.bn_fault);
    }

private:
    std::size_t n_, gamma_ = 0, beta_ = 0, mean_ = 0, var_ = 0;
    BatchNormCache<T> cache_;
};

template <typename T>
class SiLU final : public LayerBase<T> {
public:
    Matrix<T> forward(Context<T>&, const Matrix<T>& x, Mode) override
    {
        x_ = x;
        return silu<T>(x);
    }

    Matrix<T> backward(Context<T>&, const Matrix<T>& dy) override
    {
        return dy.binaryExpr(x_, [](T g, T v) { return g * silu_grad(v); });
    }

private:
    Matrix<T> x_;
};

/// dense, BN, SiLU, dense, BN, add skip, SiLU
template <typename T>
class ResidualBlock final : public LayerBase<T> {
public:
    ResidualBlock(LayoutBuilder& lb, const std::string& name, std::size_t width)
        : d1_(lb, name + ".dense1", width, width), bn1_(lb, name + ".bn1", width),
          d2_(lb, name + ".dense2", width, width), bn2_(lb, name + ".bn2", width)
    {
    }

    Matrix<T> forward(Context<T>& ctx, const Matrix<T>& x, Mode mode) override
    {
        Matrix<T> h = d1_.forward(ctx, x, mode);
        h = bn1_.forward(ctx, h, mode);
        h = act_.forward(ctx, h, mode);
        h = d2_.forward(ctx, h, mode);
        h = bn2_.forward(ctx, h, mode);
        sum_ = h + x;
        return silu<T>(sum_);
    }

    Matrix<T> backward(Context<T>& ctx, const Matrix<T>& dy) override
    {
        const Matrix<T> ds = dy.binaryExpr(sum_, [](T g, T v) { return g * silu_grad(v); });
        Matrix<T> g = bn2_.backward(ctx, ds);
        g = d2_.backward(ctx, g);
        g = act_.backward(ctx, g);
        g = bn1_.backward(ctx, g);
        g = d1_.backward(ctx, g);
        return g + ds;
    }

private:
    Dense<T> d1_;
    BatchNorm<T> bn1_;
    SiLU<T> act_;
    Dense<T> d2_;
    BatchNorm<T> bn2_;
    Matrix<T> sum_;
};

template <typename T>
std::vector<std::unique_ptr<LayerBase<T>>> build_layers(const ArchSpec& arch, LayoutBuilder& lb)
{
    if (arch.input_width == 0)
        fail("architecture: input_width must be positive");
    std::vector<std::unique_ptr<LayerBase<T>>> layers;
    if (arch.kind == ArchKind::residual) {
        if (arch.hidden_width == 0)
            fail("architecture: hidden_width must be positive");
        // The first layer never needs dL/dinput.
        layers.push_back(std::make_unique<Dense<T>>(lb, "stem", arch.input_width, arch.hidden_width, false));
        for (std::size_t b = 0; b < arch.n_blocks; ++b)
            layers.push_back(std::make_unique<ResidualBlock<T>>(lb, "block" + std::to_string(b), arch.hidden_width));
        layers.push_back(std::make_unique<Dense<T>>(lb, "head", arch.hidden_width, 1));
    } else {
        if (arch.ae_widths.empty())
            fail("architecture: autoencoder needs at least one hidden width");
        std::size_t prev = arch.input_width;
        for (std::size_t i = 0; i < arch.ae_widths.size(); ++i) {
            const std::size_t w = arch.ae_widths[i];
            if (w == 0)
                fail("architecture: autoencoder widths must be positive");
            const std::string name = "layer" + std::to_string(i);
            layers.push_back(std::make_unique<Dense<T>>(lb, name + ".dense", prev, w, i > 0));
            layers.push_back(std::make_unique<BatchNorm<T>>(lb, name + ".bn", w));
            layers.push_back(std::make_unique<SiLU<T>>());
            prev = w;
        }
        layers.push_back(std::make_unique<Dense<T>>(lb, "head", prev, 1));
    }
    return layers;
}

}  // namespace

template <typename T>
Network<T>::Network(const ArchSpec& arch) : arch_(arch)
{
    LayoutBuilder lb(layout_);
    layers_ = build_layers<T>(arch_, lb);
    values_.assign(lb.total(), T(0));
    grads_.assign(lb.total(), T(0));
    // Neutral batch-norm statistics so an unloaded network is usable.
    for (const auto& s : layout_) {
        if (s.name.ends_with(".gamma") || s.name.ends_with(".running_var"))
            std::fill_n(values_.begin() + std::ptrdiff_t(s.offset), s.size(), T(1));
    }
}

template <typename T>
Network<T>::Network(const ArchSpec& arch, std::span<const double> values) : Network(arch)
{
    load(values);
}

template <typename T>
Network<T>::~Network() = default;
template <typename T>
Network<T>::Network(Network&&) noexcept = default;
template <typename T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <typename T>
void Network<T>::load(std::span<const double> values)
{
    if (values.size() != values_.size())
        fail("network: parameter count " + std::to_string(values.size()) + " does not match architecture (" +
             std::to_string(values_.size()) + ")");
    for (std::size_t i = 0; i < values.size(); ++i)
        values_[i] = static_cast<T>(values[i]);
}

template <typename T>
std::vector<double> Network<T>::export_values() const
{
    return {values_.begin(), values_.end()};
}

template <typename T>
Matrix<T> Network<T>::forward(const Matrix<T>& x, Mode mode)
{
    if (std::size_t(x.rows()) != arch_.input_width)
        fail("network: wrong input width " + std::to_string(x.rows()) + ", expected " +
             std::to_string(arch_.input_width));
    Context<T> ctx{values_.data(), grads_.data(), bn_fault_};
    Matrix<T> h = x;
    for (auto& layer : layers_)
        h = layer->forward(ctx, h, mode);
    return h;
}

template <typename T>
void Network<T>::backward(const Matrix<T>& dy)
{
    Context<T> ctx{values_.data(), grads_.data(), bn_fault_};
    Matrix<T> g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        g = (*it)->backward(ctx, g);
}

template <typename T>
void Network<T>::zero_grad()
{
    std::fill(grads_.begin(), grads_.end(), T(0));
}

template class Network<double>;
template class Network<float>;

std::vector<ParamSlice> parameter_layout(const ArchSpec& arch)
{
    std::vector<ParamSlice> slices;
    LayoutBuilder lb(slices);
    build_layers<double>(arch, lb);
    return slices;
}

std::size_t parameter_count(const ArchSpec& arch)
{
    const auto slices = parameter_layout(arch);
    return slices.empty() ? 0 : slices.back().offset + slices.back().size();
}

std::vector<double> initial_parameters(const ArchSpec& arch, std::uint64_t seed)
{
    const auto slices = parameter_layout(arch);
    std::vector<double> values(parameter_count(arch), 0.0);
    Rng rng(seed);
    std::size_t fan_in = 1;
    for (const auto& s : slices) {
        double* dst = values.data() + s.offset;
        if (s.name.ends_with(".W")) {
            fan_in = s.cols;
        }
        if (s.name.ends_with(".W") || s.name.ends_with(".b")) {
            // Biases share the fan-in of the weight matrix registered just before.
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (std::size_t i = 0; i < s.size(); ++i)
                dst[i] = rng.uniform(-bound, bound);
        } else if (s.name.ends_with(".gamma") || s.name.ends_with(".running_var")) {
            std::fill_n(dst, s.size(), 1.0);
        }
    }
    return values;
}

}  // namespace rfmodel::nn
