#include "rfmodel/nn/model.hpp"

#include "rfmodel/error.hpp"
#include "rfmodel/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace rfmodel::nn {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void TrainConfig::validate() const
{
    if (batch_size < 2)
        throw Error(ErrorCode::config, "train: batch_size must be >= 2 (batch norm needs batch statistics)");
    if (epochs == 0)
        throw Error(ErrorCode::config, "train: epochs must be >= 1");
    if (!(lr > 0))
        throw Error(ErrorCode::config, "train: lr must be positive");
    if (!(lr_final_ratio > 0 && lr_final_ratio <= 1))
        throw Error(ErrorCode::config, "train: lr_final_ratio must lie in (0, 1]");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
        throw Error(ErrorCode::config, "train: beta1 and beta2 must lie in [0, 1)");
    if (!(eps >= 0))
        throw Error(ErrorCode::config, "train: eps must be >= 0");
}

double TrainConfig::lr_at(std::size_t epoch) const
{
    if (epochs <= 1 || lr_final_ratio == 1.0)
        return lr;
    const double t = static_cast<double>(epoch - 1) / static_cast<double>(epochs - 1);
    return lr * (lr_final_ratio + (1.0 - lr_final_ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

void ModelArtifact::validate() const
{
    if (!(slices == parameter_layout(arch)))
        fail("model: parameter slices do not match the architecture");
    if (parameters.size() != parameter_count(arch))
        fail("model: parameter count does not match the architecture");
    for (const auto& s : slices) {
        if (!s.name.ends_with(".running_var"))
            continue;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!(parameters[s.offset + i] > 0))
                fail("model: running variance in '" + s.name + "' is not positive");
        }
    }
}

std::span<const double> ModelArtifact::slice(const std::string& name) const
{
    for (const auto& s : slices) {
        if (s.name == name)
            return {parameters.data() + s.offset, s.size()};
    }
    fail("model: no parameter slice named '" + name + "'");
}

ModelArtifact make_model(const ArchSpec& arch, const pipeline::NormStats& stats, std::uint64_t seed)
{
    ModelArtifact m;
    m.arch = arch;
    m.slices = parameter_layout(arch);
    m.parameters = initial_parameters(arch, seed);
    m.norm_stats = stats;
    return m;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kModelFormat = "rfmodel-model";
constexpr int kModelVersion = 1;

ordered_json arch_to_json(const ArchSpec& a)
{
    ordered_json j;
    j["kind"] = to_string(a.kind);
    j["input_width"] = a.input_width;
    j["hidden_width"] = a.hidden_width;
    j["n_blocks"] = a.n_blocks;
    j["ae_widths"] = a.ae_widths;
    return j;
}

ArchSpec arch_from_json(const nlohmann::json& j)
{
    ArchSpec a;
    a.kind = parse_arch_kind(j.at("kind").get<std::string>());
    a.input_width = j.at("input_width").get<std::size_t>();
    a.hidden_width = j.at("hidden_width").get<std::size_t>();
    a.n_blocks = j.at("n_blocks").get<std::size_t>();
    a.ae_widths = j.at("ae_widths").get<std::vector<std::size_t>>();
    return a;
}

}  // namespace

void save_model(const ModelArtifact& model, const fs::path& path)
{
    model.validate();
    ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["arch"] = arch_to_json(model.arch);
    j["norm_stats"] = {{"in_min", model.norm_stats.in_min},
                       {"in_max", model.norm_stats.in_max},
                       {"out_min", model.norm_stats.out_min},
                       {"out_max", model.norm_stats.out_max}};
    j["best_epoch"] = model.best_epoch;
    auto& hist = j["history"] = ordered_json::array();
    for (const auto& r : model.history)
        hist.push_back({{"epoch", r.epoch}, {"train_mse", r.train_mse}, {"val_mse", r.val_mse}});
    auto& sl = j["slices"] = ordered_json::array();
    for (const auto& s : model.slices)
        sl.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols},
                      {"trainable", s.trainable}});
    j["parameters"] = model.parameters;

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    out << j.dump() << '\n';
    if (!out)
        throw Error(ErrorCode::io, "write to '" + path.string() + "' failed");
}

ModelArtifact load_model(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open model '" + path.string() + "'");
    ModelArtifact m;
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("format").get<std::string>() != kModelFormat)
            throw Error(ErrorCode::parse, "'" + path.string() + "' is not an rfmodel model file");
        if (j.at("version").get<int>() != kModelVersion)
            throw Error(ErrorCode::parse, "'" + path.string() + "': unsupported model version");
        m.arch = arch_from_json(j.at("arch"));
        const auto& ns = j.at("norm_stats");
        m.norm_stats = {ns.at("in_min").get<double>(), ns.at("in_max").get<double>(), ns.at("out_min").get<double>(),
                        ns.at("out_max").get<double>()};
        m.best_epoch = j.at("best_epoch").get<std::size_t>();
        for (const auto& r : j.at("history"))
            m.history.push_back({r.at("epoch").get<std::size_t>(), r.at("train_mse").get<double>(),
                                 r.at("val_mse").get<double>()});
        for (const auto& s : j.at("slices"))
            m.slices.push_back({s.at("name").get<std::string>(), s.at("offset").get<std::size_t>(),
                                s.at("rows").get<std::size_t>(), s.at("cols").get<std::size_t>(),
                                s.at("trainable").get<bool>()});
        m.parameters = j.at("parameters").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, "'" + path.string() + "': " + e.what());
    }
    try {
        m.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::parse, "'" + path.string() + "': " + e.what());
    }
    return m;
}

// ---------------------------------------------------------------------------
// Training

namespace {

Matrix<double> gather(const pipeline::WindowedDataset& ds, std::span<const std::size_t> rows)
{
    const auto w = Eigen::Index(ds.window);
    Matrix<double> x(w, Eigen::Index(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        x.col(Eigen::Index(j)) = Eigen::Map<const Vector<double>>(ds.inputs.data() + rows[j] * ds.window, w);
    return x;
}

double dataset_mse(Network<double>& net, const pipeline::WindowedDataset& ds)
{
    constexpr std::size_t chunk = 1024;
    double acc = 0.0;
    std::vector<std::size_t> rows;
    for (std::size_t begin = 0; begin < ds.size(); begin += chunk) {
        const std::size_t end = std::min(ds.size(), begin + chunk);
        rows.resize(end - begin);
        std::iota(rows.begin(), rows.end(), begin);
        const Matrix<double> pred = net.forward(gather(ds, rows), Mode::eval);
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const double d = pred(0, Eigen::Index(j)) - ds.targets[rows[j]];
            acc += d * d;
        }
    }
    return acc / static_cast<double>(ds.size());
}

void check_dataset(const ArchSpec& arch, const pipeline::WindowedDataset& ds, const char* what)
{
    if (ds.size() == 0)
        fail(std::string("train: ") + what + " set is empty");
    if (ds.window != arch.input_width)
        fail(std::string("train: ") + what + " window width " + std::to_string(ds.window) +
             " does not match architecture input width " + std::to_string(arch.input_width));
}

}  // namespace

ModelArtifact train(const ArchSpec& arch, const pipeline::WindowedDataset& train_set,
                    const pipeline::WindowedDataset& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch)
{
    cfg.validate();
    check_dataset(arch, train_set, "training");
    check_dataset(arch, val_set, "validation");
    if (train_set.size() < 2)
        fail("train: need at least two training rows");

    ModelArtifact model = make_model(arch, train_set.stats, cfg.seed);
    Network<double> net(arch, model.parameters);
    std::vector<bool> trainable(model.parameters.size(), false);
    for (const auto& s : model.slices)
        std::fill_n(trainable.begin() + std::ptrdiff_t(s.offset), s.size(), s.trainable);

    AdamState adam(model.parameters.size());
    auto adam_cfg = cfg.adam();
    std::vector<std::size_t> order(train_set.size());
    std::vector<double> grads(model.parameters.size());
    double best_val = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        adam_cfg.lr = cfg.lr_at(epoch);
        Rng rng(cfg.seed, 1000 + epoch);
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            if (end - begin < 2)
                break;
            const std::span<const std::size_t> rows(order.data() + begin, end - begin);
            const Matrix<double> x = gather(train_set, rows);
            Matrix<double> y(1, Eigen::Index(rows.size()));
            for (std::size_t j = 0; j < rows.size(); ++j)
                y(0, Eigen::Index(j)) = train_set.targets[rows[j]];

            const Matrix<double> pred = net.forward(x, Mode::train);
            const Matrix<double> diff = pred - y;
            const double loss = diff.squaredNorm() / static_cast<double>(rows.size());
            if (!std::isfinite(loss))
                throw Error(ErrorCode::divergence, "training diverged at epoch " + std::to_string(epoch) +
                                                       ": loss is not finite");
            loss_sum += loss * static_cast<double>(rows.size());
            seen += rows.size();

            net.zero_grad();
            net.backward(diff * (2.0 / static_cast<double>(rows.size())));
            const auto g = net.grads();
            for (std::size_t i = 0; i < grads.size(); ++i)
                grads[i] = trainable[i] ? g[i] : 0.0;
            try {
                adam_step(net.values(), grads, adam, adam_cfg);
            } catch (const Error& e) {
                throw Error(e.code(), "epoch " + std::to_string(epoch) + ": " + e.what());
            }
        }

        EpochRecord rec{epoch, loss_sum / static_cast<double>(seen), dataset_mse(net, val_set)};
        if (!std::isfinite(rec.val_mse))
            throw Error(ErrorCode::divergence,
                        "training diverged at epoch " + std::to_string(epoch) + ": validation loss is not finite");
        model.history.push_back(rec);
        if (rec.val_mse < best_val) {
            best_val = rec.val_mse;
            model.best_epoch = epoch;
            model.parameters = net.export_values();
        }
        if (on_epoch)
            on_epoch(rec);
    }
    return model;
}

double evaluate_mse(const ModelArtifact& model, const pipeline::WindowedDataset& data)
{
    check_dataset(model.arch, data, "evaluation");
    Network<double> net(model.arch, model.parameters);
    return dataset_mse(net, data);
}

// ---------------------------------------------------------------------------
// Inference

Predictor::Predictor(const ModelArtifact& model) : model_(model), net_(model.arch, model.parameters)
{
    model_.validate();
}

std::vector<double> Predictor::predict_normalized(std::span<const double> windows)
{
    const std::size_t w = model_.arch.input_width;
    if (windows.size() % w != 0)
        fail("predict: input is not a whole number of windows of width " + std::to_string(w));
    const std::size_t count = windows.size() / w;
    std::vector<double> out(count);
    constexpr std::size_t chunk = 512;
    for (std::size_t begin = 0; begin < count; begin += chunk) {
        const std::size_t m = std::min(chunk, count - begin);
        // Copied into owned (aligned) storage; see Network::values_.
        const Matrix<double> x =
            Eigen::Map<const Matrix<double>>(windows.data() + begin * w, Eigen::Index(w), Eigen::Index(m));
        const Matrix<double> y = net_.forward(x, Mode::eval);
        for (std::size_t j = 0; j < m; ++j)
            out[begin + j] = y(0, Eigen::Index(j));
    }
    return out;
}

Waveform Predictor::predict_sequence(const Waveform& stimulus, std::size_t n, std::size_t start)
{
    const std::size_t w = model_.arch.input_width;
    if (start + 1 < w)
        fail("predict_sequence: start index " + std::to_string(start) + " has fewer than " + std::to_string(w) +
             " samples of history");
    if (start + n > stimulus.size())
        fail("predict_sequence: insufficient stimulus length, need " + std::to_string(start + n) + " samples, have " +
             std::to_string(stimulus.size()));

    const auto& stats = model_.norm_stats;
    std::vector<double> normalized(stimulus.size());
    for (std::size_t i = 0; i < stimulus.size(); ++i)
        normalized[i] = stats.normalize_input(stimulus.samples[i]);

    Waveform out;
    out.sample_rate_hz = stimulus.sample_rate_hz;
    out.samples.resize(n);
    constexpr std::size_t chunk = 512;
    std::vector<double> windows;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t m = std::min(chunk, n - begin);
        windows.resize(m * w);
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t i = start + begin + j;
            std::copy_n(normalized.begin() + std::ptrdiff_t(i + 1 - w), w, windows.begin() + std::ptrdiff_t(j * w));
        }
        const auto y = predict_normalized(windows);
        for (std::size_t j = 0; j < m; ++j)
            out.samples[begin + j] = stats.denormalize_output(y[j]);
    }
    return out;
}

Waveform predict_sequence(const ModelArtifact& model, const Waveform& stimulus, std::size_t n,
                          std::optional<std::size_t> start)
{
    Predictor p(model);
    return p.predict_sequence(stimulus, n, start.value_or(model.arch.input_width - 1));
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport grad_check(const ArchSpec& arch, double eps, const GradCheckOptions& options)
{
    if (!(eps > 0))
        fail("grad_check: step must be positive");
    Network<double> net(arch, initial_parameters(arch, options.seed));
    net.set_batchnorm_fault(options.inject_batchnorm_fault);

    // Move batch-norm affine parameters away from (1, 0) so their gradients
    // are exercised in general position.
    Rng rng(options.seed, 1);
    for (const auto& s : net.layout()) {
        double* v = net.values().data() + s.offset;
        if (s.name.ends_with(".gamma")) {
            for (std::size_t i = 0; i < s.size(); ++i)
                v[i] = rng.uniform(0.5, 1.5);
        } else if (s.name.ends_with(".beta")) {
            for (std::size_t i = 0; i < s.size(); ++i)
                v[i] = rng.uniform(-0.5, 0.5);
        }
    }

    const auto batch = Eigen::Index(options.batch);
    Matrix<double> x(Eigen::Index(arch.input_width), batch);
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            x(r, c) = rng.uniform(0.0, 1.0);
    // Targets sit a small distance from the outputs. Finite-difference
    // roundoff scales with the loss, and with O(1) residuals it would swamp
    // gradients that are exactly zero (a dense bias feeding batch norm).
    Matrix<double> y = net.forward(x, Mode::train);
    for (Eigen::Index c = 0; c < batch; ++c)
        y(0, c) += rng.uniform(-options.residual_scale, options.residual_scale);

    auto loss = [&]() {
        const Matrix<double> d = net.forward(x, Mode::train) - y;
        return d.squaredNorm() / static_cast<double>(batch);
    };

    net.zero_grad();
    const Matrix<double> diff = net.forward(x, Mode::train) - y;
    net.backward(diff * (2.0 / static_cast<double>(batch)));
    const std::vector<double> analytic(net.grads().begin(), net.grads().end());

    GradCheckReport report;
    for (const auto& s : net.layout()) {
        if (!s.trainable)
            continue;
        double slice_max = 0.0;
        for (std::size_t i = s.offset; i < s.offset + s.size(); ++i) {
            double& p = net.values()[i];
            const double saved = p;
            // Fourth-order central stencil.
            auto at = [&](double offset) {
                p = saved + offset;
                return loss();
            };
            const double numeric = (8.0 * (at(eps) - at(-eps)) - (at(2 * eps) - at(-2 * eps))) / (12.0 * eps);
            p = saved;
            const double a = analytic[i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-7});
            slice_max = std::max(slice_max, rel);
            report.max_abs_grad = std::max(report.max_abs_grad, std::abs(a));
            ++report.checked;
        }
        report.per_slice.emplace_back(s.name, slice_max);
        if (slice_max > report.max_rel_error || report.worst_slice.empty()) {
            report.max_rel_error = std::max(report.max_rel_error, slice_max);
            if (slice_max >= report.max_rel_error)
                report.worst_slice = s.name;
        }
    }
    return report;
}

}  // namespace rfmodel::nn
