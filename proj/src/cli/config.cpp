#include "rfmodel/cli/config.hpp"

#include "rfmodel/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace rfmodel::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& msg)
{
    throw Error(ErrorCode::config, "config field '" + field + "': " + msg);
}

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            config_error(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key)
    {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void get(const std::string& key, double& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_number())
                config_error(field(key), "expected a number");
            out = v->get<double>();
        }
    }

    void get(const std::string& key, std::size_t& out)
    {
        if (const json* v = find(key))
            out = as_count(*v, field(key));
    }

    void get(const std::string& key, std::uint64_t& out, bool)
    {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned())
                config_error(field(key), "expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void get(const std::string& key, bool& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_boolean())
                config_error(field(key), "expected true or false");
            out = v->get<bool>();
        }
    }

    void get(const std::string& key, std::filesystem::path& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_string() || v->get<std::string>().empty())
                config_error(field(key), "expected a non-empty string");
            out = v->get<std::string>();
        }
    }

    void get(const std::string& key, std::vector<double>& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_array())
                config_error(field(key), "expected an array of numbers");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_number())
                    config_error(field(key) + "[" + std::to_string(i) + "]", "expected a number");
                out.push_back((*v)[i].get<double>());
            }
        }
    }

    void get(const std::string& key, std::vector<std::size_t>& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_array())
                config_error(field(key), "expected an array of integers");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i)
                out.push_back(as_count((*v)[i], field(key) + "[" + std::to_string(i) + "]"));
        }
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key()))
                config_error(field(it.key()), "unknown key");
    }

private:
    static std::size_t as_count(const json& v, const std::string& name)
    {
        if (!v.is_number_unsigned())
            config_error(name, "expected a non-negative integer");
        return v.get<std::size_t>();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <class Fn>
void with_section(Section& parent, const std::string& key, Fn&& fn)
{
    if (const json* v = parent.find(key)) {
        Section s(*v, parent.field(key));
        fn(s);
        s.finish();
    }
}

void read_dut(Section& s, dutsim::DutSpec& d)
{
    s.get("a1", d.a1);
    s.get("a3", d.a3);
    s.get("pre_filter", d.pre_filter);
    s.get("delay_samples", d.delay_samples);
    s.get("noise_sigma_v", d.noise_sigma_v);
    s.get("inverting", d.inverting);
}

void read_plan(Section& s, testbench::DatasetPlan& p)
{
    s.get("sample_rate_hz", p.sample_rate_hz);
    s.get("samples_per_file", p.samples_per_file);
    s.get("n_fft", p.n_fft);
    s.get("z_ohm", p.z_ohm);
    with_section(s, "training", [&](Section& t) {
        t.get("amplitude_vpp", p.training.amplitude_vpp);
        t.get("count", p.training.count);
    });
    with_section(s, "time_test", [&](Section& t) {
        t.get("amplitude_vpp", p.time_test.amplitude_vpp);
        if (const json* bands = t.find("bands")) {
            const std::string name = t.field("bands");
            if (!bands->is_array())
                config_error(name, "expected an array of [start_hz, end_hz] pairs");
            p.time_test.bands.clear();
            for (std::size_t i = 0; i < bands->size(); ++i) {
                const json& b = (*bands)[i];
                if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
                    config_error(name + "[" + std::to_string(i) + "]", "expected [start_hz, end_hz]");
                p.time_test.bands.push_back({b[0].get<double>(), b[1].get<double>()});
            }
        }
    });
    with_section(s, "sine", [&](Section& t) {
        t.get("amplitude_vpp", p.sine.amplitude_vpp);
        t.get("f_lo_hz", p.sine.f_lo_hz);
        t.get("f_hi_hz", p.sine.f_hi_hz);
        t.get("count", p.sine.count);
    });
    with_section(s, "dual", [&](Section& t) {
        t.get("amplitude_vpp", p.dual.amplitude_vpp);
        t.get("f_lo_hz", p.dual.f_lo_hz);
        t.get("f_hi_hz", p.dual.f_hi_hz);
        t.get("count", p.dual.count);
        t.get("spacing_bins", p.dual.spacing_bins);
    });
    if (const json* sweeps = s.find("power_sweeps")) {
        const std::string name = s.field("power_sweeps");
        if (!sweeps->is_array())
            config_error(name, "expected an array of objects");
        p.power_sweeps.clear();
        for (std::size_t i = 0; i < sweeps->size(); ++i) {
            Section t((*sweeps)[i], name + "[" + std::to_string(i) + "]");
            testbench::PowerSweepPlan ps;
            t.get("f_hz", ps.f_hz);
            t.get("p_lo_dbm", ps.p_lo_dbm);
            t.get("p_hi_dbm", ps.p_hi_dbm);
            t.get("count", ps.count);
            t.finish();
            p.power_sweeps.push_back(ps);
        }
    }
}

void read_train(Section& s, nn::TrainConfig& t, DataConfig& d)
{
    s.get("batch_size", t.batch_size);
    s.get("epochs", t.epochs);
    s.get("lr", t.lr);
    s.get("lr_final_ratio", t.lr_final_ratio);
    s.get("beta1", t.beta1);
    s.get("beta2", t.beta2);
    s.get("eps", t.eps);
    s.get("val_files", d.val_files);
    s.get("window_count", d.window_count);
    s.get("max_lag", d.max_lag);
}

void read_arch(Section& s, nn::ArchSpec& a)
{
    if (const json* k = s.find("kind")) {
        if (!k->is_string())
            config_error(s.field("kind"), "expected \"residual\" or \"autoencoder\"");
        try {
            a.kind = nn::parse_arch_kind(k->get<std::string>());
        } catch (const Error& e) {
            config_error(s.field("kind"), e.what());
        }
    }
    s.get("input_width", a.input_width);
    s.get("hidden_width", a.hidden_width);
    s.get("n_blocks", a.n_blocks);
    s.get("ae_widths", a.ae_widths);
}

// Runs a module validator and re-labels its complaint as a config error.
template <class Fn>
void check(const std::string& section, Fn&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        throw Error(ErrorCode::config, "config section '" + section + "': " + e.what());
    }
}

}  // namespace

RunConfig desk_config()
{
    RunConfig c;
    // 20 training files plus 6 held out for validation.
    c.plan.training.count = 26;
    c.train.epochs = 60;
    c.train.lr_final_ratio = 0.02;
    return c;
}

void RunConfig::validate() const
{
    check("dut", [&] { dutsim::validate(dut); });
    check("plan", [&] { testbench::validate(plan); });
    check("train", [&] { train.validate(); });
    check("arch", [&] { (void)nn::parameter_count(arch); });
    if (data.val_files == 0 || data.val_files >= plan.training.count)
        config_error("train.val_files", "must lie in [1, plan.training.count - 1] = [1, " +
                                            std::to_string(plan.training.count - 1) + "]");
    if (arch.input_width > plan.samples_per_file)
        config_error("arch.input_width", "window is longer than plan.samples_per_file");
    if (data.max_lag >= plan.samples_per_file / 2)
        config_error("train.max_lag", "must be below half of plan.samples_per_file");
    const std::size_t usable = plan.samples_per_file - data.max_lag - arch.input_width + 1;
    if (data.window_count == 0 || data.window_count > usable)
        config_error("train.window_count",
                     "must lie in [1, " + std::to_string(usable) + "] for this file length, window and max_lag");
    if (paths.data_dir.empty() || paths.model_path.empty() || paths.report_dir.empty())
        config_error("paths", "paths must be non-empty");
}

RunConfig parse_config(const std::string& json_text, const std::string& source)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::config, source + ": malformed JSON: " + e.what());
    }
    RunConfig c = desk_config();
    Section top(root, "");
    top.get("seed", c.seed, true);
    with_section(top, "dut", [&](Section& s) { read_dut(s, c.dut); });
    with_section(top, "plan", [&](Section& s) { read_plan(s, c.plan); });
    with_section(top, "train", [&](Section& s) { read_train(s, c.train, c.data); });
    with_section(top, "arch", [&](Section& s) { read_arch(s, c.arch); });
    with_section(top, "paths", [&](Section& s) {
        s.get("data_dir", c.paths.data_dir);
        s.get("model_path", c.paths.model_path);
        s.get("report_dir", c.paths.report_dir);
    });
    top.finish();
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

std::string dump_config(const RunConfig& c)
{
    ordered_json j;
    j["seed"] = c.seed;
    j["dut"] = {{"a1", c.dut.a1},
                {"a3", c.dut.a3},
                {"pre_filter", c.dut.pre_filter},
                {"delay_samples", c.dut.delay_samples},
                {"noise_sigma_v", c.dut.noise_sigma_v},
                {"inverting", c.dut.inverting}};
    const auto& p = c.plan;
    ordered_json bands = ordered_json::array();
    for (const auto& b : p.time_test.bands)
        bands.push_back({b.f_start_hz, b.f_end_hz});
    ordered_json sweeps = ordered_json::array();
    for (const auto& s : p.power_sweeps)
        sweeps.push_back({{"f_hz", s.f_hz}, {"p_lo_dbm", s.p_lo_dbm}, {"p_hi_dbm", s.p_hi_dbm}, {"count", s.count}});
    j["plan"] = {{"sample_rate_hz", p.sample_rate_hz},
                 {"samples_per_file", p.samples_per_file},
                 {"n_fft", p.n_fft},
                 {"z_ohm", p.z_ohm},
                 {"training", {{"amplitude_vpp", p.training.amplitude_vpp}, {"count", p.training.count}}},
                 {"time_test", {{"amplitude_vpp", p.time_test.amplitude_vpp}, {"bands", bands}}},
                 {"sine",
                  {{"amplitude_vpp", p.sine.amplitude_vpp},
                   {"f_lo_hz", p.sine.f_lo_hz},
                   {"f_hi_hz", p.sine.f_hi_hz},
                   {"count", p.sine.count}}},
                 {"dual",
                  {{"amplitude_vpp", p.dual.amplitude_vpp},
                   {"f_lo_hz", p.dual.f_lo_hz},
                   {"f_hi_hz", p.dual.f_hi_hz},
                   {"count", p.dual.count},
                   {"spacing_bins", p.dual.spacing_bins}}},
                 {"power_sweeps", sweeps}};
    j["train"] = {{"batch_size", c.train.batch_size},
                  {"epochs", c.train.epochs},
                  {"lr", c.train.lr},
                  {"lr_final_ratio", c.train.lr_final_ratio},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"eps", c.train.eps},
                  {"val_files", c.data.val_files},
                  {"window_count", c.data.window_count},
                  {"max_lag", c.data.max_lag}};
    j["arch"] = {{"kind", nn::to_string(c.arch.kind)},
                 {"input_width", c.arch.input_width},
                 {"hidden_width", c.arch.hidden_width},
                 {"n_blocks", c.arch.n_blocks},
                 {"ae_widths", c.arch.ae_widths}};
    j["paths"] = {{"data_dir", c.paths.data_dir.generic_string()},
                  {"model_path", c.paths.model_path.generic_string()},
                  {"report_dir", c.paths.report_dir.generic_string()}};
    return j.dump(2) + "\n";
}

}  // namespace rfmodel::cli
