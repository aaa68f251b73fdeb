#include "ringsim/cli.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace ringsim {

using nlohmann::json;

namespace {

json scalar_to_json(const YAML::Node& n)
{
    const std::string& s = n.Scalar();
    if (n.Tag() == "!") return s; // quoted
    if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
    if (s == "true" || s == "True" || s == "TRUE") return true;
    if (s == "false" || s == "False" || s == "FALSE") return false;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    std::int64_t i = 0;
    if (auto [p, ec] = std::from_chars(b, e, i); ec == std::errc() && p == e) return i;
    std::uint64_t u = 0;
    if (auto [p, ec] = std::from_chars(b, e, u); ec == std::errc() && p == e) return u;
    double d = 0.0;
    if (auto [p, ec] = std::from_chars(b, e, d); ec == std::errc() && p == e) return d;
    return s;
}

json node_to_json(const YAML::Node& n)
{
    switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
        return nullptr;
    case YAML::NodeType::Scalar:
        return scalar_to_json(n);
    case YAML::NodeType::Sequence: {
        json a = json::array();
        for (const auto& x : n) a.push_back(node_to_json(x));
        return a;
    }
    case YAML::NodeType::Map: {
        json o = json::object();
        for (const auto& kv : n) {
            const std::string key = kv.first.as<std::string>();
            if (o.contains(key)) throw ConfigError("duplicate key '" + key + "'");
            o[key] = node_to_json(kv.second);
        }
        return o;
    }
    }
    return nullptr;
}

// Strict view of one mapping: every key must be consumed before done().
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError(where() + "expected a mapping");
    }

    bool has(const char* key) const { return j_.contains(key); }

    const json* raw(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void num(const char* key, double& out)
    {
        if (const json* v = raw(key)) {
            if (!v->is_number()) throw ConfigError(where(key) + "expected a number");
            out = v->get<double>();
        }
    }

    void integer(const char* key, int& out)
    {
        if (const json* v = raw(key)) {
            if (!v->is_number_integer()) throw ConfigError(where(key) + "expected an integer");
            out = v->get<int>();
        }
    }

    void seed(const char* key, std::uint64_t& out)
    {
        if (const json* v = raw(key)) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
                throw ConfigError(where(key) + "expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void flag(const char* key, bool& out)
    {
        if (const json* v = raw(key)) {
            if (!v->is_boolean()) throw ConfigError(where(key) + "expected true or false");
            out = v->get<bool>();
        }
    }

    void str(const char* key, std::string& out)
    {
        if (const json* v = raw(key)) {
            if (!v->is_string()) throw ConfigError(where(key) + "expected a string");
            out = v->get<std::string>();
        }
    }

    template <class T>
    void list(const char* key, std::vector<T>& out)
    {
        if (const json* v = raw(key)) {
            if (!v->is_array()) throw ConfigError(where(key) + "expected a list");
            std::vector<T> r;
            for (const auto& x : *v) {
                if constexpr (std::is_integral_v<T>) {
                    if (!x.is_number_integer()) throw ConfigError(where(key) + "expected integers");
                } else {
                    if (!x.is_number()) throw ConfigError(where(key) + "expected numbers");
                }
                r.push_back(x.get<T>());
            }
            out = std::move(r);
        }
    }

    Section sub(const char* key)
    {
        const json* v = raw(key);
        static const json empty = json::object();
        return Section(v ? *v : empty, path_.empty() ? key : path_ + "." + key);
    }

    void done() const
    {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where() + "unknown field '" + k + "'");
    }

    std::string where(const char* key = nullptr) const
    {
        std::string p = path_;
        if (key) p = p.empty() ? key : p + "." + key;
        return p.empty() ? "" : p + ": ";
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void check(bool ok, const std::string& msg)
{
    if (!ok) throw ConfigError(msg);
}

void check_channels(const std::vector<int>& heaters, std::size_t n, const std::string& name)
{
    check(heaters.size() == n, "device." + name + ": one heater channel per wavelength channel");
    std::set<int> u(heaters.begin(), heaters.end());
    check(u.size() == heaters.size(), "device." + name + ": heater channels must be distinct");
    for (int h : heaters) check(h >= 0, "device." + name + ": heater channels must be >= 0");
}

void parse_basic(Section& d, BasicDeviceParams& p)
{
    d.list("wl_channels", p.wl_channels);
    d.list("heater_channels", p.heater_channels);
    d.list("heat_bias", p.heat_bias);
    d.num("fwhm", p.fwhm);
    d.num("atten", p.atten);
    d.num("attenuation", p.attenuation);
    d.num("pretune", p.pretune);
    d.flag("zero_crosstalk", p.zero_crosstalk);
    const std::size_t n = p.wl_channels.size();
    check(n >= 1, "device.wl_channels: at least one channel");
    check_channels(p.heater_channels, n, "heater_channels");
    check(p.heat_bias.size() == n, "device.heat_bias: one value per channel");
    for (double b : p.heat_bias) check(b > 0.0, "device.heat_bias: values must be positive");
}

void parse_cascaded(Section& d, CascadedDeviceParams& p)
{
    d.list("wl_channels", p.wl_channels);
    d.list("axon_heaters", p.axon_heaters);
    d.list("dendrite_heaters", p.dendrite_heaters);
    d.num("axon_bias", p.axon_bias);
    d.num("dendrite_bias", p.dendrite_bias);
    d.num("fwhm", p.fwhm);
    d.num("atten", p.atten);
    d.num("attenuation", p.attenuation);
    d.num("axon_pretune", p.axon_pretune);
    d.num("dendrite_pretune", p.dendrite_pretune);
    d.flag("zero_crosstalk", p.zero_crosstalk);
    const std::size_t n = p.wl_channels.size();
    check(n >= 1, "device.wl_channels: at least one channel");
    check_channels(p.axon_heaters, n, "axon_heaters");
    check_channels(p.dendrite_heaters, n, "dendrite_heaters");
    for (int a : p.axon_heaters)
        for (int b : p.dendrite_heaters) check(a != b, "device: axon and dendrite heaters must be distinct");
    check(p.axon_bias > 0.0 && p.dendrite_bias > 0.0, "device: biases must be positive");
}

template <class F>
void guarded(const std::string& what, F&& f)
{
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

} // namespace

std::filesystem::path ExperimentConfig::resolve(const std::string& p) const
{
    std::filesystem::path q(p);
    return q.is_absolute() || base_dir.empty() ? q : base_dir / q;
}

json yaml_to_json(const std::string& text)
{
    try {
        return node_to_json(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("YAML parse error: ") + e.what());
    }
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir)
{
    ExperimentConfig c;
    c.base_dir = base_dir;
    Section top(j, "");
    check(top.has("schema_version"), "missing schema_version");
    top.integer("schema_version", c.schema_version);
    check(c.schema_version == kConfigSchemaVersion,
          "unsupported schema_version " + std::to_string(c.schema_version) + " (expected " +
              std::to_string(kConfigSchemaVersion) + ")");
    if (top.has("seed")) {
        std::uint64_t v = 0;
        top.seed("seed", v);
        c.seed = v;
    }

    if (top.has("device")) {
        Section d = top.sub("device");
        std::string kind;
        d.str("kind", kind);
        d.integer("count", c.device_count);
        check(c.device_count >= 1, "device.count must be >= 1");
        if (kind == "basic") {
            c.device = DeviceKind::basic;
            parse_basic(d, c.basic);
        } else if (kind == "cascaded") {
            c.device = DeviceKind::cascaded;
            parse_cascaded(d, c.cascaded);
        } else {
            throw ConfigError("device.kind must be 'basic' or 'cascaded'");
        }
        d.done();
    }

    {
        Section o = top.sub("osa");
        o.num("pump_power", c.osa.pump_power);
        o.num("spacing", c.osa.spacing);
        o.num("noise_amplitude", c.osa.noise_amplitude);
        o.done();
        guarded("osa", [&] { c.osa.validate(); });
    }
    {
        Section k = top.sub("controller");
        k.num("kp", c.controller.kp);
        k.num("precision", c.controller.precision);
        k.integer("max_iter", c.controller.max_iter);
        k.integer("avg_count", c.controller.avg_count);
        k.done();
        guarded("controller", [&] { c.controller.validate(); });
    }
    {
        Section m = top.sub("merge");
        m.num("kp_track", c.merge.kp_track);
        m.num("kp_merge", c.merge.kp_merge);
        m.num("kp_center", c.merge.kp_center);
        m.num("precision", c.merge.precision);
        m.integer("max_iter", c.merge.max_iter);
        m.integer("avg_count", c.merge.avg_count);
        m.done();
        check(c.merge.precision > 0.0 && c.merge.max_iter >= 1 && c.merge.avg_count >= 1,
              "merge: precision, max_iter and avg_count must be positive");
    }
    {
        Section t = top.sub("training");
        auto& r = c.training.run;
        t.num("eta", r.eta);
        t.integer("epochs", r.epochs);
        std::string cost = to_string(r.cost);
        t.str("cost", cost);
        guarded("training.cost", [&] { r.cost = parse_cost_mode(cost); });
        t.num("stop_accuracy", r.stop_accuracy);
        t.integer("seeds", c.training.seeds);
        t.integer("per_cluster", c.training.per_cluster);
        t.integer("surface_n", c.training.surface_n);
        Section a = t.sub("activation");
        auto& act = c.training.act;
        a.num("gamma", act.gamma);
        a.num("atten", act.atten);
        a.num("thK", act.thK);
        a.num("Ib", act.Ib);
        a.num("scale", act.scale);
        a.done();
        t.done();
        guarded("training", [&] {
            r.validate();
            act.validate();
        });
        check(c.training.seeds >= 1, "training.seeds must be >= 1");
        check(c.training.per_cluster >= 1, "training.per_cluster must be >= 1");
        check(c.training.surface_n >= 2, "training.surface_n must be >= 2");
    }
    {
        Section s = top.sub("sweep");
        s.str("params", c.sweep.params);
        s.integer("sweep_n", c.sweep.sweep_n);
        s.integer("threads", c.sweep.threads);
        s.num("max_drive_mA", c.sweep.max_drive_mA);
        s.done();
        check(c.sweep.sweep_n >= 2, "sweep.sweep_n must be >= 2");
        check(c.sweep.threads >= 0, "sweep.threads must be >= 0");
        check(c.sweep.max_drive_mA > 0.0, "sweep.max_drive_mA must be positive");
    }
    {
        Section m = top.sub("mdm");
        m.str("sweep_dir", c.mdm.sweep_dir);
        if (const json* syn = m.raw("synthetic")) {
            check(syn->is_array(), "mdm.synthetic: expected a list");
            for (std::size_t i = 0; i < syn->size(); ++i) {
                Section row((*syn)[i], "mdm.synthetic[" + std::to_string(i) + "]");
                SyntheticCoupler sc;
                row.num("width", sc.width);
                row.num("length", sc.length);
                row.num("alpha", sc.alpha);
                row.done();
                check(sc.alpha >= 0.0 && sc.alpha <= 1.0, "mdm.synthetic: alpha must lie in [0, 1]");
                c.mdm.synthetic.push_back(sc);
            }
        }
        m.num("dL", c.mdm.dL);
        std::vector<double> win{c.mdm.window.low, c.mdm.window.high};
        m.list("window", win);
        check(win.size() == 2 && win[0] > 0.0 && win[1] > win[0], "mdm.window must be [low, high] with low < high");
        c.mdm.window = {win[0], win[1]};
        m.num("spacing", c.mdm.spacing);
        m.num("noise_db", c.mdm.noise_db);
        m.done();
        check(c.mdm.dL > 0.0 && c.mdm.spacing > 0.0 && c.mdm.noise_db >= 0.0,
              "mdm: dL and spacing must be positive, noise_db >= 0");
    }
    top.done();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    if (file.extension() == ".json") {
        try {
            j = json::parse(ss.str());
        } catch (const json::exception& e) {
            throw ConfigError(std::string("JSON parse error: ") + e.what());
        }
    } else {
        j = yaml_to_json(ss.str());
    }
    return parse_config(j, file.parent_path());
}

json config_to_json(const ExperimentConfig& c)
{
    json j;
    j["schema_version"] = c.schema_version;
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    if (c.device == DeviceKind::basic) {
        const auto& p = c.basic;
        j["device"] = {{"kind", "basic"},           {"count", c.device_count},
                       {"wl_channels", p.wl_channels}, {"heater_channels", p.heater_channels},
                       {"heat_bias", p.heat_bias},  {"fwhm", p.fwhm},
                       {"atten", p.atten},          {"attenuation", p.attenuation},
                       {"pretune", p.pretune},      {"zero_crosstalk", p.zero_crosstalk}};
    } else if (c.device == DeviceKind::cascaded) {
        const auto& p = c.cascaded;
        j["device"] = {{"kind", "cascaded"},
                       {"count", c.device_count},
                       {"wl_channels", p.wl_channels},
                       {"axon_heaters", p.axon_heaters},
                       {"dendrite_heaters", p.dendrite_heaters},
                       {"axon_bias", p.axon_bias},
                       {"dendrite_bias", p.dendrite_bias},
                       {"fwhm", p.fwhm},
                       {"atten", p.atten},
                       {"attenuation", p.attenuation},
                       {"axon_pretune", p.axon_pretune},
                       {"dendrite_pretune", p.dendrite_pretune},
                       {"zero_crosstalk", p.zero_crosstalk}};
    }
    j["osa"] = {{"pump_power", c.osa.pump_power}, {"spacing", c.osa.spacing}, {"noise_amplitude", c.osa.noise_amplitude}};
    j["controller"] = {{"kp", c.controller.kp},
                       {"precision", c.controller.precision},
                       {"max_iter", c.controller.max_iter},
                       {"avg_count", c.controller.avg_count}};
    j["merge"] = {{"kp_track", c.merge.kp_track},   {"kp_merge", c.merge.kp_merge},
                  {"kp_center", c.merge.kp_center}, {"precision", c.merge.precision},
                  {"max_iter", c.merge.max_iter},   {"avg_count", c.merge.avg_count}};
    const auto& t = c.training;
    j["training"] = {{"eta", t.run.eta},
                     {"epochs", t.run.epochs},
                     {"cost", to_string(t.run.cost)},
                     {"stop_accuracy", t.run.stop_accuracy},
                     {"seeds", t.seeds},
                     {"per_cluster", t.per_cluster},
                     {"surface_n", t.surface_n},
                     {"activation",
                      {{"gamma", t.act.gamma},
                       {"atten", t.act.atten},
                       {"thK", t.act.thK},
                       {"Ib", t.act.Ib},
                       {"scale", t.act.scale}}}};
    j["sweep"] = {{"params", c.sweep.params},
                  {"sweep_n", c.sweep.sweep_n},
                  {"threads", c.sweep.threads},
                  {"max_drive_mA", c.sweep.max_drive_mA}};
    json syn = json::array();
    for (const auto& s : c.mdm.synthetic) syn.push_back({{"width", s.width}, {"length", s.length}, {"alpha", s.alpha}});
    j["mdm"] = {{"sweep_dir", c.mdm.sweep_dir},
                {"synthetic", syn},
                {"dL", c.mdm.dL},
                {"window", {c.mdm.window.low, c.mdm.window.high}},
                {"spacing", c.mdm.spacing},
                {"noise_db", c.mdm.noise_db}};
    return j;
}

std::uint64_t effective_seed(const ExperimentConfig& c, std::optional<std::uint64_t> override_seed)
{
    if (override_seed) return *override_seed;
    if (c.seed) return *c.seed;
    if (const char* env = std::getenv("RINGSIM_SEED"); env && *env) {
        std::uint64_t v = 0;
        const char* e = env + std::char_traits<char>::length(env);
        auto [p, ec] = std::from_chars(env, e, v);
        if (ec != std::errc() || p != e) throw ConfigError(std::string("RINGSIM_SEED is not an integer: ") + env);
        return v;
    }
    return 0;
}

} // namespace ringsim
