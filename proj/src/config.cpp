#include "sedformer/config.hpp"

#include <fstream>
#include <set>

#include "sedformer/error.hpp"

namespace sed {

using nlohmann::json;

namespace {

template <class F> void fields(CleanConfig& c, F&& f) {
    f("window", c.window);
    f("gap_cap", c.gap_cap);
    f("outlier", c.outlier);
}

template <class F> void fields(WindowConfig& c, F&& f) {
    f("history", c.history);
    f("horizon", c.horizon);
    f("stride", c.stride);
}

template <class F> void fields(SyntheticConfig& c, F&& f) {
    f("series", c.series);
    f("variates", c.variates);
    f("length", c.length);
    f("period", c.period);
    f("noise", c.noise);
    f("seed", c.seed);
}

template <class F> void fields(DataConfig& c, F&& f) {
    f("source", c.source);
    f("corpus", c.corpus);
    f("limit", c.limit);
    f("rate", c.rate);
    f("seed", c.seed);
    f("clean", c.clean);
    f("windows", c.windows);
    f("synthetic", c.synthetic);
}

template <class F> void fields(ModelConfig& c, F&& f) {
    f("variates", c.variates);
    f("channels", c.channels);
    f("kernel", c.kernel);
    f("stride", c.stride);
    f("dim", c.dim);
    f("heads", c.heads);
    f("blocks", c.blocks);
    f("tau", c.tau);
    f("v_th", c.v_th);
    f("alpha_ste", c.alpha_ste);
    f("span", c.span);
    f("bn_momentum", c.bn_momentum);
    f("shared_time_embedding", c.shared_time_embedding);
    f("first_gap", c.first_gap);
}

template <class F> void fields(AdamConfig& c, F&& f) {
    f("lr", c.lr);
    f("beta1", c.beta1);
    f("beta2", c.beta2);
    f("eps", c.eps);
    f("grad_clip", c.grad_clip);
}

template <class F> void fields(TrainConfig& c, F&& f) {
    f("adam", c.adam);
    f("batch_size", c.batch_size);
    f("epochs", c.epochs);
    f("seed", c.seed);
}

template <class F> void fields(VizConfig& c, F&& f) {
    f("horizon", c.horizon);
    f("split", c.split);
    f("sparse", c.sparse);
    f("dense", c.dense);
    f("grid", c.grid);
    f("noise", c.noise);
    f("seed", c.seed);
    f("delta_threshold", c.delta_threshold);
    f("kernel", c.kernel);
    f("conv_threshold", c.conv_threshold);
    f("tau", c.tau);
    f("gamma", c.gamma);
    f("theta", c.theta);
    f("v_th", c.v_th);
}

template <class F> void fields(EnergyModel& c, F&& f) {
    f("e_mac", c.e_mac);
    f("e_add", c.e_add);
    f("e_acc", c.e_acc);
    f("e_cmp", c.e_cmp);
    f("e_rd", c.e_rd);
    f("e_wr", c.e_wr);
}

template <class F> void fields(SweepConfig& c, F&& f) {
    f("tau", c.tau);
    f("stride", c.stride);
    f("blocks", c.blocks);
    f("dim", c.dim);
    f("seeds", c.seeds);
}

template <class F> void fields(RunConfig& c, F&& f) {
    f("data", c.data);
    f("model", c.model);
    f("train", c.train);
    f("viz", c.viz);
    f("energy", c.energy);
    f("sweep", c.sweep);
}

template <class T>
concept Section = requires(T& t) { fields(t, [](const char*, auto&) {}); };

template <class T> json dump(const T& v);

template <class T> json dump_value(const T& v) {
    if constexpr (Section<T>) return dump(v);
    else if constexpr (std::is_same_v<T, neuron::FirstGap>) return v == neuron::FirstGap::zero ? "zero" : "median";
    else if constexpr (std::is_same_v<T, std::optional<double>>) return v ? json(*v) : json(nullptr);
    else return json(v);
}

template <class T> json dump(const T& v) {
    json j = json::object();
    fields(const_cast<T&>(v), [&](const char* name, auto& field) { j[name] = dump_value(field); });
    return j;
}

template <class T> void read_section(T& v, const json& j, const std::string& path);

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ConfigError("config key '" + path + "': " + what);
}

template <class T> void load_value(T& v, const json& j, const std::string& path) {
    if constexpr (Section<T>) {
        read_section(v, j, path);
    } else if constexpr (std::is_same_v<T, neuron::FirstGap>) {
        if (j == "zero") v = neuron::FirstGap::zero;
        else if (j == "median") v = neuron::FirstGap::median;
        else bad(path, "expected \"zero\" or \"median\"");
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
        if (j.is_null()) v.reset();
        else if (j.is_number()) v = j.get<double>();
        else bad(path, "expected a number or null");
    } else if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) bad(path, "expected a boolean");
        v = j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!j.is_string()) bad(path, "expected a string");
        v = j.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!j.is_number()) bad(path, "expected a number");
        v = j.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
        if (!j.is_number_unsigned()) bad(path, "expected a non-negative integer");
        v = j.get<T>();
    } else {
        if (!j.is_array()) bad(path, "expected an array");
        T out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            typename T::value_type e{};
            load_value(e, j[i], path + "[" + std::to_string(i) + "]");
            out.push_back(e);
        }
        v = std::move(out);
    }
}

template <class T> void read_section(T& v, const json& j, const std::string& path) {
    if (!j.is_object()) bad(path.empty() ? "<root>" : path, "expected an object");
    std::set<std::string> known;
    fields(v, [&](const char* name, auto& field) {
        known.insert(name);
        const auto it = j.find(name);
        if (it != j.end()) load_value(field, *it, path.empty() ? std::string(name) : path + "." + name);
    });
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) bad(path.empty() ? key : path + "." + key, "unknown key");
}

} // namespace

void DataConfig::validate() const {
    if (source != "synthetic" && source != "corpus") throw ConfigError("data.source must be synthetic or corpus");
    if (source == "corpus" && corpus.empty()) throw ConfigError("data.corpus is required when data.source is corpus");
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("data.rate must lie in [0,1]");
    clean.validate();
    windows.validate();
    if (synthetic.series == 0 || synthetic.variates == 0) throw ConfigError("data.synthetic needs series and variates");
}

void SweepConfig::validate() const {
    if (tau.empty() && stride.empty() && blocks.empty() && dim.empty()) throw ConfigError("sweep: every grid is empty");
    if (seeds.empty()) throw ConfigError("sweep: at least one seed is required");
}

void RunConfig::validate() const {
    data.validate();
    model.validate();
    train.validate();
    viz.validate();
    energy.validate();
    sweep.validate();
}

json RunConfig::to_json() const { return dump(*this); }

void RunConfig::merge(const json& j) { read_section(*this, j, ""); }

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    RunConfig c;
    c.merge(j);
    return c;
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

} // namespace sed
