#include "sedformer/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "sedformer/error.hpp"
#include "sedformer/log.hpp"

namespace sed {

void AdamConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0,1)");
    if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("gradient clip must be positive");
}

Adam::Adam(std::vector<Var> params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg.validate();
    for (const Var& p : params_) {
        m_.emplace_back(p.shape(), 0.0);
        v_.emplace_back(p.shape(), 0.0);
    }
}

double grad_norm(std::span<const Var> params) {
    double s = 0.0;
    for (const Var& p : params)
        if (p.has_grad())
            for (double g : p.grad().data()) s += g * g;
    return std::sqrt(s);
}

void Adam::step() {
    ++t_;
    double clip = 1.0;
    if (cfg_.grad_clip) {
        const double n = grad_norm(params_);
        if (n > *cfg_.grad_clip) clip = *cfg_.grad_clip / n;
    }
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Var& p = params_[i];
        Tensor& w = p.mutable_value();
        const bool has = p.has_grad();
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double g = has ? p.grad()[j] * clip : 0.0;
            m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g;
            v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g * g;
            w[j] -= cfg_.lr * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + cfg_.eps);
        }
    }
}

void TrainConfig::validate() const {
    adam.validate();
    if (batch_size == 0) throw ConfigError("batch size must be at least 1");
}

std::vector<double> truths_of(std::span<const ForecastWindow> windows) {
    std::vector<double> out;
    for (const auto& w : windows)
        for (const auto& q : w.queries) out.push_back(q.truth);
    return out;
}

std::vector<double> predict(Model& model, std::span<const ForecastWindow> windows, std::size_t batch_size) {
    std::vector<double> out;
    for (std::size_t i = 0; i < windows.size(); i += batch_size) {
        const auto batch = windows.subspan(i, std::min(batch_size, windows.size() - i));
        const auto r = model.forward(batch, NormMode::eval);
        const auto& p = r.predictions.value();
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return out;
}

namespace {

using Snapshot = std::vector<Tensor>;

Snapshot snapshot(Model& model) {
    Snapshot s;
    for (auto& [n, t] : model.state()) s.push_back(*t);
    return s;
}

void restore(Model& model, const Snapshot& s) {
    auto st = model.state();
    for (std::size_t i = 0; i < st.size(); ++i) *st[i].second = s[i];
}

} // namespace

TrainResult train(Model& model, std::span<const ForecastWindow> train_set, std::span<const ForecastWindow> val,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.empty()) throw DataError("training set is empty");
    auto params = model.parameters();
    Adam opt(params, cfg.adam);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.best_val_mse = INFINITY;
    Snapshot best;
    std::vector<ForecastWindow> batch;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
            batch.clear();
            for (std::size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j)
                batch.push_back(train_set[order[j]]);
            try {
                model.zero_grad();
                auto r = model.forward(batch, NormMode::train);
                Var loss = mse_loss(r.predictions, r.truths, r.window_of, r.variate_of, model.config().variates);
                backward(loss);
                opt.step();
                for (const Var& p : params)
                    if (!p.value().all_finite()) throw NumericError("non-finite parameter after update");
                loss_sum += loss.item();
                ++batches;
            } catch (const NumericError& e) {
                throw NumericError("training aborted at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batches + 1) + ": " + e.what());
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(batches);
        if (!val.empty()) {
            const auto m = metrics(predict(model, val, cfg.batch_size), truths_of(val));
            rec.val_mse = m.mse;
            rec.val_mae = m.mae;
            if (m.mse < result.best_val_mse) {
                result.best_val_mse = m.mse;
                result.best_epoch = epoch;
                best = snapshot(model);
            }
        } else {
            rec.val_mse = rec.val_mae = NAN;
        }
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    if (!best.empty()) restore(model, best);
    if (val.empty()) result.best_epoch = cfg.epochs;
    model.zero_grad();
    return result;
}

void save_checkpoint(const std::filesystem::path& path, Model& model) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out << "sedformer-checkpoint v1\n";
    out << std::setprecision(17);
    for (auto& [name, t] : model.state()) {
        out << name << ' ' << t->rank();
        for (auto d : t->shape()) out << ' ' << d;
        out << '\n';
        for (std::size_t i = 0; i < t->size(); ++i) out << (i ? " " : "") << (*t)[i];
        out << '\n';
    }
    if (!out) throw Error("failed writing checkpoint " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, Model& model) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::string header;
    std::getline(in, header);
    if (header != "sedformer-checkpoint v1") throw ParseError(path.string() + ": not a v1 checkpoint");
    std::map<std::string, Tensor> entries;
    std::string name;
    while (in >> name) {
        std::size_t rank = 0;
        if (!(in >> rank)) throw ParseError(path.string() + ": bad rank for " + name);
        Shape shape(rank);
        for (auto& d : shape)
            if (!(in >> d)) throw ParseError(path.string() + ": bad shape for " + name);
        Tensor t(shape);
        for (double& v : t.data())
            if (!(in >> v)) throw ParseError(path.string() + ": truncated values for " + name);
        entries.emplace(name, std::move(t));
    }
    for (auto& [n, t] : model.state()) {
        auto it = entries.find(n);
        if (it == entries.end()) throw ParseError(path.string() + ": missing tensor " + n);
        if (it->second.shape() != t->shape())
            throw ParseError(path.string() + ": tensor " + n + " has shape " + shape_string(it->second.shape()) +
                             ", model expects " + shape_string(t->shape()));
        *t = it->second;
    }
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "epoch,train_loss,val_mse,val_mae\n" << std::setprecision(10);
    for (const auto& r : history) out << r.epoch << ',' << r.train_loss << ',' << r.val_mse << ',' << r.val_mae << '\n';
}

} // namespace sed
