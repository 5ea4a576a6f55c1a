#include "sedformer/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <tuple>

#include "sedformer/error.hpp"
#include "sedformer/log.hpp"

namespace sed {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "sedformer-dataset v1";

} // namespace

Dataset prepare_dataset(const DataConfig& cfg) {
    cfg.validate();
    std::vector<GridSeries> grid;
    Dataset ds;
    ds.rate = cfg.rate;
    ds.seed = cfg.seed;
    ds.source = cfg.source;
    if (cfg.source == "corpus") {
        const auto rows = load_csv(cfg.corpus, cfg.limit);
        grid.push_back(prepare_corpus(rows, cfg.clean, cfg.rate, cfg.seed));
    } else {
        grid = prepare_synthetic(cfg.synthetic, cfg.rate, cfg.seed);
    }
    ds.variates = grid.front().variates();
    auto split = split_windows(make_windows(grid, cfg.windows));
    if (split.train.empty()) throw DataError("no training windows; the series are too short for the window setup");
    ds.standardizer = Standardizer::fit(split.train, ds.variates);
    ds.train = std::move(split.train);
    ds.val = std::move(split.val);
    ds.test = std::move(split.test);
    return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds, const RunConfig& resolved) {
    std::filesystem::create_directories(dir);
    write_split_csv(dir / "train.csv", ds.train);
    write_split_csv(dir / "val.csv", ds.val);
    write_split_csv(dir / "test.csv", ds.test);
    json meta = {{"format", kFormat},
                 {"source", ds.source},
                 {"variates", ds.variates},
                 {"rate", ds.rate},
                 {"seed", ds.seed},
                 {"standardizer", {{"mean", ds.standardizer.mean}, {"scale", ds.standardizer.scale}}},
                 {"windows", {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}}},
                 {"data", resolved.to_json()["data"]}};
    std::ofstream out(dir / "meta.json");
    if (!out) throw Error("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
    const auto meta_path = dir / "meta.json";
    std::ifstream in(meta_path);
    if (!in) throw DataError("no prepared dataset at " + dir.string() + " (meta.json missing)");
    Dataset ds;
    try {
        const json meta = json::parse(in);
        if (meta.at("format") != kFormat) throw ParseError(meta_path.string() + ": unsupported dataset format");
        ds.source = meta.at("source").get<std::string>();
        ds.variates = meta.at("variates").get<std::size_t>();
        ds.rate = meta.at("rate").get<double>();
        ds.seed = meta.at("seed").get<std::uint64_t>();
        ds.standardizer.mean = meta.at("standardizer").at("mean").get<std::vector<double>>();
        ds.standardizer.scale = meta.at("standardizer").at("scale").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ParseError(meta_path.string() + ": " + e.what());
    }
    if (ds.standardizer.mean.size() != ds.variates || ds.standardizer.scale.size() != ds.variates)
        throw ParseError(meta_path.string() + ": standardizer size does not match variates");
    ds.train = read_split_csv(dir / "train.csv", ds.variates);
    ds.val = read_split_csv(dir / "val.csv", ds.variates);
    ds.test = read_split_csv(dir / "test.csv", ds.variates);
    return ds;
}

TrainedModel fit_model(const Dataset& ds, ModelConfig model, const TrainConfig& train_cfg,
                       const EpochCallback& on_epoch) {
    model.variates = ds.variates;
    Model m(model, train_cfg.seed);
    const auto tr = ds.scaled(ds.train);
    const auto va = ds.scaled(ds.val);
    auto result = train(m, tr, va, train_cfg, on_epoch);
    return {std::move(m), std::move(result)};
}

std::vector<EvalRow> evaluate(Model& model, const Dataset& ds) {
    std::vector<EvalRow> rows;
    const std::pair<const char*, const std::vector<ForecastWindow>*> splits[] = {{"val", &ds.val}, {"test", &ds.test}};
    for (const auto& [name, set] : splits) {
        if (set->empty()) continue;
        const auto ws = ds.scaled(*set);
        const auto truth = truths_of(ws);
        rows.push_back({"sedformer", name, metrics(predict(model, ws), truth)});
        rows.push_back({"persistence", name, metrics(persistence_forecast(ws), truth)});
        rows.push_back({"mean", name, metrics(mean_forecast(ws), truth)});
    }
    return rows;
}

void write_metrics_csv(const std::filesystem::path& path, double rate, std::span<const EvalRow> rows,
                       bool with_model_column) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << (with_model_column ? "model," : "") << "rate,split,mse,mae,n_queries\n" << std::setprecision(10);
    for (const auto& r : rows) {
        if (!with_model_column && r.model != "sedformer") continue;
        if (with_model_column) out << r.model << ',';
        out << rate << ',' << r.split << ',' << r.metrics.mse << ',' << r.metrics.mae << ',' << r.metrics.count << '\n';
    }
}

std::vector<SweepCell> run_sweep(const Dataset& ds, const ModelConfig& base, const TrainConfig& train_cfg,
                                 const SweepConfig& grids, const std::function<void(const SweepCell&)>& on_cell) {
    grids.validate();
    std::vector<SweepCell> cells;
    std::vector<std::tuple<ModelConfig, std::uint64_t, SweepCell>> done;
    const auto val = ds.scaled(ds.val);
    const auto test = ds.scaled(ds.test);

    auto run = [&](const std::string& param, double value, ModelConfig cfg, double effective) {
        cfg.variates = ds.variates;
        for (std::uint64_t seed : grids.seeds) {
            SweepCell cell;
            bool cached = false;
            for (const auto& [c, s, prev] : done)
                if (c == cfg && s == seed) {
                    cell = prev;
                    cached = true;
                    break;
                }
            if (!cached) {
                TrainConfig tc = train_cfg;
                tc.seed = seed;
                auto fitted = fit_model(ds, cfg, tc);
                cell.val = metrics(predict(fitted.model, val), truths_of(val));
                cell.test = metrics(predict(fitted.model, test), truths_of(test));
                cell.best_epoch = fitted.result.best_epoch;
                done.emplace_back(cfg, seed, cell);
            }
            cell.param = param;
            cell.value = value;
            cell.effective = effective;
            cell.seed = seed;
            cells.push_back(cell);
            if (on_cell) on_cell(cell);
        }
    };

    for (double tau : grids.tau) {
        ModelConfig cfg = base;
        double effective = tau;
        if (tau <= 1.0) {
            effective = 1.001;
            warn("sweep: tau = " + std::to_string(tau) + " is outside the model's range (tau > 1); using 1.001");
        }
        cfg.tau = effective;
        run("tau", tau, cfg, effective);
    }
    for (std::size_t s : grids.stride) {
        ModelConfig cfg = base;
        cfg.stride = s;
        run("stride", static_cast<double>(s), cfg, static_cast<double>(s));
    }
    for (std::size_t l : grids.blocks) {
        ModelConfig cfg = base;
        cfg.blocks = l;
        run("blocks", static_cast<double>(l), cfg, static_cast<double>(l));
    }
    for (std::size_t d : grids.dim) {
        ModelConfig cfg = base;
        cfg.dim = d;
        run("dim", static_cast<double>(d), cfg, static_cast<double>(d));
    }
    return cells;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepCell> cells) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "param,value,effective,seed,val_mse,test_mse,test_mae,best_epoch\n" << std::setprecision(10);
    for (const auto& c : cells)
        out << c.param << ',' << c.value << ',' << c.effective << ',' << c.seed << ',' << c.val.mse << ','
            << c.test.mse << ',' << c.test.mae << ',' << c.best_epoch << '\n';
}

} // namespace sed
