#include "sedformer/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>

#include "sedformer/error.hpp"
#include "sedformer/log.hpp"
#include "sedformer/pipeline.hpp"

namespace sed {

namespace {

namespace fs = std::filesystem;

struct ModelFlags {
    double tau = 0.0, lr = 0.0;
    std::size_t stride = 0, blocks = 0, dim = 0, heads = 0, channels = 0, epochs = 0, batch = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> apply;

    void add(CLI::App* cmd) {
        apply.emplace_back(cmd->add_option("--tau", tau, "EA-LIF time constant (> 1)"),
                           [this](RunConfig& c) { c.model.tau = tau; });
        apply.emplace_back(cmd->add_option("--stride", stride, "pooling stride")->check(CLI::PositiveNumber),
                           [this](RunConfig& c) { c.model.stride = stride; });
        apply.emplace_back(cmd->add_option("--blocks", blocks, "number of blocks")->check(CLI::PositiveNumber),
                           [this](RunConfig& c) { c.model.blocks = blocks; });
        apply.emplace_back(cmd->add_option("--dim", dim, "model width")->check(CLI::PositiveNumber),
                           [this](RunConfig& c) { c.model.dim = dim; });
        apply.emplace_back(cmd->add_option("--heads", heads, "attention heads")->check(CLI::PositiveNumber),
                           [this](RunConfig& c) { c.model.heads = heads; });
        apply.emplace_back(cmd->add_option("--channels", channels, "encoder channels")->check(CLI::PositiveNumber),
                           [this](RunConfig& c) { c.model.channels = channels; });
        apply.emplace_back(cmd->add_option("--epochs", epochs, "training epochs"),
                           [this](RunConfig& c) { c.train.epochs = epochs; });
        apply.emplace_back(cmd->add_option("--lr", lr, "Adam learning rate")->check(CLI::NonNegativeNumber),
                           [this](RunConfig& c) { c.train.adam.lr = lr; });
        apply.emplace_back(cmd->add_option("--batch", batch, "windows per batch")->check(CLI::PositiveNumber),
                           [this](RunConfig& c) { c.train.batch_size = batch; });
        apply.emplace_back(cmd->add_option("--seed", seed, "training seed"),
                           [this](RunConfig& c) { c.train.seed = seed; });
    }

    void operator()(RunConfig& c) const {
        for (const auto& [opt, f] : apply)
            if (opt->count() > 0) f(c);
    }
};

fs::path output_dir(const std::string& flag, const std::string& command) {
    if (!flag.empty()) return flag;
    if (const char* root = std::getenv("SEDFORMER_OUT"); root && *root) return fs::path(root) / command;
    return fs::path("runs") / command;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

RunConfig checkpoint_config(const fs::path& checkpoint) {
    if (!fs::exists(checkpoint)) throw DataError("checkpoint not found: " + checkpoint.string());
    const auto sidecar = checkpoint.parent_path() / "config.json";
    if (!fs::exists(sidecar)) throw DataError("checkpoint config not found: " + sidecar.string());
    return RunConfig::load(sidecar);
}

Model load_model(const fs::path& checkpoint, const Dataset& ds) {
    RunConfig cc = checkpoint_config(checkpoint);
    if (cc.model.variates != ds.variates)
        throw DataError("checkpoint expects " + std::to_string(cc.model.variates) + " variates, dataset has " +
                        std::to_string(ds.variates));
    Model m(cc.model, cc.train.seed);
    load_checkpoint(checkpoint, m);
    return m;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Event-synchronous spiking forecaster for irregular multivariate time series", "sedformer"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, out_flag;
    app.add_option("--config", config_path, "JSON config overriding the defaults")->check(CLI::ExistingFile);
    app.add_option("--out", out_flag, "output directory (default: $SEDFORMER_OUT/<command> or runs/<command>)");

    auto* prepare = app.add_subcommand("prepare", "clean, sparsify and window a corpus or the synthetic suite");
    std::string corpus;
    std::size_t limit = 0;
    double rate = 0.5;
    std::uint64_t data_seed = 0;
    auto* o_corpus = prepare->add_option("--corpus", corpus, "CSV corpus (rows are series, columns are dates)");
    auto* o_limit = prepare->add_option("--limit", limit, "keep the first N series");
    auto* o_rate = prepare->add_option("--rate", rate, "sparsifying rate r")->check(CLI::Range(0.0, 1.0));
    auto* o_dseed = prepare->add_option("--seed", data_seed, "mask seed");

    std::string data_dir, checkpoint;
    ModelFlags train_flags, sweep_flags;
    auto* train_cmd = app.add_subcommand("train", "train on a prepared dataset");
    train_cmd->add_option("--data", data_dir, "prepared dataset directory")->required();
    train_flags.add(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and the naive baselines");
    eval_cmd->add_option("--data", data_dir, "prepared dataset directory")->required();
    auto* o_ckpt = eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint");
    bool random_init = false;
    eval_cmd->add_flag("--random-init", random_init, "evaluate an untrained model built from the config");

    auto* viz_cmd = app.add_subcommand("viz", "spike rasters of the Delta, Conv and SED-SE encoders");

    auto* energy_cmd = app.add_subcommand("energy", "operation counts and energy estimate of a checkpoint");
    energy_cmd->add_option("--data", data_dir, "prepared dataset directory")->required();
    energy_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    std::string split = "test";
    std::size_t first = 0, count = 1;
    energy_cmd->add_option("--split", split, "split to measure")->check(CLI::IsMember({"train", "val", "test"}));
    energy_cmd->add_option("--window", first, "first window index");
    energy_cmd->add_option("--windows", count, "number of windows")->check(CLI::PositiveNumber);

    auto* sweep_cmd = app.add_subcommand("sweep", "one-at-a-time hyperparameter sweep over tau, stride, blocks, dim");
    sweep_cmd->add_option("--data", data_dir, "prepared dataset directory")->required();
    sweep_flags.add(sweep_cmd);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);

        if (*prepare) {
            if (o_corpus->count()) {
                cfg.data.source = "corpus";
                cfg.data.corpus = corpus;
            }
            if (o_limit->count()) cfg.data.limit = limit;
            if (o_rate->count()) cfg.data.rate = rate;
            if (o_dseed->count()) cfg.data.seed = data_seed;
            cfg.data.validate();
            const auto dir = output_dir(out_flag, "prepare");
            const auto ds = prepare_dataset(cfg.data);
            write_dataset(dir, ds, cfg);
            cfg.save(dir / "config.json");
            out << "prepared " << ds.train.size() << '/' << ds.val.size() << '/' << ds.test.size()
                << " train/val/test windows, " << ds.variates << " variates, rate " << ds.rate << " -> "
                << dir.string() << '\n';
        } else if (*train_cmd) {
            train_flags(cfg);
            const auto ds = read_dataset(data_dir);
            cfg.model.variates = ds.variates;
            cfg.validate();
            const auto dir = output_dir(out_flag, "train");
            fs::create_directories(dir);
            auto fitted = fit_model(ds, cfg.model, cfg.train, [&](const EpochRecord& r) {
                out << "epoch " << r.epoch << " train_loss " << r.train_loss << " val_mse " << r.val_mse << '\n';
            });
            save_checkpoint(dir / "model.ckpt", fitted.model);
            cfg.save(dir / "config.json");
            write_history_csv(dir / "history.csv", fitted.result.history);
            out << "best epoch " << fitted.result.best_epoch << ", val mse " << fitted.result.best_val_mse << " -> "
                << (dir / "model.ckpt").string() << '\n';
        } else if (*eval_cmd) {
            const auto ds = read_dataset(data_dir);
            std::optional<Model> model;
            if (random_init) {
                cfg.model.variates = ds.variates;
                cfg.validate();
                model.emplace(cfg.model, cfg.train.seed);
            } else {
                if (!o_ckpt->count()) throw UsageError("eval needs --checkpoint or --random-init");
                model.emplace(load_model(checkpoint, ds));
                cfg = checkpoint_config(checkpoint);
            }
            const auto dir = output_dir(out_flag, "eval");
            fs::create_directories(dir);
            const auto rows = evaluate(*model, ds);
            write_metrics_csv(dir / "metrics.csv", ds.rate, rows, false);
            write_metrics_csv(dir / "baselines.csv", ds.rate, rows, true);
            cfg.save(dir / "config.json");
            for (const auto& r : rows)
                out << std::left << std::setw(12) << r.model << std::setw(6) << r.split << " mse " << r.metrics.mse
                    << " mae " << r.metrics.mae << '\n';
        } else if (*viz_cmd) {
            cfg.viz.validate();
            const auto dir = output_dir(out_flag, "viz");
            fs::create_directories(dir);
            const auto series = synth_viz_series(cfg.viz);
            const auto trains = baseline_encoders(series, cfg.viz);
            write_raster_csv(dir / "raster.csv", series, trains);
            write_series_csv(dir / "series.csv", series);
            write_text(dir / "raster.svg", raster_svg(series, trains, cfg.viz));
            cfg.save(dir / "config.json");
            auto n = [](const std::vector<std::uint8_t>& s) { return std::count(s.begin(), s.end(), 1); };
            out << "spikes: delta " << n(trains.delta) << ", conv " << n(trains.conv) << ", sed-se " << n(trains.sedse)
                << " -> " << dir.string() << '\n';
        } else if (*energy_cmd) {
            cfg.energy.validate();
            const auto ds = read_dataset(data_dir);
            Model model = load_model(checkpoint, ds);
            const auto& set = split == "train" ? ds.train : split == "val" ? ds.val : ds.test;
            if (first >= set.size()) throw UsageError("window index out of range for split " + split);
            const auto picked = std::span<const ForecastWindow>(set).subspan(first, std::min(count, set.size() - first));
            const auto scaled = ds.scaled(picked);
            const auto ops = count_model_ops(model, scaled, cfg.data.windows.history);
            const auto report = energy_estimate(ops.layers, cfg.energy, ops.reference);
            const auto dir = output_dir(out_flag, "energy");
            fs::create_directories(dir);
            write_text(dir / "energy.json", report.json());
            write_text(dir / "energy.txt", report.table());
            cfg.save(dir / "config.json");
            out << report.table();
        } else if (*sweep_cmd) {
            sweep_flags(cfg);
            const auto ds = read_dataset(data_dir);
            cfg.model.variates = ds.variates;
            cfg.validate();
            const auto dir = output_dir(out_flag, "sweep");
            fs::create_directories(dir);
            const auto cells = run_sweep(ds, cfg.model, cfg.train, cfg.sweep, [&](const SweepCell& c) {
                out << c.param << '=' << c.value << " seed " << c.seed << " test_mse " << c.test.mse << '\n';
            });
            write_sweep_csv(dir / "sweep.csv", cells);
            cfg.save(dir / "config.json");
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace sed
