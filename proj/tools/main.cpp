// Command-line entry point wiring the data pipeline, training and evaluation
// into reproducible runs. Exit codes: 0 success, 1 usage, 2 data error,
// 3 numeric failure.

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nowcast/dataset.hpp"
#include "nowcast/eval.hpp"
#include "nowcast/manifest.hpp"
#include "nowcast/sampling.hpp"
#include "nowcast/synthetic.hpp"
#include "nowcast/train.hpp"
#include "presets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nowcast;

namespace {

std::string iso_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

RunManifest start_manifest(const std::string& command, const std::vector<std::string>& args,
                           std::uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.arguments = args;
    m.seed = seed;
    m.tool_version = kToolVersion;
    m.created_at = iso_now();
    return m;
}

std::vector<double> parse_thresholds(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw CLI::ValidationError("--thresholds", "no values given");
    return out;
}

struct ResolvedRunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string scale_name = "mmh";
    long subset_size = 0;
    json raw;
};

ResolvedRunConfig resolve_run_config(const std::string& preset, const std::string& config_path) {
    json j = json::object();
    if (!preset.empty()) {
        auto it = cli::presets().find(preset);
        if (it != cli::presets().end()) {
            j = json::parse(it->second);
        } else if (fs::exists(preset)) {
            std::ifstream in(preset);
            j = json::parse(in);
        } else {
            std::string known;
            for (const auto& [name, text] : cli::presets()) known += " " + name;
            throw DataError("unknown preset '" + preset + "'; available:" + known);
        }
    }
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw DataError("cannot read config file: " + config_path);
        json file = json::parse(in);
        // config file overrides preset keys
        for (auto& [key, value] : file.items()) j[key] = value;
    }

    ResolvedRunConfig rc;
    rc.raw = j;
    if (j.contains("model")) rc.model = ModelConfig::from_json(j["model"].dump());
    if (j.contains("scale")) rc.scale_name = j["scale"].get<std::string>();
    rc.subset_size = j.value("subset_size", 0l);
    if (j.contains("train")) {
        const json& t = j["train"];
        rc.train.learning_rate = t.value("learning_rate", rc.train.learning_rate);
        rc.train.batch_size = t.value("batch_size", rc.train.batch_size);
        rc.train.grad_accumulation = t.value("grad_accumulation", rc.train.grad_accumulation);
        rc.train.epochs = t.value("epochs", rc.train.epochs);
        rc.train.log_every = t.value("log_every", rc.train.log_every);
        if (t.contains("loss"))
            rc.train.loss = TrainConfig::loss_from_name(t["loss"].get<std::string>());
        if (t.contains("thresholds"))
            rc.train.thresholds = t["thresholds"].get<std::vector<double>>();
    }
    return rc;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string out;
    std::uint64_t seed = 0;
    int regions = 1;
    int slots = 96;
    double cells = 14.0;
    double missing = 0.0;
    bool tiny = false;
};

int run_generate(const GenerateArgs& a, const std::vector<std::string>& argv) {
    DirLock lock(a.out);
    RunManifest manifest = start_manifest("generate", argv, a.seed);

    SyntheticConfig cfg;
    if (a.tiny) cfg.geom = Geometry::tiny();
    cfg.mean_active_cells = a.cells;
    cfg.missing_slot_prob = a.missing;

    for (int r = 0; r < a.regions; ++r) {
        const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(r);
        RegionArchive arc = generate_synthetic_region(seed, a.slots, cfg);
        const std::string path = (fs::path(a.out) / ("region_" + arc.region_id + ".h5")).string();
        save_region_archive(arc, path);
        manifest.add_artifact(path);
        std::printf("wrote %s (%d slots)\n", path.c_str(), a.slots);
    }
    manifest.save((fs::path(a.out) / "manifest_generate.json").string());
    return 0;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleArgs {
    std::string dataset;
    std::string out;
    std::uint64_t seed = 0;
    double q_min = 1e-6;
    long target_size = 0;
    int stride = 1;
    bool tiny = false;
};

int run_sample(const SampleArgs& a, const std::vector<std::string>& argv) {
    DirLock lock(a.out);
    RunManifest manifest = start_manifest("sample", argv, a.seed);

    const Geometry geom = a.tiny ? Geometry::tiny() : Geometry{};
    auto paths = list_region_files(a.dataset);
    std::vector<std::pair<std::string, long>> regions;
    std::vector<RegionSaturation> saturations;
    for (const auto& path : paths) {
        ArchiveReader reader(path);
        regions.emplace_back(reader.region_id(), reader.n_slots());
        saturations.push_back(compute_region_saturation(
            reader.n_slots(), reader.patch(),
            [&](long slot, float* rates, std::uint8_t* valid) {
                reader.read_radar_slot(slot, rates, valid);
            }));
    }
    SequenceIndex index = build_sequence_index(regions, a.stride, geom);
    if (index.entries.empty()) throw DataError("dataset has no admissible windows");

    SamplingConfig cfg;
    cfg.seed = a.seed;
    cfg.q_min = a.q_min;
    cfg.target_size = a.target_size;
    SubsetResult result = build_subset(index, saturations, cfg);

    const std::string subset_path = (fs::path(a.out) / "subset.tsv").string();
    const std::string log_path = (fs::path(a.out) / "decisions.tsv").string();
    save_subset(result, index, subset_path);
    save_decision_log(result.decisions, log_path);
    manifest.add_artifact(subset_path);
    manifest.add_artifact(log_path);
    manifest.save((fs::path(a.out) / "manifest_sample.json").string());
    std::printf("candidates %zu accepted %zu\n", index.size(), result.accepted.size());
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string dataset, subset, val_dataset, out, preset, config;
    std::uint64_t seed = 0;
    int val_stride = 16;
    int norm_samples = 64;
    double lr = -1.0;
    int epochs = -1;
    int batch = -1;
    int accum = -1;
    std::string loss, scale, thresholds;
    bool tiny = false;
};

int run_train(const TrainArgs& a, const std::vector<std::string>& argv) {
    DirLock lock(a.out);
    RunManifest manifest = start_manifest("train", argv, a.seed);

    ResolvedRunConfig rc = resolve_run_config(a.preset, a.config);
    if (a.tiny) {
        Geometry g = Geometry::tiny();
        g.out_len = rc.model.geom.out_len <= 8 ? rc.model.geom.out_len : 4;
        rc.model.geom = g;
        rc.model.base_width = std::min(rc.model.base_width, 8);
        rc.model.depth = std::min(rc.model.depth, 2);
    }
    if (a.lr >= 0) rc.train.learning_rate = a.lr;
    if (a.epochs > 0) rc.train.epochs = a.epochs;
    if (a.batch > 0) rc.train.batch_size = a.batch;
    if (a.accum > 0) rc.train.grad_accumulation = a.accum;
    if (!a.loss.empty()) rc.train.loss = TrainConfig::loss_from_name(a.loss);
    if (!a.scale.empty()) rc.scale_name = a.scale;
    if (!a.thresholds.empty()) rc.train.thresholds = parse_thresholds(a.thresholds);
    rc.train.seed = a.seed;
    rc.train.out_dir = a.out;
    rc.model.validate();

    auto paths = list_region_files(a.dataset);
    std::vector<std::string> region_ids;
    for (const auto& p : paths) region_ids.push_back(ArchiveReader(p).region_id());
    auto entries = load_subset(a.subset, region_ids);
    if (entries.empty()) throw DataError("subset file has no entries: " + a.subset);
    if (rc.subset_size > 0 && static_cast<long>(entries.size()) > rc.subset_size)
        entries.resize(static_cast<std::size_t>(rc.subset_size));
    ArchiveSampleSource train_data(paths, entries, rc.model.geom);

    std::unique_ptr<ArchiveSampleSource> val_data;
    if (!a.val_dataset.empty()) {
        auto val_paths = list_region_files(a.val_dataset);
        val_data = std::make_unique<ArchiveSampleSource>(
            val_paths, strided_entries(val_paths, a.val_stride, rc.model.geom), rc.model.geom);
    } else {
        val_data = std::make_unique<ArchiveSampleSource>(
            paths, std::vector<SequenceIndex::Entry>{}, rc.model.geom);
    }

    std::vector<SampleRecord> norm_set;
    for (std::size_t i = 0; i < train_data.size() && i < static_cast<std::size_t>(a.norm_samples);
         ++i)
        norm_set.push_back(train_data.get(i));
    NormalizationStats stats = compute_normalization(norm_set);
    fs::create_directories(a.out);
    const std::string stats_path = (fs::path(a.out) / "normalization.txt").string();
    stats.save(stats_path);

    BucketScale scale = make_scale(rc.scale_name);
    Model model(rc.model);
    model.init_params(a.seed);

    // resolved configuration for reproducibility
    {
        json run;
        run["model"] = json::parse(rc.model.to_json());
        run["train"] = {{"learning_rate", rc.train.learning_rate},
                        {"batch_size", rc.train.batch_size},
                        {"grad_accumulation", rc.train.grad_accumulation},
                        {"epochs", rc.train.epochs},
                        {"loss", TrainConfig::loss_name(rc.train.loss)},
                        {"thresholds", rc.train.thresholds},
                        {"seed", a.seed}};
        run["scale"] = rc.scale_name;
        run["samples"] = entries.size();
        std::ofstream out(fs::path(a.out) / "run_config.json");
        out << run.dump(2) << "\n";
    }

    TrainResult result = train(model, scale, stats, train_data, *val_data, rc.train);

    std::printf("steps %ld  skipped %ld  final loss %.6g  best val csi %.6g\n",
                result.optimizer_steps, result.skipped_batches, result.last_loss,
                result.best_val_csi);
    manifest.add_artifact(stats_path);
    if (!result.best_checkpoint.empty()) manifest.add_artifact(result.best_checkpoint);
    if (!result.final_checkpoint.empty()) manifest.add_artifact(result.final_checkpoint);
    manifest.add_artifact((fs::path(a.out) / "metrics_log.tsv").string());
    manifest.save((fs::path(a.out) / "manifest_train.json").string());
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint, dataset, out, baseline, thresholds;
    int stride = 16;
    int lt = 32;
    bool oracle = false;
    bool tiny = false;
};

int run_evaluate(const EvalArgs& a, const std::vector<std::string>& argv) {
    DirLock lock(a.out);
    RunManifest manifest = start_manifest("evaluate", argv, 0);
    std::vector<double> taus =
        a.thresholds.empty() ? default_thresholds() : parse_thresholds(a.thresholds);

    auto paths = list_region_files(a.dataset);
    CsiReport report;

    if (!a.checkpoint.empty()) {
        CheckpointMeta meta;
        Model model = load_checkpoint(a.checkpoint, &meta);
        ArchiveSampleSource data(paths, strided_entries(paths, a.stride, meta.config.geom),
                                 meta.config.geom);
        report = evaluate_model(model, meta.scale, meta.stats, provider_over(data), taus);
    } else {
        Geometry geom;
        if (a.tiny) {
            geom = Geometry::tiny();
        } else {
            geom.out_len = a.lt;
        }
        ArchiveSampleSource data(paths, strided_entries(paths, a.stride, geom), geom);
        if (a.oracle) {
            report = evaluate_forecaster(
                provider_over(data), [](const SampleRecord& s) { return s.target; }, taus,
                geom.out_len);
        } else if (!a.baseline.empty()) {
            BaselineKind kind = baseline_from_name(a.baseline);
            report = evaluate_forecaster(
                provider_over(data),
                [&](const SampleRecord& s) { return baseline_forecast(s, kind, geom); }, taus,
                geom.out_len);
        } else {
            throw DataError("evaluate needs --checkpoint, --baseline or --oracle");
        }
    }

    emit_report(report, a.out);
    manifest.add_artifact((fs::path(a.out) / "metrics.tsv").string());
    manifest.save((fs::path(a.out) / "manifest_evaluate.json").string());
    std::printf("mean csi %.6g over %zu thresholds\n", report.mean_csi, taus.size());
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string checkpoint, dataset, region, out;
    int start_slot = 0;
    bool probabilistic = false;
};

int run_predict(const PredictArgs& a, const std::vector<std::string>& argv) {
    DirLock lock(a.out);
    RunManifest manifest = start_manifest("predict", argv, 0);

    CheckpointMeta meta;
    Model model = load_checkpoint(a.checkpoint, &meta);
    auto paths = list_region_files(a.dataset);

    std::unique_ptr<ArchiveReader> reader;
    for (const auto& p : paths) {
        auto r = std::make_unique<ArchiveReader>(p);
        if (a.region.empty() || r->region_id() == a.region) {
            reader = std::move(r);
            break;
        }
    }
    if (!reader) throw DataError("region '" + a.region + "' not found in " + a.dataset);
    if (a.start_slot < 0 || a.start_slot + meta.config.geom.window() > reader->n_slots()) {
        std::cerr << "usage error: --start-slot " << a.start_slot << " out of range (window needs "
                  << meta.config.geom.window() << " of " << reader->n_slots() << " slots)\n";
        return 1;
    }

    SampleRecord sample = reader->materialize(a.start_slot, meta.config.geom);
    normalize(sample, meta.stats);
    ForecastTensor forecast = predict(model, sample);

    std::string path;
    if (a.probabilistic) {
        path = (fs::path(a.out) / "forecast_probs.h5").string();
        save_tensor_h5(path, "probs", forecast.probs);
    } else {
        path = (fs::path(a.out) / "forecast_rates.h5").string();
        save_tensor_h5(path, "rates", decode_rates(forecast, meta.scale));
    }
    manifest.add_artifact(path);
    manifest.save((fs::path(a.out) / "manifest_predict.json").string());
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"precipitation nowcasting workbench"};
    app.require_subcommand(1);
    std::vector<std::string> raw_args(argv + 1, argv + argc);

    GenerateArgs g;
    CLI::App* gen = app.add_subcommand("generate", "create a synthetic dataset");
    gen->add_option("--out", g.out, "output directory")->required();
    gen->add_option("--seed", g.seed, "base seed; region r uses seed+r");
    gen->add_option("--regions", g.regions, "number of regions")->check(CLI::PositiveNumber);
    gen->add_option("--slots", g.slots, "time slots per region")->check(CLI::PositiveNumber);
    gen->add_option("--cells", g.cells, "mean active rain cells");
    gen->add_option("--missing", g.missing, "per-slot probability of an invalid radar disk");
    gen->add_flag("--tiny", g.tiny, "tiny grid for smoke tests");

    SampleArgs s;
    CLI::App* smp = app.add_subcommand("sample", "importance-sample a training subset");
    smp->add_option("--dataset", s.dataset, "dataset directory")->required();
    smp->add_option("--out", s.out, "output directory")->required();
    smp->add_option("--seed", s.seed, "sampling seed");
    smp->add_option("--q-min", s.q_min, "minimum inclusion probability");
    smp->add_option("--target-size", s.target_size, "subset size cap (0 = no cap)");
    smp->add_option("--stride", s.stride, "window stride")->check(CLI::PositiveNumber);
    smp->add_flag("--tiny", s.tiny, "tiny grid geometry");

    TrainArgs t;
    CLI::App* trn = app.add_subcommand("train", "train a model on a frozen subset");
    trn->add_option("--dataset", t.dataset, "dataset directory")->required();
    trn->add_option("--subset", t.subset, "frozen subset file")->required();
    trn->add_option("--val-dataset", t.val_dataset, "held-out dataset directory");
    trn->add_option("--val-stride", t.val_stride, "validation window stride");
    trn->add_option("--out", t.out, "output directory")->required();
    trn->add_option("--preset", t.preset, "named preset or preset file");
    trn->add_option("--config", t.config, "run config JSON (overrides preset)");
    trn->add_option("--seed", t.seed, "training seed");
    trn->add_option("--lr", t.lr, "learning rate override");
    trn->add_option("--epochs", t.epochs, "epoch override");
    trn->add_option("--batch", t.batch, "batch size override");
    trn->add_option("--accum", t.accum, "gradient accumulation override");
    trn->add_option("--loss", t.loss, "loss override: weighted_ce | ce | mse");
    trn->add_option("--scale", t.scale, "bucket scale: mmh | mmh_w");
    trn->add_option("--thresholds", t.thresholds, "validation CSI thresholds, comma separated");
    trn->add_option("--norm-samples", t.norm_samples, "samples used for normalization stats");
    trn->add_flag("--tiny", t.tiny, "tiny geometry fixture");

    EvalArgs e;
    CLI::App* evl = app.add_subcommand("evaluate", "score a checkpoint or baseline");
    evl->add_option("--checkpoint", e.checkpoint, "checkpoint file");
    evl->add_option("--dataset", e.dataset, "dataset directory")->required();
    evl->add_option("--out", e.out, "output directory")->required();
    evl->add_option("--baseline", e.baseline,
                    "baseline instead of a checkpoint: zero | sat_threshold");
    evl->add_flag("--oracle", e.oracle, "evaluate the perfect-oracle forecaster");
    evl->add_option("--thresholds", e.thresholds, "CSI thresholds, comma separated");
    evl->add_option("--stride", e.stride, "evaluation window stride");
    evl->add_option("--lt", e.lt, "lead times for baselines/oracle");
    evl->add_flag("--tiny", e.tiny, "tiny geometry fixture");

    PredictArgs p;
    CLI::App* prd = app.add_subcommand("predict", "forecast one sample window");
    prd->add_option("--checkpoint", p.checkpoint, "checkpoint file")->required();
    prd->add_option("--dataset", p.dataset, "dataset directory")->required();
    prd->add_option("--region", p.region, "region id (default: first region)");
    prd->add_option("--start-slot", p.start_slot, "window start slot");
    prd->add_option("--out", p.out, "output directory")->required();
    prd->add_flag("--probabilistic", p.probabilistic, "write class probabilities instead of rates");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 1;
    }

    try {
        if (gen->parsed()) return run_generate(g, raw_args);
        if (smp->parsed()) return run_sample(s, raw_args);
        if (trn->parsed()) return run_train(t, raw_args);
        if (evl->parsed()) return run_evaluate(e, raw_args);
        if (prd->parsed()) return run_predict(p, raw_args);
    } catch (const NumericError& err) {
        std::cerr << "numeric failure: " << err.what() << "\n";
        return 3;
    } catch (const DataError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 1;
}
