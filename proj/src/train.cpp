#include "nowcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "nowcast/loss.hpp"
#include "nowcast/optimizer.hpp"

namespace nowcast {

const char* TrainConfig::loss_name(Loss l) {
    switch (l) {
        case Loss::weighted_ce: return "weighted_ce";
        case Loss::ce: return "ce";
        case Loss::mse: return "mse";
    }
    return "weighted_ce";
}

TrainConfig::Loss TrainConfig::loss_from_name(const std::string& name) {
    if (name == "weighted_ce") return Loss::weighted_ce;
    if (name == "ce") return Loss::ce;
    if (name == "mse") return Loss::mse;
    throw DataError("unknown loss '" + name + "'");
}

namespace {

struct Batch {
    Tensor input;                  // assembled [B, C_in, in, in]
    TensorT<std::uint8_t> classes; // [B, T', P, P]
    Tensor rates;                  // [B, T', P, P] (mse only)
    Mask valid;                    // [B, T', P, P]
    std::vector<std::size_t> ids;
    bool any_valid = false;
};

Batch make_batch(const SampleSource& data, const std::vector<std::size_t>& ids,
                 const std::vector<int>& leads, const ModelConfig& mc, const BucketScale& scale,
                 const NormalizationStats& stats, bool need_rates) {
    Batch batch;
    batch.ids = ids;
    const long b = static_cast<long>(ids.size());
    const long t_out = mc.out_time();
    const long p = mc.geom.patch;
    batch.classes = TensorT<std::uint8_t>({b, t_out, p, p});
    batch.valid = Mask({b, t_out, p, p});
    if (need_rates) batch.rates = Tensor({b, t_out, p, p});

    std::vector<SampleRecord> samples(ids.size());
    std::vector<const SampleRecord*> ptrs(ids.size());
    const std::size_t frame = static_cast<std::size_t>(p) * p;
    for (std::size_t n = 0; n < ids.size(); ++n) {
        samples[n] = data.get(ids[n]);
        normalize(samples[n], stats);
        ptrs[n] = &samples[n];
        // target frames: all leads, or the single conditioned lead
        for (long t = 0; t < t_out; ++t) {
            const long src_t = mc.clt_enabled ? leads[n] : t;
            const float* rate = samples[n].target.data() + src_t * static_cast<long>(frame);
            const std::uint8_t* msk = samples[n].target_valid.data() + src_t * static_cast<long>(frame);
            std::uint8_t* cls =
                batch.classes.data() + (static_cast<long>(n) * t_out + t) * static_cast<long>(frame);
            std::uint8_t* vld =
                batch.valid.data() + (static_cast<long>(n) * t_out + t) * static_cast<long>(frame);
            std::copy(msk, msk + frame, vld);
            for (std::size_t i = 0; i < frame; ++i) {
                cls[i] = static_cast<std::uint8_t>(vld[i] ? bucketize(rate[i], scale) : 0);
                batch.any_valid = batch.any_valid || vld[i];
            }
            if (need_rates)
                std::copy(rate, rate + frame,
                          batch.rates.data() + (static_cast<long>(n) * t_out + t) * static_cast<long>(frame));
        }
    }
    batch.input = assemble_batch(ptrs, mc, mc.clt_enabled ? leads : std::vector<int>{});
    return batch;
}

LossResult<float> batch_loss(Model& model, Batch& batch, const BucketScale& scale,
                             TrainConfig::Loss kind, bool train_mode, bool want_grad) {
    Tensor logits = model.forward_upsampled(batch.input, train_mode);
    LossResult<float> res;
    switch (kind) {
        case TrainConfig::Loss::weighted_ce:
            res = weighted_cross_entropy(logits, batch.classes, batch.valid, scale.weights,
                                         want_grad);
            break;
        case TrainConfig::Loss::ce: {
            std::vector<double> unit(scale.weights.size(), 1.0);
            res = weighted_cross_entropy(logits, batch.classes, batch.valid, unit, want_grad);
            break;
        }
        case TrainConfig::Loss::mse:
            res = mse_decoded_loss(logits, batch.rates, batch.valid, scale, want_grad);
            break;
    }
    if (want_grad) model.backward_upsampled(res.dlogits);
    res.dlogits = Tensor();
    return res;
}

struct ValStats {
    double loss = 0.0;
    CsiReport report;
};

ValStats validate_pass(Model& model, const BucketScale& scale, const NormalizationStats& stats,
                       const SampleSource& val_data, const TrainConfig& cfg) {
    ValStats out;
    const ModelConfig& mc = model.config();
    ConfusionCounts counts(cfg.thresholds, mc.geom.out_len);
    double loss_sum = 0.0, loss_weight = 0.0;
    for (std::size_t i = 0; i < val_data.size(); ++i) {
        SampleRecord raw = val_data.get(i);
        SampleRecord s = raw;
        normalize(s, stats);
        ForecastTensor f = predict(model, s);
        Tensor rates = decode_rates(f, scale);
        accumulate(counts, rates, raw.target, raw.target_valid);

        // per-sample loss against the same targets (conditioned models score
        // every lead through predict already)
        if (!mc.clt_enabled) {
            std::vector<std::size_t> one{i};
            std::vector<int> no_leads;
            Batch b = make_batch(val_data, one, no_leads, mc, scale, stats,
                                 cfg.loss == TrainConfig::Loss::mse);
            if (b.any_valid) {
                LossResult<float> lr = batch_loss(model, b, scale, cfg.loss, false, false);
                loss_sum += lr.sum;
                loss_weight += lr.weight;
            }
        }
    }
    out.loss = loss_weight > 0 ? loss_sum / loss_weight : std::numeric_limits<double>::quiet_NaN();
    out.report = csi(counts);
    return out;
}

std::string format_row(long step, const char* split, double loss, const CsiReport* report) {
    char buf[64];
    std::string row = std::to_string(step);
    row += '\t';
    row += split;
    std::snprintf(buf, sizeof buf, "\t%.9g", loss);
    row += buf;
    if (report) {
        std::snprintf(buf, sizeof buf, "\t%.9g", report->mean_csi);
        row += buf;
        for (double v : report->csi_by_threshold) {
            if (std::isnan(v))
                row += "\tundef";
            else {
                std::snprintf(buf, sizeof buf, "\t%.9g", v);
                row += buf;
            }
        }
    } else {
        row += "\t-";
    }
    return row;
}

}  // namespace

TrainResult train(Model& model, const BucketScale& scale, const NormalizationStats& stats,
                  const SampleSource& train_data, const SampleSource& val_data,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_data.size() == 0) throw DataError("train: empty dataset");
    const ModelConfig& mc = model.config();
    if (static_cast<int>(scale.weights.size()) != mc.classes)
        throw DataError("train: scale class count != model classes");

    TrainResult result;
    Adam<float> opt(model.params(), cfg.learning_rate);
    model.zero_grad();

    std::ofstream log_file;
    auto log_row = [&](const std::string& row) {
        result.metric_log.push_back(row);
        if (log_file.is_open()) log_file << row << "\n" << std::flush;
    };
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        log_file.open(std::filesystem::path(cfg.out_dir) / "metrics_log.tsv");
        std::string header = "step\tsplit\tloss\tcsi_mean";
        for (double t : cfg.thresholds) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "\tcsi_%.9g", t);
            header += buf;
        }
        log_row(header);
    }

    const bool need_rates = cfg.loss == TrainConfig::Loss::mse;
    std::vector<double> recent_losses;
    double acc_sum = 0.0, acc_weight = 0.0;
    int acc_count = 0;
    double logged_sum = 0.0, logged_weight = 0.0;
    bool first_recorded = false;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(train_data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(splitmix64(cfg.seed ^ 0xa076bc9b6f22c127ULL) + static_cast<std::uint64_t>(epoch));
        shuffle_indices(order, shuffle_rng);

        std::vector<int> epoch_leads(order.size(), -1);
        if (mc.clt_enabled) {
            Rng lead_rng(splitmix64(cfg.seed ^ 0x2545f4914f6cdd1dULL) + static_cast<std::uint64_t>(epoch));
            for (auto& l : epoch_leads) l = static_cast<int>(lead_rng.below(static_cast<std::uint64_t>(mc.geom.out_len)));
        }

        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> ids(order.begin() + static_cast<long>(pos),
                                         order.begin() + static_cast<long>(end));
            std::vector<int> leads;
            if (mc.clt_enabled)
                for (std::size_t i = pos; i < end; ++i) leads.push_back(epoch_leads[i]);

            Batch batch = make_batch(train_data, ids, leads, mc, scale, stats, need_rates);
            if (!batch.any_valid) {
                ++result.skipped_batches;
                continue;
            }

            LossResult<float> lr = batch_loss(model, batch, scale, cfg.loss, true, true);
            if (!std::isfinite(lr.sum)) {
                std::string diag = "non-finite loss; batch ids:";
                for (std::size_t id : batch.ids) diag += " " + std::to_string(id);
                diag += "; recent losses:";
                for (double v : recent_losses) diag += " " + std::to_string(v);
                throw NumericError(diag);
            }
            acc_sum += lr.sum;
            acc_weight += lr.weight;
            ++acc_count;

            if (acc_count >= cfg.grad_accumulation) {
                opt.step(acc_weight > 0 ? 1.0 / acc_weight : 0.0);
                model.zero_grad();
                ++result.optimizer_steps;
                const double step_loss = acc_weight > 0 ? acc_sum / acc_weight : 0.0;
                if (!first_recorded) {
                    result.first_loss = step_loss;
                    first_recorded = true;
                }
                result.last_loss = step_loss;
                recent_losses.push_back(step_loss);
                if (recent_losses.size() > 8) recent_losses.erase(recent_losses.begin());
                logged_sum += acc_sum;
                logged_weight += acc_weight;
                if (result.optimizer_steps % cfg.log_every == 0) {
                    log_row(format_row(result.optimizer_steps, "train",
                                       logged_weight > 0 ? logged_sum / logged_weight : 0.0,
                                       nullptr));
                    logged_sum = 0.0;
                    logged_weight = 0.0;
                }
                acc_sum = acc_weight = 0.0;
                acc_count = 0;
            }
        }

        if (val_data.size() > 0) {
            ValStats vs = validate_pass(model, scale, stats, val_data, cfg);
            log_row(format_row(result.optimizer_steps, "val", vs.loss, &vs.report));
            const double score = std::isnan(vs.report.mean_csi) ? -1.0 : vs.report.mean_csi;
            if (score > result.best_val_csi) {
                result.best_val_csi = score;
                if (!cfg.out_dir.empty()) {
                    result.best_checkpoint =
                        (std::filesystem::path(cfg.out_dir) / "ckpt_best.nwc").string();
                    save_checkpoint(result.best_checkpoint, model, scale, stats);
                }
            }
        }
    }

    if (!cfg.out_dir.empty()) {
        result.final_checkpoint = (std::filesystem::path(cfg.out_dir) / "ckpt_final.nwc").string();
        save_checkpoint(result.final_checkpoint, model, scale, stats);
        if (result.best_checkpoint.empty()) result.best_checkpoint = result.final_checkpoint;
    }
    return result;
}

}  // namespace nowcast
