#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nowcast/buckets.hpp"
#include "nowcast/eval.hpp"
#include "nowcast/model.hpp"

namespace nowcast {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 16;
    int grad_accumulation = 1;  // effective batch = batch_size * grad_accumulation
    int epochs = 4;
    std::uint64_t seed = 0;

    enum class Loss { weighted_ce, ce, mse };
    Loss loss = Loss::weighted_ce;

    std::vector<double> thresholds = default_thresholds();
    int log_every = 10;    // optimizer steps between train log rows
    std::string out_dir;   // empty = keep logs in memory only

    void validate() const {
        if (learning_rate < 0.0) throw DataError("train: negative learning rate");
        if (batch_size < 1 || grad_accumulation < 1 || epochs < 1)
            throw DataError("train: batch size, accumulation and epochs must be positive");
    }
    static const char* loss_name(Loss l);
    static Loss loss_from_name(const std::string& name);
};

// Random access into a dataset of raw (unnormalized) samples.
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual SampleRecord get(std::size_t i) const = 0;
};

class MemorySampleSource final : public SampleSource {
public:
    MemorySampleSource() = default;
    explicit MemorySampleSource(std::vector<SampleRecord> samples) : samples_(std::move(samples)) {}
    std::size_t size() const override { return samples_.size(); }
    SampleRecord get(std::size_t i) const override { return samples_.at(i); }
    std::vector<SampleRecord>& samples() { return samples_; }

private:
    std::vector<SampleRecord> samples_;
};

struct TrainResult {
    std::vector<std::string> metric_log;  // identical to the on-disk log rows
    double best_val_csi = -1.0;
    long optimizer_steps = 0;
    long skipped_batches = 0;
    double first_loss = 0.0;
    double last_loss = 0.0;
    std::string best_checkpoint;   // empty when out_dir unset
    std::string final_checkpoint;
};

// Mini-batch gradient descent with gradient accumulation and per-epoch
// validation. Lead-time-conditioned models draw one uniform lead per sample
// per epoch. Batches without a single valid target pixel are skipped and
// counted. Reproducible from the seed: batch order, lead draws and the
// metric log depend only on (config, data).
TrainResult train(Model& model, const BucketScale& scale, const NormalizationStats& stats,
                  const SampleSource& train_data, const SampleSource& val_data,
                  const TrainConfig& cfg);

}  // namespace nowcast
