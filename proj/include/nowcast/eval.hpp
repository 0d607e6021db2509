#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nowcast/archive.hpp"
#include "nowcast/buckets.hpp"
#include "nowcast/model.hpp"

namespace nowcast {

// Confusion counters stratified by (threshold, lead time). Events are strict
// exceedances rate > tau on both prediction and truth, counted over valid
// pixels only. Merging shards is exact: the counters are plain integers.
struct ConfusionCounts {
    std::vector<double> thresholds;
    int lead_count = 0;

    struct Cell {
        std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    };
    std::vector<Cell> cells;  // thresholds major, lead minor

    ConfusionCounts() = default;
    ConfusionCounts(std::vector<double> taus, int leads);

    Cell& at(std::size_t threshold_idx, int lead);
    const Cell& at(std::size_t threshold_idx, int lead) const;
    void merge(const ConfusionCounts& other);
};

// Accumulates one sample's forecast. pred/target are [T, P, P]; lead t of the
// tensors maps to lead t of the counters.
void accumulate(ConfusionCounts& counts, const Tensor& pred_rates, const Tensor& target_rates,
                const Mask& valid);

struct CsiReport {
    std::vector<double> thresholds;
    int lead_count = 0;
    // CSI = TP / (TP + FP + FN); strata with an empty denominator are
    // undefined and excluded from every average.
    std::vector<double> csi;               // [threshold x lead], NaN = undefined
    std::vector<double> csi_by_threshold;  // lead-pooled (summed counts) per threshold
    double mean_csi = 0.0;                 // macro mean over defined thresholds
    ConfusionCounts counts;

    double csi_at(std::size_t threshold_idx, int lead) const {
        return csi[threshold_idx * static_cast<std::size_t>(lead_count) +
                   static_cast<std::size_t>(lead)];
    }
};

CsiReport csi(const ConfusionCounts& counts);

// Reference forecasters. `zero` predicts no rain anywhere. `sat_threshold`
// marks rain (at a fixed rate) where the inverted-brightness channel of the
// last input slot falls below a calibrated absolute cutoff, persisted across
// all lead times. The default cutoff separates clear sky from rain cores for
// the synthetic channel recipes; recalibrate with calibrate_sat_threshold for
// other data.
enum class BaselineKind { zero, sat_threshold };
inline constexpr long kBaselineChannel = 3;
inline constexpr float kBaselineRate = 2.0f;      // mm/h predicted inside events
inline constexpr float kBaselineDefaultCut = 0.45f;
BaselineKind baseline_from_name(const std::string& name);

// q-quantile of the brightness plane over a sample stream.
using SampleProvider = std::function<bool(SampleRecord&)>;  // false = exhausted
float calibrate_sat_threshold(const SampleProvider& next, const Geometry& geom,
                              double quantile = 0.2);

Tensor baseline_forecast(const SampleRecord& sample, BaselineKind kind,
                         const Geometry& geom = Geometry{},
                         float brightness_cut = kBaselineDefaultCut);

// Streaming evaluation: calls `forecast(sample)` for every sample the source
// yields and accumulates counts.
using Forecaster = std::function<Tensor(const SampleRecord&)>;  // -> rates [T,P,P]

CsiReport evaluate_forecaster(const SampleProvider& next, const Forecaster& forecast,
                              const std::vector<double>& thresholds, int lead_count);

// Runs the checkpointed model (normalizing inputs with its stored stats and
// decoding with its stored scale) over a sample source.
CsiReport evaluate_model(Model& model, const BucketScale& scale, const NormalizationStats& stats,
                         const SampleProvider& next, const std::vector<double>& thresholds);

// Metrics file (threshold, lead_time, tp, fp, fn, tn, csi) with undefined
// strata spelled "undef", plus one lead-time-curve PNG per threshold.
void emit_report(const CsiReport& report, const std::string& out_dir);
CsiReport load_report(const std::string& metrics_path);

inline std::vector<double> default_thresholds() { return {0.2, 1.0, 5.0, 10.0, 15.0}; }

}  // namespace nowcast
