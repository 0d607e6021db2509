#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nowcast/archive.hpp"

namespace nowcast {

struct SamplingConfig {
    double q_min = 1e-6;       // inclusion probability floor for dry windows
    std::uint64_t seed = 0;
    long target_size = 0;      // 0 = keep every accepted candidate

    void validate() const {
        if (q_min < 0.0 || q_min > 1.0) throw DataError("sampling: q_min must be in [0, 1]");
        if (target_size < 0) throw DataError("sampling: target_size must be >= 0");
    }
};

struct SamplingDecision {
    long ordinal = 0;
    std::string region_id;
    int start_slot = 0;
    double x_sat = 0.0;   // mean saturated rainfall over valid target entries
    double q_n = 0.0;     // min(1, q_min + x_sat)
    bool accepted = false;
};

struct SubsetResult {
    std::vector<long> accepted;  // ordinals into the index, ascending
    std::vector<SamplingDecision> decisions;
};

// 1 - exp(-rain); monotone, in [0, 1) for finite rain.
double saturate(double rain);

// Scores one target window. x_sat averages saturate() over valid entries
// (all-invalid windows score 0); acceptance uses the (seed, ordinal) hashed
// draw so results do not depend on evaluation order.
SamplingDecision score_sample(const Tensor& target, const Mask& valid, const SamplingConfig& cfg,
                              long ordinal = 0);

// Per-slot saturation totals for one region; lets overlapping windows share
// work: x_sat(window) = sum(slot_sum) / sum(slot_count) over its target slots.
struct RegionSaturation {
    std::vector<double> slot_sum;
    std::vector<long> slot_count;
};

using SlotReader = std::function<void(long slot, float* rates, std::uint8_t* valid)>;

RegionSaturation compute_region_saturation(long n_slots, long patch, const SlotReader& read_slot);
RegionSaturation compute_region_saturation(const RegionArchive& arc);

// One pass over every candidate window of the index. When target_size is set
// and exceeded, the accepted candidates with the highest q_n are kept (ties
// broken by ordinal).
SubsetResult build_subset(const SequenceIndex& index, const std::vector<RegionSaturation>& regions,
                          const SamplingConfig& cfg);
SubsetResult build_subset(const SequenceIndex& index, const std::vector<RegionArchive>& archives,
                          const SamplingConfig& cfg);

// Decision log: columnar text, one row per candidate
//   ordinal region_id start_slot x_sat q_n accepted
void save_decision_log(const std::vector<SamplingDecision>& decisions, const std::string& path);

// Frozen subset: columnar text (region_id, start_slot) rows in subset order.
void save_subset(const SubsetResult& result, const SequenceIndex& index, const std::string& path);
std::vector<SequenceIndex::Entry> load_subset(const std::string& path,
                                              const std::vector<std::string>& region_ids);

}  // namespace nowcast
