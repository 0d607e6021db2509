#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nowcast/geometry.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast {

// One region's aligned satellite/radar record.
//   satellite    [N_slots, 11, P, P]   radiance, unitless after normalization
//   radar        [N_slots, P, P]       rain rate, mm/h
//   radar_valid  [N_slots, P, P]       1 where radar is usable
//   static_fields [3, P, P]            latitude deg, longitude deg, elevation m
// Row 0 is north. Slots are 15 minutes apart.
struct RegionArchive {
    std::string region_id;
    Tensor satellite;
    Tensor radar;
    Mask radar_valid;
    Tensor static_fields;
    int slot_minutes = 15;

    long n_slots() const { return satellite.empty() ? 0 : satellite.dim(0); }
    long patch() const { return satellite.empty() ? 0 : satellite.dim(3); }
    void validate() const;
};

// Sliding-window index over one or more regions. Each entry is a candidate
// training window: in_len input slots followed by out_len target slots.
struct SequenceIndex {
    struct Entry {
        int region;
        int start_slot;
    };
    std::vector<Entry> entries;
    std::vector<std::string> region_ids;
    int in_len = 4;
    int out_len = 32;
    int stride = 1;

    std::size_t size() const { return entries.size(); }
};

// One training example, materialized from an archive window.
struct SampleRecord {
    Tensor input;          // [in_len, 11, input, input]
    Tensor static_fields;  // [3, input, input]
    Tensor target;         // [out_len, P, P]
    Mask target_valid;     // [out_len, P, P]
    std::string region_id;
    int start_slot = 0;
};

struct NormalizationStats {
    std::vector<float> sat_mean, sat_std;        // 11 channels
    std::vector<float> static_mean, static_std;  // 3 channels

    void save(const std::string& path) const;
    static NormalizationStats load(const std::string& path);
};

// Enumerates every admissible window, region order then slot order.
// Per-region count: floor((N_slots - window) / stride) + 1 when it fits.
SequenceIndex build_sequence_index(const std::vector<RegionArchive>& archives, int stride,
                                   const Geometry& geom = Geometry{});

// Same enumeration from (region_id, n_slots) pairs, for disk-backed datasets.
SequenceIndex build_sequence_index(const std::vector<std::pair<std::string, long>>& regions,
                                   int stride, const Geometry& geom = Geometry{});

SampleRecord materialize_sample(const RegionArchive& archive, int start_slot,
                                const Geometry& geom = Geometry{});

// Per-channel mean/std over all pixels and time steps; std floored at 1e-6.
NormalizationStats compute_normalization(const std::vector<SampleRecord>& samples);

// Standardizes input and static channels in place; targets are left alone
// (they are bucketized, never normalized).
void normalize(SampleRecord& sample, const NormalizationStats& stats);
void denormalize(SampleRecord& sample, const NormalizationStats& stats);

}  // namespace nowcast
