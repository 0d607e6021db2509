#pragma once

#include <memory>
#include <string>

#include "nowcast/archive.hpp"

namespace nowcast {

// On-disk layout: one HDF5 file per region with datasets
//   satellite   float32 [N, 11, P, P]   chunked along the slot axis
//   radar       float32 [N, P, P]
//   radar_valid uint8   [N, P, P]
//   static      float32 [3, P, P]
// plus root attributes region_id and slot_minutes. Row 0 is north.
void save_region_archive(const RegionArchive& arc, const std::string& path);

// Loads the full archive into memory and validates it. Load failures name
// the offending dataset.
RegionArchive load_region_archive(const std::string& path);

// Windowed reader for training-scale archives that should not live in memory
// all at once. Safe for concurrent use only via one handle per worker.
class ArchiveReader {
public:
    explicit ArchiveReader(const std::string& path);
    ~ArchiveReader();
    ArchiveReader(ArchiveReader&&) noexcept;
    ArchiveReader& operator=(ArchiveReader&&) noexcept;
    ArchiveReader(const ArchiveReader&) = delete;
    ArchiveReader& operator=(const ArchiveReader&) = delete;

    const std::string& region_id() const;
    long n_slots() const;
    long patch() const;

    // Reads one window from disk; equivalent to materialize_sample on the
    // full archive.
    SampleRecord materialize(int start_slot, const Geometry& geom) const;

    // Reads one radar slot (rates + validity) into caller buffers of size
    // patch*patch.
    void read_radar_slot(long slot, float* rates, std::uint8_t* valid) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Single-tensor container files (forecast grids).
void save_tensor_h5(const std::string& path, const std::string& dataset, const Tensor& t);
Tensor load_tensor_h5(const std::string& path, const std::string& dataset);

}  // namespace nowcast
