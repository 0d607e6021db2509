#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nowcast/hdf5_store.hpp"
#include "nowcast/train.hpp"

namespace nowcast {

// Disk-backed dataset: one reader handle per region file, samples
// materialized on demand.
class ArchiveSampleSource final : public SampleSource {
public:
    ArchiveSampleSource(const std::vector<std::string>& region_paths,
                        std::vector<SequenceIndex::Entry> entries, const Geometry& geom);

    std::size_t size() const override { return entries_.size(); }
    SampleRecord get(std::size_t i) const override;

    const std::vector<std::string>& region_ids() const { return region_ids_; }
    long n_slots(int region) const { return readers_[static_cast<std::size_t>(region)]->n_slots(); }

private:
    std::vector<std::unique_ptr<ArchiveReader>> readers_;
    std::vector<std::string> region_ids_;
    std::vector<SequenceIndex::Entry> entries_;
    Geometry geom_;
};

// Memory-backed dataset over already-loaded archives.
class RegionSampleSource final : public SampleSource {
public:
    RegionSampleSource(const std::vector<RegionArchive>* archives,
                       std::vector<SequenceIndex::Entry> entries, const Geometry& geom)
        : archives_(archives), entries_(std::move(entries)), geom_(geom) {}

    std::size_t size() const override { return entries_.size(); }
    SampleRecord get(std::size_t i) const override {
        const auto& e = entries_.at(i);
        return materialize_sample((*archives_)[static_cast<std::size_t>(e.region)], e.start_slot,
                                  geom_);
    }

private:
    const std::vector<RegionArchive>* archives_;
    std::vector<SequenceIndex::Entry> entries_;
    Geometry geom_;
};

// Sorted *.h5 region files under a dataset directory.
std::vector<std::string> list_region_files(const std::string& dataset_dir);

// Every window of every region at the given stride (evaluation splits).
std::vector<SequenceIndex::Entry> strided_entries(const std::vector<std::string>& region_paths,
                                                  int stride, const Geometry& geom);

// Streams a SampleSource through the eval SampleProvider interface.
SampleProvider provider_over(const SampleSource& source);

}  // namespace nowcast
