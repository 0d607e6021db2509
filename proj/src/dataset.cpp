#include "nowcast/dataset.hpp"

#include <algorithm>
#include <filesystem>

namespace nowcast {

ArchiveSampleSource::ArchiveSampleSource(const std::vector<std::string>& region_paths,
                                         std::vector<SequenceIndex::Entry> entries,
                                         const Geometry& geom)
    : entries_(std::move(entries)), geom_(geom) {
    for (const auto& path : region_paths) {
        readers_.push_back(std::make_unique<ArchiveReader>(path));
        region_ids_.push_back(readers_.back()->region_id());
    }
    for (const auto& e : entries_)
        if (e.region < 0 || static_cast<std::size_t>(e.region) >= readers_.size())
            throw DataError("dataset: entry references region " + std::to_string(e.region) +
                            " but only " + std::to_string(readers_.size()) + " files were found");
}

SampleRecord ArchiveSampleSource::get(std::size_t i) const {
    const auto& e = entries_.at(i);
    return readers_[static_cast<std::size_t>(e.region)]->materialize(e.start_slot, geom_);
}

std::vector<std::string> list_region_files(const std::string& dataset_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dataset_dir))
        throw DataError("dataset directory not found: " + dataset_dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dataset_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".h5")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw DataError("no region archives (*.h5) in " + dataset_dir);
    return paths;
}

std::vector<SequenceIndex::Entry> strided_entries(const std::vector<std::string>& region_paths,
                                                  int stride, const Geometry& geom) {
    if (stride < 1) throw DataError("strided_entries: stride must be >= 1");
    std::vector<SequenceIndex::Entry> entries;
    for (std::size_t r = 0; r < region_paths.size(); ++r) {
        ArchiveReader reader(region_paths[r]);
        for (long s = 0; s + geom.window() <= reader.n_slots(); s += stride)
            entries.push_back({static_cast<int>(r), static_cast<int>(s)});
    }
    return entries;
}

SampleProvider provider_over(const SampleSource& source) {
    auto cursor = std::make_shared<std::size_t>(0);
    return [cursor, &source](SampleRecord& out) {
        if (*cursor >= source.size()) return false;
        out = source.get((*cursor)++);
        return true;
    };
}

}  // namespace nowcast
