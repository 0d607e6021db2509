#include "nowcast/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace nowcast {

double saturate(double rain) {
    if (rain < 0.0) throw DataError("saturate: negative rain rate");
    return -std::expm1(-rain);
}

namespace {

SamplingDecision decide(double x_sat, const SamplingConfig& cfg, long ordinal) {
    SamplingDecision d;
    d.ordinal = ordinal;
    d.x_sat = x_sat;
    d.q_n = std::min(1.0, cfg.q_min + x_sat);
    d.accepted = hashed_uniform(cfg.seed, static_cast<std::uint64_t>(ordinal)) < d.q_n;
    return d;
}

}  // namespace

SamplingDecision score_sample(const Tensor& target, const Mask& valid, const SamplingConfig& cfg,
                              long ordinal) {
    cfg.validate();
    if (!valid.empty() && valid.shape() != target.shape())
        throw DataError("score_sample: mask shape != target shape");
    double sum = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (!valid.empty() && !valid[i]) continue;
        sum += saturate(target[i]);
        ++count;
    }
    double x_sat = count > 0 ? sum / static_cast<double>(count) : 0.0;
    return decide(x_sat, cfg, ordinal);
}

RegionSaturation compute_region_saturation(long n_slots, long patch, const SlotReader& read_slot) {
    RegionSaturation rs;
    rs.slot_sum.assign(static_cast<std::size_t>(n_slots), 0.0);
    rs.slot_count.assign(static_cast<std::size_t>(n_slots), 0);
    const std::size_t plane = static_cast<std::size_t>(patch) * static_cast<std::size_t>(patch);
    std::vector<float> rates(plane);
    std::vector<std::uint8_t> valid(plane);
    for (long t = 0; t < n_slots; ++t) {
        read_slot(t, rates.data(), valid.data());
        double sum = 0.0;
        long count = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            if (!valid[i]) continue;
            sum += saturate(rates[i]);
            ++count;
        }
        rs.slot_sum[static_cast<std::size_t>(t)] = sum;
        rs.slot_count[static_cast<std::size_t>(t)] = count;
    }
    return rs;
}

RegionSaturation compute_region_saturation(const RegionArchive& arc) {
    const std::size_t plane = static_cast<std::size_t>(arc.patch()) * static_cast<std::size_t>(arc.patch());
    return compute_region_saturation(arc.n_slots(), arc.patch(),
                                     [&](long slot, float* rates, std::uint8_t* valid) {
                                         const std::size_t off = static_cast<std::size_t>(slot) * plane;
                                         std::copy(arc.radar.data() + off, arc.radar.data() + off + plane, rates);
                                         std::copy(arc.radar_valid.data() + off,
                                                   arc.radar_valid.data() + off + plane, valid);
                                     });
}

SubsetResult build_subset(const SequenceIndex& index, const std::vector<RegionSaturation>& regions,
                          const SamplingConfig& cfg) {
    cfg.validate();
    if (index.entries.empty()) throw DataError("build_subset: empty sequence index");

    // Prefix sums per region so each candidate is O(1).
    std::vector<std::vector<double>> sum_prefix(regions.size());
    std::vector<std::vector<long>> count_prefix(regions.size());
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const auto& rs = regions[r];
        sum_prefix[r].assign(rs.slot_sum.size() + 1, 0.0);
        count_prefix[r].assign(rs.slot_sum.size() + 1, 0);
        for (std::size_t t = 0; t < rs.slot_sum.size(); ++t) {
            sum_prefix[r][t + 1] = sum_prefix[r][t] + rs.slot_sum[t];
            count_prefix[r][t + 1] = count_prefix[r][t] + rs.slot_count[t];
        }
    }

    SubsetResult result;
    result.decisions.resize(index.entries.size());
    for (std::size_t n = 0; n < index.entries.size(); ++n) {
        const auto& e = index.entries[n];
        const std::size_t lo = static_cast<std::size_t>(e.start_slot + index.in_len);
        const std::size_t hi = lo + static_cast<std::size_t>(index.out_len);
        if (e.region < 0 || static_cast<std::size_t>(e.region) >= regions.size() ||
            hi >= sum_prefix[static_cast<std::size_t>(e.region)].size())
            throw DataError("build_subset: index entry out of range");
        const auto& sp = sum_prefix[static_cast<std::size_t>(e.region)];
        const auto& cp = count_prefix[static_cast<std::size_t>(e.region)];
        double sum = sp[hi] - sp[lo];
        long count = cp[hi] - cp[lo];
        double x_sat = count > 0 ? sum / static_cast<double>(count) : 0.0;
        SamplingDecision d = decide(x_sat, cfg, static_cast<long>(n));
        d.region_id = index.region_ids[static_cast<std::size_t>(e.region)];
        d.start_slot = e.start_slot;
        result.decisions[n] = d;
        if (d.accepted) result.accepted.push_back(static_cast<long>(n));
    }

    if (cfg.target_size > 0 && static_cast<long>(result.accepted.size()) > cfg.target_size) {
        std::stable_sort(result.accepted.begin(), result.accepted.end(), [&](long a, long b) {
            double qa = result.decisions[static_cast<std::size_t>(a)].q_n;
            double qb = result.decisions[static_cast<std::size_t>(b)].q_n;
            if (qa != qb) return qa > qb;
            return a < b;
        });
        result.accepted.resize(static_cast<std::size_t>(cfg.target_size));
        std::sort(result.accepted.begin(), result.accepted.end());
    }
    return result;
}

SubsetResult build_subset(const SequenceIndex& index, const std::vector<RegionArchive>& archives,
                          const SamplingConfig& cfg) {
    std::vector<RegionSaturation> regions;
    regions.reserve(archives.size());
    for (const auto& arc : archives) regions.push_back(compute_region_saturation(arc));
    return build_subset(index, regions, cfg);
}

void save_decision_log(const std::vector<SamplingDecision>& decisions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write decision log: " + path);
    out << "ordinal\tregion_id\tstart_slot\tx_sat\tq_n\taccepted\n";
    char buf[160];
    for (const auto& d : decisions) {
        std::snprintf(buf, sizeof buf, "%ld\t%s\t%d\t%.9g\t%.9g\t%d\n", d.ordinal,
                      d.region_id.c_str(), d.start_slot, d.x_sat, d.q_n, d.accepted ? 1 : 0);
        out << buf;
    }
}

void save_subset(const SubsetResult& result, const SequenceIndex& index, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write subset file: " + path);
    out << "region_id\tstart_slot\n";
    for (long ord : result.accepted) {
        const auto& e = index.entries[static_cast<std::size_t>(ord)];
        out << index.region_ids[static_cast<std::size_t>(e.region)] << "\t" << e.start_slot << "\n";
    }
}

std::vector<SequenceIndex::Entry> load_subset(const std::string& path,
                                              const std::vector<std::string>& region_ids) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read subset file: " + path);
    std::map<std::string, int> region_of;
    for (std::size_t r = 0; r < region_ids.size(); ++r)
        region_of[region_ids[r]] = static_cast<int>(r);
    std::vector<SequenceIndex::Entry> entries;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.rfind("region_id", 0) == 0) continue;
        }
        std::istringstream row(line);
        std::string region;
        int start = 0;
        if (!(row >> region >> start)) throw DataError("subset file: bad row '" + line + "'");
        auto it = region_of.find(region);
        if (it == region_of.end())
            throw DataError("subset file references unknown region '" + region + "'");
        entries.push_back({it->second, start});
    }
    return entries;
}

}  // namespace nowcast
