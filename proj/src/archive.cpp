#include "nowcast/archive.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nowcast {

void RegionArchive::validate() const {
    if (satellite.rank() != 4) throw DataError("archive '" + region_id + "': satellite must be 4-d");
    if (radar.rank() != 3) throw DataError("archive '" + region_id + "': radar must be 3-d");
    if (static_fields.rank() != 3) throw DataError("archive '" + region_id + "': static must be 3-d");
    const long n = satellite.dim(0), p = satellite.dim(3);
    if (satellite.dim(2) != p) throw DataError("archive '" + region_id + "': satellite patch not square");
    if (radar.dim(0) != n)
        throw DataError("archive '" + region_id + "': radar slot count " + std::to_string(radar.dim(0)) +
                        " != satellite slot count " + std::to_string(n));
    if (radar.dim(1) != p || radar.dim(2) != p)
        throw DataError("archive '" + region_id + "': radar patch size != satellite patch size");
    if (radar_valid.shape() != radar.shape())
        throw DataError("archive '" + region_id + "': radar_valid shape != radar shape");
    if (static_fields.dim(0) != 3)
        throw DataError("archive '" + region_id + "': static must have exactly 3 channels");
    if (static_fields.dim(1) != p || static_fields.dim(2) != p)
        throw DataError("archive '" + region_id + "': static patch size != satellite patch size");
    for (std::size_t i = 0; i < radar.size(); ++i)
        if (radar_valid[i] && radar[i] < 0.0f)
            throw DataError("archive '" + region_id + "': negative rain rate at a valid radar pixel");
}

SequenceIndex build_sequence_index(const std::vector<std::pair<std::string, long>>& regions,
                                   int stride, const Geometry& geom) {
    if (stride < 1) throw DataError("sequence index: stride must be >= 1");
    SequenceIndex index;
    index.in_len = geom.in_len;
    index.out_len = geom.out_len;
    index.stride = stride;
    const long window = geom.window();
    for (std::size_t r = 0; r < regions.size(); ++r) {
        index.region_ids.push_back(regions[r].first);
        for (long s = 0; s + window <= regions[r].second; s += stride)
            index.entries.push_back({static_cast<int>(r), static_cast<int>(s)});
    }
    return index;
}

SequenceIndex build_sequence_index(const std::vector<RegionArchive>& archives, int stride,
                                   const Geometry& geom) {
    std::vector<std::pair<std::string, long>> regions;
    regions.reserve(archives.size());
    for (const auto& arc : archives) regions.emplace_back(arc.region_id, arc.n_slots());
    return build_sequence_index(regions, stride, geom);
}

SampleRecord materialize_sample(const RegionArchive& archive, int start_slot, const Geometry& geom) {
    geom.validate();
    const long n = archive.n_slots();
    const long p = archive.patch();
    if (p != geom.patch)
        throw DataError("materialize: archive patch " + std::to_string(p) + " != geometry patch " +
                        std::to_string(geom.patch));
    if (start_slot < 0 || start_slot + geom.window() > n)
        throw DataError("materialize: window [" + std::to_string(start_slot) + ", " +
                        std::to_string(start_slot + geom.window()) + ") out of range for " +
                        std::to_string(n) + " slots");

    const long in = geom.input;
    const long off = geom.input_offset();
    const long c_sat = geom.sat_channels;

    SampleRecord rec;
    rec.region_id = archive.region_id;
    rec.start_slot = start_slot;
    rec.input = Tensor({geom.in_len, c_sat, in, in});
    for (long t = 0; t < geom.in_len; ++t)
        for (long c = 0; c < c_sat; ++c)
            for (long i = 0; i < in; ++i) {
                const float* src = &archive.satellite.at(start_slot + t, c, off + i, off);
                float* dst = &rec.input.at(t, c, i, 0l);
                std::copy(src, src + in, dst);
            }

    rec.static_fields = Tensor({geom.static_channels, in, in});
    for (long c = 0; c < geom.static_channels; ++c)
        for (long i = 0; i < in; ++i) {
            const float* src = &archive.static_fields.at(c, off + i, off);
            std::copy(src, src + in, &rec.static_fields.at(c, i, 0l));
        }

    rec.target = Tensor({geom.out_len, p, p});
    rec.target_valid = Mask({geom.out_len, p, p});
    const long plane = p * p;
    for (long t = 0; t < geom.out_len; ++t) {
        const long slot = start_slot + geom.in_len + t;
        std::copy(archive.radar.data() + slot * plane, archive.radar.data() + (slot + 1) * plane,
                  rec.target.data() + t * plane);
        std::copy(archive.radar_valid.data() + slot * plane,
                  archive.radar_valid.data() + (slot + 1) * plane, rec.target_valid.data() + t * plane);
    }
    return rec;
}

namespace {

void channel_moments(const std::vector<SampleRecord>& samples, bool statics, long channel,
                     double& mean, double& sd) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t count = 0;
    for (const auto& s : samples) {
        const Tensor& t = statics ? s.static_fields : s.input;
        if (statics) {
            const long hw = t.dim(1) * t.dim(2);
            const float* p = t.data() + channel * hw;
            for (long i = 0; i < hw; ++i) {
                sum += p[i];
                sum2 += double(p[i]) * p[i];
            }
            count += static_cast<std::size_t>(hw);
        } else {
            const long hw = t.dim(2) * t.dim(3);
            for (long step = 0; step < t.dim(0); ++step) {
                const float* p = t.data() + (step * t.dim(1) + channel) * hw;
                for (long i = 0; i < hw; ++i) {
                    sum += p[i];
                    sum2 += double(p[i]) * p[i];
                }
                count += static_cast<std::size_t>(hw);
            }
        }
    }
    mean = sum / static_cast<double>(count);
    double var = std::max(0.0, sum2 / static_cast<double>(count) - mean * mean);
    sd = std::max(std::sqrt(var), 1e-6);
}

}  // namespace

NormalizationStats compute_normalization(const std::vector<SampleRecord>& samples) {
    if (samples.empty()) throw DataError("compute_normalization: no samples");
    const long c_sat = samples[0].input.dim(1);
    const long c_static = samples[0].static_fields.dim(0);
    NormalizationStats st;
    st.sat_mean.resize(c_sat);
    st.sat_std.resize(c_sat);
    st.static_mean.resize(c_static);
    st.static_std.resize(c_static);
    for (long c = 0; c < c_sat; ++c) {
        double m, sd;
        channel_moments(samples, false, c, m, sd);
        st.sat_mean[c] = static_cast<float>(m);
        st.sat_std[c] = static_cast<float>(sd);
    }
    for (long c = 0; c < c_static; ++c) {
        double m, sd;
        channel_moments(samples, true, c, m, sd);
        st.static_mean[c] = static_cast<float>(m);
        st.static_std[c] = static_cast<float>(sd);
    }
    return st;
}

namespace {

void apply_affine(SampleRecord& sample, const NormalizationStats& stats, bool inverse) {
    const long c_sat = sample.input.dim(1);
    const long c_static = sample.static_fields.dim(0);
    if (static_cast<std::size_t>(c_sat) != stats.sat_mean.size() ||
        static_cast<std::size_t>(c_static) != stats.static_mean.size())
        throw DataError("normalize: stats channel count (" + std::to_string(stats.sat_mean.size()) +
                        " sat) does not match sample (" + std::to_string(c_sat) + " sat)");
    const long hw_in = sample.input.dim(2) * sample.input.dim(3);
    for (long step = 0; step < sample.input.dim(0); ++step)
        for (long c = 0; c < c_sat; ++c) {
            float* p = sample.input.data() + (step * c_sat + c) * hw_in;
            const float m = stats.sat_mean[c], sd = stats.sat_std[c];
            if (inverse)
                for (long i = 0; i < hw_in; ++i) p[i] = p[i] * sd + m;
            else
                for (long i = 0; i < hw_in; ++i) p[i] = (p[i] - m) / sd;
        }
    const long hw_st = sample.static_fields.dim(1) * sample.static_fields.dim(2);
    for (long c = 0; c < c_static; ++c) {
        float* p = sample.static_fields.data() + c * hw_st;
        const float m = stats.static_mean[c], sd = stats.static_std[c];
        if (inverse)
            for (long i = 0; i < hw_st; ++i) p[i] = p[i] * sd + m;
        else
            for (long i = 0; i < hw_st; ++i) p[i] = (p[i] - m) / sd;
    }
}

}  // namespace

void normalize(SampleRecord& sample, const NormalizationStats& stats) {
    apply_affine(sample, stats, false);
}

void denormalize(SampleRecord& sample, const NormalizationStats& stats) {
    apply_affine(sample, stats, true);
}

void NormalizationStats::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write normalization stats: " + path);
    char buf[96];
    auto line = [&](const char* key, std::size_t i, float v) {
        std::snprintf(buf, sizeof buf, "%s[%zu] = %.9g\n", key, i, double(v));
        out << buf;
    };
    for (std::size_t c = 0; c < sat_mean.size(); ++c) line("mean.satellite", c, sat_mean[c]);
    for (std::size_t c = 0; c < sat_std.size(); ++c) line("std.satellite", c, sat_std[c]);
    for (std::size_t c = 0; c < static_mean.size(); ++c) line("mean.static", c, static_mean[c]);
    for (std::size_t c = 0; c < static_std.size(); ++c) line("std.static", c, static_std[c]);
}

NormalizationStats NormalizationStats::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read normalization stats: " + path);
    NormalizationStats st;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::string key;
        std::size_t idx;
        double value;
        char name[32];
        if (std::sscanf(line.c_str(), "%31[^[][%zu] = %lf", name, &idx, &value) != 3)
            throw DataError("normalization stats: bad line '" + line + "'");
        key = name;
        auto put = [&](std::vector<float>& v) {
            if (v.size() <= idx) v.resize(idx + 1);
            v[idx] = static_cast<float>(value);
        };
        if (key == "mean.satellite")
            put(st.sat_mean);
        else if (key == "std.satellite")
            put(st.sat_std);
        else if (key == "mean.static")
            put(st.static_mean);
        else if (key == "std.static")
            put(st.static_std);
        else
            throw DataError("normalization stats: unknown key '" + key + "'");
    }
    if (st.sat_mean.empty() || st.sat_mean.size() != st.sat_std.size())
        throw DataError("normalization stats: incomplete file " + path);
    return st;
}

}  // namespace nowcast
