#include <hdf5.h>

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "nowcast/hdf5_store.hpp"
#include "nowcast/synthetic.hpp"

using namespace nowcast;

namespace {

RegionArchive random_archive(std::uint64_t seed, int n_slots, const Geometry& geom) {
    RegionArchive arc;
    arc.region_id = "test-" + std::to_string(seed);
    arc.satellite = Tensor({n_slots, geom.sat_channels, geom.patch, geom.patch});
    arc.radar = Tensor({n_slots, geom.patch, geom.patch});
    arc.radar_valid = Mask::full({n_slots, geom.patch, geom.patch}, 1);
    arc.static_fields = Tensor({geom.static_channels, geom.patch, geom.patch});
    Rng rng(seed);
    for (std::size_t i = 0; i < arc.satellite.size(); ++i)
        arc.satellite[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (std::size_t i = 0; i < arc.radar.size(); ++i)
        arc.radar[i] = rng.uniform() < 0.7 ? 0.0f : static_cast<float>(rng.log_uniform(0.01, 50.0));
    for (std::size_t i = 0; i < arc.static_fields.size(); ++i)
        arc.static_fields[i] = static_cast<float>(rng.uniform(0.0, 100.0));
    return arc;
}

// brute-force window enumerator for the count formula
long count_windows(long n_slots, long window, long stride) {
    long count = 0;
    for (long s = 0; s + window <= n_slots; s += stride) ++count;
    return count;
}

}  // namespace

TEST_SUITE_BEGIN("ingest");

TEST_CASE("sequence index counts") {
    Geometry geom;  // window 36
    SUBCASE("exact boundary: one window") {
        Geometry tiny = Geometry::tiny();
        tiny.out_len = 32;  // default 36-slot window on the tiny grid
        std::vector<RegionArchive> arcs{random_archive(1, 36, tiny)};
        SequenceIndex idx = build_sequence_index(arcs, 1, tiny);
        CHECK(idx.size() == 1);
        CHECK(idx.entries[0].start_slot == 0);
    }
    SUBCASE("96 slots stride 1 and 4") {
        Geometry tiny = Geometry::tiny();
        tiny.out_len = 32;
        std::vector<RegionArchive> arcs{random_archive(2, 96, tiny)};
        CHECK(build_sequence_index(arcs, 1, tiny).size() == 61);
        CHECK(build_sequence_index(arcs, 4, tiny).size() == 16);
    }
    SUBCASE("stride must be positive") {
        std::vector<RegionArchive> arcs{random_archive(3, 40, Geometry::tiny())};
        CHECK_THROWS_AS(build_sequence_index(arcs, 0, Geometry::tiny()), DataError);
    }
    SUBCASE("fuzz against brute-force enumerator") {
        Rng rng(55);
        for (int iter = 0; iter < 300; ++iter) {
            Geometry tiny = Geometry::tiny();
            tiny.out_len = 2 + static_cast<int>(rng.below(40));
            tiny.in_len = 1 + static_cast<int>(rng.below(6));
            long n = static_cast<long>(rng.below(140));
            long stride = 1 + static_cast<long>(rng.below(7));
            RegionArchive arc;
            arc.region_id = "fuzz";
            arc.satellite = Tensor({n, tiny.sat_channels, 4, 4});
            arc.radar = Tensor({n, 4, 4});
            arc.radar_valid = Mask({n, 4, 4});
            arc.static_fields = Tensor({3, 4, 4});
            std::vector<RegionArchive> arcs;
            arcs.push_back(std::move(arc));
            SequenceIndex idx = build_sequence_index(arcs, static_cast<int>(stride), tiny);
            long expected = count_windows(n, tiny.window(), stride);
            REQUIRE(static_cast<long>(idx.size()) == expected);
            if (n >= tiny.window())
                REQUIRE(expected == (n - tiny.window()) / stride + 1);
        }
    }
    (void)geom;
}

TEST_CASE("materialize_sample crops the center and copies targets") {
    Geometry geom;  // production sizes
    RegionArchive arc = random_archive(10, 36, geom);
    SampleRecord rec = materialize_sample(arc, 0, geom);

    CHECK(rec.input.shape() == std::vector<long>{4, 11, 128, 128});
    CHECK(rec.static_fields.shape() == std::vector<long>{3, 128, 128});
    CHECK(rec.target.shape() == std::vector<long>{32, 252, 252});
    CHECK(rec.target_valid.shape() == rec.target.shape());

    // crop offset (252-128)/2 = 62
    CHECK(rec.input.at(0, 0, 0, 0) == arc.satellite.at(0, 0, 62, 62));
    Rng rng(20);
    for (int i = 0; i < 400; ++i) {
        long t = static_cast<long>(rng.below(4)), c = static_cast<long>(rng.below(11));
        long y = static_cast<long>(rng.below(128)), x = static_cast<long>(rng.below(128));
        REQUIRE(rec.input.at(t, c, y, x) == arc.satellite.at(t, c, 62 + y, 62 + x));
    }
    for (int i = 0; i < 100; ++i) {
        long c = static_cast<long>(rng.below(3));
        long y = static_cast<long>(rng.below(128)), x = static_cast<long>(rng.below(128));
        REQUIRE(rec.static_fields.at(c, y, x) == arc.static_fields.at(c, 62 + y, 62 + x));
    }
    for (int i = 0; i < 400; ++i) {
        long t = static_cast<long>(rng.below(32));
        long y = static_cast<long>(rng.below(252)), x = static_cast<long>(rng.below(252));
        REQUIRE(rec.target.at(t, y, x) == arc.radar.at(4 + t, y, x));
    }

    // crop commutes with time selection: slicing a later window gives the
    // same planes as slicing the archive first
    RegionArchive arc2 = random_archive(11, 40, geom);
    SampleRecord a = materialize_sample(arc2, 3, geom);
    for (int i = 0; i < 100; ++i) {
        long c = static_cast<long>(rng.below(11));
        long y = static_cast<long>(rng.below(128)), x = static_cast<long>(rng.below(128));
        REQUIRE(a.input.at(2l, c, y, x) == arc2.satellite.at(5, c, 62 + y, 62 + x));
    }
}

TEST_CASE("materialize_sample rejects out-of-range windows") {
    Geometry tiny = Geometry::tiny();
    RegionArchive arc = random_archive(12, 20, tiny);  // window is 8
    CHECK_NOTHROW(materialize_sample(arc, 12, tiny));
    CHECK_THROWS_AS(materialize_sample(arc, 13, tiny), DataError);
    CHECK_THROWS_AS(materialize_sample(arc, -1, tiny), DataError);
}

TEST_CASE("archive validation") {
    Geometry tiny = Geometry::tiny();
    RegionArchive arc = random_archive(13, 12, tiny);
    CHECK_NOTHROW(arc.validate());

    SUBCASE("negative valid rain") {
        arc.radar[5] = -0.5f;
        arc.radar_valid[5] = 1;
        CHECK_THROWS_WITH_AS(arc.validate(),
                             doctest::Contains("negative rain rate"), DataError);
        arc.radar_valid[5] = 0;  // masked negative values are tolerated
        CHECK_NOTHROW(arc.validate());
    }
    SUBCASE("slot mismatch") {
        arc.radar = Tensor({11, tiny.patch, tiny.patch});
        arc.radar_valid = Mask({11, tiny.patch, tiny.patch});
        CHECK_THROWS_AS(arc.validate(), DataError);
    }
    SUBCASE("static channel count") {
        arc.static_fields = Tensor({2, tiny.patch, tiny.patch});
        CHECK_THROWS_AS(arc.validate(), DataError);
    }
}

TEST_CASE("normalization statistics") {
    Geometry tiny = Geometry::tiny();
    SUBCASE("constant channel floors the deviation") {
        SampleRecord s;
        s.input = Tensor::full({2, 2, 4, 4}, 5.0f);
        s.static_fields = Tensor::full({1, 4, 4}, 3.0f);
        NormalizationStats st = compute_normalization({s});
        CHECK(st.sat_mean[0] == doctest::Approx(5.0));
        CHECK(st.sat_std[0] == doctest::Approx(1e-6));
        CHECK(st.static_std[0] == doctest::Approx(1e-6));
    }
    SUBCASE("two samples match hand computation") {
        SampleRecord a, b;
        a.input = Tensor({1, 1, 1, 2});
        b.input = Tensor({1, 1, 1, 2});
        a.input[0] = 1.0f;
        a.input[1] = 2.0f;
        b.input[0] = 3.0f;
        b.input[1] = 6.0f;
        a.static_fields = Tensor({1, 1, 1});
        b.static_fields = Tensor({1, 1, 1});
        NormalizationStats st = compute_normalization({a, b});
        CHECK(std::abs(st.sat_mean[0] - 3.0) < 1e-9);
        // population std of {1,2,3,6}
        double var = ((1 - 3.) * (1 - 3.) + (2 - 3.) * (2 - 3.) + 0.0 + (6 - 3.) * (6 - 3.)) / 4.0;
        CHECK(std::abs(st.sat_std[0] - std::sqrt(var)) < 1e-7);
    }
    SUBCASE("empty input throws") { CHECK_THROWS_AS(compute_normalization({}), DataError); }
    SUBCASE("round trip and target untouched") {
        RegionArchive arc = random_archive(21, 12, tiny);
        SampleRecord rec = materialize_sample(arc, 0, tiny);
        SampleRecord original = rec;
        NormalizationStats st = compute_normalization({rec});
        normalize(rec, st);
        for (std::size_t i = 0; i < rec.target.size(); ++i)
            REQUIRE(rec.target[i] == original.target[i]);
        denormalize(rec, st);
        for (std::size_t i = 0; i < rec.input.size(); ++i)
            REQUIRE(std::abs(rec.input[i] - original.input[i]) <=
                    1e-6f * std::max(1.0f, std::abs(original.input[i])));
    }
    SUBCASE("channel mismatch") {
        RegionArchive arc = random_archive(22, 12, tiny);
        SampleRecord rec = materialize_sample(arc, 0, tiny);
        NormalizationStats st = compute_normalization({rec});
        st.sat_mean.resize(10);
        st.sat_std.resize(10);
        CHECK_THROWS_AS(normalize(rec, st), DataError);
    }
}

TEST_CASE("synthetic generator contracts") {
    SUBCASE("determinism and seed sensitivity") {
        SyntheticConfig cfg;
        cfg.geom = Geometry::tiny();
        cfg.mean_active_cells = 5.0;
        RegionArchive a = generate_synthetic_region(7, 24, cfg);
        RegionArchive b = generate_synthetic_region(7, 24, cfg);
        REQUIRE(a.satellite.size() == b.satellite.size());
        for (std::size_t i = 0; i < a.satellite.size(); ++i)
            REQUIRE(a.satellite[i] == b.satellite[i]);
        for (std::size_t i = 0; i < a.radar.size(); ++i) REQUIRE(a.radar[i] == b.radar[i]);

        RegionArchive c = generate_synthetic_region(8, 24, cfg);
        bool differs = false;
        for (std::size_t i = 0; i < a.radar.size() && !differs; ++i)
            differs = a.radar[i] != c.radar[i];
        CHECK(differs);
    }
    SUBCASE("default config bounds on the production grid") {
        RegionArchive arc = generate_synthetic_region(1, 96, SyntheticConfig{});
        CHECK(arc.satellite.shape() == std::vector<long>{96, 11, 252, 252});
        float max_rain = 0.0f;
        bool any_heavy_slot = false;
        for (long t = 0; t < 96; ++t) {
            float slot_max = 0.0f;
            for (long i = 0; i < 252 * 252; ++i)
                slot_max = std::max(slot_max, arc.radar[static_cast<std::size_t>(t * 252 * 252 + i)]);
            max_rain = std::max(max_rain, slot_max);
            any_heavy_slot = any_heavy_slot || slot_max > 1.0f;
        }
        CHECK(max_rain <= 60.0f);
        CHECK(any_heavy_slot);
    }
    SUBCASE("zero rain cells") {
        SyntheticConfig cfg;
        cfg.geom = Geometry::tiny();
        cfg.mean_active_cells = 0.0;
        RegionArchive arc = generate_synthetic_region(3, 16, cfg);
        for (std::size_t i = 0; i < arc.radar.size(); ++i) REQUIRE(arc.radar[i] == 0.0f);
        for (std::size_t i = 0; i < arc.radar_valid.size(); ++i) REQUIRE(arc.radar_valid[i] == 1);
    }
    SUBCASE("window too small") {
        SyntheticConfig cfg;
        cfg.geom = Geometry::tiny();
        CHECK_THROWS_AS(generate_synthetic_region(1, cfg.geom.window() - 1, cfg), DataError);
    }
    SUBCASE("missing-data disks mark invalid pixels") {
        SyntheticConfig cfg;
        cfg.geom = Geometry::tiny();
        cfg.missing_slot_prob = 1.0;
        RegionArchive arc = generate_synthetic_region(5, 16, cfg);
        std::size_t invalid = 0;
        for (std::size_t i = 0; i < arc.radar_valid.size(); ++i) invalid += arc.radar_valid[i] == 0;
        CHECK(invalid > 0);
    }
    SUBCASE("record invariants hold for every window") {
        SyntheticConfig cfg;
        cfg.geom = Geometry::tiny();
        cfg.mean_active_cells = 4.0;
        std::vector<RegionArchive> arcs{generate_synthetic_region(31, 30, cfg)};
        SequenceIndex idx = build_sequence_index(arcs, 1, cfg.geom);
        REQUIRE(idx.size() == 30 - cfg.geom.window() + 1);
        for (const auto& e : idx.entries) {
            SampleRecord rec = materialize_sample(arcs[0], e.start_slot, cfg.geom);
            REQUIRE(rec.input.dim(2) == cfg.geom.input);
            REQUIRE(rec.target.dim(0) == cfg.geom.out_len);
            REQUIRE(rec.target.shape() == rec.target_valid.shape());
            for (std::size_t i = 0; i < rec.target.size(); ++i)
                if (rec.target_valid[i]) REQUIRE(rec.target[i] >= 0.0f);
        }
    }
}

TEST_CASE("hdf5 store round-trip and errors") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "nowcast_h5_test";
    fs::create_directories(dir);
    Geometry tiny = Geometry::tiny();

    SUBCASE("round trip preserves every dataset and attribute") {
        RegionArchive arc = random_archive(40, 14, tiny);
        arc.radar_valid[3] = 0;
        const std::string path = (dir / "round.h5").string();
        save_region_archive(arc, path);
        RegionArchive back = load_region_archive(path);
        CHECK(back.region_id == arc.region_id);
        CHECK(back.slot_minutes == arc.slot_minutes);
        REQUIRE(back.satellite.shape() == arc.satellite.shape());
        for (std::size_t i = 0; i < arc.satellite.size(); ++i)
            REQUIRE(back.satellite[i] == arc.satellite[i]);
        for (std::size_t i = 0; i < arc.radar.size(); ++i) {
            REQUIRE(back.radar[i] == arc.radar[i]);
            REQUIRE(back.radar_valid[i] == arc.radar_valid[i]);
        }
        for (std::size_t i = 0; i < arc.static_fields.size(); ++i)
            REQUIRE(back.static_fields[i] == arc.static_fields[i]);
    }

    SUBCASE("windowed reader equals in-memory materialization") {
        RegionArchive arc = random_archive(41, 20, tiny);
        const std::string path = (dir / "reader.h5").string();
        save_region_archive(arc, path);
        ArchiveReader reader(path);
        CHECK(reader.n_slots() == 20);
        CHECK(reader.patch() == tiny.patch);
        CHECK(reader.region_id() == arc.region_id);
        for (int start : {0, 5, 12}) {
            SampleRecord mem = materialize_sample(arc, start, tiny);
            SampleRecord disk = reader.materialize(start, tiny);
            REQUIRE(disk.input.shape() == mem.input.shape());
            for (std::size_t i = 0; i < mem.input.size(); ++i)
                REQUIRE(disk.input[i] == mem.input[i]);
            for (std::size_t i = 0; i < mem.target.size(); ++i) {
                REQUIRE(disk.target[i] == mem.target[i]);
                REQUIRE(disk.target_valid[i] == mem.target_valid[i]);
            }
            for (std::size_t i = 0; i < mem.static_fields.size(); ++i)
                REQUIRE(disk.static_fields[i] == mem.static_fields[i]);
        }
        std::vector<float> rates(static_cast<std::size_t>(tiny.patch) * tiny.patch);
        std::vector<std::uint8_t> valid(rates.size());
        reader.read_radar_slot(7, rates.data(), valid.data());
        for (std::size_t i = 0; i < rates.size(); ++i)
            REQUIRE(rates[i] == arc.radar[static_cast<std::size_t>(7 * tiny.patch * tiny.patch) + i]);
    }

    SUBCASE("missing radar dataset is named in the error") {
        const std::string path = (dir / "noradar.h5").string();
        hid_t file = H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
        hsize_t dims[4] = {6, 11, 8, 8};
        hid_t space = H5Screate_simple(4, dims, nullptr);
        hid_t dset = H5Dcreate2(file, "satellite", H5T_NATIVE_FLOAT, space, H5P_DEFAULT,
                                H5P_DEFAULT, H5P_DEFAULT);
        std::vector<float> zeros(6 * 11 * 8 * 8, 0.0f);
        H5Dwrite(dset, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, zeros.data());
        H5Dclose(dset);
        H5Sclose(space);
        H5Fclose(file);
        CHECK_THROWS_WITH_AS(load_region_archive(path),
                             doctest::Contains("dataset 'radar' not found"), DataError);
    }

    SUBCASE("slot count mismatch is a shape error") {
        RegionArchive arc = random_archive(42, 10, tiny);
        const std::string path = (dir / "mismatch.h5").string();
        save_region_archive(arc, path);
        // rewrite radar with one slot fewer
        hid_t file = H5Fopen(path.c_str(), H5F_ACC_RDWR, H5P_DEFAULT);
        H5Ldelete(file, "radar", H5P_DEFAULT);
        hsize_t dims[3] = {9, static_cast<hsize_t>(tiny.patch), static_cast<hsize_t>(tiny.patch)};
        hid_t space = H5Screate_simple(3, dims, nullptr);
        hid_t dset = H5Dcreate2(file, "radar", H5T_NATIVE_FLOAT, space, H5P_DEFAULT, H5P_DEFAULT,
                                H5P_DEFAULT);
        std::vector<float> zeros(static_cast<std::size_t>(9) * tiny.patch * tiny.patch, 0.0f);
        H5Dwrite(dset, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, zeros.data());
        H5Dclose(dset);
        H5Sclose(space);
        H5Fclose(file);
        CHECK_THROWS_WITH_AS(load_region_archive(path), doctest::Contains("shape mismatch"),
                             DataError);
    }

    fs::remove_all(dir);
}

TEST_CASE("normalization stats file round-trip") {
    NormalizationStats st;
    st.sat_mean = {1.5f, -2.25f};
    st.sat_std = {0.5f, 3.0f};
    st.static_mean = {10.0f};
    st.static_std = {2.0f};
    auto path = (std::filesystem::temp_directory_path() / "nowcast_norm_test.txt").string();
    st.save(path);
    NormalizationStats back = NormalizationStats::load(path);
    CHECK(back.sat_mean == st.sat_mean);
    CHECK(back.sat_std == st.sat_std);
    CHECK(back.static_mean == st.static_mean);
    CHECK(back.static_std == st.static_std);
    std::filesystem::remove(path);
}

TEST_SUITE_END();
