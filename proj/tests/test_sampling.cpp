#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nowcast/sampling.hpp"
#include "nowcast/synthetic.hpp"

using namespace nowcast;

namespace {

Tensor uniform_target(long t, long p, float value) {
    return Tensor::full({t, p, p}, value);
}

Mask all_valid(long t, long p) { return Mask::full({t, p, p}, 1); }

}  // namespace

TEST_SUITE_BEGIN("sampling");

TEST_CASE("saturate fixed points") {
    CHECK(saturate(0.0) == 0.0);
    CHECK(saturate(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(saturate(10.0) == doctest::Approx(-std::expm1(-10.0)).epsilon(1e-15));
    CHECK(saturate(10.0) == doctest::Approx(0.9999546000702375).epsilon(1e-12));
    CHECK_THROWS_AS(saturate(-1e-9), DataError);
}

TEST_CASE("score_sample analytic cases") {
    SamplingConfig cfg;
    const long t = 8, p = 6;
    Mask valid = all_valid(t, p);

    SamplingDecision dry = score_sample(uniform_target(t, p, 0.0f), valid, cfg);
    CHECK(std::abs(dry.q_n - 1e-6) < 1e-9);
    CHECK(dry.x_sat == 0.0);

    SamplingDecision half =
        score_sample(uniform_target(t, p, static_cast<float>(std::log(2.0))), valid, cfg);
    CHECK(std::abs(half.q_n - 0.500001) < 1e-7);  // float target storage

    SamplingDecision heavy = score_sample(uniform_target(t, p, 10.0f), valid, cfg);
    CHECK(std::abs(heavy.q_n - 0.9999556000702375) < 1e-9);
}

TEST_CASE("invalid pixels are excluded; all-invalid scores zero") {
    SamplingConfig cfg;
    Tensor target = uniform_target(2, 4, 0.0f);
    Mask valid = all_valid(2, 4);
    target[0] = 1e6f;
    valid[0] = 0;  // huge value hidden by the mask
    SamplingDecision d = score_sample(target, valid, cfg);
    CHECK(d.x_sat == 0.0);

    Mask none({2, 4, 4});
    SamplingDecision all_masked = score_sample(uniform_target(2, 4, 30.0f), none, cfg);
    CHECK(all_masked.x_sat == 0.0);
    CHECK(all_masked.q_n == doctest::Approx(cfg.q_min));
}

TEST_CASE("monotonicity and bounds under fuzzing") {
    SamplingConfig cfg;
    Rng rng(99);
    for (int iter = 0; iter < 1000; ++iter) {
        Tensor target({2, 5, 5});
        Mask valid({2, 5, 5});
        for (std::size_t i = 0; i < target.size(); ++i) {
            target[i] = rng.uniform() < 0.3 ? 0.0f : static_cast<float>(rng.log_uniform(0.01, 60.0));
            valid[i] = rng.uniform() < 0.9 ? 1 : 0;
        }
        SamplingDecision before = score_sample(target, valid, cfg, iter);
        REQUIRE(before.q_n >= cfg.q_min);
        REQUIRE(before.q_n <= 1.0);
        REQUIRE(before.x_sat >= 0.0);
        REQUIRE(before.x_sat <= 1.0);

        // raise one already-valid pixel
        std::size_t pick = rng.below(target.size());
        for (std::size_t tries = 0; tries < target.size() && !valid[pick]; ++tries)
            pick = (pick + 1) % target.size();
        if (!valid[pick]) continue;
        target[pick] += static_cast<float>(rng.log_uniform(0.1, 30.0));
        SamplingDecision after = score_sample(target, valid, cfg, iter);
        REQUIRE(after.q_n >= before.q_n - 1e-12);
    }
}

TEST_CASE("acceptance rate converges to q") {
    // constant-q pool: every candidate has x_sat = 0.3
    const double v = -std::log(0.7);
    SamplingConfig cfg;
    cfg.seed = 17;
    const int n = 10000;
    int accepted = 0;
    Tensor target = uniform_target(1, 4, static_cast<float>(v));
    Mask valid = all_valid(1, 4);
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
        SamplingDecision d = score_sample(target, valid, cfg, i);
        accepted += d.accepted;
        q = d.q_n;
    }
    const double sigma = std::sqrt(n * q * (1 - q));
    CHECK(std::abs(accepted - n * q) < 4.0 * sigma);
}

TEST_CASE("dry pool acceptance stays near q_min") {
    SamplingConfig cfg;
    Tensor target = uniform_target(1, 4, 0.0f);
    Mask valid = all_valid(1, 4);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        cfg.seed = seed;
        int accepted = 0;
        for (int i = 0; i < 10000; ++i) accepted += score_sample(target, valid, cfg, i).accepted;
        CHECK(accepted <= 5);  // expectation is 0.01
    }
}

namespace {

SyntheticConfig tiny_synth(double cells = 6.0) {
    SyntheticConfig cfg;
    cfg.geom = Geometry::tiny();
    cfg.mean_active_cells = cells;
    cfg.sigma_min_km = 8.0;
    cfg.sigma_max_km = 30.0;
    return cfg;
}

}  // namespace

TEST_CASE("build_subset matches per-candidate scoring") {
    SyntheticConfig scfg = tiny_synth();
    std::vector<RegionArchive> archives;
    archives.push_back(generate_synthetic_region(5, 40, scfg));
    archives.push_back(generate_synthetic_region(6, 48, scfg));
    SequenceIndex index = build_sequence_index(archives, 1, scfg.geom);
    REQUIRE(index.size() > 0);

    SamplingConfig cfg;
    cfg.seed = 12;
    SubsetResult result = build_subset(index, archives, cfg);
    REQUIRE(result.decisions.size() == index.size());

    for (std::size_t n = 0; n < index.size(); ++n) {
        const auto& e = index.entries[n];
        SampleRecord rec = materialize_sample(archives[static_cast<std::size_t>(e.region)],
                                              e.start_slot, scfg.geom);
        SamplingDecision direct =
            score_sample(rec.target, rec.target_valid, cfg, static_cast<long>(n));
        REQUIRE(std::abs(direct.x_sat - result.decisions[n].x_sat) < 1e-9);
        REQUIRE(direct.accepted == result.decisions[n].accepted);
    }
}

TEST_CASE("build_subset determinism and target_size cap") {
    SyntheticConfig scfg = tiny_synth();
    std::vector<RegionArchive> archives{generate_synthetic_region(9, 60, scfg)};
    SequenceIndex index = build_sequence_index(archives, 1, scfg.geom);

    SamplingConfig cfg;
    cfg.seed = 4;
    SubsetResult a = build_subset(index, archives, cfg);
    SubsetResult b = build_subset(index, archives, cfg);
    CHECK(a.accepted == b.accepted);

    cfg.target_size = 10;
    SubsetResult capped = build_subset(index, archives, cfg);
    if (a.accepted.size() >= 10) {
        CHECK(capped.accepted.size() == 10);
        // kept candidates carry the highest q_n among accepted
        double min_kept = 2.0;
        for (long ord : capped.accepted)
            min_kept = std::min(min_kept, a.decisions[static_cast<std::size_t>(ord)].q_n);
        int better = 0;
        for (long ord : a.accepted) {
            bool kept = std::find(capped.accepted.begin(), capped.accepted.end(), ord) !=
                        capped.accepted.end();
            if (!kept && a.decisions[static_cast<std::size_t>(ord)].q_n > min_kept) ++better;
        }
        CHECK(better == 0);
    }

    SUBCASE("fully rainy pool accepts everything") {
        // saturate(60) ~ 1, so q_n = 1 for every candidate
        for (auto& d : a.decisions) {
            if (d.q_n >= 1.0) CHECK(d.accepted);
        }
        SamplingConfig sure;
        sure.q_min = 1.0;
        SubsetResult all = build_subset(index, archives, sure);
        CHECK(all.accepted.size() == index.size());
    }
}

TEST_CASE("decision log and subset files") {
    SyntheticConfig scfg = tiny_synth();
    std::vector<RegionArchive> archives{generate_synthetic_region(2, 44, scfg)};
    SequenceIndex index = build_sequence_index(archives, 2, scfg.geom);
    SamplingConfig cfg;
    cfg.seed = 8;
    SubsetResult result = build_subset(index, archives, cfg);

    auto dir = std::filesystem::temp_directory_path();
    auto log_path = (dir / "nowcast_decisions_test.tsv").string();
    auto subset_path = (dir / "nowcast_subset_test.tsv").string();
    save_decision_log(result.decisions, log_path);
    save_subset(result, index, subset_path);

    auto entries = load_subset(subset_path, index.region_ids);
    REQUIRE(entries.size() == result.accepted.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = index.entries[static_cast<std::size_t>(result.accepted[i])];
        CHECK(entries[i].region == e.region);
        CHECK(entries[i].start_slot == e.start_slot);
    }

    std::ifstream log(log_path);
    std::string header;
    std::getline(log, header);
    CHECK(header == "ordinal\tregion_id\tstart_slot\tx_sat\tq_n\taccepted");
    std::filesystem::remove(log_path);
    std::filesystem::remove(subset_path);
}

TEST_SUITE_END();
