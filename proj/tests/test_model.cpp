#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "nowcast/loss.hpp"
#include "nowcast/model.hpp"

using namespace nowcast;

namespace {

ModelConfig tiny_config(ModelConfig::Upsampler up = ModelConfig::Upsampler::bilinear,
                        bool clt = false, int out_len = 4) {
    ModelConfig cfg;
    cfg.geom = Geometry::tiny();
    cfg.geom.out_len = out_len;
    cfg.base_width = 8;
    cfg.depth = 2;
    cfg.sr_width = 8;
    cfg.sr_blocks = 2;
    cfg.upsampler = up;
    cfg.clt_enabled = clt;
    return cfg;
}

SampleRecord random_sample(std::uint64_t seed, const Geometry& geom) {
    SampleRecord s;
    Rng rng(seed);
    s.input = Tensor({geom.in_len, geom.sat_channels, geom.input, geom.input});
    s.static_fields = Tensor({geom.static_channels, geom.input, geom.input});
    s.target = Tensor({geom.out_len, geom.patch, geom.patch});
    s.target_valid = Mask::full({geom.out_len, geom.patch, geom.patch}, 1);
    for (std::size_t i = 0; i < s.input.size(); ++i)
        s.input[i] = static_cast<float>(rng.normal());
    for (std::size_t i = 0; i < s.static_fields.size(); ++i)
        s.static_fields[i] = static_cast<float>(rng.normal());
    for (std::size_t i = 0; i < s.target.size(); ++i)
        s.target[i] = rng.uniform() < 0.6 ? 0.0f : static_cast<float>(rng.log_uniform(0.01, 50.0));
    return s;
}

// independent scalar bilinear interpolation
double bilinear_oracle(const std::vector<double>& src, long s_h, long s_w, int f, long i, long j) {
    auto coord = [&](long out, long size) {
        double s = (out + 0.5) / f - 0.5;
        return std::min(std::max(s, 0.0), double(size - 1));
    };
    double si = coord(i, s_h), sj = coord(j, s_w);
    long i0 = static_cast<long>(std::floor(si)), j0 = static_cast<long>(std::floor(sj));
    long i1 = std::min(i0 + 1, s_h - 1), j1 = std::min(j0 + 1, s_w - 1);
    double wi = si - i0, wj = sj - j0;
    return src[static_cast<std::size_t>(i0 * s_w + j0)] * (1 - wi) * (1 - wj) +
           src[static_cast<std::size_t>(i0 * s_w + j1)] * (1 - wi) * wj +
           src[static_cast<std::size_t>(i1 * s_w + j0)] * wi * (1 - wj) +
           src[static_cast<std::size_t>(i1 * s_w + j1)] * wi * wj;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("stack_time and unstack_time") {
    Rng rng(1);
    Tensor x({2, 4, 11, 3, 3});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
    Tensor y = stack_time(x);
    CHECK(y.shape() == std::vector<long>{2, 44, 3, 3});
    for (long b = 0; b < 2; ++b)
        for (long t = 0; t < 4; ++t)
            for (long c = 0; c < 11; ++c)
                for (long i = 0; i < 3; ++i)
                    for (long j = 0; j < 3; ++j)
                        REQUIRE(y.at(b, t * 11 + c, i, j) == x.at(b, t, c, i, j));
    Tensor back = unstack_time(y, 4);
    CHECK(back.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(back[i] == x[i]);

    Tensor wide({1, 480, 2, 2});
    CHECK(unstack_time(wide, 32).shape() == std::vector<long>{1, 32, 15, 2, 2});
    Tensor odd({1, 16, 2, 2});
    CHECK_THROWS_AS(unstack_time(odd, 5), DataError);

    Tensor single({2, 1, 7, 3, 3});
    for (std::size_t i = 0; i < single.size(); ++i) single[i] = static_cast<float>(rng.normal());
    Tensor collapsed = stack_time(single);
    for (std::size_t i = 0; i < single.size(); ++i) REQUIRE(collapsed[i] == single[i]);
}

TEST_CASE("assemble_input channel layout") {
    ModelConfig cfg = tiny_config();
    SampleRecord s = random_sample(3, cfg.geom);

    Tensor x = assemble_batch({&s}, cfg);
    CHECK(x.shape() == std::vector<long>{1, 47, 16, 16});
    // stacked satellite first, statics after
    CHECK(x.at(0, 0, 5, 5) == s.input.at(0, 0, 5, 5));
    CHECK(x.at(0, 43, 5, 5) == s.input.at(3, 10, 5, 5));
    CHECK(x.at(0, 44, 2, 2) == s.static_fields.at(0, 2, 2));

    ModelConfig clt = tiny_config(ModelConfig::Upsampler::bilinear, true, 32);
    Tensor x0 = assemble_input(s, clt, 0);
    CHECK(x0.shape() == std::vector<long>{1, 48, 16, 16});
    for (long i = 0; i < 16 * 16; ++i)
        REQUIRE(x0[static_cast<std::size_t>(47 * 16 * 16 + i)] == 0.0f);
    Tensor x31 = assemble_input(s, clt, 31);
    for (long i = 0; i < 16 * 16; ++i)
        REQUIRE(x31[static_cast<std::size_t>(47 * 16 * 16 + i)] == 1.0f);

    CHECK_THROWS_AS(assemble_input(s, clt, 32), DataError);
    CHECK_THROWS_AS(assemble_input(s, clt, -1), DataError);
    CHECK_THROWS_AS(assemble_batch({&s}, clt), DataError);           // missing lead
    CHECK_THROWS_AS(assemble_batch({&s}, cfg, {0}), DataError);      // lead without clt
}

TEST_CASE("unet_forward shapes and errors") {
    ModelConfig cfg = tiny_config();
    Model model(cfg);
    model.init_params(5);
    Rng rng(6);
    Tensor x({2, cfg.in_channels(), 16, 16});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
    Tensor logits = model.unet_forward(x, false);
    CHECK(logits.shape() == std::vector<long>{2, cfg.out_channels(), 16, 16});
    CHECK(cfg.out_channels() == 60);  // 4 lead times x 15 classes

    Tensor bad({1, cfg.in_channels(), 12, 12});
    CHECK_THROWS_AS(model.unet_forward(bad, false), DataError);

    ModelConfig clt = tiny_config(ModelConfig::Upsampler::bilinear, true, 32);
    Model clt_model(clt);
    clt_model.init_params(5);
    Tensor xc({1, clt.in_channels(), 16, 16});
    Tensor lc = clt_model.unet_forward(xc, false);
    CHECK(lc.shape() == std::vector<long>{1, 15, 16, 16});
}

TEST_CASE("crop_center offsets") {
    Rng rng(7);
    Tensor x({1, 2, 128, 128});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
    Tensor c = nn::crop_center(x, 42);
    CHECK(c.shape() == std::vector<long>{1, 2, 42, 42});
    CHECK(c.at(0, 0, 0, 0) == x.at(0, 0, 43, 43));  // offset (128-42)/2
    CHECK(c.at(0, 1, 41, 41) == x.at(0, 1, 84, 84));

    Tensor flat = Tensor::full({1, 1, 10, 10}, 3.5f);
    Tensor cf = nn::crop_center(flat, 4);
    for (std::size_t i = 0; i < cf.size(); ++i) REQUIRE(cf[i] == 3.5f);

    Tensor same({1, 1, 42, 42});
    for (std::size_t i = 0; i < same.size(); ++i) same[i] = static_cast<float>(rng.normal());
    Tensor id = nn::crop_center(same, 42);
    for (std::size_t i = 0; i < same.size(); ++i) REQUIRE(id[i] == same[i]);

    CHECK_THROWS_AS(nn::crop_center(Tensor({1, 1, 8, 8}), 42), DataError);
}

TEST_CASE("nearest upsample replicates blocks") {
    Rng rng(8);
    Tensor x({1, 3, 42, 42});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
    Tensor y = nn::upsample_nearest(x, 6);
    CHECK(y.shape() == std::vector<long>{1, 3, 252, 252});
    for (int probe = 0; probe < 500; ++probe) {
        long c = static_cast<long>(rng.below(3));
        long i = static_cast<long>(rng.below(252)), j = static_cast<long>(rng.below(252));
        REQUIRE(y.at(0l, c, i, j) == x.at(0l, c, i / 6, j / 6));
    }
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sx += x[i];
    for (std::size_t i = 0; i < y.size(); ++i) sy += y[i];
    CHECK(sy == doctest::Approx(36.0 * sx).epsilon(1e-6));

    Tensor one = Tensor::full({1, 1, 1, 1}, 5.0f);
    Tensor block = nn::upsample_nearest(one, 4);
    for (std::size_t i = 0; i < block.size(); ++i) REQUIRE(block[i] == 5.0f);
}

TEST_CASE("bilinear upsample against the scalar oracle") {
    SUBCASE("constants stay constant") {
        Tensor x = Tensor::full({1, 1, 7, 7}, 2.5f);
        Tensor y = nn::upsample_bilinear(x, 6);
        for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == doctest::Approx(2.5f));
    }
    SUBCASE("linear ramp reproduced at interior pixels") {
        const long s = 8;
        Tensor x({1, 1, s, s});
        for (long i = 0; i < s; ++i)
            for (long j = 0; j < s; ++j)
                x.at(0l, 0l, i, j) = static_cast<float>(0.25 + 0.5 * i - 0.125 * j);
        Tensor y = nn::upsample_bilinear(x, 6);
        for (long i = 0; i < s * 6; ++i)
            for (long j = 0; j < s * 6; ++j) {
                double si = (i + 0.5) / 6.0 - 0.5, sj = (j + 0.5) / 6.0 - 0.5;
                if (si < 0 || sj < 0 || si > s - 1 || sj > s - 1) continue;  // clamped border
                double expect = 0.25 + 0.5 * si - 0.125 * sj;
                REQUIRE(std::abs(y.at(0l, 0l, i, j) - expect) < 1e-6);
            }
    }
    SUBCASE("2x2 case and random tensors match elementwise") {
        std::vector<double> quad = {0.0, 1.0, 0.0, 1.0};
        Tensor x({1, 1, 2, 2});
        for (int i = 0; i < 4; ++i) x[static_cast<std::size_t>(i)] = static_cast<float>(quad[static_cast<std::size_t>(i)]);
        Tensor y = nn::upsample_bilinear(x, 6);
        for (long i = 0; i < 12; ++i)
            for (long j = 0; j < 12; ++j)
                REQUIRE(std::abs(y.at(0l, 0l, i, j) - bilinear_oracle(quad, 2, 2, 6, i, j)) < 1e-6);

        Rng rng(9);
        for (int iter = 0; iter < 5; ++iter) {
            const long s_h = 3 + static_cast<long>(rng.below(8));
            const long s_w = 3 + static_cast<long>(rng.below(8));
            const int f = 2 + static_cast<int>(rng.below(5));
            std::vector<double> src(static_cast<std::size_t>(s_h * s_w));
            Tensor t({1, 1, s_h, s_w});
            for (std::size_t i = 0; i < src.size(); ++i)
                t[i] = static_cast<float>(src[i] = rng.uniform(-3.0, 3.0));
            Tensor u = nn::upsample_bilinear(t, f);
            double max_err = 0.0;
            for (long i = 0; i < s_h * f; ++i)
                for (long j = 0; j < s_w * f; ++j)
                    max_err = std::max(max_err, std::abs(double(u.at(0l, 0l, i, j)) -
                                                         bilinear_oracle(src, s_h, s_w, f, i, j)));
            REQUIRE(max_err < 1e-6);
        }
    }
}

TEST_CASE("pixel shuffle round trip") {
    Rng rng(10);
    Tensor x({2, 18, 5, 5});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
    Tensor y = nn::pixel_shuffle(x, 3);
    CHECK(y.shape() == std::vector<long>{2, 2, 15, 15});
    Tensor back = nn::pixel_shuffle_backward(y, 3);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(back[i] == x[i]);
    CHECK_THROWS_AS(nn::pixel_shuffle(Tensor({1, 5, 2, 2}), 2), DataError);
}

TEST_CASE("forward_upsampled output grid and softmax normalization") {
    for (auto up : {ModelConfig::Upsampler::nearest, ModelConfig::Upsampler::bilinear,
                    ModelConfig::Upsampler::learned}) {
        ModelConfig cfg = tiny_config(up);
        Model model(cfg);
        model.init_params(11);
        SampleRecord s = random_sample(12, cfg.geom);
        Tensor x = assemble_batch({&s}, cfg);
        Tensor logits = model.forward_upsampled(x, false);
        REQUIRE(logits.shape() == std::vector<long>{1, 60, 36, 36});

        ForecastTensor f = softmax_forecast(logits, cfg.classes);
        REQUIRE(f.probs.shape() == std::vector<long>{4, 15, 36, 36});
        const long hw = 36 * 36;
        for (long t = 0; t < 4; ++t)
            for (long i = 0; i < hw; i += 97) {
                double sum = 0.0;
                for (long k = 0; k < 15; ++k)
                    sum += f.probs[static_cast<std::size_t>((t * 15 + k) * hw + i)];
                REQUIRE(std::abs(sum - 1.0) < 1e-5);
            }
    }
}

TEST_CASE("zeroed learned trunk equals the bilinear pipeline") {
    ModelConfig learned_cfg = tiny_config(ModelConfig::Upsampler::learned);
    Model learned(learned_cfg);
    learned.init_params(21);
    for (auto& p : learned.params())
        if (p.name.rfind("sr.", 0) == 0) p.value->zero();

    ModelConfig bilinear_cfg = tiny_config(ModelConfig::Upsampler::bilinear);
    Model bilinear(bilinear_cfg);
    bilinear.init_params(22);
    {
        auto src = learned.params();
        std::map<std::string, Tensor*> by_name;
        for (auto& p : src) by_name[p.name] = p.value;
        for (auto& p : bilinear.params())
            if (by_name.count(p.name)) *p.value = *by_name[p.name];
    }

    SampleRecord s = random_sample(23, learned_cfg.geom);
    Tensor x = assemble_batch({&s}, learned_cfg);
    Tensor a = learned.forward_upsampled(x, false);
    Tensor b = bilinear.forward_upsampled(x, false);
    REQUIRE(a.shape() == b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("gradient reaches the learned trunk") {
    ModelConfig cfg = tiny_config(ModelConfig::Upsampler::learned);
    Model model(cfg);
    model.init_params(31);
    model.zero_grad();
    SampleRecord s = random_sample(32, cfg.geom);
    Tensor x = assemble_batch({&s}, cfg);
    Tensor logits = model.forward_upsampled(x, true);
    Tensor dl(logits.shape());
    Rng rng(33);
    for (std::size_t i = 0; i < dl.size(); ++i) dl[i] = static_cast<float>(rng.normal());
    model.backward_upsampled(dl);
    double trunk_grad = 0.0;
    for (auto& p : model.params())
        if (p.name.rfind("sr.", 0) == 0)
            for (std::size_t i = 0; i < p.grad->size(); ++i)
                trunk_grad += std::abs(double((*p.grad)[i]));
    CHECK(trunk_grad > 0.0);
}

TEST_CASE("batch permutation equivariance") {
    ModelConfig cfg = tiny_config();
    Model model(cfg);
    model.init_params(41);
    Rng rng(42);
    Tensor x({3, cfg.in_channels(), 16, 16});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());

    Tensor y = model.forward_upsampled(x, false);
    Tensor xp(x.shape());
    const long stride_x = x.dim(1) * x.dim(2) * x.dim(3);
    const int perm[3] = {2, 0, 1};
    for (long n = 0; n < 3; ++n)
        std::copy(x.data() + perm[n] * stride_x, x.data() + (perm[n] + 1) * stride_x,
                  xp.data() + n * stride_x);
    Tensor yp = model.forward_upsampled(xp, false);
    const long stride_y = y.dim(1) * y.dim(2) * y.dim(3);
    for (long n = 0; n < 3; ++n)
        for (long i = 0; i < stride_y; ++i)
            REQUIRE(yp[static_cast<std::size_t>(n * stride_y + i)] ==
                    y[static_cast<std::size_t>(perm[n] * stride_y + i)]);
}

TEST_CASE("lead-time conditioning changes the output") {
    ModelConfig cfg = tiny_config(ModelConfig::Upsampler::bilinear, true, 32);
    Model model(cfg);
    model.init_params(51);
    SampleRecord s = random_sample(52, cfg.geom);
    Tensor x0 = assemble_input(s, cfg, 0);
    Tensor x31 = assemble_input(s, cfg, 31);
    Tensor y0 = model.forward_upsampled(x0, false);
    Tensor y31 = model.forward_upsampled(x31, false);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < y0.size(); ++i)
        max_diff = std::max(max_diff, std::abs(double(y0[i]) - double(y31[i])));
    CHECK(max_diff > 0.0);
}

TEST_CASE("predict shape matches with and without conditioning") {
    SampleRecord s = random_sample(61, Geometry::tiny());
    ModelConfig plain = tiny_config();
    Model a(plain);
    a.init_params(62);
    ForecastTensor fa = predict(a, s);

    ModelConfig clt = tiny_config(ModelConfig::Upsampler::bilinear, true, 4);
    Model b(clt);
    b.init_params(63);
    ForecastTensor fb = predict(b, s);
    CHECK(fa.probs.shape() == fb.probs.shape());
}

TEST_CASE("checkpoint round trip") {
    namespace fs = std::filesystem;
    ModelConfig cfg = tiny_config(ModelConfig::Upsampler::learned);
    Model model(cfg);
    model.init_params(71);
    BucketScale scale = make_scale("mmh");
    NormalizationStats stats;
    stats.sat_mean.assign(11, 0.25f);
    stats.sat_std.assign(11, 1.5f);
    stats.static_mean.assign(3, -1.0f);
    stats.static_std.assign(3, 2.0f);

    const std::string path = (fs::temp_directory_path() / "nowcast_ckpt_test.nwc").string();
    save_checkpoint(path, model, scale, stats);

    CheckpointMeta meta;
    Model back = load_checkpoint(path, &meta);
    CHECK(meta.version == 1);
    CHECK(meta.scale.boundaries == scale.boundaries);
    CHECK(meta.stats.sat_std == stats.sat_std);
    CHECK(meta.config.upsampler == cfg.upsampler);

    auto pa = model.params();
    auto pb = back.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i].name == pb[i].name);
        for (std::size_t j = 0; j < pa[i].value->size(); ++j)
            REQUIRE((*pa[i].value)[j] == (*pb[i].value)[j]);
    }

    SampleRecord s = random_sample(72, cfg.geom);
    ForecastTensor fa = predict(model, s);
    ForecastTensor fb = predict(back, s);
    for (std::size_t i = 0; i < fa.probs.size(); ++i) REQUIRE(fa.probs[i] == fb.probs[i]);

    SUBCASE("corrupt magic is rejected") {
        std::ofstream bad(path, std::ios::binary);
        bad << "NOTACKPTgarbage";
        bad.close();
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    fs::remove(path);
}

TEST_CASE("finite-difference gradient check on the tiny config") {
    for (auto up : {ModelConfig::Upsampler::bilinear, ModelConfig::Upsampler::learned}) {
        CAPTURE(static_cast<int>(up));
        ModelConfig cfg = tiny_config(up);
        ModelT<double> model(cfg);
        model.init_params(81);

        Rng rng(82);
        TensorT<double> x({2, cfg.in_channels(), 16, 16});
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
        const long t_out = cfg.out_time();
        TensorT<std::uint8_t> classes({2, t_out, 36, 36});
        Mask valid({2, t_out, 36, 36});
        for (std::size_t i = 0; i < classes.size(); ++i) {
            classes[i] = static_cast<std::uint8_t>(rng.below(15));
            valid[i] = rng.uniform() < 0.85 ? 1 : 0;
        }
        BucketScale scale = make_scale("mmh_w");

        auto loss_value = [&]() {
            TensorT<double> logits = model.forward_upsampled(x, true);
            auto lr = weighted_cross_entropy(logits, classes, valid, scale.weights, false);
            return lr.sum / lr.weight;
        };

        model.zero_grad();
        TensorT<double> logits = model.forward_upsampled(x, true);
        auto lr = weighted_cross_entropy(logits, classes, valid, scale.weights, true);
        model.backward_upsampled(lr.dlogits);
        const double weight = lr.weight;

        auto params = model.params();
        Rng pick(83);
        const double h = 1e-4;
        for (int probe = 0; probe < 10; ++probe) {
            auto& p = params[pick.below(params.size())];
            const std::size_t idx = pick.below(p.value->size());
            const double analytic = (*p.grad)[idx] / weight;
            const double saved = (*p.value)[idx];
            (*p.value)[idx] = saved + h;
            const double lp = loss_value();
            (*p.value)[idx] = saved - h;
            const double lm = loss_value();
            (*p.value)[idx] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
            CAPTURE(p.name);
            CAPTURE(idx);
            REQUIRE(std::abs(fd - analytic) / denom < 1e-3);
        }
    }
}

TEST_SUITE_END();
