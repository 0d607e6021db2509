#include "nowcast/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace nowcast {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

const char* ModelConfig::upsampler_name(Upsampler u) {
    switch (u) {
        case Upsampler::nearest: return "nearest";
        case Upsampler::bilinear: return "bilinear";
        case Upsampler::learned: return "learned";
    }
    return "bilinear";
}

ModelConfig::Upsampler ModelConfig::upsampler_from_name(const std::string& name) {
    if (name == "nearest") return Upsampler::nearest;
    if (name == "bilinear") return Upsampler::bilinear;
    if (name == "learned") return Upsampler::learned;
    throw DataError("unknown upsampler '" + name + "'");
}

std::string ModelConfig::to_json() const {
    json j;
    j["geometry"] = {{"patch", geom.patch},   {"input", geom.input},
                     {"crop", geom.crop},     {"sr_factor", geom.sr_factor},
                     {"in_len", geom.in_len}, {"out_len", geom.out_len},
                     {"sat_channels", geom.sat_channels},
                     {"static_channels", geom.static_channels},
                     {"slot_minutes", geom.slot_minutes}};
    j["classes"] = classes;
    j["base_width"] = base_width;
    j["depth"] = depth;
    j["clt"] = clt_enabled;
    j["upsampler"] = upsampler_name(upsampler);
    j["sr_width"] = sr_width;
    j["sr_blocks"] = sr_blocks;
    return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    ModelConfig c;
    if (j.contains("geometry")) {
        const json& g = j["geometry"];
        c.geom.patch = g.value("patch", c.geom.patch);
        c.geom.input = g.value("input", c.geom.input);
        c.geom.crop = g.value("crop", c.geom.crop);
        c.geom.sr_factor = g.value("sr_factor", c.geom.sr_factor);
        c.geom.in_len = g.value("in_len", c.geom.in_len);
        c.geom.out_len = g.value("out_len", c.geom.out_len);
        c.geom.sat_channels = g.value("sat_channels", c.geom.sat_channels);
        c.geom.static_channels = g.value("static_channels", c.geom.static_channels);
        c.geom.slot_minutes = g.value("slot_minutes", c.geom.slot_minutes);
    }
    c.classes = j.value("classes", c.classes);
    c.base_width = j.value("base_width", c.base_width);
    c.depth = j.value("depth", c.depth);
    c.clt_enabled = j.value("clt", c.clt_enabled);
    c.upsampler = upsampler_from_name(j.value("upsampler", std::string("bilinear")));
    c.sr_width = j.value("sr_width", c.sr_width);
    c.sr_blocks = j.value("sr_blocks", c.sr_blocks);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// stack / unstack / assemble
// ---------------------------------------------------------------------------

Tensor stack_time(const Tensor& x) {
    if (x.rank() != 5) throw DataError("stack_time: expected [B,T,C,H,W]");
    Tensor y = x;
    y.reshape({x.dim(0), x.dim(1) * x.dim(2), x.dim(3), x.dim(4)});
    return y;
}

Tensor unstack_time(const Tensor& y, int t_out) {
    if (y.rank() != 4) throw DataError("unstack_time: expected [B,T*C,H,W]");
    if (t_out < 1 || y.dim(1) % t_out != 0)
        throw DataError("unstack_time: channel count " + std::to_string(y.dim(1)) +
                        " not divisible by T'=" + std::to_string(t_out));
    Tensor x = y;
    x.reshape({y.dim(0), t_out, y.dim(1) / t_out, y.dim(2), y.dim(3)});
    return x;
}

Tensor assemble_batch(const std::vector<const SampleRecord*>& batch, const ModelConfig& cfg,
                      const std::vector<int>& lead_times) {
    if (batch.empty()) throw DataError("assemble: empty batch");
    if (cfg.clt_enabled) {
        if (lead_times.size() != batch.size())
            throw DataError("assemble: lead time required for every sample when conditioning");
        for (int lt : lead_times)
            if (lt < 0 || lt >= cfg.geom.out_len)
                throw DataError("assemble: lead time " + std::to_string(lt) + " out of [0," +
                                std::to_string(cfg.geom.out_len) + ")");
    } else if (!lead_times.empty()) {
        throw DataError("assemble: lead times given but conditioning is disabled");
    }

    const long b = static_cast<long>(batch.size());
    const long in = cfg.geom.input;
    const long c_in = cfg.in_channels();
    const long c_stack = cfg.geom.in_len * cfg.geom.sat_channels;
    Tensor x({b, c_in, in, in});
    const long plane = in * in;
    for (long n = 0; n < b; ++n) {
        const SampleRecord& s = *batch[static_cast<std::size_t>(n)];
        require_shape(s.input, {cfg.geom.in_len, cfg.geom.sat_channels, in, in}, "assemble input");
        require_shape(s.static_fields, {cfg.geom.static_channels, in, in}, "assemble static");
        float* dst = x.data() + n * c_in * plane;
        // time stacked on channels: [T,C,H,W] is already (t*C+c)-ordered
        std::memcpy(dst, s.input.data(), static_cast<std::size_t>(c_stack * plane) * sizeof(float));
        std::memcpy(dst + c_stack * plane, s.static_fields.data(),
                    static_cast<std::size_t>(cfg.geom.static_channels * plane) * sizeof(float));
        if (cfg.clt_enabled) {
            const float v = cfg.geom.out_len > 1
                                ? float(lead_times[static_cast<std::size_t>(n)]) /
                                      float(cfg.geom.out_len - 1)
                                : 0.0f;
            std::fill(dst + (c_in - 1) * plane, dst + c_in * plane, v);
        }
    }
    return x;
}

Tensor assemble_input(const SampleRecord& sample, const ModelConfig& cfg, int lead_time) {
    std::vector<int> leads;
    if (cfg.clt_enabled) leads.push_back(lead_time);
    return assemble_batch({&sample}, cfg, leads);
}

// ---------------------------------------------------------------------------
// blocks
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    const long n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
    TensorT<T> out({n, ca + cb, h, w});
    const long pa = ca * h * w, pb = cb * h * w;
    for (long i = 0; i < n; ++i) {
        std::memcpy(out.data() + i * (pa + pb), a.data() + i * pa,
                    static_cast<std::size_t>(pa) * sizeof(T));
        std::memcpy(out.data() + i * (pa + pb) + pa, b.data() + i * pb,
                    static_cast<std::size_t>(pb) * sizeof(T));
    }
    return out;
}

template <typename T>
void split_channels(const TensorT<T>& d, long ca, TensorT<T>& da, TensorT<T>& db) {
    const long n = d.dim(0), c = d.dim(1), h = d.dim(2), w = d.dim(3);
    const long cb = c - ca;
    da = TensorT<T>({n, ca, h, w});
    db = TensorT<T>({n, cb, h, w});
    const long pa = ca * h * w, pb = cb * h * w;
    for (long i = 0; i < n; ++i) {
        std::memcpy(da.data() + i * pa, d.data() + i * (pa + pb),
                    static_cast<std::size_t>(pa) * sizeof(T));
        std::memcpy(db.data() + i * pb, d.data() + i * (pa + pb) + pa,
                    static_cast<std::size_t>(pb) * sizeof(T));
    }
}

// Pre-activation residual block: BN-ReLU-conv3x3(s)-BN-ReLU-conv3x3, with an
// identity shortcut, or a 1x1 projection (from the pre-activation) when the
// shape changes.
template <typename T>
struct ResBlock {
    nn::BatchNorm2d<T> bn1, bn2;
    nn::ReLU<T> relu1, relu2;
    nn::Conv2d<T> conv1, conv2;
    nn::Conv2d<T> proj;
    bool has_proj = false;

    ResBlock(int in_ch, int out_ch, int stride)
        : bn1(in_ch),
          bn2(out_ch),
          conv1(in_ch, out_ch, 3, stride),
          conv2(out_ch, out_ch, 3, 1),
          has_proj(in_ch != out_ch || stride != 1) {
        if (has_proj) proj = nn::Conv2d<T>(in_ch, out_ch, 1, stride, 0);
    }

    void init(Rng& rng) {
        conv1.init(rng);
        conv2.init(rng);
        if (has_proj) proj.init(rng);
    }

    TensorT<T> forward(const TensorT<T>& x, bool train) {
        TensorT<T> a = relu1.forward(bn1.forward(x, train));
        TensorT<T> h = conv1.forward(a);
        h = relu2.forward(bn2.forward(h, train));
        h = conv2.forward(h);
        if (has_proj) {
            nn::add_inplace(h, proj.forward(a));
        } else {
            nn::add_inplace(h, x);
        }
        return h;
    }

    TensorT<T> backward(const TensorT<T>& dy) {
        TensorT<T> dh = conv2.backward(dy);
        dh = bn2.backward(relu2.backward(dh));
        TensorT<T> da = conv1.backward(dh);
        if (has_proj) nn::add_inplace(da, proj.backward(dy));
        TensorT<T> dx = bn1.backward(relu1.backward(da));
        if (!has_proj) nn::add_inplace(dx, dy);
        return dx;
    }

    void collect(const std::string& p, std::vector<nn::Param<T>>& params,
                 std::vector<nn::Buffer<T>>& buffers) {
        bn1.collect(p + ".bn1", params, buffers);
        bn2.collect(p + ".bn2", params, buffers);
        conv1.collect(p + ".conv1", params, buffers);
        conv2.collect(p + ".conv2", params, buffers);
        if (has_proj) proj.collect(p + ".proj", params, buffers);
    }
};

// Up-stage: nearest x2, concat the encoder skip when there is one, then two
// conv-BN-ReLU units.
template <typename T>
struct DecoderBlock {
    nn::Conv2d<T> conv1, conv2;
    nn::BatchNorm2d<T> bn1, bn2;
    nn::ReLU<T> relu1, relu2;
    long skip_ch = 0;

    DecoderBlock(int in_ch, int skip, int out_ch)
        : conv1(in_ch + skip, out_ch, 3, 1),
          conv2(out_ch, out_ch, 3, 1),
          bn1(out_ch),
          bn2(out_ch),
          skip_ch(skip) {}

    void init(Rng& rng) {
        conv1.init(rng);
        conv2.init(rng);
    }

    TensorT<T> forward(const TensorT<T>& x, const TensorT<T>* skip, bool train) {
        TensorT<T> u = nn::upsample2_nearest(x);
        if (skip_ch > 0) u = concat_channels(u, *skip);
        TensorT<T> h = relu1.forward(bn1.forward(conv1.forward(u), train));
        return relu2.forward(bn2.forward(conv2.forward(h), train));
    }

    // Returns grad w.r.t. x; grad w.r.t. the skip goes to *dskip.
    TensorT<T> backward(const TensorT<T>& dy, TensorT<T>* dskip) {
        TensorT<T> dh = conv2.backward(bn2.backward(relu2.backward(dy)));
        TensorT<T> dcat = conv1.backward(bn1.backward(relu1.backward(dh)));
        TensorT<T> du;
        if (skip_ch > 0) {
            TensorT<T> ds;
            split_channels(dcat, dcat.dim(1) - skip_ch, du, ds);
            *dskip = std::move(ds);
        } else {
            du = std::move(dcat);
        }
        return nn::upsample2_nearest_backward(du);
    }

    void collect(const std::string& p, std::vector<nn::Param<T>>& params,
                 std::vector<nn::Buffer<T>>& buffers) {
        conv1.collect(p + ".conv1", params, buffers);
        conv2.collect(p + ".conv2", params, buffers);
        bn1.collect(p + ".bn1", params, buffers);
        bn2.collect(p + ".bn2", params, buffers);
    }
};

// Norm-free residual unit for the super-resolution trunk.
template <typename T>
struct SrBlock {
    nn::Conv2d<T> conv1, conv2;
    nn::ReLU<T> relu;

    explicit SrBlock(int width) : conv1(width, width, 3, 1), conv2(width, width, 3, 1) {}

    void init(Rng& rng) {
        conv1.init(rng);
        conv2.init(rng);
    }

    TensorT<T> forward(const TensorT<T>& x) {
        TensorT<T> h = conv2.forward(relu.forward(conv1.forward(x)));
        nn::add_inplace(h, x);
        return h;
    }

    TensorT<T> backward(const TensorT<T>& dy) {
        TensorT<T> dh = conv1.backward(relu.backward(conv2.backward(dy)));
        nn::add_inplace(dh, dy);
        return dh;
    }

    void collect(const std::string& p, std::vector<nn::Param<T>>& params,
                 std::vector<nn::Buffer<T>>& buffers) {
        conv1.collect(p + ".conv1", params, buffers);
        conv2.collect(p + ".conv2", params, buffers);
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

template <typename T>
struct ModelT<T>::Layers {
    nn::Conv2d<T> stem_conv;
    nn::BatchNorm2d<T> stem_bn;
    nn::ReLU<T> stem_relu;
    std::vector<detail::ResBlock<T>> enc;
    std::vector<detail::DecoderBlock<T>> dec;
    nn::Conv2d<T> head;

    nn::Conv2d<T> sr_in;
    nn::ReLU<T> sr_in_relu;
    std::vector<detail::SrBlock<T>> sr_blocks;
    nn::Conv2d<T> sr_up2, sr_up3;
    nn::ReLU<T> sr_up2_relu, sr_up3_relu;
    nn::Conv2d<T> sr_out;

    std::vector<TensorT<T>> feats;       // encoder stage outputs, forward cache
    std::vector<TensorT<T>> skip_grads;  // filled by decoder backward

    explicit Layers(const ModelConfig& cfg)
        : stem_conv(cfg.in_channels(), cfg.base_width, 3, 2), stem_bn(cfg.base_width) {
        int ch = cfg.base_width;
        for (int stage = 1; stage <= cfg.depth; ++stage) {
            const int out_ch = cfg.base_width << (stage - 1);
            const int stride = stage == 1 ? 1 : 2;
            enc.emplace_back(ch, out_ch, stride);
            enc.emplace_back(out_ch, out_ch, 1);
            ch = out_ch;
        }
        for (int j = 1; j <= cfg.depth; ++j) {
            const int skip = j < cfg.depth ? (cfg.base_width << (cfg.depth - j - 1)) : 0;
            const int out_ch = j < cfg.depth ? (cfg.base_width << (cfg.depth - j - 1)) : cfg.base_width;
            dec.emplace_back(ch, skip, out_ch);
            ch = out_ch;
        }
        head = nn::Conv2d<T>(cfg.base_width, cfg.out_channels(), 1, 1, 0);
        if (cfg.upsampler == ModelConfig::Upsampler::learned) {
            sr_in = nn::Conv2d<T>(cfg.base_width, cfg.sr_width, 3, 1);
            for (int i = 0; i < cfg.sr_blocks; ++i) sr_blocks.emplace_back(cfg.sr_width);
            sr_up2 = nn::Conv2d<T>(cfg.sr_width, cfg.sr_width * 4, 3, 1);
            sr_up3 = nn::Conv2d<T>(cfg.sr_width, cfg.sr_width * 9, 3, 1);
            sr_out = nn::Conv2d<T>(cfg.sr_width, cfg.out_channels(), 1, 1, 0);
        }
    }
};

template <typename T>
ModelT<T>::ModelT(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.geom.sr_factor != 6 && cfg_.upsampler == ModelConfig::Upsampler::learned)
        throw DataError("learned upsampler implemented for factor 6 (2*3)");
    l_ = std::make_unique<Layers>(cfg_);
}

template <typename T>
ModelT<T>::~ModelT() = default;
template <typename T>
ModelT<T>::ModelT(ModelT&&) noexcept = default;
template <typename T>
ModelT<T>& ModelT<T>::operator=(ModelT&&) noexcept = default;

template <typename T>
void ModelT<T>::init_params(std::uint64_t seed) {
    Rng rng(seed);
    l_->stem_conv.init(rng);
    for (auto& b : l_->enc) b.init(rng);
    for (auto& d : l_->dec) d.init(rng);
    l_->head.init(rng);
    if (cfg_.upsampler == ModelConfig::Upsampler::learned) {
        l_->sr_in.init(rng);
        for (auto& b : l_->sr_blocks) b.init(rng);
        l_->sr_up2.init(rng);
        l_->sr_up3.init(rng);
        l_->sr_out.init(rng);
    }
}

template <typename T>
TensorT<T> ModelT<T>::forward_features(const TensorT<T>& x, bool train) {
    require_shape(x, {x.dim(0), cfg_.in_channels(), cfg_.geom.input, cfg_.geom.input},
                  "model input");
    fwd_batch_ = x.dim(0);
    TensorT<T> f = l_->stem_relu.forward(l_->stem_bn.forward(l_->stem_conv.forward(x), train));
    l_->feats.assign(static_cast<std::size_t>(cfg_.depth) + 1, TensorT<T>());
    for (int stage = 1; stage <= cfg_.depth; ++stage) {
        f = l_->enc[static_cast<std::size_t>(2 * stage - 2)].forward(f, train);
        f = l_->enc[static_cast<std::size_t>(2 * stage - 1)].forward(f, train);
        l_->feats[static_cast<std::size_t>(stage)] = f;
    }
    TensorT<T> y = l_->feats[static_cast<std::size_t>(cfg_.depth)];
    for (int j = 1; j <= cfg_.depth; ++j) {
        const TensorT<T>* skip =
            j < cfg_.depth ? &l_->feats[static_cast<std::size_t>(cfg_.depth - j)] : nullptr;
        y = l_->dec[static_cast<std::size_t>(j - 1)].forward(y, skip, train);
    }
    return y;
}

template <typename T>
TensorT<T> ModelT<T>::backward_features(const TensorT<T>& dfeatures) {
    l_->skip_grads.assign(static_cast<std::size_t>(cfg_.depth) + 1, TensorT<T>());
    TensorT<T> g = dfeatures;
    for (int j = cfg_.depth; j >= 1; --j) {
        TensorT<T> dskip;
        g = l_->dec[static_cast<std::size_t>(j - 1)].backward(g, &dskip);
        if (j < cfg_.depth) l_->skip_grads[static_cast<std::size_t>(cfg_.depth - j)] = std::move(dskip);
    }
    for (int stage = cfg_.depth; stage >= 1; --stage) {
        if (stage < cfg_.depth && !l_->skip_grads[static_cast<std::size_t>(stage)].empty())
            nn::add_inplace(g, l_->skip_grads[static_cast<std::size_t>(stage)]);
        g = l_->enc[static_cast<std::size_t>(2 * stage - 1)].backward(g);
        g = l_->enc[static_cast<std::size_t>(2 * stage - 2)].backward(g);
    }
    g = l_->stem_conv.backward(l_->stem_bn.backward(l_->stem_relu.backward(g)));
    return g;
}

template <typename T>
TensorT<T> ModelT<T>::unet_forward(const TensorT<T>& x, bool train) {
    TensorT<T> feat = forward_features(x, train);
    return l_->head.forward(feat);
}

template <typename T>
TensorT<T> ModelT<T>::forward_upsampled(const TensorT<T>& x, bool train) {
    TensorT<T> feat = forward_features(x, train);
    TensorT<T> feat_c = nn::crop_center(feat, cfg_.geom.crop);
    learned_path_ = cfg_.upsampler == ModelConfig::Upsampler::learned;
    if (!learned_path_) {
        // A 1x1 head commutes with the crop, so project after cropping.
        TensorT<T> logits = l_->head.forward(feat_c);
        if (cfg_.upsampler == ModelConfig::Upsampler::nearest)
            return nn::upsample_nearest(logits, cfg_.geom.sr_factor);
        return nn::upsample_bilinear(logits, cfg_.geom.sr_factor);
    }
    TensorT<T> out;
    {
        TensorT<T> skip = l_->head.forward(feat_c);
        out = nn::upsample_bilinear(skip, cfg_.geom.sr_factor);
    }
    TensorT<T> t = l_->sr_in_relu.forward(l_->sr_in.forward(feat_c));
    for (auto& blk : l_->sr_blocks) t = blk.forward(t);
    t = l_->sr_up2_relu.forward(nn::pixel_shuffle(l_->sr_up2.forward(t), 2));
    t = l_->sr_up3_relu.forward(nn::pixel_shuffle(l_->sr_up3.forward(t), 3));
    TensorT<T> trunk = l_->sr_out.forward(t);
    nn::add_inplace(trunk, out);
    return trunk;
}

template <typename T>
void ModelT<T>::backward_upsampled(const TensorT<T>& dlogits) {
    TensorT<T> dfeat_c;
    if (!learned_path_) {
        TensorT<T> dl;
        if (cfg_.upsampler == ModelConfig::Upsampler::nearest)
            dl = nn::upsample_nearest_backward(dlogits, cfg_.geom.sr_factor);
        else
            dl = nn::upsample_bilinear_backward(dlogits, cfg_.geom.sr_factor, cfg_.geom.crop,
                                                cfg_.geom.crop);
        dfeat_c = l_->head.backward(dl);
    } else {
        TensorT<T> dt = l_->sr_out.backward(dlogits);
        dt = l_->sr_up3_relu.backward(dt);
        dt = l_->sr_up3.backward(nn::pixel_shuffle_backward(dt, 3));
        dt = l_->sr_up2_relu.backward(dt);
        dt = l_->sr_up2.backward(nn::pixel_shuffle_backward(dt, 2));
        for (auto it = l_->sr_blocks.rbegin(); it != l_->sr_blocks.rend(); ++it)
            dt = it->backward(dt);
        dfeat_c = l_->sr_in.backward(l_->sr_in_relu.backward(dt));
        TensorT<T> dskip =
            nn::upsample_bilinear_backward(dlogits, cfg_.geom.sr_factor, cfg_.geom.crop,
                                           cfg_.geom.crop);
        nn::add_inplace(dfeat_c, l_->head.backward(dskip));
    }
    TensorT<T> dfeat = nn::crop_center_backward(dfeat_c, cfg_.geom.input, cfg_.geom.input);
    backward_features(dfeat);
}

template <typename T>
std::vector<nn::Param<T>> ModelT<T>::params() {
    std::vector<nn::Param<T>> p;
    std::vector<nn::Buffer<T>> b;
    l_->stem_conv.collect("stem.conv", p, b);
    l_->stem_bn.collect("stem.bn", p, b);
    for (std::size_t i = 0; i < l_->enc.size(); ++i)
        l_->enc[i].collect("enc" + std::to_string(i / 2 + 1) + ".block" + std::to_string(i % 2 + 1),
                           p, b);
    for (std::size_t i = 0; i < l_->dec.size(); ++i)
        l_->dec[i].collect("dec" + std::to_string(i + 1), p, b);
    l_->head.collect("head", p, b);
    if (cfg_.upsampler == ModelConfig::Upsampler::learned) {
        l_->sr_in.collect("sr.in", p, b);
        for (std::size_t i = 0; i < l_->sr_blocks.size(); ++i)
            l_->sr_blocks[i].collect("sr.block" + std::to_string(i + 1), p, b);
        l_->sr_up2.collect("sr.up2", p, b);
        l_->sr_up3.collect("sr.up3", p, b);
        l_->sr_out.collect("sr.out", p, b);
    }
    return p;
}

template <typename T>
std::vector<nn::Buffer<T>> ModelT<T>::buffers() {
    std::vector<nn::Param<T>> p;
    std::vector<nn::Buffer<T>> b;
    l_->stem_bn.collect("stem.bn", p, b);
    for (std::size_t i = 0; i < l_->enc.size(); ++i)
        l_->enc[i].collect("enc" + std::to_string(i / 2 + 1) + ".block" + std::to_string(i % 2 + 1),
                           p, b);
    for (std::size_t i = 0; i < l_->dec.size(); ++i)
        l_->dec[i].collect("dec" + std::to_string(i + 1), p, b);
    return b;
}

template <typename T>
void ModelT<T>::zero_grad() {
    for (auto& p : params()) p.grad->zero();
}

template class ModelT<float>;
template class ModelT<double>;

// ---------------------------------------------------------------------------
// softmax / predict
// ---------------------------------------------------------------------------

ForecastTensor softmax_forecast(const Tensor& logits, int classes) {
    if (logits.rank() != 4 || logits.dim(0) != 1)
        throw DataError("softmax_forecast: expected [1, T*K, H, W]");
    if (logits.dim(1) % classes != 0)
        throw DataError("softmax_forecast: channels not divisible by class count");
    const long t_out = logits.dim(1) / classes;
    const long h = logits.dim(2), w = logits.dim(3);
    ForecastTensor f;
    f.probs = Tensor({t_out, classes, h, w});
    const long hw = h * w;
#pragma omp parallel for schedule(static)
    for (long ti = 0; ti < t_out * h; ++ti) {
        const long t = ti / h, i = ti % h;
        const float* src = logits.data() + (t * classes) * hw + i * w;
        float* dst = f.probs.data() + (t * classes) * hw + i * w;
        for (long j = 0; j < w; ++j) {
            float m = src[j];
            for (long k = 1; k < classes; ++k) m = std::max(m, src[k * hw + j]);
            double sum = 0.0;
            for (long k = 0; k < classes; ++k) {
                const float e = std::exp(src[k * hw + j] - m);
                dst[k * hw + j] = e;
                sum += e;
            }
            const float inv = static_cast<float>(1.0 / sum);
            for (long k = 0; k < classes; ++k) dst[k * hw + j] *= inv;
        }
    }
    return f;
}

Tensor decode_rates(const ForecastTensor& forecast, const BucketScale& scale) {
    const long t_out = forecast.probs.dim(0), k = forecast.probs.dim(1);
    const long hw = forecast.probs.dim(2) * forecast.probs.dim(3);
    if (k != scale.num_classes()) throw DataError("decode_rates: class count mismatch");
    Tensor rates({t_out, forecast.probs.dim(2), forecast.probs.dim(3)});
    for (long t = 0; t < t_out; ++t) {
        float* out = rates.data() + t * hw;
        for (long c = 0; c < k; ++c) {
            const float rep = static_cast<float>(scale.representatives[static_cast<std::size_t>(c)]);
            const float* p = forecast.probs.data() + (t * k + c) * hw;
            for (long i = 0; i < hw; ++i) out[i] += rep * p[i];
        }
    }
    return rates;
}

ForecastTensor predict(Model& model, const SampleRecord& sample) {
    const ModelConfig& cfg = model.config();
    if (!cfg.clt_enabled) {
        Tensor x = assemble_input(sample, cfg);
        Tensor logits = model.forward_upsampled(x, false);
        return softmax_forecast(logits, cfg.classes);
    }
    ForecastTensor f;
    f.probs = Tensor({cfg.geom.out_len, cfg.classes, cfg.geom.patch, cfg.geom.patch});
    const std::size_t frame = static_cast<std::size_t>(cfg.classes) * cfg.geom.patch * cfg.geom.patch;
    for (int lead = 0; lead < cfg.geom.out_len; ++lead) {
        Tensor x = assemble_input(sample, cfg, lead);
        Tensor logits = model.forward_upsampled(x, false);
        ForecastTensor one = softmax_forecast(logits, cfg.classes);
        std::memcpy(f.probs.data() + static_cast<std::size_t>(lead) * frame, one.probs.data(),
                    frame * sizeof(float));
    }
    return f;
}

// ---------------------------------------------------------------------------
// checkpoint
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'N', 'W', 'C', 'H', 'K', 'P', 'T', '1'};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

json stats_to_json(const NormalizationStats& st) {
    return json{{"sat_mean", st.sat_mean},
                {"sat_std", st.sat_std},
                {"static_mean", st.static_mean},
                {"static_std", st.static_std}};
}

NormalizationStats stats_from_json(const json& j) {
    NormalizationStats st;
    st.sat_mean = j.at("sat_mean").get<std::vector<float>>();
    st.sat_std = j.at("sat_std").get<std::vector<float>>();
    st.static_mean = j.at("static_mean").get<std::vector<float>>();
    st.static_std = j.at("static_std").get<std::vector<float>>();
    return st;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const BucketScale& scale,
                     const NormalizationStats& stats) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    json header;
    header["version"] = 1;
    header["config"] = json::parse(model.config().to_json());
    header["scale"] = json::parse(scale.to_json());
    header["stats"] = stats_to_json(stats);
    const std::string head = header.dump();

    out.write(kCheckpointMagic, 8);
    write_u32(out, static_cast<std::uint32_t>(head.size()));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));

    auto params = model.params();
    auto buffers = model.buffers();
    write_u32(out, static_cast<std::uint32_t>(params.size() + buffers.size()));
    auto write_tensor = [&](const std::string& name, const Tensor& t) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) write_u32(out, static_cast<std::uint32_t>(t.dim(d)));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(float)));
    };
    for (const auto& p : params) write_tensor(p.name, *p.value);
    for (const auto& b : buffers) write_tensor(b.name, *b.value);
    if (!out) throw DataError("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path, CheckpointMeta* meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError("checkpoint: bad magic or unsupported version in " + path);
    const std::uint32_t head_len = read_u32(in);
    std::string head(head_len, '\0');
    in.read(head.data(), head_len);
    json header = json::parse(head);
    const int version = header.value("version", 0);
    if (version != 1)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));

    ModelConfig cfg = ModelConfig::from_json(header.at("config").dump());
    Model model(cfg);
    if (meta) {
        meta->version = version;
        meta->config = cfg;
        meta->scale = BucketScale::from_json(header.at("scale").dump());
        meta->stats = stats_from_json(header.at("stats"));
    }

    std::map<std::string, Tensor*> by_name;
    auto params = model.params();
    auto buffers = model.buffers();
    for (auto& p : params) by_name[p.name] = p.value;
    for (auto& b : buffers) by_name[b.name] = b.value;

    const std::uint32_t count = read_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(in);
        std::vector<long> dims(rank);
        for (auto& d : dims) d = static_cast<long>(read_u32(in));
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError("checkpoint: unknown tensor '" + name + "'");
        if (it->second->shape() != dims)
            throw DataError("checkpoint: shape mismatch for '" + name + "'");
        in.read(reinterpret_cast<char*>(it->second->data()),
                static_cast<std::streamsize>(it->second->size() * sizeof(float)));
        by_name.erase(it);
    }
    if (!by_name.empty())
        throw DataError("checkpoint: missing tensor '" + by_name.begin()->first + "'");
    if (!in) throw DataError("checkpoint: truncated file " + path);
    return model;
}

}  // namespace nowcast
