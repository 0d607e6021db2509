#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/archive.hpp"
#include "nowcast/buckets.hpp"
#include "nowcast/geometry.hpp"
#include "nowcast/nn.hpp"

namespace nowcast {

struct ModelConfig {
    Geometry geom{};
    int classes = 15;
    int base_width = 64;
    int depth = 4;
    bool clt_enabled = false;

    enum class Upsampler { nearest, bilinear, learned };
    Upsampler upsampler = Upsampler::bilinear;
    int sr_width = 16;   // learned-head trunk width
    int sr_blocks = 4;   // learned-head residual blocks

    int in_channels() const {
        return geom.in_len * geom.sat_channels + geom.static_channels + (clt_enabled ? 1 : 0);
    }
    // With lead-time conditioning one forward pass emits a single lead time.
    int out_time() const { return clt_enabled ? 1 : geom.out_len; }
    int out_channels() const { return out_time() * classes; }

    void validate() const {
        geom.validate();
        if (classes < 2) throw DataError("model: need at least 2 classes");
        if (base_width < 1 || depth < 1) throw DataError("model: bad width/depth");
        if (geom.input % (1 << depth) != 0)
            throw DataError("model: input size " + std::to_string(geom.input) +
                            " not divisible by 2^depth");
    }

    static const char* upsampler_name(Upsampler u);
    static Upsampler upsampler_from_name(const std::string& name);
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

// Time axis folded onto channels: output channel t*C + c holds input (t, c).
// For a contiguous [B,T,C,H,W] tensor this is a relabeling of the same data.
Tensor stack_time(const Tensor& x);
// Inverse: [B, T'*C', H, W] -> [B, T', C', H, W]; channel count must divide.
Tensor unstack_time(const Tensor& y, int t_out);

// Builds the network input: stacked satellite slots, static planes, and the
// lead-time plane (constant lead/(T_out-1)) when conditioning is enabled.
// Samples must already be normalized.
Tensor assemble_batch(const std::vector<const SampleRecord*>& batch, const ModelConfig& cfg,
                      const std::vector<int>& lead_times = {});
Tensor assemble_input(const SampleRecord& sample, const ModelConfig& cfg, int lead_time = -1);

// Per-sample forecast: class distributions per lead time on the label grid.
struct ForecastTensor {
    Tensor probs;  // [T_out, K, P, P]
    int classes() const { return static_cast<int>(probs.dim(1)); }
};

Tensor decode_rates(const ForecastTensor& forecast, const BucketScale& scale);  // [T_out, P, P]

namespace detail {

template <typename T>
struct ResBlock;
template <typename T>
struct DecoderBlock;
template <typename T>
struct SrBlock;

}  // namespace detail

// 2D U-Net with a residual (ResNet-18 style) encoder: a stride-2 stem
// convolution, `depth` residual stages of two pre-activation blocks each
// (widths base*2^i, stride-2 entering every stage after the first), and a
// mirrored decoder whose up-stages concatenate the matching encoder maps.
// The final up-stage has no same-resolution encoder partner and runs without
// a skip.
template <typename T>
class ModelT {
public:
    explicit ModelT(const ModelConfig& cfg);
    ~ModelT();
    ModelT(ModelT&&) noexcept;
    ModelT& operator=(ModelT&&) noexcept;

    const ModelConfig& config() const { return cfg_; }

    void init_params(std::uint64_t seed);

    // Decoder output features at input resolution: [B, base, in, in].
    TensorT<T> forward_features(const TensorT<T>& x, bool train);
    TensorT<T> backward_features(const TensorT<T>& dfeatures);

    // Logits at input resolution [B, T'*K, in, in] (head applied full-frame).
    TensorT<T> unet_forward(const TensorT<T>& x, bool train);

    // Full forecast head: crop the central patch and upsample, producing
    // logits on the label grid [B, T'*K, patch, patch]. For the learned
    // upsampler the head consumes pre-logit features; its skip path is the
    // bilinear interpolation of the cropped standard logits, so a zeroed
    // trunk reproduces the bilinear pipeline exactly.
    TensorT<T> forward_upsampled(const TensorT<T>& x, bool train);
    void backward_upsampled(const TensorT<T>& dlogits);

    std::vector<nn::Param<T>> params();
    std::vector<nn::Buffer<T>> buffers();
    void zero_grad();

private:
    ModelConfig cfg_;
    struct Layers;
    std::unique_ptr<Layers> l_;

    // shapes cached between forward_upsampled and backward_upsampled
    long fwd_batch_ = 0;
    bool learned_path_ = false;
};

using Model = ModelT<float>;

// Softmax over the class axis of upsampled logits [1, T'*K, P, P].
ForecastTensor softmax_forecast(const Tensor& logits, int classes);

// Full pipeline for one (already normalized) sample; loops over lead times
// when the model conditions on them.
ForecastTensor predict(Model& model, const SampleRecord& normalized_sample);

// Self-describing checkpoint: config, bucket scale, normalization stats and
// all weights/buffers.
struct CheckpointMeta {
    int version = 1;
    ModelConfig config;
    BucketScale scale;
    NormalizationStats stats;
};

void save_checkpoint(const std::string& path, Model& model, const BucketScale& scale,
                     const NormalizationStats& stats);
Model load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace nowcast
