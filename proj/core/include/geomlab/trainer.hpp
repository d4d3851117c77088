#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "geomlab/geometry.hpp"
#include "geomlab/gradients.hpp"
#include "geomlab/synthdata.hpp"
#include "geomlab/vec.hpp"

namespace geomlab {

/// Two affine layers with a tanh between, then an optional final
/// standardization stage (per-vector mean 0 / variance 1, element-wise affine)
/// before the output projection.
struct EncoderParams {
    int in_dim = 0;
    int hidden_dim = 0;
    int out_dim = 0;
    bool final_norm = false;

    Vec w1;      // hidden_dim x in_dim, row-major
    Vec b1;      // hidden_dim
    Vec w2;      // out_dim x hidden_dim
    Vec b2;      // out_dim
    Vec norm_w;  // out_dim, element-wise affine weight
    Vec norm_b;  // out_dim
    Vec proj;    // out_dim x out_dim

    static EncoderParams zeros_like(const EncoderParams& other);

    /// Visit every tensor as (name, values, decayed); decayed marks the
    /// matrix parameters that receive weight decay.
    void for_each_tensor(const std::function<void(const char*, Vec&, bool)>& fn);
    void for_each_tensor(const std::function<void(const char*, const Vec&, bool)>& fn) const;
};

EncoderParams init_encoder(int in_dim, int hidden_dim, int out_dim, bool final_norm,
                           std::uint64_t seed);

struct EncoderActivations {
    Vec hidden_pre;   // before tanh
    Vec hidden;       // after tanh
    Vec pre_out;      // second affine output
    Vec standardized; // (pre_out - mean) / std, when final_norm is on
    Vec affine_out;   // norm_w * standardized + norm_b
    Vec out;
    double mean = 0.0;
    double stddev = 0.0;
};

Vec encoder_forward(const EncoderParams& p, const Vec& features);
EncoderActivations encoder_forward_detail(const EncoderParams& p, const Vec& features);

/// Accumulates dL/dparams into grad given dL/dout; uses the activations from
/// the matching forward pass.
void encoder_backward(const EncoderParams& p, const Vec& features,
                      const EncoderActivations& act, const Vec& d_out, EncoderParams& grad);

struct ScheduleSpec {
    double max_lr = 5e-4;
    int warmup_steps = 500;
    int total_steps = 2000;
};

/// Linear warmup to max_lr, then cosine decay to zero.
double lr_at(const ScheduleSpec& sched, long step);

struct OptimizerSpec {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct TrainState {
    EncoderParams text_encoder;
    EncoderParams image_encoder;
    GeometryConfig cfg;

    // Adam moments mirror the parameter shapes
    EncoderParams m_text, v_text, m_image, v_image;
    // order: log_beta, log_c, log_alpha_txt, log_alpha_img
    double m_scalar[4] = {0, 0, 0, 0};
    double v_scalar[4] = {0, 0, 0, 0};

    long step = 0;
    std::uint64_t seed = 0;
};

struct TrainBundle {
    TreeSpec tree;
    GeometryConfig cfg;
    ScheduleSpec schedule;
    OptimizerSpec optimizer;
    int batch_size = 64;
    int embed_dim = 32;
    int hidden_dim = 64;
    bool final_norm = false;
    std::uint64_t seed = 0;
    int log_every = 50;
    std::vector<double> ancestor_depth_weights;  // empty = uniform
};

TrainState init_train_state(const TrainBundle& bundle, const PrototypeTree& tree);

/// One forward/backward/AdamW step. Deterministic given (state, batch).
/// Throws GradSingularError for gradient-singular batches (state untouched)
/// and runtime_error on a non-finite loss or gradient.
LossBreakdown train_step(TrainState& state, const PairBatch& batch, const ScheduleSpec& sched,
                         const OptimizerSpec& opt);

struct MetricsRow {
    long step = 0;
    double lr = 0.0;
    double contrastive = 0.0;
    double entailment = 0.0;
    double total = 0.0;
    double beta = 0.0;
    double curvature = 0.0;
    double alpha_txt = 0.0;
    double alpha_img = 0.0;
    double recall_at_1 = 0.0;
    long resampled = 0;
};

struct TrainResult {
    TrainState state;
    std::vector<MetricsRow> log;
    long resampled_batches = 0;
};

/// Full loop: fresh batch per step, metrics every log_every steps (plus the
/// final step), singular batches resampled with a counter.
TrainResult train(const TrainBundle& bundle, const PrototypeTree& tree);

/// In-batch retrieval: fraction of diagonal argmax hits, averaged over the
/// text->image and image->text directions. Ties break to the lowest index.
double recall_at_1(const GeometryConfig& cfg, std::span<const Vec> texts,
                   std::span<const Vec> images);

}  // namespace geomlab
