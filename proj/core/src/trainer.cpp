#include "geomlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "geomlab/losses.hpp"
#include "geomlab/rng.hpp"

namespace geomlab {

EncoderParams EncoderParams::zeros_like(const EncoderParams& other) {
    EncoderParams p;
    p.in_dim = other.in_dim;
    p.hidden_dim = other.hidden_dim;
    p.out_dim = other.out_dim;
    p.final_norm = other.final_norm;
    p.w1.assign(other.w1.size(), 0.0);
    p.b1.assign(other.b1.size(), 0.0);
    p.w2.assign(other.w2.size(), 0.0);
    p.b2.assign(other.b2.size(), 0.0);
    p.norm_w.assign(other.norm_w.size(), 0.0);
    p.norm_b.assign(other.norm_b.size(), 0.0);
    p.proj.assign(other.proj.size(), 0.0);
    return p;
}

void EncoderParams::for_each_tensor(const std::function<void(const char*, Vec&, bool)>& fn) {
    fn("w1", w1, true);
    fn("b1", b1, false);
    fn("w2", w2, true);
    fn("b2", b2, false);
    fn("norm_w", norm_w, false);
    fn("norm_b", norm_b, false);
    fn("proj", proj, true);
}

void EncoderParams::for_each_tensor(
    const std::function<void(const char*, const Vec&, bool)>& fn) const {
    const_cast<EncoderParams*>(this)->for_each_tensor(
        [&](const char* name, Vec& v, bool decay) { fn(name, v, decay); });
}

EncoderParams init_encoder(int in_dim, int hidden_dim, int out_dim, bool final_norm,
                           std::uint64_t seed) {
    if (in_dim < 1 || hidden_dim < 1 || out_dim < 2) {
        throw std::invalid_argument("init_encoder: bad dimensions");
    }
    EncoderParams p;
    p.in_dim = in_dim;
    p.hidden_dim = hidden_dim;
    p.out_dim = out_dim;
    p.final_norm = final_norm;

    Rng rng(mix_seed(seed, 0x656e636f646572ULL));
    const auto gaussian_mat = [&](int rows, int cols) {
        Vec m(static_cast<std::size_t>(rows) * cols);
        const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
        for (double& v : m) v = scale * rng.normal();
        return m;
    };
    p.w1 = gaussian_mat(hidden_dim, in_dim);
    p.b1.assign(hidden_dim, 0.0);
    p.w2 = gaussian_mat(out_dim, hidden_dim);
    p.b2.assign(out_dim, 0.0);
    p.norm_w.assign(out_dim, 1.0);
    p.norm_b.assign(out_dim, 0.0);
    p.proj = gaussian_mat(out_dim, out_dim);
    return p;
}

namespace {

// y = M x with M row-major (rows x cols)
void matvec(const Vec& m, int rows, int cols, const Vec& x, Vec& y) {
    y.assign(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* row = &m[static_cast<std::size_t>(r) * cols];
        for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

// y = M^T x
void matvec_t(const Vec& m, int rows, int cols, const Vec& x, Vec& y) {
    y.assign(cols, 0.0);
    for (int r = 0; r < rows; ++r) {
        const double* row = &m[static_cast<std::size_t>(r) * cols];
        for (int c = 0; c < cols; ++c) y[c] += row[c] * x[r];
    }
}

// G += a b^T
void add_outer(Vec& g, const Vec& a, const Vec& b) {
    const int rows = static_cast<int>(a.size());
    const int cols = static_cast<int>(b.size());
    for (int r = 0; r < rows; ++r) {
        double* row = &g[static_cast<std::size_t>(r) * cols];
        for (int c = 0; c < cols; ++c) row[c] += a[r] * b[c];
    }
}

}  // namespace

EncoderActivations encoder_forward_detail(const EncoderParams& p, const Vec& features) {
    if (static_cast<int>(features.size()) != p.in_dim) {
        throw std::invalid_argument("encoder_forward: feature dimension mismatch");
    }
    EncoderActivations act;
    matvec(p.w1, p.hidden_dim, p.in_dim, features, act.hidden_pre);
    for (int k = 0; k < p.hidden_dim; ++k) act.hidden_pre[k] += p.b1[k];
    act.hidden.resize(p.hidden_dim);
    for (int k = 0; k < p.hidden_dim; ++k) act.hidden[k] = std::tanh(act.hidden_pre[k]);

    matvec(p.w2, p.out_dim, p.hidden_dim, act.hidden, act.pre_out);
    for (int k = 0; k < p.out_dim; ++k) act.pre_out[k] += p.b2[k];

    const int n = p.out_dim;
    if (p.final_norm) {
        double mean = 0.0;
        for (double v : act.pre_out) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : act.pre_out) var += (v - mean) * (v - mean);
        var /= n;
        if (var == 0.0) {
            throw std::runtime_error("encoder_forward: zero-variance pre-output under final_norm");
        }
        act.mean = mean;
        act.stddev = std::sqrt(var);
        act.standardized.resize(n);
        act.affine_out.resize(n);
        for (int k = 0; k < n; ++k) {
            act.standardized[k] = (act.pre_out[k] - mean) / act.stddev;
            act.affine_out[k] = p.norm_w[k] * act.standardized[k] + p.norm_b[k];
        }
        matvec(p.proj, n, n, act.affine_out, act.out);
    } else {
        matvec(p.proj, n, n, act.pre_out, act.out);
    }
    return act;
}

Vec encoder_forward(const EncoderParams& p, const Vec& features) {
    return encoder_forward_detail(p, features).out;
}

void encoder_backward(const EncoderParams& p, const Vec& features,
                      const EncoderActivations& act, const Vec& d_out, EncoderParams& grad) {
    const int n = p.out_dim;
    Vec d_pre_out;
    if (p.final_norm) {
        add_outer(grad.proj, d_out, act.affine_out);
        Vec d_affine;
        matvec_t(p.proj, n, n, d_out, d_affine);
        Vec d_std(n);
        for (int k = 0; k < n; ++k) {
            grad.norm_w[k] += d_affine[k] * act.standardized[k];
            grad.norm_b[k] += d_affine[k];
            d_std[k] = d_affine[k] * p.norm_w[k];
        }
        // standardization backward: dz = (g - mean(g) - z_hat * mean(g .* z_hat)) / sigma
        double g_mean = 0.0, gz_mean = 0.0;
        for (int k = 0; k < n; ++k) {
            g_mean += d_std[k];
            gz_mean += d_std[k] * act.standardized[k];
        }
        g_mean /= n;
        gz_mean /= n;
        d_pre_out.resize(n);
        for (int k = 0; k < n; ++k) {
            d_pre_out[k] = (d_std[k] - g_mean - act.standardized[k] * gz_mean) / act.stddev;
        }
    } else {
        add_outer(grad.proj, d_out, act.pre_out);
        matvec_t(p.proj, n, n, d_out, d_pre_out);
    }

    add_outer(grad.w2, d_pre_out, act.hidden);
    for (int k = 0; k < n; ++k) grad.b2[k] += d_pre_out[k];

    Vec d_hidden;
    matvec_t(p.w2, n, p.hidden_dim, d_pre_out, d_hidden);
    for (int k = 0; k < p.hidden_dim; ++k) {
        d_hidden[k] *= 1.0 - act.hidden[k] * act.hidden[k];
    }
    add_outer(grad.w1, d_hidden, features);
    for (int k = 0; k < p.hidden_dim; ++k) grad.b1[k] += d_hidden[k];
}

double lr_at(const ScheduleSpec& sched, long step) {
    if (step < 0 || step > sched.total_steps) {
        throw std::invalid_argument("lr_at: step outside [0, total_steps]");
    }
    if (sched.warmup_steps > 0 && step < sched.warmup_steps) {
        return sched.max_lr * static_cast<double>(step) / sched.warmup_steps;
    }
    const long span = std::max(1L, static_cast<long>(sched.total_steps) - sched.warmup_steps);
    const double progress = static_cast<double>(step - sched.warmup_steps) / span;
    return sched.max_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainState init_train_state(const TrainBundle& bundle, const PrototypeTree& tree) {
    bundle.cfg.validate();
    if (bundle.batch_size < 1) throw std::invalid_argument("init_train_state: batch_size < 1");
    if (bundle.schedule.warmup_steps > bundle.schedule.total_steps) {
        throw std::invalid_argument("init_train_state: warmup_steps > total_steps");
    }
    TrainState st;
    st.cfg = bundle.cfg;
    st.seed = bundle.seed;
    st.text_encoder = init_encoder(tree.spec.raw_dim, bundle.hidden_dim, bundle.embed_dim,
                                   bundle.final_norm, mix_seed(bundle.seed, 1));
    st.image_encoder = init_encoder(tree.spec.raw_dim, bundle.hidden_dim, bundle.embed_dim,
                                    bundle.final_norm, mix_seed(bundle.seed, 2));
    st.m_text = EncoderParams::zeros_like(st.text_encoder);
    st.v_text = EncoderParams::zeros_like(st.text_encoder);
    st.m_image = EncoderParams::zeros_like(st.image_encoder);
    st.v_image = EncoderParams::zeros_like(st.image_encoder);
    return st;
}

namespace {

void adamw_update(Vec& param, const Vec& grad, Vec& m, Vec& v, double lr, double decay,
                  const OptimizerSpec& opt, double bias1, double bias2) {
    for (std::size_t k = 0; k < param.size(); ++k) {
        m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * grad[k];
        v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * grad[k] * grad[k];
        const double m_hat = m[k] / bias1;
        const double v_hat = v[k] / bias2;
        param[k] -= lr * (m_hat / (std::sqrt(v_hat) + opt.eps) + decay * param[k]);
    }
}

void adamw_update_scalar(double& param, double grad, double& m, double& v, double lr,
                         const OptimizerSpec& opt, double bias1, double bias2) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
    v = opt.beta2 * v + (1.0 - opt.beta2) * grad * grad;
    param -= lr * (m / bias1) / (std::sqrt(v / bias2) + opt.eps);
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw std::runtime_error(std::string("train_step: non-finite ") + what);
    }
}

void check_finite_tensors(EncoderParams& g, const char* who) {
    g.for_each_tensor([&](const char* name, Vec& v, bool) {
        if (!all_finite(v)) {
            throw std::runtime_error(std::string("train_step: non-finite gradient in ") + who +
                                     "." + name);
        }
    });
}

}  // namespace

LossBreakdown train_step(TrainState& state, const PairBatch& batch, const ScheduleSpec& sched,
                         const OptimizerSpec& opt) {
    const std::size_t b = batch.size();
    if (b == 0) throw std::invalid_argument("train_step: empty batch");

    std::vector<EncoderActivations> text_acts(b), image_acts(b);
    std::vector<Vec> text_embs(b), image_embs(b);
    for (std::size_t i = 0; i < b; ++i) {
        text_acts[i] = encoder_forward_detail(state.text_encoder, batch.text_features[i]);
        image_acts[i] = encoder_forward_detail(state.image_encoder, batch.image_features[i]);
        text_embs[i] = text_acts[i].out;
        image_embs[i] = image_acts[i].out;
    }

    // throws GradSingularError before any state mutation
    auto [breakdown, grads] = grad_total_loss(state.cfg, text_embs, image_embs);

    check_finite(breakdown.total, "loss");
    check_finite(grads.d_log_beta, "d_log_beta");
    check_finite(grads.d_log_c, "d_log_c");
    check_finite(grads.d_log_alpha_txt, "d_log_alpha_txt");
    check_finite(grads.d_log_alpha_img, "d_log_alpha_img");

    EncoderParams g_text = EncoderParams::zeros_like(state.text_encoder);
    EncoderParams g_image = EncoderParams::zeros_like(state.image_encoder);
    for (std::size_t i = 0; i < b; ++i) {
        if (!all_finite(grads.d_texts[i]) || !all_finite(grads.d_images[i])) {
            throw std::runtime_error("train_step: non-finite embedding gradient at pair " +
                                     std::to_string(i));
        }
        encoder_backward(state.text_encoder, batch.text_features[i], text_acts[i],
                         grads.d_texts[i], g_text);
        encoder_backward(state.image_encoder, batch.image_features[i], image_acts[i],
                         grads.d_images[i], g_image);
    }
    check_finite_tensors(g_text, "text_encoder");
    check_finite_tensors(g_image, "image_encoder");

    const double lr = lr_at(sched, std::min<long>(state.step, sched.total_steps));
    const long t = state.step + 1;
    const double bias1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));

    const auto update_encoder = [&](EncoderParams& p, EncoderParams& g, EncoderParams& m,
                                    EncoderParams& v) {
        Vec* gs[7];
        Vec* ms[7];
        Vec* vs[7];
        int idx = 0;
        g.for_each_tensor([&](const char*, Vec& t_, bool) { gs[idx++] = &t_; });
        idx = 0;
        m.for_each_tensor([&](const char*, Vec& t_, bool) { ms[idx++] = &t_; });
        idx = 0;
        v.for_each_tensor([&](const char*, Vec& t_, bool) { vs[idx++] = &t_; });
        idx = 0;
        p.for_each_tensor([&](const char*, Vec& t_, bool decay) {
            adamw_update(t_, *gs[idx], *ms[idx], *vs[idx], lr,
                         decay ? opt.weight_decay : 0.0, opt, bias1, bias2);
            ++idx;
        });
    };
    update_encoder(state.text_encoder, g_text, state.m_text, state.v_text);
    update_encoder(state.image_encoder, g_image, state.m_image, state.v_image);

    double* scalars[4] = {&state.cfg.log_beta, &state.cfg.log_c, &state.cfg.log_alpha_txt,
                          &state.cfg.log_alpha_img};
    const double scalar_grads[4] = {grads.d_log_beta, grads.d_log_c, grads.d_log_alpha_txt,
                                    grads.d_log_alpha_img};
    for (int k = 0; k < 4; ++k) {
        adamw_update_scalar(*scalars[k], scalar_grads[k], state.m_scalar[k], state.v_scalar[k],
                            lr, opt, bias1, bias2);
    }
    // re-clamp the raw log parameters so the clamps hold at every step
    state.cfg.log_beta = std::min(state.cfg.log_beta, std::log(state.cfg.beta_max));
    state.cfg.log_c = std::clamp(state.cfg.log_c, std::log(state.cfg.c_min),
                                 std::log(state.cfg.c_max));

    state.step += 1;
    return breakdown;
}

double recall_at_1(const GeometryConfig& cfg, std::span<const Vec> texts,
                   std::span<const Vec> images) {
    const std::size_t b = texts.size();
    const LogitMatrix m = logit_matrix(cfg, texts, images);
    int hits = 0;
    for (std::size_t i = 0; i < b; ++i) {
        std::size_t best_row = 0, best_col = 0;
        for (std::size_t j = 1; j < b; ++j) {
            if (m.at(i, j) > m.at(i, best_row)) best_row = j;
            if (m.at(j, i) > m.at(best_col, i)) best_col = j;
        }
        hits += best_row == i ? 1 : 0;
        hits += best_col == i ? 1 : 0;
    }
    return static_cast<double>(hits) / (2.0 * static_cast<double>(b));
}

TrainResult train(const TrainBundle& bundle, const PrototypeTree& tree) {
    TrainResult result;
    result.state = init_train_state(bundle, tree);

    const std::vector<double> weights = bundle.ancestor_depth_weights.empty()
                                            ? uniform_depth_weights(tree.spec.depth)
                                            : bundle.ancestor_depth_weights;

    const auto log_row = [&](const PairBatch& batch, const LossBreakdown& lb) {
        MetricsRow row;
        row.step = result.state.step;
        row.lr = lr_at(bundle.schedule, std::min<long>(result.state.step - 1,
                                                       bundle.schedule.total_steps));
        row.contrastive = lb.contrastive;
        row.entailment = lb.entailment;
        row.total = lb.total;
        row.beta = result.state.cfg.beta();
        row.curvature = result.state.cfg.curvature();
        row.alpha_txt = result.state.cfg.alpha_txt();
        row.alpha_img = result.state.cfg.alpha_img();
        std::vector<Vec> te(batch.size()), ie(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            te[i] = encoder_forward(result.state.text_encoder, batch.text_features[i]);
            ie[i] = encoder_forward(result.state.image_encoder, batch.image_features[i]);
        }
        row.recall_at_1 = recall_at_1(result.state.cfg, te, ie);
        row.resampled = result.resampled_batches;
        result.log.push_back(row);
    };

    for (int step = 0; step < bundle.schedule.total_steps; ++step) {
        LossBreakdown lb;
        PairBatch batch;
        bool stepped = false;
        for (int attempt = 0; attempt < 100 && !stepped; ++attempt) {
            batch = sample_batch(tree, bundle.batch_size,
                                 mix_seed(bundle.seed, (static_cast<std::uint64_t>(step) << 8) +
                                                           static_cast<std::uint64_t>(attempt)),
                                 weights);
            try {
                lb = train_step(result.state, batch, bundle.schedule, bundle.optimizer);
                stepped = true;
            } catch (const GradSingularError&) {
                ++result.resampled_batches;
            }
        }
        if (!stepped) {
            throw std::runtime_error("train: 100 consecutive gradient-singular batches at step " +
                                     std::to_string(step));
        }
        const bool last = step + 1 == bundle.schedule.total_steps;
        if (bundle.log_every > 0 && ((step + 1) % bundle.log_every == 0 || last)) {
            log_row(batch, lb);
        }
    }
    return result;
}

}  // namespace geomlab
