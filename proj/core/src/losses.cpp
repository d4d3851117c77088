#include "geomlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace geomlab {

LogitMatrix logit_matrix(const GeometryConfig& cfg, std::span<const Vec> texts,
                         std::span<const Vec> images) {
    if (texts.empty() || texts.size() != images.size()) {
        throw std::invalid_argument("logit_matrix: batch must be non-empty and aligned");
    }
    const std::size_t batch = texts.size();
    const double beta = cfg.beta();
    LogitMatrix m;
    m.batch = batch;
    m.values.resize(batch * batch);

    if (cfg.kind == GeometryKind::hyperbolic) {
        // lift every embedding once, then pairwise distances
        const double c = cfg.curvature();
        std::vector<LorentzPoint> tx(batch), im(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            tx[i] = exp_map_origin(scaled(texts[i], cfg.alpha_txt()), c);
            im[i] = exp_map_origin(scaled(images[i], cfg.alpha_img()), c);
        }
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t j = 0; j < batch; ++j) {
                m.at(i, j) = beta * lorentz_sim(tx[i], im[j], cfg.variant);
            }
        }
        return m;
    }

    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < batch; ++j) {
            m.at(i, j) = beta * similarity(cfg, texts[i], images[j]);
        }
    }
    return m;
}

double contrastive_loss(const LogitMatrix& logits) {
    const std::size_t batch = logits.batch;
    if (batch == 0) throw std::invalid_argument("contrastive_loss: empty batch");

    double acc = 0.0;
    // text -> image: softmax over each row; image -> text: over each column
    for (std::size_t i = 0; i < batch; ++i) {
        double row_max = logits.at(i, 0);
        double col_max = logits.at(0, i);
        for (std::size_t j = 1; j < batch; ++j) {
            row_max = std::max(row_max, logits.at(i, j));
            col_max = std::max(col_max, logits.at(j, i));
        }
        double row_sum = 0.0;
        double col_sum = 0.0;
        for (std::size_t j = 0; j < batch; ++j) {
            row_sum += std::exp(logits.at(i, j) - row_max);
            col_sum += std::exp(logits.at(j, i) - col_max);
        }
        const double diag = logits.at(i, i);
        acc += (diag - (row_max + std::log(row_sum))) + (diag - (col_max + std::log(col_sum)));
    }
    return -acc / (2.0 * static_cast<double>(batch));
}

double half_aperture_euclid(const Vec& x, double min_radius_k) {
    if (min_radius_k <= 0.0) {
        throw std::invalid_argument("half_aperture_euclid: min radius must be > 0");
    }
    const double nx = norm(x);
    if (nx <= min_radius_k) return std::numbers::pi / 2.0;
    return std::asin(min_radius_k / nx);
}

double exterior_angle_euclid(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("exterior_angle_euclid: dimension mismatch");
    }
    const double nx = norm(x);
    if (nx == 0.0) throw std::domain_error("exterior_angle_euclid: x at origin");
    Vec diff(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diff[i] = y[i] - x[i];
    const double nd = norm(diff);
    if (nd == 0.0) throw std::domain_error("exterior_angle_euclid: y coincides with x");
    return std::acos(std::clamp(dot(diff, x) / (nd * nx), -1.0, 1.0));
}

double entail_loss_euclid(const Vec& x, const Vec& y, double min_radius_k) {
    return std::max(0.0, exterior_angle_euclid(x, y) - half_aperture_euclid(x, min_radius_k));
}

double half_aperture_hyper(const LorentzPoint& x, double min_radius_k) {
    if (min_radius_k <= 0.0) {
        throw std::invalid_argument("half_aperture_hyper: min radius must be > 0");
    }
    if (x.curvature <= 0.0) {
        throw std::invalid_argument("half_aperture_hyper: curvature must be > 0");
    }
    const double denom = std::sqrt(x.curvature) * norm(x.space);
    if (denom <= 2.0 * min_radius_k) return std::numbers::pi / 2.0;
    return std::asin(2.0 * min_radius_k / denom);
}

double exterior_angle_hyper(const LorentzPoint& x, const LorentzPoint& y) {
    const double c = x.curvature;
    const double nx = norm(x.space);
    if (nx == 0.0) throw std::domain_error("exterior_angle_hyper: x at the apex");
    const double ci = c * lorentz_inner(x, y);  // checks compatibility
    const double num = y.time + x.time * ci;
    const double denom = nx * std::sqrt(std::max(0.0, ci * ci - 1.0));
    if (denom == 0.0) {
        throw std::domain_error("exterior_angle_hyper: y coincides with x");
    }
    return std::acos(std::clamp(num / denom, -1.0, 1.0));
}

double entail_loss_hyper(const LorentzPoint& x, const LorentzPoint& y, double min_radius_k) {
    return std::max(0.0, exterior_angle_hyper(x, y) - half_aperture_hyper(x, min_radius_k));
}

LossBreakdown total_loss(const GeometryConfig& cfg, std::span<const Vec> texts,
                         std::span<const Vec> images) {
    cfg.validate();
    LossBreakdown out;
    out.lambda = cfg.lambda_entail;
    out.contrastive = contrastive_loss(logit_matrix(cfg, texts, images));

    if (cfg.lambda_entail > 0.0) {
        const std::size_t batch = texts.size();
        double acc = 0.0;
        if (cfg.kind == GeometryKind::euclidean) {
            for (std::size_t i = 0; i < batch; ++i) {
                if (exact_equal(texts[i], images[i])) continue;  // degenerate pair convention
                acc += entail_loss_euclid(texts[i], images[i], cfg.min_radius_k);
            }
        } else {
            const double c = cfg.curvature();
            for (std::size_t i = 0; i < batch; ++i) {
                const Vec u = scaled(texts[i], cfg.alpha_txt());
                const Vec v = scaled(images[i], cfg.alpha_img());
                if (exact_equal(u, v)) continue;
                acc += entail_loss_hyper(exp_map_origin(u, c), exp_map_origin(v, c),
                                         cfg.min_radius_k);
            }
        }
        out.entailment = acc / static_cast<double>(batch);
    }

    out.total = out.contrastive + out.lambda * out.entailment;
    return out;
}

}  // namespace geomlab
