#pragma once

#include <span>

#include "geomlab/geometry.hpp"
#include "geomlab/vec.hpp"

namespace geomlab {

/// B x B matrix of beta * sim(text_i, image_j), row = text, column = image.
struct LogitMatrix {
    std::size_t batch = 0;
    Vec values;  // row-major
    bool beta_applied = true;

    double& at(std::size_t i, std::size_t j) { return values[i * batch + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * batch + j]; }
};

struct LossBreakdown {
    double contrastive = 0.0;
    double entailment = 0.0;
    double total = 0.0;
    double lambda = 0.0;
};

LogitMatrix logit_matrix(const GeometryConfig& cfg, std::span<const Vec> texts,
                         std::span<const Vec> images);

/// Symmetric InfoNCE: mean of the image->text and text->image log-softmax
/// terms over the diagonal, stabilized by max subtraction.
double contrastive_loss(const LogitMatrix& logits);

double half_aperture_euclid(const Vec& x, double min_radius_k);
double exterior_angle_euclid(const Vec& x, const Vec& y);
double entail_loss_euclid(const Vec& x, const Vec& y, double min_radius_k);

double half_aperture_hyper(const LorentzPoint& x, double min_radius_k);
double exterior_angle_hyper(const LorentzPoint& x, const LorentzPoint& y);
double entail_loss_hyper(const LorentzPoint& x, const LorentzPoint& y, double min_radius_k);

/// contrastive + lambda * (mean entailment over positive pairs, text as the
/// generic concept). An exactly coincident positive pair contributes 0 to the
/// entailment term.
LossBreakdown total_loss(const GeometryConfig& cfg, std::span<const Vec> texts,
                         std::span<const Vec> images);

}  // namespace geomlab
