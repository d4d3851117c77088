#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "geomlab/geometry.hpp"
#include "geomlab/losses.hpp"
#include "geomlab/vec.hpp"

namespace geomlab {

/// Requested a derivative at a declared singular configuration
/// (coincident d-logit pair, origin embedding under the hyperbolic lift, ...).
class GradSingularError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

struct GradRecord {
    std::vector<Vec> d_texts;
    std::vector<Vec> d_images;
    double d_log_beta = 0.0;
    double d_log_c = 0.0;
    double d_log_alpha_txt = 0.0;
    double d_log_alpha_img = 0.0;
};

/// Value and gradient of similarity(cfg, text, image).
struct SimilarityGrad {
    double value = 0.0;
    Vec d_text;
    Vec d_image;
    double d_log_c = 0.0;
    double d_log_alpha_txt = 0.0;
    double d_log_alpha_img = 0.0;
};

SimilarityGrad similarity_grad(const GeometryConfig& cfg, const Vec& text_emb,
                               const Vec& image_emb);

/// Hand-derived gradients of total_loss wrt every embedding coordinate and
/// the four log-scale scalars. The returned loss equals total_loss exactly;
/// gradients of a scalar whose clamp is active are 0.
std::pair<LossBreakdown, GradRecord> grad_total_loss(const GeometryConfig& cfg,
                                                     std::span<const Vec> texts,
                                                     std::span<const Vec> images);

double central_diff(const std::function<double(double)>& f, double x, double h);

/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
double fd_relative_error(double analytic, double numeric);

struct FdEntry {
    std::string param;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct FdReport {
    std::vector<FdEntry> entries;
    double max_rel_err = 0.0;
    std::string worst_param;

    bool pass(double tol) const { return max_rel_err <= tol; }
};

/// Central differences over every embedding coordinate and scalar; the step
/// for coordinate value t is h * max(1, |t|).
FdReport fd_check(const GeometryConfig& cfg, std::span<const Vec> texts,
                  std::span<const Vec> images, double h = 1e-6);

}  // namespace geomlab
