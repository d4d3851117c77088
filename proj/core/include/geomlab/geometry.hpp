#pragma once

#include <string>

#include "geomlab/vec.hpp"

namespace geomlab {

enum class GeometryKind { clip, elliptic, euclidean, hyperbolic };
enum class LogitVariant { d, d2 };

std::string to_string(GeometryKind k);
std::string to_string(LogitVariant v);
GeometryKind geometry_kind_from_string(const std::string& s);
LogitVariant logit_variant_from_string(const std::string& s);

/// Geometry kind, logit variant, and the trainable/clamped scalars.
/// Scalars live on the log scale; beta/curvature are clamped on read.
struct GeometryConfig {
    GeometryKind kind = GeometryKind::clip;
    LogitVariant variant = LogitVariant::d;

    double log_beta = 0.0;
    double log_c = 0.0;
    double log_alpha_txt = 0.0;
    double log_alpha_img = 0.0;

    double min_radius_k = 0.1;
    double lambda_entail = 0.0;

    double beta_max = 100.0;
    double c_min = 0.1;
    double c_max = 10.0;

    double beta() const;
    double curvature() const;
    double alpha_txt() const;
    double alpha_img() const;

    // clamp-active flags; gradients stop at an active clamp
    bool beta_clamped() const;
    bool c_clamped() const;

    bool uses_entailment() const {
        return kind == GeometryKind::euclidean || kind == GeometryKind::hyperbolic;
    }

    /// Paper-regime initialization for a given kind/variant and embedding dim:
    /// d-variant starts at beta = 1/0.07 capped at 100, d2 at beta = 1 uncapped;
    /// c = 1 in [0.1, 10]; alpha_txt = alpha_img = 1/sqrt(n).
    static GeometryConfig defaults(GeometryKind kind, LogitVariant variant, int embed_dim);

    /// Throws invalid_argument on inconsistent combinations
    /// (clip/elliptic with d2 logit or a nonzero entailment weight).
    void validate() const;
};

/// A point on the hyperboloid <x,x>_L = -1/c. Carries its curvature so
/// mixed-curvature operations fail loudly.
struct LorentzPoint {
    Vec space;
    double time = 0.0;
    double curvature = 0.0;
};

double cosine_sim(const Vec& x, const Vec& y);
double elliptic_sim(const Vec& x, const Vec& y);
double euclidean_sim(const Vec& x, const Vec& y, LogitVariant variant);

/// Exponential map at the hyperboloid apex: radial geodesic of length |u|.
LorentzPoint exp_map_origin(const Vec& u, double c);

/// Lorentzian inner product x_space . y_space - x_time * y_time, evaluated
/// through the residence invariant so that <x,x>_L = -1/c holds to full
/// precision at any radius. Inputs must lie on the same hyperboloid.
double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y);
double lorentz_sim(const LorentzPoint& x, const LorentzPoint& y, LogitVariant variant);

/// Dispatch over kind/variant. Hyperbolic scales by alpha_txt/alpha_img and
/// lifts both sides; the other kinds consume encoder outputs directly.
double similarity(const GeometryConfig& cfg, const Vec& text_emb, const Vec& image_emb);

namespace detail {

/// sinh(z)/z, continued through z = 0 by its Taylor series.
double sinhc(double z);

/// rho - 1 where rho = -c<x,y>_L for hyperboloid points with radial
/// parameters a, b and squared unit-direction gap |x^ - y^|^2. Built from
/// non-negative terms, so it is accurate even when the points nearly coincide.
double lorentz_rho_minus_one(double a, double b, double gap_sq);

/// Geodesic distance (1/sqrt(c)) * arccosh(1 + e), evaluated via log1p.
double lorentz_dist_from_e(double e, double sqrt_c);

}  // namespace detail

}  // namespace geomlab
