#include "geomlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geomlab {

std::string to_string(GeometryKind k) {
    switch (k) {
        case GeometryKind::clip: return "clip";
        case GeometryKind::elliptic: return "elliptic";
        case GeometryKind::euclidean: return "euclidean";
        case GeometryKind::hyperbolic: return "hyperbolic";
    }
    return "?";
}

std::string to_string(LogitVariant v) {
    return v == LogitVariant::d ? "d" : "d2";
}

GeometryKind geometry_kind_from_string(const std::string& s) {
    if (s == "clip") return GeometryKind::clip;
    if (s == "elliptic") return GeometryKind::elliptic;
    if (s == "euclidean") return GeometryKind::euclidean;
    if (s == "hyperbolic") return GeometryKind::hyperbolic;
    throw std::invalid_argument("unknown geometry kind: " + s);
}

LogitVariant logit_variant_from_string(const std::string& s) {
    if (s == "d") return LogitVariant::d;
    if (s == "d2") return LogitVariant::d2;
    throw std::invalid_argument("unknown logit variant: " + s);
}

double GeometryConfig::beta() const {
    return std::min(std::exp(log_beta), beta_max);
}

double GeometryConfig::curvature() const {
    return std::clamp(std::exp(log_c), c_min, c_max);
}

double GeometryConfig::alpha_txt() const { return std::exp(log_alpha_txt); }
double GeometryConfig::alpha_img() const { return std::exp(log_alpha_img); }

bool GeometryConfig::beta_clamped() const { return std::exp(log_beta) > beta_max; }

bool GeometryConfig::c_clamped() const {
    const double c = std::exp(log_c);
    return c < c_min || c > c_max;
}

GeometryConfig GeometryConfig::defaults(GeometryKind kind, LogitVariant variant,
                                        int embed_dim) {
    if (embed_dim < 2) {
        throw std::invalid_argument("GeometryConfig::defaults: embed_dim must be >= 2");
    }
    GeometryConfig cfg;
    cfg.kind = kind;
    cfg.variant = variant;
    if (variant == LogitVariant::d) {
        cfg.log_beta = std::log(1.0 / 0.07);
        cfg.beta_max = 100.0;
        cfg.min_radius_k = 0.1;
    } else {
        cfg.log_beta = 0.0;
        cfg.beta_max = 1e9;  // d2 regime trains without a beta ceiling
        cfg.min_radius_k = 0.3;
    }
    cfg.log_c = 0.0;
    cfg.log_alpha_txt = -0.5 * std::log(static_cast<double>(embed_dim));
    cfg.log_alpha_img = cfg.log_alpha_txt;
    cfg.lambda_entail = 0.0;
    return cfg;
}

void GeometryConfig::validate() const {
    if (kind == GeometryKind::clip || kind == GeometryKind::elliptic) {
        if (variant != LogitVariant::d) {
            throw std::invalid_argument(to_string(kind) + " geometry has no d2 logit variant");
        }
        if (lambda_entail != 0.0) {
            throw std::invalid_argument("entailment loss is undefined for " + to_string(kind) +
                                        " geometry (lambda must be 0)");
        }
    }
    if (lambda_entail < 0.0) throw std::invalid_argument("lambda_entail must be >= 0");
    if (min_radius_k < 0.0) throw std::invalid_argument("min_radius_k must be >= 0");
    if (beta_max <= 0.0) throw std::invalid_argument("beta_max must be > 0");
    if (c_min <= 0.0 || c_max < c_min) {
        throw std::invalid_argument("curvature clamp bounds must satisfy 0 < c_min <= c_max");
    }
}

namespace {

void check_same_dim(const Vec& x, const Vec& y, const char* op) {
    if (x.size() != y.size()) {
        throw std::invalid_argument(std::string(op) + ": dimension mismatch");
    }
}

}  // namespace

double cosine_sim(const Vec& x, const Vec& y) {
    check_same_dim(x, y, "cosine_sim");
    const double nx2 = norm_sq(x);
    const double ny2 = norm_sq(y);
    if (nx2 == 0.0) throw std::domain_error("cosine_sim: first argument has zero norm");
    if (ny2 == 0.0) throw std::domain_error("cosine_sim: second argument has zero norm");
    // sqrt of the product keeps cos(x, x) at exactly 1
    return std::clamp(dot(x, y) / std::sqrt(nx2 * ny2), -1.0, 1.0);
}

double elliptic_sim(const Vec& x, const Vec& y) {
    return -std::acos(cosine_sim(x, y));
}

double euclidean_sim(const Vec& x, const Vec& y, LogitVariant variant) {
    check_same_dim(x, y, "euclidean_sim");
    const double n = static_cast<double>(x.size());
    const double d2 = std::max(0.0, norm_sq(x) - 2.0 * dot(x, y) + norm_sq(y));
    if (variant == LogitVariant::d2) return -d2 / n;
    return -std::sqrt(d2) / std::sqrt(n);
}

namespace detail {

double sinhc(double z) {
    const double az = std::abs(z);
    if (az < 1e-4) {
        const double z2 = z * z;
        return 1.0 + z2 / 6.0 + z2 * z2 / 120.0;
    }
    return std::sinh(z) / z;
}

double lorentz_rho_minus_one(double a, double b, double gap_sq) {
    const double sh = std::sinh(0.5 * (a - b));
    double e = 2.0 * sh * sh;
    if (a > 0.0 && b > 0.0) {
        e += std::sinh(a) * std::sinh(b) * 0.5 * gap_sq;
    }
    return e;
}

double lorentz_dist_from_e(double e, double sqrt_c) {
    e = std::max(0.0, e);  // arccosh argument clamped below at 1
    return std::log1p(e + std::sqrt(e * (e + 2.0))) / sqrt_c;
}

}  // namespace detail

LorentzPoint exp_map_origin(const Vec& u, double c) {
    if (c <= 0.0) throw std::invalid_argument("exp_map_origin: curvature must be > 0");
    const double sqrt_c = std::sqrt(c);
    const double r = norm(u);
    const double factor = detail::sinhc(sqrt_c * r);
    LorentzPoint p;
    p.space = scaled(u, factor);
    p.time = std::sqrt(1.0 / c + norm_sq(p.space));
    p.curvature = c;
    return p;
}

namespace {

void check_compatible(const LorentzPoint& x, const LorentzPoint& y, const char* op) {
    if (x.space.size() != y.space.size()) {
        throw std::invalid_argument(std::string(op) + ": dimension mismatch");
    }
    if (x.curvature != y.curvature) {
        throw std::domain_error(std::string(op) + ": curvature mismatch (" +
                                std::to_string(x.curvature) + " vs " +
                                std::to_string(y.curvature) + ")");
    }
}

}  // namespace

double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y) {
    check_compatible(x, y, "lorentz_inner");
    // Points carry the hyperboloid residence invariant, so the inner product
    // equals -(1 + e)/c with e = rho - 1 >= 0. Evaluating e from the radial
    // parameters avoids the catastrophic cancellation of space.space - t*t at
    // large radii and keeps <x,x>_L = -1/c exact.
    const double c = x.curvature;
    const double sqrt_c = std::sqrt(c);
    const double nx = norm(x.space);
    const double ny = norm(y.space);
    const double a = std::asinh(sqrt_c * nx);
    const double b = std::asinh(sqrt_c * ny);
    const double gap = (nx > 0.0 && ny > 0.0) ? unit_gap_sq(x.space, nx, y.space, ny) : 0.0;
    return -(1.0 + detail::lorentz_rho_minus_one(a, b, gap)) / c;
}

double lorentz_sim(const LorentzPoint& x, const LorentzPoint& y, LogitVariant variant) {
    check_compatible(x, y, "lorentz_sim");
    const double c = x.curvature;
    const double sqrt_c = std::sqrt(c);
    // Recover radial parameters and evaluate arccosh(-c<x,y>_L) through its
    // cancellation-free form; equivalent to the inner-product route but exact
    // near coincident points.
    const double nx = norm(x.space);
    const double ny = norm(y.space);
    const double a = std::asinh(sqrt_c * nx);
    const double b = std::asinh(sqrt_c * ny);
    const double gap = (nx > 0.0 && ny > 0.0) ? unit_gap_sq(x.space, nx, y.space, ny) : 0.0;
    const double e = detail::lorentz_rho_minus_one(a, b, gap);
    const double d = detail::lorentz_dist_from_e(e, sqrt_c);
    return variant == LogitVariant::d ? -d : -d * d;
}

double similarity(const GeometryConfig& cfg, const Vec& text_emb, const Vec& image_emb) {
    switch (cfg.kind) {
        case GeometryKind::clip:
            return cosine_sim(text_emb, image_emb);
        case GeometryKind::elliptic:
            return elliptic_sim(text_emb, image_emb);
        case GeometryKind::euclidean:
            return euclidean_sim(text_emb, image_emb, cfg.variant);
        case GeometryKind::hyperbolic: {
            const double c = cfg.curvature();
            const LorentzPoint x = exp_map_origin(scaled(text_emb, cfg.alpha_txt()), c);
            const LorentzPoint y = exp_map_origin(scaled(image_emb, cfg.alpha_img()), c);
            return lorentz_sim(x, y, cfg.variant);
        }
    }
    throw std::logic_error("similarity: unreachable");
}

}  // namespace geomlab
