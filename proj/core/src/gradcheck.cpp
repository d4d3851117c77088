#include "geomlab/gradcheck.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "geomlab/losses.hpp"

namespace geomlab {

std::vector<GradcheckCombo> gradcheck_combos() {
    return {
        {GeometryKind::clip, LogitVariant::d, 0.0},
        {GeometryKind::elliptic, LogitVariant::d, 0.0},
        {GeometryKind::euclidean, LogitVariant::d, 0.0},
        {GeometryKind::euclidean, LogitVariant::d, 0.2},
        {GeometryKind::euclidean, LogitVariant::d2, 0.0},
        {GeometryKind::euclidean, LogitVariant::d2, 0.2},
        {GeometryKind::hyperbolic, LogitVariant::d, 0.0},
        {GeometryKind::hyperbolic, LogitVariant::d, 0.2},
        {GeometryKind::hyperbolic, LogitVariant::d2, 0.0},
        {GeometryKind::hyperbolic, LogitVariant::d2, 0.2},
    };
}

namespace {

Vec random_embedding(Rng& rng, int n) {
    Vec v = rng.normal_vec(n);
    const double target = rng.uniform(0.5, 2.5);
    const double nv = norm(v);
    for (double& x : v) x *= target / nv;
    return v;
}

bool margins_ok(const GeometryConfig& cfg, const std::vector<Vec>& texts,
                const std::vector<Vec>& images) {
    const std::size_t b = texts.size();
    if (cfg.kind == GeometryKind::clip || cfg.kind == GeometryKind::elliptic) {
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < b; ++j) {
                if (std::abs(cosine_sim(texts[i], images[j])) > 0.99) return false;
            }
        }
        return true;
    }
    if (cfg.kind == GeometryKind::euclidean) {
        if (cfg.variant == LogitVariant::d) {
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < b; ++j) {
                    Vec diff(texts[i]);
                    axpy(-1.0, images[j], diff);
                    if (norm(diff) < 0.05) return false;
                }
            }
        }
        if (cfg.lambda_entail > 0.0) {
            const double k = cfg.min_radius_k;
            for (std::size_t i = 0; i < b; ++i) {
                const double nx = norm(texts[i]);
                if (nx > 0.95 * k && nx < 1.05 * k) return false;
                const double ext = exterior_angle_euclid(texts[i], images[i]);
                const double aper = half_aperture_euclid(texts[i], k);
                if (std::abs(ext - aper) < 0.05) return false;
                if (ext < 0.05 || ext > std::numbers::pi - 0.05) return false;
            }
        }
        return true;
    }
    const double c = cfg.curvature();
    const double sqrt_c = std::sqrt(c);
    for (std::size_t i = 0; i < b; ++i) {
        const double nt = norm(texts[i]);
        for (std::size_t j = 0; j < b; ++j) {
            const double ni = norm(images[j]);
            const double a = sqrt_c * cfg.alpha_txt() * nt;
            const double bb = sqrt_c * cfg.alpha_img() * ni;
            const double gap = unit_gap_sq(texts[i], nt, images[j], ni);
            if (detail::lorentz_rho_minus_one(a, bb, gap) < 1e-4) return false;
        }
    }
    if (cfg.lambda_entail > 0.0) {
        const double k = cfg.min_radius_k;
        for (std::size_t i = 0; i < b; ++i) {
            const LorentzPoint x = exp_map_origin(scaled(texts[i], cfg.alpha_txt()), c);
            const LorentzPoint y = exp_map_origin(scaled(images[i], cfg.alpha_img()), c);
            const double sa = std::sinh(sqrt_c * cfg.alpha_txt() * norm(texts[i]));
            if (sa > 1.9 * k && sa < 2.1 * k) return false;
            const double ext = exterior_angle_hyper(x, y);
            const double aper = half_aperture_hyper(x, k);
            if (std::abs(ext - aper) < 0.05) return false;
            if (ext < 0.05 || ext > std::numbers::pi - 0.05) return false;
        }
    }
    return true;
}

}  // namespace

SampledCase sample_gradcheck_case(GeometryKind kind, LogitVariant variant, double lambda,
                                  int batch, int n, Rng& rng) {
    SampledCase sc;
    sc.cfg = GeometryConfig::defaults(kind, variant, n);
    sc.cfg.lambda_entail = lambda;
    // bounded-similarity kinds tolerate less logit scale before the probe's
    // truncation error (cubic in beta) outruns the gradients (linear)
    const double beta_hi =
        kind == GeometryKind::clip || kind == GeometryKind::elliptic ? 8.0 : 15.0;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        sc.cfg.log_beta = rng.uniform(std::log(0.5), std::log(beta_hi));
        sc.cfg.log_c = rng.uniform(std::log(0.5), std::log(2.0));
        sc.cfg.log_alpha_txt = rng.uniform(std::log(0.1), std::log(0.6));
        sc.cfg.log_alpha_img = rng.uniform(std::log(0.1), std::log(0.6));
        sc.texts.clear();
        sc.images.clear();
        for (int i = 0; i < batch; ++i) {
            sc.texts.push_back(random_embedding(rng, n));
            sc.images.push_back(random_embedding(rng, n));
        }
        if (margins_ok(sc.cfg, sc.texts, sc.images)) return sc;
    }
    throw std::runtime_error("sample_gradcheck_case: margins not satisfiable");
}

bool fd_resolvable(const GradRecord& rec) {
    // below this magnitude the central-difference noise floor (~1e-10 in
    // absolute terms at the default step) dominates the relative comparison
    constexpr double floor = 1e-4;
    const auto ok = [](double g) { return g == 0.0 || std::abs(g) >= floor; };
    for (const Vec& v : rec.d_texts) {
        for (double g : v) {
            if (!ok(g)) return false;
        }
    }
    for (const Vec& v : rec.d_images) {
        for (double g : v) {
            if (!ok(g)) return false;
        }
    }
    return ok(rec.d_log_beta) && ok(rec.d_log_c) && ok(rec.d_log_alpha_txt) &&
           ok(rec.d_log_alpha_img);
}

GradcheckSummary run_gradcheck(int configs_per_combo, int batch, int n, std::uint64_t seed,
                               double h, double tolerance) {
    if (configs_per_combo < 1) {
        throw std::invalid_argument("run_gradcheck: configs_per_combo must be >= 1");
    }
    GradcheckSummary summary;
    summary.tolerance = tolerance;
    std::uint64_t combo_idx = 0;
    for (const GradcheckCombo& combo : gradcheck_combos()) {
        Rng rng(mix_seed(seed, 0xC0FFEE00ULL + combo_idx++));
        GradcheckRow row;
        row.combo = combo;
        row.configs = configs_per_combo;
        for (int k = 0; k < configs_per_combo; ++k) {
            SampledCase sc;
            bool usable = false;
            for (int attempt = 0; attempt < 200 && !usable; ++attempt) {
                sc = sample_gradcheck_case(combo.kind, combo.variant, combo.lambda, batch, n, rng);
                usable = fd_resolvable(grad_total_loss(sc.cfg, sc.texts, sc.images).second);
            }
            if (!usable) {
                throw std::runtime_error("run_gradcheck: no resolvable configuration found");
            }
            const FdReport report = fd_check(sc.cfg, sc.texts, sc.images, h);
            if (report.max_rel_err >= row.max_rel_err) {
                row.max_rel_err = report.max_rel_err;
                row.worst_param = report.worst_param;
            }
        }
        summary.max_rel_err = std::max(summary.max_rel_err, row.max_rel_err);
        summary.rows.push_back(std::move(row));
    }
    return summary;
}

}  // namespace geomlab
