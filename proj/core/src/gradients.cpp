#include "geomlab/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace geomlab {

namespace {

// Shared channel derivatives for one hyperbolic pair, parameterized by the
// radial arguments a = sqrt(c)*|u|, b = sqrt(c)*|v| and the squared gap
// between unit directions. Everything downstream (distance logits and the
// exterior angle) is a function of (a, b, w) plus an explicit 1/sqrt(c).
struct HyperPair {
    bool coincident = false;  // rho == 1 exactly
    double e = 0.0;           // rho - 1
    double rho = 1.0;
    double sq = 0.0;  // sqrt(rho^2 - 1)
    double dist = 0.0;
    double drho_da = 0.0;
    double drho_db = 0.0;
    double drho_dw = 0.0;
    double ds_da = 0.0;  // similarity channel gradients
    double ds_db = 0.0;
    double ds_dw = 0.0;
    double ds_dlogc_explicit = 0.0;
};

HyperPair hyper_pair(double a, double b, double gap_sq, double sqrt_c, LogitVariant variant) {
    HyperPair p;
    p.e = detail::lorentz_rho_minus_one(a, b, gap_sq);
    if (p.e <= 0.0) {
        p.coincident = true;
        return p;
    }
    p.rho = 1.0 + p.e;
    p.sq = std::sqrt(p.e * (p.e + 2.0));
    const double arc = std::log1p(p.e + p.sq);  // arccosh(rho)
    p.dist = arc / sqrt_c;

    const double sa = std::sinh(a), ca = std::cosh(a);
    const double sb = std::sinh(b), cb = std::cosh(b);
    const double half_gap = 0.5 * gap_sq;
    // cancellation-free split: sa*cb - ca*sb*w = sinh(a-b) + ca*sb*(1-w)
    p.drho_da = std::sinh(a - b) + ca * sb * half_gap;
    p.drho_db = std::sinh(b - a) + sa * cb * half_gap;
    p.drho_dw = -sa * sb;

    const double c = sqrt_c * sqrt_c;
    double ds_drho;
    if (variant == LogitVariant::d) {
        ds_drho = -1.0 / (sqrt_c * p.sq);
        p.ds_dlogc_explicit = 0.5 * p.dist;
    } else {
        ds_drho = -2.0 * arc / (c * p.sq);
        p.ds_dlogc_explicit = p.dist * p.dist;
    }
    p.ds_da = ds_drho * p.drho_da;
    p.ds_db = ds_drho * p.drho_db;
    p.ds_dw = ds_drho * p.drho_dw;
    return p;
}

// dw/dx for w = cos(x, y): (y_hat - w x_hat) / |x|
void add_cosine_grad(double weight, const Vec& x, double nx, const Vec& y, double ny,
                     double w, Vec& out) {
    const double s1 = weight / (nx * ny);
    const double s2 = -weight * w / (nx * nx);
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] += s1 * y[k] + s2 * x[k];
    }
}

double clamped_cosine(const Vec& x, const Vec& y) {
    return std::clamp(dot(x, y) / std::sqrt(norm_sq(x) * norm_sq(y)), -1.0, 1.0);
}

[[noreturn]] void throw_coincident(const char* what, std::size_t i, std::size_t j) {
    throw GradSingularError(std::string(what) + ": derivative undefined at coincident pair (text " +
                            std::to_string(i) + ", image " + std::to_string(j) + ")");
}

struct EuclidEntailGrad {
    bool active = false;
    Vec d_x;
    Vec d_y;
};

// Gradient of max(0, ext(x, y) - aper(x)) in flat space; zero at and below
// the hinge.
EuclidEntailGrad euclid_entail_grad(const Vec& x, const Vec& y, double min_radius_k,
                                    std::size_t pair_idx) {
    EuclidEntailGrad g;
    const std::size_t n = x.size();
    const double nx = norm(x);
    if (nx == 0.0) {
        throw GradSingularError("entailment gradient: text " + std::to_string(pair_idx) +
                                " at the origin");
    }
    Vec diff(n);
    for (std::size_t k = 0; k < n; ++k) diff[k] = y[k] - x[k];
    const double nd = norm(diff);
    if (nd == 0.0) throw_coincident("entailment gradient", pair_idx, pair_idx);

    const double theta = std::clamp(dot(diff, x) / (nd * nx), -1.0, 1.0);
    const double ext = std::acos(theta);

    double aper = std::numbers::pi / 2.0;
    double daper_dnorm = 0.0;
    if (nx > min_radius_k) {
        const double m = min_radius_k / nx;
        aper = std::asin(m);
        const double root = 1.0 - m * m;
        if (root == 0.0) {
            throw GradSingularError("entailment gradient: aperture clamp boundary at pair " +
                                    std::to_string(pair_idx));
        }
        daper_dnorm = -min_radius_k / (nx * nx) / std::sqrt(root);
    }

    if (ext - aper <= 0.0) return g;  // hinge: subgradient 0

    const double one_minus_t2 = 1.0 - theta * theta;
    if (one_minus_t2 == 0.0) {
        throw GradSingularError("entailment gradient: exterior angle derivative undefined at pair " +
                                std::to_string(pair_idx));
    }
    const double dext_dtheta = -1.0 / std::sqrt(one_minus_t2);

    g.active = true;
    g.d_x.assign(n, 0.0);
    g.d_y.assign(n, 0.0);
    const double inv_ndnx = 1.0 / (nd * nx);
    for (std::size_t k = 0; k < n; ++k) {
        const double dtheta_dx =
            (y[k] - 2.0 * x[k]) * inv_ndnx + theta * diff[k] / (nd * nd) - theta * x[k] / (nx * nx);
        const double dtheta_dy = x[k] * inv_ndnx - theta * diff[k] / (nd * nd);
        g.d_x[k] = dext_dtheta * dtheta_dx - daper_dnorm * x[k] / nx;
        g.d_y[k] = dext_dtheta * dtheta_dy;
    }
    return g;
}

struct HyperEntailGrad {
    bool active = false;
    double d_a = 0.0;
    double d_b = 0.0;
    double d_w = 0.0;
};

// Gradient of the hyperbolic hinge in (a, b, w) channels. The exterior angle
// reduces to theta = (cosh b - cosh a * rho) / (sinh a * sqrt(rho^2 - 1)), with
// no explicit curvature dependence, and the half-aperture to asin(2K/sinh a).
HyperEntailGrad hyper_entail_grad(double a, double b, const HyperPair& p, double min_radius_k,
                                  std::size_t pair_idx) {
    HyperEntailGrad g;
    if (a == 0.0) {
        throw GradSingularError("entailment gradient: text " + std::to_string(pair_idx) +
                                " at the apex");
    }
    if (p.coincident) throw_coincident("entailment gradient", pair_idx, pair_idx);

    const double sa = std::sinh(a), ca = std::cosh(a);
    const double sb = std::sinh(b);

    const double U = std::cosh(b) - ca * p.rho;
    const double V = sa * p.sq;
    const double theta = std::clamp(U / V, -1.0, 1.0);
    const double ext = std::acos(theta);

    double aper = std::numbers::pi / 2.0;
    double daper_da = 0.0;
    const double two_k = 2.0 * min_radius_k;
    if (sa > two_k) {
        const double m = two_k / sa;
        aper = std::asin(m);
        const double root = 1.0 - m * m;
        if (root == 0.0) {
            throw GradSingularError("entailment gradient: aperture clamp boundary at pair " +
                                    std::to_string(pair_idx));
        }
        daper_da = -two_k * ca / (sa * sa) / std::sqrt(root);
    }

    if (ext - aper <= 0.0) return g;

    const double one_minus_t2 = 1.0 - theta * theta;
    if (one_minus_t2 == 0.0) {
        throw GradSingularError("entailment gradient: exterior angle derivative undefined at pair " +
                                std::to_string(pair_idx));
    }
    const double dext_dtheta = -1.0 / std::sqrt(one_minus_t2);

    const double dU_da = -sa * p.rho - ca * p.drho_da;
    const double dU_db = sb - ca * p.drho_db;
    const double dU_dw = -ca * p.drho_dw;
    const double rho_over_sq = p.rho / p.sq;
    const double dV_da = ca * p.sq + sa * rho_over_sq * p.drho_da;
    const double dV_db = sa * rho_over_sq * p.drho_db;
    const double dV_dw = sa * rho_over_sq * p.drho_dw;

    const double inv_v2 = 1.0 / (V * V);
    g.active = true;
    g.d_a = dext_dtheta * (dU_da * V - U * dV_da) * inv_v2 - daper_da;
    g.d_b = dext_dtheta * (dU_db * V - U * dV_db) * inv_v2;
    g.d_w = dext_dtheta * (dU_dw * V - U * dV_dw) * inv_v2;
    return g;
}

}  // namespace

SimilarityGrad similarity_grad(const GeometryConfig& cfg, const Vec& text_emb,
                               const Vec& image_emb) {
    if (text_emb.size() != image_emb.size()) {
        throw std::invalid_argument("similarity_grad: dimension mismatch");
    }
    const std::size_t n = text_emb.size();
    SimilarityGrad out;
    out.d_text.assign(n, 0.0);
    out.d_image.assign(n, 0.0);

    switch (cfg.kind) {
        case GeometryKind::clip:
        case GeometryKind::elliptic: {
            const double nx = norm(text_emb);
            const double ny = norm(image_emb);
            if (nx == 0.0 || ny == 0.0) {
                throw std::domain_error("similarity_grad: zero-norm embedding");
            }
            const double w = clamped_cosine(text_emb, image_emb);
            double factor = 1.0;
            out.value = w;
            if (cfg.kind == GeometryKind::elliptic) {
                out.value = -std::acos(w);
                const double root = 1.0 - w * w;
                if (root == 0.0) {
                    throw GradSingularError(
                        "elliptic similarity gradient undefined at aligned or antipodal pair");
                }
                factor = 1.0 / std::sqrt(root);
            }
            add_cosine_grad(factor, text_emb, nx, image_emb, ny, w, out.d_text);
            add_cosine_grad(factor, image_emb, ny, text_emb, nx, w, out.d_image);
            return out;
        }
        case GeometryKind::euclidean: {
            const double nd = static_cast<double>(n);
            Vec diff(n);
            for (std::size_t k = 0; k < n; ++k) diff[k] = text_emb[k] - image_emb[k];
            if (cfg.variant == LogitVariant::d2) {
                out.value = -norm_sq(diff) / nd;
                for (std::size_t k = 0; k < n; ++k) {
                    out.d_text[k] = -2.0 * diff[k] / nd;
                    out.d_image[k] = 2.0 * diff[k] / nd;
                }
                return out;
            }
            const double dist = norm(diff);
            if (dist == 0.0) throw_coincident("euclidean d similarity", 0, 0);
            out.value = -dist / std::sqrt(nd);
            const double scale = -1.0 / (std::sqrt(nd) * dist);
            for (std::size_t k = 0; k < n; ++k) {
                out.d_text[k] = scale * diff[k];
                out.d_image[k] = -scale * diff[k];
            }
            return out;
        }
        case GeometryKind::hyperbolic: {
            const double c = cfg.curvature();
            const double sqrt_c = std::sqrt(c);
            const double at = cfg.alpha_txt();
            const double ai = cfg.alpha_img();
            const double rt = norm(text_emb);
            const double ri = norm(image_emb);
            if (rt == 0.0 || ri == 0.0) {
                throw GradSingularError("hyperbolic similarity gradient undefined at the origin");
            }
            const double a = sqrt_c * at * rt;
            const double b = sqrt_c * ai * ri;
            const double gap_sq = unit_gap_sq(text_emb, rt, image_emb, ri);
            const HyperPair p = hyper_pair(a, b, gap_sq, sqrt_c, cfg.variant);
            if (p.coincident) {
                if (cfg.variant == LogitVariant::d) throw_coincident("hyperbolic d similarity", 0, 0);
                out.value = 0.0;  // d2 gradient vanishes exactly at coincidence
                return out;
            }
            out.value = cfg.variant == LogitVariant::d ? -p.dist : -p.dist * p.dist;
            const double w = std::clamp(1.0 - 0.5 * gap_sq, -1.0, 1.0);
            // radial channel
            axpy(p.ds_da * sqrt_c * at / rt, text_emb, out.d_text);
            axpy(p.ds_db * sqrt_c * ai / ri, image_emb, out.d_image);
            // angular channel
            add_cosine_grad(p.ds_dw, text_emb, rt, image_emb, ri, w, out.d_text);
            add_cosine_grad(p.ds_dw, image_emb, ri, text_emb, rt, w, out.d_image);
            out.d_log_alpha_txt = p.ds_da * a;
            out.d_log_alpha_img = p.ds_db * b;
            out.d_log_c = cfg.c_clamped()
                              ? 0.0
                              : p.ds_da * 0.5 * a + p.ds_db * 0.5 * b + p.ds_dlogc_explicit;
            return out;
        }
    }
    throw std::logic_error("similarity_grad: unreachable");
}

std::pair<LossBreakdown, GradRecord> grad_total_loss(const GeometryConfig& cfg,
                                                     std::span<const Vec> texts,
                                                     std::span<const Vec> images) {
    cfg.validate();
    if (texts.empty() || texts.size() != images.size()) {
        throw std::invalid_argument("grad_total_loss: batch must be non-empty and aligned");
    }
    const std::size_t batch = texts.size();
    const std::size_t n = texts[0].size();
    for (std::size_t i = 0; i < batch; ++i) {
        if (texts[i].size() != n || images[i].size() != n) {
            throw std::invalid_argument("grad_total_loss: ragged batch");
        }
    }

    // value through the same path callers use, so it matches bit-for-bit
    const LossBreakdown lb = total_loss(cfg, texts, images);

    GradRecord rec;
    rec.d_texts.assign(batch, Vec(n, 0.0));
    rec.d_images.assign(batch, Vec(n, 0.0));

    const LogitMatrix logits = logit_matrix(cfg, texts, images);
    const double beta = cfg.beta();
    const double inv_2b = 1.0 / (2.0 * static_cast<double>(batch));

    // dL_cont/dM[a][b] = -(2*delta - p_col - p_row) / (2B)
    Vec g_logit(batch * batch);
    {
        Vec row_lse(batch), col_lse(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            double row_max = logits.at(i, 0), col_max = logits.at(0, i);
            for (std::size_t j = 1; j < batch; ++j) {
                row_max = std::max(row_max, logits.at(i, j));
                col_max = std::max(col_max, logits.at(j, i));
            }
            double rs = 0.0, cs = 0.0;
            for (std::size_t j = 0; j < batch; ++j) {
                rs += std::exp(logits.at(i, j) - row_max);
                cs += std::exp(logits.at(j, i) - col_max);
            }
            row_lse[i] = row_max + std::log(rs);
            col_lse[i] = col_max + std::log(cs);
        }
        for (std::size_t a = 0; a < batch; ++a) {
            for (std::size_t b = 0; b < batch; ++b) {
                const double p_row = std::exp(logits.at(a, b) - row_lse[a]);
                const double p_col = std::exp(logits.at(a, b) - col_lse[b]);
                const double delta = a == b ? 2.0 : 0.0;
                g_logit[a * batch + b] = -(delta - p_row - p_col) * inv_2b;
            }
        }
    }

    // logit scale: dL/dlog_beta = sum G .* M when the cap is inactive
    if (!cfg.beta_clamped()) {
        double acc = 0.0;
        for (std::size_t k = 0; k < batch * batch; ++k) acc += g_logit[k] * logits.values[k];
        rec.d_log_beta = acc;
    }

    const double lambda_w =
        cfg.lambda_entail > 0.0 ? cfg.lambda_entail / static_cast<double>(batch) : 0.0;

    switch (cfg.kind) {
        case GeometryKind::clip:
        case GeometryKind::elliptic: {
            Vec tn(batch), im_n(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                tn[i] = norm(texts[i]);
                im_n[i] = norm(images[i]);
                if (tn[i] == 0.0 || im_n[i] == 0.0) {
                    throw std::domain_error("grad_total_loss: zero-norm embedding");
                }
            }
            for (std::size_t a = 0; a < batch; ++a) {
                for (std::size_t b = 0; b < batch; ++b) {
                    const double w = clamped_cosine(texts[a], images[b]);
                    double gs = beta * g_logit[a * batch + b];
                    if (cfg.kind == GeometryKind::elliptic) {
                        const double root = 1.0 - w * w;
                        if (root == 0.0) {
                            throw GradSingularError(
                                "elliptic gradient undefined at aligned or antipodal pair (text " +
                                std::to_string(a) + ", image " + std::to_string(b) + ")");
                        }
                        gs /= std::sqrt(root);
                    }
                    add_cosine_grad(gs, texts[a], tn[a], images[b], im_n[b], w, rec.d_texts[a]);
                    add_cosine_grad(gs, images[b], im_n[b], texts[a], tn[a], w, rec.d_images[b]);
                }
            }
            break;
        }
        case GeometryKind::euclidean: {
            const double nd = static_cast<double>(n);
            for (std::size_t a = 0; a < batch; ++a) {
                for (std::size_t b = 0; b < batch; ++b) {
                    const double gs = beta * g_logit[a * batch + b];
                    double scale;
                    if (cfg.variant == LogitVariant::d2) {
                        scale = -2.0 / nd * gs;
                    } else {
                        double dist_sq = 0.0;
                        for (std::size_t k = 0; k < n; ++k) {
                            const double dk = texts[a][k] - images[b][k];
                            dist_sq += dk * dk;
                        }
                        const double dist = std::sqrt(dist_sq);
                        if (dist == 0.0) throw_coincident("euclidean d gradient", a, b);
                        scale = -gs / (std::sqrt(nd) * dist);
                    }
                    for (std::size_t k = 0; k < n; ++k) {
                        const double dk = texts[a][k] - images[b][k];
                        rec.d_texts[a][k] += scale * dk;
                        rec.d_images[b][k] -= scale * dk;
                    }
                }
            }
            if (lambda_w > 0.0) {
                for (std::size_t i = 0; i < batch; ++i) {
                    if (exact_equal(texts[i], images[i])) continue;
                    const EuclidEntailGrad g =
                        euclid_entail_grad(texts[i], images[i], cfg.min_radius_k, i);
                    if (!g.active) continue;
                    axpy(lambda_w, g.d_x, rec.d_texts[i]);
                    axpy(lambda_w, g.d_y, rec.d_images[i]);
                }
            }
            break;
        }
        case GeometryKind::hyperbolic: {
            const double c = cfg.curvature();
            const double sqrt_c = std::sqrt(c);
            const double at = cfg.alpha_txt();
            const double ai = cfg.alpha_img();
            Vec rt(batch), ri(batch), av(batch), bv(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                rt[i] = norm(texts[i]);
                ri[i] = norm(images[i]);
                if (rt[i] == 0.0) {
                    throw GradSingularError("hyperbolic gradient undefined: text " +
                                            std::to_string(i) + " at the origin");
                }
                if (ri[i] == 0.0) {
                    throw GradSingularError("hyperbolic gradient undefined: image " +
                                            std::to_string(i) + " at the origin");
                }
                av[i] = sqrt_c * at * rt[i];
                bv[i] = sqrt_c * ai * ri[i];
            }
            Vec acc_a(batch, 0.0), acc_b(batch, 0.0);
            double d_logc = 0.0;
            for (std::size_t a = 0; a < batch; ++a) {
                for (std::size_t b = 0; b < batch; ++b) {
                    const double gap_sq = unit_gap_sq(texts[a], rt[a], images[b], ri[b]);
                    const HyperPair p = hyper_pair(av[a], bv[b], gap_sq, sqrt_c, cfg.variant);
                    const double gs = beta * g_logit[a * batch + b];
                    const bool positive_pair = a == b;
                    if (p.coincident) {
                        if (cfg.variant == LogitVariant::d) {
                            throw_coincident("hyperbolic d gradient", a, b);
                        }
                        // d2 similarity gradient vanishes exactly here and a
                        // coincident positive pair contributes no entailment
                        continue;
                    }
                    const double w = std::clamp(1.0 - 0.5 * gap_sq, -1.0, 1.0);

                    double ch_a = gs * p.ds_da;
                    double ch_b = gs * p.ds_db;
                    double ch_w = gs * p.ds_dw;
                    d_logc += gs * p.ds_dlogc_explicit;

                    if (positive_pair && lambda_w > 0.0) {
                        const HyperEntailGrad eg =
                            hyper_entail_grad(av[a], bv[b], p, cfg.min_radius_k, a);
                        if (eg.active) {
                            ch_a += lambda_w * eg.d_a;
                            ch_b += lambda_w * eg.d_b;
                            ch_w += lambda_w * eg.d_w;
                        }
                    }

                    acc_a[a] += ch_a;
                    acc_b[b] += ch_b;
                    add_cosine_grad(ch_w, texts[a], rt[a], images[b], ri[b], w, rec.d_texts[a]);
                    add_cosine_grad(ch_w, images[b], ri[b], texts[a], rt[a], w, rec.d_images[b]);
                }
            }
            for (std::size_t i = 0; i < batch; ++i) {
                axpy(acc_a[i] * sqrt_c * at / rt[i], texts[i], rec.d_texts[i]);
                axpy(acc_b[i] * sqrt_c * ai / ri[i], images[i], rec.d_images[i]);
                rec.d_log_alpha_txt += acc_a[i] * av[i];
                rec.d_log_alpha_img += acc_b[i] * bv[i];
                d_logc += 0.5 * (acc_a[i] * av[i] + acc_b[i] * bv[i]);
            }
            rec.d_log_c = cfg.c_clamped() ? 0.0 : d_logc;
            break;
        }
    }

    return {lb, std::move(rec)};
}

double central_diff(const std::function<double(double)>& f, double x, double h) {
    if (h <= 0.0) throw std::invalid_argument("central_diff: step must be > 0");
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

double fd_relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

FdReport fd_check(const GeometryConfig& cfg, std::span<const Vec> texts,
                  std::span<const Vec> images, double h) {
    if (h <= 0.0) throw std::invalid_argument("fd_check: step must be > 0");
    const auto [lb, rec] = grad_total_loss(cfg, texts, images);
    (void)lb;

    std::vector<Vec> t(texts.begin(), texts.end());
    std::vector<Vec> im(images.begin(), images.end());
    GeometryConfig c = cfg;
    const auto eval = [&]() { return total_loss(c, t, im).total; };

    FdReport report;
    const auto probe = [&](double* slot, double analytic, const std::string& name) {
        const double saved = *slot;
        const double hh = h * std::max(1.0, std::abs(saved));
        const double numeric = central_diff(
            [&](double v) {
                *slot = v;
                const double f = eval();
                *slot = saved;
                return f;
            },
            saved, hh);
        FdEntry entry{name, analytic, numeric, fd_relative_error(analytic, numeric)};
        if (entry.rel_err >= report.max_rel_err) {
            report.max_rel_err = entry.rel_err;
            report.worst_param = entry.param;
        }
        report.entries.push_back(std::move(entry));
    };

    for (std::size_t i = 0; i < t.size(); ++i) {
        for (std::size_t k = 0; k < t[i].size(); ++k) {
            probe(&t[i][k], rec.d_texts[i][k],
                  "text[" + std::to_string(i) + "][" + std::to_string(k) + "]");
        }
    }
    for (std::size_t i = 0; i < im.size(); ++i) {
        for (std::size_t k = 0; k < im[i].size(); ++k) {
            probe(&im[i][k], rec.d_images[i][k],
                  "image[" + std::to_string(i) + "][" + std::to_string(k) + "]");
        }
    }
    probe(&c.log_beta, rec.d_log_beta, "log_beta");
    probe(&c.log_c, rec.d_log_c, "log_c");
    probe(&c.log_alpha_txt, rec.d_log_alpha_txt, "log_alpha_txt");
    probe(&c.log_alpha_img, rec.d_log_alpha_img, "log_alpha_img");
    return report;
}

}  // namespace geomlab
