// Acceptance suite: prints one pass/fail line per criterion and exits
// nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "geomlab/analysis.hpp"
#include "geomlab/gradcheck.hpp"
#include "geomlab/gradients.hpp"
#include "geomlab/losses.hpp"
#include "geomlab/rng.hpp"
#include "geomlab/synthdata.hpp"
#include "geomlab/trainer.hpp"

using namespace geomlab;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1. gradient verification over the full combination grid ----
void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const GradcheckSummary summary =
        run_gradcheck(/*configs_per_combo=*/1000, /*batch=*/8, /*n=*/16, /*seed=*/20240817);
    const double elapsed = seconds_since(t0);
    const bool pass = summary.pass() && elapsed <= 60.0;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "10 combos x 1000 configs, max rel err %.3e <= 1e-5, %.1f s <= 60 s",
                  summary.max_rel_err, elapsed);
    report(1, "finite-difference gradient verification", pass, detail);
}

// ---- 2. uniform-logit InfoNCE equals ln B ----
void criterion_infonce_constant() {
    double worst = 0.0;
    for (const std::size_t b : {1u, 2u, 4u, 64u}) {
        LogitMatrix m;
        m.batch = b;
        m.values.assign(b * b, 0.37);
        worst = std::max(worst, std::abs(contrastive_loss(m) - std::log(double(b))));
    }
    char detail[96];
    std::snprintf(detail, sizeof detail, "max |loss - ln B| = %.2e over B in {1,2,4,64}", worst);
    report(2, "uniform-batch InfoNCE equals ln B", worst <= 1e-12, detail);
}

// ---- 3. cosine and arccos logits rank identically ----
void criterion_ordering() {
    Rng rng(333);
    const GeometryConfig clip = GeometryConfig::defaults(GeometryKind::clip, LogitVariant::d, 64);
    const GeometryConfig ell =
        GeometryConfig::defaults(GeometryKind::elliptic, LogitVariant::d, 64);
    int mismatches = 0;
    for (int batch_idx = 0; batch_idx < 100; ++batch_idx) {
        std::vector<Vec> texts, images;
        for (int i = 0; i < 32; ++i) {
            texts.push_back(rng.normal_vec(64));
            images.push_back(rng.normal_vec(64));
        }
        const LogitMatrix mc = logit_matrix(clip, texts, images);
        const LogitMatrix me = logit_matrix(ell, texts, images);
        for (std::size_t row = 0; row < 32; ++row) {
            std::vector<int> oc(32), oe(32);
            std::iota(oc.begin(), oc.end(), 0);
            std::iota(oe.begin(), oe.end(), 0);
            std::sort(oc.begin(), oc.end(),
                      [&](int a, int b) { return mc.at(row, a) > mc.at(row, b); });
            std::sort(oe.begin(), oe.end(),
                      [&](int a, int b) { return me.at(row, a) > me.at(row, b); });
            if (oc != oe) ++mismatches;
        }
    }
    char detail[96];
    std::snprintf(detail, sizeof detail, "%d mismatched rows over 100 batches of 32", mismatches);
    report(3, "cosine/elliptic ordering equivalence", mismatches == 0, detail);
}

// ---- 4. the lift is a radial isometry ----
void criterion_radial_isometry() {
    Rng rng(444);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_index(15));
        const double c = rng.uniform(0.1, 10.0);
        const double target = rng.uniform(0.0, 10.0);
        Vec u = rng.normal_vec(n);
        const double nu = norm(u);
        for (double& v : u) v *= target / nu;

        const LorentzPoint x = exp_map_origin(u, c);
        const LorentzPoint apex = exp_map_origin(Vec(n, 0.0), c);
        const double d = -lorentz_sim(apex, x, LogitVariant::d);
        const double err = target > 0 ? std::abs(d - target) / target : std::abs(d);
        worst = std::max(worst, err);
    }
    char detail[96];
    std::snprintf(detail, sizeof detail, "max relative error %.2e over 1000 (u, c)", worst);
    report(4, "radial isometry of the exponential lift", worst <= 1e-9, detail);
}

// ---- 5. entailment-cone transitivity on constructed chains ----
Vec euclid_cone_point(const Vec& from, double k, Rng& rng) {
    const double aper = half_aperture_euclid(from, k);
    const double psi = rng.uniform(0.0, 0.9 * aper);
    Vec perp = rng.normal_vec(from.size());
    const double proj = dot(perp, from) / norm_sq(from);
    axpy(-proj, from, perp);
    const double np = norm(perp);
    Vec dir = scaled(from, std::cos(psi) / norm(from));
    if (np > 0.0) axpy(std::sin(psi) / np, perp, dir);
    Vec out = from;
    axpy(rng.uniform(0.1, 2.0), dir, out);
    return out;
}

void criterion_transitivity() {
    const int chains = 10000;
    double worst_euclid = 0.0;
    {
        Rng rng(555);
        const double k = 0.3;
        for (int trial = 0; trial < chains; ++trial) {
            Vec x = rng.normal_vec(4);
            const double nx = norm(x);
            const double target = rng.uniform(1.05 * k, 4.0);
            for (double& v : x) v *= target / nx;
            const Vec y = euclid_cone_point(x, k, rng);
            const Vec z = euclid_cone_point(y, k, rng);
            if (entail_loss_euclid(x, y, k) != 0.0 || entail_loss_euclid(y, z, k) != 0.0) {
                worst_euclid = 1.0;  // construction itself failed
                break;
            }
            worst_euclid = std::max(worst_euclid, entail_loss_euclid(x, z, k));
        }
    }

    double worst_hyper = 0.0;
    {
        const double k = 0.1;
        // min radius: |x_space| >= 2K/sqrt(c) means sinh(a) >= 2K
        const double min_a = std::asinh(2.0 * k);
        for (const double c : {0.1, 1.0, 10.0}) {
            Rng rng(556);
            const double sqrt_c = std::sqrt(c);
            int built = 0;
            while (built < chains) {
                const double a = rng.uniform(1.05 * min_a, 1.5);
                Vec u = rng.normal_vec(4);
                const double nu = norm(u);
                for (double& v : u) v *= (a / sqrt_c) / nu;
                const LorentzPoint x = exp_map_origin(u, c);

                const auto extend = [&](const Vec& base,
                                        const LorentzPoint& anchor) -> std::pair<Vec, bool> {
                    for (int tries = 0; tries < 200; ++tries) {
                        Vec w = base;
                        const double stretch = rng.uniform(1.2, 2.5);
                        for (double& v : w) v *= stretch;
                        Vec jitter = rng.normal_vec(4);
                        axpy(0.03 * norm(base), jitter, w);
                        const LorentzPoint lifted = exp_map_origin(w, c);
                        if (std::sinh(sqrt_c * norm(w)) < 2.0 * k * 1.05) continue;
                        if (entail_loss_hyper(anchor, lifted, k) == 0.0) return {w, true};
                    }
                    return {base, false};
                };
                const auto [yv, ok_y] = extend(u, x);
                if (!ok_y) continue;
                const LorentzPoint y = exp_map_origin(yv, c);
                const auto [zv, ok_z] = extend(yv, y);
                if (!ok_z) continue;
                const LorentzPoint z = exp_map_origin(zv, c);
                worst_hyper = std::max(worst_hyper, entail_loss_hyper(x, z, k));
                ++built;
            }
        }
    }

    char detail[128];
    std::snprintf(detail, sizeof detail,
                  "worst entail(x,z): euclid %.2e, hyperbolic %.2e over 10^4 chains each",
                  worst_euclid, worst_hyper);
    report(5, "entailment cone transitivity", worst_euclid <= 1e-9 && worst_hyper <= 1e-9,
           detail);
}

// ---- 6. entailment loss opens the modality gap; lambda = 0 does not ----
// Pairs are drawn with the ancestor distribution concentrated on the leaf
// depth, so text and image features share identical marginals and only the
// loss can separate the modalities; a hierarchical text marginal would build
// a data-driven gap into both twins.
struct GapRun {
    double ratio = 0.0;
    double recall = 0.0;
};

GapRun trained_gap_ratio(double lambda, std::uint64_t seed) {
    TrainBundle bundle;
    bundle.tree.depth = 4;
    bundle.tree.branching = 3;
    bundle.tree.raw_dim = 64;
    bundle.tree.step_sigma = 1.0;
    bundle.tree.leaf_noise = 0.1;
    bundle.tree.seed = seed;
    bundle.cfg = GeometryConfig::defaults(GeometryKind::euclidean, LogitVariant::d2, 32);
    bundle.cfg.lambda_entail = lambda;
    bundle.schedule = {5e-4, 500, 2000};
    bundle.batch_size = 64;
    bundle.embed_dim = 32;
    bundle.hidden_dim = 64;
    bundle.seed = seed;
    bundle.log_every = 500;
    bundle.ancestor_depth_weights.assign(bundle.tree.depth + 1, 0.0);
    bundle.ancestor_depth_weights.back() = 1.0;

    const PrototypeTree tree = gen_tree(bundle.tree);
    const TrainResult result = train(bundle, tree);

    const PairBatch eval = sample_batch(tree, 1024, mix_seed(seed, 0xE7A1ULL),
                                        bundle.ancestor_depth_weights);
    std::vector<double> text_d, image_d;
    const RootPoint root = compute_root(result.state.cfg, {}, {});
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const Vec te = encoder_forward(result.state.text_encoder, eval.text_features[i]);
        const Vec ie = encoder_forward(result.state.image_encoder, eval.image_features[i]);
        text_d.push_back(root_distance(result.state.cfg, te, root, Modality::text));
        image_d.push_back(root_distance(result.state.cfg, ie, root, Modality::image));
    }
    return {modality_gap(text_d, image_d).ratio, result.log.back().recall_at_1};
}

void criterion_modality_gap() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = 20240817;
    const GapRun with_entail = trained_gap_ratio(0.2, seed);
    const GapRun without = trained_gap_ratio(0.0, seed);
    const double elapsed = seconds_since(t0);
    const bool pass = with_entail.ratio >= 1.2 && without.ratio >= 0.9 &&
                      without.ratio <= 1.1 && with_entail.recall >= 0.5 &&
                      without.recall >= 0.5 && elapsed <= 600.0;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "ratio lambda=0.2: %.3f (>= 1.2), lambda=0: %.3f (in [0.9, 1.1]), "
                  "recall@1 %.2f/%.2f (>= 0.5), %.0f s",
                  with_entail.ratio, without.ratio, with_entail.recall, without.recall, elapsed);
    report(6, "modality gap emerges only with entailment loss", pass, detail);
}

// ---- 7. final standardization invariant ----
void criterion_final_norm() {
    const int n = 32;
    Rng rng(777);
    double worst_mean = 0.0, worst_norm = 0.0;
    const EncoderParams enc = init_encoder(64, 64, n, true, 4242);
    for (int trial = 0; trial < 10000; ++trial) {
        const Vec feat = rng.normal_vec(64);
        const EncoderActivations act = encoder_forward_detail(enc, feat);
        double mean = 0.0;
        for (double v : act.standardized) mean += v;
        mean /= n;
        worst_mean = std::max(worst_mean, std::abs(mean));
        worst_norm = std::max(worst_norm, std::abs(norm(act.standardized) - std::sqrt(n)));
    }
    const bool pass = worst_mean <= 1e-9 && worst_norm <= 1e-6 * std::sqrt(n);
    char detail[128];
    std::snprintf(detail, sizeof detail, "10^4 forwards: max |mean| %.1e, max |norm - sqrt(n)| %.1e",
                  worst_mean, worst_norm);
    report(7, "final standardization pins mean 0 / norm sqrt(n)", pass, detail);
}

// ---- 8. singularity contract at coincident positive pairs ----
void criterion_singularities() {
    const Vec p{0.4, -0.2, 0.8};
    const std::vector<Vec> batch{p};
    bool euclid_throws = false, hyper_throws = false;
    try {
        (void)grad_total_loss(GeometryConfig::defaults(GeometryKind::euclidean, LogitVariant::d, 3),
                              batch, batch);
    } catch (const GradSingularError&) {
        euclid_throws = true;
    }
    try {
        (void)grad_total_loss(
            GeometryConfig::defaults(GeometryKind::hyperbolic, LogitVariant::d, 3), batch, batch);
    } catch (const GradSingularError&) {
        hyper_throws = true;
    }

    const SimilarityGrad ge = similarity_grad(
        GeometryConfig::defaults(GeometryKind::euclidean, LogitVariant::d2, 3), p, p);
    const SimilarityGrad gh = similarity_grad(
        GeometryConfig::defaults(GeometryKind::hyperbolic, LogitVariant::d2, 3), p, p);
    bool d2_zero = true;
    for (double v : ge.d_text) d2_zero &= v == 0.0;
    for (double v : ge.d_image) d2_zero &= v == 0.0;
    for (double v : gh.d_text) d2_zero &= v == 0.0;
    for (double v : gh.d_image) d2_zero &= v == 0.0;
    d2_zero &= gh.d_log_c == 0.0 && gh.d_log_alpha_txt == 0.0 && gh.d_log_alpha_img == 0.0;

    const bool pass = euclid_throws && hyper_throws && d2_zero;
    char detail[128];
    std::snprintf(detail, sizeof detail, "d raises (euclid %d, hyper %d), d2 gradient exactly zero: %d",
                  euclid_throws, hyper_throws, d2_zero);
    report(8, "d-logit singularity raises, d2 gradient vanishes", pass, detail);
}

// ---- 9. traversal endpoints and filtering monotonicity ----
void criterion_traversal() {
    const GeometryConfig cfg = GeometryConfig::defaults(GeometryKind::euclidean, LogitVariant::d2, 2);
    const Vec image{4.0, 0.0};
    const std::vector<Vec> captions{{4.0, 0.0}, {2.0, 0.0}, {0.5, 0.0}, {0.0, 3.0}};
    const std::vector<int> ids{0, 1, 2, 3};
    const RootPoint root = compute_root(cfg, {}, {});

    const TraversalResult plain = traverse_image(cfg, image, root, captions, ids, std::nullopt);
    const bool endpoints_ok =
        plain.step_caption_ids.front() == 0 && plain.step_caption_ids.back() == 2;

    bool subset_ok = true;
    const std::set<int> unfiltered(plain.deduped_ids.begin(), plain.deduped_ids.end());
    for (const double k : {0.3, 0.8, 2.0}) {
        const TraversalResult filtered = traverse_image(cfg, image, root, captions, ids, k);
        for (int id : filtered.deduped_ids) {
            if (!unfiltered.contains(id)) subset_ok = false;
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof detail,
                  "step 0 -> image caption: %d, step 49 -> root caption: %d, filtered subset: %d",
                  plain.step_caption_ids.front() == 0, plain.step_caption_ids.back() == 2,
                  subset_ok);
    report(9, "traversal endpoints and filtering monotonicity", endpoints_ok && subset_ok,
           detail);
}

// ---- 10. scalar clamp discipline under a stress learning rate ----
void criterion_clamp_discipline() {
    TrainBundle bundle;
    bundle.tree.depth = 3;
    bundle.tree.branching = 3;
    bundle.tree.raw_dim = 32;
    bundle.tree.seed = 99;
    bundle.cfg = GeometryConfig::defaults(GeometryKind::hyperbolic, LogitVariant::d, 16);
    bundle.cfg.lambda_entail = 0.2;
    bundle.schedule = {1e-1, 10, 200};
    bundle.batch_size = 16;
    bundle.embed_dim = 16;
    bundle.hidden_dim = 32;
    bundle.seed = 98;
    bundle.log_every = 1;

    const PrototypeTree tree = gen_tree(bundle.tree);
    bool finished = false;
    double max_beta = 0.0, min_c = 1.0, max_c = 1.0;
    std::string note;
    try {
        const TrainResult r = train(bundle, tree);
        finished = r.log.size() == 200;
        for (const MetricsRow& row : r.log) {
            max_beta = std::max(max_beta, row.beta);
            min_c = std::min(min_c, row.curvature);
            max_c = std::max(max_c, row.curvature);
        }
    } catch (const std::exception& e) {
        note = e.what();
    }
    const bool pass = finished && max_beta <= 100.0 && min_c >= 0.1 && max_c <= 10.0;
    char detail[160];
    if (finished) {
        std::snprintf(detail, sizeof detail,
                      "200 steps at lr 1e-1: max beta %.2f <= 100, c in [%.3f, %.3f]", max_beta,
                      min_c, max_c);
    } else {
        std::snprintf(detail, sizeof detail, "run aborted: %s", note.c_str());
    }
    report(10, "scalar clamps hold under stress training", pass, detail);
}

}  // namespace

int main() {
    criterion_gradients();
    criterion_infonce_constant();
    criterion_ordering();
    criterion_radial_isometry();
    criterion_transitivity();
    criterion_modality_gap();
    criterion_final_norm();
    criterion_singularities();
    criterion_traversal();
    criterion_clamp_discipline();
    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all 10 criteria passed\n");
    return 0;
}
