#include "geomlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "geomlab/losses.hpp"

namespace geomlab {

RootPoint compute_root(const GeometryConfig& cfg, std::span<const Vec> text_embs,
                       std::span<const Vec> image_embs) {
    RootPoint root;
    root.kind = cfg.kind;
    if (cfg.kind == GeometryKind::euclidean || cfg.kind == GeometryKind::hyperbolic) {
        root.is_origin = true;
        return root;
    }
    if (text_embs.empty() && image_embs.empty()) {
        throw std::invalid_argument("compute_root: empty corpus for " + to_string(cfg.kind));
    }
    root.is_origin = false;
    const std::size_t n = text_embs.empty() ? image_embs[0].size() : text_embs[0].size();
    root.value.assign(n, 0.0);
    std::size_t count = 0;
    const auto accumulate = [&](std::span<const Vec> embs) {
        for (const Vec& e : embs) {
            const double ne = norm(e);
            if (ne == 0.0) {
                throw std::domain_error("compute_root: zero-norm embedding in corpus");
            }
            axpy(1.0 / ne, e, root.value);
            ++count;
        }
    };
    accumulate(text_embs);
    accumulate(image_embs);
    for (double& v : root.value) v /= static_cast<double>(count);
    return root;
}

double root_distance(const GeometryConfig& cfg, const Vec& emb, const RootPoint& root,
                     Modality modality) {
    switch (cfg.kind) {
        case GeometryKind::euclidean:
            return norm(emb) / std::sqrt(static_cast<double>(emb.size()));
        case GeometryKind::hyperbolic: {
            const double alpha =
                modality == Modality::text ? cfg.alpha_txt() : cfg.alpha_img();
            const double c = cfg.curvature();
            const LorentzPoint x = exp_map_origin(scaled(emb, alpha), c);
            LorentzPoint apex;
            apex.space.assign(emb.size(), 0.0);
            apex.time = std::sqrt(1.0 / c);
            apex.curvature = c;
            return -lorentz_sim(x, apex, LogitVariant::d);
        }
        case GeometryKind::clip:
        case GeometryKind::elliptic:
            return (1.0 - cosine_sim(emb, root.value)) / 2.0;
    }
    throw std::logic_error("root_distance: unreachable");
}

HistogramTable distance_histogram(std::span<const double> text_dists,
                                  std::span<const double> image_dists, int bins) {
    if (bins < 1) throw std::invalid_argument("distance_histogram: bins must be >= 1");
    double max_d = 0.0;
    for (double d : text_dists) max_d = std::max(max_d, d);
    for (double d : image_dists) max_d = std::max(max_d, d);

    HistogramTable t;
    t.bin_lo.resize(bins);
    t.bin_hi.resize(bins);
    t.count_text.assign(bins, 0);
    t.count_image.assign(bins, 0);
    const double width = max_d / bins;
    for (int k = 0; k < bins; ++k) {
        t.bin_lo[k] = width * k;
        t.bin_hi[k] = width * (k + 1);
    }
    const auto fill = [&](std::span<const double> dists, std::vector<long>& counts) {
        for (double d : dists) {
            int idx = width > 0.0 ? static_cast<int>(d / width) : 0;
            idx = std::clamp(idx, 0, bins - 1);
            ++counts[idx];
        }
    };
    fill(text_dists, t.count_text);
    fill(image_dists, t.count_image);
    return t;
}

namespace {

double median(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("median: empty input");
    Vec sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    if (n % 2 == 1) return sorted[n / 2];
    return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace

ModalityGap modality_gap(std::span<const double> text_dists,
                         std::span<const double> image_dists) {
    ModalityGap gap;
    gap.median_text = median(text_dists);
    gap.median_image = median(image_dists);
    gap.ratio = gap.median_image / gap.median_text;
    return gap;
}

TraversalResult traverse_image(const GeometryConfig& cfg, const Vec& image_emb,
                               const RootPoint& root, std::span<const Vec> captions,
                               std::span<const int> caption_ids,
                               std::optional<double> k_filter, int root_caption_id) {
    if (captions.size() != caption_ids.size()) {
        throw std::invalid_argument("traverse_image: captions and ids must align");
    }
    if (captions.empty()) throw std::invalid_argument("traverse_image: empty caption corpus");
    if (k_filter &&
        (cfg.kind == GeometryKind::clip || cfg.kind == GeometryKind::elliptic)) {
        throw std::invalid_argument("traverse_image: entailment filtering is undefined for " +
                                    to_string(cfg.kind));
    }

    const bool spherical =
        cfg.kind == GeometryKind::clip || cfg.kind == GeometryKind::elliptic;
    const bool hyperbolic = cfg.kind == GeometryKind::hyperbolic;
    const double c = cfg.curvature();

    // traversal start point per geometry
    Vec start;
    if (spherical) {
        const double ni = norm(image_emb);
        if (ni == 0.0) throw std::domain_error("traverse_image: zero-norm image embedding");
        start = scaled(image_emb, 1.0 / ni);
    } else if (hyperbolic) {
        start = scaled(image_emb, cfg.alpha_img());  // pre-lift scaled vector
    } else {
        start = image_emb;
    }
    Vec root_vec(start.size(), 0.0);
    if (!root.is_origin) root_vec = root.value;

    // captions lifted once for the hyperbolic retrieval/filter
    std::vector<LorentzPoint> lifted;
    if (hyperbolic) {
        lifted.reserve(captions.size());
        for (const Vec& cap : captions) {
            lifted.push_back(exp_map_origin(scaled(cap, cfg.alpha_txt()), c));
        }
    }

    TraversalResult result;
    result.step_caption_ids.reserve(kTraversalSteps);
    result.step_t.reserve(kTraversalSteps);

    for (int k = 0; k < kTraversalSteps; ++k) {
        const double t = static_cast<double>(k) / (kTraversalSteps - 1);
        Vec step(start.size());
        for (std::size_t d = 0; d < start.size(); ++d) {
            step[d] = (1.0 - t) * start[d] + t * root_vec[d];
        }
        if (spherical) {
            const double ns = norm(step);
            if (ns == 0.0) {
                throw std::domain_error("traverse_image: interpolated step collapsed to zero");
            }
            for (double& v : step) v /= ns;
        }
        LorentzPoint step_pt;
        if (hyperbolic) step_pt = exp_map_origin(step, c);

        int best = -1;
        double best_sim = 0.0;
        for (std::size_t ci = 0; ci < captions.size(); ++ci) {
            if (k_filter) {
                // a caption sitting exactly on the step trivially entails it
                const bool coincident =
                    hyperbolic ? exact_equal(lifted[ci].space, step_pt.space) &&
                                     lifted[ci].time == step_pt.time
                               : exact_equal(captions[ci], step);
                if (!coincident) {
                    const double entail =
                        hyperbolic ? entail_loss_hyper(lifted[ci], step_pt, *k_filter)
                                   : entail_loss_euclid(captions[ci], step, *k_filter);
                    if (entail != 0.0) continue;
                }
            }
            double sim;
            if (hyperbolic) {
                sim = lorentz_sim(lifted[ci], step_pt, cfg.variant);
            } else if (spherical) {
                sim = cosine_sim(captions[ci], step);
            } else {
                sim = euclidean_sim(captions[ci], step, cfg.variant);
            }
            const bool wins = best < 0 || sim > best_sim ||
                              (sim == best_sim && caption_ids[ci] < caption_ids[best]);
            if (wins) {
                best = static_cast<int>(ci);
                best_sim = sim;
            }
        }
        result.step_caption_ids.push_back(best < 0 ? -1 : caption_ids[best]);
        result.step_t.push_back(t);
    }

    for (int id : result.step_caption_ids) {
        if (id < 0) continue;
        if (std::find(result.deduped_ids.begin(), result.deduped_ids.end(), id) ==
            result.deduped_ids.end()) {
            result.deduped_ids.push_back(id);
            if (id != root_caption_id) ++result.distinct_count;
        }
    }
    return result;
}

}  // namespace geomlab
