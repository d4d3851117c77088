#pragma once

#include <optional>
#include <span>
#include <vector>

#include "geomlab/geometry.hpp"
#include "geomlab/vec.hpp"

namespace geomlab {

/// The most-generic reference point: the origin for euclidean/hyperbolic
/// models, the (un-renormalized) mean of all L2-normalized text and image
/// embeddings for clip/elliptic.
struct RootPoint {
    GeometryKind kind = GeometryKind::euclidean;
    bool is_origin = true;
    Vec value;  // empty when is_origin
};

enum class Modality { text, image };

RootPoint compute_root(const GeometryConfig& cfg, std::span<const Vec> text_embs,
                       std::span<const Vec> image_embs);

/// euclidean: |e| / sqrt(n); hyperbolic: geodesic distance of the lifted
/// alpha-scaled embedding from the apex; clip/elliptic: (1 - cos(e, root)) / 2.
double root_distance(const GeometryConfig& cfg, const Vec& emb, const RootPoint& root,
                     Modality modality);

struct HistogramTable {
    Vec bin_lo;
    Vec bin_hi;
    std::vector<long> count_text;
    std::vector<long> count_image;

    std::size_t bins() const { return bin_lo.size(); }
};

/// Uniform bins over [0, max] where max spans both modalities.
HistogramTable distance_histogram(std::span<const double> text_dists,
                                  std::span<const double> image_dists, int bins);

struct ModalityGap {
    double median_text = 0.0;
    double median_image = 0.0;
    double ratio = 0.0;  // median_image / median_text
};

ModalityGap modality_gap(std::span<const double> text_dists,
                         std::span<const double> image_dists);

inline constexpr int kTraversalSteps = 50;

struct TraversalResult {
    std::vector<int> step_caption_ids;  // kTraversalSteps entries, -1 = no caption
    Vec step_t;
    std::vector<int> deduped_ids;  // first-occurrence order, sentinels dropped
    int distinct_count = 0;        // excludes the root caption
};

/// Interpolate from the image embedding (t = 0) to the root (t = 1) in 50
/// equally spaced steps and retrieve the nearest caption at each step.
/// clip/elliptic renormalize every step; hyperbolic interpolates the
/// alpha-scaled pre-lift vector and lifts each step. With k_filter set, only
/// captions whose entailment loss against the step is exactly zero compete.
TraversalResult traverse_image(const GeometryConfig& cfg, const Vec& image_emb,
                               const RootPoint& root, std::span<const Vec> captions,
                               std::span<const int> caption_ids,
                               std::optional<double> k_filter, int root_caption_id = -1);

}  // namespace geomlab
