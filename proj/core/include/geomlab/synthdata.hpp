#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geomlab/vec.hpp"

namespace geomlab {

/// Hierarchical prototype tree: root at the origin, each child a seeded
/// Gaussian step away from its parent. Stands in for real text-image data.
struct TreeSpec {
    int depth = 4;
    int branching = 3;
    int raw_dim = 64;
    double step_sigma = 1.0;
    double leaf_noise = 0.1;
    std::uint64_t seed = 0;
    std::int64_t max_nodes = 1 << 20;
};

struct PrototypeTree {
    TreeSpec spec;
    std::vector<Vec> prototypes;  // BFS order, node 0 = root

    int node_count() const { return static_cast<int>(prototypes.size()); }
    int parent(int id) const { return id == 0 ? -1 : (id - 1) / spec.branching; }
    int depth_of(int id) const;
    int first_leaf() const;
    int leaf_count() const;
    /// Walk up from node until the requested depth is reached.
    int ancestor_at_depth(int id, int depth) const;
    bool is_ancestor_or_self(int anc, int node) const;
};

struct PairBatch {
    std::vector<Vec> text_features;
    std::vector<Vec> image_features;
    std::vector<int> text_node_ids;
    std::vector<int> image_node_ids;

    std::size_t size() const { return text_features.size(); }
};

PrototypeTree gen_tree(const TreeSpec& spec);

/// Draw B pairs: image from a noisy leaf, text from a noisy ancestor of that
/// leaf at a depth sampled from ancestor_depth_weights (index = depth,
/// length depth + 1). Byte-identical for identical (tree, seed).
PairBatch sample_batch(const PrototypeTree& tree, int batch, std::uint64_t seed,
                       std::span<const double> ancestor_depth_weights);

/// Uniform weights over depths 0..depth.
std::vector<double> uniform_depth_weights(int depth);

}  // namespace geomlab
