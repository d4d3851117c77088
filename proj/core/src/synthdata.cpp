#include "geomlab/synthdata.hpp"

#include <stdexcept>
#include <string>

#include "geomlab/rng.hpp"

namespace geomlab {

int PrototypeTree::depth_of(int id) const {
    int d = 0;
    while (id != 0) {
        id = parent(id);
        ++d;
    }
    return d;
}

int PrototypeTree::first_leaf() const {
    // nodes above the last level: (b^depth - 1) / (b - 1)
    int count = 0;
    int level = 1;
    for (int d = 0; d < spec.depth; ++d) {
        count += level;
        level *= spec.branching;
    }
    return count;
}

int PrototypeTree::leaf_count() const { return node_count() - first_leaf(); }

int PrototypeTree::ancestor_at_depth(int id, int depth) const {
    int d = depth_of(id);
    if (depth > d) {
        throw std::invalid_argument("ancestor_at_depth: requested depth below the node");
    }
    while (d > depth) {
        id = parent(id);
        --d;
    }
    return id;
}

bool PrototypeTree::is_ancestor_or_self(int anc, int node) const {
    while (node >= 0) {
        if (node == anc) return true;
        node = parent(node);
    }
    return false;
}

PrototypeTree gen_tree(const TreeSpec& spec) {
    if (spec.depth < 1) throw std::invalid_argument("gen_tree: depth must be >= 1");
    if (spec.branching < 2) throw std::invalid_argument("gen_tree: branching must be >= 2");
    if (spec.raw_dim < 1) throw std::invalid_argument("gen_tree: raw_dim must be >= 1");
    if (spec.step_sigma < 0.0 || spec.leaf_noise < 0.0) {
        throw std::invalid_argument("gen_tree: noise scales must be >= 0");
    }

    std::int64_t nodes = 1;
    std::int64_t level = 1;
    for (int d = 0; d < spec.depth; ++d) {
        level *= spec.branching;
        nodes += level;
        if (nodes > spec.max_nodes) {
            throw std::invalid_argument("gen_tree: node count exceeds cap of " +
                                        std::to_string(spec.max_nodes));
        }
    }

    PrototypeTree tree;
    tree.spec = spec;
    tree.prototypes.resize(static_cast<std::size_t>(nodes));
    tree.prototypes[0].assign(spec.raw_dim, 0.0);

    Rng rng(mix_seed(spec.seed, 0x7265657467656eULL));
    for (std::int64_t id = 1; id < nodes; ++id) {
        const Vec& parent = tree.prototypes[(id - 1) / spec.branching];
        Vec proto(spec.raw_dim);
        for (int k = 0; k < spec.raw_dim; ++k) {
            proto[k] = parent[k] + spec.step_sigma * rng.normal();
        }
        tree.prototypes[id] = std::move(proto);
    }
    return tree;
}

std::vector<double> uniform_depth_weights(int depth) {
    return std::vector<double>(static_cast<std::size_t>(depth) + 1, 1.0);
}

PairBatch sample_batch(const PrototypeTree& tree, int batch, std::uint64_t seed,
                       std::span<const double> ancestor_depth_weights) {
    if (batch < 1) throw std::invalid_argument("sample_batch: batch must be >= 1");
    const int depth = tree.spec.depth;
    if (ancestor_depth_weights.size() != static_cast<std::size_t>(depth) + 1) {
        throw std::invalid_argument("sample_batch: depth weights must have depth + 1 entries");
    }
    double weight_sum = 0.0;
    for (double w : ancestor_depth_weights) {
        if (w < 0.0) throw std::invalid_argument("sample_batch: negative depth weight");
        weight_sum += w;
    }
    if (weight_sum <= 0.0) {
        throw std::invalid_argument("sample_batch: depth weights must not all be zero");
    }

    Rng rng(mix_seed(seed, 0x626174636865ULL));
    const int first_leaf = tree.first_leaf();
    const int leaves = tree.leaf_count();
    const double noise = tree.spec.leaf_noise;

    PairBatch out;
    out.text_features.reserve(batch);
    out.image_features.reserve(batch);
    out.text_node_ids.reserve(batch);
    out.image_node_ids.reserve(batch);

    for (int i = 0; i < batch; ++i) {
        const int leaf = first_leaf + static_cast<int>(rng.uniform_index(leaves));

        const double u = rng.uniform() * weight_sum;
        int text_depth = depth;
        double acc = 0.0;
        for (int d = 0; d <= depth; ++d) {
            acc += ancestor_depth_weights[d];
            if (u < acc) {
                text_depth = d;
                break;
            }
        }
        const int text_node = tree.ancestor_at_depth(leaf, text_depth);

        Vec image = tree.prototypes[leaf];
        Vec text = tree.prototypes[text_node];
        for (double& v : image) v += noise * rng.normal();
        for (double& v : text) v += noise * rng.normal();

        out.image_features.push_back(std::move(image));
        out.text_features.push_back(std::move(text));
        out.image_node_ids.push_back(leaf);
        out.text_node_ids.push_back(text_node);
    }
    return out;
}

}  // namespace geomlab
