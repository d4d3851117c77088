#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "geomlab/geometry.hpp"
#include "geomlab/synthdata.hpp"
#include "geomlab/trainer.hpp"

namespace geomlab {

/// One reproducible experiment: geometry regime, data spec, model shape,
/// schedule, and seeds. Serializes losslessly; unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir;

    GeometryKind kind = GeometryKind::euclidean;
    LogitVariant variant = LogitVariant::d2;
    double min_radius_k = 0.3;
    double lambda_entail = 0.1;
    std::optional<double> beta_init;  // default depends on the variant
    std::optional<double> beta_max;
    double c_init = 1.0;
    double c_min = 0.1;
    double c_max = 10.0;

    TreeSpec tree;
    // sampling weight per ancestor depth 0..tree.depth; empty = uniform
    std::vector<double> ancestor_depth_weights;

    int embed_dim = 32;
    int hidden_dim = 64;
    bool final_norm = false;

    ScheduleSpec schedule;
    int batch_size = 64;
    OptimizerSpec optimizer;
    int log_every = 50;

    int histogram_bins = 30;
    int eval_pairs = 512;
    int traverse_images = 4;

    int gradcheck_configs = 50;
    int gradcheck_batch = 8;
    int gradcheck_dim = 16;

    /// Scalars initialized per the variant regime, with config overrides.
    GeometryConfig geometry_config() const;
    TrainBundle train_bundle() const;

    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
    std::string to_json_text() const;
    void save(const std::filesystem::path& path) const;
};

}  // namespace geomlab
