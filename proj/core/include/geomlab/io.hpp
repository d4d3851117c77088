#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "geomlab/analysis.hpp"
#include "geomlab/synthdata.hpp"
#include "geomlab/trainer.hpp"

namespace geomlab {

/// Embedding dump: header `n=<dim>,kind=<geometry>`, rows `id,modality,v1,...,vn`.
struct EmbeddingDump {
    int dim = 0;
    GeometryKind kind = GeometryKind::euclidean;
    std::vector<int> ids;
    std::vector<Modality> modalities;
    std::vector<Vec> embeddings;
};

void write_embedding_dump(const std::filesystem::path& path, const EmbeddingDump& dump);
EmbeddingDump read_embedding_dump(const std::filesystem::path& path);

// rows: bin_lo,bin_hi,count_text,count_image
void write_histogram_csv(const std::filesystem::path& path, const HistogramTable& table);

// rows: step,t,caption_id,caption_label
void write_traversal_csv(const std::filesystem::path& path, const TraversalResult& result,
                         std::span<const std::string> labels_by_id);

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);

void write_modality_gap_csv(const std::filesystem::path& path, const ModalityGap& gap);

// node table: id,parent,depth,p1,...,pm (values round-trip through %.17g)
void write_tree_csv(const std::filesystem::path& path, const PrototypeTree& tree);
PrototypeTree read_tree_csv(const std::filesystem::path& path);

// pair manifest: pair,text_node,image_node,ancestor_depth
void write_pair_manifest_csv(const std::filesystem::path& path, const PrototypeTree& tree,
                             const PairBatch& batch);

/// Versioned text checkpoint; doubles stored as hexfloats so a load/save
/// cycle is byte-identical.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

std::string format_double(double v);  // %.17g

}  // namespace geomlab
