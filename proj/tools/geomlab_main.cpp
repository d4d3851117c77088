// geomlab: generate synthetic hierarchies, train toy dual encoders under four
// contrastive geometries, verify gradients, and analyze the embedding space.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "geomlab/analysis.hpp"
#include "geomlab/config.hpp"
#include "geomlab/gradcheck.hpp"
#include "geomlab/io.hpp"
#include "geomlab/losses.hpp"
#include "geomlab/rng.hpp"
#include "geomlab/synthdata.hpp"
#include "geomlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace geomlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory (overrides config out_dir)");
    cmd->add_option("--seed", args.seed, "seed override");
}

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = RunConfig::load(args.config_path);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.seed) {
        cfg.seed = *args.seed;
        cfg.tree.seed = *args.seed;
    }
    if (cfg.out_dir.empty()) {
        throw std::invalid_argument("no output directory: set out_dir in the config or pass --out");
    }
    return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    cfg.save(dir / "config.json");  // echo the exact configuration used
    return dir;
}

void require_artifact(const fs::path& path, const std::string& producer) {
    if (!fs::exists(path)) {
        throw std::invalid_argument("missing " + path.string() + "; run `geomlab " + producer +
                                    "` with this config first");
    }
}

std::vector<double> depth_weights(const RunConfig& cfg, const PrototypeTree& tree) {
    return cfg.ancestor_depth_weights.empty() ? uniform_depth_weights(tree.spec.depth)
                                              : cfg.ancestor_depth_weights;
}

std::vector<std::string> node_labels(const PrototypeTree& tree) {
    std::vector<std::string> labels(tree.node_count());
    labels[0] = "root";
    for (int id = 1; id < tree.node_count(); ++id) {
        const int child_idx = (id - 1) % tree.spec.branching;
        labels[id] = labels[tree.parent(id)] + "." + std::to_string(child_idx);
    }
    return labels;
}

struct EvalCorpus {
    PairBatch batch;
    std::vector<Vec> text_embs;
    std::vector<Vec> image_embs;
};

EvalCorpus eval_corpus(const RunConfig& cfg, const PrototypeTree& tree, const TrainState& state) {
    EvalCorpus corpus;
    corpus.batch = sample_batch(tree, cfg.eval_pairs, mix_seed(cfg.seed, 0xE7A1ULL),
                                depth_weights(cfg, tree));
    corpus.text_embs.reserve(cfg.eval_pairs);
    corpus.image_embs.reserve(cfg.eval_pairs);
    for (int i = 0; i < cfg.eval_pairs; ++i) {
        corpus.text_embs.push_back(encoder_forward(state.text_encoder,
                                                   corpus.batch.text_features[i]));
        corpus.image_embs.push_back(encoder_forward(state.image_encoder,
                                                    corpus.batch.image_features[i]));
    }
    return corpus;
}

int cmd_gen_data(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const fs::path dir = prepare_out_dir(cfg);
    const PrototypeTree tree = gen_tree(cfg.tree);
    write_tree_csv(dir / "nodes.csv", tree);
    const PairBatch manifest = sample_batch(tree, cfg.batch_size,
                                            mix_seed(cfg.seed, 0x3A2FULL),
                                            depth_weights(cfg, tree));
    write_pair_manifest_csv(dir / "pairs.csv", tree, manifest);
    std::cout << "wrote " << tree.node_count() << " nodes and a " << manifest.size()
              << "-pair manifest to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_train(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const fs::path dir = prepare_out_dir(cfg);
    require_artifact(dir / "nodes.csv", "gen-data");
    const PrototypeTree tree = read_tree_csv(dir / "nodes.csv");

    const TrainResult result = train(cfg.train_bundle(), tree);
    save_checkpoint(dir / "checkpoint.txt", result.state);
    write_metrics_csv(dir / "metrics.csv", result.log);
    const MetricsRow& last = result.log.empty() ? MetricsRow{} : result.log.back();
    std::cout << "trained " << result.state.step << " steps; final loss "
              << format_double(last.total) << ", recall@1 " << format_double(last.recall_at_1)
              << ", resampled " << result.resampled_batches << " batches\n";
    return kExitOk;
}

int cmd_analyze(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const fs::path dir = prepare_out_dir(cfg);
    require_artifact(dir / "nodes.csv", "gen-data");
    require_artifact(dir / "checkpoint.txt", "train");
    const PrototypeTree tree = read_tree_csv(dir / "nodes.csv");
    const TrainState state = load_checkpoint(dir / "checkpoint.txt");

    const EvalCorpus corpus = eval_corpus(cfg, tree, state);

    EmbeddingDump dump;
    dump.dim = state.text_encoder.out_dim;
    dump.kind = state.cfg.kind;
    for (int i = 0; i < cfg.eval_pairs; ++i) {
        dump.ids.push_back(corpus.batch.text_node_ids[i]);
        dump.modalities.push_back(Modality::text);
        dump.embeddings.push_back(corpus.text_embs[i]);
    }
    for (int i = 0; i < cfg.eval_pairs; ++i) {
        dump.ids.push_back(corpus.batch.image_node_ids[i]);
        dump.modalities.push_back(Modality::image);
        dump.embeddings.push_back(corpus.image_embs[i]);
    }
    write_embedding_dump(dir / "embeddings.csv", dump);

    const RootPoint root = compute_root(state.cfg, corpus.text_embs, corpus.image_embs);
    std::vector<double> text_d, image_d;
    for (const Vec& e : corpus.text_embs) {
        text_d.push_back(root_distance(state.cfg, e, root, Modality::text));
    }
    for (const Vec& e : corpus.image_embs) {
        image_d.push_back(root_distance(state.cfg, e, root, Modality::image));
    }
    write_histogram_csv(dir / "histogram.csv",
                        distance_histogram(text_d, image_d, cfg.histogram_bins));
    const ModalityGap gap = modality_gap(text_d, image_d);
    write_modality_gap_csv(dir / "modality_gap.csv", gap);
    std::cout << "modality gap: median_text " << format_double(gap.median_text)
              << ", median_image " << format_double(gap.median_image) << ", ratio "
              << format_double(gap.ratio) << "\n";
    return kExitOk;
}

int cmd_traverse(const CommonArgs& args, const std::optional<double>& filter_k) {
    const RunConfig cfg = load_config(args);
    const fs::path dir = prepare_out_dir(cfg);
    require_artifact(dir / "nodes.csv", "gen-data");
    require_artifact(dir / "checkpoint.txt", "train");
    const PrototypeTree tree = read_tree_csv(dir / "nodes.csv");
    const TrainState state = load_checkpoint(dir / "checkpoint.txt");

    // caption corpus: every tree concept, embedded as text
    std::vector<Vec> captions;
    std::vector<int> caption_ids;
    for (int id = 0; id < tree.node_count(); ++id) {
        captions.push_back(encoder_forward(state.text_encoder, tree.prototypes[id]));
        caption_ids.push_back(id);
    }
    const std::vector<std::string> labels = node_labels(tree);

    const EvalCorpus corpus = eval_corpus(cfg, tree, state);
    const RootPoint root = compute_root(state.cfg, corpus.text_embs, corpus.image_embs);

    Rng noise(mix_seed(cfg.seed, 0x7247ULL));
    for (int j = 0; j < cfg.traverse_images; ++j) {
        const int leaf =
            tree.first_leaf() + static_cast<int>((static_cast<long>(j) * tree.leaf_count()) /
                                                 std::max(1, cfg.traverse_images));
        Vec feat = tree.prototypes[leaf];
        for (double& v : feat) v += tree.spec.leaf_noise * noise.normal();
        const Vec image_emb = encoder_forward(state.image_encoder, feat);

        const TraversalResult result = traverse_image(state.cfg, image_emb, root, captions,
                                                      caption_ids, filter_k, /*root id*/ 0);
        const fs::path out = dir / ("traversal_" + std::to_string(leaf) + ".csv");
        write_traversal_csv(out, result, labels);
        std::cout << "image leaf " << leaf << " (" << labels[leaf] << "): " << result.distinct_count
                  << " distinct captions -> " << out.string() << "\n";
    }
    return kExitOk;
}

int cmd_gradcheck(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const fs::path dir = prepare_out_dir(cfg);
    const GradcheckSummary summary = run_gradcheck(cfg.gradcheck_configs, cfg.gradcheck_batch,
                                                   cfg.gradcheck_dim, cfg.seed);
    {
        std::ofstream out(dir / "gradcheck.csv");
        out << "geometry,variant,lambda,configs,max_rel_err,worst_param,pass\n";
        for (const GradcheckRow& row : summary.rows) {
            out << to_string(row.combo.kind) << ',' << to_string(row.combo.variant) << ','
                << format_double(row.combo.lambda) << ',' << row.configs << ','
                << format_double(row.max_rel_err) << ',' << row.worst_param << ','
                << (row.max_rel_err <= summary.tolerance ? 1 : 0) << "\n";
        }
    }
    for (const GradcheckRow& row : summary.rows) {
        std::printf("%-10s %-3s lambda=%.1f  max_rel_err=%.3e  (%s)\n",
                    to_string(row.combo.kind).c_str(), to_string(row.combo.variant).c_str(),
                    row.combo.lambda, row.max_rel_err,
                    row.max_rel_err <= summary.tolerance ? "ok" : "FAIL");
    }
    if (!summary.pass()) {
        std::cerr << "gradcheck FAILED: max relative error " << format_double(summary.max_rel_err)
                  << " exceeds " << format_double(summary.tolerance) << "\n";
        return kExitVerificationFailure;
    }
    std::cout << "gradcheck passed: max relative error " << format_double(summary.max_rel_err)
              << " over " << summary.rows.size() << " combinations\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contrastive embedding geometry lab"};
    app.require_subcommand(1);

    CommonArgs gradcheck_args, gen_args, train_args, analyze_args, traverse_args;
    std::optional<double> filter_k;

    add_common(app.add_subcommand("gradcheck", "verify analytic gradients against the oracle"),
               gradcheck_args);
    add_common(app.add_subcommand("gen-data", "generate the prototype tree and pair manifest"),
               gen_args);
    add_common(app.add_subcommand("train", "train the dual encoders"), train_args);
    add_common(app.add_subcommand("analyze", "root-distance histograms and modality gap"),
               analyze_args);
    CLI::App* traverse =
        app.add_subcommand("traverse", "image-to-root caption traversals");
    add_common(traverse, traverse_args);
    traverse->add_option("--filter-k", filter_k,
                         "entailment filter minimum radius (euclidean/hyperbolic only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck(gradcheck_args);
        if (app.got_subcommand("gen-data")) return cmd_gen_data(gen_args);
        if (app.got_subcommand("train")) return cmd_train(train_args);
        if (app.got_subcommand("analyze")) return cmd_analyze(analyze_args);
        if (app.got_subcommand("traverse")) return cmd_traverse(traverse_args, filter_k);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitConfigError;
}
