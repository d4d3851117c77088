#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "geomlab/config.hpp"
#include "geomlab/io.hpp"
#include "geomlab/rng.hpp"

using namespace geomlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "geomlab_io_test";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("run config round-trips losslessly") {
    RunConfig cfg;
    cfg.seed = 12345;
    cfg.kind = GeometryKind::hyperbolic;
    cfg.variant = LogitVariant::d;
    cfg.lambda_entail = 0.2;
    cfg.min_radius_k = 0.1;
    cfg.schedule.max_lr = 5.0e-4;
    cfg.tree.step_sigma = 1.0 / 3.0;  // not exactly representable in decimal

    const std::string text = cfg.to_json_text();
    const RunConfig back = RunConfig::from_json_text(text);
    CHECK(back.to_json_text() == text);
    CHECK(back.tree.step_sigma == cfg.tree.step_sigma);
    CHECK(back.seed == cfg.seed);
    CHECK(back.kind == cfg.kind);

    cfg.ancestor_depth_weights = {0.0, 0.0, 0.0, 0.0, 1.0};
    const RunConfig back2 = RunConfig::from_json_text(cfg.to_json_text());
    CHECK(back2.ancestor_depth_weights == cfg.ancestor_depth_weights);
    CHECK(back2.to_json_text() == cfg.to_json_text());
}

TEST_CASE("unknown config keys are rejected") {
    CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"sead": 1})"),
                         doctest::Contains("unknown key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        RunConfig::from_json_text(R"({"geometry": {"kinds": "clip"}})"),
        doctest::Contains("unknown key"), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"seed": "not-a-number"})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::from_json_text("{"), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"geometry": {"kind": "spherical"}})"),
                    std::invalid_argument);
}

TEST_CASE("geometry config derives the paper regime from the variant") {
    RunConfig d2;
    d2.kind = GeometryKind::euclidean;
    d2.variant = LogitVariant::d2;
    d2.embed_dim = 16;
    GeometryConfig g = d2.geometry_config();
    CHECK(g.beta() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.alpha_txt() == doctest::Approx(0.25).epsilon(1e-15));

    d2.beta_init = std::exp(-1.0);  // the lowered d2 initialization
    g = d2.geometry_config();
    CHECK(g.log_beta == doctest::Approx(-1.0).epsilon(1e-12));

    RunConfig d;
    d.kind = GeometryKind::hyperbolic;
    d.variant = LogitVariant::d;
    d.lambda_entail = 0.2;
    d.min_radius_k = 0.1;
    g = d.geometry_config();
    CHECK(g.beta() == doctest::Approx(1.0 / 0.07).epsilon(1e-15));
    CHECK(g.beta_max == 100.0);
}

TEST_CASE("embedding dump round-trip with the documented header") {
    const fs::path path = temp_dir() / "dump.csv";
    EmbeddingDump dump;
    dump.dim = 3;
    dump.kind = GeometryKind::euclidean;
    dump.ids = {0, 1};
    dump.modalities = {Modality::text, Modality::image};
    dump.embeddings = {{0.1, -2.5, 1.0 / 3.0}, {4.0, 5.5, -0.125}};
    write_embedding_dump(path, dump);

    const std::string text = slurp(path);
    CHECK(text.rfind("n=3,kind=euclidean\n", 0) == 0);

    const EmbeddingDump back = read_embedding_dump(path);
    CHECK(back.dim == 3);
    CHECK(back.kind == GeometryKind::euclidean);
    REQUIRE(back.embeddings.size() == 2);
    CHECK(exact_equal(back.embeddings[0], dump.embeddings[0]));
    CHECK(exact_equal(back.embeddings[1], dump.embeddings[1]));
    CHECK(back.modalities[1] == Modality::image);
}

TEST_CASE("tree table round-trip preserves prototypes exactly") {
    TreeSpec spec;
    spec.depth = 2;
    spec.branching = 3;
    spec.raw_dim = 5;
    spec.seed = 4242;
    const PrototypeTree tree = gen_tree(spec);

    const fs::path path = temp_dir() / "nodes.csv";
    write_tree_csv(path, tree);
    const PrototypeTree back = read_tree_csv(path);
    CHECK(back.spec.depth == spec.depth);
    CHECK(back.spec.branching == spec.branching);
    CHECK(back.spec.seed == spec.seed);
    REQUIRE(back.node_count() == tree.node_count());
    for (int i = 0; i < tree.node_count(); ++i) {
        CHECK(exact_equal(back.prototypes[i], tree.prototypes[i]));
    }
}

TEST_CASE("table writers emit one row per record") {
    const fs::path dir = temp_dir();

    HistogramTable hist;
    hist.bin_lo = {0.0, 0.5};
    hist.bin_hi = {0.5, 1.0};
    hist.count_text = {3, 1};
    hist.count_image = {0, 4};
    write_histogram_csv(dir / "hist.csv", hist);
    const std::string hist_text = slurp(dir / "hist.csv");
    CHECK(hist_text == "bin_lo,bin_hi,count_text,count_image\n0,0.5,3,0\n0.5,1,1,4\n");

    TraversalResult tr;
    tr.step_caption_ids = {7, -1};
    tr.step_t = {0.0, 1.0};
    const std::vector<std::string> labels{"root", "a", "b", "c", "d", "e", "f", "leaf"};
    write_traversal_csv(dir / "trav.csv", tr, labels);
    CHECK(slurp(dir / "trav.csv") ==
          "step,t,caption_id,caption_label\n0,0,7,leaf\n1,1,-1,(none)\n");

    ModalityGap gap{0.25, 0.5, 2.0};
    write_modality_gap_csv(dir / "gap.csv", gap);
    CHECK(slurp(dir / "gap.csv") == "median_text,median_image,ratio\n0.25,0.5,2\n");
}

TEST_CASE("checkpoint save/load/save is byte-identical") {
    TrainBundle bundle;
    bundle.tree.depth = 1;
    bundle.tree.branching = 2;
    bundle.tree.raw_dim = 4;
    bundle.cfg = GeometryConfig::defaults(GeometryKind::hyperbolic, LogitVariant::d2, 4);
    bundle.cfg.lambda_entail = 0.2;
    bundle.embed_dim = 4;
    bundle.hidden_dim = 3;
    bundle.batch_size = 2;
    bundle.schedule = {1e-3, 0, 2};
    bundle.seed = 777;
    const PrototypeTree tree = gen_tree(bundle.tree);
    const TrainResult r = train(bundle, tree);

    const fs::path dir = temp_dir();
    save_checkpoint(dir / "ckpt_a.txt", r.state);
    const TrainState loaded = load_checkpoint(dir / "ckpt_a.txt");
    save_checkpoint(dir / "ckpt_b.txt", loaded);
    CHECK(slurp(dir / "ckpt_a.txt") == slurp(dir / "ckpt_b.txt"));

    CHECK(loaded.step == r.state.step);
    CHECK(loaded.cfg.log_beta == r.state.cfg.log_beta);
    CHECK(loaded.cfg.kind == r.state.cfg.kind);
    CHECK(exact_equal(loaded.text_encoder.w1, r.state.text_encoder.w1));
    CHECK(exact_equal(loaded.image_encoder.proj, r.state.image_encoder.proj));

    // a reloaded encoder reproduces embeddings bit-for-bit
    Rng rng(1);
    const Vec feat = rng.normal_vec(4);
    CHECK(exact_equal(encoder_forward(loaded.text_encoder, feat),
                      encoder_forward(r.state.text_encoder, feat)));
}

TEST_CASE("unsupported checkpoint version is refused") {
    const fs::path path = temp_dir() / "bad.txt";
    std::ofstream(path) << "geomlab-checkpoint-v999\n";
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("unsupported"),
                         std::runtime_error);
}
