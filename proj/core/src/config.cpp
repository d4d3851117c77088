#include "geomlab/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace geomlab {

namespace {

using nlohmann::json;

// strict section reader: every key must be consumed
class Section {
  public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) {
            throw std::invalid_argument("config: section '" + name_ + "' must be an object");
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (auto it = j_.find(key); it != j_.end()) {
            try {
                out = it->get<T>();
            } catch (const json::exception&) {
                throw std::invalid_argument("config: bad value for '" + name_ + "." + key + "'");
            }
        }
    }

    template <typename T>
    void get(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        if (auto it = j_.find(key); it != j_.end()) {
            T v;
            try {
                v = it->get<T>();
            } catch (const json::exception&) {
                throw std::invalid_argument("config: bad value for '" + name_ + "." + key + "'");
            }
            out = v;
        }
    }

    const json* subsection(const char* key) {
        seen_.insert(key);
        if (auto it = j_.find(key); it != j_.end()) return &*it;
        return nullptr;
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.contains(key)) {
                throw std::invalid_argument("config: unknown key '" + name_ + "." + key + "'");
            }
        }
    }

  private:
    const json& j_;
    std::string name_;
    std::set<std::string, std::less<>> seen_;
};

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: parse error: ") + e.what());
    }

    RunConfig cfg;
    Section top(j, "");
    top.get("seed", cfg.seed);
    top.get("out_dir", cfg.out_dir);

    if (const json* g = top.subsection("geometry")) {
        Section s(*g, "geometry");
        std::string kind = to_string(cfg.kind), variant = to_string(cfg.variant);
        s.get("kind", kind);
        s.get("variant", variant);
        cfg.kind = geometry_kind_from_string(kind);
        cfg.variant = logit_variant_from_string(variant);
        s.get("min_radius_k", cfg.min_radius_k);
        s.get("lambda", cfg.lambda_entail);
        s.get("beta_init", cfg.beta_init);
        s.get("beta_max", cfg.beta_max);
        s.get("c_init", cfg.c_init);
        s.get("c_min", cfg.c_min);
        s.get("c_max", cfg.c_max);
        s.finish();
    }
    if (const json* t = top.subsection("tree")) {
        Section s(*t, "tree");
        s.get("depth", cfg.tree.depth);
        s.get("branching", cfg.tree.branching);
        s.get("raw_dim", cfg.tree.raw_dim);
        s.get("step_sigma", cfg.tree.step_sigma);
        s.get("leaf_noise", cfg.tree.leaf_noise);
        s.get("max_nodes", cfg.tree.max_nodes);
        s.get("ancestor_depth_weights", cfg.ancestor_depth_weights);
        s.finish();
    }
    if (const json* m = top.subsection("model")) {
        Section s(*m, "model");
        s.get("embed_dim", cfg.embed_dim);
        s.get("hidden_dim", cfg.hidden_dim);
        s.get("final_norm", cfg.final_norm);
        s.finish();
    }
    if (const json* sc = top.subsection("schedule")) {
        Section s(*sc, "schedule");
        s.get("max_lr", cfg.schedule.max_lr);
        s.get("warmup_steps", cfg.schedule.warmup_steps);
        s.get("total_steps", cfg.schedule.total_steps);
        s.finish();
    }
    if (const json* t = top.subsection("train")) {
        Section s(*t, "train");
        s.get("batch_size", cfg.batch_size);
        s.get("weight_decay", cfg.optimizer.weight_decay);
        s.get("adam_beta1", cfg.optimizer.beta1);
        s.get("adam_beta2", cfg.optimizer.beta2);
        s.get("adam_eps", cfg.optimizer.eps);
        s.get("log_every", cfg.log_every);
        s.finish();
    }
    if (const json* a = top.subsection("analysis")) {
        Section s(*a, "analysis");
        s.get("histogram_bins", cfg.histogram_bins);
        s.get("eval_pairs", cfg.eval_pairs);
        s.get("traverse_images", cfg.traverse_images);
        s.finish();
    }
    if (const json* g = top.subsection("gradcheck")) {
        Section s(*g, "gradcheck");
        s.get("configs", cfg.gradcheck_configs);
        s.get("batch", cfg.gradcheck_batch);
        s.get("dim", cfg.gradcheck_dim);
        s.finish();
    }
    top.finish();

    cfg.tree.seed = cfg.seed;
    cfg.geometry_config().validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("config: cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string RunConfig::to_json_text() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    json& g = j["geometry"];
    g["kind"] = to_string(kind);
    g["variant"] = to_string(variant);
    g["min_radius_k"] = min_radius_k;
    g["lambda"] = lambda_entail;
    if (beta_init) g["beta_init"] = *beta_init;
    if (beta_max) g["beta_max"] = *beta_max;
    g["c_init"] = c_init;
    g["c_min"] = c_min;
    g["c_max"] = c_max;
    json& t = j["tree"];
    t["depth"] = tree.depth;
    t["branching"] = tree.branching;
    t["raw_dim"] = tree.raw_dim;
    t["step_sigma"] = tree.step_sigma;
    t["leaf_noise"] = tree.leaf_noise;
    t["max_nodes"] = tree.max_nodes;
    if (!ancestor_depth_weights.empty()) {
        t["ancestor_depth_weights"] = ancestor_depth_weights;
    }
    json& m = j["model"];
    m["embed_dim"] = embed_dim;
    m["hidden_dim"] = hidden_dim;
    m["final_norm"] = final_norm;
    json& sc = j["schedule"];
    sc["max_lr"] = schedule.max_lr;
    sc["warmup_steps"] = schedule.warmup_steps;
    sc["total_steps"] = schedule.total_steps;
    json& tr = j["train"];
    tr["batch_size"] = batch_size;
    tr["weight_decay"] = optimizer.weight_decay;
    tr["adam_beta1"] = optimizer.beta1;
    tr["adam_beta2"] = optimizer.beta2;
    tr["adam_eps"] = optimizer.eps;
    tr["log_every"] = log_every;
    json& a = j["analysis"];
    a["histogram_bins"] = histogram_bins;
    a["eval_pairs"] = eval_pairs;
    a["traverse_images"] = traverse_images;
    json& gc = j["gradcheck"];
    gc["configs"] = gradcheck_configs;
    gc["batch"] = gradcheck_batch;
    gc["dim"] = gradcheck_dim;
    return j.dump(2) + "\n";
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("config: cannot write " + path.string());
    }
    out << to_json_text();
}

GeometryConfig RunConfig::geometry_config() const {
    GeometryConfig g = GeometryConfig::defaults(kind, variant, embed_dim);
    g.min_radius_k = min_radius_k;
    g.lambda_entail = lambda_entail;
    if (beta_init) {
        if (*beta_init <= 0.0) throw std::invalid_argument("config: beta_init must be > 0");
        g.log_beta = std::log(*beta_init);
    }
    if (beta_max) g.beta_max = *beta_max;
    if (c_init <= 0.0) throw std::invalid_argument("config: c_init must be > 0");
    g.log_c = std::log(c_init);
    g.c_min = c_min;
    g.c_max = c_max;
    return g;
}

TrainBundle RunConfig::train_bundle() const {
    TrainBundle b;
    b.tree = tree;
    b.ancestor_depth_weights = ancestor_depth_weights;
    b.cfg = geometry_config();
    b.schedule = schedule;
    b.optimizer = optimizer;
    b.batch_size = batch_size;
    b.embed_dim = embed_dim;
    b.hidden_dim = hidden_dim;
    b.final_norm = final_norm;
    b.seed = seed;
    b.log_every = log_every;
    return b;
}

}  // namespace geomlab
