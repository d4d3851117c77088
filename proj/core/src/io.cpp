#include "geomlab/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace geomlab {

namespace {

std::string format_hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_double(const std::string& s, const char* context) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw std::runtime_error(std::string("parse error in ") + context + ": '" + s + "'");
    }
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_embedding_dump(const std::filesystem::path& path, const EmbeddingDump& dump) {
    auto out = open_out(path);
    out << "n=" << dump.dim << ",kind=" << to_string(dump.kind) << "\n";
    for (std::size_t i = 0; i < dump.embeddings.size(); ++i) {
        out << dump.ids[i] << ','
            << (dump.modalities[i] == Modality::text ? "text" : "image");
        for (double v : dump.embeddings[i]) out << ',' << format_double(v);
        out << "\n";
    }
}

EmbeddingDump read_embedding_dump(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty embedding dump " + path.string());
    EmbeddingDump dump;
    {
        const auto fields = split(line, ',');
        if (fields.size() != 2 || fields[0].rfind("n=", 0) != 0 ||
            fields[1].rfind("kind=", 0) != 0) {
            throw std::runtime_error("bad embedding dump header: " + line);
        }
        dump.dim = std::stoi(fields[0].substr(2));
        dump.kind = geometry_kind_from_string(fields[1].substr(5));
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != static_cast<std::size_t>(dump.dim) + 2) {
            throw std::runtime_error("bad embedding dump row: " + line);
        }
        dump.ids.push_back(std::stoi(fields[0]));
        if (fields[1] == "text") {
            dump.modalities.push_back(Modality::text);
        } else if (fields[1] == "image") {
            dump.modalities.push_back(Modality::image);
        } else {
            throw std::runtime_error("bad modality: " + fields[1]);
        }
        Vec e(dump.dim);
        for (int k = 0; k < dump.dim; ++k) {
            e[k] = parse_double(fields[k + 2], "embedding dump");
        }
        dump.embeddings.push_back(std::move(e));
    }
    return dump;
}

void write_histogram_csv(const std::filesystem::path& path, const HistogramTable& table) {
    auto out = open_out(path);
    out << "bin_lo,bin_hi,count_text,count_image\n";
    for (std::size_t k = 0; k < table.bins(); ++k) {
        out << format_double(table.bin_lo[k]) << ',' << format_double(table.bin_hi[k]) << ','
            << table.count_text[k] << ',' << table.count_image[k] << "\n";
    }
}

void write_traversal_csv(const std::filesystem::path& path, const TraversalResult& result,
                         std::span<const std::string> labels_by_id) {
    auto out = open_out(path);
    out << "step,t,caption_id,caption_label\n";
    for (std::size_t k = 0; k < result.step_caption_ids.size(); ++k) {
        const int id = result.step_caption_ids[k];
        const std::string label =
            id < 0 ? "(none)"
                   : (id < static_cast<int>(labels_by_id.size()) ? labels_by_id[id]
                                                                 : std::to_string(id));
        out << k << ',' << format_double(result.step_t[k]) << ',' << id << ',' << label << "\n";
    }
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
    auto out = open_out(path);
    out << "step,lr,contrastive,entailment,total,beta,c,alpha_txt,alpha_img,recall_at_1,"
           "resampled\n";
    for (const MetricsRow& r : rows) {
        out << r.step << ',' << format_double(r.lr) << ',' << format_double(r.contrastive)
            << ',' << format_double(r.entailment) << ',' << format_double(r.total) << ','
            << format_double(r.beta) << ',' << format_double(r.curvature) << ','
            << format_double(r.alpha_txt) << ',' << format_double(r.alpha_img) << ','
            << format_double(r.recall_at_1) << ',' << r.resampled << "\n";
    }
}

void write_modality_gap_csv(const std::filesystem::path& path, const ModalityGap& gap) {
    auto out = open_out(path);
    out << "median_text,median_image,ratio\n";
    out << format_double(gap.median_text) << ',' << format_double(gap.median_image) << ','
        << format_double(gap.ratio) << "\n";
}

void write_tree_csv(const std::filesystem::path& path, const PrototypeTree& tree) {
    auto out = open_out(path);
    const TreeSpec& s = tree.spec;
    out << "tree,depth=" << s.depth << ",branching=" << s.branching << ",raw_dim=" << s.raw_dim
        << ",step_sigma=" << format_double(s.step_sigma)
        << ",leaf_noise=" << format_double(s.leaf_noise) << ",seed=" << s.seed
        << ",max_nodes=" << s.max_nodes << "\n";
    out << "id,parent,depth,values\n";
    for (int id = 0; id < tree.node_count(); ++id) {
        out << id << ',' << tree.parent(id) << ',' << tree.depth_of(id);
        for (double v : tree.prototypes[id]) out << ',' << format_double(v);
        out << "\n";
    }
}

PrototypeTree read_tree_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty tree file " + path.string());
    const auto meta = split(line, ',');
    if (meta.empty() || meta[0] != "tree") {
        throw std::runtime_error("bad tree file header: " + line);
    }
    TreeSpec spec;
    for (std::size_t k = 1; k < meta.size(); ++k) {
        const auto pos = meta[k].find('=');
        if (pos == std::string::npos) throw std::runtime_error("bad tree meta: " + meta[k]);
        const std::string key = meta[k].substr(0, pos);
        const std::string value = meta[k].substr(pos + 1);
        if (key == "depth") spec.depth = std::stoi(value);
        else if (key == "branching") spec.branching = std::stoi(value);
        else if (key == "raw_dim") spec.raw_dim = std::stoi(value);
        else if (key == "step_sigma") spec.step_sigma = parse_double(value, "tree meta");
        else if (key == "leaf_noise") spec.leaf_noise = parse_double(value, "tree meta");
        else if (key == "seed") spec.seed = std::stoull(value);
        else if (key == "max_nodes") spec.max_nodes = std::stoll(value);
        else throw std::runtime_error("unknown tree meta key: " + key);
    }
    std::getline(in, line);  // column header

    PrototypeTree tree;
    tree.spec = spec;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != static_cast<std::size_t>(spec.raw_dim) + 3) {
            throw std::runtime_error("bad tree row: " + line);
        }
        Vec proto(spec.raw_dim);
        for (int k = 0; k < spec.raw_dim; ++k) {
            proto[k] = parse_double(fields[k + 3], "tree row");
        }
        tree.prototypes.push_back(std::move(proto));
    }
    return tree;
}

void write_pair_manifest_csv(const std::filesystem::path& path, const PrototypeTree& tree,
                             const PairBatch& batch) {
    auto out = open_out(path);
    out << "pair,text_node,image_node,text_depth\n";
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out << i << ',' << batch.text_node_ids[i] << ',' << batch.image_node_ids[i] << ','
            << tree.depth_of(batch.text_node_ids[i]) << "\n";
    }
}

namespace {

void write_encoder(std::ofstream& out, const char* name, const EncoderParams& p) {
    out << "encoder " << name << ' ' << p.in_dim << ' ' << p.hidden_dim << ' ' << p.out_dim
        << ' ' << (p.final_norm ? 1 : 0) << "\n";
    p.for_each_tensor([&](const char* tensor, const Vec& values, bool) {
        out << "tensor " << tensor << ' ' << values.size() << "\n";
        for (std::size_t k = 0; k < values.size(); ++k) {
            out << (k == 0 ? "" : " ") << format_hex(values[k]);
        }
        out << "\n";
    });
}

EncoderParams read_encoder(std::ifstream& in, const std::string& expected_name) {
    std::string word, name;
    in >> word >> name;
    if (word != "encoder" || name != expected_name) {
        throw std::runtime_error("checkpoint: expected encoder " + expected_name);
    }
    EncoderParams p;
    int final_norm = 0;
    in >> p.in_dim >> p.hidden_dim >> p.out_dim >> final_norm;
    p.final_norm = final_norm != 0;
    p.for_each_tensor([&](const char* tensor, Vec& values, bool) {
        std::string tag, tname;
        std::size_t count = 0;
        in >> tag >> tname >> count;
        if (tag != "tensor" || tname != tensor) {
            throw std::runtime_error("checkpoint: expected tensor " + std::string(tensor));
        }
        values.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            std::string hex;
            in >> hex;
            values[k] = parse_double(hex, "checkpoint tensor");
        }
    });
    if (!in) throw std::runtime_error("checkpoint: truncated while reading " + expected_name);
    return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
    auto out = open_out(path);
    out << "geomlab-checkpoint-v1\n";
    out << "step " << state.step << "\n";
    out << "seed " << state.seed << "\n";
    out << "geometry " << to_string(state.cfg.kind) << ' ' << to_string(state.cfg.variant)
        << "\n";
    out << "scalars " << format_hex(state.cfg.log_beta) << ' ' << format_hex(state.cfg.log_c)
        << ' ' << format_hex(state.cfg.log_alpha_txt) << ' '
        << format_hex(state.cfg.log_alpha_img) << "\n";
    out << "hparams " << format_hex(state.cfg.min_radius_k) << ' '
        << format_hex(state.cfg.lambda_entail) << ' ' << format_hex(state.cfg.beta_max) << ' '
        << format_hex(state.cfg.c_min) << ' ' << format_hex(state.cfg.c_max) << "\n";
    write_encoder(out, "text", state.text_encoder);
    write_encoder(out, "image", state.image_encoder);
    out << "end\n";
}

TrainState load_checkpoint(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);
    if (line != "geomlab-checkpoint-v1") {
        throw std::runtime_error("checkpoint: unsupported format '" + line + "'");
    }
    TrainState st;
    std::string word;
    in >> word >> st.step;
    if (word != "step") throw std::runtime_error("checkpoint: expected step");
    in >> word >> st.seed;
    if (word != "seed") throw std::runtime_error("checkpoint: expected seed");
    std::string kind, variant;
    in >> word >> kind >> variant;
    if (word != "geometry") throw std::runtime_error("checkpoint: expected geometry");
    st.cfg.kind = geometry_kind_from_string(kind);
    st.cfg.variant = logit_variant_from_string(variant);
    const auto read_hex = [&](const char* context) {
        std::string s;
        in >> s;
        return parse_double(s, context);
    };
    in >> word;
    if (word != "scalars") throw std::runtime_error("checkpoint: expected scalars");
    st.cfg.log_beta = read_hex("scalars");
    st.cfg.log_c = read_hex("scalars");
    st.cfg.log_alpha_txt = read_hex("scalars");
    st.cfg.log_alpha_img = read_hex("scalars");
    in >> word;
    if (word != "hparams") throw std::runtime_error("checkpoint: expected hparams");
    st.cfg.min_radius_k = read_hex("hparams");
    st.cfg.lambda_entail = read_hex("hparams");
    st.cfg.beta_max = read_hex("hparams");
    st.cfg.c_min = read_hex("hparams");
    st.cfg.c_max = read_hex("hparams");
    st.text_encoder = read_encoder(in, "text");
    st.image_encoder = read_encoder(in, "image");
    in >> word;
    if (word != "end") throw std::runtime_error("checkpoint: missing end marker");
    st.m_text = EncoderParams::zeros_like(st.text_encoder);
    st.v_text = EncoderParams::zeros_like(st.text_encoder);
    st.m_image = EncoderParams::zeros_like(st.image_encoder);
    st.v_image = EncoderParams::zeros_like(st.image_encoder);
    return st;
}

}  // namespace geomlab
