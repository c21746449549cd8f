#include "textfusion/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "textfusion/checkpoint.hpp"
#include "textfusion/dataio.hpp"
#include "textfusion/errors.hpp"
#include "textfusion/evaluator.hpp"
#include "textfusion/fixture.hpp"
#include "textfusion/rng.hpp"
#include "textfusion/trainer.hpp"

namespace textfusion::cli {

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
    KeyValueConfig config;
    config.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim_copy(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(origin + ":" + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim_copy(line.substr(0, eq));
        const std::string value = trim_copy(line.substr(eq + 1));
        if (key.empty())
            throw FormatError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (config.values_.count(key))
            throw FormatError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
        config.values_[key] = value;
        config.consumed_[key] = false;
    }
    return config;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_[key] = true;
    return it->second;
}

std::string KeyValueConfig::require_string(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end())
        throw UsageError(origin_ + ": missing required key '" + key + "'");
    consumed_[key] = true;
    return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_[key] = true;
    const char* begin = it->second.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw FormatError(origin_ + ": key '" + key + "' has non-numeric value '" +
                          it->second + "'");
    return v;
}

std::size_t KeyValueConfig::get_count(const std::string& key, std::size_t fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_[key] = true;
    const std::string& v = it->second;
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) {
            return std::isdigit(static_cast<unsigned char>(c));
        }))
        throw FormatError(origin_ + ": key '" + key + "' must be a non-negative integer, "
                          "got '" + v + "'");
    return static_cast<std::size_t>(std::strtoull(v.c_str(), nullptr, 10));
}

std::uint64_t KeyValueConfig::get_seed(const std::string& key, std::uint64_t fallback) {
    return static_cast<std::uint64_t>(get_count(key, static_cast<std::size_t>(fallback)));
}

void KeyValueConfig::reject_unknown() const {
    for (const auto& [key, consumed] : consumed_)
        if (!consumed)
            throw UsageError(origin_ + ": unknown key '" + key + "'");
}

namespace {

EmbeddingTable load_table(const std::string& spec) {
    if (spec == "fixture") return fixture_embedding_table();
    return load_embeddings(spec);
}

void print_warnings(const EvalReport& report, std::ostream& err) {
    for (const std::string& w : report.warnings) err << "warning: " << w << "\n";
}

std::filesystem::path ensure_report_dir(const std::string& dir) {
    const std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    return p;
}

// A Fig.-5-style listing: each sample's retained words with their pooling
// weights.
std::string attention_dump_text(const Model& model,
                                const std::vector<PreparedSample>& samples,
                                const std::vector<Prediction>& predictions,
                                const std::vector<std::string>& class_names) {
    std::ostringstream os;
    char buf[48];
    const ForwardResult fwd =
        forward_infer(model.params, model.config, samples, model.variant);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        os << "sample " << samples[i].id << " label=" << class_names[samples[i].label]
           << " predicted=" << class_names[predictions[i].cls] << "\n";
        const TextFeature& text = samples[i].text;
        for (std::size_t w = 0; w < text.words.size(); ++w) {
            std::snprintf(buf, sizeof buf, "%.6g", fwd.pooling_weights[i][w]);
            os << "  " << text.words[w] << ": " << buf << "\n";
        }
    }
    return os.str();
}

}  // namespace

int cmd_synth(const SynthOptions& options, std::ostream& out, std::ostream& err) {
    try {
        if (options.out.empty()) throw UsageError("synth: output path required");
        DatasetManifest manifest;
        if (options.kind == "overfit") {
            manifest = synth_overfit(options.k, options.per_class, options.v_dim,
                                     options.seed);
        } else if (options.kind == "text_only") {
            manifest = synth_text_only(options.k, options.per_class, options.v_dim,
                                       options.seed);
        } else if (options.kind == "noisy") {
            manifest = synth_noisy_words(options.k, options.per_class, options.v_dim,
                                         options.noise, options.seed);
        } else {
            throw UsageError("synth: unknown kind '" + options.kind +
                             "' (expected overfit, text_only or noisy)");
        }
        save_manifest(manifest, options.out, options.sidecar);
        if (!options.embeddings_out.empty())
            atomic_write_file(options.embeddings_out, fixture_embedding_text());
        out << "wrote " << options.out << ": " << manifest.num_classes() << " classes, "
            << manifest.samples.size() << " samples (" << manifest.count(Split::train)
            << " train / " << manifest.count(Split::test) << " test), n_max "
            << *manifest.n_max << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "synth: " << e.what() << "\n";
        return 1;
    }
}

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
    try {
        KeyValueConfig config = KeyValueConfig::load(options.config_path);
        const std::string manifest_path = config.require_string("manifest");
        const std::string embeddings_path = config.require_string("embeddings");
        const std::string checkpoint_path = config.require_string("checkpoint");
        const std::string loss_csv_path =
            config.get_string("loss_csv", checkpoint_path + ".loss.csv");
        const Variant variant = parse_variant(config.get_string("variant", "fused"));
        const std::uint64_t seed = config.get_seed("seed", 0);

        const DatasetManifest manifest = load_manifest(manifest_path);
        const EmbeddingTable table = load_table(embeddings_path);

        ModelConfig model_config;
        model_config.v_dim = config.get_count("v_dim", manifest.v_dim);
        model_config.t_dim = config.get_count("t_dim", table.dim);
        model_config.fused_v_dim = config.get_count("fused_v_dim", 512);
        model_config.num_classes = manifest.num_classes();
        model_config.beta = {config.get_double("beta1", 1.0),
                             config.get_double("beta2", 0.5),
                             config.get_double("beta3", 0.5)};
        model_config.seed = seed;
        if (model_config.v_dim != manifest.v_dim)
            throw UsageError("train: configured v_dim " +
                             std::to_string(model_config.v_dim) + " vs manifest v_dim " +
                             std::to_string(manifest.v_dim));
        if (model_config.t_dim != table.dim)
            throw UsageError("train: configured t_dim " +
                             std::to_string(model_config.t_dim) +
                             " vs embedding dimension " + std::to_string(table.dim));

        TrainConfig train_config;
        train_config.batch_size = config.get_count("batch_size", 64);
        train_config.base_lr = config.get_double("base_lr", 0.01);
        train_config.lr_drop_start = config.get_count("lr_drop_start", 7000);
        train_config.lr_drop_period = config.get_count("lr_drop_period", 10000);
        train_config.lr_drop_factor = config.get_double("lr_drop_factor", 10.0);
        train_config.max_iters = config.get_count("max_iters", 30000);
        train_config.momentum = config.get_double("momentum", 0.9);
        train_config.weight_decay = config.get_double("weight_decay", 0.0001);
        train_config.beta = model_config.beta;
        train_config.seed = seed;
        config.reject_unknown();

        const TrainResult result =
            train(model_config, train_config, manifest, table, variant);
        save_checkpoint(result.model, checkpoint_path);
        atomic_write_file(loss_csv_path, loss_history_csv(result.history));

        char buf[48];
        std::snprintf(buf, sizeof buf, "%.6g", result.history.back().total);
        out << "trained " << variant_name(variant) << " for "
            << train_config.max_iters << " iterations, final loss " << buf << "\n";
        out << "checkpoint: " << checkpoint_path << "\n";
        out << "loss history: " << loss_csv_path << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "train: " << e.what() << "\n";
        return 1;
    }
}

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
    try {
        const Model model = load_checkpoint(options.checkpoint);
        const DatasetManifest manifest = load_manifest(options.manifest);
        const EmbeddingTable table = load_table(options.embeddings);
        if (manifest.v_dim != model.config.v_dim)
            throw UsageError("eval: manifest v_dim " + std::to_string(manifest.v_dim) +
                             " vs checkpoint v_dim " +
                             std::to_string(model.config.v_dim));
        if (table.dim != model.config.t_dim)
            throw UsageError("eval: embedding dim " + std::to_string(table.dim) +
                             " vs checkpoint t_dim " + std::to_string(model.config.t_dim));
        if (manifest.num_classes() != model.config.num_classes)
            throw UsageError("eval: manifest has " +
                             std::to_string(manifest.num_classes()) +
                             " classes vs checkpoint " +
                             std::to_string(model.config.num_classes));

        Split split;
        if (options.split == "train") split = Split::train;
        else if (options.split == "test") split = Split::test;
        else throw UsageError("eval: unknown split '" + options.split + "'");

        const std::vector<const Sample*> subset = manifest.split_samples(split);
        if (subset.empty())
            throw UsageError(std::string("eval: split '") + split_name(split) +
                             "' is empty");
        const std::vector<PreparedSample> prepared =
            prepare_samples(subset, table, model.n_max);
        const std::vector<Prediction> predictions =
            predict(model.params, model.config, prepared, model.variant);

        std::vector<Vec> scores;
        std::vector<std::size_t> labels;
        scores.reserve(prepared.size());
        for (std::size_t i = 0; i < prepared.size(); ++i) {
            scores.push_back(predictions[i].scores);
            labels.push_back(prepared[i].label);
        }
        const EvalReport report = classification_map(scores, labels);
        print_warnings(report, err);

        const auto dir = ensure_report_dir(options.report_dir);
        atomic_write_file((dir / "classification_ap.csv").string(),
                          report_csv(report, manifest.class_names));
        atomic_write_file((dir / "classification_report.txt").string(),
                          report_text(report, manifest.class_names));
        if (model.variant == Variant::visual_only) {
            atomic_write_file((dir / "attention_dump.txt").string(),
                              "variant visual_only has no text path\n");
        } else {
            atomic_write_file(
                (dir / "attention_dump.txt").string(),
                attention_dump_text(model, prepared, predictions, manifest.class_names));
        }

        char buf[48];
        std::snprintf(buf, sizeof buf, "%.6f", report.map);
        out << "classification mAP (" << split_name(split) << ", "
            << prepared.size() << " samples): " << buf << "\n";
        out << "reports: " << dir.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "eval: " << e.what() << "\n";
        return 1;
    }
}

int cmd_retrieve(const RetrieveOptions& options, std::ostream& out, std::ostream& err) {
    try {
        const Model model = load_checkpoint(options.checkpoint);
        const DatasetManifest manifest = load_manifest(options.manifest);
        const EmbeddingTable table = load_table(options.embeddings);
        if (manifest.v_dim != model.config.v_dim)
            throw UsageError("retrieve: manifest v_dim " + std::to_string(manifest.v_dim) +
                             " vs checkpoint v_dim " +
                             std::to_string(model.config.v_dim));
        const std::vector<const Sample*> queries = manifest.split_samples(Split::test);
        const std::vector<const Sample*> search = manifest.split_samples(Split::train);
        if (queries.empty() || search.empty())
            throw UsageError("retrieve: need non-empty test (queries) and train "
                             "(search) splits");

        const std::vector<PreparedSample> query_prepared =
            prepare_samples(queries, table, model.n_max);
        const std::vector<PreparedSample> search_prepared =
            prepare_samples(search, table, model.n_max);

        std::vector<Vec> query_features, search_features;
        std::vector<std::size_t> query_labels, search_labels;
        for (const PreparedSample& s : query_prepared) {
            query_features.push_back(
                extract_retrieval_feature(model.params, model.config, s, model.variant));
            query_labels.push_back(s.label);
        }
        for (const PreparedSample& s : search_prepared) {
            search_features.push_back(
                extract_retrieval_feature(model.params, model.config, s, model.variant));
            search_labels.push_back(s.label);
        }

        const EvalReport report =
            retrieval_map(query_features, query_labels, search_features, search_labels);
        print_warnings(report, err);

        const auto dir = ensure_report_dir(options.report_dir);
        atomic_write_file((dir / "retrieval_ap.csv").string(),
                          report_csv(report, manifest.class_names));
        atomic_write_file((dir / "retrieval_report.txt").string(),
                          report_text(report, manifest.class_names));

        char buf[48];
        std::snprintf(buf, sizeof buf, "%.6f", report.map);
        out << "retrieval mAP (" << query_features.size() << " queries vs "
            << search_features.size() << " search items): " << buf << "\n";
        out << "reports: " << dir.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "retrieve: " << e.what() << "\n";
        return 1;
    }
}

ModelGradcheck run_model_gradcheck(const GradcheckOptions& options) {
    ModelConfig config;
    config.v_dim = options.v_dim;
    config.t_dim = options.t_dim;
    config.fused_v_dim = options.fused_v_dim;
    config.num_classes = options.num_classes;
    config.seed = options.seed;
    config.validate();

    Rng rng(mix_seed(options.seed, 31));
    std::vector<PreparedSample> batch;
    for (std::size_t i = 0; i < options.batch; ++i) {
        PreparedSample s;
        s.id = "gc-" + std::to_string(i);
        s.label = rng.below(config.num_classes);
        s.visual.resize(config.v_dim);
        for (double& v : s.visual) v = rng.normal();
        // Sample 1 is text-free so the no-text path is part of the check.
        std::size_t valid = 1 + rng.below(options.n_max);
        if (i == 1) valid = 0;
        s.text.matrix = DenseMatrix(config.t_dim, options.n_max);
        s.text.mask.assign(options.n_max, 0);
        for (std::size_t c = 0; c < valid; ++c) {
            s.text.mask[c] = 1;
            s.text.words.push_back("w" + std::to_string(c));
            for (std::size_t r = 0; r < config.t_dim; ++r)
                s.text.matrix.at(r, c) = rng.normal();
        }
        batch.push_back(std::move(s));
    }

    ModelParams base = init_params(config);
    const Vec flat = pack_params(base);
    const bool corrupt = options.corrupt;
    auto fn = [&](const Vec& x) {
        ModelParams p = make_params(config);
        unpack_params(p, x);
        // Trainable check only; running stats stay at initialization.
        p.bn_visual.running_mean = base.bn_visual.running_mean;
        p.bn_visual.running_var = base.bn_visual.running_var;
        p.bn_text.running_mean = base.bn_text.running_mean;
        p.bn_text.running_var = base.bn_text.running_var;
        LossResult result = combined_loss(p, config, batch, config.beta,
                                          Variant::fused, false);
        ValueGrad vg;
        vg.value = result.loss.total;
        vg.grad = pack_params(result.grads);
        if (corrupt && vg.grad.size() > 7) vg.grad[7] += 1e-2;
        return vg;
    };

    const GradCheckResult result = gradcheck(fn, flat, options.step);
    ModelGradcheck out;
    out.max_rel_error = result.max_rel_error;
    out.finite = result.finite;
    out.worst_coordinate = describe_param_coordinate(
        base, result.finite ? result.worst_index : result.bad_index);
    return out;
}

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err) {
    try {
        const ModelGradcheck result = run_model_gradcheck(options);
        if (!result.finite) {
            err << "gradcheck: non-finite loss around coordinate "
                << result.worst_coordinate << "\n";
            return 1;
        }
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.3g", result.max_rel_error);
        out << "gradcheck: max relative error " << buf << " at "
            << result.worst_coordinate << " (tolerance "
            << options.tolerance << ")\n";
        if (result.max_rel_error < options.tolerance) {
            out << "gradcheck: PASS\n";
            return 0;
        }
        err << "gradcheck: FAIL\n";
        return 1;
    } catch (const std::exception& e) {
        err << "gradcheck: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace textfusion::cli
