#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "textfusion/attention.hpp"
#include "textfusion/checkpoint.hpp"
#include "textfusion/commands.hpp"
#include "textfusion/dataio.hpp"
#include "textfusion/embeddings.hpp"
#include "textfusion/errors.hpp"
#include "textfusion/evaluator.hpp"
#include "textfusion/fixture.hpp"
#include "textfusion/model.hpp"
#include "textfusion/nn.hpp"
#include "textfusion/textrep.hpp"
#include "textfusion/trainer.hpp"

namespace py = pybind11;
using namespace textfusion;

namespace {

DenseMatrix matrix_from_rows(const std::vector<Vec>& rows) {
    if (rows.empty()) return {};
    DenseMatrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols)
            throw ShapeError("matrix rows have inconsistent lengths");
        for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
    }
    return m;
}

std::vector<Vec> matrix_to_rows(const DenseMatrix& m) {
    std::vector<Vec> rows(m.rows, Vec(m.cols));
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) rows[r][c] = m.at(r, c);
    return rows;
}

BoolVec to_mask(const std::vector<bool>& mask) {
    BoolVec out(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 1 : 0;
    return out;
}

std::vector<PreparedSample> prepare_split(const Model& model,
                                          const DatasetManifest& manifest,
                                          const EmbeddingTable& table,
                                          const std::string& split) {
    Split s;
    if (split == "train") s = Split::train;
    else if (split == "test") s = Split::test;
    else throw UsageError("unknown split '" + split + "'");
    const auto subset = manifest.split_samples(s);
    if (subset.empty()) throw UsageError("split '" + split + "' is empty");
    return prepare_samples(subset, table, model.n_max);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "scene-text + visual fusion classifier (C++ core)";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<IndexError>(m, "IndexErrorTF", PyExc_IndexError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    // Numeric primitives.
    m.def("masked_softmax",
          [](const Vec& logits, const std::vector<bool>& mask) {
              return masked_softmax(logits, to_mask(mask));
          },
          py::arg("logits"), py::arg("mask"));
    m.def("softmax_xent", &softmax_xent, py::arg("logits"), py::arg("target"));
    m.def("cosine", &cosine, py::arg("a"), py::arg("b"));
    m.def("average_precision",
          [](const Vec& scores, const std::vector<bool>& relevant) {
              return average_precision(scores, to_mask(relevant));
          },
          py::arg("scores"), py::arg("relevant"));
    m.def("classification_map", &classification_map, py::arg("scores"), py::arg("labels"));
    m.def("retrieval_map", &retrieval_map, py::arg("query_features"),
          py::arg("query_labels"), py::arg("search_features"), py::arg("search_labels"));

    // Embeddings.
    py::class_<EmbeddingTable>(m, "EmbeddingTable")
        .def_readonly("dim", &EmbeddingTable::dim)
        .def("__len__", &EmbeddingTable::size)
        .def("lookup", [](const EmbeddingTable& t, const std::string& token) {
            const Vec* v = lookup(t, token);
            return v ? std::optional<Vec>(*v) : std::nullopt;
        });
    m.def("load_embeddings", &load_embeddings, py::arg("path"),
          py::arg("expected_dim") = std::nullopt);
    m.def("fixture_embedding_table", [] { return fixture_embedding_table(); });
    m.def("write_fixture_embeddings",
          [](const std::string& path) { atomic_write_file(path, fixture_embedding_text()); },
          py::arg("path"));

    // Text representation.
    py::class_<SpottedWord>(m, "SpottedWord")
        .def(py::init<std::string, double>(), py::arg("text"), py::arg("score"))
        .def_readwrite("text", &SpottedWord::text)
        .def_readwrite("score", &SpottedWord::score);
    py::class_<TextFeature>(m, "TextFeature")
        .def_property_readonly("matrix",
                               [](const TextFeature& t) { return matrix_to_rows(t.matrix); })
        .def_property_readonly("mask",
                               [](const TextFeature& t) {
                                   std::vector<bool> mask(t.mask.size());
                                   for (std::size_t i = 0; i < t.mask.size(); ++i)
                                       mask[i] = t.mask[i] != 0;
                                   return mask;
                               })
        .def_readonly("words", &TextFeature::words)
        .def("valid_count", &TextFeature::valid_count);
    m.def("filter_words", &filter_words, py::arg("words"));
    m.def("build_text_feature",
          [](const std::vector<SpottedWord>& words, const EmbeddingTable& table,
             std::size_t n_max) { return build_text_feature(words, table, n_max); },
          py::arg("words"), py::arg("table"), py::arg("n_max"));

    // Attention.
    m.def("attention_forward",
          [](const Vec& visual, const std::vector<Vec>& u_rows, const TextFeature& text) {
              AttentionParams params{matrix_from_rows(u_rows)};
              const AttentionOutput out = attention_forward(visual, params, text);
              return std::make_pair(out.weights, out.attended);
          },
          py::arg("visual"), py::arg("u"), py::arg("text"),
          "Returns (weights, attended).");
    m.def("average_pool", &average_pool, py::arg("text"));

    // Configuration.
    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("v_dim", &ModelConfig::v_dim)
        .def_readwrite("t_dim", &ModelConfig::t_dim)
        .def_readwrite("fused_v_dim", &ModelConfig::fused_v_dim)
        .def_readwrite("num_classes", &ModelConfig::num_classes)
        .def_readwrite("beta", &ModelConfig::beta)
        .def_readwrite("seed", &ModelConfig::seed);
    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("base_lr", &TrainConfig::base_lr)
        .def_readwrite("lr_drop_start", &TrainConfig::lr_drop_start)
        .def_readwrite("lr_drop_period", &TrainConfig::lr_drop_period)
        .def_readwrite("lr_drop_factor", &TrainConfig::lr_drop_factor)
        .def_readwrite("max_iters", &TrainConfig::max_iters)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("beta", &TrainConfig::beta)
        .def_readwrite("seed", &TrainConfig::seed);
    m.def("lr_at", &lr_at, py::arg("iter"), py::arg("config"));

    // Datasets.
    py::class_<DatasetManifest>(m, "DatasetManifest")
        .def_readonly("class_names", &DatasetManifest::class_names)
        .def_readonly("v_dim", &DatasetManifest::v_dim)
        .def_property_readonly("n_max",
                               [](const DatasetManifest& d) { return d.n_max; })
        .def("__len__", [](const DatasetManifest& d) { return d.samples.size(); })
        .def("count",
             [](const DatasetManifest& d, const std::string& split) {
                 return d.count(split == "train" ? Split::train : Split::test);
             })
        .def("save", [](const DatasetManifest& d, const std::string& path) {
            save_manifest(d, path);
        });
    m.def("load_manifest", &load_manifest, py::arg("path"));
    m.def("synth_overfit", &synth_overfit, py::arg("k"), py::arg("per_class"),
          py::arg("v_dim"), py::arg("seed"));
    m.def("synth_text_only", &synth_text_only, py::arg("k"), py::arg("per_class"),
          py::arg("v_dim"), py::arg("seed"));
    m.def("synth_noisy_words", &synth_noisy_words, py::arg("k"), py::arg("per_class"),
          py::arg("v_dim"), py::arg("noise_words"), py::arg("seed"));

    // Training, evaluation, retrieval.
    py::class_<LossHistoryRow>(m, "LossHistoryRow")
        .def_readonly("iter", &LossHistoryRow::iter)
        .def_readonly("lr", &LossHistoryRow::lr)
        .def_readonly("total", &LossHistoryRow::total)
        .def_readonly("fused", &LossHistoryRow::fused)
        .def_readonly("visual", &LossHistoryRow::visual)
        .def_readonly("text", &LossHistoryRow::text);
    py::class_<Model>(m, "Model")
        .def_property_readonly("variant",
                               [](const Model& model) {
                                   return std::string(variant_name(model.variant));
                               })
        .def_readonly("n_max", &Model::n_max)
        .def_property_readonly("config", [](const Model& model) { return model.config; })
        .def("save", [](const Model& model, const std::string& path) {
            save_checkpoint(model, path);
        });
    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("model", &TrainResult::model)
        .def_readonly("history", &TrainResult::history);
    m.def("train",
          [](const ModelConfig& mc, const TrainConfig& tc, const DatasetManifest& data,
             const EmbeddingTable& table, const std::string& variant) {
              return train(mc, tc, data, table, parse_variant(variant));
          },
          py::arg("model_config"), py::arg("train_config"), py::arg("dataset"),
          py::arg("table"), py::arg("variant") = "fused");
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    py::class_<EvalReport>(m, "EvalReport")
        .def_property_readonly("mode",
                               [](const EvalReport& r) {
                                   return r.mode == EvalMode::classification
                                              ? "classification"
                                              : "retrieval";
                               })
        .def_readonly("per_class_ap", &EvalReport::per_class_ap)
        .def_property_readonly("map", [](const EvalReport& r) { return r.map; })
        .def_readonly("count", &EvalReport::count)
        .def_readonly("warnings", &EvalReport::warnings);

    m.def("predict_split",
          [](const Model& model, const DatasetManifest& manifest,
             const EmbeddingTable& table, const std::string& split) {
              const auto prepared = prepare_split(model, manifest, table, split);
              const auto predictions =
                  predict(model.params, model.config, prepared, model.variant);
              std::vector<std::tuple<std::string, std::size_t, std::size_t, Vec>> out;
              out.reserve(prepared.size());
              for (std::size_t i = 0; i < prepared.size(); ++i)
                  out.emplace_back(prepared[i].id, prepared[i].label,
                                   predictions[i].cls, predictions[i].scores);
              return out;
          },
          py::arg("model"), py::arg("manifest"), py::arg("table"), py::arg("split"),
          "Returns (id, label, predicted, scores) per sample.");
    m.def("evaluate_classification",
          [](const Model& model, const DatasetManifest& manifest,
             const EmbeddingTable& table, const std::string& split) {
              const auto prepared = prepare_split(model, manifest, table, split);
              const auto predictions =
                  predict(model.params, model.config, prepared, model.variant);
              std::vector<Vec> scores;
              std::vector<std::size_t> labels;
              for (std::size_t i = 0; i < prepared.size(); ++i) {
                  scores.push_back(predictions[i].scores);
                  labels.push_back(prepared[i].label);
              }
              return classification_map(scores, labels);
          },
          py::arg("model"), py::arg("manifest"), py::arg("table"), py::arg("split"));
    m.def("evaluate_retrieval",
          [](const Model& model, const DatasetManifest& manifest,
             const EmbeddingTable& table) {
              const auto queries = prepare_split(model, manifest, table, "test");
              const auto search = prepare_split(model, manifest, table, "train");
              std::vector<Vec> qf, sf;
              std::vector<std::size_t> ql, sl;
              for (const auto& s : queries) {
                  qf.push_back(extract_retrieval_feature(model.params, model.config, s,
                                                         model.variant));
                  ql.push_back(s.label);
              }
              for (const auto& s : search) {
                  sf.push_back(extract_retrieval_feature(model.params, model.config, s,
                                                         model.variant));
                  sl.push_back(s.label);
              }
              return retrieval_map(qf, ql, sf, sl);
          },
          py::arg("model"), py::arg("manifest"), py::arg("table"));

    m.def("gradcheck_model",
          [](std::uint64_t seed, std::size_t v_dim, std::size_t t_dim,
             std::size_t fused_v_dim, std::size_t num_classes, std::size_t n_max,
             std::size_t batch, double step) {
              cli::GradcheckOptions options;
              options.seed = seed;
              options.v_dim = v_dim;
              options.t_dim = t_dim;
              options.fused_v_dim = fused_v_dim;
              options.num_classes = num_classes;
              options.n_max = n_max;
              options.batch = batch;
              options.step = step;
              const cli::ModelGradcheck result = cli::run_model_gradcheck(options);
              return std::make_pair(result.max_rel_error, result.worst_coordinate);
          },
          py::arg("seed") = 0, py::arg("v_dim") = 12, py::arg("t_dim") = 8,
          py::arg("fused_v_dim") = 6, py::arg("num_classes") = 3, py::arg("n_max") = 3,
          py::arg("batch") = 4, py::arg("step") = 1e-5,
          "Returns (max_relative_error, worst_coordinate).");
}
