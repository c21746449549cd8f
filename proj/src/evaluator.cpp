#include "textfusion/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "textfusion/errors.hpp"

namespace textfusion {

double cosine(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw ShapeError("cosine: vector lengths " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

double average_precision(const Vec& scores, const BoolVec& relevant) {
    if (scores.size() != relevant.size())
        throw ShapeError("average_precision: scores length " +
                         std::to_string(scores.size()) + " vs relevance length " +
                         std::to_string(relevant.size()));
    std::size_t total_relevant = 0;
    for (auto r : relevant) total_relevant += r ? 1 : 0;
    if (total_relevant == 0)
        throw UsageError("average_precision: no relevant items, AP undefined");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    // Recall only moves at relevant cut-offs, so the sum collapses to them.
    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (!relevant[order[k]]) continue;
        ++hits;
        const double precision =
            static_cast<double>(hits) / static_cast<double>(k + 1);
        const double recall_step = static_cast<double>(hits) / total_relevant -
                                   static_cast<double>(hits - 1) / total_relevant;
        ap += precision * recall_step;
    }
    return ap;
}

namespace {

void finalize_map(EvalReport& report) {
    double sum = 0.0;
    for (const auto& [cls, ap] : report.per_class_ap) sum += ap;
    report.map = report.per_class_ap.empty()
                     ? 0.0
                     : sum / static_cast<double>(report.per_class_ap.size());
}

}  // namespace

EvalReport classification_map(const std::vector<Vec>& scores,
                              const std::vector<std::size_t>& labels) {
    if (scores.empty()) throw UsageError("classification_map: empty test set");
    if (scores.size() != labels.size())
        throw ShapeError("classification_map: " + std::to_string(scores.size()) +
                         " score rows vs " + std::to_string(labels.size()) + " labels");
    const std::size_t num_classes = scores[0].size();
    for (const Vec& row : scores)
        if (row.size() != num_classes)
            throw ShapeError("classification_map: ragged score rows");
    for (std::size_t label : labels)
        if (label >= num_classes)
            throw IndexError("classification_map: label " + std::to_string(label) +
                             " vs " + std::to_string(num_classes) + " score columns");

    EvalReport report;
    report.mode = EvalMode::classification;
    report.count = scores.size();
    Vec class_scores(scores.size());
    BoolVec relevance(scores.size());
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        bool present = false;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            class_scores[i] = scores[i][cls];
            relevance[i] = labels[i] == cls ? 1 : 0;
            present = present || relevance[i];
        }
        if (!present) {
            report.warnings.push_back("class " + std::to_string(cls) +
                                      " has no test samples; skipped");
            continue;
        }
        report.per_class_ap[cls] = average_precision(class_scores, relevance);
    }
    finalize_map(report);
    return report;
}

EvalReport retrieval_map(const std::vector<Vec>& query_features,
                         const std::vector<std::size_t>& query_labels,
                         const std::vector<Vec>& search_features,
                         const std::vector<std::size_t>& search_labels) {
    if (query_features.empty()) throw UsageError("retrieval_map: no queries");
    if (search_features.empty()) throw UsageError("retrieval_map: empty search set");
    if (query_features.size() != query_labels.size() ||
        search_features.size() != search_labels.size())
        throw ShapeError("retrieval_map: features and labels disagree in length");
    const std::size_t dim = search_features[0].size();
    for (const Vec& f : search_features)
        if (f.size() != dim) throw ShapeError("retrieval_map: ragged search features");
    for (const Vec& f : query_features)
        if (f.size() != dim)
            throw ShapeError("retrieval_map: query dim " + std::to_string(f.size()) +
                             " vs search dim " + std::to_string(dim));
    for (std::size_t label : query_labels) {
        if (std::find(search_labels.begin(), search_labels.end(), label) ==
            search_labels.end())
            throw UsageError("retrieval_map: query class " + std::to_string(label) +
                             " absent from the search set");
    }

    EvalReport report;
    report.mode = EvalMode::retrieval;
    report.count = query_features.size();

    std::size_t zero_features = 0;
    for (const Vec& f : query_features)
        if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; }))
            ++zero_features;
    for (const Vec& f : search_features)
        if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; }))
            ++zero_features;
    if (zero_features > 0)
        report.warnings.push_back(std::to_string(zero_features) +
                                  " zero-norm feature(s); cosine treated as 0");

    std::map<std::size_t, Vec> ap_per_class;
    Vec sims(search_features.size());
    BoolVec relevance(search_features.size());
    for (std::size_t q = 0; q < query_features.size(); ++q) {
        for (std::size_t s = 0; s < search_features.size(); ++s) {
            sims[s] = cosine(query_features[q], search_features[s]);
            relevance[s] = search_labels[s] == query_labels[q] ? 1 : 0;
        }
        ap_per_class[query_labels[q]].push_back(average_precision(sims, relevance));
    }
    for (const auto& [cls, aps] : ap_per_class) {
        double sum = 0.0;
        for (double ap : aps) sum += ap;
        report.per_class_ap[cls] = sum / static_cast<double>(aps.size());
    }
    finalize_map(report);
    return report;
}

namespace {

std::string class_label(std::size_t cls, const std::vector<std::string>& class_names) {
    return cls < class_names.size() ? class_names[cls] : std::to_string(cls);
}

}  // namespace

std::string report_csv(const EvalReport& report,
                       const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os << "class,ap\n";
    char buf[64];
    for (const auto& [cls, ap] : report.per_class_ap) {
        std::snprintf(buf, sizeof buf, "%.17g", ap);
        os << class_label(cls, class_names) << ',' << buf << '\n';
    }
    char map_buf[64];
    std::snprintf(map_buf, sizeof map_buf, "%.17g", report.map);
    os << "mAP," << map_buf << '\n';
    return os.str();
}

std::string report_text(const EvalReport& report,
                        const std::vector<std::string>& class_names) {
    std::size_t width = 5;
    for (const auto& [cls, ap] : report.per_class_ap)
        width = std::max(width, class_label(cls, class_names).size());
    std::ostringstream os;
    os << (report.mode == EvalMode::classification ? "classification"
                                                   : "retrieval")
       << " AP per class (" << report.count
       << (report.mode == EvalMode::classification ? " samples" : " queries") << ")\n";
    char buf[64];
    for (const auto& [cls, ap] : report.per_class_ap) {
        const std::string name = class_label(cls, class_names);
        os << "  " << name << std::string(width - name.size() + 2, ' ');
        std::snprintf(buf, sizeof buf, "%6.4f", ap);
        os << buf << '\n';
    }
    std::snprintf(buf, sizeof buf, "%6.4f", report.map);
    os << "  mAP" << std::string(width - 3 + 2, ' ') << buf << '\n';
    for (const std::string& warning : report.warnings) os << "  note: " << warning << '\n';
    return os.str();
}

}  // namespace textfusion
