#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "textfusion/matrix.hpp"

namespace textfusion {

// a.b / (|a| |b|); defined as 0 when either norm is 0.
double cosine(const Vec& a, const Vec& b);

// Eq.-style average precision: sort by score descending (stable in the
// original index on ties), AP = sum_k P(k) * (R(k) - R(k-1)) with R(0) = 0.
// Rejects an all-irrelevant input, where the value is undefined.
double average_precision(const Vec& scores, const BoolVec& relevant);

enum class EvalMode { classification, retrieval };

struct EvalReport {
    EvalMode mode = EvalMode::classification;
    std::map<std::size_t, double> per_class_ap;  // class index -> AP in [0,1]
    double map = 0.0;                            // mean of per_class_ap values
    std::size_t count = 0;                       // test samples or queries
    std::vector<std::string> warnings;
};

// Per class c: rank all samples by scores[i][c], relevance = (labels[i] == c).
// Classes absent from `labels` are skipped with a warning, not scored zero.
EvalReport classification_map(const std::vector<Vec>& scores,
                              const std::vector<std::size_t>& labels);

// Per query: rank the search set by cosine similarity (stable tie-break on
// search index), relevance = same class. Per-class AP is the mean over that
// class's queries; mAP the mean over classes. Every query's class must occur
// in the search set.
EvalReport retrieval_map(const std::vector<Vec>& query_features,
                         const std::vector<std::size_t>& query_labels,
                         const std::vector<Vec>& search_features,
                         const std::vector<std::size_t>& search_labels);

// class,AP rows plus a final mAP line, full precision.
std::string report_csv(const EvalReport& report,
                       const std::vector<std::string>& class_names);

// Aligned per-class table with the mAP summary.
std::string report_text(const EvalReport& report,
                        const std::vector<std::string>& class_names);

}  // namespace textfusion
