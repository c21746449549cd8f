#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "textfusion/matrix.hpp"
#include "textfusion/textrep.hpp"

namespace textfusion {

enum class Split { train, test };

const char* split_name(Split s);

struct Sample {
    std::string id;
    Split split = Split::train;
    std::size_t label = 0;
    Vec visual;
    std::vector<SpottedWord> words;
};

struct DatasetManifest {
    std::vector<std::string> class_names;
    std::size_t v_dim = 0;
    std::optional<std::size_t> n_max;
    std::vector<Sample> samples;

    std::size_t num_classes() const { return class_names.size(); }
    std::size_t count(Split s) const;
    std::vector<const Sample*> split_samples(Split s) const;

    // Class-name/label consistency, id uniqueness, finite visuals.
    void validate() const;
};

// Line-delimited structured text, one `sample` record per line; visual
// vectors inline as decimal reals or as indexes into a float32 sidecar.
// See docs/FORMATS.md for the exact grammar. The loader is strict: unknown
// fields are rejected.
DatasetManifest load_manifest(const std::string& path);

// With `sidecar` non-empty, visual vectors go to that file (path taken
// relative to the manifest) as little-endian float32 rows and the manifest
// references them by index.
void save_manifest(const DatasetManifest& manifest, const std::string& path,
                   const std::string& sidecar = "");

std::string manifest_text(const DatasetManifest& manifest);

// Synthetic datasets for the acceptance experiments. All three draw words
// from the bundled fixture embedding table and are pure functions of their
// arguments.

// Well-separated visual clusters (>= 6 sigma apart) plus one class keyword
// per sample: any correct trainer must drive train accuracy to ~100%.
DatasetManifest synth_overfit(std::size_t k, std::size_t per_class, std::size_t v_dim,
                              std::uint64_t seed);

// All classes share one visual distribution; the label is carried only by
// which class keyword appears among the words (plus two lower-scored
// distractors from other classes' non-keyword vocabulary).
DatasetManifest synth_text_only(std::size_t k, std::size_t per_class, std::size_t v_dim,
                                std::uint64_t seed);

// Weak visual clusters (~1 sigma apart), one correct keyword plus
// `noise_words` keywords of other classes at comparable scores: average
// pooling is corrupted, attention can learn to downweight the noise.
DatasetManifest synth_noisy_words(std::size_t k, std::size_t per_class, std::size_t v_dim,
                                  std::size_t noise_words, std::uint64_t seed);

}  // namespace textfusion
