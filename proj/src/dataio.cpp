#include "textfusion/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "textfusion/checkpoint.hpp"
#include "textfusion/errors.hpp"
#include "textfusion/fixture.hpp"
#include "textfusion/rng.hpp"

namespace textfusion {

const char* split_name(Split s) { return s == Split::train ? "train" : "test"; }

std::size_t DatasetManifest::count(Split s) const {
    std::size_t n = 0;
    for (const Sample& sample : samples) n += sample.split == s ? 1 : 0;
    return n;
}

std::vector<const Sample*> DatasetManifest::split_samples(Split s) const {
    std::vector<const Sample*> out;
    for (const Sample& sample : samples)
        if (sample.split == s) out.push_back(&sample);
    return out;
}

namespace {

constexpr const char* kMagic = "textfusion-manifest 1";

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double_field(const std::string& field, const std::string& context) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw FormatError(context + ": bad numeric value '" + field + "'");
    return v;
}

std::size_t parse_count_field(const std::string& field, const std::string& context) {
    if (field.empty() ||
        !std::all_of(field.begin(), field.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        throw FormatError(context + ": bad count '" + field + "'");
    return static_cast<std::size_t>(std::strtoull(field.c_str(), nullptr, 10));
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

bool has_any_of(const std::string& s, const char* banned) {
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) return true;
        if (std::strchr(banned, c)) return true;
    }
    return false;
}

void check_token(const std::string& value, const char* banned, const std::string& what) {
    if (value.empty()) throw FormatError(what + " must not be empty");
    if (has_any_of(value, banned))
        throw FormatError(what + " '" + value + "' contains whitespace or a reserved "
                          "character");
}

// Explicit little-endian float32 I/O, independent of host byte order.
void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32(out, bits);
}

float get_f32(const unsigned char* p) {
    const std::uint32_t bits = get_u32(p);
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

struct SidecarData {
    std::size_t count = 0;
    std::size_t dim = 0;
    std::vector<float> values;
};

SidecarData read_sidecar(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open sidecar '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    if (bytes.size() < 8)
        throw FormatError("sidecar '" + path + "' shorter than its 8-byte header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    SidecarData data;
    data.count = get_u32(p);
    data.dim = get_u32(p + 4);
    const std::size_t expected = 8 + 4 * data.count * data.dim;
    if (bytes.size() != expected)
        throw FormatError("sidecar '" + path + "': size " + std::to_string(bytes.size()) +
                          " does not match header (" + std::to_string(data.count) + " x " +
                          std::to_string(data.dim) + ")");
    data.values.resize(data.count * data.dim);
    for (std::size_t i = 0; i < data.values.size(); ++i)
        data.values[i] = get_f32(p + 8 + 4 * i);
    return data;
}

}  // namespace

void DatasetManifest::validate() const {
    if (class_names.empty()) throw FormatError("manifest: class list is empty");
    if (v_dim < 1) throw FormatError("manifest: v_dim must be at least 1");
    std::unordered_set<std::string> seen_classes;
    for (const std::string& name : class_names) {
        check_token(name, ",=", "class name");
        if (!seen_classes.insert(name).second)
            throw FormatError("manifest: duplicate class '" + name + "'");
    }
    if (n_max && *n_max < 1) throw FormatError("manifest: n_max must be at least 1");
    std::unordered_set<std::string> seen_ids;
    for (const Sample& s : samples) {
        const std::string context = "sample '" + s.id + "'";
        check_token(s.id, ",=", "sample id");
        if (!seen_ids.insert(s.id).second)
            throw FormatError("manifest: duplicate sample id '" + s.id + "'");
        if (s.label >= class_names.size())
            throw FormatError(context + ": label " + std::to_string(s.label) + " vs " +
                              std::to_string(class_names.size()) + " classes");
        if (s.visual.size() != v_dim)
            throw FormatError(context + ": visual length " +
                              std::to_string(s.visual.size()) + " vs declared v_dim " +
                              std::to_string(v_dim));
        for (double v : s.visual)
            if (!std::isfinite(v))
                throw FormatError(context + ": non-finite visual component");
        for (const SpottedWord& w : s.words) {
            check_token(w.text, ",=:", context + ": word");
            if (!std::isfinite(w.score))
                throw FormatError(context + ": non-finite score for word '" + w.text + "'");
        }
    }
}

std::string manifest_text(const DatasetManifest& manifest) {
    manifest.validate();
    std::ostringstream os;
    os << kMagic << '\n';
    os << "classes=";
    for (std::size_t i = 0; i < manifest.class_names.size(); ++i) {
        if (i) os << ',';
        os << manifest.class_names[i];
    }
    os << '\n';
    os << "v_dim=" << manifest.v_dim << '\n';
    if (manifest.n_max) os << "n_max=" << *manifest.n_max << '\n';
    for (const Sample& s : manifest.samples) {
        os << "sample id=" << s.id << " split=" << split_name(s.split)
           << " label=" << manifest.class_names[s.label] << " words=";
        for (std::size_t i = 0; i < s.words.size(); ++i) {
            if (i) os << ',';
            os << s.words[i].text << ':' << format_double(s.words[i].score);
        }
        os << " visual=";
        for (std::size_t i = 0; i < s.visual.size(); ++i) {
            if (i) os << ',';
            os << format_double(s.visual[i]);
        }
        os << '\n';
    }
    return os.str();
}

void save_manifest(const DatasetManifest& manifest, const std::string& path,
                   const std::string& sidecar) {
    if (sidecar.empty()) {
        atomic_write_file(path, manifest_text(manifest));
        return;
    }
    manifest.validate();
    check_token(sidecar, ",=", "sidecar path");

    std::string binary;
    put_u32(binary, static_cast<std::uint32_t>(manifest.samples.size()));
    put_u32(binary, static_cast<std::uint32_t>(manifest.v_dim));
    for (const Sample& s : manifest.samples)
        for (double v : s.visual) put_f32(binary, static_cast<float>(v));

    std::ostringstream os;
    os << kMagic << '\n';
    os << "classes=";
    for (std::size_t i = 0; i < manifest.class_names.size(); ++i) {
        if (i) os << ',';
        os << manifest.class_names[i];
    }
    os << '\n';
    os << "v_dim=" << manifest.v_dim << '\n';
    if (manifest.n_max) os << "n_max=" << *manifest.n_max << '\n';
    os << "sidecar=" << sidecar << '\n';
    for (std::size_t idx = 0; idx < manifest.samples.size(); ++idx) {
        const Sample& s = manifest.samples[idx];
        os << "sample id=" << s.id << " split=" << split_name(s.split)
           << " label=" << manifest.class_names[s.label] << " words=";
        for (std::size_t i = 0; i < s.words.size(); ++i) {
            if (i) os << ',';
            os << s.words[i].text << ':' << format_double(s.words[i].score);
        }
        os << " visual=@" << idx << '\n';
    }

    const std::filesystem::path dir = std::filesystem::path(path).parent_path();
    atomic_write_file((dir / sidecar).string(), binary);
    atomic_write_file(path, os.str());
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_manifest: cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (in.bad()) throw IoError("load_manifest: read failure on '" + path + "'");
    if (lines.empty() || lines[0] != kMagic)
        throw FormatError(path + ": not a textfusion manifest");

    DatasetManifest manifest;
    std::string sidecar;
    std::size_t line_no = 1;
    std::size_t i = 1;
    bool have_classes = false, have_vdim = false;
    for (; i < lines.size(); ++i) {
        line_no = i + 1;
        const std::string& l = lines[i];
        if (l.empty()) continue;
        if (l.rfind("sample ", 0) == 0) break;
        const std::size_t eq = l.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": expected key=value header line");
        const std::string key = l.substr(0, eq);
        const std::string value = l.substr(eq + 1);
        if (key == "classes") {
            manifest.class_names = split_on(value, ',');
            have_classes = true;
        } else if (key == "v_dim") {
            manifest.v_dim = parse_count_field(value, path + ":" + std::to_string(line_no));
            have_vdim = true;
        } else if (key == "n_max") {
            manifest.n_max = parse_count_field(value, path + ":" + std::to_string(line_no));
        } else if (key == "sidecar") {
            sidecar = value;
        } else {
            throw FormatError(path + ":" + std::to_string(line_no) + ": unknown header '" +
                              key + "'");
        }
    }
    if (!have_classes || !have_vdim)
        throw FormatError(path + ": missing required header (classes, v_dim)");

    std::vector<std::optional<std::size_t>> sidecar_refs;
    for (; i < lines.size(); ++i) {
        line_no = i + 1;
        const std::string& l = lines[i];
        if (l.empty()) continue;
        const std::string context = path + ":" + std::to_string(line_no);
        if (l.rfind("sample ", 0) != 0)
            throw FormatError(context + ": expected a sample record");

        Sample s;
        std::optional<std::size_t> sidecar_ref;
        bool have_id = false, have_split = false, have_label = false, have_words = false,
             have_visual = false;
        std::istringstream fields(l.substr(7));
        std::string field;
        while (fields >> field) {
            const std::size_t eq = field.find('=');
            if (eq == std::string::npos)
                throw FormatError(context + ": field '" + field + "' is not key=value");
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            if (key == "id") {
                s.id = value;
                have_id = true;
            } else if (key == "split") {
                if (value == "train") s.split = Split::train;
                else if (value == "test") s.split = Split::test;
                else throw FormatError(context + ": unknown split '" + value + "'");
                have_split = true;
            } else if (key == "label") {
                const auto it = std::find(manifest.class_names.begin(),
                                          manifest.class_names.end(), value);
                if (it == manifest.class_names.end())
                    throw FormatError(context + ": label '" + value +
                                      "' is not a declared class");
                s.label = static_cast<std::size_t>(it - manifest.class_names.begin());
                have_label = true;
            } else if (key == "words") {
                have_words = true;
                if (value.empty()) continue;
                for (const std::string& entry : split_on(value, ',')) {
                    const std::size_t colon = entry.rfind(':');
                    if (colon == std::string::npos)
                        throw FormatError(context + ": word entry '" + entry +
                                          "' is not text:score");
                    SpottedWord w;
                    w.text = entry.substr(0, colon);
                    w.score = parse_double_field(entry.substr(colon + 1), context);
                    s.words.push_back(std::move(w));
                }
            } else if (key == "visual") {
                have_visual = true;
                if (!value.empty() && value[0] == '@') {
                    sidecar_ref = parse_count_field(value.substr(1), context);
                } else {
                    for (const std::string& component : split_on(value, ','))
                        s.visual.push_back(parse_double_field(component, context));
                }
            } else {
                throw FormatError(context + ": unknown field '" + key + "'");
            }
        }
        if (!have_id || !have_split || !have_label || !have_words || !have_visual)
            throw FormatError(context +
                              ": record needs id, split, label, words and visual");
        sidecar_refs.push_back(sidecar_ref);
        manifest.samples.push_back(std::move(s));
    }

    const bool any_ref = std::any_of(sidecar_refs.begin(), sidecar_refs.end(),
                                     [](const auto& r) { return r.has_value(); });
    if (any_ref) {
        if (sidecar.empty())
            throw FormatError(path + ": sample references a sidecar but none is declared");
        const std::filesystem::path dir = std::filesystem::path(path).parent_path();
        const SidecarData data = read_sidecar((dir / sidecar).string());
        if (data.count != manifest.samples.size())
            throw FormatError(path + ": sidecar holds " + std::to_string(data.count) +
                              " vectors for " + std::to_string(manifest.samples.size()) +
                              " samples");
        if (data.dim != manifest.v_dim)
            throw FormatError(path + ": sidecar dim " + std::to_string(data.dim) +
                              " vs declared v_dim " + std::to_string(manifest.v_dim));
        for (std::size_t idx = 0; idx < manifest.samples.size(); ++idx) {
            if (!sidecar_refs[idx]) continue;
            const std::size_t row = *sidecar_refs[idx];
            if (row >= data.count)
                throw FormatError(path + ": sample '" + manifest.samples[idx].id +
                                  "' references sidecar row " + std::to_string(row) +
                                  " beyond " + std::to_string(data.count));
            Vec& visual = manifest.samples[idx].visual;
            visual.resize(data.dim);
            for (std::size_t d = 0; d < data.dim; ++d)
                visual[d] = static_cast<double>(data.values[row * data.dim + d]);
        }
    }

    manifest.validate();
    return manifest;
}

namespace {

void check_synth_args(std::size_t k, std::size_t per_class, std::size_t v_dim) {
    if (k < 2) throw UsageError("synth: need at least 2 classes");
    if (k > max_synth_classes())
        throw UsageError("synth: at most " + std::to_string(max_synth_classes()) +
                         " classes available, got " + std::to_string(k));
    if (per_class < 2) throw UsageError("synth: need at least 2 samples per class");
    if (v_dim < 1) throw UsageError("synth: v_dim must be at least 1");
}

Vec class_center(std::size_t cls, std::size_t v_dim, double magnitude) {
    Vec center(v_dim, 0.0);
    center[cls % v_dim] =
        magnitude * (1.0 + static_cast<double>(cls / v_dim));
    return center;
}

Vec gaussian(const Vec& center, Rng& rng) {
    Vec v(center.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = center[i] + rng.normal();
    return v;
}

std::string sample_id(const char* prefix, const std::string& cls, std::size_t index) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04zu", index);
    return std::string(prefix) + "-" + cls + "-" + buf;
}

std::size_t test_count(std::size_t per_class) {
    return std::max<std::size_t>(1, per_class / 4);
}

}  // namespace

DatasetManifest synth_overfit(std::size_t k, std::size_t per_class, std::size_t v_dim,
                              std::uint64_t seed) {
    check_synth_args(k, per_class, v_dim);
    DatasetManifest m;
    m.v_dim = v_dim;
    m.n_max = 1;
    for (std::size_t c = 0; c < k; ++c) m.class_names.push_back(synth_keywords()[c]);

    Rng rng(mix_seed(seed, 11));
    const std::size_t n_test = test_count(per_class);
    for (std::size_t c = 0; c < k; ++c) {
        const Vec center = class_center(c, v_dim, 8.0);
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s;
            s.id = sample_id("ov", m.class_names[c], i);
            s.split = i < per_class - n_test ? Split::train : Split::test;
            s.label = c;
            s.visual = gaussian(center, rng);
            s.words.push_back({synth_keywords()[c], rng.uniform(0.5, 1.0)});
            m.samples.push_back(std::move(s));
        }
    }
    return m;
}

DatasetManifest synth_text_only(std::size_t k, std::size_t per_class, std::size_t v_dim,
                                std::uint64_t seed) {
    check_synth_args(k, per_class, v_dim);
    DatasetManifest m;
    m.v_dim = v_dim;
    m.n_max = 3;
    for (std::size_t c = 0; c < k; ++c) m.class_names.push_back(synth_keywords()[c]);

    Rng rng(mix_seed(seed, 12));
    const Vec origin(v_dim, 0.0);
    const std::size_t n_test = test_count(per_class);
    for (std::size_t c = 0; c < k; ++c) {
        // Non-keyword vocabulary of the other classes.
        std::vector<const std::string*> pool;
        for (std::size_t other = 0; other < k; ++other) {
            if (other == c) continue;
            for (const std::string& w : synth_extras(other)) pool.push_back(&w);
        }
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s;
            s.id = sample_id("to", m.class_names[c], i);
            s.split = i < per_class - n_test ? Split::train : Split::test;
            s.label = c;
            s.visual = gaussian(origin, rng);
            s.words.push_back({synth_keywords()[c], rng.uniform(0.5, 1.0)});
            std::size_t first = rng.below(pool.size());
            std::size_t second = rng.below(pool.size() - 1);
            if (second >= first) ++second;
            s.words.push_back({*pool[first], rng.uniform(0.3, 0.9)});
            s.words.push_back({*pool[second], rng.uniform(0.3, 0.9)});
            m.samples.push_back(std::move(s));
        }
    }
    return m;
}

DatasetManifest synth_noisy_words(std::size_t k, std::size_t per_class, std::size_t v_dim,
                                  std::size_t noise_words, std::uint64_t seed) {
    check_synth_args(k, per_class, v_dim);
    DatasetManifest m;
    m.v_dim = v_dim;
    m.n_max = 1 + noise_words;
    for (std::size_t c = 0; c < k; ++c) m.class_names.push_back(synth_keywords()[c]);

    Rng rng(mix_seed(seed, 13));
    const std::size_t n_test = test_count(per_class);
    for (std::size_t c = 0; c < k; ++c) {
        const Vec center = class_center(c, v_dim, 1.0);
        std::vector<std::size_t> others;
        for (std::size_t other = 0; other < k; ++other)
            if (other != c) others.push_back(other);
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s;
            s.id = sample_id("nw", m.class_names[c], i);
            s.split = i < per_class - n_test ? Split::train : Split::test;
            s.label = c;
            s.visual = gaussian(center, rng);
            s.words.push_back({synth_keywords()[c], rng.uniform(0.5, 1.0)});
            if (noise_words <= others.size()) {
                // Distinct misleading keywords.
                std::vector<std::size_t> picks = others;
                rng.shuffle(picks);
                for (std::size_t nw = 0; nw < noise_words; ++nw)
                    s.words.push_back(
                        {synth_keywords()[picks[nw]], rng.uniform(0.3, 0.9)});
            } else {
                for (std::size_t nw = 0; nw < noise_words; ++nw)
                    s.words.push_back({synth_keywords()[others[rng.below(others.size())]],
                                       rng.uniform(0.3, 0.9)});
            }
            m.samples.push_back(std::move(s));
        }
    }
    return m;
}

}  // namespace textfusion
