#include "textfusion/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "textfusion/errors.hpp"

namespace textfusion {

namespace {

constexpr const char* kMagic = "textfusion-checkpoint 1";

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_double(const std::string& field, const std::string& origin,
                    std::size_t line_no) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw FormatError(origin + ":" + std::to_string(line_no) +
                          ": bad numeric field '" + field + "'");
    return v;
}

void write_values(std::ostream& os, const double* data, std::size_t size) {
    for (std::size_t i = 0; i < size; ++i) {
        if (i) os << ' ';
        os << hex_double(data[i]);
    }
    os << '\n';
}

struct LineReader {
    std::istringstream in;
    std::string origin;
    std::size_t line_no = 0;

    LineReader(const std::string& text, std::string origin_)
        : in(text), origin(std::move(origin_)) {}

    std::string next() {
        std::string line;
        if (!std::getline(in, line))
            throw FormatError(origin + ": unexpected end of checkpoint at line " +
                              std::to_string(line_no + 1));
        ++line_no;
        return line;
    }
};

void read_values(LineReader& reader, double* data, std::size_t size) {
    const std::string line = reader.next();
    std::istringstream fields(line);
    std::string field;
    for (std::size_t i = 0; i < size; ++i) {
        if (!(fields >> field))
            throw FormatError(reader.origin + ":" + std::to_string(reader.line_no) +
                              ": expected " + std::to_string(size) + " values");
        data[i] = parse_double(field, reader.origin, reader.line_no);
    }
    if (fields >> field)
        throw FormatError(reader.origin + ":" + std::to_string(reader.line_no) +
                          ": trailing values (expected " + std::to_string(size) + ")");
}

struct NamedTensor {
    std::string name;
    double* data;
    std::size_t rows;
    std::size_t cols;  // 0 marks a vector
};

std::vector<NamedTensor> tensor_table(ModelParams& p) {
    std::vector<NamedTensor> t;
    auto mat = [&](const char* name, DenseMatrix& m) {
        t.push_back({name, m.data.data(), m.rows, m.cols});
    };
    auto vec = [&](const char* name, Vec& v) {
        t.push_back({name, v.data(), v.size(), 0});
    };
    mat("attention.U", p.attention.u);
    mat("proj.W", p.proj.weight);
    vec("proj.b", p.proj.bias);
    vec("bn_visual.gamma", p.bn_visual.gamma);
    vec("bn_visual.beta", p.bn_visual.beta);
    vec("bn_visual.running_mean", p.bn_visual.running_mean);
    vec("bn_visual.running_var", p.bn_visual.running_var);
    vec("bn_text.gamma", p.bn_text.gamma);
    vec("bn_text.beta", p.bn_text.beta);
    vec("bn_text.running_mean", p.bn_text.running_mean);
    vec("bn_text.running_var", p.bn_text.running_var);
    mat("head_fused.W", p.head_fused.weight);
    vec("head_fused.b", p.head_fused.bias);
    mat("head_visual.W", p.head_visual.weight);
    vec("head_visual.b", p.head_visual.bias);
    mat("head_text.W", p.head_text.weight);
    vec("head_text.b", p.head_text.bias);
    return t;
}

}  // namespace

std::string checkpoint_text(const Model& model) {
    std::ostringstream os;
    os << kMagic << '\n';
    os << "v_dim " << model.config.v_dim << '\n';
    os << "t_dim " << model.config.t_dim << '\n';
    os << "fused_v_dim " << model.config.fused_v_dim << '\n';
    os << "num_classes " << model.config.num_classes << '\n';
    os << "seed " << model.config.seed << '\n';
    os << "beta " << hex_double(model.config.beta[0]) << ' '
       << hex_double(model.config.beta[1]) << ' ' << hex_double(model.config.beta[2])
       << '\n';
    os << "variant " << variant_name(model.variant) << '\n';
    os << "n_max " << model.n_max << '\n';
    os << "bn_epsilon " << hex_double(model.params.bn_visual.epsilon) << '\n';
    os << "bn_momentum " << hex_double(model.params.bn_visual.momentum) << '\n';
    ModelParams& p = const_cast<ModelParams&>(model.params);
    for (const NamedTensor& t : tensor_table(p)) {
        if (t.cols == 0) {
            os << "vector " << t.name << ' ' << t.rows << '\n';
            write_values(os, t.data, t.rows);
        } else {
            os << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
            for (std::size_t r = 0; r < t.rows; ++r)
                write_values(os, t.data + r * t.cols, t.cols);
        }
    }
    return os.str();
}

void atomic_write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write failure on '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
    }
}

void save_checkpoint(const Model& model, const std::string& path) {
    atomic_write_file(path, checkpoint_text(model));
}

Model parse_checkpoint(const std::string& text, const std::string& origin) {
    LineReader reader(text, origin);
    if (reader.next() != kMagic)
        throw FormatError(origin + ": not a textfusion checkpoint");

    auto expect_field = [&](const std::string& key) -> std::string {
        const std::string line = reader.next();
        if (line.rfind(key + " ", 0) != 0)
            throw FormatError(origin + ":" + std::to_string(reader.line_no) +
                              ": expected '" + key + "', got '" + line + "'");
        return line.substr(key.size() + 1);
    };
    auto parse_count = [&](const std::string& field) -> std::size_t {
        try {
            return static_cast<std::size_t>(std::stoull(field));
        } catch (const std::exception&) {
            throw FormatError(origin + ":" + std::to_string(reader.line_no) +
                              ": bad count '" + field + "'");
        }
    };

    Model model;
    model.config.v_dim = parse_count(expect_field("v_dim"));
    model.config.t_dim = parse_count(expect_field("t_dim"));
    model.config.fused_v_dim = parse_count(expect_field("fused_v_dim"));
    model.config.num_classes = parse_count(expect_field("num_classes"));
    model.config.seed = parse_count(expect_field("seed"));
    {
        std::istringstream fields(expect_field("beta"));
        std::string f;
        for (int i = 0; i < 3; ++i) {
            if (!(fields >> f))
                throw FormatError(origin + ": beta needs 3 values");
            model.config.beta[i] = parse_double(f, origin, reader.line_no);
        }
    }
    model.variant = parse_variant(expect_field("variant"));
    model.n_max = parse_count(expect_field("n_max"));
    const double epsilon = parse_double(expect_field("bn_epsilon"), origin, reader.line_no);
    const double momentum = parse_double(expect_field("bn_momentum"), origin, reader.line_no);

    model.config.validate();
    model.params = make_params(model.config);
    model.params.bn_visual.epsilon = epsilon;
    model.params.bn_visual.momentum = momentum;
    model.params.bn_text.epsilon = epsilon;
    model.params.bn_text.momentum = momentum;

    for (const NamedTensor& t : tensor_table(model.params)) {
        const std::string line = reader.next();
        std::istringstream fields(line);
        std::string kind, name;
        fields >> kind >> name;
        if (name != t.name)
            throw FormatError(origin + ":" + std::to_string(reader.line_no) +
                              ": expected tensor '" + t.name + "', got '" + name + "'");
        if (t.cols == 0) {
            if (kind != "vector")
                throw FormatError(origin + ": '" + t.name + "' must be a vector");
            std::string len;
            fields >> len;
            if (parse_count(len) != t.rows)
                throw FormatError(origin + ": '" + t.name + "' length " + len +
                                  " does not match configured " + std::to_string(t.rows));
            read_values(reader, t.data, t.rows);
        } else {
            if (kind != "tensor")
                throw FormatError(origin + ": '" + t.name + "' must be a tensor");
            std::string r, c;
            fields >> r >> c;
            if (parse_count(r) != t.rows || parse_count(c) != t.cols)
                throw FormatError(origin + ": '" + t.name + "' shape " + r + "x" + c +
                                  " does not match configured " + std::to_string(t.rows) +
                                  "x" + std::to_string(t.cols));
            for (std::size_t row = 0; row < t.rows; ++row)
                read_values(reader, t.data + row * t.cols, t.cols);
        }
    }
    return model;
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("load_checkpoint: read failure on '" + path + "'");
    return parse_checkpoint(buffer.str(), path);
}

}  // namespace textfusion
