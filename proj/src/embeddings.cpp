#include "textfusion/embeddings.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "textfusion/errors.hpp"

namespace textfusion {

std::string normalize_token(std::string_view token) {
    std::size_t begin = 0, end = token.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(token[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(token[end - 1]))) --end;
    std::string out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i)
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(token[i]))));
    return out;
}

namespace {

double parse_component(const std::string& field, const std::string& origin,
                       std::size_t line_no) {
    const char* begin = field.c_str();
    char* parse_end = nullptr;
    const double value = std::strtod(begin, &parse_end);
    if (parse_end == begin || *parse_end != '\0') {
        std::ostringstream os;
        os << origin << ":" << line_no << ": non-numeric vector component '" << field
           << "'";
        throw FormatError(os.str());
    }
    return value;
}

}  // namespace

EmbeddingTable parse_embeddings(std::string_view text,
                                std::optional<std::size_t> expected_dim,
                                const std::string& origin) {
    EmbeddingTable table;
    table.dim = expected_dim.value_or(0);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool dim_fixed = expected_dim.has_value();
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) {
            if (pos > text.size()) break;
            continue;
        }
        std::istringstream fields{std::string(line)};
        std::string token;
        fields >> token;
        if (token.empty()) continue;
        Vec vector;
        std::string field;
        while (fields >> field) vector.push_back(parse_component(field, origin, line_no));
        if (vector.empty()) {
            std::ostringstream os;
            os << origin << ":" << line_no << ": token '" << token << "' has no vector";
            throw FormatError(os.str());
        }
        if (!dim_fixed) {
            table.dim = vector.size();
            dim_fixed = true;
        } else if (vector.size() != table.dim) {
            std::ostringstream os;
            os << origin << ":" << line_no << ": dimension " << vector.size()
               << " does not match table dimension " << table.dim;
            throw FormatError(os.str());
        }
        table.entries[normalize_token(token)] = std::move(vector);
    }
    return table;
}

EmbeddingTable load_embeddings(const std::string& path,
                               std::optional<std::size_t> expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_embeddings: cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("load_embeddings: read failure on '" + path + "'");
    return parse_embeddings(buffer.str(), expected_dim, path);
}

const Vec* lookup(const EmbeddingTable& table, std::string_view token) {
    const auto it = table.entries.find(normalize_token(token));
    return it == table.entries.end() ? nullptr : &it->second;
}

}  // namespace textfusion
