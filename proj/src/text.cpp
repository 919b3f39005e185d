#include "logicloom/text.hpp"

#include <cctype>

#include "logicloom/error.hpp"

namespace logicloom {

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

Tokens split_whitespace(std::string_view s) {
    Tokens out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::string join(const Tokens& tokens, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += sep;
        out += tokens[i];
    }
    return out;
}

Tokens MetricTokenizer::tokenize(std::string_view text) const {
    std::string spaced;
    spaced.reserve(text.size() * 2);
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        if (std::ispunct(u) && c != '\'' && c != '-') {
            spaced += ' ';
            spaced += c;
            spaced += ' ';
        } else {
            spaced += static_cast<char>(std::tolower(u));
        }
    }
    return split_whitespace(spaced);
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view name) {
    if (name == "whitespace") return std::make_unique<WhitespaceTokenizer>();
    if (name == "metric") return std::make_unique<MetricTokenizer>();
    throw InputError("unknown tokenizer '" + std::string(name) + "'");
}

}  // namespace logicloom
