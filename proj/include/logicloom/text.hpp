#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace logicloom {

using Tokens = std::vector<std::string>;

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
Tokens split_whitespace(std::string_view s);
std::string join(const Tokens& tokens, std::string_view sep = " ");

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual Tokens tokenize(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

/// Splits on whitespace; used for model inputs and length budgets.
class WhitespaceTokenizer final : public Tokenizer {
public:
    Tokens tokenize(std::string_view text) const override { return split_whitespace(text); }
    std::string name() const override { return "whitespace"; }
};

/// Lowercases and puts spaces around punctuation before splitting. Default for
/// the text metrics.
class MetricTokenizer final : public Tokenizer {
public:
    Tokens tokenize(std::string_view text) const override;
    std::string name() const override { return "metric"; }
};

/// "whitespace" or "metric"; throws InputError otherwise.
std::unique_ptr<Tokenizer> make_tokenizer(std::string_view name);

}  // namespace logicloom
