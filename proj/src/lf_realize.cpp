#include "logicloom/lf.hpp"
#include "logicloom/text.hpp"

namespace logicloom {

namespace {

std::string ordinal_word(const std::string& n) {
    auto cell = parse_cell(n);
    if (!cell.number) return n;
    long v = static_cast<long>(*cell.number);
    std::string suffix = "th";
    if (v % 100 < 11 || v % 100 > 13) {
        if (v % 10 == 1) suffix = "st";
        if (v % 10 == 2) suffix = "nd";
        if (v % 10 == 3) suffix = "rd";
    }
    return std::to_string(v) + suffix;
}

// Filter comparisons are phrased without comparative or superlative cue words
// so the keyword text classifier reads count sentences as count.
std::string filter_phrase(std::string_view op) {
    if (op == "eq") return "is";
    if (op == "not_eq") return "is not";
    if (op == "greater") return "is above";
    if (op == "less") return "is below";
    if (op == "greater_eq") return "is at least";
    if (op == "less_eq") return "is at most";
    return "is";
}

std::string majority_phrase(std::string_view op) {
    if (op == "eq") return "equal to";
    if (op == "not_eq") return "not equal to";
    if (op == "greater") return "above";
    if (op == "less") return "below";
    if (op == "greater_eq") return "of at least";
    if (op == "less_eq") return "of at most";
    return "equal to";
}

const std::string& arg_name(const LfNode& n, std::size_t i) {
    static const std::string empty;
    return i < n.args.size() ? n.args[i].name : empty;
}

std::string describe(const LfNode& n);

// Plural noun phrase for a view.
std::string describe_view(const LfNode& n) {
    if (n.is("all_rows")) return "rows";
    if (n.is_apply() && n.name.starts_with("filter_") && n.args.size() == 3) {
        std::string inner = describe_view(n.args[0]);
        std::string joiner = n.args[0].is("all_rows") ? " whose " : " and ";
        return inner + joiner + arg_name(n, 1) + " " + filter_phrase(std::string_view(n.name).substr(7)) + " " +
               arg_name(n, 2);
    }
    if ((n.is("argmax") || n.is("argmin")) && n.args.size() == 2) {
        return "the row with the " + std::string(n.is("argmax") ? "highest " : "lowest ") + arg_name(n, 1) +
               " among " + describe_view(n.args[0]);
    }
    if ((n.is("nth_argmax") || n.is("nth_argmin")) && n.args.size() == 3) {
        return "the row with the " + ordinal_word(arg_name(n, 2)) + (n.is("nth_argmax") ? " highest " : " lowest ") +
               arg_name(n, 1) + " among " + describe_view(n.args[0]);
    }
    return describe(n);
}

std::string describe(const LfNode& n) {
    if (n.is_literal()) return n.name;
    const std::string& f = n.name;
    auto a = [&](std::size_t i) { return i < n.args.size() ? describe(n.args[i]) : std::string{}; };
    auto v = [&](std::size_t i) { return i < n.args.size() ? describe_view(n.args[i]) : std::string{}; };
    if (f == "all_rows" || f.starts_with("filter_") || f.find("argm") != std::string::npos) return "the " + describe_view(n);
    if (f == "count") return "the number of " + v(0);
    if (f == "hop") return "the " + arg_name(n, 1) + " of " + v(0);
    if (f == "max") return "the highest " + arg_name(n, 1) + " among " + v(0);
    if (f == "min") return "the lowest " + arg_name(n, 1) + " among " + v(0);
    if (f == "sum") return "the total " + arg_name(n, 1) + " of " + v(0);
    if (f == "avg") return "the average " + arg_name(n, 1) + " of " + v(0);
    if (f == "nth_max") return "the " + ordinal_word(arg_name(n, 2)) + " highest " + arg_name(n, 1) + " among " + v(0);
    if (f == "nth_min") return "the " + ordinal_word(arg_name(n, 2)) + " lowest " + arg_name(n, 1) + " among " + v(0);
    if (f == "eq") return a(0) + " is " + a(1);
    if (f == "not_eq") return a(0) + " is not " + a(1);
    if (f == "round_eq") return a(0) + " is about " + a(1);
    if (f == "greater") return a(0) + " is higher than " + a(1);
    if (f == "less") return a(0) + " is lower than " + a(1);
    if (f == "diff") return "the difference between " + a(0) + " and " + a(1);
    if (f == "and") return a(0) + " , and " + a(1);
    if (f == "only") return "there is only one of the " + v(0);
    if (f.starts_with("all_") || f.starts_with("most_")) {
        bool all = f.starts_with("all_");
        return std::string(all ? "all of the " : "most of the ") + v(0) + " have " + arg_name(n, 1) + " " +
               majority_phrase(std::string_view(f).substr(f.find('_') + 1)) + " " + arg_name(n, 2);
    }
    std::string out = f;
    for (std::size_t i = 0; i < n.args.size(); ++i) out += " " + a(i);
    return out;
}

}  // namespace

std::string realize_template(const LfNode& ast, const Table& table) {
    const std::string& caption = table.caption().empty() ? table.id() : table.caption();
    std::string where = caption.empty() ? std::string("the table") : caption;
    if (ast.is("eq") && ast.args.size() == 2 && ast.args[0].is("count") && ast.args[0].args.size() == 1) {
        return "there are " + describe(ast.args[1]) + " " + describe_view(ast.args[0].args[0]) + " in " + where;
    }
    std::string body = describe(ast);
    return "in " + where + " , " + body;
}

}  // namespace logicloom
