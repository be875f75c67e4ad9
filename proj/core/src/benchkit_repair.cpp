// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <regex>

#include "stagecraft/benchkit.hpp"
#include "text_util.hpp"

namespace stagecraft {
namespace {

enum class Tok { LBrace, RBrace, LBracket, RBracket, Colon, Comma, String, Scalar };

struct Token {
    Tok kind;
    std::size_t begin;
    std::size_t end;  // one past the last byte
};

// Splits text into structural tokens; whitespace and stray bytes are skipped but
// remain in the source, so passes rebuild by copying the gaps verbatim.
std::vector<Token> tokenize(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        switch (c) {
            case '{': out.push_back({Tok::LBrace, i, i + 1}); ++i; continue;
            case '}': out.push_back({Tok::RBrace, i, i + 1}); ++i; continue;
            case '[': out.push_back({Tok::LBracket, i, i + 1}); ++i; continue;
            case ']': out.push_back({Tok::RBracket, i, i + 1}); ++i; continue;
            case ':': out.push_back({Tok::Colon, i, i + 1}); ++i; continue;
            case ',': out.push_back({Tok::Comma, i, i + 1}); ++i; continue;
            default: break;
        }
        if (c == '"') {
            std::size_t j = i + 1;
            while (j < s.size() && s[j] != '"') j += (s[j] == '\\') ? 2 : 1;
            j = std::min(j + 1, s.size());
            out.push_back({Tok::String, i, j});
            i = j;
        } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '-' || s[j] == '+' ||
                                    s[j] == '.' || s[j] == '_')) {
                ++j;
            }
            out.push_back({Tok::Scalar, i, j});
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

bool ends_value(Tok k) { return k == Tok::RBrace || k == Tok::RBracket || k == Tok::String || k == Tok::Scalar; }
bool starts_value(Tok k) { return k == Tok::LBrace || k == Tok::LBracket || k == Tok::String || k == Tok::Scalar; }

// Applies a byte-level map outside double-quoted strings.
template <typename Fn>
std::string map_outside_strings(const std::string& s, Fn&& fn) {
    std::string out;
    out.reserve(s.size());
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            out += c;
            if (c == '\\' && i + 1 < s.size()) {
                out += s[++i];
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
            out += c;
            continue;
        }
        fn(s, i, out);
    }
    return out;
}

std::string extract_payload(const std::string& s, int& edits) {
    std::string text = s;
    static const std::regex fence(R"(```[A-Za-z]*)");
    std::string unfenced = std::regex_replace(text, fence, "");
    if (unfenced != text) {
        ++edits;
        text = unfenced;
    }
    const auto first = text.find('{');
    if (first == std::string::npos) return text;
    const auto last = text.rfind('}');
    const std::size_t stop = (last == std::string::npos || last < first) ? text.size() : last + 1;
    if (!detail::trim(text.substr(0, first)).empty()) ++edits;
    if (!detail::trim(text.substr(stop)).empty()) ++edits;
    return text.substr(first, stop - first);
}

std::string normalize_punctuation(const std::string& s, int& edits) {
    static const std::vector<std::pair<std::string, std::string>> table{
        {"\xEF\xBC\x8C", ","}, {"\xEF\xBC\x9A", ":"}, {"\xE2\x80\x9C", "\""}, {"\xE2\x80\x9D", "\""},
        {"\xE2\x80\x98", "'"}, {"\xE2\x80\x99", "'"}, {"\xE3\x80\x90", "["}, {"\xE3\x80\x91", "]"},
        {"\xEF\xBC\x88", "("}, {"\xEF\xBC\x89", ")"}, {"\xEF\xBC\xBB", "["}, {"\xEF\xBC\xBD", "]"},
        {"\xEF\xBD\x9B", "{"}, {"\xEF\xBD\x9D", "}"}, {"\xE3\x80\x82", "."}, {"\xE3\x80\x81", ","},
    };
    std::string text = s;
    for (const auto& [from, to] : table) {
        std::size_t pos = 0;
        while ((pos = text.find(from, pos)) != std::string::npos) {
            text.replace(pos, from.size(), to);
            pos += to.size();
            ++edits;
        }
    }
    // Single-quoted strings outside JSON strings become double-quoted ones.
    std::string out;
    bool in_double = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_double) {
            out += c;
            if (c == '\\' && i + 1 < text.size()) {
                out += text[++i];
            } else if (c == '"') {
                in_double = false;
            }
        } else if (c == '"') {
            in_double = true;
            out += c;
        } else if (c == '\'') {
            std::size_t j = i + 1;
            std::string body;
            while (j < text.size() && text[j] != '\'') {
                if (text[j] == '"') body += '\\';
                body += text[j++];
            }
            out += '"' + body + '"';
            ++edits;
            i = std::min(j, text.size());
        } else {
            out += c;
        }
    }
    return out;
}

std::string tuples_to_lists(const std::string& s, int& edits) {
    return map_outside_strings(s, [&](const std::string& src, std::size_t i, std::string& out) {
        const char c = src[i];
        if (c == '(' || c == ')') {
            out += (c == '(') ? '[' : ']';
            ++edits;
        } else {
            out += c;
        }
    });
}

std::string balance_brackets(const std::string& s, int& edits) {
    const auto toks = tokenize(s);
    std::string out;
    std::vector<Tok> stack;
    std::size_t cursor = 0;
    auto closer = [](Tok open) { return open == Tok::LBrace ? '}' : ']'; };
    for (std::size_t k = 0; k < toks.size(); ++k) {
        const Token& t = toks[k];
        out.append(s, cursor, t.begin - cursor);
        cursor = t.end;
        if (t.kind == Tok::String && k + 1 < toks.size() && toks[k + 1].kind == Tok::Colon) {
            // A key can only live in an object: close any lists left open around it.
            while (!stack.empty() && stack.back() == Tok::LBracket) {
                out += ']';
                stack.pop_back();
                ++edits;
            }
        }
        if (t.kind == Tok::LBrace || t.kind == Tok::LBracket) {
            stack.push_back(t.kind);
        } else if (t.kind == Tok::RBrace || t.kind == Tok::RBracket) {
            const Tok want = t.kind == Tok::RBrace ? Tok::LBrace : Tok::LBracket;
            const bool present = std::find(stack.begin(), stack.end(), want) != stack.end();
            if (!present) {
                ++edits;  // stray closer: drop it
                continue;
            }
            while (stack.back() != want) {
                out += closer(stack.back());
                stack.pop_back();
                ++edits;
            }
            stack.pop_back();
        }
        out.append(s, t.begin, t.end - t.begin);
    }
    out.append(s, cursor, std::string::npos);
    while (!stack.empty()) {
        out += closer(stack.back());
        stack.pop_back();
        ++edits;
    }
    return out;
}

std::string insert_missing_commas(const std::string& s, int& edits) {
    const auto toks = tokenize(s);
    std::string out;
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < toks.size(); ++k) {
        const Token& t = toks[k];
        out.append(s, cursor, t.begin - cursor);
        if (k > 0 && ends_value(toks[k - 1].kind) && starts_value(t.kind)) {
            // Insert right after the previous token so surrounding whitespace is kept.
            const std::size_t gap = t.begin - toks[k - 1].end;
            out.insert(out.size() - gap, ",");
            ++edits;
        }
        out.append(s, t.begin, t.end - t.begin);
        cursor = t.end;
    }
    out.append(s, cursor, std::string::npos);
    return out;
}

std::string strip_trailing_commas(const std::string& s, int& edits) {
    const auto toks = tokenize(s);
    std::string out;
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < toks.size(); ++k) {
        const Token& t = toks[k];
        out.append(s, cursor, t.begin - cursor);
        cursor = t.end;
        const bool dangling = t.kind == Tok::Comma && k + 1 < toks.size() &&
                              (toks[k + 1].kind == Tok::RBrace || toks[k + 1].kind == Tok::RBracket);
        if (dangling) {
            ++edits;
            continue;
        }
        out.append(s, t.begin, t.end - t.begin);
    }
    out.append(s, cursor, std::string::npos);
    return out;
}

std::string python_literals(const std::string& s, int& edits) {
    const auto toks = tokenize(s);
    std::string out;
    std::size_t cursor = 0;
    for (const Token& t : toks) {
        out.append(s, cursor, t.begin - cursor);
        cursor = t.end;
        const std::string word = s.substr(t.begin, t.end - t.begin);
        if (t.kind == Tok::Scalar && (word == "None" || word == "True" || word == "False")) {
            out += word == "None" ? "\"None\"" : (word == "True" ? "true" : "false");
            ++edits;
        } else {
            out += word;
        }
    }
    out.append(s, cursor, std::string::npos);
    return out;
}

// Re-reads a JSON value that arrived as a quoted string.
bool reparse_string(nlohmann::ordered_json& v, int& edits) {
    if (!v.is_string()) return false;
    auto parsed = nlohmann::ordered_json::parse(v.get<std::string>(), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) return false;
    v = std::move(parsed);
    ++edits;
    return true;
}

void number_from_string(nlohmann::ordered_json& v, int& edits) {
    if (!v.is_string()) return;
    const std::string text = detail::trim(v.get<std::string>());
    static const std::regex integer(R"(-?\d+)");
    if (std::regex_match(text, integer)) {
        v = std::stoi(text);
        ++edits;
    }
}

void single_string(nlohmann::ordered_json& v, int& edits) {
    if (v.is_array() && v.size() == 1 && v[0].is_string()) {
        nlohmann::ordered_json inner = v[0];
        v = std::move(inner);
        ++edits;
    }
}

void disambiguate_structure(nlohmann::ordered_json& d, int& edits) {
    if (!d.is_object()) return;
    if (d.contains("characters") && d["characters"].is_string()) {
        nlohmann::ordered_json list = nlohmann::ordered_json::array();
        const std::string text = d["characters"].get<std::string>();
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto comma = text.find(',', start);
            const std::string item = detail::trim(text.substr(start, comma - start));
            if (!item.empty()) list.push_back(item);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        d["characters"] = std::move(list);
        ++edits;
    }
    for (auto& [key, turn] : d.items()) {
        if (key.rfind("turn ", 0) != 0 || !turn.is_object()) continue;
        for (const char* field : {"caption", "background"}) {
            if (turn.contains(field)) single_string(turn[field], edits);
        }
        if (turn.contains("negative")) {
            auto& neg = turn["negative"];
            if (neg.is_null() || (neg.is_array() && neg.empty())) {
                neg = "None";
                ++edits;
            } else if (neg.is_array() && std::all_of(neg.begin(), neg.end(), [](const auto& x) { return x.is_string(); })) {
                std::string joined;
                for (const auto& x : neg) joined += (joined.empty() ? "" : ", ") + x.template get<std::string>();
                neg = joined;
                ++edits;
            }
        }
        if (!turn.contains("objects")) continue;
        auto& objects = turn["objects"];
        reparse_string(objects, edits);
        if (!objects.is_array()) continue;
        for (auto& o : objects) {
            reparse_string(o, edits);
            if (!o.is_array() || o.size() != 3) continue;
            reparse_string(o[1], edits);
            if (o[1].is_array()) {
                for (auto& coord : o[1]) number_from_string(coord, edits);
            }
            number_from_string(o[2], edits);
        }
    }
}

bool is_dialogue_key(const std::string& key) {
    static const std::regex pattern(R"(dialogue\s*\d+)", std::regex::icase);
    return std::regex_match(key, pattern);
}

}  // namespace

int RepairResult::total_edits() const {
    int n = 0;
    for (const auto& p : passes) n += p.edits;
    return n;
}

RepairResult repair_format(const std::string& raw, const RepairOptions& options) {
    using PassFn = std::string (*)(const std::string&, int&);
    struct Pass {
        const char* name;
        bool enabled;
        PassFn fn;
    };
    const Pass passes[] = {
        {"extract_payload", options.extract_payload, extract_payload},
        {"normalize_punctuation", options.normalize_punctuation, normalize_punctuation},
        {"tuples_to_lists", options.tuples_to_lists, tuples_to_lists},
        {"balance_brackets", options.balance_brackets, balance_brackets},
        {"insert_missing_commas", options.insert_missing_commas, insert_missing_commas},
        {"strip_trailing_commas", options.strip_trailing_commas, strip_trailing_commas},
        {"disambiguate_text_lists", options.disambiguate_text_lists, python_literals},
    };
    RepairResult result;
    std::string text = raw;
    for (const auto& pass : passes) {
        RepairPassReport report{pass.name, pass.enabled, 0};
        if (pass.enabled) text = pass.fn(text, report.edits);
        result.passes.push_back(report);
    }
    auto parsed = nlohmann::ordered_json::parse(text, nullptr, false);
    if (parsed.is_discarded()) {
        throw RepairFailure("dialogue text is not valid JSON after repair", result.passes);
    }
    if (parsed.is_object() && parsed.size() == 1 && is_dialogue_key(parsed.begin().key())) {
        nlohmann::ordered_json inner = parsed.begin().value();
        parsed = std::move(inner);
        if (options.extract_payload) ++result.passes[0].edits;
    }
    if (options.disambiguate_text_lists) disambiguate_structure(parsed, result.passes.back().edits);
    try {
        result.dialogue = dialogue_from_json(parsed);
    } catch (const ParseError& ex) {
        throw RepairFailure(std::string("dialogue does not match the schema after repair: ") + ex.what(),
                            result.passes);
    }
    return result;
}

}  // namespace stagecraft
