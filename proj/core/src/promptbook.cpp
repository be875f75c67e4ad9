// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/promptbook.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <utility>

#include "stagecraft/errors.hpp"
#include "stagecraft/layout.hpp"
#include "text_util.hpp"

namespace stagecraft {

const char* to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::OutOfBounds: return "OUT_OF_BOUNDS";
        case ViolationKind::Overlap: return "OVERLAP";
        case ViolationKind::BackgroundLeak: return "BACKGROUND_LEAK";
        case ViolationKind::BadId: return "BAD_ID";
        case ViolationKind::EmptyScene: return "EMPTY_SCENE";
    }
    return "UNKNOWN";
}

namespace {

class Cursor {
public:
    explicit Cursor(std::string_view text, std::size_t pos = 0) : text_(text), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ >= text_.size(); }
    char peek() const { return done() ? '\0' : text_[pos_]; }

    void skip_ws() {
        while (!done() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    void expect(char ch, const char* what) {
        skip_ws();
        if (peek() != ch) {
            throw ParseError(std::string("expected ") + what, pos_);
        }
        ++pos_;
    }

    bool accept(char ch) {
        skip_ws();
        if (peek() == ch) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string quoted() {
        skip_ws();
        const char quote = peek();
        if (quote != '"' && quote != '\'') {
            throw ParseError("expected a quoted character prompt", pos_);
        }
        const std::size_t start = pos_++;
        std::string out;
        while (!done() && text_[pos_] != quote) {
            char ch = text_[pos_++];
            if (ch == '\\' && !done()) {
                ch = text_[pos_++];
            } else if (ch == '\n') {
                throw ParseError("unterminated string", start);
            }
            out.push_back(ch);
        }
        if (done()) {
            throw ParseError("unterminated string", start);
        }
        ++pos_;
        return out;
    }

    int integer(const char* what) {
        skip_ws();
        const std::size_t start = pos_;
        std::size_t end = pos_;
        while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                                      text_[end] == '-' || text_[end] == '+')) {
            ++end;
        }
        const std::string_view token = text_.substr(start, end - start);
        if (token.empty()) {
            throw ParseError(std::string("expected ") + what, start);
        }
        int value = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc{} || ptr != token.data() + token.size()) {
            throw ParseError(std::string("non-integer ") + what + " '" + std::string(token) + "'", start);
        }
        pos_ = end;
        return value;
    }

private:
    std::string_view text_;
    std::size_t pos_;
};

CharacterEntry parse_tuple(Cursor& cur) {
    cur.skip_ws();
    const std::size_t start = cur.pos();
    cur.expect('(', "'(' opening a character tuple");
    CharacterEntry entry;
    entry.prompt = detail::trim(cur.quoted());
    if (entry.prompt.empty()) {
        throw ParseError("empty character prompt", start);
    }
    cur.expect(',', "',' after the character prompt");
    cur.expect('[', "'[' opening the bounding box");
    int numbers[4] = {0, 0, 0, 0};
    for (int i = 0; i < 4; ++i) {
        if (i > 0) {
            cur.skip_ws();
            if (cur.peek() == ']') {
                throw ParseError("bounding box needs 4 numbers, got " + std::to_string(i), start);
            }
            cur.expect(',', "',' between box numbers");
        }
        numbers[i] = cur.integer("box coordinate");
    }
    cur.skip_ws();
    if (cur.peek() == ',') {
        throw ParseError("bounding box has more than 4 numbers", start);
    }
    cur.expect(']', "']' closing the bounding box");
    entry.bbox = BoundingBox{numbers[0], numbers[1], numbers[2], numbers[3]};
    if (entry.bbox.w <= 0 || entry.bbox.h <= 0) {
        throw ParseError("bounding box width and height must be positive", start);
    }
    cur.expect(',', "',' before the character id");
    entry.id = cur.integer("character id");
    cur.expect(')', "')' closing the character tuple");
    return entry;
}

// Returns the offset just past "Name:" if the line opens with the marker.
std::optional<std::size_t> match_marker(std::string_view text, std::size_t line_start, std::string_view name) {
    std::size_t p = line_start;
    while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
    const bool bracketed = p < text.size() && text[p] == '<';
    if (bracketed) ++p;
    if (p + name.size() > text.size()) return std::nullopt;
    for (std::size_t i = 0; i < name.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[p + i])) != std::tolower(static_cast<unsigned char>(name[i]))) {
            return std::nullopt;
        }
    }
    p += name.size();
    if (bracketed) {
        if (p >= text.size() || text[p] != '>') return std::nullopt;
        ++p;
    }
    while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
    if (p >= text.size() || text[p] != ':') return std::nullopt;
    return p + 1;
}

std::size_t line_end(std::string_view text, std::size_t pos) {
    const std::size_t nl = text.find('\n', pos);
    return nl == std::string_view::npos ? text.size() : nl;
}

std::size_t next_nonblank_line(std::string_view text, std::size_t pos) {
    while (pos < text.size()) {
        const std::size_t end = line_end(text, pos);
        if (!detail::trim(text.substr(pos, end - pos)).empty()) {
            return pos;
        }
        pos = end + 1;
    }
    return text.size();
}

std::string field_line(std::string_view text, std::size_t& pos, std::string_view name) {
    pos = next_nonblank_line(text, pos);
    const auto value_start = match_marker(text, pos, name);
    if (!value_start) {
        throw ParseError("missing field '" + std::string(name) + "'", pos);
    }
    const std::size_t end = line_end(text, *value_start);
    std::string value = detail::trim(text.substr(*value_start, end - *value_start));
    pos = end;
    return value;
}

std::string single_line(std::string_view text) {
    std::string out(text);
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return detail::trim(out);
}

}  // namespace

std::string normalize_negative(std::string_view text) {
    std::string trimmed = detail::trim(text);
    if (detail::lower(trimmed) == "none") {
        return {};
    }
    return trimmed;
}

PromptBook parse_prompt_book(std::string_view text) {
    std::size_t pos = 0;
    std::optional<std::size_t> list_start;
    while (pos < text.size()) {
        if ((list_start = match_marker(text, pos, "Characters"))) break;
        pos = line_end(text, pos) + 1;
    }
    if (!list_start) {
        throw ParseError("missing field 'Characters'", 0);
    }
    PromptBook book;
    Cursor cur(text, *list_start);
    cur.expect('[', "'[' opening the character list");
    if (!cur.accept(']')) {
        do {
            book.characters.push_back(parse_tuple(cur));
        } while (cur.accept(','));
        cur.expect(']', "']' or ',' in the character list");
    }
    pos = cur.pos();
    const std::size_t end = line_end(text, pos);
    if (!detail::trim(text.substr(pos, end - pos)).empty()) {
        throw ParseError("unexpected content after the character list", pos);
    }
    pos = end;
    book.background_prompt = field_line(text, pos, "Background prompt");
    book.negative_prompt = normalize_negative(field_line(text, pos, "Negative prompt"));
    const std::size_t rest = next_nonblank_line(text, pos);
    if (rest < text.size()) {
        throw ParseError("unexpected trailing content", rest);
    }
    return book;
}

std::string serialize_prompt_book(const PromptBook& book) {
    std::string out = "<Characters>: [";
    for (std::size_t i = 0; i < book.characters.size(); ++i) {
        const auto& e = book.characters[i];
        if (i > 0) out += ", ";
        out += "(\"";
        for (char ch : e.prompt) {
            if (ch == '"' || ch == '\\') out.push_back('\\');
            out.push_back(ch == '\n' ? ' ' : ch);
        }
        out += "\", [" + std::to_string(e.bbox.x) + ", " + std::to_string(e.bbox.y) + ", " +
               std::to_string(e.bbox.w) + ", " + std::to_string(e.bbox.h) + "], " + std::to_string(e.id) + ")";
    }
    out += "]\n<Background prompt>: " + single_line(book.background_prompt) + "\n";
    const std::string negative = single_line(book.negative_prompt);
    out += "<Negative prompt>: " + (negative.empty() ? std::string("None") : negative) + "\n";
    return out;
}

std::vector<Violation> validate(const PromptBook& book, const Canvas& canvas, double overlap_threshold) {
    std::vector<Violation> out;
    const auto& chars = book.characters;
    for (std::size_t i = 0; i < chars.size(); ++i) {
        const auto& b = chars[i].bbox;
        if (!b.inside(canvas)) {
            out.push_back({ViolationKind::OutOfBounds, {static_cast<int>(i)},
                           "box of '" + chars[i].prompt + "' leaves the " + std::to_string(canvas.width) + "x" +
                               std::to_string(canvas.height) + " canvas"});
        }
        if (chars[i].id < 1) {
            out.push_back({ViolationKind::BadId, {static_cast<int>(i)}, "character id must be >= 1"});
        }
    }
    for (std::size_t i = 0; i < chars.size(); ++i) {
        for (std::size_t j = i + 1; j < chars.size(); ++j) {
            if (chars[i].id == chars[j].id && chars[i].prompt != chars[j].prompt) {
                out.push_back({ViolationKind::BadId, {static_cast<int>(i), static_cast<int>(j)},
                               "id " + std::to_string(chars[i].id) + " is shared by different prompts"});
            }
        }
    }
    for (std::size_t i = 0; i < chars.size(); ++i) {
        for (std::size_t j = i + 1; j < chars.size(); ++j) {
            if (chars[i].bbox.w <= 0 || chars[j].bbox.w <= 0 || chars[i].bbox.h <= 0 || chars[j].bbox.h <= 0) continue;
            const double f = overlap_fraction(chars[i].bbox, chars[j].bbox);
            if (f > overlap_threshold) {
                out.push_back({ViolationKind::Overlap, {static_cast<int>(i), static_cast<int>(j)},
                               "overlap fraction " + std::to_string(f)});
            }
        }
    }
    const auto background_stems = [&] {
        std::set<std::string> stems;
        for (const auto& word : detail::words(book.background_prompt)) stems.insert(noun_stem(word));
        return stems;
    }();
    for (std::size_t i = 0; i < chars.size(); ++i) {
        const std::string noun = head_noun(chars[i].prompt);
        if (!noun.empty() && background_stems.count(noun_stem(noun))) {
            out.push_back({ViolationKind::BackgroundLeak, {static_cast<int>(i)},
                           "character noun '" + noun + "' appears in the background prompt"});
        }
    }
    if (chars.empty() && detail::trim(book.background_prompt).empty()) {
        out.push_back({ViolationKind::EmptyScene, {}, "no characters and an empty background"});
    }
    return out;
}

bool has_only(const std::vector<Violation>& violations, ViolationKind kind) {
    return std::all_of(violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; });
}

CharacterDiff diff_characters(const PromptBook* prev, const PromptBook& cur) {
    std::set<int> before;
    std::set<int> after;
    if (prev) {
        for (const auto& e : prev->characters) before.insert(e.id);
    }
    for (const auto& e : cur.characters) after.insert(e.id);
    CharacterDiff diff;
    for (int id : after) {
        (before.count(id) ? diff.retained_ids : diff.new_ids).insert(id);
    }
    for (int id : before) {
        if (!after.count(id)) diff.removed_ids.insert(id);
    }
    return diff;
}

std::string head_noun(std::string_view prompt) {
    const auto ws = detail::words(prompt);
    return ws.empty() ? std::string{} : ws.back();
}

namespace {

const std::map<std::string, std::string, std::less<>>& irregular_plurals() {
    static const std::map<std::string, std::string, std::less<>> table = {
        {"man", "men"},       {"woman", "women"}, {"child", "children"}, {"person", "people"},
        {"mouse", "mice"},    {"goose", "geese"}, {"foot", "feet"},      {"tooth", "teeth"},
        {"knife", "knives"},  {"leaf", "leaves"}, {"wolf", "wolves"},    {"sheep", "sheep"},
        {"deer", "deer"},     {"fish", "fish"},   {"ox", "oxen"},        {"cactus", "cacti"},
        {"glasses", "glasses"}, {"scissors", "scissors"}, {"pants", "pants"},
        {"headphones", "headphones"}, {"earphones", "earphones"}, {"sunglasses", "sunglasses"},
    };
    return table;
}

bool is_vowel(char ch) { return ch == 'a' || ch == 'e' || ch == 'i' || ch == 'o' || ch == 'u'; }

}  // namespace

std::string noun_stem(std::string_view word) {
    std::string w = detail::lower(word);
    for (const auto& [singular, plural] : irregular_plurals()) {
        if (w == plural) return singular == plural ? w : singular;
    }
    auto ends = [&](std::string_view suffix) {
        return w.size() > suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (w.size() > 4 && ends("ies")) return w.substr(0, w.size() - 3) + "y";
    if (ends("sses") || ends("shes") || ends("ches") || ends("xes") || ends("zes")) return w.substr(0, w.size() - 2);
    if (w.size() > 3 && ends("s") && !ends("ss") && !ends("us")) return w.substr(0, w.size() - 1);
    return w;
}

std::string pluralize(std::string_view phrase) {
    const std::string text(phrase);
    const std::size_t cut = text.find_last_of(' ');
    const std::string prefix = cut == std::string::npos ? std::string{} : text.substr(0, cut + 1);
    const std::string noun = cut == std::string::npos ? text : text.substr(cut + 1);
    const std::string key = detail::lower(noun);
    if (const auto it = irregular_plurals().find(key); it != irregular_plurals().end()) {
        return prefix + it->second;
    }
    auto ends = [&](std::string_view suffix) {
        return key.size() >= suffix.size() && key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh")) return prefix + noun + "es";
    if (key.size() > 1 && ends("y") && !is_vowel(key[key.size() - 2])) {
        return prefix + noun.substr(0, noun.size() - 1) + "ies";
    }
    return prefix + noun + "s";
}

std::optional<int> count_from_word(std::string_view word) {
    static const char* names[] = {"zero", "one", "two", "three", "four", "five",
                                  "six",  "seven", "eight", "nine", "ten"};
    const std::string w = detail::lower(detail::trim(word));
    for (int i = 0; i <= 10; ++i) {
        if (w == names[i]) return i;
    }
    int value = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
    if (!w.empty() && ec == std::errc{} && ptr == w.data() + w.size() && value >= 0) return value;
    return std::nullopt;
}

std::string count_word(int n) {
    static const char* names[] = {"zero", "one", "two", "three", "four", "five",
                                  "six",  "seven", "eight", "nine", "ten"};
    return (n >= 0 && n <= 10) ? names[n] : std::to_string(n);
}

std::string build_global_prompt(const PromptBook& book) {
    // Group identical (id, prompt) entries in first-seen order.
    std::vector<std::pair<const CharacterEntry*, int>> groups;
    for (const auto& e : book.characters) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
            return g.first->id == e.id && g.first->prompt == e.prompt;
        });
        if (it == groups.end()) {
            groups.emplace_back(&e, 1);
        } else {
            ++it->second;
        }
    }
    std::vector<std::string> parts;
    for (const auto& [entry, count] : groups) {
        if (count == 1) {
            parts.push_back(entry->prompt);
        } else {
            parts.push_back(count_word(count) + " " + pluralize(detail::strip_article(entry->prompt)));
        }
    }
    if (!detail::trim(book.background_prompt).empty()) {
        parts.push_back(book.background_prompt);
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += ", ";
        out += parts[i];
    }
    return out;
}

}  // namespace stagecraft
