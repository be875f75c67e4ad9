// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "stagecraft/benchkit.hpp"
#include "stagecraft/hashing.hpp"
#include "stagecraft/png_io.hpp"
#include "text_util.hpp"

namespace stagecraft {

namespace detail {
std::string_view builtin_pools_json();
}

const char* to_string(BenchTask task) { return task == BenchTask::Story ? "story" : "editing"; }

BenchTask bench_task_from_string(std::string_view text) {
    const std::string t = detail::lower(detail::trim(text));
    if (t == "story") return BenchTask::Story;
    if (t == "editing") return BenchTask::Editing;
    throw ConfigError("unknown bench task '" + std::string(text) + "' (expected story or editing)");
}

namespace {

std::vector<std::string> read_pool(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) {
        throw ConfigError(std::string("pool file lacks list '") + key + "'");
    }
    std::vector<std::string> out;
    for (const auto& item : j.at(key)) {
        if (!item.is_string()) throw ConfigError(std::string("pool '") + key + "' holds a non-string item");
        out.push_back(item.get<std::string>());
    }
    return out;
}

void check_pool(const std::vector<std::string>& pool, const char* name) {
    if (pool.empty()) throw ConfigError(std::string("pool '") + name + "' is empty");
    std::set<std::string> seen;
    for (const auto& item : pool) {
        if (!seen.insert(detail::lower(item)).second) {
            throw ConfigError(std::string("pool '") + name + "' lists '" + item + "' twice");
        }
    }
}

std::vector<std::string> draw(const std::vector<std::string>& pool, std::size_t n, SeededRng& rng) {
    std::vector<std::string> remaining = pool;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n && !remaining.empty(); ++i) {
        const auto k = static_cast<std::size_t>(rng.below(remaining.size()));
        out.push_back(remaining[k]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return out;
}

}  // namespace

CharacterPools CharacterPools::from_json(const nlohmann::json& j) {
    CharacterPools p;
    p.fruit = read_pool(j, "fruit");
    p.object = read_pool(j, "object");
    p.animal = read_pool(j, "animal");
    p.human = read_pool(j, "human");
    p.background = read_pool(j, "background");
    p.check();
    return p;
}

CharacterPools CharacterPools::builtin() { return from_json(nlohmann::json::parse(detail::builtin_pools_json())); }

CharacterPools CharacterPools::from_file(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    try {
        return from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("pool file " + path.string() + " is not valid JSON: " + ex.what());
    }
}

void CharacterPools::check() const {
    check_pool(fruit, "fruit");
    check_pool(object, "object");
    check_pool(animal, "animal");
    check_pool(human, "human");
    check_pool(background, "background");
}

const std::vector<std::string>& number_choices() {
    static const std::vector<std::string> choices{"two", "three", "four", "five"};
    return choices;
}

const std::vector<std::string>& relation_choices() {
    static const std::vector<std::string> choices{"to the left of", "to the right of", "to the top of",
                                                  "to the down of"};
    return choices;
}

Selection sample_characters(const CharacterPools& pools, BenchTask task, std::uint64_t seed) {
    SeededRng rng(derive_seed(seed, "select", 0, 0));
    Selection s;
    s.task = task;
    if (task == BenchTask::Story) {
        std::vector<std::string> cast = pools.human;
        cast.insert(cast.end(), pools.animal.begin(), pools.animal.end());
        s.characters = draw(cast, 2 + rng.below(2), rng);
        s.scene = pools.background[rng.below(pools.background.size())];
    } else {
        std::vector<std::string> items = pools.object;
        items.insert(items.end(), pools.fruit.begin(), pools.fruit.end());
        s.characters = draw(items, 2, rng);
        s.scene = "empty background";
        s.number_pick = number_choices()[rng.below(number_choices().size())];
        s.relation_pick = relation_choices()[rng.below(relation_choices().size())];
    }
    return s;
}

}  // namespace stagecraft
