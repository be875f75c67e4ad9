// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "stagecraft/errors.hpp"
#include "stagecraft/evaluator.hpp"
#include "stagecraft/png_io.hpp"
#include "text_util.hpp"

namespace stagecraft {
namespace {

// Picks the confident detection that best overlaps the expected layout box.
std::optional<Detection> locate(const Image& image, const CharacterEntry& entry, const Detector& detector,
                                const DetectionThresholds& thresholds) {
    std::optional<Detection> best;
    double best_iou = -1.0;
    for (const auto& d : detector.detect(image, entry.prompt)) {
        if (d.confidence < thresholds.box) continue;
        const double iou = box_iou(d.box, entry.bbox);
        if (iou > best_iou) {
            best_iou = iou;
            best = d;
        }
    }
    return best;
}

std::size_t mention_position(const std::string& caption, const std::string& prompt) {
    const auto words = detail::words(caption);
    const std::string stem = noun_stem(head_noun(prompt));
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (noun_stem(words[i]) == stem) return i;
    }
    return words.size();
}

std::optional<int> caption_count(const std::string& caption) {
    for (const auto& w : detail::words(caption)) {
        if (w == "one" || w == "zero") continue;
        if (auto n = count_from_word(w)) return n;
    }
    return std::nullopt;
}

struct AlignmentContext {
    const Detector& detector;
    const Embedder& embedder;
    const DetectionThresholds& thresholds;
    int missing = 0;
};

std::optional<AlignmentResult> score_turn(EditType type, const BenchTurn* prev, const BenchTurn& turn, int turn_no,
                                          const Image& image, AlignmentContext& ctx) {
    AlignmentResult r{type, turn_no, false, {}};
    switch (type) {
        case EditType::Spatial: {
            Relation relation;
            try {
                relation = relation_from_string(turn.caption);
            } catch (const UnknownRelation&) {
                return std::nullopt;
            }
            std::vector<const CharacterEntry*> distinct;
            std::set<int> ids;
            for (const auto& o : turn.objects) {
                if (ids.insert(o.id).second) distinct.push_back(&o);
            }
            if (distinct.size() < 2) return std::nullopt;
            std::stable_sort(distinct.begin(), distinct.end(), [&](const auto* a, const auto* b) {
                return mention_position(turn.caption, a->prompt) < mention_position(turn.caption, b->prompt);
            });
            const auto a = locate(image, *distinct[0], ctx.detector, ctx.thresholds);
            const auto b = locate(image, *distinct[1], ctx.detector, ctx.thresholds);
            if (!a || !b) {
                ++ctx.missing;
                r.detail = "missing detection";
                return r;
            }
            r.pass = check_spatial(a->box, b->box, relation);
            r.detail = "'" + distinct[0]->prompt + "' vs '" + distinct[1]->prompt + "'";
            return r;
        }
        case EditType::Attribute: {
            if (!prev) return std::nullopt;
            for (const auto& o : turn.objects) {
                auto old = std::find_if(prev->objects.begin(), prev->objects.end(),
                                        [&](const CharacterEntry& p) { return p.id == o.id; });
                if (old == prev->objects.end() || old->prompt == o.prompt) continue;
                const auto d = locate(image, o, ctx.detector, ctx.thresholds);
                if (!d) {
                    ++ctx.missing;
                    r.detail = "missing detection of '" + o.prompt + "'";
                    return r;
                }
                r.pass = check_attribute(crop(image, d->box), old->prompt, o.prompt, ctx.embedder);
                r.detail = "'" + old->prompt + "' -> '" + o.prompt + "'";
                return r;
            }
            return std::nullopt;
        }
        case EditType::Negative: {
            std::string negative = normalize_negative(turn.negative);
            if (negative.empty() && prev) {
                std::set<int> now;
                for (const auto& o : turn.objects) now.insert(o.id);
                for (const auto& p : prev->objects) {
                    if (!now.count(p.id)) {
                        negative = p.prompt;
                        break;
                    }
                }
            }
            if (negative.empty()) return std::nullopt;
            r.pass = check_negative(image, negative, ctx.detector, ctx.thresholds.box);
            r.detail = "'" + negative + "'";
            return r;
        }
        case EditType::Numeracy: {
            std::map<int, int> counts;
            for (const auto& o : turn.objects) ++counts[o.id];
            auto top = std::max_element(counts.begin(), counts.end(),
                                        [](const auto& x, const auto& y) { return x.second < y.second; });
            if (top == counts.end()) return std::nullopt;
            const auto entry = std::find_if(turn.objects.begin(), turn.objects.end(),
                                            [&](const CharacterEntry& o) { return o.id == top->first; });
            const int expected = caption_count(turn.caption).value_or(top->second);
            const int found = count_detections(image, entry->prompt, ctx.detector, ctx.thresholds.box);
            r.pass = check_numeracy(found, count_word(expected));
            r.detail = std::to_string(found) + " of " + std::to_string(expected) + " '" + entry->prompt + "'";
            return r;
        }
    }
    return std::nullopt;
}

DialogueEval evaluate_dialogue(const std::string& name, const BenchDialogue& dialogue, BenchTask task,
                               const std::vector<Image>& images, const Detector& detector, const Embedder& embedder,
                               const EvalOptions& options, FeatureSet& pooled_refs, FeatureSet& pooled_comps) {
    DialogueEval ev;
    ev.name = name;
    const ReferenceSet refs = collect_references(images, dialogue, detector, options.thresholds);
    ev.missing_detections = static_cast<int>(refs.missing.size());

    if (options.accs || options.afid) {
        std::vector<std::pair<Image, Image>> pairs;
        FeatureSet comps, ref_features;
        for (const auto& [id, ref] : refs.references) ref_features.push_back(embedder.embed_image(ref.crop));
        for (const auto& c : refs.comparands) {
            pairs.emplace_back(c.crop, refs.references.at(c.id).crop);
            comps.push_back(embedder.embed_image(c.crop));
        }
        if (options.accs && !pairs.empty()) ev.accs = accs(pairs, embedder);
        if (options.afid) {
            if (ref_features.size() >= 2 && comps.size() >= 2) {
                ev.afid = afid(ref_features, comps);
                ev.afid_small_sample = ref_features.size() < kSmallSampleSize || comps.size() < kSmallSampleSize;
            }
            pooled_refs = std::move(ref_features);
            pooled_comps = std::move(comps);
        }
    }
    if (options.atis) {
        std::vector<std::string> prompts;
        for (const auto& t : dialogue.turns) prompts.push_back(build_global_prompt(turn_prompt_book(t)));
        ev.atis = atis(images, prompts, embedder);
    }
    if (options.alignment && task == BenchTask::Editing) {
        AlignmentContext ctx{detector, embedder, options.thresholds};
        const auto types = infer_edit_types(dialogue);
        for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
            const BenchTurn* prev = t ? &dialogue.turns[t - 1] : nullptr;
            if (auto r = score_turn(types[t], prev, dialogue.turns[t], static_cast<int>(t + 1), images[t], ctx)) {
                ev.alignment.push_back(std::move(*r));
            }
        }
        ev.missing_detections += ctx.missing;
    }
    return ev;
}

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> mean_of(const std::vector<DialogueEval>& evs, std::optional<double> DialogueEval::*field) {
    double sum = 0.0;
    int n = 0;
    for (const auto& e : evs) {
        if (e.*field) {
            sum += *(e.*field);
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

}  // namespace

ReferenceSet collect_references(const std::vector<Image>& turn_images, const BenchDialogue& dialogue,
                                const Detector& detector, const DetectionThresholds& thresholds) {
    if (turn_images.size() != dialogue.turns.size()) {
        throw LengthMismatch(std::to_string(turn_images.size()) + " images for " +
                             std::to_string(dialogue.turns.size()) + " turns");
    }
    ReferenceSet set;
    for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
        std::set<int> seen;
        for (const auto& entry : dialogue.turns[t].objects) {
            if (!seen.insert(entry.id).second) continue;
            const int turn_no = static_cast<int>(t + 1);
            const auto d = locate(turn_images[t], entry, detector, thresholds);
            if (!d) {
                set.missing.push_back({entry.id, turn_no, entry.prompt});
                continue;
            }
            CharacterCrop c{entry.id, turn_no, crop(turn_images[t], d->box)};
            if (!set.references.count(entry.id)) {
                set.references.emplace(entry.id, std::move(c));
            } else {
                set.comparands.push_back(std::move(c));
            }
        }
    }
    return set;
}

EvalOptions eval_options_from_metrics(std::string_view comma_list) {
    EvalOptions o;
    o.accs = o.atis = o.afid = o.alignment = false;
    std::string list(comma_list);
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const std::string name = detail::lower(detail::trim(list.substr(start, comma - start)));
        if (name == "accs") {
            o.accs = true;
        } else if (name == "atis") {
            o.atis = true;
        } else if (name == "afid") {
            o.afid = true;
        } else if (name == "alignment") {
            o.alignment = true;
        } else if (!name.empty()) {
            throw ConfigError("unknown metric '" + name + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return o;
}

EvalReport evaluate_corpus(const BenchCorpus& corpus, BenchTask task, const TurnImageLoader& loader,
                           const Detector& detector, const Embedder& embedder, const EvalOptions& options) {
    EvalReport report;
    report.options = options;
    report.dialogues.resize(corpus.size());
    std::vector<FeatureSet> refs(corpus.size()), comps(corpus.size());
    std::vector<std::exception_ptr> errors(corpus.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < corpus.size(); i = next++) {
            try {
                const auto& [name, dialogue] = corpus[i];
                std::vector<Image> images;
                for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
                    images.push_back(loader(name, static_cast<int>(t + 1)));
                }
                report.dialogues[i] =
                    evaluate_dialogue(name, dialogue, task, images, detector, embedder, options, refs[i], comps[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, corpus.size())));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    // Aggregates are reduced in corpus order so the report does not depend on scheduling.
    report.accs = mean_of(report.dialogues, &DialogueEval::accs);
    report.atis = mean_of(report.dialogues, &DialogueEval::atis);
    report.afid = mean_of(report.dialogues, &DialogueEval::afid);
    FeatureSet all_refs, all_comps;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        all_refs.insert(all_refs.end(), refs[i].begin(), refs[i].end());
        all_comps.insert(all_comps.end(), comps[i].begin(), comps[i].end());
    }
    if (options.afid && all_refs.size() >= 2 && all_comps.size() >= 2) {
        report.afid_pooled = afid(all_refs, all_comps);
        report.afid_pooled_small_sample = all_refs.size() < kSmallSampleSize || all_comps.size() < kSmallSampleSize;
    }
    for (const auto& ev : report.dialogues) {
        report.missing_detections += ev.missing_detections;
        for (const auto& a : ev.alignment) {
            auto& [passed, scored] = report.alignment[to_string(a.type)];
            passed += a.pass ? 1 : 0;
            ++scored;
        }
    }
    return report;
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
    if (options.accs) metrics.push_back("accs");
    if (options.atis) metrics.push_back("atis");
    if (options.afid) metrics.push_back("afid");
    if (options.alignment) metrics.push_back("alignment");
    j["metrics"] = metrics;
    nlohmann::ordered_json agg;
    agg["dialogues"] = dialogues.size();
    if (options.accs) agg["accs"] = optional_number(accs);
    if (options.atis) agg["atis"] = optional_number(atis);
    if (options.afid) {
        agg["afid_per_dialogue_mean"] = optional_number(afid);
        agg["afid_pooled"] = optional_number(afid_pooled);
        agg["afid_pooled_small_sample"] = afid_pooled_small_sample;
    }
    if (options.alignment) {
        nlohmann::ordered_json align = nlohmann::ordered_json::object();
        for (const char* type : {"spatial", "attribute", "negative", "numeracy"}) {
            auto it = alignment.find(type);
            const int passed = it == alignment.end() ? 0 : it->second.first;
            const int scored = it == alignment.end() ? 0 : it->second.second;
            align[type] = {{"passed", passed},
                           {"scored", scored},
                           {"accuracy", optional_number(scored ? std::optional<double>(100.0 * passed / scored) : std::nullopt)}};
        }
        agg["alignment"] = align;
    }
    agg["missing_detections"] = missing_detections;
    j["aggregate"] = agg;
    auto& list = j["dialogues"] = nlohmann::ordered_json::array();
    for (const auto& ev : dialogues) {
        nlohmann::ordered_json d;
        d["name"] = ev.name;
        if (options.accs) d["accs"] = optional_number(ev.accs);
        if (options.atis) d["atis"] = optional_number(ev.atis);
        if (options.afid) {
            d["afid"] = optional_number(ev.afid);
            d["afid_small_sample"] = ev.afid_small_sample;
        }
        if (options.alignment) {
            nlohmann::ordered_json align = nlohmann::ordered_json::object();
            for (const auto& a : ev.alignment) {
                align["turn " + std::to_string(a.turn)] = {
                    {"type", to_string(a.type)}, {"pass", a.pass}, {"detail", a.detail}};
            }
            d["alignment"] = align;
        }
        d["missing_detections"] = ev.missing_detections;
        list.push_back(std::move(d));
    }
    return j;
}

TurnImageLoader directory_loader(std::filesystem::path dir) {
    return [dir = std::move(dir)](const std::string& dialogue, int turn) {
        const auto path = dir / dialogue / ("turn" + std::to_string(turn) + ".png");
        if (!std::filesystem::exists(path)) throw IoError("missing generated image " + path.string());
        return decode_png(read_file(path));
    };
}

}  // namespace stagecraft
