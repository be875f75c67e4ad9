// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include <stagecraft/errors.hpp>
#include <stagecraft/evaluator.hpp>

#include "support.hpp"

using namespace stagecraft;
using testsupport::toy_backend;

namespace {

// Embeds an image as the vector stored for its first pixel value.
class LookupEmbedder final : public Embedder {
public:
    void set(double key, std::vector<double> v) { table_[key] = std::move(v); }
    std::vector<double> embed_image(const Image& image) const override { return table_.at(image[0]); }
    std::vector<double> embed_text(std::string_view) const override { return {1.0, 0.0}; }

private:
    std::map<double, std::vector<double>> table_;
};

Image swatch(double v) { return Image(2, 2, 3, v); }

// Unit vectors at a chosen cosine to (1, 0).
std::vector<double> at_cosine(double c) { return {c, std::sqrt(1.0 - c * c)}; }

FeatureSet random_set(testsupport::Gen& gen, int n, int dim) {
    FeatureSet s(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& v : s)
        for (auto& x : v) x = gen.real(-1, 1);
    return s;
}

// Frechet distance for two-dimensional features. The trace of the square root of the
// 2x2 product follows from its eigenvalues: sqrt(tr + 2 sqrt(det)).
double frechet_2d(const FeatureSet& a, const FeatureSet& b) {
    auto stats = [](const FeatureSet& s, double mu[2], double cov[2][2]) {
        const double n = static_cast<double>(s.size());
        mu[0] = mu[1] = 0;
        for (const auto& v : s) {
            mu[0] += v[0] / n;
            mu[1] += v[1] / n;
        }
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                cov[i][j] = 0;
                for (const auto& v : s) cov[i][j] += (v[i] - mu[i]) * (v[j] - mu[j]) / (n - 1);
            }
    };
    double ma[2], mb[2], ca[2][2], cb[2][2];
    stats(a, ma, ca);
    stats(b, mb, cb);
    double p[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) p[i][j] = ca[i][0] * cb[0][j] + ca[i][1] * cb[1][j];
    const double tr = p[0][0] + p[1][1];
    const double det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
    const double tr_sqrt = std::sqrt(tr + 2.0 * std::sqrt(det));
    const double dm = std::pow(ma[0] - mb[0], 2) + std::pow(ma[1] - mb[1], 2);
    return dm + ca[0][0] + ca[1][1] + cb[0][0] + cb[1][1] - 2.0 * tr_sqrt;
}

BenchDialogue three_turn_dialogue() {
    BenchDialogue d;
    d.characters = {"pen", "cup"};
    d.scene = "empty background";
    d.turns = {{"t1", {{1, "a pen", {0, 0, 10, 10}}}, "empty background", "None"},
               {"t2", {{1, "a pen", {0, 0, 10, 10}}}, "empty background", "None"},
               {"t3", {{1, "a pen", {0, 0, 10, 10}}, {2, "a cup", {20, 20, 10, 10}}, {3, "a lamp", {40, 40, 5, 5}}},
                "empty background", "None"}};
    return d;
}

}  // namespace

TEST(Afid, IdenticalSetsAreAtZero) {
    testsupport::Gen gen(1);
    for (int i = 0; i < 10; ++i) {
        const auto a = random_set(gen, gen.integer(2, 20), gen.integer(1, 6));
        EXPECT_NEAR(afid(a, a), 0.0, 1e-6);
    }
}

TEST(Afid, ScalarGaussians) {
    const double h = std::sqrt(0.5);
    const FeatureSet a{{-h}, {h}};                                  // mean 0, variance 1
    const FeatureSet b{{1.0 - std::sqrt(2.0)}, {1.0 + std::sqrt(2.0)}};  // mean 1, variance 4
    EXPECT_NEAR(afid(a, b), 2.0, 1e-9);
}

TEST(Afid, EqualCovarianceLeavesTheMeanTerm) {
    testsupport::Gen gen(2);
    for (int i = 0; i < 10; ++i) {
        const int dim = gen.integer(1, 5);
        const auto a = random_set(gen, 12, dim);
        FeatureSet b = a;
        double d2 = 0.0;
        std::vector<double> d(static_cast<std::size_t>(dim));
        for (auto& x : d) {
            x = gen.real(-2, 2);
            d2 += x * x;
        }
        for (auto& v : b)
            for (std::size_t k = 0; k < v.size(); ++k) v[k] += d[k];
        EXPECT_NEAR(afid(a, b), d2, 1e-6);
    }
}

TEST(AfidProperty, MatchesTheTwoDimensionalClosedFormAndIsSymmetric) {
    testsupport::Gen gen(3);
    for (int i = 0; i < 50; ++i) {
        const auto a = random_set(gen, gen.integer(4, 15), 2);
        auto b = random_set(gen, gen.integer(4, 15), 2);
        for (auto& v : b) v[0] = 2.0 * v[0] + 0.5;
        EXPECT_NEAR(afid(a, b), frechet_2d(a, b), 1e-8);
        EXPECT_NEAR(afid(a, b), afid(b, a), 1e-8);
        EXPECT_GE(afid(a, b), -1e-9);
    }
}

TEST(Afid, Preconditions) {
    EXPECT_THROW(afid({{1.0}}, {{1.0}, {2.0}}), DegenerateSet);
    EXPECT_THROW(afid({{1.0}, {2.0}}, {{1.0, 0.0}, {2.0, 0.0}}), DimensionMismatch);
    const FeatureSet flat{{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}};  // singular covariance
    EXPECT_TRUE(std::isfinite(afid(flat, flat)));
}

TEST(Accs, MeansOfCosines) {
    LookupEmbedder e;
    e.set(0.1, at_cosine(1.0));
    e.set(0.2, at_cosine(0.8));
    e.set(0.3, at_cosine(0.6));
    e.set(0.4, {0.0, 1.0});
    EXPECT_NEAR(accs({{swatch(0.1), swatch(0.1)}, {swatch(0.2), swatch(0.2)}}, e), 100.0, 1e-12);
    EXPECT_NEAR(accs({{swatch(0.1), swatch(0.4)}}, e), 0.0, 1e-12);
    EXPECT_NEAR(accs({{swatch(0.2), swatch(0.1)}, {swatch(0.3), swatch(0.1)}}, e), 70.0, 1e-12);
    EXPECT_THROW(accs({}, e), NoPairs);
    EXPECT_DOUBLE_EQ(mean_percent({0.8, 0.6}), 70.0);
    EXPECT_THROW(mean_percent({}), NoPairs);
}

TEST(AccsProperty, DuplicatingAPairMovesOnlyTheMean) {
    testsupport::Gen gen(4);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> cos(static_cast<std::size_t>(gen.integer(1, 8)));
        for (auto& c : cos) c = gen.real(-1, 1);
        const double base = mean_percent(cos);
        const double dup = cos[static_cast<std::size_t>(gen.integer(0, static_cast<int>(cos.size()) - 1))];
        auto more = cos;
        more.push_back(dup);
        const double n = static_cast<double>(cos.size());
        EXPECT_NEAR(mean_percent(more), (base * n + 100.0 * dup) / (n + 1), 1e-9);
        EXPECT_LE(std::abs(mean_percent(more)), 100.0);
    }
}

TEST(Atis, OwnPromptScoresHighAndUnrelatedLow) {
    const auto backend = toy_backend();
    const PatternEmbedder embedder(backend);
    const Image img = backend->generate({"a shiny spatula", "", std::nullopt, std::nullopt}, 50, 2);
    EXPECT_GT(atis({img}, {"a shiny spatula"}, embedder), 90.0);
    EXPECT_LT(atis({img}, {"a very old lamp"}, embedder), 30.0);
    EXPECT_THROW(atis({img}, {}, embedder), LengthMismatch);
    EXPECT_THROW(atis({}, {}, embedder), NoPairs);
}

TEST(Spatial, Examples) {
    EXPECT_TRUE(check_spatial({97, 235, 162, 222}, {217, 55, 198, 232}, Relation::Down));
    EXPECT_FALSE(check_spatial({10, 10, 20, 20}, {10, 10, 20, 20}, Relation::Left));
    EXPECT_TRUE(check_spatial({0, 0, 20, 20}, {390, 0, 20, 20}, "to the left of"));
    EXPECT_EQ(relation_from_string("I want a pen down of a spatula"), Relation::Down);
    EXPECT_EQ(relation_from_string("to the top of"), Relation::Top);
    EXPECT_EQ(relation_from_string("to the right of"), Relation::Right);
    EXPECT_THROW(relation_from_string("near"), UnknownRelation);
}

TEST(SpatialProperty, RelationDuality) {
    testsupport::Gen gen(5);
    for (int i = 0; i < 300; ++i) {
        const auto a = gen.box({}), b = gen.box({});
        EXPECT_EQ(check_spatial(a, b, Relation::Left), check_spatial(b, a, Relation::Right));
        EXPECT_EQ(check_spatial(a, b, Relation::Top), check_spatial(b, a, Relation::Down));
        EXPECT_FALSE(check_spatial(a, a, gen.one_of(std::vector<Relation>{Relation::Left, Relation::Right,
                                                                          Relation::Top, Relation::Down})));
    }
}

TEST(Attribute, ComparesTheTwoPrompts) {
    const auto backend = toy_backend();
    const PatternEmbedder embedder(backend);
    const Image blue = backend->generate({"a blue pen", "", std::nullopt, std::nullopt}, 50, 1);
    const Image plain = backend->generate({"a pen", "", std::nullopt, std::nullopt}, 50, 1);
    EXPECT_TRUE(check_attribute(blue, "a pen", "a blue pen", embedder));
    EXPECT_FALSE(check_attribute(plain, "a pen", "a blue pen", embedder));
    EXPECT_FALSE(check_attribute(blue, "a blue pen", "a blue pen", embedder));
}

TEST(Negative, UsesTheBoxThreshold) {
    RuleTableDetector detector;
    const Image img(8, 8, 3);
    EXPECT_TRUE(check_negative(img, "a pen", detector));
    detector.set("a pen", {{{0, 0, 4, 4}, 0.7}});
    EXPECT_FALSE(check_negative(img, "a pen", detector));
    detector.set("a pen", {{{0, 0, 4, 4}, 0.49}});
    EXPECT_TRUE(check_negative(img, "a pen", detector));
    EXPECT_THROW(check_negative(img, "  ", detector), ConfigError);
}

TEST(Numeracy, ExactCountsOnly) {
    EXPECT_TRUE(check_numeracy(4, "four"));
    EXPECT_FALSE(check_numeracy(3, "four"));
    EXPECT_FALSE(check_numeracy(5, "four"));
    EXPECT_THROW(check_numeracy(2, "several"), UnknownCountWord);
    RuleTableDetector detector;
    detector.set("a spatula", {{{0, 0, 4, 4}, 0.9}, {{4, 4, 4, 4}, 0.5}, {{0, 4, 4, 4}, 0.3}});
    EXPECT_EQ(count_detections(Image(8, 8, 3), "a spatula", detector), 2);
}

TEST(References, EarliestDetectedAppearanceWins) {
    const auto d = three_turn_dialogue();
    RuleTableDetector detector;
    detector.set("a pen", {{{0, 0, 10, 10}, 0.9}});
    detector.set("a cup", {{{20, 20, 10, 10}, 0.8}});
    const std::vector<Image> images{Image(64, 64, 3, 0.1), Image(64, 64, 3, 0.2), Image(64, 64, 3, 0.3)};
    const auto set = collect_references(images, d, detector);
    ASSERT_EQ(set.references.size(), 2u);
    EXPECT_EQ(set.references.at(1).turn, 1);
    EXPECT_EQ(set.references.at(1).crop, crop(images[0], {0, 0, 10, 10}));
    EXPECT_EQ(set.references.at(2).turn, 3);
    EXPECT_EQ(set.comparands.size(), 2u);
    for (const auto& c : set.comparands) EXPECT_EQ(c.id, 1);
    ASSERT_EQ(set.missing.size(), 1u);
    EXPECT_EQ(set.missing[0].id, 3);
    EXPECT_EQ(set.missing[0].turn, 3);
    EXPECT_THROW(collect_references({images[0]}, d, detector), LengthMismatch);
}

TEST(MetricOptions, ParsesTheCommaList) {
    const auto o = eval_options_from_metrics("accs, afid");
    EXPECT_TRUE(o.accs);
    EXPECT_TRUE(o.afid);
    EXPECT_FALSE(o.atis);
    EXPECT_FALSE(o.alignment);
    EXPECT_THROW(eval_options_from_metrics("accs,bleu"), ConfigError);
}

TEST(EvaluateCorpus, IsDeterministicAcrossThreadCounts) {
    const auto backend = toy_backend();
    const PatternDetector detector(backend);
    const PatternEmbedder embedder(backend);
    BenchCorpus corpus;
    for (int k = 1; k <= 3; ++k) {
        BenchDialogue d;
        d.characters = {"pen", "spatula"};
        d.scene = "empty background";
        for (int t = 1; t <= 4; ++t) {
            d.turns.push_back({"a pen and a spatula", {{1, "a pen", {0, 0, 256, 256}}, {2, "a spatula", {256, 256, 256, 256}}},
                               "empty background", "None"});
        }
        corpus.emplace_back("dialogue " + std::to_string(k), d);
    }
    const auto loader = [&](const std::string& name, int turn) {
        return backend->generate({"a pen", "", std::nullopt, std::nullopt}, 20,
                                 fnv1a64(name) + static_cast<std::uint64_t>(turn));
    };
    EvalOptions one;
    one.threads = 1;
    EvalOptions many;
    many.threads = 3;
    const auto a = evaluate_corpus(corpus, BenchTask::Story, loader, detector, embedder, one);
    const auto b = evaluate_corpus(corpus, BenchTask::Story, loader, detector, embedder, many);
    auto ja = a.to_json(), jb = b.to_json();
    ja.erase("options");
    jb.erase("options");
    EXPECT_EQ(ja.dump(), jb.dump());
    ASSERT_EQ(a.dialogues.size(), 3u);
    EXPECT_EQ(a.dialogues[1].name, "dialogue 2");
    if (a.accs) EXPECT_LE(std::abs(*a.accs), 100.0);
    EXPECT_TRUE(a.alignment.empty());
}
