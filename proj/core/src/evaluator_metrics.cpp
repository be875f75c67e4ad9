// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "stagecraft/errors.hpp"
#include "stagecraft/evaluator.hpp"
#include "text_util.hpp"

namespace stagecraft {
namespace {

Eigen::MatrixXd to_matrix(const FeatureSet& set) {
    const auto rows = static_cast<Eigen::Index>(set.size());
    const auto cols = static_cast<Eigen::Index>(set.front().size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(set[r].size()) != cols) {
            throw DimensionMismatch("feature vectors have different lengths");
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = set[r][c];
    }
    return m;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean) {
    const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

bool near_singular(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff() <= kFidEpsilon;
}

}  // namespace

double mean_percent(const std::vector<double>& cosines) {
    if (cosines.empty()) throw NoPairs("no similarity pairs to average");
    return 100.0 * std::accumulate(cosines.begin(), cosines.end(), 0.0) / static_cast<double>(cosines.size());
}

double accs(const std::vector<std::pair<Image, Image>>& pairs, const Embedder& embedder) {
    std::vector<double> cosines;
    cosines.reserve(pairs.size());
    for (const auto& [crop, reference] : pairs) {
        cosines.push_back(cosine(embedder.embed_image(crop), embedder.embed_image(reference)));
    }
    return mean_percent(cosines);
}

double atis(const std::vector<Image>& images, const std::vector<std::string>& prompts, const Embedder& embedder) {
    if (images.size() != prompts.size()) {
        throw LengthMismatch(std::to_string(images.size()) + " images vs " + std::to_string(prompts.size()) +
                             " prompts");
    }
    std::vector<double> cosines;
    for (std::size_t i = 0; i < images.size(); ++i) {
        cosines.push_back(cosine(embedder.embed_image(images[i]), embedder.embed_text(prompts[i])));
    }
    return mean_percent(cosines);
}

double afid(const FeatureSet& a, const FeatureSet& b) {
    if (a.size() < 2 || b.size() < 2) throw DegenerateSet("each feature set needs at least two vectors");
    if (a.front().size() != b.front().size() || a.front().empty()) {
        throw DimensionMismatch("feature sets have different dimensions");
    }
    const Eigen::MatrixXd xa = to_matrix(a);
    const Eigen::MatrixXd xb = to_matrix(b);
    const Eigen::VectorXd mu_a = xa.colwise().mean();
    const Eigen::VectorXd mu_b = xb.colwise().mean();
    Eigen::MatrixXd cov_a = covariance(xa, mu_a);
    Eigen::MatrixXd cov_b = covariance(xb, mu_b);
    if (near_singular(cov_a) || near_singular(cov_b)) {
        const auto eye = Eigen::MatrixXd::Identity(cov_a.rows(), cov_a.cols());
        cov_a += kFidEpsilon * eye;
        cov_b += kFidEpsilon * eye;
    }
    // Tr sqrt(A B) equals Tr sqrt(sqrt(A) B sqrt(A)), which is symmetric.
    const Eigen::MatrixXd root_a = sqrt_psd(cov_a);
    Eigen::MatrixXd inner = root_a * cov_b * root_a;
    inner = 0.5 * (inner + inner.transpose());
    const double cross = sqrt_psd(inner).trace();
    const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
    return std::max(0.0, value);
}

Relation relation_from_string(std::string_view text) {
    const auto w = detail::words(text);
    for (const auto& word : w) {
        if (word == "left") return Relation::Left;
        if (word == "right") return Relation::Right;
        if (word == "top" || word == "above") return Relation::Top;
        if (word == "down" || word == "below" || word == "under" || word == "bottom") return Relation::Down;
    }
    throw UnknownRelation("unknown relation '" + std::string(text) + "'");
}

bool check_spatial(const BoundingBox& a, const BoundingBox& b, Relation relation) {
    switch (relation) {
        case Relation::Left: return a.center_x() < b.center_x();
        case Relation::Right: return a.center_x() > b.center_x();
        case Relation::Top: return a.center_y() < b.center_y();
        case Relation::Down: return a.center_y() > b.center_y();
    }
    return false;
}

bool check_spatial(const BoundingBox& a, const BoundingBox& b, std::string_view relation) {
    return check_spatial(a, b, relation_from_string(relation));
}

bool check_attribute(const Image& crop, std::string_view old_prompt, std::string_view new_prompt,
                     const Embedder& embedder) {
    const auto image = embedder.embed_image(crop);
    return cosine(image, embedder.embed_text(new_prompt)) > cosine(image, embedder.embed_text(old_prompt));
}

int count_detections(const Image& image, std::string_view prompt, const Detector& detector, double box_threshold) {
    int n = 0;
    for (const auto& d : detector.detect(image, prompt)) {
        if (d.confidence >= box_threshold) ++n;
    }
    return n;
}

bool check_negative(const Image& image, std::string_view negative_prompt, const Detector& detector,
                    double box_threshold) {
    if (detail::trim(negative_prompt).empty()) throw ConfigError("negative check needs a non-empty prompt");
    return count_detections(image, negative_prompt, detector, box_threshold) == 0;
}

bool check_numeracy(int detections, std::string_view expected_word) {
    const auto expected = count_from_word(detail::lower(detail::trim(expected_word)));
    if (!expected) throw UnknownCountWord("unknown count word '" + std::string(expected_word) + "'");
    return detections == *expected;
}

}  // namespace stagecraft
