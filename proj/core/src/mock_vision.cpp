// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stagecraft/backends.hpp"
#include "stagecraft/errors.hpp"

namespace stagecraft {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("embedding sizes differ");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
    const long long ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    const long long iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    const long long inter = ix * iy;
    const long long uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

void RuleTableDetector::set(std::string_view text, std::vector<Detection> detections) {
    rules_[normalize_prompt(text)] = std::move(detections);
}

std::vector<Detection> RuleTableDetector::detect(const Image&, std::string_view text) const {
    const auto it = rules_.find(normalize_prompt(text));
    return it == rules_.end() ? std::vector<Detection>{} : it->second;
}

namespace {

// Window scorer over one image grid and one prompt pattern. All sums come from
// summed-area tables, and the pattern term collapses to K+1 by K+1 corner lookups
// per channel because the pattern is piecewise constant on tiles.
class WindowScorer {
public:
    WindowScorer(const LatentRaster& grid, const LatentRaster& tiles)
        : width_(grid.width()), height_(grid.height()), channels_(grid.channels()), tiles_(tiles.width()) {
        const int stride = width_ + 1;
        sum_.assign(static_cast<std::size_t>(stride) * (height_ + 1) * channels_, 0.0);
        sq_ = sum_;
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                for (int c = 0; c < channels_; ++c) {
                    const double v = grid.at(x, y, c);
                    sum_[at(x + 1, y + 1, c)] = v + sum_[at(x, y + 1, c)] + sum_[at(x + 1, y, c)] - sum_[at(x, y, c)];
                    sq_[at(x + 1, y + 1, c)] = v * v + sq_[at(x, y + 1, c)] + sq_[at(x + 1, y, c)] - sq_[at(x, y, c)];
                }
            }
        }
        const int k = tiles_;
        tile_.resize(static_cast<std::size_t>(channels_) * k * k);
        corner_.assign(static_cast<std::size_t>(channels_) * (k + 1) * (k + 1), 0.0);
        for (int c = 0; c < channels_; ++c) {
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) tile_[(static_cast<std::size_t>(c) * k + i) * k + j] = tiles.at(j, i, c);
            }
            auto t = [&](int i, int j) {
                return (i < 0 || j < 0 || i >= k || j >= k) ? 0.0 : tile_[(static_cast<std::size_t>(c) * k + i) * k + j];
            };
            for (int a = 0; a <= k; ++a) {
                for (int b = 0; b <= k; ++b) {
                    corner_[(static_cast<std::size_t>(c) * (k + 1) + a) * (k + 1) + b] =
                        t(a - 1, b - 1) - t(a, b - 1) - t(a - 1, b) + t(a, b);
                }
            }
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }

    // Tile boundary offsets and pattern moments depend only on the window size.
    struct SizeCache {
        int w = 0, h = 0;
        std::vector<int> ox, oy;
        double st = 0.0, stt = 0.0;
    };

    SizeCache prepare(int w, int h) const {
        SizeCache s;
        s.w = w;
        s.h = h;
        const int k = tiles_;
        s.ox.resize(k + 1);
        s.oy.resize(k + 1);
        for (int i = 0; i <= k; ++i) {
            s.ox[i] = static_cast<int>(std::lround(static_cast<double>(i) * w / k));
            s.oy[i] = static_cast<int>(std::lround(static_cast<double>(i) * h / k));
        }
        for (int c = 0; c < channels_; ++c) {
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) {
                    const double area = static_cast<double>(s.oy[i + 1] - s.oy[i]) * (s.ox[j + 1] - s.ox[j]);
                    const double t = tile_[(static_cast<std::size_t>(c) * k + i) * k + j];
                    s.st += t * area;
                    s.stt += t * t * area;
                }
            }
        }
        return s;
    }

    double score(const SizeCache& s, int x, int y) const {
        const int k = tiles_;
        const int x1 = x + s.w, y1 = y + s.h;
        double sa = 0.0, saa = 0.0, sat = 0.0;
        for (int c = 0; c < channels_; ++c) {
            sa += sum_[at(x1, y1, c)] - sum_[at(x, y1, c)] - sum_[at(x1, y, c)] + sum_[at(x, y, c)];
            saa += sq_[at(x1, y1, c)] - sq_[at(x, y1, c)] - sq_[at(x1, y, c)] + sq_[at(x, y, c)];
            const double* d = &corner_[static_cast<std::size_t>(c) * (k + 1) * (k + 1)];
            for (int a = 0; a <= k; ++a) {
                const int yy = y + s.oy[a];
                for (int b = 0; b <= k; ++b) {
                    sat += d[a * (k + 1) + b] * sum_[at(x + s.ox[b], yy, c)];
                }
            }
        }
        const double n = static_cast<double>(s.w) * s.h * channels_;
        const double va = saa - sa * sa / n;
        const double vt = s.stt - s.st * s.st / n;
        if (va <= 1e-12 || vt <= 1e-12) return 0.0;
        return (sat - sa * s.st / n) / std::sqrt(va * vt);
    }

    double score(int x, int y, int w, int h) const { return score(prepare(w, h), x, y); }

    // Correlation between per-tile means of the window and the tile values. Averaging
    // inside tiles suppresses cell-level noise; tiles narrower than one cell are skipped.
    double tile_score(int x, int y, int w, int h) const {
        const auto s = prepare(w, h);
        const int k = tiles_;
        double sm = 0.0, smm = 0.0, st = 0.0, stt = 0.0, smt = 0.0, n = 0.0;
        for (int c = 0; c < channels_; ++c) {
            for (int i = 0; i < k; ++i) {
                const int y0 = y + s.oy[i], y1 = y + s.oy[i + 1];
                if (y1 <= y0) continue;
                for (int j = 0; j < k; ++j) {
                    const int x0 = x + s.ox[j], x1 = x + s.ox[j + 1];
                    if (x1 <= x0) continue;
                    const double area = static_cast<double>(y1 - y0) * (x1 - x0);
                    const double m =
                        (sum_[at(x1, y1, c)] - sum_[at(x0, y1, c)] - sum_[at(x1, y0, c)] + sum_[at(x0, y0, c)]) / area;
                    const double t = tile_[(static_cast<std::size_t>(c) * k + i) * k + j];
                    sm += m;
                    smm += m * m;
                    st += t;
                    stt += t * t;
                    smt += m * t;
                    n += 1.0;
                }
            }
        }
        if (n < 2.0) return 0.0;
        const double vm = smm - sm * sm / n;
        const double vt = stt - st * st / n;
        if (vm <= 1e-12 || vt <= 1e-12) return 0.0;
        return (smt - sm * st / n) / std::sqrt(vm * vt);
    }

private:
    std::size_t at(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * (width_ + 1) + x) * channels_ + c;
    }

    int width_, height_, channels_, tiles_;
    std::vector<double> sum_, sq_, tile_, corner_;
};

struct Window {
    double score;
    BoundingBox cells;
};

std::vector<Window> suppress(std::vector<Window> windows, double iou, std::size_t limit) {
    std::sort(windows.begin(), windows.end(), [](const Window& a, const Window& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tie(a.cells.y, a.cells.x, a.cells.h, a.cells.w) < std::tie(b.cells.y, b.cells.x, b.cells.h, b.cells.w);
    });
    std::vector<Window> kept;
    for (const auto& w : windows) {
        if (kept.size() >= limit) break;
        const bool clash = std::any_of(kept.begin(), kept.end(),
                                       [&](const Window& k) { return box_iou(k.cells, w.cells) > iou; });
        if (!clash) kept.push_back(w);
    }
    return kept;
}

}  // namespace

PatternDetector::PatternDetector(std::shared_ptr<const ToyDiffusionBackend> backend)
    : PatternDetector(std::move(backend), Options{}) {}

PatternDetector::PatternDetector(std::shared_ptr<const ToyDiffusionBackend> backend, Options options)
    : backend_(std::move(backend)), options_(options) {
    if (!backend_) {
        throw ConfigError("pattern detector needs a toy backend");
    }
}

std::vector<Detection> PatternDetector::detect(const Image& image, std::string_view text) const {
    const auto& p = backend_->params();
    if (image.channels() != p.channels) {
        throw DimensionMismatch("detector input has the wrong channel count");
    }
    if (image.empty()) return {};
    const int gw = backend_->latent_width();
    const int gh = backend_->latent_height();
    const LatentRaster grid = area_resample(image, gw, gh);
    const LatentRaster tiles =
        prompt_target(text, p.pattern_tiles, p.pattern_tiles, p.channels, p.pattern_seed, p.pattern_tiles, p.pattern_scale);
    const WindowScorer scorer(grid, tiles);

    const int min_w = std::min(options_.min_window, gw);
    const int min_h = std::min(options_.min_window, gh);
    const int stride = std::max(1, options_.coarse_stride);
    std::vector<Window> coarse;
    for (int h = min_h; h <= gh; h += stride) {
        for (int w = min_w; w <= gw; w += stride) {
            const auto size = scorer.prepare(w, h);
            for (int y = 0; y + h <= gh; y += stride) {
                for (int x = 0; x + w <= gw; x += stride) {
                    const double s = scorer.score(size, x, y);
                    if (s >= options_.thresholds.text) coarse.push_back({s, {x, y, w, h}});
                }
            }
        }
    }
    std::vector<Window> seeds = suppress(std::move(coarse), options_.nms_iou, static_cast<std::size_t>(options_.max_seeds));

    for (auto& seed : seeds) {
        seed.score = scorer.tile_score(seed.cells.x, seed.cells.y, seed.cells.w, seed.cells.h);
        // Greedy hill climb over the four window parameters.
        for (;;) {
            Window best = seed;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    for (int dh = -1; dh <= 1; ++dh) {
                        for (int dw = -1; dw <= 1; ++dw) {
                            const BoundingBox b{seed.cells.x + dx, seed.cells.y + dy, seed.cells.w + dw, seed.cells.h + dh};
                            if (b.x < 0 || b.y < 0 || b.w < min_w || b.h < min_h || b.right() > gw || b.bottom() > gh) {
                                continue;
                            }
                            const double s = scorer.tile_score(b.x, b.y, b.w, b.h);
                            if (s > best.score + 1e-12) best = {s, b};
                        }
                    }
                }
            }
            if (best.cells == seed.cells) break;
            seed = best;
        }
    }
    const std::size_t seed_count = seeds.size();
    std::vector<Window> refined = suppress(std::move(seeds), options_.nms_iou, seed_count);

    const double sx = static_cast<double>(image.width()) / gw;
    const double sy = static_cast<double>(image.height()) / gh;
    std::vector<Detection> out;
    for (const auto& w : refined) {
        if (w.score < options_.thresholds.box) continue;
        const int x0 = static_cast<int>(std::lround(w.cells.x * sx));
        const int y0 = static_cast<int>(std::lround(w.cells.y * sy));
        const int x1 = static_cast<int>(std::lround(w.cells.right() * sx));
        const int y1 = static_cast<int>(std::lround(w.cells.bottom() * sy));
        out.push_back({{x0, y0, x1 - x0, y1 - y0}, w.score});
    }
    return out;
}

Mask BoxSegmenter::segment(const Image& image, const BoundingBox& box, std::string_view) const {
    Mask mask(image.width(), image.height(), 1, 0);
    const int x0 = std::clamp(box.x, 0, image.width());
    const int y0 = std::clamp(box.y, 0, image.height());
    const int x1 = std::clamp(box.right(), x0, image.width());
    const int y1 = std::clamp(box.bottom(), y0, image.height());
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) mask.at(x, y) = 1;
    }
    return mask;
}

PatternEmbedder::PatternEmbedder(std::shared_ptr<const ToyDiffusionBackend> backend, int grid)
    : backend_(std::move(backend)), grid_(grid) {
    if (!backend_ || grid_ < 1) {
        throw ConfigError("pattern embedder needs a toy backend and a positive grid");
    }
}

std::vector<double> PatternEmbedder::embed_image(const Image& image) const {
    const LatentRaster cells = area_resample(image, grid_, grid_);
    std::vector<double> v(cells.values().begin(), cells.values().end());
    if (v.empty()) return v;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double norm = 0.0;
    for (double& x : v) {
        x -= mean;
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
    }
    return v;
}

std::vector<double> PatternEmbedder::embed_text(std::string_view text) const {
    return embed_image(backend_->decode(backend_->target(text)));
}

}  // namespace stagecraft
