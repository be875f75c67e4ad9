// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/layout.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stagecraft/errors.hpp"
#include "stagecraft/hashing.hpp"

namespace stagecraft {

double overlap_fraction(const BoundingBox& a, const BoundingBox& b) {
    const long long ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    const long long iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    const long long smaller = std::min(a.area(), b.area());
    if (smaller <= 0) return 0.0;
    return static_cast<double>(ix * iy) / static_cast<double>(smaller);
}

double max_pairwise_overlap(std::span<const BoundingBox> boxes) {
    double worst = 0.0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < boxes.size(); ++j) {
            worst = std::max(worst, overlap_fraction(boxes[i], boxes[j]));
        }
    }
    return worst;
}

BoundingBox collective_rect(std::span<const BoundingBox> boxes) {
    if (boxes.empty()) {
        throw SizeError("collective_rect needs at least one box");
    }
    int x0 = boxes.front().x, y0 = boxes.front().y;
    int x1 = boxes.front().right(), y1 = boxes.front().bottom();
    for (const auto& b : boxes) {
        x0 = std::min(x0, b.x);
        y0 = std::min(y0, b.y);
        x1 = std::max(x1, b.right());
        y1 = std::max(y1, b.bottom());
    }
    return {x0, y0, x1 - x0, y1 - y0};
}

BoundingBox clamp_to_canvas(const BoundingBox& box, const Canvas& canvas) {
    if (box.w > canvas.width || box.h > canvas.height) {
        throw SizeError("box larger than the canvas");
    }
    BoundingBox out = box;
    out.x = std::clamp(box.x, 0, canvas.width - box.w);
    out.y = std::clamp(box.y, 0, canvas.height - box.h);
    return out;
}

DispersionResult disperse(std::span<const BoundingBox> boxes, const Canvas& canvas, std::uint64_t rng_seed,
                          const DispersionParams& params) {
    std::vector<BoundingBox> start;
    start.reserve(boxes.size());
    for (const auto& b : boxes) start.push_back(clamp_to_canvas(b, canvas));

    SeededRng rng(rng_seed);
    const double diagonal = std::hypot(canvas.width, canvas.height);
    std::vector<BoundingBox> current = start;
    std::vector<char> involved(current.size());

    for (int iter = 0;; ++iter) {
        std::fill(involved.begin(), involved.end(), 0);
        bool any = false;
        for (std::size_t i = 0; i < current.size(); ++i) {
            for (std::size_t j = i + 1; j < current.size(); ++j) {
                if (overlap_fraction(current[i], current[j]) > params.threshold) {
                    involved[i] = involved[j] = 1;
                    any = true;
                }
            }
        }
        if (!any) return {current, true, iter};
        if (iter == params.max_iters) break;

        std::vector<BoundingBox> group;
        for (std::size_t i = 0; i < current.size(); ++i) {
            if (involved[i]) group.push_back(current[i]);
        }
        const BoundingBox rect = collective_rect(group);
        const double cx = rect.center_x();
        const double cy = rect.center_y();
        for (std::size_t i = 0; i < current.size(); ++i) {
            if (!involved[i]) continue;
            double dx = current[i].center_x() - cx;
            double dy = current[i].center_y() - cy;
            const double norm = std::hypot(dx, dy);
            if (norm < 1e-9) {
                const double angle = 2.0 * std::numbers::pi * rng.uniform();
                dx = std::cos(angle);
                dy = std::sin(angle);
            } else {
                dx /= norm;
                dy /= norm;
            }
            const double distance = diagonal * (params.base_step + params.jitter_step * rng.uniform());
            BoundingBox moved = current[i];
            moved.x += static_cast<int>(std::lround(dx * distance));
            moved.y += static_cast<int>(std::lround(dy * distance));
            current[i] = clamp_to_canvas(moved, canvas);
        }
    }
    return {start, false, params.max_iters};
}

}  // namespace stagecraft
