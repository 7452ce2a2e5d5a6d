#pragma once

// Bounding volume hierarchy over surfel proxy rectangles (the 3-sigma extent
// of each Gaussian disk). Binned SAH build, at most 4 primitives per leaf.
// Traversal visits every leaf whose box the ray enters, so the candidate set
// is a superset of the true intersections.

#include <cstdint>
#include <limits>
#include <vector>

#include "radsurf/camera.hpp"
#include "radsurf/scene.hpp"

namespace radsurf {

inline constexpr double kSigmaCutoff = 3.0;  // Gaussian support radius in sigmas

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    void expand(const Vec3& p) {
        lo = cwise_min(lo, p);
        hi = cwise_max(hi, p);
    }
    void expand(const Aabb& b) {
        lo = cwise_min(lo, b.lo);
        hi = cwise_max(hi, b.hi);
    }
    Vec3 center() const { return 0.5 * (lo + hi); }
    double surface_area() const {
        Vec3 d = hi - lo;
        if (d.x < 0 || d.y < 0 || d.z < 0) return 0.0;
        return 2.0 * (d.x * d.y + d.y * d.z + d.z * d.x);
    }

    // Entry/exit parameters of the ray against the box; true if the interval
    // [entry, exit] intersects [t_lo, +inf).
    bool hit(const Vec3& o, const Vec3& inv_d, double t_lo, double& entry, double& exit) const {
        double t0 = t_lo, t1 = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            double ta = (lo[a] - o[a]) * inv_d[a];
            double tb = (hi[a] - o[a]) * inv_d[a];
            if (ta > tb) std::swap(ta, tb);
            if (ta > t0) t0 = ta;
            if (tb < t1) t1 = tb;
            if (t0 > t1) return false;
        }
        entry = t0;
        exit = t1;
        return true;
    }
};

// Proxy box: bounds of the four corners of the 3-sigma rectangle.
inline Aabb surfel_proxy_aabb(const Surfel& s) {
    Vec3 eu = (kSigmaCutoff * s.scale_u) * s.tangent_u;
    Vec3 ev = (kSigmaCutoff * s.scale_v) * s.tangent_v;
    Aabb box;
    box.expand(s.center + eu + ev);
    box.expand(s.center + eu - ev);
    box.expand(s.center - eu + ev);
    box.expand(s.center - eu - ev);
    return box;
}

class Bvh {
  public:
    static constexpr int kMaxDepth = 48;

    struct Node {
        Aabb box;
        // count > 0: leaf over prim_indices[first, first+count).
        // count == 0: interior; left child is the next node, right child at `link`.
        uint32_t link = 0;
        uint32_t first = 0;
        uint32_t count = 0;
    };

    Bvh() = default;

    explicit Bvh(const std::vector<Surfel>& surfels) {
        size_t n = surfels.size();
        prim_indices_.resize(n);
        std::vector<Aabb> boxes(n);
        std::vector<Vec3> centers(n);
        for (size_t i = 0; i < n; ++i) {
            prim_indices_[i] = static_cast<uint32_t>(i);
            boxes[i] = surfel_proxy_aabb(surfels[i]);
            centers[i] = boxes[i].center();
        }
        if (n == 0) return;
        nodes_.reserve(2 * n);
        build_range(0, n, boxes, centers);
    }

    bool empty() const { return nodes_.empty(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<uint32_t>& prim_indices() const { return prim_indices_; }

    // Invokes fn(prim) for every primitive whose proxy box the ray enters at
    // t >= t_lo. Used by tests and by unbounded gathers.
    template <class Fn>
    void for_each_candidate(const Ray& ray, Fn&& fn) const {
        if (nodes_.empty()) return;
        Vec3 inv_d = safe_inv(ray.dir);
        uint32_t stack[kMaxDepth + 2];
        int sp = 0;
        stack[sp++] = 0;
        while (sp > 0) {
            const Node& node = nodes_[stack[--sp]];
            double entry, exit;
            if (!node.box.hit(ray.origin, inv_d, ray.t_min, entry, exit)) continue;
            if (node.count > 0) {
                for (uint32_t i = 0; i < node.count; ++i) fn(prim_indices_[node.first + i]);
            } else {
                stack[sp++] = node.link;
                stack[sp++] = stack_child(node);
            }
        }
    }

    static Vec3 safe_inv(const Vec3& d) {
        auto inv = [](double v) {
            return v != 0.0 ? 1.0 / v : std::numeric_limits<double>::infinity();
        };
        return {inv(d.x), inv(d.y), inv(d.z)};
    }

  private:
    uint32_t stack_child(const Node& node) const {
        return static_cast<uint32_t>(&node - nodes_.data()) + 1;
    }

    static constexpr int kLeafSize = 4;
    static constexpr int kBins = 16;

    uint32_t build_range(size_t begin, size_t end, const std::vector<Aabb>& boxes,
                         const std::vector<Vec3>& centers, int depth = 0) {
        uint32_t node_index = static_cast<uint32_t>(nodes_.size());
        nodes_.emplace_back();
        Aabb bounds, cbounds;
        for (size_t i = begin; i < end; ++i) {
            bounds.expand(boxes[prim_indices_[i]]);
            cbounds.expand(centers[prim_indices_[i]]);
        }
        nodes_[node_index].box = bounds;
        size_t count = end - begin;
        if (count <= kLeafSize || depth >= kMaxDepth) {
            make_leaf(node_index, begin, count);
            return node_index;
        }
        Vec3 extent = cbounds.hi - cbounds.lo;
        int axis = 0;
        if (extent.y > extent[axis]) axis = 1;
        if (extent.z > extent[axis]) axis = 2;
        double lo = cbounds.lo[axis], width = extent[axis];
        size_t mid;
        if (width <= 0.0) {
            mid = begin + count / 2;  // coincident centers: split by index
        } else {
            struct Bin {
                Aabb box;
                size_t count = 0;
            };
            Bin bins[kBins];
            auto bin_of = [&](uint32_t prim) {
                int b = static_cast<int>(kBins * (centers[prim][axis] - lo) / width);
                return std::clamp(b, 0, kBins - 1);
            };
            for (size_t i = begin; i < end; ++i) {
                Bin& bin = bins[bin_of(prim_indices_[i])];
                bin.box.expand(boxes[prim_indices_[i]]);
                ++bin.count;
            }
            double best_cost = std::numeric_limits<double>::infinity();
            int best_split = -1;
            for (int split = 1; split < kBins; ++split) {
                Aabb lbox, rbox;
                size_t ln = 0, rn = 0;
                for (int b = 0; b < split; ++b) {
                    if (bins[b].count) lbox.expand(bins[b].box);
                    ln += bins[b].count;
                }
                for (int b = split; b < kBins; ++b) {
                    if (bins[b].count) rbox.expand(bins[b].box);
                    rn += bins[b].count;
                }
                if (ln == 0 || rn == 0) continue;
                double cost = lbox.surface_area() * static_cast<double>(ln) +
                              rbox.surface_area() * static_cast<double>(rn);
                if (cost < best_cost) {
                    best_cost = cost;
                    best_split = split;
                }
            }
            if (best_split < 0) {
                mid = begin + count / 2;
            } else {
                auto it = std::partition(
                    prim_indices_.begin() + static_cast<std::ptrdiff_t>(begin),
                    prim_indices_.begin() + static_cast<std::ptrdiff_t>(end),
                    [&](uint32_t prim) { return bin_of(prim) < best_split; });
                mid = static_cast<size_t>(it - prim_indices_.begin());
                if (mid == begin || mid == end) mid = begin + count / 2;
            }
        }
        build_range(begin, mid, boxes, centers, depth + 1);
        uint32_t right = build_range(mid, end, boxes, centers, depth + 1);
        nodes_[node_index].link = right;
        nodes_[node_index].count = 0;
        return node_index;
    }

    void make_leaf(uint32_t node, size_t begin, size_t count) {
        nodes_[node].first = static_cast<uint32_t>(begin);
        nodes_[node].count = static_cast<uint32_t>(count);
    }

    std::vector<Node> nodes_;
    std::vector<uint32_t> prim_indices_;
};

}  // namespace radsurf
