#include "vva/spatial_index.hpp"

#include "vva/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace vva {

// ---------------------------------------------------------------- PointIndex

PointIndex::PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
    ids_.resize(points_.size());
    std::iota(ids_.begin(), ids_.end(), 0);
    nodes_.reserve(points_.size());
    root_ = build(0, static_cast<int>(ids_.size()), 0);
}

int PointIndex::build(int begin, int end, int depth) {
    if (begin >= end) return -1;
    Eigen::AlignedBox3d box;
    for (int i = begin; i < end; ++i) box.extend(points_[ids_[i]]);
    int axis = 0;
    box.sizes().maxCoeff(&axis);
    (void)depth;
    const int mid = (begin + end) / 2;
    std::nth_element(ids_.begin() + begin, ids_.begin() + mid, ids_.begin() + end, [&](int a, int b) {
        const double pa = points_[a][axis], pb = points_[b][axis];
        return pa < pb || (pa == pb && a < b);
    });
    const int node = static_cast<int>(nodes_.size());
    nodes_.push_back({ids_[mid], axis, -1, -1});
    const int l = build(begin, mid, depth + 1);
    const int r = build(mid + 1, end, depth + 1);
    nodes_[node].left = l;
    nodes_[node].right = r;
    return node;
}

int PointIndex::nearest(const Vec3& p) const {
    const auto r = k_nearest(p, 1);
    if (r.empty()) throw InvalidArgument("nearest query on an empty point set");
    return r.front().first;
}

std::vector<std::pair<int, double>> PointIndex::k_nearest(const Vec3& p, std::size_t k) const {
    using Entry = std::pair<double, int>;  // (squared distance, id); max-heap keeps the worst on top
    std::priority_queue<Entry> heap;
    if (k == 0 || root_ < 0) return {};
    auto worse = [&](double d2, int id) {
        if (heap.size() < k) return true;
        const Entry& top = heap.top();
        return d2 < top.first || (d2 == top.first && id < top.second);
    };
    // Explicit stack of (node, lower bound on squared distance).
    std::vector<std::pair<int, double>> stack;
    stack.emplace_back(root_, 0.0);
    while (!stack.empty()) {
        auto [n, bound] = stack.back();
        stack.pop_back();
        if (n < 0) continue;
        if (heap.size() == k && bound > heap.top().first) continue;
        const Node& node = nodes_[n];
        const double d2 = (points_[node.point] - p).squaredNorm();
        if (worse(d2, node.point)) {
            heap.emplace(d2, node.point);
            if (heap.size() > k) heap.pop();
        }
        const double diff = p[node.axis] - points_[node.point][node.axis];
        const int near = diff < 0 ? node.left : node.right;
        const int far = diff < 0 ? node.right : node.left;
        // Far side first so the near side is popped next.
        stack.emplace_back(far, std::max(bound, diff * diff));
        stack.emplace_back(near, bound);
    }
    std::vector<std::pair<int, double>> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        out[i] = {heap.top().second, std::sqrt(heap.top().first)};
        heap.pop();
    }
    return out;
}

// ---------------------------------------------------------------- SpatialIndex

namespace {
constexpr int kLeafSize = 4;
}

SpatialIndex::SpatialIndex(const TriMesh& mesh)
    : points_(mesh.vertices), faces_(mesh.faces), vertex_tree_(mesh.vertices) {
    const int nf = static_cast<int>(faces_.size());
    std::vector<Vec3> centroids(nf);
    for (int f = 0; f < nf; ++f)
        centroids[f] = (points_[faces_[f][0]] + points_[faces_[f][1]] + points_[faces_[f][2]]) / 3.0;
    order_.resize(nf);
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * static_cast<std::size_t>(nf) / kLeafSize + 2);
    if (nf > 0) build(0, nf, centroids);
    tri_.resize(nf);
    for (int i = 0; i < nf; ++i) {
        const Face& t = faces_[order_[i]];
        tri_[i] = {points_[t[0]], points_[t[1]], points_[t[2]]};
    }
}

int SpatialIndex::build(int begin, int end, const std::vector<Vec3>& centroids) {
    const int node = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Eigen::AlignedBox3d box, cbox;
    for (int i = begin; i < end; ++i) {
        const Face& t = faces_[order_[i]];
        for (int c : t) box.extend(points_[c]);
        cbox.extend(centroids[order_[i]]);
    }
    nodes_[node].box = box;
    if (end - begin <= kLeafSize) {
        nodes_[node].begin = begin;
        nodes_[node].end = end;
        return node;
    }
    int axis = 0;
    cbox.sizes().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        const double ca = centroids[a][axis], cb = centroids[b][axis];
        return ca < cb || (ca == cb && a < b);
    });
    const int l = build(begin, mid, centroids);
    const int r = build(mid, end, centroids);
    nodes_[node].left = l;
    nodes_[node].right = r;
    return node;
}

SurfacePoint SpatialIndex::query(const Vec3& p, double bound_sq, int bound_face) const {
    SurfacePoint best;
    best.face = bound_face;
    double best_sq = bound_sq;
    if (nodes_.empty()) return best;
    Vec3 point, bary;
    std::vector<std::pair<double, int>> stack;
    stack.reserve(64);
    stack.emplace_back(nodes_[0].box.squaredExteriorDistance(p), 0);
    while (!stack.empty()) {
        const auto [dbox, n] = stack.back();
        stack.pop_back();
        if (dbox > best_sq) continue;
        const Node& node = nodes_[n];
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int f = order_[i];
                const auto& t = tri_[i];
                const double d2 = closest_point_sq(p, t[0], t[1], t[2], point, bary);
                if (d2 < best_sq || (d2 == best_sq && f < best.face) || (d2 == best_sq && best.face < 0)) {
                    best_sq = d2;
                    best.face = f;
                    best.point = point;
                    best.bary = bary;
                }
            }
            continue;
        }
        const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
        const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
        // Push the farther child first so the nearer one is explored next.
        if (dl <= dr) {
            stack.emplace_back(dr, node.right);
            stack.emplace_back(dl, node.left);
        } else {
            stack.emplace_back(dl, node.left);
            stack.emplace_back(dr, node.right);
        }
    }
    best.distance = std::sqrt(best_sq);
    return best;
}

SurfacePoint SpatialIndex::closest_point(const Vec3& p) const {
    if (faces_.empty()) throw InvalidArgument("closest_point: index has no faces");
    return query(p, std::numeric_limits<double>::infinity(), -1);
}

std::optional<SurfacePoint> SpatialIndex::closest_point_within(const Vec3& p, double max_distance) const {
    if (faces_.empty()) return std::nullopt;
    // A sentinel id larger than any face lets exact-boundary hits through.
    SurfacePoint sp = query(p, max_distance * max_distance, std::numeric_limits<int>::max());
    if (sp.face == std::numeric_limits<int>::max()) return std::nullopt;
    return sp;
}

SurfacePoint SpatialIndex::closest_point_hinted(const Vec3& p, int hint_face) const {
    if (faces_.empty()) throw InvalidArgument("closest_point: index has no faces");
    if (hint_face < 0 || hint_face >= static_cast<int>(faces_.size())) return closest_point(p);
    const Face& t = faces_[hint_face];
    Vec3 point, bary;
    const double d2 = closest_point_sq(p, points_[t[0]], points_[t[1]], points_[t[2]], point, bary);
    // Seed with the hint's distance but a sentinel id, so the hint face itself
    // (or any lower-id tie) is re-discovered by the regular traversal.
    return query(p, std::nextafter(d2, std::numeric_limits<double>::infinity()), std::numeric_limits<int>::max());
}

int SpatialIndex::nearest_vertex(const Vec3& p) const { return vertex_tree_.nearest(p); }

}  // namespace vva
