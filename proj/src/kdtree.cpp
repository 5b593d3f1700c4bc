#include "polgs/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace polgs {

KdTree::KdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
    if (pts_.empty())
        return;
    std::vector<int> order(pts_.size());
    std::iota(order.begin(), order.end(), 0);
    nodes_.reserve(pts_.size());
    root_ = build(order.data(), order.data() + order.size());
}

int KdTree::build(int* begin, int* end) {
    if (begin == end)
        return -1;
    Vec3 lo = pts_[*begin], hi = pts_[*begin];
    for (int* it = begin; it != end; ++it) {
        lo = lo.cwiseMin(pts_[*it]);
        hi = hi.cwiseMax(pts_[*it]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);

    int* mid = begin + (end - begin) / 2;
    std::nth_element(begin, mid, end, [&](int a, int b) {
        return pts_[a][axis] < pts_[b][axis];
    });

    const int id = int(nodes_.size());
    nodes_.push_back(Node{*mid, -1, -1, axis});
    const int l = build(begin, mid);
    const int r = build(mid + 1, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

template <typename Visit>
void KdTree::search(int node, const Vec3& q, double& worst,
                    Visit&& visit) const {
    if (node < 0)
        return;
    const Node& n = nodes_[node];
    visit(n.point, (pts_[n.point] - q).norm());

    const double delta = q[n.axis] - pts_[n.point][n.axis];
    const int near = delta < 0.0 ? n.left : n.right;
    const int far = delta < 0.0 ? n.right : n.left;
    search(near, q, worst, visit);
    if (std::abs(delta) < worst)
        search(far, q, worst, visit);
}

std::pair<int, double> KdTree::nearest(const Vec3& query) const {
    if (pts_.empty())
        throw std::logic_error("nearest() on an empty KdTree");
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    double worst = best_d;
    search(root_, query, worst, [&](int idx, double d) {
        if (d < best_d || (d == best_d && idx < best)) {
            best_d = d;
            best = idx;
            worst = best_d;
        }
    });
    return {best, best_d};
}

std::vector<std::pair<int, double>> KdTree::knn(const Vec3& query,
                                                int k) const {
    k = std::min<int>(k, int(pts_.size()));
    std::vector<std::pair<int, double>> heap; // max-heap on distance
    heap.reserve(k + 1);
    auto cmp = [](const std::pair<int, double>& a,
                  const std::pair<int, double>& b) {
        return a.second < b.second;
    };
    double worst = std::numeric_limits<double>::infinity();
    search(root_, query, worst, [&](int idx, double d) {
        if (int(heap.size()) < k) {
            heap.emplace_back(idx, d);
            std::push_heap(heap.begin(), heap.end(), cmp);
            if (int(heap.size()) == k)
                worst = heap.front().second;
        } else if (d < heap.front().second) {
            std::pop_heap(heap.begin(), heap.end(), cmp);
            heap.back() = {idx, d};
            std::push_heap(heap.begin(), heap.end(), cmp);
            worst = heap.front().second;
        }
    });
    std::sort_heap(heap.begin(), heap.end(), cmp);
    return heap;
}

} // namespace polgs
