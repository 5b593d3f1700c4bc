#pragma once

#include <utility>
#include <vector>

#include "polgs/types.hpp"

namespace polgs {

// Static 3-d KD-tree over a point set; exact nearest-neighbor queries used
// by the chamfer metric and by the initializer's spacing estimate.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::vector<Vec3> points);

    size_t size() const { return pts_.size(); }
    const std::vector<Vec3>& points() const { return pts_; }

    // Index and Euclidean distance of the closest stored point; the tree
    // must be non-empty.
    std::pair<int, double> nearest(const Vec3& query) const;

    // The k closest points in ascending distance (k capped at size()).
    std::vector<std::pair<int, double>> knn(const Vec3& query, int k) const;

private:
    struct Node {
        int point = -1;
        int left = -1, right = -1;
        int axis = 0;
    };

    int build(int* begin, int* end);
    template <typename Visit>
    void search(int node, const Vec3& q, double& worst, Visit&& visit) const;

    std::vector<Vec3> pts_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

} // namespace polgs
