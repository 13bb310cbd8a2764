#include "gradeprop/kdtree.hpp"

#include <algorithm>
#include <limits>

namespace gradeprop {

KdTree2d::KdTree2d(std::vector<Point> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
        build(0, static_cast<std::uint32_t>(points_.size()));
    }
}

std::int32_t KdTree2d::build(std::uint32_t begin, std::uint32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.min_x = node.min_y = std::numeric_limits<double>::infinity();
    node.max_x = node.max_y = -std::numeric_limits<double>::infinity();
    for (auto i = begin; i < end; ++i) {
        node.min_x = std::min(node.min_x, points_[i].x);
        node.max_x = std::max(node.max_x, points_[i].x);
        node.min_y = std::min(node.min_y, points_[i].y);
        node.max_y = std::max(node.max_y, points_[i].y);
    }
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= leaf_size_) {
        return id;
    }

    // Split along the wider extent.
    const bool split_x = (node.max_x - node.min_x) >= (node.max_y - node.min_y);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                     [split_x](const Point& a, const Point& b) {
                         if (split_x) return a.x < b.x || (a.x == b.x && a.payload < b.payload);
                         return a.y < b.y || (a.y == b.y && a.payload < b.payload);
                     });
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree2d::radius_query(double qx, double qy, double r, std::vector<std::uint32_t>& out) const {
    if (nodes_.empty()) return;
    const double r2 = r * r;
    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();

        const double dx = std::max({node.min_x - qx, 0.0, qx - node.max_x});
        const double dy = std::max({node.min_y - qy, 0.0, qy - node.max_y});
        if (dx * dx + dy * dy >= r2) continue;

        if (node.left < 0) {
            for (auto i = node.begin; i < node.end; ++i) {
                const double px = points_[i].x - qx;
                const double py = points_[i].y - qy;
                if (px * px + py * py < r2) out.push_back(points_[i].payload);
            }
        } else {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
    }
}

}  // namespace gradeprop
