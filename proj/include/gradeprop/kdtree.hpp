#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gradeprop {

// Static 2-d tree over planar points. Built once, then queried read-only
// from any number of threads.
class KdTree2d {
public:
    struct Point {
        double x;
        double y;
        std::uint32_t payload;
    };

    KdTree2d() = default;
    explicit KdTree2d(std::vector<Point> points, std::size_t leaf_size = 16);

    // Appends the payload of every point with (dx^2 + dy^2) < r^2 to `out`.
    // Order is tree order, not sorted.
    void radius_query(double qx, double qy, double r, std::vector<std::uint32_t>& out) const;

    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }

private:
    struct Node {
        std::uint32_t begin;
        std::uint32_t end;
        // Children are -1 for leaves.
        std::int32_t left = -1;
        std::int32_t right = -1;
        double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Point> points_;
    std::vector<Node> nodes_;
    std::size_t leaf_size_ = 16;
};

}  // namespace gradeprop
