#pragma once

#include <algorithm>
#include <cmath>
#include <compare>

namespace posetrack {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;

    double norm() const { return std::hypot(x, y); }
};

// Axis-aligned rectangle; valid instances have x0 < x1 and y0 < y1.
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double diagonal() const { return std::hypot(width(), height()); }

    friend bool operator==(const Rect&, const Rect&) = default;
};

// Square box centered on a point; side is positive.
struct BoundingBox {
    Vec2 center;
    double side = 0.0;

    double x0() const { return center.x - side / 2.0; }
    double x1() const { return center.x + side / 2.0; }
    double y0() const { return center.y - side / 2.0; }
    double y1() const { return center.y + side / 2.0; }

    // Border points count as inside.
    bool contains(const Vec2& p) const {
        return p.x >= x0() && p.x <= x1() && p.y >= y0() && p.y <= y1();
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Intersection over union of two square boxes; 0 when disjoint.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double ox = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
    const double oy = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
    const double inter = ox * oy;
    const double uni = a.side * a.side + b.side * b.side - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace posetrack
