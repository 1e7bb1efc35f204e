#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace coassign {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
    Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
    Point2 operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Point2&) const = default;

    double dot(const Point2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

inline double distance(const Point2& a, const Point2& b) { return (a - b).norm(); }

inline double cross(const Point2& o, const Point2& a, const Point2& b)
{
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Strictly convex polygon with counter-clockwise vertex order.
class ConvexPolygon {
public:
    explicit ConvexPolygon(std::vector<Point2> vertices);

    const std::vector<Point2>& vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }
    Point2 centroid() const;

private:
    std::vector<Point2> vertices_;
};

// Focal-sum ellipse {p : d(f1,p) + d(p,f2) < two_a}.  two_a == d(f1,f2)
// collapses to the segment f1-f2.
struct FocalEllipse {
    Point2 f1;
    Point2 f2;
    double two_a = 0.0;

    FocalEllipse() = default;
    FocalEllipse(Point2 f1, Point2 f2, double two_a);

    double focal_sum(const Point2& p) const { return distance(f1, p) + distance(p, f2); }
};

// Absolute tolerance below which a focal sum is treated as touching the
// ellipse boundary.  Contact counts as intersection.
inline constexpr double kBoundaryTol = 1e-9;

bool point_in_ellipse(const Point2& p, const FocalEllipse& e);
bool point_in_polygon(const Point2& p, const ConvexPolygon& poly);

double segment_min_focal_sum(const Point2& a, const Point2& b, const Point2& f1, const Point2& f2);

// Minimum focal sum over the closed polygon (vertices, edges and interior).
double polygon_min_focal_sum(const FocalEllipse& e, const ConvexPolygon& poly);

bool ellipse_intersects_polygon(const FocalEllipse& e, const ConvexPolygon& poly);

}  // namespace coassign
