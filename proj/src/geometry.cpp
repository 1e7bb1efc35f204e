#include "coassign/geometry.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace coassign {

ConvexPolygon::ConvexPolygon(std::vector<Point2> vertices) : vertices_(std::move(vertices))
{
    const std::size_t n = vertices_.size();
    if (n < 3)
        throw GeometryError("convex polygon needs at least 3 vertices, got " + std::to_string(n));
    for (const auto& v : vertices_)
        if (!std::isfinite(v.x) || !std::isfinite(v.y))
            throw GeometryError("convex polygon has a non-finite vertex");
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = vertices_[i];
        const Point2& b = vertices_[(i + 1) % n];
        const Point2& c = vertices_[(i + 2) % n];
        if (a == b)
            throw GeometryError("convex polygon has repeated vertex at index " + std::to_string(i));
        if (cross(a, b, c) <= 0.0)
            throw GeometryError("convex polygon is not strictly convex and counter-clockwise at vertex "
                                + std::to_string((i + 1) % n));
    }
}

Point2 ConvexPolygon::centroid() const
{
    Point2 c;
    for (const auto& v : vertices_)
        c = c + v;
    return c * (1.0 / static_cast<double>(vertices_.size()));
}

FocalEllipse::FocalEllipse(Point2 f1_, Point2 f2_, double two_a_) : f1(f1_), f2(f2_), two_a(two_a_)
{
    if (!std::isfinite(two_a) || two_a < distance(f1, f2) - kBoundaryTol)
        throw GeometryError("focal-sum bound is smaller than the focal distance");
}

bool point_in_ellipse(const Point2& p, const FocalEllipse& e)
{
    return e.focal_sum(p) < e.two_a;
}

bool point_in_polygon(const Point2& p, const ConvexPolygon& poly)
{
    const auto& v = poly.vertices();
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = v[i];
        const Point2& b = v[(i + 1) % n];
        // Scale-aware tolerance so points computed on an edge count as on it.
        const double tol = 1e-12 * std::max(1.0, (b - a).norm() * (p - a).norm());
        if (cross(a, b, p) < -tol)
            return false;
    }
    return true;
}

double segment_min_focal_sum(const Point2& a, const Point2& b, const Point2& f1, const Point2& f2)
{
    auto f = [&](double s) {
        const Point2 p = a + (b - a) * s;
        return distance(f1, p) + distance(p, f2);
    };
    const double len = (b - a).norm();
    double best = std::min(f(0.0), f(1.0));
    if (len == 0.0)
        return best;

    // Golden-section search on the convex objective; stop once the bracket is
    // below 1e-10 in arc length.
    constexpr double invphi = 0.6180339887498949;
    double lo = 0.0, hi = 1.0;
    double c = hi - invphi * (hi - lo);
    double d = lo + invphi * (hi - lo);
    double fc = f(c), fd = f(d);
    while ((hi - lo) * len > 1e-10) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - invphi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + invphi * (hi - lo);
            fd = f(d);
        }
    }
    best = std::min({best, fc, fd, f(0.5 * (lo + hi))});
    return best;
}

double polygon_min_focal_sum(const FocalEllipse& e, const ConvexPolygon& poly)
{
    // If the inter-focal segment touches the polygon, the global minimum
    // d(f1,f2) is attained inside it.
    if (point_in_polygon(e.f1, poly) || point_in_polygon(e.f2, poly)
        || point_in_polygon((e.f1 + e.f2) * 0.5, poly))
        return distance(e.f1, e.f2);
    const auto& v = poly.vertices();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i)
        best = std::min(best, segment_min_focal_sum(v[i], v[(i + 1) % v.size()], e.f1, e.f2));
    return best;
}

bool ellipse_intersects_polygon(const FocalEllipse& e, const ConvexPolygon& poly)
{
    const double limit = e.two_a + kBoundaryTol;
    for (const auto& p : poly.vertices())
        if (e.focal_sum(p) <= limit)
            return true;
    const auto& v = poly.vertices();
    for (std::size_t i = 0; i < v.size(); ++i)
        if (segment_min_focal_sum(v[i], v[(i + 1) % v.size()], e.f1, e.f2) <= limit)
            return true;
    // No boundary point reaches the ellipse: either disjoint or the ellipse
    // sits entirely inside the polygon.
    return point_in_polygon((e.f1 + e.f2) * 0.5, poly);
}

}  // namespace coassign
