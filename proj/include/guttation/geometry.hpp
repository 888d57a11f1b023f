#pragma once

#include <array>
#include <cmath>

namespace guttation {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }

/// 2x3 affine map  p' = L p + t,  stored row-major as [[a, b, tx], [c, d, ty]].
struct AffineTransform {
    std::array<std::array<double, 3>, 2> m{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}};

    static AffineTransform identity() { return {}; }
    static AffineTransform from_rows(double a, double b, double tx, double c, double d, double ty) {
        AffineTransform t;
        t.m = {{{a, b, tx}, {c, d, ty}}};
        return t;
    }

    Point2 apply(Point2 p) const {
        return {m[0][0] * p.x + m[0][1] * p.y + m[0][2], m[1][0] * p.x + m[1][1] * p.y + m[1][2]};
    }
    Point2 apply_linear(Point2 p) const {
        return {m[0][0] * p.x + m[0][1] * p.y, m[1][0] * p.x + m[1][1] * p.y};
    }
    double determinant() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

    /// Requires a non-singular linear part.
    AffineTransform inverse() const {
        const double det = determinant();
        const double a = m[1][1] / det, b = -m[0][1] / det;
        const double c = -m[1][0] / det, d = m[0][0] / det;
        return from_rows(a, b, -(a * m[0][2] + b * m[1][2]), c, d, -(c * m[0][2] + d * m[1][2]));
    }

    /// (this ∘ other)(p) = this(other(p))
    AffineTransform compose(const AffineTransform& other) const {
        AffineTransform r;
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 3; ++j) {
                double v = m[i][0] * other.m[0][j] + m[i][1] * other.m[1][j];
                if (j == 2) v += m[i][2];
                r.m[i][j] = v;
            }
        }
        return r;
    }

    friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

}  // namespace guttation
