#pragma once

// Reference computations used by the unit and acceptance suites. None of
// them calls into the library code they check.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

/// Adaptive Gauss-Kronrod integral of sqrt(1 + (2ax + b)^2).
inline double arc_length(double a, double b, double x0, double x1) {
    auto f = [a, b](double x) {
        const double u = 2.0 * a * x + b;
        return std::sqrt(1.0 + u * u);
    };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, x0, x1, 12, 1e-13, &err);
}

/// Least squares y = a x^2 + b x + c through the 3x3 normal equations,
/// accumulated and solved (Cramer) in long double.
inline std::array<double, 3> normal_equation_fit(const std::vector<double> &x, const std::vector<double> &y) {
    long double s[5] = {0, 0, 0, 0, 0}, t[3] = {0, 0, 0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double p = 1;
        for (int k = 0; k < 5; ++k) {
            s[k] += p;
            if (k < 3) t[k] += p * y[i];
            p *= x[i];
        }
    }
    // rows: [s4 s3 s2 | t2], [s3 s2 s1 | t1], [s2 s1 s0 | t0]
    const long double m[3][3] = {{s[4], s[3], s[2]}, {s[3], s[2], s[1]}, {s[2], s[1], s[0]}};
    const long double r[3] = {t[2], t[1], t[0]};
    auto det = [](const long double q[3][3]) {
        return q[0][0] * (q[1][1] * q[2][2] - q[1][2] * q[2][1]) - q[0][1] * (q[1][0] * q[2][2] - q[1][2] * q[2][0]) +
               q[0][2] * (q[1][0] * q[2][1] - q[1][1] * q[2][0]);
    };
    const long double d = det(m);
    std::array<double, 3> out{};
    for (int col = 0; col < 3; ++col) {
        long double q[3][3];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) q[i][j] = j == col ? r[i] : m[i][j];
        out[static_cast<std::size_t>(col)] = static_cast<double>(det(q) / d);
    }
    return out;
}

struct Nearest {
    double x = 0.0, dist2 = std::numeric_limits<double>::infinity();
};

/// Brute-force scan of the squared distance from p to y = ax^2+bx+c. Keeps
/// the first (smallest-x) minimum.
inline Nearest dense_nearest(double a, double b, double c, double px, double py, double x0, double x1,
                             double step) {
    Nearest best;
    const auto n = static_cast<long>(std::ceil((x1 - x0) / step));
    for (long i = 0; i <= n; ++i) {
        const double x = std::min(x1, x0 + static_cast<double>(i) * step);
        const double dy = (a * x + b) * x + c - py;
        const double d2 = (x - px) * (x - px) + dy * dy;
        if (d2 < best.dist2 - 1e-15) best = {x, d2};
    }
    return best;
}

/// Signed distance from p to the line through q0, q1 (positive on the left
/// of q0 -> q1).
inline double line_distance(double q0x, double q0y, double q1x, double q1y, double px, double py) {
    const double dx = q1x - q0x, dy = q1y - q0y;
    return (dx * (py - q0y) - dy * (px - q0x)) / std::hypot(dx, dy);
}

/// Pixel coverage of a screen-space triangle by barycentric solve at pixel
/// centres, inclusive of the boundary. `margin` receives the smallest
/// |barycentric coordinate| seen over all pixels, so a caller can check that
/// no centre sits ambiguously on an edge.
inline std::vector<std::uint8_t> triangle_coverage(const std::array<std::array<double, 2>, 3> &t, int width,
                                                   int height, double *margin = nullptr) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
    const double x0 = t[0][0], y0 = t[0][1];
    const double e1x = t[1][0] - x0, e1y = t[1][1] - y0;
    const double e2x = t[2][0] - x0, e2y = t[2][1] - y0;
    const double det = e1x * e2y - e2x * e1y;
    double smallest = std::numeric_limits<double>::infinity();
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5 - x0, py = y + 0.5 - y0;
            const double beta = (px * e2y - e2x * py) / det;
            const double gamma = (e1x * py - px * e1y) / det;
            const double alpha = 1.0 - beta - gamma;
            smallest = std::min({smallest, std::abs(alpha), std::abs(beta), std::abs(gamma)});
            if (alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0) mask[static_cast<std::size_t>(y) * width + x] = 1;
        }
    if (margin) *margin = smallest;
    return mask;
}

/// Pinhole projection for a camera at `eye` looking at the origin along a
/// coordinate axis. `side`, `up` and `forward` are the camera axes written
/// out by hand; fov_up is the full angle along `up`.
struct AxisCamera {
    std::array<double, 3> eye, side, up, forward;
    double tan_half_up;
    int width, height;

    std::array<double, 2> project(const std::array<double, 3> &p) const {
        double rel[3] = {p[0] - eye[0], p[1] - eye[1], p[2] - eye[2]};
        auto dot = [&](const std::array<double, 3> &v) { return rel[0] * v[0] + rel[1] * v[1] + rel[2] * v[2]; };
        const double depth = dot(forward);
        const double tan_half_side = tan_half_up * width / height;
        const double sx = dot(side) / (depth * tan_half_side);
        const double sy = dot(up) / (depth * tan_half_up);
        return {(sx + 1.0) * 0.5 * width, (1.0 - sy) * 0.5 * height};
    }
};

} // namespace oracle
