#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "archmap/arch_fit.hpp"
#include "archmap/kdtree.hpp"
#include "archmap/mesh_io.hpp"

namespace archmap {

namespace detail {

// Antiderivative of sqrt(1 + u^2) up to the factor 1/2: u*sqrt(1+u^2) + asinh(u).
template <typename Scalar>
Scalar arc_primitive(Scalar u) {
    using std::asinh;
    using std::sqrt;
    return u * sqrt(Scalar(1) + u * u) + asinh(u);
}

} // namespace detail

/// Closed-form arc length of a parabola between two abscissae, signed by the
/// integration direction. With u = 2ax + b the integrand is sqrt(1+u^2) and
/// the antiderivative is [u sqrt(1+u^2) + asinh u] / (4a). When both u end
/// points share a sign the difference is rewritten with the identities
///   u1 s1 - u0 s0         = (u1-u0)(u1+u0)(1+u1^2+u0^2) / (u1 s1 + u0 s0)
///   asinh u1 - asinh u0   = asinh((u1-u0)(u1+u0) / (u1 s0 + u0 s1))
/// (s = sqrt(1+u^2)) so that the 1/(4a) factor cancels analytically and
/// nearly straight curves keep full relative precision.
template <typename Scalar>
Scalar arc_length(const Parabola<Scalar> &curve, Scalar x0, Scalar x1) {
    using std::asinh;
    using std::sqrt;
    const Scalar dx = x1 - x0;
    if (dx == Scalar(0)) return Scalar(0);
    const Scalar a = curve.a;
    if (a == Scalar(0)) return sqrt(Scalar(1) + curve.b * curve.b) * dx;

    const Scalar u0 = curve.slope(x0);
    const Scalar u1 = curve.slope(x1);
    const Scalar s0 = sqrt(Scalar(1) + u0 * u0);
    const Scalar s1 = sqrt(Scalar(1) + u1 * u1);
    if ((u0 >= Scalar(0)) == (u1 >= Scalar(0))) {
        const Scalar sum = u0 + u1;
        const Scalar algebraic = dx * sum * (Scalar(1) + u0 * u0 + u1 * u1) / (u1 * s1 + u0 * s0) / Scalar(2);
        const Scalar z = Scalar(2) * a * dx * sum / (u1 * s0 + u0 * s1);
        Scalar transcendental;
        if (std::abs(z) < Scalar(1e-4)) {
            // asinh(z)/(4a) with z = 2 a dx sum / den: series keeps a out of the denominator
            const Scalar ratio = dx * sum / (u1 * s0 + u0 * s1) / Scalar(2);
            transcendental = ratio * (Scalar(1) - z * z / Scalar(6) + Scalar(3) * z * z * z * z / Scalar(40));
        } else {
            transcendental = asinh(z) / (Scalar(4) * a);
        }
        return algebraic + transcendental;
    }
    return (detail::arc_primitive(u1) - detail::arc_primitive(u0)) / (Scalar(4) * a);
}

inline double arc_length(const ArchCurve &curve, double x0, double x1) {
    return arc_length(curve.parabola(), x0, x1);
}

/// Samples uniform in arc length along the fitted curve plus a kd-tree over
/// the sampled curve points.
struct CurveSampling {
    Parabola<double> curve;
    Eigen::VectorXd sample_xs;    // strictly increasing
    Eigen::VectorXd cumulative_s; // arc length from sample_xs[0]
    KdTree2<double> index;

    Eigen::Index size() const noexcept { return sample_xs.size(); }
    double x_min() const { return sample_xs[0]; }
    double x_max() const { return sample_xs[sample_xs.size() - 1]; }
    double total_length() const { return cumulative_s[cumulative_s.size() - 1]; }
};

/// Equal-Δs samples found by bisection on the closed-form arc length.
CurveSampling build_sampling(const ArchCurve &curve, double x_min, double x_max, int n);

struct CurveFoot {
    double x = 0.0, y = 0.0, s = 0.0;
};

/// Nearest curve point: kd-tree seeding, then at most 20 Newton steps on
/// (x - px) + (y(x) - py) y'(x) = 0. All sampled local minima within one
/// sample spacing of the best seed are refined so that equidistant feet are
/// detected; ties go to the smaller arc length. Feet are clamped to the
/// sampled x-range.
CurveFoot nearest_point_on_curve(const CurveSampling &sampling, const Eigen::Vector2d &p);

/// Signed metric distance from the foot along n = (-y'(x_c), 1) / |n|.
double normal_offset(const Parabola<double> &curve, const Eigen::Vector2d &p, const CurveFoot &foot);
inline double normal_offset(const ArchCurve &curve, const Eigen::Vector2d &p, const CurveFoot &foot) {
    return normal_offset(curve.parabola(), p, foot);
}

struct FlattenedMesh {
    Vertices flat_vertices; // (s, d, z) per row
    Faces faces;
    ArchCurve curve;
};

/// Mesh vertices expressed in the fitted frame: subtract the curve's origin
/// offset in xy, rotate by theta_star; z untouched.
Vertices to_fitted_frame(const Vertices &vertices, const ArchCurve &curve);

/// Sampling over the fitted-frame x-range of the vertices padded by 5% on
/// each side.
CurveSampling default_sampling(const Vertices &fitted_vertices, const ArchCurve &curve,
                               int n = 4096);

/// Maps every vertex to (s_c, d_n, z); faces are copied unchanged.
FlattenedMesh flatten_mesh(const TriangleMesh &mesh, const ArchCurve &curve,
                           const CurveSampling &sampling);

} // namespace archmap
