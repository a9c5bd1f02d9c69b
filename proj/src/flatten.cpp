#include "archmap/flatten.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace archmap {

CurveSampling build_sampling(const ArchCurve &curve, double x_min, double x_max, int n) {
    if (!(x_min < x_max)) throw InvalidConfig("build_sampling requires x_min < x_max");
    if (n < 2) throw InvalidConfig("build_sampling requires at least 2 samples");

    CurveSampling out;
    out.curve = curve.parabola();
    out.sample_xs.resize(n);
    out.cumulative_s.resize(n);
    const double total = arc_length(out.curve, x_min, x_max);

    out.sample_xs[0] = x_min;
    out.cumulative_s[0] = 0.0;
    for (int k = 1; k < n - 1; ++k) {
        const double target = total * k / (n - 1);
        double lo = out.sample_xs[k - 1];
        double hi = x_max;
        // Bisect to full double resolution (well below the 1e-10 contract).
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (arc_length(out.curve, x_min, mid) < target)
                lo = mid;
            else
                hi = mid;
        }
        const double x = 0.5 * (lo + hi);
        out.sample_xs[k] = x;
        out.cumulative_s[k] = arc_length(out.curve, x_min, x);
    }
    out.sample_xs[n - 1] = x_max;
    out.cumulative_s[n - 1] = total;

    Points2 pts(n, 2);
    for (int k = 0; k < n; ++k) {
        pts(k, 0) = out.sample_xs[k];
        pts(k, 1) = out.curve(out.sample_xs[k]);
    }
    out.index = KdTree2<double>(std::move(pts));
    return out;
}

namespace {

double dist2_at(const Parabola<double> &curve, double x, const Eigen::Vector2d &p) {
    const double dx = x - p.x();
    const double dy = curve(x) - p.y();
    return dx * dx + dy * dy;
}

double newton_refine(const Parabola<double> &curve, double x, const Eigen::Vector2d &p,
                     double x_lo, double x_hi) {
    for (int it = 0; it < 20; ++it) {
        const double slope = curve.slope(x);
        const double g = (x - p.x()) + (curve(x) - p.y()) * slope;
        const double dg = 1.0 + slope * slope + (curve(x) - p.y()) * curve.second_derivative();
        if (!(dg > 0.0)) break;
        const double next = std::clamp(x - g / dg, x_lo, x_hi);
        const bool done = std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x));
        x = next;
        if (done) break;
    }
    return x;
}

} // namespace

CurveFoot nearest_point_on_curve(const CurveSampling &sampling, const Eigen::Vector2d &p) {
    const auto &curve = sampling.curve;
    const Eigen::Index n = sampling.size();
    const auto &pts = sampling.index.points();

    double d2_seed = 0.0;
    const Eigen::Index nearest = sampling.index.nearest(p, &d2_seed);
    const double spacing = sampling.total_length() / static_cast<double>(n - 1);
    const auto candidates = sampling.index.within(p, std::sqrt(d2_seed) + spacing);

    auto sample_d2 = [&](Eigen::Index i) { return (pts.row(i).transpose() - p).squaredNorm(); };

    std::vector<Eigen::Index> seeds;
    for (const Eigen::Index i : candidates) {
        const double di = sample_d2(i);
        const bool left_ok = i == 0 || di <= sample_d2(i - 1);
        const bool right_ok = i == n - 1 || di <= sample_d2(i + 1);
        if (left_ok && right_ok) seeds.push_back(i);
    }
    if (seeds.empty()) seeds.push_back(nearest);

    CurveFoot best;
    double best_d2 = std::numeric_limits<double>::infinity();
    const double scale2 = std::max(1.0, p.squaredNorm());
    for (const Eigen::Index seed : seeds) {
        const double x0 = sampling.sample_xs[seed];
        double x = newton_refine(curve, x0, p, sampling.x_min(), sampling.x_max());
        double d2 = dist2_at(curve, x, p);
        const double d2_sample = dist2_at(curve, x0, p);
        if (!(d2 <= d2_sample)) {
            x = x0;
            d2 = d2_sample;
        }
        const double s = arc_length(curve, sampling.x_min(), x);
        const double ref = std::isfinite(best_d2) ? std::max(d2, best_d2) : d2;
        const double tol = 1e-12 * ref + 1e-24 * scale2;
        const bool strictly_better = d2 < best_d2 - tol;
        const bool tie = !strictly_better && std::abs(d2 - best_d2) <= tol;
        if (strictly_better || (tie && s < best.s)) {
            best = {x, curve(x), s};
            best_d2 = d2;
        }
    }
    return best;
}

double normal_offset(const Parabola<double> &curve, const Eigen::Vector2d &p, const CurveFoot &foot) {
    const double slope = curve.slope(foot.x);
    const double norm = std::sqrt(1.0 + slope * slope);
    return ((p.x() - foot.x) * -slope + (p.y() - foot.y)) / norm;
}

Vertices to_fitted_frame(const Vertices &vertices, const ArchCurve &curve) {
    Vertices out = vertices;
    const Points2 centered = vertices.leftCols<2>().rowwise() - curve.origin_offset.transpose();
    out.leftCols<2>() = rotate2d(centered, curve.theta_star);
    return out;
}

CurveSampling default_sampling(const Vertices &fitted_vertices, const ArchCurve &curve, int n) {
    const double lo = fitted_vertices.col(0).minCoeff();
    const double hi = fitted_vertices.col(0).maxCoeff();
    const double pad = 0.05 * std::max(hi - lo, 1e-12);
    return build_sampling(curve, lo - pad, hi + pad, n);
}

FlattenedMesh flatten_mesh(const TriangleMesh &mesh, const ArchCurve &curve,
                           const CurveSampling &sampling) {
    const Vertices fitted = to_fitted_frame(mesh.vertices(), curve);
    FlattenedMesh out;
    out.faces = mesh.faces();
    out.curve = curve;
    out.flat_vertices.resize(fitted.rows(), 3);
    for (Eigen::Index i = 0; i < fitted.rows(); ++i) {
        const Eigen::Vector2d p = fitted.row(i).head<2>().transpose();
        const CurveFoot foot = nearest_point_on_curve(sampling, p);
        out.flat_vertices(i, 0) = foot.s;
        out.flat_vertices(i, 1) = normal_offset(sampling.curve, p, foot);
        out.flat_vertices(i, 2) = mesh.vertices()(i, 2);
    }
    return out;
}

} // namespace archmap
