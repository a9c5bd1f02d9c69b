#include "archmap/arch_fit.hpp"

#include <cstdint>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace archmap {

void FitConfig::validate() const {
    if (!(coarse_step > 0.0)) throw InvalidConfig("arch_fit.coarse_step must be > 0");
    if (!(refine_half_window > 0.0)) throw InvalidConfig("arch_fit.refine_half_window must be > 0");
    if (refine_iterations < 0) throw InvalidConfig("arch_fit.refine_iterations must be >= 0");
    if (!(clip_quantile > 0.5 && clip_quantile <= 1.0))
        throw InvalidConfig("arch_fit.clip_quantile must lie in (0.5, 1]");
}

Point2Set rotate2d(const Point2Set &points, double degrees) {
    return {rotate2d(points.points, degrees), points.origin_offset};
}

namespace {

bool has_three_distinct(const Eigen::Ref<const Eigen::VectorXd> &x) {
    if (x.size() < 3) return false;
    const double first = x[0];
    double second = first;
    bool have_second = false;
    for (Eigen::Index i = 1; i < x.size(); ++i) {
        if (x[i] == first) continue;
        if (!have_second) {
            second = x[i];
            have_second = true;
        } else if (x[i] != second) {
            return true;
        }
    }
    return false;
}

} // namespace

ParabolaFit fit_parabola_ls(const Eigen::Ref<const Eigen::VectorXd> &x,
                            const Eigen::Ref<const Eigen::VectorXd> &y) {
    if (x.size() != y.size()) throw DegenerateDesign("x and y lengths differ");
    if (!has_three_distinct(x))
        throw DegenerateDesign("parabola fit needs at least 3 distinct x values");

    // Column scaling keeps the Vandermonde design well conditioned for
    // millimetre-scale abscissae.
    const double scale = x.cwiseAbs().maxCoeff();
    const Eigen::ArrayXd u = x.array() / scale;
    Eigen::MatrixXd design(x.size(), 3);
    design.col(0) = (u * u).matrix();
    design.col(1) = u.matrix();
    design.col(2).setOnes();

    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < 3) throw DegenerateDesign("normal matrix rank < 3");
    const Eigen::Vector3d w = qr.solve(y);

    ParabolaFit fit;
    fit.a = w[0] / (scale * scale);
    fit.b = w[1] / scale;
    fit.c = w[2];
    fit.residuals = y - design * w;
    return fit;
}

ParabolaFit fit_parabola_ls(const Point2Set &points) {
    return fit_parabola_ls(points.points.col(0), points.points.col(1));
}

Eigen::Array<bool, Eigen::Dynamic, 1> robust_clip(const Eigen::Ref<const Eigen::VectorXd> &residuals,
                                                  double q) {
    const Eigen::ArrayXd mag = residuals.cwiseAbs().array();
    const double threshold = quantile(mag, q);
    Eigen::Array<bool, Eigen::Dynamic, 1> keep = mag <= threshold;
    const Eigen::Index want = std::min<Eigen::Index>(3, mag.size());
    if (keep.count() < want) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(mag.size()));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index i, Eigen::Index j) { return mag[i] < mag[j]; });
        keep.setConstant(false);
        for (Eigen::Index k = 0; k < want; ++k) keep[order[static_cast<std::size_t>(k)]] = true;
    }
    return keep;
}

Point2Set radial_preclip(const Point2Set &points, double q) {
    const Eigen::ArrayXd radius = points.points.rowwise().norm().array();
    const double threshold = quantile(radius, q);
    const Eigen::Index kept = (radius <= threshold).count();
    if (kept == points.points.rows()) return points;

    Point2Set out;
    out.points.resize(kept, 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < points.points.rows(); ++i)
        if (radius[i] <= threshold) out.points.row(k++) = points.points.row(i);
    const Eigen::RowVector2d mean = out.points.colwise().mean();
    out.points.rowwise() -= mean;
    out.origin_offset = points.origin_offset + mean.transpose();
    return out;
}

namespace {

struct Candidate {
    double theta = 0.0;
    double score = std::numeric_limits<double>::infinity();
    ParabolaFit fit;
    Eigen::Index inliers = 0;
    bool valid = false;
};

// Scaled-abscissa moment fit used inside the search loop. With u = x / scale
// in [-1, 1] the 3x3 normal matrix is well conditioned, and one pass over the
// points is far cheaper than a QR of the N x 3 design.
struct MomentFit {
    Eigen::Vector3d w = Eigen::Vector3d::Zero(); // on (u^2, u, 1)
    bool ok = false;
};

struct Moments {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;

    void add(double u, double y) {
        const double u2 = u * u;
        s0 += 1.0;
        s1 += u;
        s2 += u2;
        s3 += u2 * u;
        s4 += u2 * u2;
        t0 += y;
        t1 += u * y;
        t2 += u2 * y;
    }

    MomentFit solve() const {
        Eigen::Matrix3d m;
        m << s4, s3, s2, s3, s2, s1, s2, s1, s0;
        MomentFit fit;
        const Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
        if (lu.rank() < 3) return fit;
        fit.w = lu.solve(Eigen::Vector3d(t2, t1, t0));
        fit.ok = true;
        return fit;
    }
};

struct Workspace {
    double scale = 1.0; // max |p|: bounds |x| at every angle
    Eigen::VectorXd x, y, u, residual;
    std::vector<double> scratch;
};

// Type-7 quantile of |residual|, selected in place on the scratch copy.
double clip_threshold(Workspace &ws, double q) {
    const std::size_t n = ws.scratch.size();
    const double h = (static_cast<double>(n) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, n - 1);
    std::nth_element(ws.scratch.begin(), ws.scratch.begin() + static_cast<std::ptrdiff_t>(lo), ws.scratch.end());
    double threshold = ws.scratch[lo];
    if (hi != lo) {
        const double vhi = *std::min_element(ws.scratch.begin() + static_cast<std::ptrdiff_t>(lo) + 1, ws.scratch.end());
        threshold += (h - static_cast<double>(lo)) * (vhi - threshold);
    }
    return threshold;
}

// One candidate angle: fit, clip, refit, score, with the passes over the
// points fused.
Candidate evaluate(const Points2 &points, double theta, double clip_q, Workspace &ws) {
    Candidate cand;
    cand.theta = theta;
    const Eigen::Matrix2d rot = rotation2d<double>(theta);
    const Eigen::Index n = points.rows();
    ws.x.resize(n);
    ws.y.resize(n);
    ws.u.resize(n);
    ws.residual.resize(n);
    ws.scratch.resize(static_cast<std::size_t>(n));

    const double r00 = rot(0, 0), r01 = rot(0, 1), r10 = rot(1, 0), r11 = rot(1, 1);
    const double inv_scale = 1.0 / ws.scale;
    Moments all;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double px = points(i, 0), py = points(i, 1);
        const double x = r00 * px + r01 * py, y = r10 * px + r11 * py;
        ws.x[i] = x;
        ws.y[i] = y;
        ws.u[i] = x * inv_scale;
        all.add(ws.u[i], y);
    }
    if (!has_three_distinct(ws.x)) return cand;
    const MomentFit first = all.solve();
    if (!first.ok) return cand;
    const auto &u = ws.u;

    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = ws.y[i] - ((first.w[0] * u[i] + first.w[1]) * u[i] + first.w[2]);
        ws.residual[i] = r;
        ws.scratch[static_cast<std::size_t>(i)] = std::abs(r);
    }
    const double threshold = clip_threshold(ws, clip_q);

    // refit on the kept points; track three distinct kept abscissae
    Moments kept;
    int distinct = 0;
    double d0 = 0.0, d1 = 0.0;
    auto take = [&](Eigen::Index i) {
        kept.add(u[i], ws.y[i]);
        if (distinct == 3) return;
        const double xi = ws.x[i];
        if (distinct == 0) d0 = xi, distinct = 1;
        else if (distinct == 1 && xi != d0) d1 = xi, distinct = 2;
        else if (distinct == 2 && xi != d0 && xi != d1) distinct = 3;
    };
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(ws.residual[i]) <= threshold) take(i);
    Eigen::Array<bool, Eigen::Dynamic, 1> fallback;
    if (kept.s0 < static_cast<double>(std::min<Eigen::Index>(3, n))) {
        fallback = robust_clip(ws.residual, clip_q);
        kept = Moments{};
        distinct = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (fallback[i]) take(i);
    }
    if (distinct < 3) return cand;
    const MomentFit second = kept.solve();
    if (!second.ok) return cand;

    const bool use_fallback = fallback.size() > 0;
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (use_fallback ? !fallback[i] : !(std::abs(ws.residual[i]) <= threshold)) continue;
        const double r = ws.y[i] - ((second.w[0] * u[i] + second.w[1]) * u[i] + second.w[2]);
        sse += r * r;
    }
    const auto count = static_cast<Eigen::Index>(kept.s0);
    cand.fit.a = second.w[0] / (ws.scale * ws.scale);
    cand.fit.b = second.w[1] / ws.scale;
    cand.fit.c = second.w[2];
    cand.inliers = count;
    cand.score = sse / kept.s0;
    cand.valid = true;
    return cand;
}

bool better(const Candidate &lhs, const Candidate &rhs) {
    if (!lhs.valid) return false;
    if (!rhs.valid) return true;
    const double tol = 1e-12 * std::max(lhs.score, rhs.score);
    if (lhs.score < rhs.score - tol) return true;
    if (rhs.score < lhs.score - tol) return false;
    return std::abs(lhs.theta) < std::abs(rhs.theta);
}

} // namespace

ArchCurve estimate_arch(const Point2Set &points, const FitConfig &config) {
    config.validate();
    if (points.points.rows() < 3) throw DegenerateDesign("arch fit needs at least 3 points");

    Candidate best;
    Workspace ws;
    ws.scale = points.points.rowwise().norm().maxCoeff();
    if (!(ws.scale > 0.0)) throw DegenerateDesign("arch fit needs at least 3 distinct points");
    const auto coarse_count = static_cast<int>(std::floor(180.0 / config.coarse_step + 1e-9));
    for (int k = 0; k <= coarse_count; ++k) {
        Candidate cand = evaluate(points.points, -90.0 + k * config.coarse_step, config.clip_quantile, ws);
        if (better(cand, best)) best = std::move(cand);
    }
    if (!best.valid) throw DegenerateDesign("every candidate rotation is degenerate");

    ArchCurve curve;
    curve.stage_scores.push_back(best.score);

    double step = config.coarse_step;
    for (int round = 0; round < config.refine_iterations; ++round) {
        step /= 10.0;
        const double center = best.theta;
        const auto half = static_cast<int>(std::llround(config.refine_half_window / step));
        for (int j = -half; j <= half; ++j) {
            if (j == 0) continue; // incumbent already scored
            const double theta = center + j * step;
            if (theta < -90.0 - 1e-12 || theta > 90.0 + 1e-12) continue;
            Candidate cand = evaluate(points.points, theta, config.clip_quantile, ws);
            if (better(cand, best)) best = std::move(cand);
        }
        curve.stage_scores.push_back(best.score);
    }

    curve.theta_star = best.theta;
    curve.a = best.fit.a;
    curve.b = best.fit.b;
    curve.c = best.fit.c;
    curve.rms_residual = std::sqrt(best.score);
    curve.inlier_fraction = static_cast<double>(best.inliers) / static_cast<double>(points.points.rows());
    curve.origin_offset = points.origin_offset;
    return curve;
}

} // namespace archmap
