#include "doctest.h"

#include <random>

#include "archmap/arch_fit.hpp"
#include "archmap/synth.hpp"
#include "oracles.hpp"

using namespace archmap;

namespace {

Point2Set parabola_points(double a, double b, double c, double theta, double half_width, int n) {
    Point2Set p;
    p.points.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const double x = -half_width + 2.0 * half_width * i / (n - 1);
        p.points.row(i) << x, (a * x + b) * x + c;
    }
    p.points = rotate2d(p.points, -theta);
    return p;
}

// Mean squared inlier residual of the fit -> clip -> refit procedure at a
// given angle, from the normal-equation oracle.
double oracle_score(const Points2 &pts, double theta, double q) {
    const double r = theta * std::numbers::pi / 180.0;
    std::vector<double> x, y;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        x.push_back(std::cos(r) * pts(i, 0) - std::sin(r) * pts(i, 1));
        y.push_back(std::sin(r) * pts(i, 0) + std::cos(r) * pts(i, 1));
    }
    auto w = oracle::normal_equation_fit(x, y);
    std::vector<double> mag;
    for (std::size_t i = 0; i < x.size(); ++i) mag.push_back(std::abs(y[i] - ((w[0] * x[i] + w[1]) * x[i] + w[2])));
    std::vector<double> sorted = mag;
    std::sort(sorted.begin(), sorted.end());
    const double h = (sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(h);
    const double thr = lo + 1 < sorted.size() ? sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]) : sorted[lo];
    std::vector<double> kx, ky;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (mag[i] <= thr) {
            kx.push_back(x[i]);
            ky.push_back(y[i]);
        }
    w = oracle::normal_equation_fit(kx, ky);
    double sse = 0;
    for (std::size_t i = 0; i < kx.size(); ++i) {
        const double e = ky[i] - ((w[0] * kx[i] + w[1]) * kx[i] + w[2]);
        sse += e * e;
    }
    return sse / kx.size();
}

} // namespace

TEST_SUITE("arch_fit") {

TEST_CASE("rotate2d") {
    Points2 p(1, 2);
    p << 1, 0;
    CHECK(rotate2d(p, 90.0).row(0).isApprox(Eigen::RowVector2d(0, 1), 1e-15));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-100, 100);
    Points2 cloud(50, 2);
    for (Eigen::Index i = 0; i < cloud.size(); ++i) cloud.data()[i] = u(rng);
    CHECK(rotate2d(cloud, 0.0) == cloud);
    for (double theta : {13.0, -77.5, 180.0, 0.001}) CHECK((rotate2d(rotate2d(cloud, theta), -theta) - cloud).cwiseAbs().maxCoeff() < 1e-12);
    Point2Set set{cloud, Eigen::Vector2d(4, 5)};
    CHECK(rotate2d(set, 30.0).origin_offset == Eigen::Vector2d(4, 5));
}

TEST_CASE("exact parabolas") {
    Eigen::VectorXd x(5), y(5);
    x << -2, -1, 0, 1, 2;
    for (int i = 0; i < 5; ++i) y[i] = 0.5 * x[i] * x[i] + 2.0;
    const ParabolaFit fit = fit_parabola_ls(x, y);
    CHECK(fit.a == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::abs(fit.b) < 1e-14);
    CHECK(fit.c == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-13);

    Eigen::Vector3d x3(-1, 0.5, 3), y3(4, -2, 1);
    CHECK(fit_parabola_ls(x3, y3).residuals.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("noisy fit matches the normal equations") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::uniform_real_distribution<double> ux(-10, 10);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> xs, ys;
        Eigen::VectorXd x(50), y(50);
        for (int i = 0; i < 50; ++i) {
            x[i] = ux(rng);
            y[i] = 0.3 * x[i] * x[i] - 1.2 * x[i] + 4.0 + noise(rng);
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
        const ParabolaFit fit = fit_parabola_ls(x, y);
        const auto w = oracle::normal_equation_fit(xs, ys);
        CHECK(std::abs(fit.a - w[0]) < 1e-10);
        CHECK(std::abs(fit.b - w[1]) < 1e-10);
        CHECK(std::abs(fit.c - w[2]) < 1e-10);
    }
}

TEST_CASE("degenerate designs") {
    Eigen::Vector3d x(1, 1, 2), y(0, 1, 2);
    CHECK_THROWS_AS(fit_parabola_ls(x, y), DegenerateDesign);
    Eigen::Vector2d x2(1, 2), y2(0, 1);
    CHECK_THROWS_AS(fit_parabola_ls(x2, y2), DegenerateDesign);
    Point2Set vertical;
    vertical.points.resize(3, 2);
    vertical.points << 0, 0, 0, 0, 0, 0;
    CHECK_THROWS_AS(estimate_arch(vertical), DegenerateDesign);
}

TEST_CASE("robust_clip") {
    Eigen::VectorXd r(20);
    for (int i = 0; i < 19; ++i) r[i] = 0.05 * i * (i % 2 ? 1 : -1);
    r[19] = 100;
    auto keep = robust_clip(r, 0.95);
    CHECK_FALSE(keep[19]);
    CHECK(keep.head(19).all());

    CHECK(robust_clip(Eigen::VectorXd::Constant(7, 0.3), 0.95).all());
    CHECK(robust_clip(r, 1.0).all());

    Eigen::VectorXd tiny(4);
    tiny << 1, 2, 3, 1000;
    CHECK(robust_clip(tiny, 0.51).count() >= 3);
}

TEST_CASE("radial_preclip") {
    Point2Set ring;
    ring.points.resize(101, 2);
    for (int i = 0; i < 100; ++i) ring.points.row(i) << std::cos(i * 0.0628), std::sin(i * 0.0628);
    ring.points.row(100) << 50, 0;
    const Point2Set clipped = radial_preclip(ring, 0.95);
    CHECK(clipped.points.rows() == 100);
    CHECK(clipped.points.colwise().mean().norm() < 1e-12);
    CHECK((clipped.origin_offset + clipped.points.row(0).transpose() - ring.points.row(0).transpose()).norm() < 1e-12);

    Point2Set circle;
    circle.points = ring.points.topRows(100);
    CHECK(radial_preclip(circle, 0.95).points.rows() == 100);
    CHECK(radial_preclip(ring, 1.0).points == ring.points);
}

TEST_CASE("noise-free recovery") {
    const Point2Set p = parabola_points(0.02, 0.0, -5.0, 30.0, 30.0, 400);
    const ArchCurve curve = estimate_arch(p);
    CHECK(std::abs(curve.theta_star - 30.0) <= 0.05);
    CHECK(curve.a == doctest::Approx(0.02).epsilon(1e-6));
    CHECK(std::abs(curve.b) < 1e-6);
    CHECK(curve.c == doctest::Approx(-5.0).epsilon(1e-6));

    const ArchCurve aligned = estimate_arch(parabola_points(0.02, 0.0, -5.0, 0.0, 30.0, 400));
    CHECK(aligned.theta_star == 0.0);
    CHECK(aligned.a == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(aligned.rms_residual < 1e-9 * 60.0);
}

TEST_CASE("search agrees with an exhaustive fine grid") {
    std::mt19937_64 rng(8);
    SynthCloudParams params;
    params.theta_deg = -41.37;
    params.count = 600;
    Point2Set p{make_synthetic_cloud(params, rng), Eigen::Vector2d::Zero()};
    const ArchCurve curve = estimate_arch(p);
    double best_theta = 0, best = std::numeric_limits<double>::infinity();
    for (int k = -4400; k <= -3900; ++k) {
        const double s = oracle_score(p.points, k * 0.01, 0.95);
        if (s < best) {
            best = s;
            best_theta = k * 0.01;
        }
    }
    CHECK(std::abs(curve.theta_star - best_theta) <= 0.05);
    CHECK(curve.stage_scores.back() <= best * (1 + 1e-6));
}

TEST_CASE("gross outliers barely move the optimum") {
    std::mt19937_64 rng(13);
    SynthCloudParams params;
    params.theta_deg = 17.0;
    params.count = 3000;
    params.outlier_fraction = 0.0;
    const Points2 clean = make_synthetic_cloud(params, rng);
    Points2 dirty = clean;
    std::uniform_real_distribution<double> unit(0, 1);
    for (Eigen::Index i = 0; i < dirty.rows(); i += 20) {
        const Eigen::Vector2d normal = rotation2d<double>(-17.0) * Eigen::Vector2d(0, 1);
        dirty.row(i) += (8.0 + 7.0 * unit(rng)) * normal.transpose();
    }
    const double clean_theta = estimate_arch({clean, {}}).theta_star;
    const double dirty_theta = estimate_arch({dirty, {}}).theta_star;
    CHECK(std::abs(clean_theta - dirty_theta) <= 0.5);
}

TEST_CASE("rotation and scale behaviour") {
    std::mt19937_64 rng(17);
    SynthCloudParams params;
    params.theta_deg = 10.0;
    params.count = 1500;
    const Points2 pts = make_synthetic_cloud(params, rng);
    const Point2Set centred{pts.rowwise() - pts.colwise().mean(), {}};
    const ArchCurve base = estimate_arch(centred);

    const ArchCurve turned = estimate_arch(rotate2d(centred, 12.0));
    CHECK(std::abs(turned.theta_star - (base.theta_star - 12.0)) <= 0.011);

    // a rotation on the search grid reproduces the residual exactly
    const ArchCurve on_grid = estimate_arch(rotate2d(centred, 3.0));
    CHECK(std::abs(on_grid.rms_residual - base.rms_residual) <= 1e-9 * std::max(1.0, base.rms_residual));

    const ArchCurve scaled = estimate_arch({centred.points * 2.5, {}});
    CHECK(std::abs(scaled.theta_star - base.theta_star) <= 0.011);
    CHECK(scaled.rms_residual == doctest::Approx(2.5 * base.rms_residual).epsilon(1e-6));

    for (std::size_t i = 1; i < base.stage_scores.size(); ++i) CHECK(base.stage_scores[i] <= base.stage_scores[i - 1]);
    CHECK(base.stage_scores.size() == 3);
    CHECK(base.inlier_fraction > 0.0);
    CHECK(base.inlier_fraction <= 1.0);
}

TEST_CASE("config validation") {
    FitConfig c;
    CHECK_NOTHROW(c.validate());
    c.clip_quantile = 0.5;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c = {};
    c.coarse_step = 0;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c = {};
    c.refine_iterations = -1;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
}

}
