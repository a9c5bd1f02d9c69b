#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "archmap/mesh_io.hpp"

namespace archmap {

/// y = a x^2 + b x + c in the fitted (centered, rotated) occlusal frame.
template <typename Scalar>
struct Parabola {
    Scalar a{0}, b{0}, c{0};

    Scalar operator()(Scalar x) const { return (a * x + b) * x + c; }
    Scalar slope(Scalar x) const { return Scalar(2) * a * x + b; }
    Scalar second_derivative() const { return Scalar(2) * a; }

    template <typename NewScalar>
    Parabola<NewScalar> cast() const {
        return {static_cast<NewScalar>(a), static_cast<NewScalar>(b), static_cast<NewScalar>(c)};
    }
};

struct FitConfig {
    double coarse_step = 1.0;        // degrees
    double refine_half_window = 5.0; // degrees
    int refine_iterations = 2;
    double clip_quantile = 0.95;

    /// Throws InvalidConfig when any field is out of range.
    void validate() const;
};

struct ArchCurve {
    double theta_star = 0.0; // degrees, counter-clockwise
    double a = 0.0, b = 0.0, c = 0.0;
    double rms_residual = 0.0;
    double inlier_fraction = 1.0;
    Eigen::Vector2d origin_offset = Eigen::Vector2d::Zero();
    /// Best mean squared inlier residual after the coarse stage and after each
    /// refinement round.
    std::vector<double> stage_scores;

    Parabola<double> parabola() const { return {a, b, c}; }
};

struct ParabolaFit {
    double a = 0.0, b = 0.0, c = 0.0;
    Eigen::VectorXd residuals; // y_i - yhat_i
};

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> rotation2d(double degrees) {
    const double r = degrees * std::numbers::pi / 180.0;
    Eigen::Matrix<Scalar, 2, 2> m;
    m << Scalar(std::cos(r)), Scalar(-std::sin(r)), Scalar(std::sin(r)), Scalar(std::cos(r));
    return m;
}

/// Rotate each row of an N×2 expression counter-clockwise about the origin.
template <typename Derived>
Points2X<typename Derived::Scalar> rotate2d(const Eigen::MatrixBase<Derived> &points,
                                            double degrees) {
    using Scalar = typename Derived::Scalar;
    return points * rotation2d<Scalar>(degrees).transpose();
}

Point2Set rotate2d(const Point2Set &points, double degrees);

/// Linear-interpolation quantile (the "type 7" definition) of a non-empty
/// sample.
template <typename Derived>
typename Derived::Scalar quantile(const Eigen::DenseBase<Derived> &values, double q) {
    using Scalar = typename Derived::Scalar;
    std::vector<Scalar> v(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) v[static_cast<std::size_t>(i)] = values.derived().coeff(i);
    if (v.empty()) return Scalar(0);
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const Scalar vlo = v[lo];
    if (hi == lo) return vlo;
    const Scalar vhi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return vlo + Scalar(h - static_cast<double>(lo)) * (vhi - vlo);
}

/// Ordinary least squares on the Vandermonde design [x^2, x, 1].
/// Throws DegenerateDesign with fewer than 3 distinct abscissae.
ParabolaFit fit_parabola_ls(const Eigen::Ref<const Eigen::VectorXd> &x,
                            const Eigen::Ref<const Eigen::VectorXd> &y);
ParabolaFit fit_parabola_ls(const Point2Set &points);

/// Keeps |r| <= quantile(|r|, q); never fewer than 3 entries (the smallest
/// magnitudes are retained when the quantile would keep fewer).
Eigen::Array<bool, Eigen::Dynamic, 1> robust_clip(const Eigen::Ref<const Eigen::VectorXd> &residuals,
                                                  double quantile);

/// Drops points whose distance from the origin exceeds the q-quantile of
/// radial distances, then re-centers the survivors (offset accumulates).
Point2Set radial_preclip(const Point2Set &points, double quantile);

/// Coarse-to-fine rotational grid search. Each candidate angle is scored by
/// fit -> clip -> refit, mean squared residual over the inliers; refinement
/// rounds re-grid +-half_window around the incumbent at a tenth of the
/// previous step. Ties go to the smaller |theta|.
ArchCurve estimate_arch(const Point2Set &points, const FitConfig &config = {});

} // namespace archmap
