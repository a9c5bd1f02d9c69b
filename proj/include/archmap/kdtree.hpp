#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace archmap {

/// Static 2-d tree over the rows of an N×2 matrix. Nodes are laid out
/// implicitly by median splits over a permutation of point indices; the
/// tree is read-only after construction and safe for concurrent queries.
template <typename Scalar>
class KdTree2 {
public:
    using Point = Eigen::Matrix<Scalar, 2, 1>;
    using PointMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;

    KdTree2() = default;

    explicit KdTree2(PointMatrix points) : points_(std::move(points)) {
        index_.resize(static_cast<std::size_t>(points_.rows()));
        std::iota(index_.begin(), index_.end(), Eigen::Index{0});
        axis_.assign(index_.size(), 0);
        build(0, index_.size(), 0);
    }

    bool empty() const noexcept { return index_.empty(); }
    Eigen::Index size() const noexcept { return points_.rows(); }
    const PointMatrix &points() const noexcept { return points_; }

    /// Index of the nearest stored point (lowest index among exact ties).
    Eigen::Index nearest(const Point &query, Scalar *dist2_out = nullptr) const {
        Eigen::Index best = -1;
        Scalar best_d2 = std::numeric_limits<Scalar>::infinity();
        nearest_impl(0, index_.size(), query, best, best_d2);
        if (dist2_out) *dist2_out = best_d2;
        return best;
    }

    /// Indices of all stored points within `radius` of `query`, ascending.
    std::vector<Eigen::Index> within(const Point &query, Scalar radius) const {
        std::vector<Eigen::Index> out;
        within_impl(0, index_.size(), query, radius * radius, out);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    void build(std::size_t lo, std::size_t hi, int depth) {
        if (hi - lo <= 1) return;
        const int axis = depth % 2;
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(index_.begin() + static_cast<std::ptrdiff_t>(lo),
                         index_.begin() + static_cast<std::ptrdiff_t>(mid),
                         index_.begin() + static_cast<std::ptrdiff_t>(hi),
                         [&](Eigen::Index a, Eigen::Index b) {
                             const Scalar ca = points_(a, axis), cb = points_(b, axis);
                             return ca < cb || (ca == cb && a < b);
                         });
        axis_[mid] = axis;
        build(lo, mid, depth + 1);
        build(mid + 1, hi, depth + 1);
    }

    void nearest_impl(std::size_t lo, std::size_t hi, const Point &q, Eigen::Index &best,
                      Scalar &best_d2) const {
        if (lo >= hi) return;
        const std::size_t mid = lo + (hi - lo) / 2;
        const Eigen::Index idx = index_[mid];
        const Scalar d2 = (points_.row(idx).transpose() - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
            best_d2 = d2;
            best = idx;
        }
        if (hi - lo == 1) return;
        const int axis = axis_[mid];
        const Scalar delta = q[axis] - points_(idx, axis);
        const bool left_first = delta <= 0;
        if (left_first) {
            nearest_impl(lo, mid, q, best, best_d2);
            if (delta * delta <= best_d2) nearest_impl(mid + 1, hi, q, best, best_d2);
        } else {
            nearest_impl(mid + 1, hi, q, best, best_d2);
            if (delta * delta <= best_d2) nearest_impl(lo, mid, q, best, best_d2);
        }
    }

    void within_impl(std::size_t lo, std::size_t hi, const Point &q, Scalar r2,
                     std::vector<Eigen::Index> &out) const {
        if (lo >= hi) return;
        const std::size_t mid = lo + (hi - lo) / 2;
        const Eigen::Index idx = index_[mid];
        if ((points_.row(idx).transpose() - q).squaredNorm() <= r2) out.push_back(idx);
        if (hi - lo == 1) return;
        const int axis = axis_[mid];
        const Scalar delta = q[axis] - points_(idx, axis);
        if (delta <= 0 || delta * delta <= r2) within_impl(lo, mid, q, r2, out);
        if (delta >= 0 || delta * delta <= r2) within_impl(mid + 1, hi, q, r2, out);
    }

    PointMatrix points_;
    std::vector<Eigen::Index> index_;
    std::vector<int> axis_;
};

} // namespace archmap
