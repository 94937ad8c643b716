#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tiertrack {

/// (cx, cy, aspect, h) with aspect = width / height.
template <typename Scalar>
using Measurement = Eigen::Matrix<Scalar, 4, 1>;

/// Axis-aligned box in continuous pixel coordinates, corner origin.
template <typename Scalar>
class BBox {
 public:
  BBox(Scalar left, Scalar top, Scalar width, Scalar height)
      : left_(left), top_(top), width_(width), height_(height) {
    if (!std::isfinite(left) || !std::isfinite(top) || !std::isfinite(width) ||
        !std::isfinite(height)) {
      throw std::invalid_argument("box coordinates must be finite");
    }
    if (!(width > Scalar(0)) || !(height > Scalar(0))) {
      throw std::invalid_argument("box width and height must be positive");
    }
  }

  Scalar left() const { return left_; }
  Scalar top() const { return top_; }
  Scalar width() const { return width_; }
  Scalar height() const { return height_; }
  Scalar right() const { return left_ + width_; }
  Scalar bottom() const { return top_ + height_; }

  BBox translated(Scalar dx, Scalar dy) const { return BBox(left_ + dx, top_ + dy, width_, height_); }

  template <typename Other>
  BBox<Other> cast() const {
    return BBox<Other>(Other(left_), Other(top_), Other(width_), Other(height_));
  }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  Scalar left_, top_, width_, height_;
};

using BBoxd = BBox<double>;

/// Areas are taken from the right/bottom edges so that iou(a, a) == 1 exactly.
template <typename Scalar>
Scalar iou(const BBox<Scalar>& a, const BBox<Scalar>& b) {
  const Scalar ar = a.right(), ab = a.bottom();
  const Scalar br = b.right(), bb = b.bottom();
  const Scalar iw = std::min(ar, br) - std::max(a.left(), b.left());
  const Scalar ih = std::min(ab, bb) - std::max(a.top(), b.top());
  if (iw <= Scalar(0) || ih <= Scalar(0)) return Scalar(0);
  const Scalar inter = iw * ih;
  const Scalar area_a = (ar - a.left()) * (ab - a.top());
  const Scalar area_b = (br - b.left()) * (bb - b.top());
  const Scalar uni = area_a + area_b - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

/// Fraction of `a`'s area covered by `b`.
template <typename Scalar>
Scalar coverage(const BBox<Scalar>& a, const BBox<Scalar>& b) {
  const Scalar iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const Scalar ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= Scalar(0) || ih <= Scalar(0)) return Scalar(0);
  return std::min(Scalar(1), iw * ih / (a.width() * a.height()));
}

template <typename Scalar>
Measurement<Scalar> bbox_to_measurement(const BBox<Scalar>& b) {
  return Measurement<Scalar>(b.left() + b.width() / Scalar(2), b.top() + b.height() / Scalar(2),
                             b.width() / b.height(), b.height());
}

template <typename Derived>
BBox<typename Derived::Scalar> measurement_to_bbox(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 4);
  const Scalar h = m(3);
  const Scalar w = m(2) * h;
  return BBox<Scalar>(m(0) - w / Scalar(2), m(1) - h / Scalar(2), w, h);
}

}  // namespace tiertrack
