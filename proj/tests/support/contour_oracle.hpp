#pragma once

// Test-only analytic contour oracle, independent of the level-set module: for
// a field that is star-shaped decreasing along rays from the origin, the level
// curve {f = t} is parametrized by angle and located by bisection; integrals
// along it use dense polygonal quadrature of the analytic integrand.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace kinkopt::testing {

using Vec2 = Eigen::Vector2d;

class ContourOracle {
 public:
  // f decreasing along rays, f(0,0) > level; box half-width limits the rays.
  ContourOracle(std::function<double(const Vec2&)> f, double level, double box_half = 1.0,
                int n = 20000)
      : f_(std::move(f)) {
    points_.reserve(n);
    for (int k = 0; k < n; ++k) {
      double th = 2.0 * M_PI * k / n;
      Vec2 dir(std::cos(th), std::sin(th));
      double rmax = box_half / std::max(std::abs(dir.x()), std::abs(dir.y()));
      rmax *= 1.0 - 1e-12;
      double lo = 0.0, hi = rmax;
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        (f_(mid * dir) > level ? lo : hi) = mid;
      }
      points_.push_back(0.5 * (lo + hi) * dir);
    }
  }

  double length() const {
    double L = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i)
      L += (points_[(i + 1) % points_.size()] - points_[i]).norm();
    return L;
  }

  /// contour integral of g (evaluated at segment midpoints)
  double integral(const std::function<double(const Vec2&)>& g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      Vec2 a = points_[i], b = points_[(i + 1) % points_.size()];
      s += g(Vec2(0.5 * (a + b))) * (b - a).norm();
    }
    return s;
  }

  const std::vector<Vec2>& points() const { return points_; }

 private:
  std::function<double(const Vec2&)> f_;
  std::vector<Vec2> points_;
};

inline double radial_field(const Vec2& p) {
  return (1.0 - p.x() * p.x()) * (1.0 - p.y() * p.y());
}

inline Vec2 radial_gradient(const Vec2& p) {
  return {-2.0 * p.x() * (1.0 - p.y() * p.y()), -2.0 * p.y() * (1.0 - p.x() * p.x())};
}

}  // namespace kinkopt::testing
