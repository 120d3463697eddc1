#pragma once

// Level sets of P1 fields as oriented polylines.  Marching triangles gives one
// exact segment per crossed triangle; segments chain through shared edge
// crossings into maximal components.  Vertices hitting the level exactly are
// perturbed virtually (+1e-13 * |y|_inf) so the crossing topology is always
// generic.

#include <functional>
#include <optional>

#include "kinkopt/mesh.hpp"

namespace kinkopt::levelset {

using mesh::MeshPtr;
using mesh::NodalField;
using mesh::TriMesh;
using mesh::Vec2;

class LevelSetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One connected component of {y = t}: an oriented polyline with {y > t} on
/// its left.  Closed curves repeat the first point at the end.
struct LevelCurve {
  std::vector<Vec2> points;
  std::vector<int> seg_tri;  ///< source triangle of segment i (points[i] -> points[i+1])
  bool closed = false;
  double length = 0.0;
  double min_grad = 0.0;  ///< min |grad y| over traversed triangles

  int num_segments() const { return static_cast<int>(seg_tri.size()); }
};

struct LevelSetDecomposition {
  double level = 0.0;
  std::vector<LevelCurve> components;
  NodalField field;  ///< source field

  bool empty() const { return components.empty(); }
};

/// Per-triangle membership of the inner/outer epsilon-bands around one
/// component.
struct NeighborhoodClass {
  double epsilon = 0.0;
  std::vector<std::uint8_t> inside_band;   // C_eps^- (enclosed side)
  std::vector<std::uint8_t> outside_band;  // C_eps^+
};

struct TrackingReport {
  int count_in_band = 0;
  double hausdorff = 0.0;
};

struct JumpEstimate {
  std::vector<double> r_values;
  std::vector<double> estimates;
  double extrapolated = 0.0;
};

struct CurveProjection {
  Vec2 foot = Vec2::Zero();
  double distance = 0.0;
  double collinearity_residual = 0.0;
};

LevelSetDecomposition extract_level_set(const NodalField& y, double t);

double curve_integral(const LevelCurve& curve,
                      const std::function<double(int, const Vec2&)>& f);
double curve_integral(const LevelCurve& curve, const std::function<double(const Vec2&)>& f);

NeighborhoodClass classify_neighborhood(const NodalField& y, const LevelSetDecomposition& dec,
                                        int component_index, double epsilon);

TrackingReport component_tracking(const NodalField& y, const NodalField& y_n, double t,
                                  double epsilon, int component_index = 0);

/// sigma0/r * integral over {0 < |y - t_bar| <= r} of |d1 y| + |d2 y|, the
/// band clipped exactly per triangle; extrapolated is the Richardson value of
/// the last two estimates (linear-in-r model).
JumpEstimate jump_functional(const NodalField& y, double t_bar, double sigma0,
                             const std::vector<double>& r_list);

CurveProjection project_to_curve(const Vec2& p, const LevelCurve& curve, const NodalField& y);

std::string decomposition_to_json(const LevelSetDecomposition& dec);

}  // namespace kinkopt::levelset
