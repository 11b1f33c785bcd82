#pragma once

// Coordinate systems used throughout the toolkit.
//
// The relay wall is the plane z = 0 and the hidden scene lives in z > 0.
// Spherical coordinates are taken around a wall spot with theta the
// elevation from the wall normal (theta = 0 points straight into the scene)
// and phi the azimuth measured from +x.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <numbers>
#include <vector>

namespace ntf {

using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kHalfPi = 0.5 * std::numbers::pi;

// Separations below this are treated as confocal.
inline constexpr double kConfocalGammaThreshold = 1e-9;

struct WallSpot {
  double x = 0.0;
  double y = 0.0;

  Vec3 position() const { return {x, y, 0.0}; }
  friend bool operator==(const WallSpot&, const WallSpot&) = default;
};

struct SphericalPoint {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  WallSpot origin;
};

// Direction of view in a spot's spherical frame, fed to the reflectance head.
struct ViewAngles {
  double theta = 0.0;
  double phi = 0.0;
};

Vec3 spherical_to_cartesian(const SphericalPoint& p);

// Throws kDegenerate when q coincides with the origin. phi is 0 on the pole.
SphericalPoint cartesian_to_spherical(const Vec3& q, const WallSpot& origin);

// Prolate-spheroidal frame for one illumination/detection pair and one
// round-trip path length. gamma is half the focal separation and alpha the
// semi-major axis, so every point on the ellipsoid has |Q-P| + |Q-P'| = 2 alpha.
class EllipsoidFrame {
 public:
  // Throws kInvalidArgument unless path_length > |P - P'|.
  EllipsoidFrame(const WallSpot& illumination, const WallSpot& detection,
                 double path_length);

  const WallSpot& illumination() const { return illumination_; }
  const WallSpot& detection() const { return detection_; }
  double gamma() const { return gamma_; }
  double alpha() const { return alpha_; }
  double eccentricity() const { return gamma_ / alpha_; }

  // Local orthonormal basis: axis points from the midpoint toward the
  // illumination spot, lateral lies in the wall plane, normal is +z.
  const Vec3& center() const { return center_; }
  const Vec3& axis() const { return axis_; }
  const Vec3& lateral() const { return lateral_; }

 private:
  WallSpot illumination_;
  WallSpot detection_;
  double gamma_;
  double alpha_;
  Vec3 center_;
  Vec3 axis_;
  Vec3 lateral_;
};

struct EllipsoidalPoint {
  double mu = 0.0;
  double nu = 0.0;
  double varphi = 0.0;
};

// Focal radius r1 = alpha (1 - e^2) / (1 - e cos theta) where theta is the
// angle at the illumination spot between (Q - P) and (P' - P).
double ellipsoid_radius(double theta, const EllipsoidFrame& frame);

// Point at focal radius ellipsoid_radius(theta) from P, with phi rotating
// about the focal axis (phi = pi/2 points into the scene).
Vec3 ellipsoid_point(double theta, double phi, const EllipsoidFrame& frame);

// Both throw kDegenerate when gamma is below kConfocalGammaThreshold.
Vec3 ellipsoidal_to_cartesian(const EllipsoidalPoint& p,
                              const EllipsoidFrame& frame);
double ellipsoidal_jacobian(const EllipsoidalPoint& p,
                            const EllipsoidFrame& frame);

// mu of the ellipsoid whose focal distance sum equals path_length.
double ellipsoid_mu(const EllipsoidFrame& frame);

struct AngularSample {
  double theta = 0.0;
  double phi = 0.0;
  double weight = 0.0;
};

// Angular nodes with either quadrature weights or, for importance samples,
// the sampling density in `pdf` (one entry per sample).
struct SampleSet {
  std::vector<AngularSample> samples;
  std::vector<double> pdf;

  std::size_t size() const { return samples.size(); }
};

// Midpoint nodes over theta in [0, pi/2], phi in [0, 2 pi) with solid-angle
// weights dtheta * dphi * sin(theta).
SampleSet hemisphere_grid(int n_theta, int n_phi);

// Axis-aligned box; used as the support of fields and volumes.
struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  Vec3 extent() const { return hi - lo; }
  static Aabb unbounded();
  bool is_unbounded() const;
};

// Closest and farthest distance from a point to the box.
double min_distance(const Aabb& box, const Vec3& p);
double max_distance(const Aabb& box, const Vec3& p);

}  // namespace ntf
