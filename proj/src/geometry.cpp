#include "ntf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ntf/error.hpp"

namespace ntf {

Vec3 spherical_to_cartesian(const SphericalPoint& p) {
  const double s = std::sin(p.theta);
  return {p.r * s * std::cos(p.phi) + p.origin.x,
          p.r * s * std::sin(p.phi) + p.origin.y, p.r * std::cos(p.theta)};
}

SphericalPoint cartesian_to_spherical(const Vec3& q, const WallSpot& origin) {
  const double dx = q.x() - origin.x;
  const double dy = q.y() - origin.y;
  const double rho = std::hypot(dx, dy);
  const double r = std::hypot(rho, q.z());
  require(r > 0.0, ErrorCode::kDegenerate,
          "cartesian_to_spherical: point coincides with origin");
  SphericalPoint out;
  out.origin = origin;
  out.r = r;
  out.theta = std::atan2(rho, q.z());
  if (rho == 0.0) {
    out.phi = 0.0;
  } else {
    double phi = std::atan2(dy, dx);
    if (phi < 0.0) phi += kTwoPi;
    if (phi >= kTwoPi) phi = 0.0;
    out.phi = phi;
  }
  return out;
}

EllipsoidFrame::EllipsoidFrame(const WallSpot& illumination,
                               const WallSpot& detection, double path_length)
    : illumination_(illumination), detection_(detection) {
  const Vec3 p = illumination.position();
  const Vec3 pp = detection.position();
  const double separation = (p - pp).norm();
  require(std::isfinite(path_length) && path_length > separation,
          ErrorCode::kInvalidArgument,
          "EllipsoidFrame: path length must exceed the focal separation");
  gamma_ = 0.5 * separation;
  alpha_ = 0.5 * path_length;
  center_ = 0.5 * (p + pp);
  if (separation > 0.0) {
    axis_ = (p - pp) / separation;
  } else {
    axis_ = Vec3::UnitX();
  }
  lateral_ = Vec3::UnitZ().cross(axis_);
}

double ellipsoid_radius(double theta, const EllipsoidFrame& frame) {
  const double e = frame.eccentricity();
  require(e < 1.0, ErrorCode::kInvalidArgument,
          "ellipsoid_radius: eccentricity must be below 1");
  return frame.alpha() * (1.0 - e * e) / (1.0 - e * std::cos(theta));
}

Vec3 ellipsoid_point(double theta, double phi, const EllipsoidFrame& frame) {
  const double r1 = ellipsoid_radius(theta, frame);
  const Vec3 toward_detection = -frame.axis();
  const Vec3 dir = std::cos(theta) * toward_detection +
                   std::sin(theta) * (std::cos(phi) * frame.lateral() +
                                      std::sin(phi) * Vec3::UnitZ());
  return frame.illumination().position() + r1 * dir;
}

namespace {

void require_ellipsoidal(const EllipsoidFrame& frame) {
  require(frame.gamma() >= kConfocalGammaThreshold, ErrorCode::kDegenerate,
          "ellipsoidal coordinates are singular for coincident foci");
}

}  // namespace

Vec3 ellipsoidal_to_cartesian(const EllipsoidalPoint& p,
                              const EllipsoidFrame& frame) {
  require_ellipsoidal(frame);
  const double g = frame.gamma();
  const double along = g * std::cosh(p.mu) * std::cos(p.nu);
  const double across = g * std::sinh(p.mu) * std::sin(p.nu);
  return frame.center() + along * frame.axis() +
         across * (std::cos(p.varphi) * frame.lateral() +
                   std::sin(p.varphi) * Vec3::UnitZ());
}

double ellipsoidal_jacobian(const EllipsoidalPoint& p,
                            const EllipsoidFrame& frame) {
  require_ellipsoidal(frame);
  const double g = frame.gamma();
  const double sh = std::sinh(p.mu);
  const double sn = std::sin(p.nu);
  return g * g * g * sh * sn * (sh * sh + sn * sn);
}

double ellipsoid_mu(const EllipsoidFrame& frame) {
  require_ellipsoidal(frame);
  return std::acosh(frame.alpha() / frame.gamma());
}

SampleSet hemisphere_grid(int n_theta, int n_phi) {
  require(n_theta >= 1 && n_phi >= 1, ErrorCode::kInvalidArgument,
          "hemisphere_grid: resolutions must be positive");
  const double dtheta = kHalfPi / n_theta;
  const double dphi = kTwoPi / n_phi;
  SampleSet set;
  set.samples.reserve(static_cast<std::size_t>(n_theta) * n_phi);
  for (int i = 0; i < n_theta; ++i) {
    const double theta = (i + 0.5) * dtheta;
    const double w = dtheta * dphi * std::sin(theta);
    for (int j = 0; j < n_phi; ++j) {
      set.samples.push_back({theta, (j + 0.5) * dphi, w});
    }
  }
  return set;
}

Aabb Aabb::unbounded() {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vec3::Constant(-inf), Vec3::Constant(inf)};
}

bool Aabb::is_unbounded() const {
  return !lo.allFinite() || !hi.allFinite();
}

double min_distance(const Aabb& box, const Vec3& p) {
  if (box.is_unbounded()) return 0.0;
  const Vec3 clamped = p.cwiseMax(box.lo).cwiseMin(box.hi);
  return (clamped - p).norm();
}

double max_distance(const Aabb& box, const Vec3& p) {
  if (box.is_unbounded()) return std::numeric_limits<double>::infinity();
  const Vec3 far = ((box.lo - p).cwiseAbs()).cwiseMax((box.hi - p).cwiseAbs());
  return far.norm();
}

}  // namespace ntf
