#include <cmath>
#include <random>

#include "doctest.h"
#include "ntf/error.hpp"
#include "ntf/geometry.hpp"

using namespace ntf;

TEST_SUITE("geometry") {

TEST_CASE("spherical round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const WallSpot spot{u(rng) - 0.5, u(rng) - 0.5};
    const SphericalPoint p{0.1 + u(rng), 0.01 + 1.5 * u(rng), 6.2 * u(rng), spot};
    const SphericalPoint back = cartesian_to_spherical(spherical_to_cartesian(p), spot);
    CHECK(back.r == doctest::Approx(p.r).epsilon(1e-12));
    CHECK(back.theta == doctest::Approx(p.theta).epsilon(1e-12));
    CHECK(back.phi == doctest::Approx(p.phi).epsilon(1e-12));
  }
}

TEST_CASE("pole and wall directions") {
  const Vec3 q = spherical_to_cartesian({2.0, 0.0, 1.3, {0.5, -0.5}});
  CHECK((q - Vec3(0.5, -0.5, 2.0)).norm() < 1e-15);
  CHECK(cartesian_to_spherical(q, {0.5, -0.5}).phi == 0.0);
  CHECK_THROWS_AS(cartesian_to_spherical(Vec3(0.5, -0.5, 0.0), {0.5, -0.5}), Error);
}

TEST_CASE("ellipsoid points keep the focal distance sum") {
  const EllipsoidFrame frame({-0.3, 0.1}, {0.2, -0.15}, 1.7);
  const Vec3 p = frame.illumination().position();
  const Vec3 pp = frame.detection().position();
  for (double theta : {0.1, 0.7, 1.5, 2.4, 3.0}) {
    for (double phi : {0.2, 1.5707963, 2.9}) {
      const Vec3 q = ellipsoid_point(theta, phi, frame);
      CHECK(std::abs((q - p).norm() + (q - pp).norm() - 1.7) < 1e-12);
      CHECK((q - p).norm() == doctest::Approx(ellipsoid_radius(theta, frame)).epsilon(1e-12));
      CHECK(q.z() >= -1e-12);
    }
  }
  const double mu = ellipsoid_mu(frame);
  for (double nu : {0.05, 0.9, 2.0, 3.1}) {
    for (double vp : {0.01, 1.0, 3.1}) {
      const Vec3 q = ellipsoidal_to_cartesian({mu, nu, vp}, frame);
      CHECK(std::abs((q - p).norm() + (q - pp).norm() - 1.7) < 1e-10);
    }
  }
}

TEST_CASE("ellipsoidal Jacobian matches finite differences") {
  const EllipsoidFrame frame({-0.2, 0.0}, {0.25, 0.1}, 1.3);
  const double h = 1e-6;
  for (double mu : {0.4, 1.1}) {
    for (double nu : {0.3, 1.4, 2.6}) {
      for (double vp : {0.5, 2.0}) {
        Eigen::Matrix3d J;
        const double x[3] = {mu, nu, vp};
        for (int c = 0; c < 3; ++c) {
          double a[3] = {x[0], x[1], x[2]};
          double b[3] = {x[0], x[1], x[2]};
          a[c] += h;
          b[c] -= h;
          J.col(c) = (ellipsoidal_to_cartesian({a[0], a[1], a[2]}, frame) -
                      ellipsoidal_to_cartesian({b[0], b[1], b[2]}, frame)) / (2 * h);
        }
        const double analytic = ellipsoidal_jacobian({mu, nu, vp}, frame);
        CHECK(std::abs(J.determinant()) == doctest::Approx(analytic).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("confocal pairs are degenerate for ellipsoidal coordinates") {
  const EllipsoidFrame frame({0.1, 0.1}, {0.1, 0.1}, 1.0);
  CHECK(frame.gamma() == 0.0);
  CHECK_THROWS_AS(ellipsoid_mu(frame), Error);
  CHECK_THROWS_AS(ellipsoidal_jacobian({0.5, 0.5, 0.5}, frame), Error);
  CHECK_THROWS_AS(EllipsoidFrame({0.0, 0.0}, {1.0, 0.0}, 0.9), Error);
}

TEST_CASE("hemisphere grid integrates the solid angle") {
  const SampleSet g = hemisphere_grid(64, 64);
  double total = 0.0;
  for (const auto& s : g.samples) total += s.weight;
  CHECK(g.size() == 64u * 64u);
  CHECK(total == doctest::Approx(kTwoPi).epsilon(1e-4));
}

TEST_CASE("box distances") {
  const Aabb box{Vec3(-1, -1, 1), Vec3(1, 1, 2)};
  CHECK(min_distance(box, Vec3(0, 0, 0)) == doctest::Approx(1.0));
  CHECK(max_distance(box, Vec3(0, 0, 0)) == doctest::Approx(std::sqrt(6.0)));
  CHECK(min_distance(box, Vec3(0, 0, 1.5)) == 0.0);
  CHECK(Aabb::unbounded().is_unbounded());
}

}
