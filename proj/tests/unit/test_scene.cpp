#include <cmath>
#include <random>

#include "doctest.h"
#include "ntf/error.hpp"
#include "ntf/scene.hpp"

using namespace ntf;

namespace {

GroundTruthScene sphere_scene() {
  PrimitiveParams p;
  p.center = Vec3(0.03, -0.02, 0.45);
  p.radius = 0.12;
  return make_primitive_scene(PrimitiveKind::kSphere, p);
}

}  // namespace

TEST_SUITE("scene") {

TEST_CASE("scan patterns") {
  const ScanPattern s = ScanPattern::confocal_grid(4, 0.3);
  REQUIRE(s.size() == 16u);
  CHECK(s.confocal());
  CHECK(s.entries[0].detection.x == doctest::Approx(-0.3));
  CHECK(s.entries[1].detection.x > s.entries[0].detection.x);
  CHECK(s.entries[1].detection.y == s.entries[0].detection.y);
  CHECK_FALSE(ScanPattern::offset_grid(4, 0.3, {0.1, 0.0}).confocal());
  const ScanPattern f = ScanPattern::fixed_laser_grid(3, 0.2, {0.0, 0.0});
  CHECK(f.entries[4].collocated());
  CHECK_FALSE(f.entries[0].collocated());
}

TEST_CASE("trilinear sampling reproduces voxel values") {
  const GroundTruthScene s = sphere_scene();
  const GridSpec& g = s.grid;
  for (int k = 0; k < g.nz; k += 5) {
    for (int j = 0; j < g.ny; j += 3) {
      for (int i = 0; i < g.nx; i += 3) {
        CHECK(s.sample_sigma(g.voxel_center(i, j, k)) ==
              doctest::Approx(s.sigma[g.index(i, j, k)]).epsilon(1e-12));
      }
    }
  }
  CHECK(s.sample_sigma(Vec3(0, 0, 5.0)) == 0.0);
}

TEST_CASE("scene validation") {
  GroundTruthScene s = sphere_scene();
  s.sigma[3] = -1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  GridSpec wall = s.grid;
  wall.origin.z() = 0.01;
  CHECK_THROWS_AS(GroundTruthScene::empty(wall).validate(), Error);
}

TEST_CASE("empty scene gives a zero transient") {
  const auto img = simulate_confocal(GroundTruthScene::empty(GridSpec{}),
                                     ScanPattern::confocal_grid(2, 0.2), 64,
                                     60e-12, PhysicsConstants{});
  CHECK(img.data.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("confocal shell value matches a Monte Carlo shell integral") {
  const GroundTruthScene s = sphere_scene();
  const PhysicsConstants pc;
  const double dt = 60e-12;
  const double path_bin = pc.c * dt;
  ScanPattern scan;
  scan.entries.push_back({{0.05, 0.0}, {0.05, 0.0}});
  const Vec3 origin(0.05, 0.0, 0.0);
  const int bin = static_cast<int>((0.45 * 2.0) / path_bin);
  const double r = 0.5 * path_bin * (bin + 0.5);
  SimulationOptions opt;
  opt.n_theta = 128;
  opt.n_phi = 128;
  const auto img = simulate_confocal(s, scan, bin + 4, dt, pc, opt);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 400000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    // Uniform on the hemisphere: cos(theta) uniform in [0, 1].
    const double ct = u(rng);
    const double st = std::sqrt(1.0 - ct * ct);
    const double phi = kTwoPi * u(rng);
    sum += s.sample_sigma(origin + r * Vec3(st * std::cos(phi), st * std::sin(phi), ct));
  }
  const double expected = path_bin * pc.gamma0 / (r * r) * kTwoPi * sum / n;
  CHECK(img.data(0, bin) == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("coincident non-confocal spots equal the confocal transient") {
  const GroundTruthScene s = sphere_scene();
  const ScanPattern scan = ScanPattern::confocal_grid(3, 0.2);
  const auto a = simulate_confocal(s, scan, 160, 60e-12, PhysicsConstants{});
  const auto b = simulate_nonconfocal(s, scan, 160, 60e-12, PhysicsConstants{});
  CHECK((a.data - b.data).cwiseAbs().maxCoeff() <= 1e-6 * a.data.cwiseAbs().maxCoeff());
}

TEST_CASE("small separations approach the confocal transient") {
  const GroundTruthScene s = sphere_scene();
  ScanPattern conf, near;
  conf.entries.push_back({{0.0, 0.0}, {0.0, 0.0}});
  near.entries.push_back({{0.001, 0.0}, {-0.001, 0.0}});
  SimulationOptions opt;
  opt.n_theta = 128;
  opt.n_phi = 128;
  const auto a = simulate_confocal(s, conf, 160, 60e-12, PhysicsConstants{}, opt);
  const auto b = simulate_nonconfocal(s, near, 160, 60e-12, PhysicsConstants{}, opt);
  Eigen::Index peak;
  a.data.row(0).maxCoeff(&peak);
  CHECK(b.data(0, peak) == doctest::Approx(a.data(0, peak)).epsilon(0.02));
  CHECK(std::abs(b.data.sum() - a.data.sum()) < 0.02 * a.data.sum());
}

TEST_CASE("occlusion only attenuates") {
  PrimitiveParams p;
  p.center = Vec3(0.0, 0.0, 0.4);
  p.half_x = 0.1;
  p.back_z = 0.6;
  p.density = 5.0;
  const auto s = make_primitive_scene(PrimitiveKind::kTwoPlanesOccluded, p);
  const ScanPattern scan = ScanPattern::confocal_grid(2, 0.1);
  SimulationOptions on;
  on.occlusion = true;
  const auto a = simulate_confocal(s, scan, 160, 60e-12, PhysicsConstants{});
  const auto b = simulate_confocal(s, scan, 160, 60e-12, PhysicsConstants{}, on);
  CHECK((b.data.array() <= a.data.array() + 1e-15).all());
  CHECK(b.data.sum() < a.data.sum());
}

TEST_CASE("primitive scenes") {
  PrimitiveParams p;
  const auto plane = make_primitive_scene(PrimitiveKind::kPlane, p);
  const GridSpec& g = plane.grid;
  for (int k = 0; k < g.nz; ++k) {
    const double z = g.voxel_center(0, 0, k).z();
    const double v = plane.sigma[g.index(g.nx / 2, g.ny / 2, k)];
    CHECK(v == (std::abs(z - 0.5) < 0.5 * g.pitch ? 1.0 : 0.0));
  }
  const auto two = make_primitive_scene(PrimitiveKind::kTwoPlanesOccluded, p);
  int front = 0, back = 0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      for (int k = 0; k < g.nz; ++k) {
        if (two.sigma[g.index(i, j, k)] == 0.0) continue;
        const double z = g.voxel_center(i, j, k).z();
        if (std::abs(z - 0.5) < 1e-9) ++front;
        if (std::abs(z - 0.6) < 1e-9) ++back;
      }
    }
  }
  CHECK(front > 0);
  CHECK(back > front);
  CHECK(parse_primitive_kind(to_string(PrimitiveKind::kLetter)) == PrimitiveKind::kLetter);
  CHECK_THROWS_AS(parse_primitive_kind("teapot"), Error);
  const auto both = combine_scenes(plane, make_primitive_scene(PrimitiveKind::kSphere, p));
  CHECK(both.sigma[g.index(g.nx / 2, g.ny / 2, 15)] == 1.0);
}

TEST_CASE("poisson noise is seeded") {
  auto a = simulate_confocal(sphere_scene(), ScanPattern::confocal_grid(2, 0.2),
                             128, 60e-12, PhysicsConstants{});
  auto b = a;
  add_poisson_noise(a, 1e4, 5);
  add_poisson_noise(b, 1e4, 5);
  CHECK(a.data == b.data);
  CHECK((a.data.array() >= 0.0).all());
}

}
