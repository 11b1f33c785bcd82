#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "ntf/error.hpp"
#include "ntf/extract.hpp"
#include "ntf/neural_field.hpp"

using namespace ntf;

namespace {

GridSpec small_grid() {
  GridSpec g;
  g.nx = g.ny = g.nz = 12;
  g.pitch = 0.03;
  g.origin = Vec3(-0.165, -0.165, 0.3);
  return g;
}

GroundTruthScene blob() {
  PrimitiveParams p;
  p.grid = small_grid();
  p.center = Vec3(0.0, 0.0, 0.465);
  p.radius = 0.1;
  return make_primitive_scene(PrimitiveKind::kSphere, p);
}

double triangle_area(const TriMesh& m, const std::array<std::uint32_t, 3>& t) {
  return 0.5 * (m.vertices[t[1]] - m.vertices[t[0]])
                   .cross(m.vertices[t[2]] - m.vertices[t[0]])
                   .norm();
}

}  // namespace

TEST_SUITE("extraction-eval") {

TEST_CASE("empty scene gives an empty volume") {
  const GridSpec g = small_grid();
  const VoxelVolume v = query_volume(SceneField(GroundTruthScene::empty(g)), g);
  CHECK(std::all_of(v.sigma.begin(), v.sigma.end(), [](double s) { return s == 0.0; }));
  const auto a = v.albedo();
  CHECK(std::all_of(a.begin(), a.end(), [](double s) { return s == 0.0; }));
}

TEST_CASE("scene lookup reproduces the voxels") {
  const GroundTruthScene s = blob();
  const VoxelVolume v = query_volume(SceneField(s), s.grid, DirectionPolicy::kFrontal, 3);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.sigma.size(); ++i) {
    worst = std::max(worst, std::abs(v.sigma[i] - s.sigma[i]));
    worst = std::max(worst, std::abs(v.rho[i] - s.rho[i]));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("refined grid agrees at shared voxel centers") {
  NetConfig c;
  c.width = 16;
  c.depth = 2;
  c.skip_after = 1;
  c.head_width = 8;
  c.encoding.bounds = {Vec3(-0.3, -0.3, 0.2), Vec3(0.3, 0.3, 0.8)};
  const NeuralField f(init_params(c, 4));
  const GridSpec g = small_grid();
  GridSpec fine = g;
  fine.nx = fine.ny = fine.nz = 2 * g.nx - 1;
  fine.pitch = g.pitch / 2;
  const VoxelVolume a = query_volume(f, g, DirectionPolicy::kAverage);
  const VoxelVolume b = query_volume(f, fine, DirectionPolicy::kAverage);
  // Batched matrix products may round differently per batch position.
  double worst = 0.0, scale = 0.0;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t p = g.index(i, j, k), q = fine.index(2 * i, 2 * j, 2 * k);
        worst = std::max({worst, std::abs(a.sigma[p] - b.sigma[q]), std::abs(a.rho[p] - b.rho[q])});
        scale = std::max({scale, a.sigma[p], a.rho[p]});
      }
  CHECK(scale > 0.0);
  CHECK(worst <= 1e-12 * scale);

  GridSpec outside = g;
  outside.origin.z() = 0.05;
  CHECK_THROWS_AS(query_volume(f, outside), Error);
}

TEST_CASE("marching cubes on a sphere") {
  GridSpec g;
  g.nx = g.ny = g.nz = 24;
  g.pitch = 0.01;
  g.origin = Vec3(-0.115, -0.115, 0.3);
  const Vec3 center(0.0, 0.0, 0.415);
  const double radius = 0.07;
  std::vector<double> values(g.voxel_count());
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        values[g.index(i, j, k)] = radius - (g.voxel_center(i, j, k) - center).norm();

  const TriMesh m = marching_cubes(g, values, 0.0);
  REQUIRE_FALSE(m.empty());
  double worst = 0.0;
  for (const Vec3& v : m.vertices) worst = std::max(worst, std::abs((v - center).norm() - radius));
  CHECK(worst < g.pitch);
  CHECK(m.euler_characteristic() == 2);

  bool ok = true;
  for (const auto& t : m.triangles) {
    for (auto idx : t) ok &= idx < m.vertices.size();
    ok &= triangle_area(m, t) > 1e-12;
  }
  CHECK(ok);

  const TriMesh m3 = marching_cubes(g, values, 0.0, 3);
  CHECK(m3.triangles == m.triangles);
  CHECK(m3.vertices == m.vertices);
}

TEST_CASE("marching cubes on a voxel sphere scene") {
  const GroundTruthScene s = blob();
  const VoxelVolume v = query_volume(SceneField(s), s.grid);
  const TriMesh m = marching_cubes(v, relative_threshold(v.albedo(), 0.3));
  CHECK(m.euler_characteristic() == 2);
}

TEST_CASE("constant volume has no surface") {
  const GridSpec g = small_grid();
  CHECK(marching_cubes(g, std::vector<double>(g.voxel_count(), 0.7), 0.5).empty());
  CHECK(marching_cubes(VoxelVolume::zeros(g), 0.0).empty());
}

TEST_CASE("depth of a plane") {
  PrimitiveParams p;
  p.center = Vec3(0.0, 0.0, 0.5);
  const GroundTruthScene s = make_primitive_scene(PrimitiveKind::kPlane, p);
  const VoxelVolume v = query_volume(SceneField(s), s.grid);
  const DepthMap d = depth_map(v, relative_threshold(v.sigma, 0.3));
  CHECK(d.coverage() > 0);
  bool ok = true;
  for (std::size_t i = 0; i < d.depth.size(); ++i)
    if (d.valid(i)) ok &= std::abs(d.depth[i] - 0.5) <= 0.5 * p.grid.pitch;
  CHECK(ok);

  const DepthMap e = depth_map(VoxelVolume::zeros(p.grid), 0.0);
  CHECK(e.coverage() == 0);
}

TEST_CASE("occluded planes give a bimodal depth histogram") {
  PrimitiveParams p;
  p.center = Vec3(0.0, 0.0, 0.4);
  p.back_z = 0.6;
  const GroundTruthScene s = make_primitive_scene(PrimitiveKind::kTwoPlanesOccluded, p);
  const VoxelVolume v = query_volume(SceneField(s), s.grid);
  const DepthMap d = depth_map(v, relative_threshold(v.sigma, 0.3));
  std::map<long, int> hist;
  for (std::size_t i = 0; i < d.depth.size(); ++i)
    if (d.valid(i)) ++hist[std::lround(d.depth[i] / p.grid.pitch)];
  REQUIRE(hist.size() == 2);
  CHECK(hist.begin()->first == std::lround(0.4 / p.grid.pitch));
  CHECK(hist.rbegin()->first == std::lround(0.6 / p.grid.pitch));
  CHECK(hist.begin()->second > 0);
  CHECK(hist.rbegin()->second > 0);
}

TEST_CASE("depth error") {
  DepthMap a;
  a.nx = 3;
  a.ny = 2;
  a.depth = {0.4, 0.5, DepthMap::kEmpty, 0.45, 0.5, 0.6};
  CHECK(depth_mae(a, a).mae == 0.0);

  DepthMap b = a;
  for (double& z : b.depth)
    if (z != DepthMap::kEmpty) z += 0.01;
  const DepthError e = depth_mae(a, b);
  CHECK(e.mae == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(e.overlap == 5);
  CHECK(e.coverage == doctest::Approx(5.0 / 6.0));
  CHECK(depth_mae(b, a).mae == e.mae);

  b.depth = {DepthMap::kEmpty, DepthMap::kEmpty, 0.5, DepthMap::kEmpty,
             DepthMap::kEmpty, DepthMap::kEmpty};
  try {
    depth_mae(a, b);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kDegenerate);
  }
  b.nx = 2;
  b.ny = 3;
  try {
    depth_mae(a, b);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kShapeMismatch);
  }
}

TEST_CASE("backprojection localizes a single scatterer") {
  GridSpec g;
  g.nx = g.ny = g.nz = 16;
  g.pitch = 0.02;
  g.origin = Vec3(-0.15, -0.15, 0.3);
  GroundTruthScene s = GroundTruthScene::empty(g);
  std::fill(s.rho.begin(), s.rho.end(), 1.0);
  const int ti = 9, tj = 6, tk = 7;
  s.sigma[g.index(ti, tj, tk)] = 1.0;
  const TransientImage m = simulate_confocal(s, ScanPattern::confocal_grid(12, 0.3), 160,
                                             32e-12, PhysicsConstants{});
  for (bool filtered : {false, true}) {
    const VoxelVolume v = backproject(m, g, filtered);
    const auto best = std::max_element(v.sigma.begin(), v.sigma.end()) - v.sigma.begin();
    const int i = static_cast<int>(best % g.nx);
    const int j = static_cast<int>((best / g.nx) % g.ny);
    const int k = static_cast<int>(best / (static_cast<long>(g.nx) * g.ny));
    CHECK(std::abs(i - ti) <= 1);
    CHECK(std::abs(j - tj) <= 1);
    CHECK(std::abs(k - tk) <= 1);
  }

  TransientImage zero = m;
  zero.data.setZero();
  const VoxelVolume z = backproject(zero, g);
  CHECK(std::all_of(z.sigma.begin(), z.sigma.end(), [](double x) { return x == 0.0; }));

  TransientImage twice = m;
  twice.data *= 2.0;
  const VoxelVolume a = backproject(m, g);
  const VoxelVolume b = backproject(twice, g, false, 2);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.sigma.size(); ++i)
    worst = std::max(worst, std::abs(b.sigma[i] - 2.0 * a.sigma[i]));
  CHECK(worst <= 1e-12 * *std::max_element(b.sigma.begin(), b.sigma.end()));
}

TEST_CASE("backprojection of a non-confocal scan") {
  GridSpec g;
  g.nx = g.ny = g.nz = 12;
  g.pitch = 0.025;
  g.origin = Vec3(-0.1375, -0.1375, 0.3);
  GroundTruthScene s = GroundTruthScene::empty(g);
  std::fill(s.rho.begin(), s.rho.end(), 1.0);
  s.sigma[g.index(5, 7, 4)] = 1.0;
  const TransientImage m = simulate_nonconfocal(
      s, ScanPattern::offset_grid(10, 0.3, {0.05, 0.0}), 160, 32e-12, PhysicsConstants{});
  const VoxelVolume v = backproject(m, g);
  const auto best = std::max_element(v.sigma.begin(), v.sigma.end()) - v.sigma.begin();
  CHECK(std::abs(static_cast<int>(best % g.nx) - 5) <= 1);
  CHECK(std::abs(static_cast<int>((best / g.nx) % g.ny) - 7) <= 1);
  CHECK(std::abs(static_cast<int>(best / (g.nx * g.ny)) - 4) <= 1);
}

}  // TEST_SUITE
