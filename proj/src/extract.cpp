#include "ntf/extract.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "marching_cubes_tables.hpp"
#include "ntf/error.hpp"
#include "ntf/parallel.hpp"

namespace ntf {

std::vector<double> VoxelVolume::albedo() const {
  std::vector<double> out(sigma.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigma[i] * rho[i];
  return out;
}

void VoxelVolume::validate() const {
  require(grid.nx > 0 && grid.ny > 0 && grid.nz > 0 && grid.pitch > 0.0,
          ErrorCode::kInvalidArgument, "volume grid must be non-empty");
  require(sigma.size() == grid.voxel_count() && rho.size() == sigma.size(),
          ErrorCode::kShapeMismatch, "volume channels do not match the grid");
}

VoxelVolume VoxelVolume::zeros(const GridSpec& grid) {
  VoxelVolume v;
  v.grid = grid;
  v.sigma.assign(grid.voxel_count(), 0.0);
  v.rho.assign(grid.voxel_count(), 0.0);
  return v;
}

VoxelVolume query_volume(const Field& field, const GridSpec& grid,
                         DirectionPolicy policy, int threads) {
  VoxelVolume vol = VoxelVolume::zeros(grid);
  vol.validate();
  const Aabb support = field.support();
  if (!support.is_unbounded()) {
    const Aabb box = grid.center_bounds();
    require(support.contains(box.lo) && support.contains(box.hi),
            ErrorCode::kInvalidArgument,
            "volume bounds leave the field's normalization range");
  }
  std::vector<ViewAngles> views{{0.0, 0.0}};
  if (policy == DirectionPolicy::kAverage) {
    for (double theta : {kPi / 6.0, kPi / 3.0}) {
      for (int j = 0; j < 4; ++j) views.push_back({theta, j * kHalfPi});
    }
  }
  const Eigen::Index slice = static_cast<Eigen::Index>(grid.nx) * grid.ny;
  parallel_for(static_cast<std::size_t>(grid.nz), threads, [&](std::size_t kz) {
    const int k = static_cast<int>(kz);
    QueryBatch q;
    q.resize(slice);
    FieldValues v;
    for (std::size_t d = 0; d < views.size(); ++d) {
      for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
          q.set(static_cast<Eigen::Index>(j) * grid.nx + i,
                grid.voxel_center(i, j, k), views[d]);
        }
      }
      field.evaluate(q, v);
      for (Eigen::Index m = 0; m < slice; ++m) {
        const std::size_t idx = static_cast<std::size_t>(k) * slice + m;
        if (d == 0) vol.sigma[idx] = std::max(0.0, v.sigma[m]);
        vol.rho[idx] += std::max(0.0, v.rho[m]) / views.size();
      }
    }
  });
  return vol;
}

long TriMesh::euler_characteristic() const {
  std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (const auto& t : triangles) {
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = t[e];
      const std::uint32_t b = t[(e + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  return static_cast<long>(vertices.size()) - static_cast<long>(edges.size()) +
         static_cast<long>(triangles.size());
}

namespace {

// Corner offsets and edge endpoints of the lookup tables.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                     {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                     {0, 4}, {1, 5}, {2, 6}, {3, 7}};

struct SlabOutput {
  std::vector<std::array<std::uint64_t, 3>> triangles;  // grid-edge keys
  std::unordered_map<std::uint64_t, Vec3> vertices;
};

}  // namespace

TriMesh marching_cubes(const GridSpec& grid, const std::vector<double>& values,
                       double iso, int threads) {
  require(values.size() == grid.voxel_count(), ErrorCode::kShapeMismatch,
          "value count does not match the grid");
  TriMesh mesh;
  if (grid.nx < 2 || grid.ny < 2 || grid.nz < 2) return mesh;
  const int cells_z = grid.nz - 1;
  std::vector<SlabOutput> slabs(static_cast<std::size_t>(cells_z));

  // A grid edge is identified by its lower grid point and axis.
  auto edge_key = [&](int i, int j, int k, int axis) {
    return static_cast<std::uint64_t>(grid.index(i, j, k)) * 3 + axis;
  };

  parallel_for(slabs.size(), threads, [&](std::size_t kz) {
    const int k = static_cast<int>(kz);
    SlabOutput& out = slabs[kz];
    for (int j = 0; j + 1 < grid.ny; ++j) {
      for (int i = 0; i + 1 < grid.nx; ++i) {
        double v[8];
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          v[c] = values[grid.index(i + kCorner[c][0], j + kCorner[c][1],
                                   k + kCorner[c][2])];
          if (v[c] < iso) cube |= 1 << c;
        }
        if (detail::kEdgeTable[cube] == 0) continue;
        std::uint64_t keys[12];
        for (int e = 0; e < 12; ++e) {
          if (!(detail::kEdgeTable[cube] & (1 << e))) continue;
          const int a = kEdgeCorners[e][0];
          const int b = kEdgeCorners[e][1];
          const int* ca = kCorner[a];
          const int* cb = kCorner[b];
          int axis = 0;
          while (ca[axis] == cb[axis]) ++axis;
          const int lo = ca[axis] < cb[axis] ? a : b;
          keys[e] = edge_key(i + kCorner[lo][0], j + kCorner[lo][1],
                             k + kCorner[lo][2], axis);
          if (out.vertices.count(keys[e])) continue;
          const Vec3 pa = grid.voxel_center(i + ca[0], j + ca[1], k + ca[2]);
          const Vec3 pb = grid.voxel_center(i + cb[0], j + cb[1], k + cb[2]);
          const double denom = v[b] - v[a];
          const double f =
              std::abs(denom) < 1e-300 ? 0.5 : std::clamp((iso - v[a]) / denom, 0.0, 1.0);
          out.vertices.emplace(keys[e], pa + f * (pb - pa));
        }
        for (int t = 0; detail::kTriTable[cube][t] != -1; t += 3) {
          out.triangles.push_back({keys[detail::kTriTable[cube][t]],
                                   keys[detail::kTriTable[cube][t + 1]],
                                   keys[detail::kTriTable[cube][t + 2]]});
        }
      }
    }
  });

  std::map<std::uint64_t, Vec3> vertices;
  for (const SlabOutput& s : slabs) {
    vertices.insert(s.vertices.begin(), s.vertices.end());
  }
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  index.reserve(vertices.size());
  for (const auto& [key, p] : vertices) {
    index.emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    mesh.vertices.push_back(p);
  }
  for (const SlabOutput& s : slabs) {
    for (const auto& t : s.triangles) {
      std::array<std::uint32_t, 3> tri{index[t[0]], index[t[1]], index[t[2]]};
      const Vec3& a = mesh.vertices[tri[0]];
      const Vec3& b = mesh.vertices[tri[1]];
      const Vec3& c = mesh.vertices[tri[2]];
      if (0.5 * (b - a).cross(c - a).norm() <= 1e-12) continue;
      // Rotate so the smallest index leads; orientation is preserved.
      std::rotate(tri.begin(), std::min_element(tri.begin(), tri.end()),
                  tri.end());
      mesh.triangles.push_back(tri);
    }
  }
  std::sort(mesh.triangles.begin(), mesh.triangles.end());
  return mesh;
}

TriMesh marching_cubes(const VoxelVolume& vol, double iso, int threads) {
  vol.validate();
  return marching_cubes(vol.grid, vol.albedo(), iso, threads);
}

double relative_threshold(const std::vector<double>& values, double fraction) {
  require(fraction >= 0.0, ErrorCode::kInvalidArgument,
          "threshold fraction must be nonnegative");
  if (values.empty()) return 0.0;
  return fraction * *std::max_element(values.begin(), values.end());
}

std::size_t DepthMap::coverage() const {
  return static_cast<std::size_t>(
      std::count_if(depth.begin(), depth.end(),
                    [](double d) { return d != kEmpty; }));
}

DepthMap depth_map(const VoxelVolume& vol, double threshold,
                   DepthChannel channel) {
  vol.validate();
  require(threshold >= 0.0, ErrorCode::kInvalidArgument,
          "depth threshold must be nonnegative");
  const std::vector<double> values =
      channel == DepthChannel::kSigma ? vol.sigma : vol.albedo();
  const GridSpec& g = vol.grid;
  DepthMap map;
  map.nx = g.nx;
  map.ny = g.ny;
  map.depth.assign(static_cast<std::size_t>(g.nx) * g.ny, DepthMap::kEmpty);
  // A zero threshold would mark every column; treat "> 0" as the rule then.
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      for (int k = 0; k < g.nz; ++k) {
        const double v = values[g.index(i, j, k)];
        if (v > 0.0 && v >= threshold) {
          map.depth[static_cast<std::size_t>(j) * g.nx + i] =
              g.voxel_center(i, j, k).z();
          break;
        }
      }
    }
  }
  return map;
}

DepthError depth_mae(const DepthMap& a, const DepthMap& b) {
  require(a.nx == b.nx && a.ny == b.ny && a.depth.size() == b.depth.size(),
          ErrorCode::kShapeMismatch, "depth maps differ in size");
  DepthError err;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.depth.size(); ++i) {
    if (!a.valid(i) || !b.valid(i)) continue;
    sum += std::abs(a.depth[i] - b.depth[i]);
    ++err.overlap;
  }
  require(err.overlap > 0, ErrorCode::kDegenerate,
          "depth maps have no overlapping columns");
  err.mae = sum / err.overlap;
  err.coverage = static_cast<double>(err.overlap) / a.depth.size();
  return err;
}

VoxelVolume backproject(const TransientImage& measured, const GridSpec& grid,
                        bool filtered, int threads) {
  VoxelVolume vol = VoxelVolume::zeros(grid);
  vol.validate();
  require(measured.data.rows() == static_cast<Eigen::Index>(measured.scan.size()) &&
              measured.data.cols() == measured.n_bins,
          ErrorCode::kShapeMismatch, "transient has inconsistent shape");
  const double path_bin = measured.path_bin_width();
  std::fill(vol.rho.begin(), vol.rho.end(), 1.0);
  parallel_for(static_cast<std::size_t>(grid.nz), threads, [&](std::size_t kz) {
    const int k = static_cast<int>(kz);
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const Vec3 q = grid.voxel_center(i, j, k);
        double sum = 0.0;
        int hits = 0;
        for (std::size_t e = 0; e < measured.scan.size(); ++e) {
          const ScanEntry& entry = measured.scan.entries[e];
          const double s = (q - entry.illumination.position()).norm() +
                           (q - entry.detection.position()).norm();
          const auto bin = static_cast<long>(std::floor(s / path_bin));
          if (bin < 0 || bin >= measured.n_bins) continue;
          sum += measured.data(static_cast<Eigen::Index>(e), bin);
          ++hits;
        }
        vol.sigma[grid.index(i, j, k)] = hits > 0 ? sum / hits : 0.0;
      }
    }
  });
  if (!filtered) return vol;
  std::vector<double> out(vol.sigma.size(), 0.0);
  auto at = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= grid.nx || j >= grid.ny || k >= grid.nz)
      return 0.0;
    return vol.sigma[grid.index(i, j, k)];
  };
  for (int k = 0; k < grid.nz; ++k) {
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const double lap = at(i + 1, j, k) + at(i - 1, j, k) + at(i, j + 1, k) +
                           at(i, j - 1, k) + at(i, j, k + 1) + at(i, j, k - 1) -
                           6.0 * at(i, j, k);
        out[grid.index(i, j, k)] = std::max(0.0, -lap);
      }
    }
  }
  vol.sigma = std::move(out);
  return vol;
}

}  // namespace ntf
