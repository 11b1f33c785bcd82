#pragma once

// Volumes, meshes and depth maps from a field, the metrics on them, and the
// backprojection baseline.

#include <array>
#include <cstdint>
#include <vector>

#include "ntf/field.hpp"
#include "ntf/scene.hpp"

namespace ntf {

struct VoxelVolume {
  GridSpec grid;
  std::vector<double> sigma;
  std::vector<double> rho;

  // Volumetric albedo sigma * rho per voxel.
  std::vector<double> albedo() const;
  void validate() const;
  static VoxelVolume zeros(const GridSpec& grid);
};

enum class DirectionPolicy { kFrontal, kAverage };

// Samples sigma and rho at every voxel center. Throws kInvalidArgument when
// the voxel centers leave a bounded field support.
VoxelVolume query_volume(const Field& field, const GridSpec& grid,
                         DirectionPolicy policy = DirectionPolicy::kFrontal,
                         int threads = 1);

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  // V - E + F over the triangle edges.
  long euler_characteristic() const;
};

// Surface where `values` crosses `iso`, with vertices shared between cells.
// Vertex and triangle order is canonical (sorted by grid edge and index), so
// the result does not depend on traversal order.
TriMesh marching_cubes(const GridSpec& grid, const std::vector<double>& values,
                       double iso, int threads = 1);
// Albedo channel.
TriMesh marching_cubes(const VoxelVolume& vol, double iso, int threads = 1);

// Fraction of the maximum, the default threshold rule.
double relative_threshold(const std::vector<double>& values, double fraction);

enum class DepthChannel { kSigma, kAlbedo };

struct DepthMap {
  static constexpr double kEmpty = -1.0;

  int nx = 0;
  int ny = 0;
  std::vector<double> depth;  // x fastest; kEmpty for empty columns

  bool valid(std::size_t i) const { return depth[i] != kEmpty; }
  std::size_t coverage() const;
};

// Per (x, y) column, the smallest voxel-center z whose value >= threshold.
DepthMap depth_map(const VoxelVolume& vol, double threshold,
                   DepthChannel channel = DepthChannel::kSigma);

struct DepthError {
  double mae = 0.0;
  std::size_t overlap = 0;
  double coverage = 0.0;  // overlap / columns
};

// Throws kShapeMismatch on differing dims and kDegenerate without overlap.
DepthError depth_mae(const DepthMap& a, const DepthMap& b);

// Each voxel averages the bins whose shell (confocal) or ellipsoid passes
// through it. With `filtered`, the negated 6-neighbour Laplacian is applied
// and clamped at zero. The result lands in sigma; rho is one.
VoxelVolume backproject(const TransientImage& measured, const GridSpec& grid,
                        bool filtered = false, int threads = 1);

}  // namespace ntf
