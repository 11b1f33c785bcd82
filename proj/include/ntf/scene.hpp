#pragma once

// Ground-truth voxel scenes and the brute-force transient simulator.
//
// Transient bins hold the transient sampled at the bin-center time
// t = (b + 0.5) * bin_width, integrated over the bin's round-trip path
// length c * bin_width. With that convention the spherical-shell quadrature
// and the Cartesian voxel sweep produce the same numbers.

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ntf/field.hpp"
#include "ntf/geometry.hpp"

namespace ntf {

struct PhysicsConstants {
  double c = 3e8;
  double gamma0 = 1.0;
  double attenuation = 1.0;  // A, cross-section folded with particle size
};

struct ScanEntry {
  WallSpot illumination;
  WallSpot detection;

  bool collocated() const { return illumination == detection; }
  friend bool operator==(const ScanEntry&, const ScanEntry&) = default;
};

struct ScanPattern {
  std::vector<ScanEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool confocal() const;

  // n x n spots over [-half_extent, half_extent]^2, x varying fastest.
  static ScanPattern confocal_grid(int n, double half_extent);
  // Detection grid as above with the illumination displaced by `offset`.
  static ScanPattern offset_grid(int n, double half_extent,
                                 const WallSpot& offset);
  // Detection grid with a single fixed illumination spot.
  static ScanPattern fixed_laser_grid(int n, double half_extent,
                                      const WallSpot& laser);
};

using TransientData =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TransientImage {
  ScanPattern scan;
  int n_bins = 0;
  double bin_width = 0.0;  // seconds
  PhysicsConstants constants;
  TransientData data;  // one row per scan entry, one column per bin

  double bin_center_time(int bin) const { return (bin + 0.5) * bin_width; }
  // Round-trip path length covered by one bin.
  double path_bin_width() const { return constants.c * bin_width; }

  static TransientImage zeros(const ScanPattern& scan, int n_bins,
                              double bin_width,
                              const PhysicsConstants& constants);
};

struct GridSpec {
  int nx = 32;
  int ny = 32;
  int nz = 32;
  double pitch = 0.02;
  Vec3 origin{-0.31, -0.31, 0.2};  // center of voxel (0, 0, 0)

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
  Vec3 voxel_center(int i, int j, int k) const {
    return origin + pitch * Vec3(i, j, k);
  }
  // Box spanned by the voxel centers.
  Aabb center_bounds() const {
    return {origin, origin + pitch * Vec3(nx - 1, ny - 1, nz - 1)};
  }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Voxel scene sampled by trilinear interpolation between voxel centers,
// zero outside the grid.
struct GroundTruthScene {
  GridSpec grid;
  std::vector<double> sigma;
  std::vector<double> rho;

  // Optional view-dependent albedo: per voxel, dir_theta_bins x dir_phi_bins
  // values over theta in [0, pi/2] and phi in [0, 2 pi). Replaces rho.
  int dir_theta_bins = 0;
  int dir_phi_bins = 0;
  std::vector<double> directional_rho;

  bool directional() const { return !directional_rho.empty(); }
  // Region where the interpolated density can be nonzero.
  Aabb support() const;

  double sample_sigma(const Vec3& p) const;
  double sample_rho(const Vec3& p, const ViewAngles& view) const;

  // Throws kInvalidArgument on negative values, size mismatch, or a grid
  // reaching the wall.
  void validate() const;

  static GroundTruthScene empty(const GridSpec& grid);
};

// Frozen field backed by a ground-truth scene.
class SceneField final : public Field {
 public:
  explicit SceneField(GroundTruthScene scene) : scene_(std::move(scene)) {}

  Aabb support() const override { return scene_.support(); }
  void evaluate(const QueryBatch& queries, FieldValues& out) const override;
  void density(const Eigen::Matrix3Xd& positions,
               Eigen::VectorXd& sigma) const override;

 private:
  GroundTruthScene scene_;
};

struct SimulationOptions {
  int n_theta = 64;
  int n_phi = 64;
  bool occlusion = false;
  int threads = 1;
};

// Hemisphere quadrature of the shell integral at every bin.
TransientImage simulate_confocal(const GroundTruthScene& scene,
                                 const ScanPattern& scan, int n_bins,
                                 double bin_width,
                                 const PhysicsConstants& constants,
                                 const SimulationOptions& options = {});

// Semi-ellipsoid quadrature over (nu, varphi) at fixed mu. Collocated pairs
// take the confocal path with occlusion disabled.
TransientImage simulate_nonconfocal(const GroundTruthScene& scene,
                                    const ScanPattern& scan, int n_bins,
                                    double bin_width,
                                    const PhysicsConstants& constants,
                                    const SimulationOptions& options = {});

// Cartesian voxel sweep: each voxel adds 2 gamma0 sigma rho v / r^4 to the
// bin that contains its round-trip path 2r.
TransientImage simulate_lct_form(const GroundTruthScene& scene,
                                 const ScanPattern& scan, int n_bins,
                                 double bin_width,
                                 const PhysicsConstants& constants);

// Replace every bin by Poisson(counts_per_unit * value) / counts_per_unit.
void add_poisson_noise(TransientImage& image, double counts_per_unit,
                       std::uint64_t seed);

enum class PrimitiveKind { kPlane, kSphere, kTwoPlanesOccluded, kLetter };

PrimitiveKind parse_primitive_kind(const std::string& name);
std::string to_string(PrimitiveKind kind);

struct PrimitiveParams {
  GridSpec grid;
  double density = 1.0;
  double albedo = 1.0;
  // Plane/letter center, sphere center, or front-plane center.
  Vec3 center{0.0, 0.0, 0.5};
  double radius = 0.1;
  double half_x = 0.15;
  double half_y = 0.15;
  double back_z = 0.6;  // two-planes-occluded only
  int thickness = 1;    // voxel layers for plane-like primitives
};

// Deterministic primitive scenes. Albedo is uniform over the grid, so the
// volumetric albedo sigma * rho is the density scaled by `albedo`.
GroundTruthScene make_primitive_scene(PrimitiveKind kind,
                                      const PrimitiveParams& params);

// Voxel-wise max of two scenes on the same grid.
GroundTruthScene combine_scenes(const GroundTruthScene& a,
                                const GroundTruthScene& b);

}  // namespace ntf
