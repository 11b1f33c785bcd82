#include "ntf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ntf/error.hpp"
#include "ntf/sampling.hpp"

namespace ntf {

GridSpec grid_from_config(const RunConfig& config) {
  GridSpec g;
  const auto dims = config.get_int3("grid_dims");
  g.nx = dims[0];
  g.ny = dims[1];
  g.nz = dims[2];
  g.pitch = config.get_double("grid_pitch");
  g.origin = config.get_vec3("grid_origin");
  require(g.nx > 0 && g.ny > 0 && g.nz > 0 && g.pitch > 0.0, ErrorCode::kConfig,
          "grid needs positive dims and pitch");
  return g;
}

GroundTruthScene scene_from_config(const RunConfig& config) {
  PrimitiveParams p;
  p.grid = grid_from_config(config);
  p.center = config.get_vec3("scene_center");
  p.half_x = config.get_double("scene_half_x");
  p.half_y = config.get_double("scene_half_y");
  p.radius = config.get_double("scene_radius");
  p.back_z = config.get_double("scene_back_z");
  p.thickness = config.get_int("scene_thickness");
  p.density = config.get_double("scene_density");
  p.albedo = config.get_double("scene_albedo");
  const std::string& kind = config.get("scene");
  try {
    if (kind == "desk") {
      const GroundTruthScene plane = make_primitive_scene(PrimitiveKind::kPlane, p);
      p.center = config.get_vec3("sphere_center");
      return combine_scenes(plane, make_primitive_scene(PrimitiveKind::kSphere, p));
    }
    if (kind == "voxel") {
      const GridSpec& g = p.grid;
      const Vec3 idx = ((p.center - g.origin) / g.pitch).array().round();
      require((idx.array() >= 0.0).all() && idx.x() < g.nx && idx.y() < g.ny &&
                  idx.z() < g.nz,
              ErrorCode::kConfig, "voxel scene center lies outside the grid");
      GroundTruthScene s = GroundTruthScene::empty(g);
      std::fill(s.rho.begin(), s.rho.end(), p.albedo);
      s.sigma[g.index(static_cast<int>(idx.x()), static_cast<int>(idx.y()),
                      static_cast<int>(idx.z()))] = p.density;
      return s;
    }
    return make_primitive_scene(parse_primitive_kind(kind), p);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) fail(ErrorCode::kConfig, e.what());
    throw;
  }
}

ScanPattern scan_from_config(const RunConfig& config) {
  const int n = config.get_int("scan");
  const double half = config.get_double("scan_half_extent");
  require(n > 0 && half >= 0.0, ErrorCode::kConfig, "invalid scan size");
  const std::string& mode = config.get("mode");
  if (mode == "confocal") return ScanPattern::confocal_grid(n, half);
  if (mode == "nonconfocal") {
    return ScanPattern::offset_grid(
        n, half, {config.get_double("laser_offset_x"), config.get_double("laser_offset_y")});
  }
  fail(ErrorCode::kConfig, "unknown mode '" + mode + "' (confocal|nonconfocal)");
}

SimulationOptions simulation_options(const RunConfig& config) {
  SimulationOptions o;
  o.n_theta = config.get_int("sim_n_theta");
  o.n_phi = config.get_int("sim_n_phi");
  o.occlusion = config.get_bool("occlusion");
  o.threads = config.get_int("threads");
  require(o.n_theta > 0 && o.n_phi > 0 && o.threads > 0, ErrorCode::kConfig,
          "simulation quadrature and threads must be positive");
  return o;
}

TransientImage simulate_from_config(const RunConfig& config) {
  const GroundTruthScene scene = scene_from_config(config);
  const ScanPattern scan = scan_from_config(config);
  const int bins = config.get_int("bins");
  const double width = config.get_double("bin_width_ps") * 1e-12;
  require(bins > 0 && width > 0.0, ErrorCode::kConfig, "invalid time binning");
  const PhysicsConstants constants = config.constants();
  const SimulationOptions options = simulation_options(config);
  TransientImage image =
      config.get("mode") == "confocal"
          ? simulate_confocal(scene, scan, bins, width, constants, options)
          : simulate_nonconfocal(scene, scan, bins, width, constants, options);
  const double counts = config.get_double("noise_counts");
  require(counts >= 0.0, ErrorCode::kConfig, "noise_counts must be >= 0");
  if (counts > 0.0) {
    add_poisson_noise(image, counts, mix_seed({config.get_u64("seed"), 0x9015eu}));
  }
  return image;
}

DirectionPolicy direction_policy_from_config(const RunConfig& config) {
  const std::string& name = config.get("direction_policy");
  if (name == "frontal") return DirectionPolicy::kFrontal;
  if (name == "average") return DirectionPolicy::kAverage;
  fail(ErrorCode::kConfig, "unknown direction_policy '" + name + "' (frontal|average)");
}

DepthMap albedo_depth(const VoxelVolume& volume, double fraction) {
  const std::vector<double> albedo = volume.albedo();
  return depth_map(volume, relative_threshold(albedo, fraction), DepthChannel::kAlbedo);
}

std::string format_eval_table(const std::vector<EvalRow>& rows) {
  std::string out = "method        threshold  mae_m         overlap  coverage\n";
  char line[160];
  for (const EvalRow& r : rows) {
    std::snprintf(line, sizeof line, "%-13s %-10.3f %-13.6e %-8zu %.4f\n",
                  r.method.c_str(), r.fraction, r.error.mae, r.error.overlap,
                  r.error.coverage);
    out += line;
  }
  return out;
}

}  // namespace ntf
