#include "ntf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ntf/error.hpp"
#include "ntf/parallel.hpp"

namespace ntf {

void Field::density(const Eigen::Matrix3Xd& positions,
                    Eigen::VectorXd& sigma) const {
  QueryBatch q;
  q.positions = positions;
  q.directions = Eigen::Matrix2Xd::Zero(2, positions.cols());
  FieldValues v;
  evaluate(q, v);
  sigma = std::move(v.sigma);
}

void FunctionField::evaluate(const QueryBatch& queries,
                             FieldValues& out) const {
  const Eigen::Index n = queries.size();
  out.sigma.resize(n);
  out.rho.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    fn_(queries.positions.col(i),
        {queries.directions(0, i), queries.directions(1, i)}, out.sigma[i],
        out.rho[i]);
  }
}

// ---------------------------------------------------------------------------
// Scan patterns and images

bool ScanPattern::confocal() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const ScanEntry& e) { return e.collocated(); });
}

namespace {

std::vector<WallSpot> spot_grid(int n, double half_extent) {
  require(n >= 1, ErrorCode::kInvalidArgument, "scan grid needs n >= 1");
  std::vector<WallSpot> spots;
  spots.reserve(static_cast<std::size_t>(n) * n);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const double fx = n == 1 ? 0.0 : -1.0 + 2.0 * ix / (n - 1);
      const double fy = n == 1 ? 0.0 : -1.0 + 2.0 * iy / (n - 1);
      spots.push_back({fx * half_extent, fy * half_extent});
    }
  }
  return spots;
}

}  // namespace

ScanPattern ScanPattern::confocal_grid(int n, double half_extent) {
  return offset_grid(n, half_extent, {0.0, 0.0});
}

ScanPattern ScanPattern::offset_grid(int n, double half_extent,
                                     const WallSpot& offset) {
  ScanPattern scan;
  for (const WallSpot& s : spot_grid(n, half_extent)) {
    scan.entries.push_back({{s.x + offset.x, s.y + offset.y}, s});
  }
  return scan;
}

ScanPattern ScanPattern::fixed_laser_grid(int n, double half_extent,
                                          const WallSpot& laser) {
  ScanPattern scan;
  for (const WallSpot& s : spot_grid(n, half_extent)) {
    scan.entries.push_back({laser, s});
  }
  return scan;
}

TransientImage TransientImage::zeros(const ScanPattern& scan, int n_bins,
                                     double bin_width,
                                     const PhysicsConstants& constants) {
  require(!scan.empty(), ErrorCode::kInvalidArgument, "scan pattern is empty");
  require(n_bins >= 1, ErrorCode::kInvalidArgument, "n_bins must be positive");
  require(bin_width > 0.0 && std::isfinite(bin_width),
          ErrorCode::kInvalidArgument, "bin width must be positive");
  require(constants.c > 0.0 && constants.gamma0 > 0.0 &&
              constants.attenuation >= 0.0,
          ErrorCode::kInvalidArgument, "invalid physics constants");
  TransientImage img;
  img.scan = scan;
  img.n_bins = n_bins;
  img.bin_width = bin_width;
  img.constants = constants;
  img.data = TransientData::Zero(static_cast<Eigen::Index>(scan.size()), n_bins);
  return img;
}

// ---------------------------------------------------------------------------
// Scenes

Aabb GroundTruthScene::support() const {
  const Aabb c = grid.center_bounds();
  return {c.lo.array() - grid.pitch, c.hi.array() + grid.pitch};
}

namespace {

struct Trilinear {
  std::size_t index[8];
  double weight[8];
  int count = 0;
};

Trilinear trilinear_stencil(const GridSpec& g, const Vec3& p) {
  Trilinear t;
  const Vec3 u = (p - g.origin) / g.pitch;
  const double fx0 = std::floor(u.x());
  const double fy0 = std::floor(u.y());
  const double fz0 = std::floor(u.z());
  if (fx0 < -1.0 || fy0 < -1.0 || fz0 < -1.0 || fx0 >= g.nx || fy0 >= g.ny ||
      fz0 >= g.nz) {
    return t;
  }
  const int i0 = static_cast<int>(fx0);
  const int j0 = static_cast<int>(fy0);
  const int k0 = static_cast<int>(fz0);
  const double fx = u.x() - fx0;
  const double fy = u.y() - fy0;
  const double fz = u.z() - fz0;
  for (int c = 0; c < 8; ++c) {
    const int i = i0 + (c & 1);
    const int j = j0 + ((c >> 1) & 1);
    const int k = k0 + ((c >> 2) & 1);
    if (i < 0 || j < 0 || k < 0 || i >= g.nx || j >= g.ny || k >= g.nz) {
      continue;
    }
    const double w = ((c & 1) ? fx : 1.0 - fx) *
                     (((c >> 1) & 1) ? fy : 1.0 - fy) *
                     (((c >> 2) & 1) ? fz : 1.0 - fz);
    t.index[t.count] = g.index(i, j, k);
    t.weight[t.count] = w;
    ++t.count;
  }
  return t;
}

int direction_bin(double value, double range, int bins) {
  const int b = static_cast<int>(value / range * bins);
  return std::clamp(b, 0, bins - 1);
}

}  // namespace

double GroundTruthScene::sample_sigma(const Vec3& p) const {
  const Trilinear t = trilinear_stencil(grid, p);
  double s = 0.0;
  for (int c = 0; c < t.count; ++c) s += t.weight[c] * sigma[t.index[c]];
  return s;
}

double GroundTruthScene::sample_rho(const Vec3& p,
                                    const ViewAngles& view) const {
  const Trilinear t = trilinear_stencil(grid, p);
  double s = 0.0;
  if (directional()) {
    const int bt = direction_bin(view.theta, kHalfPi, dir_theta_bins);
    double phi = std::fmod(view.phi, kTwoPi);
    if (phi < 0.0) phi += kTwoPi;
    const int bp = direction_bin(phi, kTwoPi, dir_phi_bins);
    const std::size_t stride =
        static_cast<std::size_t>(dir_theta_bins) * dir_phi_bins;
    const std::size_t offset = static_cast<std::size_t>(bt) * dir_phi_bins + bp;
    for (int c = 0; c < t.count; ++c) {
      s += t.weight[c] * directional_rho[t.index[c] * stride + offset];
    }
  } else {
    for (int c = 0; c < t.count; ++c) s += t.weight[c] * rho[t.index[c]];
  }
  return s;
}

void GroundTruthScene::validate() const {
  const std::size_t n = grid.voxel_count();
  require(grid.nx >= 1 && grid.ny >= 1 && grid.nz >= 1 && grid.pitch > 0.0,
          ErrorCode::kInvalidArgument, "scene grid is degenerate");
  require(sigma.size() == n && rho.size() == n, ErrorCode::kInvalidArgument,
          "scene channel size does not match the grid");
  require(grid.origin.z() - grid.pitch > 0.0, ErrorCode::kInvalidArgument,
          "scene grid must lie strictly in front of the wall");
  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  require(std::all_of(sigma.begin(), sigma.end(), nonneg) &&
              std::all_of(rho.begin(), rho.end(), nonneg),
          ErrorCode::kInvalidArgument, "scene values must be finite and >= 0");
  if (directional()) {
    require(dir_theta_bins >= 1 && dir_phi_bins >= 1 &&
                directional_rho.size() ==
                    n * static_cast<std::size_t>(dir_theta_bins) * dir_phi_bins,
            ErrorCode::kInvalidArgument, "directional albedo table mis-sized");
    require(std::all_of(directional_rho.begin(), directional_rho.end(), nonneg),
            ErrorCode::kInvalidArgument, "directional albedo must be >= 0");
  }
}

GroundTruthScene GroundTruthScene::empty(const GridSpec& grid) {
  GroundTruthScene s;
  s.grid = grid;
  s.sigma.assign(grid.voxel_count(), 0.0);
  s.rho.assign(grid.voxel_count(), 0.0);
  return s;
}

void SceneField::evaluate(const QueryBatch& queries, FieldValues& out) const {
  const Eigen::Index n = queries.size();
  out.sigma.resize(n);
  out.rho.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 p = queries.positions.col(i);
    out.sigma[i] = scene_.sample_sigma(p);
    out.rho[i] = scene_.sample_rho(
        p, {queries.directions(0, i), queries.directions(1, i)});
  }
}

void SceneField::density(const Eigen::Matrix3Xd& positions,
                         Eigen::VectorXd& sigma) const {
  sigma.resize(positions.cols());
  for (Eigen::Index i = 0; i < positions.cols(); ++i) {
    sigma[i] = scene_.sample_sigma(positions.col(i));
  }
}

// ---------------------------------------------------------------------------
// Simulators

namespace {

void check_simulation_inputs(const GroundTruthScene& scene,
                             const ScanPattern& scan, int n_bins,
                             double bin_width) {
  require(!scan.empty(), ErrorCode::kInvalidArgument, "scan pattern is empty");
  require(bin_width > 0.0 && std::isfinite(bin_width),
          ErrorCode::kInvalidArgument, "bin width must be positive");
  require(n_bins >= 1, ErrorCode::kInvalidArgument, "n_bins must be positive");
  scene.validate();
}

// Bin range whose center radius c t / 2 can reach the scene support.
std::pair<int, int> confocal_bin_range(const GroundTruthScene& scene,
                                       const Vec3& spot, int n_bins,
                                       double path_bin) {
  const Aabb box = scene.support();
  const double rmin = min_distance(box, spot);
  const double rmax = max_distance(box, spot);
  const int first = std::max(0, static_cast<int>(std::floor(2.0 * rmin / path_bin - 0.5)));
  const int last =
      std::min(n_bins - 1, static_cast<int>(std::ceil(2.0 * rmax / path_bin - 0.5)));
  return {first, last};
}

// One confocal row. Directions are the outer loop so that the occlusion
// march along each direction is shared by all bins.
void simulate_confocal_row(const GroundTruthScene& scene, const WallSpot& spot,
                           const TransientImage& img,
                           const SimulationOptions& opt, double* row) {
  const Vec3 origin = spot.position();
  const double path_bin = img.path_bin_width();
  const auto [first, last] =
      confocal_bin_range(scene, origin, img.n_bins, path_bin);
  if (first > last) return;

  const double dtheta = kHalfPi / opt.n_theta;
  const double dphi = kTwoPi / opt.n_phi;
  const double h = scene.grid.pitch;
  const double atten = img.constants.attenuation;
  const double r_last = 0.5 * path_bin * (last + 0.5);
  const int n_march = static_cast<int>(std::ceil(r_last / h)) + 1;

  std::vector<double> sums(static_cast<std::size_t>(last - first + 1), 0.0);
  std::vector<double> march_sigma;
  std::vector<double> cumulative;
  for (int it = 0; it < opt.n_theta; ++it) {
    const double theta = (it + 0.5) * dtheta;
    const double st = std::sin(theta);
    const double ct = std::cos(theta);
    for (int ip = 0; ip < opt.n_phi; ++ip) {
      const double phi = (ip + 0.5) * dphi;
      const Vec3 dir(st * std::cos(phi), st * std::sin(phi), ct);
      if (opt.occlusion) {
        // Trapezoid on a pitch-spaced grid along the ray.
        march_sigma.resize(static_cast<std::size_t>(n_march) + 1);
        cumulative.resize(static_cast<std::size_t>(n_march) + 1);
        cumulative[0] = 0.0;
        march_sigma[0] = scene.sample_sigma(origin);
        for (int k = 1; k <= n_march; ++k) {
          march_sigma[k] = scene.sample_sigma(origin + (k * h) * dir);
          cumulative[k] =
              cumulative[k - 1] + 0.5 * h * (march_sigma[k - 1] + march_sigma[k]);
        }
      }
      for (int b = first; b <= last; ++b) {
        const double r = 0.5 * path_bin * (b + 0.5);
        const Vec3 q = origin + r * dir;
        const double sigma = scene.sample_sigma(q);
        if (sigma == 0.0) continue;
        const double rho = scene.sample_rho(q, {theta, phi});
        double value = st * sigma * rho;
        if (opt.occlusion) {
          const int k = std::min(static_cast<int>(r / h), n_march - 1);
          const double tail = r - k * h;
          const double integral =
              cumulative[k] + 0.5 * tail * (march_sigma[k] + sigma);
          value *= std::exp(-2.0 * atten * integral);
        }
        sums[b - first] += value;
      }
    }
  }
  const double g0 = img.constants.gamma0;
  for (int b = first; b <= last; ++b) {
    const double r = 0.5 * path_bin * (b + 0.5);
    row[b] = path_bin * g0 * dtheta * dphi / (r * r) * sums[b - first];
  }
}

void simulate_ellipsoid_row(const GroundTruthScene& scene,
                            const ScanEntry& entry, const TransientImage& img,
                            const SimulationOptions& opt, double* row) {
  const double path_bin = img.path_bin_width();
  const Vec3 p = entry.illumination.position();
  const Vec3 pp = entry.detection.position();
  const Aabb box = scene.support();
  const double smin = min_distance(box, p) + min_distance(box, pp);
  const double smax = max_distance(box, p) + max_distance(box, pp);
  const double separation = (p - pp).norm();

  const double dnu = kPi / opt.n_theta;
  const double dvarphi = kPi / opt.n_phi;
  const double g0 = img.constants.gamma0;
  for (int b = 0; b < img.n_bins; ++b) {
    const double s = path_bin * (b + 0.5);
    if (s <= separation || s < smin - path_bin || s > smax + path_bin) continue;
    const EllipsoidFrame frame(entry.illumination, entry.detection, s);
    const double mu = ellipsoid_mu(frame);
    // Delta-function Jacobian of the focal-sum constraint, 1/(gamma sinh mu).
    const double delta_scale = 1.0 / (frame.gamma() * std::sinh(mu));
    double sum = 0.0;
    for (int in = 0; in < opt.n_theta; ++in) {
      const double nu = (in + 0.5) * dnu;
      for (int iv = 0; iv < opt.n_phi; ++iv) {
        const EllipsoidalPoint ep{mu, nu, (iv + 0.5) * dvarphi};
        const Vec3 q = ellipsoidal_to_cartesian(ep, frame);
        const double sigma = scene.sample_sigma(q);
        if (sigma == 0.0) continue;
        const SphericalPoint view = cartesian_to_spherical(q, entry.detection);
        const double rho = scene.sample_rho(q, {view.theta, view.phi});
        const double r1 = (q - p).norm();
        const double r2 = view.r;
        const double jac = ellipsoidal_jacobian(ep, frame);
        sum += jac * delta_scale / (r1 * r1 * r2 * r2) * sigma * rho;
      }
    }
    row[b] = path_bin * g0 * dnu * dvarphi * sum;
  }
}

}  // namespace

TransientImage simulate_confocal(const GroundTruthScene& scene,
                                 const ScanPattern& scan, int n_bins,
                                 double bin_width,
                                 const PhysicsConstants& constants,
                                 const SimulationOptions& options) {
  check_simulation_inputs(scene, scan, n_bins, bin_width);
  require(scan.confocal(), ErrorCode::kInvalidArgument,
          "simulate_confocal requires a confocal scan");
  require(options.n_theta >= 1 && options.n_phi >= 1,
          ErrorCode::kInvalidArgument, "quadrature resolution must be positive");
  TransientImage img = TransientImage::zeros(scan, n_bins, bin_width, constants);
  parallel_for(scan.size(), options.threads, [&](std::size_t e) {
    simulate_confocal_row(scene, scan.entries[e].detection, img, options,
                          img.data.row(static_cast<Eigen::Index>(e)).data());
  });
  return img;
}

TransientImage simulate_nonconfocal(const GroundTruthScene& scene,
                                    const ScanPattern& scan, int n_bins,
                                    double bin_width,
                                    const PhysicsConstants& constants,
                                    const SimulationOptions& options) {
  check_simulation_inputs(scene, scan, n_bins, bin_width);
  require(options.n_theta >= 1 && options.n_phi >= 1,
          ErrorCode::kInvalidArgument, "quadrature resolution must be positive");
  TransientImage img = TransientImage::zeros(scan, n_bins, bin_width, constants);
  SimulationOptions confocal_opt = options;
  confocal_opt.occlusion = false;
  parallel_for(scan.size(), options.threads, [&](std::size_t e) {
    const ScanEntry& entry = scan.entries[e];
    double* row = img.data.row(static_cast<Eigen::Index>(e)).data();
    const double gamma =
        0.5 * (entry.illumination.position() - entry.detection.position()).norm();
    if (gamma < kConfocalGammaThreshold) {
      simulate_confocal_row(scene, entry.detection, img, confocal_opt, row);
    } else {
      simulate_ellipsoid_row(scene, entry, img, options, row);
    }
  });
  return img;
}

TransientImage simulate_lct_form(const GroundTruthScene& scene,
                                 const ScanPattern& scan, int n_bins,
                                 double bin_width,
                                 const PhysicsConstants& constants) {
  check_simulation_inputs(scene, scan, n_bins, bin_width);
  require(scan.confocal(), ErrorCode::kInvalidArgument,
          "simulate_lct_form requires a confocal scan");
  require(!scene.directional(), ErrorCode::kInvalidArgument,
          "simulate_lct_form requires an isotropic scene");
  TransientImage img = TransientImage::zeros(scan, n_bins, bin_width, constants);
  const GridSpec& g = scene.grid;
  const double volume = g.pitch * g.pitch * g.pitch;
  const double path_bin = img.path_bin_width();
  for (std::size_t e = 0; e < scan.size(); ++e) {
    const Vec3 spot = scan.entries[e].detection.position();
    for (int k = 0; k < g.nz; ++k) {
      for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t v = g.index(i, j, k);
          const double albedo = scene.sigma[v] * scene.rho[v];
          if (albedo == 0.0) continue;
          const double r = (g.voxel_center(i, j, k) - spot).norm();
          const double bin = std::floor(2.0 * r / path_bin);
          if (bin < 0.0 || bin >= n_bins) continue;
          const double r2 = r * r;
          img.data(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(bin)) +=
              2.0 * constants.gamma0 * albedo * volume / (r2 * r2);
        }
      }
    }
  }
  return img;
}

void add_poisson_noise(TransientImage& image, double counts_per_unit,
                       std::uint64_t seed) {
  require(counts_per_unit > 0.0, ErrorCode::kInvalidArgument,
          "counts_per_unit must be positive");
  std::mt19937_64 rng(seed);
  for (Eigen::Index i = 0; i < image.data.size(); ++i) {
    double& v = image.data.data()[i];
    const double mean = v * counts_per_unit;
    if (mean <= 0.0) continue;
    std::poisson_distribution<long long> draw(mean);
    v = static_cast<double>(draw(rng)) / counts_per_unit;
  }
}

// ---------------------------------------------------------------------------
// Primitive scenes

PrimitiveKind parse_primitive_kind(const std::string& name) {
  if (name == "plane") return PrimitiveKind::kPlane;
  if (name == "sphere") return PrimitiveKind::kSphere;
  if (name == "two-planes-occluded" || name == "two-planes") {
    return PrimitiveKind::kTwoPlanesOccluded;
  }
  if (name == "letter") return PrimitiveKind::kLetter;
  fail(ErrorCode::kConfig, "unknown scene kind: " + name);
}

std::string to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::kPlane: return "plane";
    case PrimitiveKind::kSphere: return "sphere";
    case PrimitiveKind::kTwoPlanesOccluded: return "two-planes-occluded";
    case PrimitiveKind::kLetter: return "letter";
  }
  return "unknown";
}

namespace {

int nearest_layer(const GridSpec& g, double z) {
  const int k = static_cast<int>(std::lround((z - g.origin.z()) / g.pitch));
  require(k >= 0 && k < g.nz, ErrorCode::kInvalidArgument,
          "primitive depth lies outside the grid");
  return k;
}

void check_inside(const GridSpec& g, const Vec3& lo, const Vec3& hi) {
  const Aabb box = g.center_bounds();
  const double tol = 0.5 * g.pitch;
  require((lo.array() >= box.lo.array() - tol).all() &&
              (hi.array() <= box.hi.array() + tol).all(),
          ErrorCode::kInvalidArgument, "primitive extends outside the grid");
}

// Fills thickness layers starting at depth z over the xy predicate.
template <typename Pred>
void fill_layers(GroundTruthScene& s, double z, int thickness, double density,
                 Pred inside_xy) {
  const GridSpec& g = s.grid;
  const int k0 = nearest_layer(g, z);
  require(k0 + thickness - 1 < g.nz, ErrorCode::kInvalidArgument,
          "primitive thickness exceeds the grid");
  for (int k = k0; k < k0 + thickness; ++k) {
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const Vec3 c = g.voxel_center(i, j, k);
        if (inside_xy(c.x(), c.y())) s.sigma[g.index(i, j, k)] = density;
      }
    }
  }
}

}  // namespace

GroundTruthScene make_primitive_scene(PrimitiveKind kind,
                                      const PrimitiveParams& p) {
  require(p.density >= 0.0 && p.albedo >= 0.0 && p.thickness >= 1,
          ErrorCode::kInvalidArgument, "invalid primitive parameters");
  GroundTruthScene s = GroundTruthScene::empty(p.grid);
  s.validate();
  std::fill(s.rho.begin(), s.rho.end(), p.albedo);
  const GridSpec& g = p.grid;
  const double eps = 1e-9;
  const double cx = p.center.x();
  const double cy = p.center.y();

  switch (kind) {
    case PrimitiveKind::kPlane: {
      check_inside(g, {cx - p.half_x, cy - p.half_y, p.center.z()},
                   {cx + p.half_x, cy + p.half_y, p.center.z()});
      fill_layers(s, p.center.z(), p.thickness, p.density,
                  [&](double x, double y) {
                    return std::abs(x - cx) <= p.half_x + eps &&
                           std::abs(y - cy) <= p.half_y + eps;
                  });
      break;
    }
    case PrimitiveKind::kSphere: {
      check_inside(g, p.center.array() - p.radius, p.center.array() + p.radius);
      for (int k = 0; k < g.nz; ++k) {
        for (int j = 0; j < g.ny; ++j) {
          for (int i = 0; i < g.nx; ++i) {
            if ((g.voxel_center(i, j, k) - p.center).norm() <= p.radius) {
              s.sigma[g.index(i, j, k)] = p.density;
            }
          }
        }
      }
      break;
    }
    case PrimitiveKind::kTwoPlanesOccluded: {
      // Back plane spans the full extent; the front plane covers the -x half
      // plus one pitch past the center line, so the line of sight from the
      // wall origin to the back-plane center crosses it.
      require(p.back_z > p.center.z() + p.thickness * g.pitch,
              ErrorCode::kInvalidArgument,
              "back plane must lie behind the front plane");
      check_inside(g, {cx - p.half_x, cy - p.half_y, p.center.z()},
                   {cx + p.half_x, cy + p.half_y, p.back_z});
      fill_layers(s, p.back_z, p.thickness, p.density, [&](double x, double y) {
        return std::abs(x - cx) <= p.half_x + eps &&
               std::abs(y - cy) <= p.half_y + eps;
      });
      const double front_edge = cx * p.center.z() / p.back_z + g.pitch;
      fill_layers(s, p.center.z(), p.thickness, p.density,
                  [&](double x, double y) {
                    return x >= cx - p.half_x - eps && x <= front_edge + eps &&
                           std::abs(y - cy) <= p.half_y + eps;
                  });
      break;
    }
    case PrimitiveKind::kLetter: {
      // A "Z": top bar, bottom bar, and the diagonal joining them.
      check_inside(g, {cx - p.half_x, cy - p.half_y, p.center.z()},
                   {cx + p.half_x, cy + p.half_y, p.center.z()});
      const double stroke = std::max(1.5 * g.pitch, 0.2 * p.half_y);
      fill_layers(s, p.center.z(), p.thickness, p.density,
                  [&](double x, double y) {
                    const double u = x - cx;
                    const double v = y - cy;
                    if (std::abs(u) > p.half_x + eps ||
                        std::abs(v) > p.half_y + eps) {
                      return false;
                    }
                    if (v >= p.half_y - stroke || v <= -p.half_y + stroke) {
                      return true;
                    }
                    // Diagonal from (-half_x, -half_y) to (half_x, half_y).
                    const double along = v / p.half_y * p.half_x;
                    return std::abs(u - along) <= 0.5 * stroke * std::hypot(1.0, p.half_x / p.half_y);
                  });
      break;
    }
  }
  return s;
}

GroundTruthScene combine_scenes(const GroundTruthScene& a,
                                const GroundTruthScene& b) {
  require(a.grid == b.grid, ErrorCode::kShapeMismatch,
          "combine_scenes: grids differ");
  require(!a.directional() && !b.directional(), ErrorCode::kInvalidArgument,
          "combine_scenes: directional scenes are not supported");
  GroundTruthScene out = a;
  for (std::size_t v = 0; v < out.sigma.size(); ++v) {
    out.sigma[v] = std::max(a.sigma[v], b.sigma[v]);
    out.rho[v] = std::max(a.rho[v], b.rho[v]);
  }
  return out;
}

}  // namespace ntf
