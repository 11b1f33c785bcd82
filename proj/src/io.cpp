#include "ntf/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "ntf/error.hpp"

namespace ntf {
namespace {

class ByteWriter {
 public:
  void magic(const char* m) { out_.append(m, 4); }

  template <typename T>
  void put(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>(bits & 0xFF));
      bits = static_cast<U>(bits >> 8);
    }
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  void expect_magic(const char* m) {
    need(4);
    require(bytes_.compare(pos_, 4, m) == 0, ErrorCode::kCorruptContainer,
            std::string("bad magic, expected ") + m);
    pos_ += 4;
  }

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    need(sizeof(T));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<U>(static_cast<U>(
                  static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n) const {
    require(remaining() >= n, ErrorCode::kCorruptContainer,
            "container is truncated");
  }

  void expect_end() const {
    require(remaining() == 0, ErrorCode::kCorruptContainer,
            "container has trailing bytes");
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void check_version(std::uint16_t version) {
  require(version == kFormatVersion, ErrorCode::kCorruptContainer,
          "unsupported container version " + std::to_string(version));
}

// Seconds from picoseconds, chosen so that converting back is exact.
double seconds_from_ps(double ps) {
  double s = ps / 1e12;
  for (int i = 0; i < 4 && s * 1e12 != ps; ++i) {
    s = std::nextafter(s, s * 1e12 < ps ? std::numeric_limits<double>::max()
                                        : 0.0);
  }
  return s;
}

float to_f32(double v) {
  require(std::isfinite(v), ErrorCode::kNonFinite,
          "refusing to write a non-finite value");
  return static_cast<float>(v);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  require(!in.bad(), ErrorCode::kIo, "cannot read " + path);
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(out.good(), ErrorCode::kIo, "cannot write " + path);
}

std::string encode_transient(const TransientImage& image) {
  require(image.data.rows() == static_cast<Eigen::Index>(image.scan.size()) &&
              image.data.cols() == image.n_bins,
          ErrorCode::kShapeMismatch, "transient payload does not match counts");
  ByteWriter w;
  w.magic("NTFT");
  w.put<std::uint16_t>(kFormatVersion);
  w.put<std::uint16_t>(image.scan.confocal() ? 1 : 0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(image.scan.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(image.n_bins));
  w.put<double>(image.bin_width * 1e12);
  w.put<double>(image.constants.c);
  for (const ScanEntry& e : image.scan.entries) {
    w.put<double>(e.illumination.x);
    w.put<double>(e.illumination.y);
    w.put<double>(e.detection.x);
    w.put<double>(e.detection.y);
  }
  for (Eigen::Index r = 0; r < image.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < image.data.cols(); ++c) {
      w.put<float>(to_f32(image.data(r, c)));
    }
  }
  return w.take();
}

TransientImage decode_transient(const std::string& bytes) {
  ByteReader r(bytes);
  r.expect_magic("NTFT");
  check_version(r.get<std::uint16_t>());
  const auto flags = r.get<std::uint16_t>();
  const auto n_entries = r.get<std::uint32_t>();
  const auto n_bins = r.get<std::uint32_t>();
  const double width_ps = r.get<double>();
  const double c = r.get<double>();
  require(n_bins > 0 && n_bins < (1u << 24) && width_ps > 0.0 && c > 0.0,
          ErrorCode::kCorruptContainer, "invalid transient header");
  r.need(static_cast<std::size_t>(n_entries) * 32);
  TransientImage img;
  img.n_bins = static_cast<int>(n_bins);
  img.bin_width = seconds_from_ps(width_ps);
  img.constants.c = c;
  img.scan.entries.resize(n_entries);
  for (ScanEntry& e : img.scan.entries) {
    e.illumination.x = r.get<double>();
    e.illumination.y = r.get<double>();
    e.detection.x = r.get<double>();
    e.detection.y = r.get<double>();
  }
  require(r.remaining() == static_cast<std::size_t>(n_entries) * n_bins * 4,
          ErrorCode::kCorruptContainer,
          "transient payload length does not match the declared counts");
  require(((flags & 1) != 0) == img.scan.confocal(),
          ErrorCode::kCorruptContainer, "confocal flag contradicts the spots");
  img.data.resize(n_entries, n_bins);
  for (Eigen::Index row = 0; row < img.data.rows(); ++row) {
    for (Eigen::Index col = 0; col < img.data.cols(); ++col) {
      img.data(row, col) = r.get<float>();
    }
  }
  r.expect_end();
  return img;
}

void write_transient(const std::string& path, const TransientImage& image) {
  write_file(path, encode_transient(image));
}

TransientImage read_transient(const std::string& path) {
  return decode_transient(read_file(path));
}

std::string encode_volume(const VoxelVolume& vol) {
  vol.validate();
  ByteWriter w;
  w.magic("NTFV");
  w.put<std::uint16_t>(kFormatVersion);
  w.put<std::uint16_t>(0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(vol.grid.nx));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(vol.grid.ny));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(vol.grid.nz));
  w.put<double>(vol.grid.pitch);
  for (int a = 0; a < 3; ++a) w.put<double>(vol.grid.origin[a]);
  for (double v : vol.sigma) w.put<float>(to_f32(v));
  for (double v : vol.rho) w.put<float>(to_f32(v));
  return w.take();
}

VoxelVolume decode_volume(const std::string& bytes) {
  ByteReader r(bytes);
  r.expect_magic("NTFV");
  check_version(r.get<std::uint16_t>());
  r.get<std::uint16_t>();
  GridSpec g;
  g.nx = static_cast<int>(r.get<std::uint32_t>());
  g.ny = static_cast<int>(r.get<std::uint32_t>());
  g.nz = static_cast<int>(r.get<std::uint32_t>());
  g.pitch = r.get<double>();
  for (int a = 0; a < 3; ++a) g.origin[a] = r.get<double>();
  require(g.nx > 0 && g.ny > 0 && g.nz > 0 && g.pitch > 0.0,
          ErrorCode::kCorruptContainer, "invalid volume header");
  require(r.remaining() == 2 * g.voxel_count() * 4, ErrorCode::kCorruptContainer,
          "volume payload length does not match the declared dims");
  VoxelVolume vol = VoxelVolume::zeros(g);
  for (double& v : vol.sigma) v = r.get<float>();
  for (double& v : vol.rho) v = r.get<float>();
  return vol;
}

void write_volume(const std::string& path, const VoxelVolume& vol) {
  write_file(path, encode_volume(vol));
}

VoxelVolume read_volume(const std::string& path) {
  return decode_volume(read_file(path));
}

std::string encode_checkpoint(const NetParams& params) {
  const NetConfig& c = params.config();
  ByteWriter w;
  w.magic("NTFP");
  w.put<std::uint16_t>(kFormatVersion);
  w.put<std::uint16_t>(0);
  for (int v : {c.encoding.n_freq_pos, c.encoding.n_freq_dir, c.width, c.depth,
                c.skip_after, c.head_width}) {
    w.put<std::int32_t>(v);
  }
  for (int a = 0; a < 3; ++a) w.put<double>(c.encoding.bounds.lo[a]);
  for (int a = 0; a < 3; ++a) w.put<double>(c.encoding.bounds.hi[a]);
  w.put<std::uint64_t>(params.size());
  for (Eigen::Index i = 0; i < params.values().size(); ++i) {
    w.put<double>(params.values()[i]);
  }
  return w.take();
}

NetParams decode_checkpoint(const std::string& bytes) {
  ByteReader r(bytes);
  r.expect_magic("NTFP");
  check_version(r.get<std::uint16_t>());
  r.get<std::uint16_t>();
  NetConfig c;
  c.encoding.n_freq_pos = r.get<std::int32_t>();
  c.encoding.n_freq_dir = r.get<std::int32_t>();
  c.width = r.get<std::int32_t>();
  c.depth = r.get<std::int32_t>();
  c.skip_after = r.get<std::int32_t>();
  c.head_width = r.get<std::int32_t>();
  for (int a = 0; a < 3; ++a) c.encoding.bounds.lo[a] = r.get<double>();
  for (int a = 0; a < 3; ++a) c.encoding.bounds.hi[a] = r.get<double>();
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptContainer,
         std::string("invalid checkpoint architecture: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  require(count == c.parameter_count(), ErrorCode::kShapeMismatch,
          "checkpoint parameter count does not match its architecture");
  require(r.remaining() == count * 8, ErrorCode::kCorruptContainer,
          "checkpoint payload length does not match its count");
  NetParams params(c);
  for (Eigen::Index i = 0; i < params.values().size(); ++i) {
    params.values()[i] = r.get<double>();
  }
  return params;
}

void write_checkpoint(const std::string& path, const NetParams& params) {
  write_file(path, encode_checkpoint(params));
}

NetParams read_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

ProjectionAxis parse_projection_axis(const std::string& name) {
  if (name == "front") return ProjectionAxis::kFront;
  if (name == "top") return ProjectionAxis::kTop;
  fail(ErrorCode::kConfig, "unknown projection axis '" + name + "'");
}

GrayImage max_projection(const VoxelVolume& vol, ProjectionAxis axis) {
  vol.validate();
  const GridSpec& g = vol.grid;
  const std::vector<double> albedo = vol.albedo();
  GrayImage img;
  img.width = g.nx;
  img.height = axis == ProjectionAxis::kFront ? g.ny : g.nz;
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0.0);
  for (int k = 0; k < g.nz; ++k) {
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const int row = axis == ProjectionAxis::kFront ? g.ny - 1 - j : k;
        double& px = img.pixels[static_cast<std::size_t>(row) * img.width + i];
        px = std::max(px, albedo[g.index(i, j, k)]);
      }
    }
  }
  return img;
}

std::string encode_pgm(const GrayImage& image) {
  require(image.width > 0 && image.height > 0 &&
              image.pixels.size() ==
                  static_cast<std::size_t>(image.width) * image.height,
          ErrorCode::kShapeMismatch, "image size mismatch");
  const auto [lo, hi] =
      std::minmax_element(image.pixels.begin(), image.pixels.end());
  const double range = *hi - *lo;
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  for (double p : image.pixels) {
    const double u = range > 0.0 ? (p - *lo) / range : 0.0;
    out.push_back(static_cast<char>(
        static_cast<unsigned char>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0))));
  }
  return out;
}

std::string encode_obj(const TriMesh& mesh) {
  std::string out;
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1,
                  t[2] + 1);
    out += buf;
  }
  return out;
}

std::string encode_depth(const DepthMap& map) {
  std::string out =
      "NTFD " + std::to_string(map.nx) + " " + std::to_string(map.ny) + "\n";
  for (double d : map.depth) out += format_double(d) + "\n";
  return out;
}

DepthMap decode_depth(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  DepthMap map;
  in >> magic >> map.nx >> map.ny;
  require(in.good() && magic == "NTFD" && map.nx > 0 && map.ny > 0,
          ErrorCode::kCorruptContainer, "invalid depth map header");
  map.depth.resize(static_cast<std::size_t>(map.nx) * map.ny);
  for (double& d : map.depth) {
    in >> d;
    require(!in.fail(), ErrorCode::kCorruptContainer, "depth map is truncated");
  }
  std::string rest;
  require(!(in >> rest), ErrorCode::kCorruptContainer,
          "depth map has trailing data");
  return map;
}

RunConfig::RunConfig() {
  values_ = {
      // scene and acquisition
      {"scene", "desk"},
      {"grid_dims", "32,32,24"},
      {"grid_pitch", "0.02"},
      {"grid_origin", "-0.31,-0.31,0.17"},
      {"scene_center", "-0.13,0,0.41"},
      {"scene_half_x", "0.12"},
      {"scene_half_y", "0.15"},
      {"scene_radius", "0.06"},
      {"scene_back_z", "0.6"},
      {"scene_thickness", "1"},
      {"scene_density", "1"},
      {"scene_albedo", "1"},
      {"sphere_center", "0.15,0.01,0.35"},
      {"laser_offset_x", "0.05"},
      {"laser_offset_y", "0"},
      {"scan", "16"},
      {"scan_half_extent", "0.32"},
      {"mode", "confocal"},
      {"bins", "128"},
      {"bin_width_ps", "60"},
      {"occlusion", "false"},
      {"sim_n_theta", "64"},
      {"sim_n_phi", "64"},
      {"c", "3e8"},
      {"gamma0", "1"},
      {"attenuation", "1"},
      {"noise_counts", "0"},
      // network
      {"n_freq_pos", "10"},
      {"n_freq_dir", "10"},
      {"net_width", "256"},
      {"net_depth", "8"},
      {"net_skip_after", "4"},
      {"net_head_width", "128"},
      {"bounds_lo", "-0.34,-0.34,0.14"},
      {"bounds_hi", "0.34,0.34,0.66"},
      // training
      {"epochs_stage_one", "5"},
      {"epochs_stage_two", "5"},
      {"batch_size", "4"},
      {"lr_start", "1e-3"},
      {"lr_end", "1e-4"},
      {"adam_beta1", "0.9"},
      {"adam_beta2", "0.999"},
      {"adam_eps", "1e-7"},
      {"n_c", "32"},
      {"n_f", "1024"},
      {"burn_in", "-1"},
      {"occlusion_aware", "false"},
      {"n_march", "16"},
      {"nonzero_bins_only", "false"},
      {"spot_epsilon", "0.05"},
      {"seed", "1"},
      {"threads", "1"},
      // extraction
      {"iso_fraction", "0.3"},
      {"depth_fraction", "0.3"},
      {"direction_policy", "frontal"},
  };
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kConfig,
            "config line " + std::to_string(line_no) + " lacks '='");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  return parse(read_file(path));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfig,
          "unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfig,
          "unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kConfig, "config key '" + key + "' needs an integer");
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& s = get(key);
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size() && s.find('-') == std::string::npos) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kConfig, "config key '" + key + "' needs an unsigned integer");
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kConfig, "config key '" + key + "' needs a number");
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1" || s == "on") return true;
  if (s == "false" || s == "0" || s == "off") return false;
  fail(ErrorCode::kConfig, "config key '" + key + "' needs true or false");
}

Vec3 RunConfig::get_vec3(const std::string& key) const {
  std::istringstream in(get(key));
  Vec3 v;
  char sep = 0;
  in >> v.x() >> sep;
  if (sep == ',') in >> v.y() >> sep;
  if (sep == ',') in >> v.z();
  std::string rest;
  require(!in.fail() && sep == ',' && !(in >> rest), ErrorCode::kConfig,
          "config key '" + key + "' needs x,y,z");
  return v;
}

std::array<int, 3> RunConfig::get_int3(const std::string& key) const {
  std::istringstream in(get(key));
  std::array<int, 3> v{};
  char sep = 0;
  in >> v[0] >> sep;
  if (sep == ',') in >> v[1] >> sep;
  if (sep == ',') in >> v[2];
  std::string rest;
  require(!in.fail() && sep == ',' && !(in >> rest), ErrorCode::kConfig,
          "config key '" + key + "' needs nx,ny,nz");
  return v;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs_stage_one = get_int("epochs_stage_one");
  t.epochs_stage_two = get_int("epochs_stage_two");
  t.batch_size = get_int("batch_size");
  t.lr_start = get_double("lr_start");
  t.lr_end = get_double("lr_end");
  t.adam_beta1 = get_double("adam_beta1");
  t.adam_beta2 = get_double("adam_beta2");
  t.adam_eps = get_double("adam_eps");
  t.n_c = get_int("n_c");
  t.n_f = get_int("n_f");
  t.burn_in = get_int("burn_in");
  t.occlusion_aware = get_bool("occlusion_aware");
  t.n_march = get_int("n_march");
  t.nonzero_bins_only = get_bool("nonzero_bins_only");
  t.spot_epsilon = get_double("spot_epsilon");
  t.seed = get_u64("seed");
  t.threads = get_int("threads");
  t.validate();
  return t;
}

NetConfig RunConfig::net_config() const {
  NetConfig n;
  n.encoding.n_freq_pos = get_int("n_freq_pos");
  n.encoding.n_freq_dir = get_int("n_freq_dir");
  n.encoding.bounds = {get_vec3("bounds_lo"), get_vec3("bounds_hi")};
  n.width = get_int("net_width");
  n.depth = get_int("net_depth");
  n.skip_after = get_int("net_skip_after");
  n.head_width = get_int("net_head_width");
  try {
    n.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  return n;
}

PhysicsConstants RunConfig::constants() const {
  PhysicsConstants p;
  p.c = get_double("c");
  p.gamma0 = get_double("gamma0");
  p.attenuation = get_double("attenuation");
  require(p.c > 0.0 && p.gamma0 > 0.0 && p.attenuation >= 0.0,
          ErrorCode::kConfig, "invalid physics constants");
  return p;
}

std::string format_report(const TrainReport& report, const RunConfig& config) {
  std::string out = "# training report\nseed " + std::to_string(report.seed) + "\n";
  std::istringstream cfg(config.to_text());
  std::string line;
  while (std::getline(cfg, line)) out += "config " + line + "\n";
  for (const StageReport& s : report.stages) {
    out += "stage " + std::to_string(s.stage) + " steps " +
           std::to_string(s.steps) + " skipped " +
           std::to_string(s.skipped_updates) + "\n";
    for (std::size_t e = 0; e < s.epoch_loss.size(); ++e) {
      out += "epoch_loss " + std::to_string(s.stage) + " " +
             std::to_string(e + 1) + " " + format_double(s.epoch_loss[e]) + "\n";
    }
  }
  for (std::size_t s = 0; s < report.entry_loss.size(); ++s) {
    for (std::size_t e = 0; e < report.entry_loss[s].size(); ++e) {
      out += "entry_loss " + std::to_string(s + 1) + " " + std::to_string(e) +
             " " + format_double(report.entry_loss[s][e]) + "\n";
    }
  }
  for (std::size_t e = 0; e < report.spot_map.pdf.size(); ++e) {
    out += "spot_pdf " + std::to_string(e) + " " +
           format_double(report.spot_map.pdf[e]) + "\n";
  }
  out += "clamped_inputs " + std::to_string(report.clamp_count) + "\n";
  return out;
}

}  // namespace ntf
