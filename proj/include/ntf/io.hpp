#pragma once

// File formats and run configuration. All binary files are little-endian.
//
// NTFT transient:  "NTFT" u16 version u16 flags(bit 0 confocal)
//                  u32 n_entries u32 n_bins f64 bin_width_ps f64 c
//                  n_entries x (f64 illum x, y, det x, y)
//                  n_entries x n_bins f32, row-major
// NTFV volume:     "NTFV" u16 version u16 flags u32 nx ny nz f64 pitch
//                  f64 origin x, y, z, then nx*ny*nz f32 sigma, same for rho
// NTFP checkpoint: "NTFP" u16 version u16 flags i32 n_freq_pos n_freq_dir
//                  width depth skip_after head_width f64 bounds lo, hi
//                  u64 count, count x f64 parameters (layer order, W then b)

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ntf/extract.hpp"
#include "ntf/neural_field.hpp"
#include "ntf/scene.hpp"
#include "ntf/training.hpp"

namespace ntf {

inline constexpr std::uint16_t kFormatVersion = 1;

std::string encode_transient(const TransientImage& image);
TransientImage decode_transient(const std::string& bytes);
void write_transient(const std::string& path, const TransientImage& image);
TransientImage read_transient(const std::string& path);

std::string encode_volume(const VoxelVolume& vol);
VoxelVolume decode_volume(const std::string& bytes);
void write_volume(const std::string& path, const VoxelVolume& vol);
VoxelVolume read_volume(const std::string& path);

std::string encode_checkpoint(const NetParams& params);
NetParams decode_checkpoint(const std::string& bytes);
void write_checkpoint(const std::string& path, const NetParams& params);
NetParams read_checkpoint(const std::string& path);

// Whole-file helpers; failures throw kIo.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major, row 0 at the top
};

enum class ProjectionAxis { kFront, kTop };
ProjectionAxis parse_projection_axis(const std::string& name);

// Max-intensity projection of the albedo channel. Front looks along z
// (x right, y up); top looks along y (x right, z down).
GrayImage max_projection(const VoxelVolume& vol, ProjectionAxis axis);
// 8-bit binary graymap, min-max normalized (a constant image is black).
std::string encode_pgm(const GrayImage& image);

// "v x y z" and "f i j k" records, 1-based indices.
std::string encode_obj(const TriMesh& mesh);

// "NTFD nx ny" header, then one depth per line (x fastest); -1 when empty.
std::string encode_depth(const DepthMap& map);
DepthMap decode_depth(const std::string& text);

// Flat key=value settings. Every key has a default; unknown keys are errors.
class RunConfig {
 public:
  RunConfig();

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  Vec3 get_vec3(const std::string& key) const;
  std::array<int, 3> get_int3(const std::string& key) const;

  // Every effective key=value, sorted by key.
  std::string to_text() const;

  TrainConfig train_config() const;
  NetConfig net_config() const;
  PhysicsConstants constants() const;

 private:
  std::map<std::string, std::string> values_;
};

// Line-oriented report: config echo, per-epoch losses, per-entry losses and
// the spot pdf. Wall-clock times are left out so that reruns are identical.
std::string format_report(const TrainReport& report, const RunConfig& config);

}  // namespace ntf
