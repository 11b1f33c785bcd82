// ntf: simulate, train, extract, evaluate and inspect neural transient fields.
//
// Exit codes: 0 ok, 2 configuration, 3 IO, 4 corrupt container,
// 5 shape mismatch.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ntf/error.hpp"
#include "ntf/extract.hpp"
#include "ntf/io.hpp"
#include "ntf/neural_field.hpp"
#include "ntf/pipeline.hpp"
#include "ntf/training.hpp"

using namespace ntf;

namespace {

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return 3;
    case ErrorCode::kCorruptContainer: return 4;
    case ErrorCode::kShapeMismatch: return 5;
    default: return 2;
  }
}

// Options shared by every config-driven command.
struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;
  int threads = 0;
  long long seed = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "key=value configuration file");
    cmd->add_option("--set", sets, "override one key, key=value (repeatable)");
    cmd->add_option("--threads", threads, "worker cap")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
  }

  RunConfig load() const {
    RunConfig c = path.empty() ? RunConfig() : RunConfig::load(path);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      require(eq != std::string::npos, ErrorCode::kConfig, "--set needs key=value: " + kv);
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (threads > 0) c.set("threads", std::to_string(threads));
    if (seed >= 0) c.set("seed", std::to_string(seed));
    return c;
  }
};

// "16" or "16x16".
std::string parse_scan(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x != std::string::npos) {
    require(text.substr(0, x) == text.substr(x + 1), ErrorCode::kConfig,
            "scan must be square: " + text);
    return text.substr(0, x);
  }
  return text;
}

void say(bool quiet, const std::string& line) {
  if (!quiet) std::cerr << line << "\n";
}

std::string magic_of(const std::string& path) {
  const std::string bytes = read_file(path);
  return bytes.substr(0, 4);
}

DepthMap load_depth_like(const std::string& path, double fraction) {
  const std::string bytes = read_file(path);
  if (bytes.compare(0, 4, "NTFV") == 0) return albedo_depth(decode_volume(bytes), fraction);
  if (bytes.compare(0, 4, "NTFD") == 0) return decode_depth(bytes);
  fail(ErrorCode::kCorruptContainer, path + " is neither a volume nor a depth map");
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const double f = std::stod(item, &used);
      require(used == item.size() && f >= 0.0 && f < 1.0, ErrorCode::kConfig, "");
      out.push_back(f);
    } catch (const std::exception&) {
      fail(ErrorCode::kConfig, "thresholds must be fractions in [0, 1): " + text);
    }
  }
  require(!out.empty(), ErrorCode::kConfig, "no thresholds given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural transient fields for non-line-of-sight imaging"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "no progress output");

  // simulate
  auto* sim = app.add_subcommand("simulate", "render a ground-truth scene into a transient container");
  ConfigArgs sim_cfg;
  sim_cfg.attach(sim);
  std::string sim_scene, sim_scan, sim_mode, sim_out, sim_scene_out;
  int sim_bins = 0;
  double sim_binwidth = 0.0, sim_noise = -1.0;
  bool sim_occlusion = false;
  sim->add_option("--scene", sim_scene, "plane|sphere|two-planes-occluded|letter|desk|voxel");
  sim->add_option("--scan", sim_scan, "scan grid, N or NxN");
  sim->add_option("--mode", sim_mode, "confocal|nonconfocal");
  sim->add_option("--bins", sim_bins, "time bins")->check(CLI::PositiveNumber);
  sim->add_option("--binwidth", sim_binwidth, "bin width in picoseconds")->check(CLI::PositiveNumber);
  sim->add_flag("--occlusion", sim_occlusion, "attenuate by the transmittance along both legs");
  sim->add_option("--noise", sim_noise, "Poisson counts per unit intensity (0 = none)");
  sim->add_option("--out", sim_out, "transient container to write")->required();
  sim->add_option("--scene-out", sim_scene_out, "also write the scene as a volume");

  // train
  auto* train = app.add_subcommand("train", "fit a neural transient field to measurements");
  ConfigArgs train_cfg;
  train_cfg.attach(train);
  std::string train_data, train_stage = "both", train_ckpt_in, train_ckpt_out, train_report;
  train->add_option("--data", train_data, "transient container")->required();
  train->add_option("--stage", train_stage, "one|two|both");
  train->add_option("--checkpoint", train_ckpt_in, "resume from this checkpoint");
  train->add_option("--checkpoint-out", train_ckpt_out, "checkpoint to write")->required();
  train->add_option("--report-out", train_report, "training report to write");

  // extract
  auto* ext = app.add_subcommand("extract", "sample a trained field into volume, mesh and depth");
  ConfigArgs ext_cfg;
  ext_cfg.attach(ext);
  std::string ext_ckpt, ext_dims, ext_mesh, ext_volume, ext_depth;
  double ext_iso = -1.0;
  ext->add_option("--checkpoint", ext_ckpt, "trained field")->required();
  ext->add_option("--dims", ext_dims, "grid dims nx,ny,nz (keeps origin and pitch)");
  ext->add_option("--iso", ext_iso, "iso level as a fraction of the albedo max");
  ext->add_option("--mesh-out", ext_mesh, "OBJ mesh");
  ext->add_option("--volume-out", ext_volume, "volume container");
  ext->add_option("--depth-out", ext_depth, "depth map text");

  // eval
  auto* ev = app.add_subcommand("eval", "depth MAE table against a reference");
  ConfigArgs ev_cfg;
  ev_cfg.attach(ev);
  std::string ev_reference, ev_data, ev_table, ev_thresholds;
  std::vector<std::string> ev_candidates, ev_baselines;
  ev->add_option("--reference", ev_reference, "ground-truth volume or depth map")->required();
  ev->add_option("--candidate", ev_candidates, "name=path of a volume or depth map (repeatable)");
  ev->add_option("--baseline", ev_baselines, "bp|fbp, computed from --data on the reference grid");
  ev->add_option("--data", ev_data, "transient container for baselines");
  ev->add_option("--thresholds", ev_thresholds, "comma-separated fractions of the albedo max");
  ev->add_option("--table-out", ev_table, "write the table here as well as stdout");

  // render-figure
  auto* fig = app.add_subcommand("render-figure", "max-intensity projection of a volume");
  std::string fig_volume, fig_axis = "front", fig_out;
  fig->add_option("--volume", fig_volume, "volume container")->required();
  fig->add_option("--axis", fig_axis, "front|top");
  fig->add_option("--out", fig_out, "PGM image")->required();

  // info
  auto* info = app.add_subcommand("info", "describe a container");
  std::string info_path;
  info->add_option("file", info_path, "transient, volume, checkpoint or depth file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      RunConfig c = sim_cfg.load();
      if (!sim_scene.empty()) c.set("scene", sim_scene);
      if (!sim_scan.empty()) c.set("scan", parse_scan(sim_scan));
      if (!sim_mode.empty()) c.set("mode", sim_mode);
      if (sim_bins > 0) c.set("bins", std::to_string(sim_bins));
      if (sim_binwidth > 0.0) c.set("bin_width_ps", CLI::detail::to_string(sim_binwidth));
      if (sim_occlusion) c.set("occlusion", "true");
      if (sim_noise >= 0.0) c.set("noise_counts", CLI::detail::to_string(sim_noise));
      const TransientImage t = simulate_from_config(c);
      write_transient(sim_out, t);
      if (!sim_scene_out.empty()) {
        const GroundTruthScene s = scene_from_config(c);
        write_volume(sim_scene_out, query_volume(SceneField(s), s.grid, DirectionPolicy::kFrontal,
                                                 c.get_int("threads")));
      }
      say(quiet, "wrote " + sim_out + ": " + std::to_string(t.scan.size()) + " entries x " +
                     std::to_string(t.n_bins) + " bins");
    } else if (*train) {
      const RunConfig c = train_cfg.load();
      const TrainConfig tc = c.train_config();
      const StageSelection stages = parse_stage_selection(train_stage);
      TransientImage data = read_transient(train_data);
      // Containers carry c only; the remaining constants come from the config.
      const PhysicsConstants pc = c.constants();
      data.constants.gamma0 = pc.gamma0;
      data.constants.attenuation = pc.attenuation;
      NeuralField field(train_ckpt_in.empty() ? init_params(c.net_config(), tc.seed)
                                              : read_checkpoint(train_ckpt_in));
      const TrainReport report = train_stages(
          field, data, tc, stages, [&](const std::string& s) { say(quiet, s); });
      write_checkpoint(train_ckpt_out, field.params());
      if (!train_report.empty()) write_file(train_report, format_report(report, c));
      say(quiet, "wrote " + train_ckpt_out);
    } else if (*ext) {
      RunConfig c = ext_cfg.load();
      if (!ext_dims.empty()) c.set("grid_dims", ext_dims);
      if (ext_iso >= 0.0) c.set("iso_fraction", CLI::detail::to_string(ext_iso));
      const NeuralField field(read_checkpoint(ext_ckpt));
      const int threads = c.get_int("threads");
      const VoxelVolume vol = query_volume(field, grid_from_config(c),
                                           direction_policy_from_config(c), threads);
      if (!ext_volume.empty()) write_volume(ext_volume, vol);
      if (!ext_mesh.empty()) {
        const std::vector<double> albedo = vol.albedo();
        const TriMesh mesh = marching_cubes(
            vol.grid, albedo, relative_threshold(albedo, c.get_double("iso_fraction")), threads);
        write_file(ext_mesh, encode_obj(mesh));
        say(quiet, "mesh: " + std::to_string(mesh.vertices.size()) + " vertices, " +
                       std::to_string(mesh.triangles.size()) + " triangles");
      }
      if (!ext_depth.empty()) {
        write_file(ext_depth, encode_depth(albedo_depth(vol, c.get_double("depth_fraction"))));
      }
    } else if (*ev) {
      const RunConfig c = ev_cfg.load();
      const std::vector<double> fractions = ev_thresholds.empty()
                                                ? std::vector<double>{c.get_double("depth_fraction")}
                                                : parse_fractions(ev_thresholds);
      const bool ref_is_volume = magic_of(ev_reference) == "NTFV";
      std::vector<std::pair<std::string, VoxelVolume>> volumes;
      std::vector<std::pair<std::string, DepthMap>> depths;
      for (const std::string& cand : ev_candidates) {
        const auto eq = cand.find('=');
        require(eq != std::string::npos && eq > 0, ErrorCode::kConfig,
                "--candidate needs name=path: " + cand);
        const std::string name = cand.substr(0, eq), path = cand.substr(eq + 1);
        const std::string bytes = read_file(path);
        if (bytes.compare(0, 4, "NTFV") == 0) {
          volumes.emplace_back(name, decode_volume(bytes));
        } else {
          depths.emplace_back(name, decode_depth(bytes));
        }
      }
      if (!ev_baselines.empty()) {
        require(!ev_data.empty(), ErrorCode::kConfig, "--baseline needs --data");
        require(ref_is_volume, ErrorCode::kConfig, "--baseline needs a volume reference");
        const TransientImage data = read_transient(ev_data);
        const GridSpec grid = read_volume(ev_reference).grid;
        for (const std::string& b : ev_baselines) {
          require(b == "bp" || b == "fbp", ErrorCode::kConfig, "unknown baseline '" + b + "'");
          volumes.emplace_back(b, backproject(data, grid, b == "fbp", c.get_int("threads")));
        }
      }
      std::vector<EvalRow> rows;
      auto score = [&](const std::string& name, double fraction, const DepthMap& ref,
                       const DepthMap& cand) {
        EvalRow r{name, fraction, {}};
        try {
          r.error = depth_mae(ref, cand);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kDegenerate) throw;
          r.error.mae = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(r);
      };
      for (double f : fractions) {
        const DepthMap ref = load_depth_like(ev_reference, f);
        for (const auto& [name, vol] : volumes) score(name, f, ref, albedo_depth(vol, f));
        for (const auto& [name, d] : depths) score(name, f, ref, d);
      }
      const std::string table = format_eval_table(rows);
      std::cout << table;
      if (!ev_table.empty()) write_file(ev_table, table);
    } else if (*fig) {
      const VoxelVolume vol = read_volume(fig_volume);
      write_file(fig_out, encode_pgm(max_projection(vol, parse_projection_axis(fig_axis))));
    } else if (*info) {
      const std::string bytes = read_file(info_path);
      const std::string magic = bytes.substr(0, 4);
      std::ostringstream out;
      out.precision(10);
      if (magic == "NTFT") {
        const TransientImage t = decode_transient(bytes);
        out << "transient\nentries " << t.scan.size() << "\nbins " << t.n_bins
            << "\nbin_width_ps " << t.bin_width * 1e12 << "\nc " << t.constants.c
            << "\nconfocal " << (t.scan.confocal() ? "true" : "false") << "\nmax "
            << t.data.maxCoeff() << "\n";
      } else if (magic == "NTFV") {
        const VoxelVolume v = decode_volume(bytes);
        const auto& g = v.grid;
        out << "volume\ndims " << g.nx << "," << g.ny << "," << g.nz << "\npitch " << g.pitch
            << "\norigin " << g.origin.x() << "," << g.origin.y() << "," << g.origin.z()
            << "\nmax_sigma " << *std::max_element(v.sigma.begin(), v.sigma.end()) << "\n";
      } else if (magic == "NTFP") {
        const NetParams p = decode_checkpoint(bytes);
        const NetConfig& n = p.config();
        out << "checkpoint\nparameters " << p.size() << "\nwidth " << n.width << "\ndepth "
            << n.depth << "\nskip_after " << n.skip_after << "\nhead_width " << n.head_width
            << "\nn_freq_pos " << n.encoding.n_freq_pos << "\nn_freq_dir "
            << n.encoding.n_freq_dir << "\n";
      } else if (magic == "NTFD") {
        const DepthMap d = decode_depth(bytes);
        out << "depth\ndims " << d.nx << "," << d.ny << "\ncoverage " << d.coverage() << "\n";
      } else {
        fail(ErrorCode::kCorruptContainer, info_path + ": unknown container");
      }
      std::cout << out.str();
    }
  } catch (const Error& e) {
    std::cerr << "ntf: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ntf: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
