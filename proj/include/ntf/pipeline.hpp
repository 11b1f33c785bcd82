#pragma once

// Builders turning a RunConfig into the pieces of a run, shared by the CLI,
// the Python module and the acceptance checks.

#include <string>
#include <vector>

#include "ntf/extract.hpp"
#include "ntf/io.hpp"
#include "ntf/neural_field.hpp"
#include "ntf/scene.hpp"

namespace ntf {

GridSpec grid_from_config(const RunConfig& config);

// Scene kinds: plane, sphere, two-planes-occluded, letter (primitives at
// scene_center), desk (plane at scene_center plus a sphere at
// sphere_center), voxel (one voxel nearest scene_center).
GroundTruthScene scene_from_config(const RunConfig& config);

// confocal: n x n grid; nonconfocal: the same detection grid with the laser
// displaced by (laser_offset_x, laser_offset_y).
ScanPattern scan_from_config(const RunConfig& config);

SimulationOptions simulation_options(const RunConfig& config);

// Simulates the configured scene; Poisson noise when noise_counts > 0,
// seeded by the config seed.
TransientImage simulate_from_config(const RunConfig& config);

DirectionPolicy direction_policy_from_config(const RunConfig& config);

// Depth along +z of the albedo channel, thresholded at `fraction` of its max.
DepthMap albedo_depth(const VoxelVolume& volume, double fraction);

struct EvalRow {
  std::string method;
  double fraction = 0.0;
  DepthError error;
};

// Fixed-width text table, one row per method and threshold.
std::string format_eval_table(const std::vector<EvalRow>& rows);

}  // namespace ntf
