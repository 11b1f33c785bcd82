// Python module _ntf: thin wrappers over the C++ library, numpy in and out.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ntf/error.hpp"
#include "ntf/extract.hpp"
#include "ntf/io.hpp"
#include "ntf/neural_field.hpp"
#include "ntf/pipeline.hpp"
#include "ntf/render.hpp"
#include "ntf/training.hpp"

namespace py = pybind11;
using namespace ntf;

namespace {

// Voxel arrays are exposed as (nz, ny, nx), matching the x-fastest layout.
py::array_t<double> grid_array(const GridSpec& g, const std::vector<double>& v) {
  py::array_t<double> out({g.nz, g.ny, g.nx});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::bytes as_bytes(const std::string& s) { return py::bytes(s); }

}  // namespace

PYBIND11_MODULE(_ntf, m) {
  m.doc() = "Neural transient fields for non-line-of-sight imaging";

  static py::exception<Error> error_type(m, "NtfError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      std::string code;
      switch (e.code()) {
        case ErrorCode::kInvalidArgument: code = "invalid_argument"; break;
        case ErrorCode::kDegenerate: code = "degenerate"; break;
        case ErrorCode::kConfig: code = "config"; break;
        case ErrorCode::kIo: code = "io"; break;
        case ErrorCode::kCorruptContainer: code = "corrupt_container"; break;
        case ErrorCode::kShapeMismatch: code = "shape_mismatch"; break;
        case ErrorCode::kNonFinite: code = "non_finite"; break;
      }
      py::set_error(error_type, (code + ": " + e.what()).c_str());
    }
  });

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("parse", &RunConfig::parse)
      .def_static("load", &RunConfig::load)
      .def("set", &RunConfig::set)
      .def("get", &RunConfig::get)
      .def("to_text", &RunConfig::to_text)
      .def("__repr__", [](const RunConfig& c) { return "RunConfig(\n" + c.to_text() + ")"; });

  py::class_<GridSpec>(m, "GridSpec")
      .def_readonly("nx", &GridSpec::nx)
      .def_readonly("ny", &GridSpec::ny)
      .def_readonly("nz", &GridSpec::nz)
      .def_readonly("pitch", &GridSpec::pitch)
      .def_property_readonly("origin", [](const GridSpec& g) { return Eigen::Vector3d(g.origin); });

  py::class_<TransientImage>(m, "Transient")
      .def_readonly("n_bins", &TransientImage::n_bins)
      .def_readonly("bin_width", &TransientImage::bin_width)
      .def_property_readonly("c", [](const TransientImage& t) { return t.constants.c; })
      .def_property_readonly("confocal", [](const TransientImage& t) { return t.scan.confocal(); })
      .def_property_readonly("data", [](const TransientImage& t) { return Eigen::MatrixXd(t.data); })
      .def_property_readonly("spots",
                             [](const TransientImage& t) {
                               Eigen::MatrixXd s(t.scan.size(), 4);
                               for (std::size_t i = 0; i < t.scan.size(); ++i) {
                                 const ScanEntry& e = t.scan.entries[i];
                                 s.row(i) << e.illumination.x, e.illumination.y, e.detection.x,
                                     e.detection.y;
                               }
                               return s;
                             })
      .def("encode", [](const TransientImage& t) { return as_bytes(encode_transient(t)); })
      .def_static("decode", [](const py::bytes& b) { return decode_transient(b); })
      .def("write", [](const TransientImage& t, const std::string& path) { write_transient(path, t); })
      .def_static("read", &read_transient);

  py::class_<VoxelVolume>(m, "Volume")
      .def_readonly("grid", &VoxelVolume::grid)
      .def_property_readonly("sigma", [](const VoxelVolume& v) { return grid_array(v.grid, v.sigma); })
      .def_property_readonly("rho", [](const VoxelVolume& v) { return grid_array(v.grid, v.rho); })
      .def_property_readonly("albedo", [](const VoxelVolume& v) { return grid_array(v.grid, v.albedo()); })
      .def("encode", [](const VoxelVolume& v) { return as_bytes(encode_volume(v)); })
      .def_static("decode", [](const py::bytes& b) { return decode_volume(b); })
      .def("write", [](const VoxelVolume& v, const std::string& path) { write_volume(path, v); })
      .def_static("read", &read_volume);

  py::class_<NetParams>(m, "Params")
      .def_property_readonly("size", &NetParams::size)
      .def_property_readonly("values", [](const NetParams& p) { return Eigen::VectorXd(p.values()); })
      .def("encode", [](const NetParams& p) { return as_bytes(encode_checkpoint(p)); })
      .def_static("decode", [](const py::bytes& b) { return decode_checkpoint(b); })
      .def("write", [](const NetParams& p, const std::string& path) { write_checkpoint(path, p); })
      .def_static("read", &read_checkpoint);

  py::class_<DepthMap>(m, "DepthMap")
      .def_readonly("nx", &DepthMap::nx)
      .def_readonly("ny", &DepthMap::ny)
      .def_property_readonly("depth",
                             [](const DepthMap& d) {
                               py::array_t<double> out({d.ny, d.nx});
                               std::copy(d.depth.begin(), d.depth.end(), out.mutable_data());
                               return out;
                             })
      .def_property_readonly("coverage", &DepthMap::coverage);

  py::class_<DepthError>(m, "DepthError")
      .def_readonly("mae", &DepthError::mae)
      .def_readonly("overlap", &DepthError::overlap)
      .def_readonly("coverage", &DepthError::coverage);

  m.def("simulate", &simulate_from_config, py::arg("config"),
        "Simulate the configured scene and scan.");
  m.def(
      "scene_volume",
      [](const RunConfig& c) {
        const GroundTruthScene s = scene_from_config(c);
        return query_volume(SceneField(s), s.grid);
      },
      py::arg("config"), "Ground-truth scene sampled at its voxel centers.");
  m.def(
      "init_params",
      [](const RunConfig& c, std::uint64_t seed) { return init_params(c.net_config(), seed); },
      py::arg("config"), py::arg("seed"));
  m.def(
      "query",
      [](const NetParams& p, const Eigen::Matrix3Xd& positions, const Eigen::Matrix2Xd& directions) {
        require(positions.cols() == directions.cols(), ErrorCode::kShapeMismatch,
                "positions and directions differ in count");
        QueryBatch q;
        q.positions = positions;
        q.directions = directions;
        FieldValues out;
        NeuralField(p).evaluate(q, out);
        return std::make_pair(Eigen::VectorXd(out.sigma), Eigen::VectorXd(out.rho));
      },
      py::arg("params"), py::arg("positions"), py::arg("directions"),
      "Evaluate (sigma, rho) at 3xN positions and 2xN (theta, phi) directions.");
  m.def(
      "render",
      [](const NetParams& p, const TransientImage& like, const RunConfig& c) {
        const TrainConfig tc = c.train_config();
        RenderConfig rc = training_render_config(tc, like.constants);
        return render_transient(NeuralField(p), like.scan, like.n_bins, like.bin_width, rc);
      },
      py::arg("params"), py::arg("like"), py::arg("config"),
      "Render with the training quadrature on the scan and binning of `like`.");
  m.def(
      "train",
      [](const TransientImage& data, const RunConfig& c, const std::string& stages,
         const NetParams* start, const std::function<void(const std::string&)>& progress) {
        const TrainConfig tc = c.train_config();
        NeuralField field(start ? *start : init_params(c.net_config(), tc.seed));
        TrainReport report;
        {
          py::gil_scoped_release release;
          ProgressFn fn;
          if (progress) {
            fn = [&](const std::string& s) {
              py::gil_scoped_acquire acquire;
              progress(s);
            };
          }
          report = train_stages(field, data, tc, parse_stage_selection(stages), fn);
        }
        return std::make_pair(field.params(), format_report(report, c));
      },
      py::arg("data"), py::arg("config"), py::arg("stages") = "both", py::arg("params") = nullptr,
      py::arg("progress") = nullptr, "Train; returns (params, report text).");
  m.def(
      "extract_volume",
      [](const NetParams& p, const RunConfig& c) {
        return query_volume(NeuralField(p), grid_from_config(c), direction_policy_from_config(c),
                            c.get_int("threads"));
      },
      py::arg("params"), py::arg("config"));
  m.def(
      "mesh",
      [](const VoxelVolume& v, double fraction) {
        const std::vector<double> albedo = v.albedo();
        const TriMesh mesh = marching_cubes(v.grid, albedo, relative_threshold(albedo, fraction));
        Eigen::MatrixXd verts(mesh.vertices.size(), 3);
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, 3> tris(mesh.triangles.size(), 3);
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) verts.row(i) = mesh.vertices[i];
        for (std::size_t i = 0; i < mesh.triangles.size(); ++i)
          for (int k = 0; k < 3; ++k) tris(i, k) = mesh.triangles[i][k];
        return py::make_tuple(verts, tris, mesh.euler_characteristic());
      },
      py::arg("volume"), py::arg("fraction") = 0.3,
      "Albedo iso-surface: (vertices, triangles, Euler characteristic).");
  m.def("depth", &albedo_depth, py::arg("volume"), py::arg("fraction") = 0.3);
  m.def("depth_mae", &depth_mae, py::arg("a"), py::arg("b"));
  m.def("backproject", &backproject, py::arg("data"), py::arg("grid"), py::arg("filtered") = false,
        py::arg("threads") = 1);
  m.def(
      "projection",
      [](const VoxelVolume& v, const std::string& axis) {
        return as_bytes(encode_pgm(max_projection(v, parse_projection_axis(axis))));
      },
      py::arg("volume"), py::arg("axis") = "front", "Max-intensity projection as PGM bytes.");
}
