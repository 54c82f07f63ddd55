#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "pneumo/config.hpp"
#include "pneumo/export.hpp"
#include "pneumo/history.hpp"

using namespace pneumo;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pneumo_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FieldSnapshot random_snapshot(int nelx, int nely, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const StructuredMesh mesh(nelx, nely, 0.001 * nelx, 0.001 * nely, 0.01);
  DesignField bp(mesh.num_elements(), m), er(mesh.num_elements(), m);
  for (Eigen::Index i = 0; i < bp.size(); ++i) {
    bp.data()[i] = u(rng);
    er.data()[i] = u(rng) * bp.data()[i];
  }
  Eigen::VectorXd p(mesh.num_nodes()), d(mesh.num_displacement_dofs());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = 1e5 * u(rng);
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = 1e-3 * (u(rng) - 0.5);
  return make_snapshot(mesh, bp, er, p, d);
}

std::string message_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Presets, GripperTwoMaterialDefaults) {
  const JobConfig j = preset("gripper-2mat");
  EXPECT_EQ(j.run.benchmark, "gripper");
  EXPECT_EQ(j.run.materials.youngs, (std::vector<double>{1e7, 1e8}));
  EXPECT_EQ(j.run.volume_fractions, (std::vector<double>{0.2, 0.1}));
  EXPECT_DOUBLE_EQ(j.run.delta_eta, 0.05);
  EXPECT_EQ(j.run.max_iterations, 400);
  EXPECT_NO_THROW(j.run.validate());
}

TEST(Presets, ContractorAndThreeMaterial) {
  const JobConfig c = preset("contractor-2mat");
  EXPECT_EQ(c.run.benchmark, "contractor");
  EXPECT_DOUBLE_EQ(c.run.delta_eta, 0.15);
  EXPECT_EQ(c.run.volume_fractions, (std::vector<double>{0.1, 0.1}));
  const JobConfig g3 = preset("gripper-3mat");
  EXPECT_EQ(g3.run.materials.youngs, (std::vector<double>{1e7, 0.5e8, 1e8}));
  EXPECT_EQ(g3.run.volume_fractions, (std::vector<double>{0.1, 0.1, 0.05}));
  EXPECT_DOUBLE_EQ(g3.run.delta_eta, 0.01);
  for (const auto& name : preset_names()) EXPECT_NO_THROW(preset(name).run.validate()) << name;
  EXPECT_EQ(preset("contractor").preset, "contractor-2mat");
  EXPECT_THROW(preset("inverter"), ConfigError);
}

TEST(Presets, ComparisonCases) {
  EXPECT_EQ(preset("case1").run.materials.youngs, std::vector<double>{1e7});
  EXPECT_EQ(preset("case2").run.materials.youngs, std::vector<double>{1e8});
  EXPECT_EQ(preset("case3").run.volume_fractions, (std::vector<double>{0.15, 0.15}));
  EXPECT_EQ(preset("case1").run.benchmark, "comparison-case");
}

TEST(ConfigParse, OverridesOnTopOfPreset) {
  const JobConfig j = parse_config_text(R"({"schema_version": 1, "preset": "contractor-2mat", "nelx": 40, "nely": 40,
      "iterations": 12, "beta": {"period": 5}, "mma": {"move": 0.2}, "output_dir": "runs/a"})");
  EXPECT_EQ(j.run.benchmark, "contractor");
  EXPECT_EQ(*j.run.nelx, 40);
  EXPECT_EQ(j.run.max_iterations, 12);
  EXPECT_EQ(j.run.beta.period, 5);
  EXPECT_DOUBLE_EQ(j.run.move_limit, 0.2);
  EXPECT_DOUBLE_EQ(j.run.delta_eta, 0.15);
  EXPECT_EQ(j.output_dir, "runs/a");
}

TEST(ConfigParse, UnknownKeysAreNamed) {
  EXPECT_NE(message_of(R"({"nelx": 10, "nelz": 3})").find("'nelz'"), std::string::npos);
  EXPECT_NE(message_of(R"({"flow": {"contrst": 1e-7}})").find("'flow.contrst'"), std::string::npos);
}

TEST(ConfigParse, InvalidValuesRejected) {
  EXPECT_NE(message_of(R"({"volume_fractions": [0.7, 0.4]})").find("sum"), std::string::npos);
  EXPECT_NE(message_of(R"({"schema_version": 2})").find("schema_version"), std::string::npos);
  EXPECT_NE(message_of(R"({"nelx": "ten"})").find("'nelx'"), std::string::npos);
  EXPECT_NE(message_of(R"({"nelx": 10,)").find("malformed"), std::string::npos);
  EXPECT_NE(message_of(R"([1, 2])").find("object"), std::string::npos);
  EXPECT_THROW(parse_config("/nonexistent/pneumo.json"), ConfigError);
}

TEST(ConfigParse, ResolvedJsonRoundTrips) {
  JobConfig j = preset("gripper-3mat");
  j.run.nelx = 30;
  j.run.seed = 7;
  const JobConfig back = config_from_json(to_json(j));
  EXPECT_EQ(to_json(back), to_json(j));
}

TEST(Csv, RoundTripsToTwelveDigits) {
  const FieldSnapshot s = random_snapshot(7, 5, 2, 1);
  const fs::path dir = scratch_dir("csv");
  write_csv(s, s.blueprint, dir / "bp.csv");
  const CsvField f = read_csv(dir / "bp.csv");
  ASSERT_EQ(f.rho.rows(), 35);
  ASSERT_EQ(f.rho.cols(), 2);
  EXPECT_LE((f.rho - s.blueprint).cwiseAbs().maxCoeff(), 1e-12);
  // Centroid of element (i, j) = (3, 2).
  const int e = 3 * 5 + 2;
  EXPECT_NEAR(f.x[e], 3.5 * s.dx, 1e-15);
  EXPECT_NEAR(f.y[e], 2.5 * s.dy, 1e-15);
}

TEST(Csv, CheckerboardDensities) {
  FieldSnapshot s = random_snapshot(4, 4, 1, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s.blueprint(i * 4 + j, 0) = (i + j) % 2;
  const fs::path dir = scratch_dir("checker");
  write_csv(s, s.blueprint, dir / "c.csv");
  const CsvField f = read_csv(dir / "c.csv");
  for (int e = 0; e < 16; ++e) {
    const int i = static_cast<int>(f.x[e] / s.dx), j = static_cast<int>(f.y[e] / s.dy);
    EXPECT_EQ(f.rho(e, 0), (i + j) % 2);
  }
  EXPECT_EQ(slurp(dir / "c.csv").substr(0, 15), "index,x,y,rho1\n");
}

TEST(Pgm, AllSolidIsWhiteAndRowsAreTopFirst) {
  const fs::path dir = scratch_dir("pgm");
  write_pgm(3, 2, Eigen::VectorXd::Ones(6), dir / "solid.pgm");
  const PgmImage img = read_pgm(dir / "solid.pgm");
  EXPECT_EQ(img.width, 3);
  EXPECT_EQ(img.height, 2);
  for (int p : img.pixels) EXPECT_EQ(p, 255);

  Eigen::VectorXd col = Eigen::VectorXd::Zero(6);
  col[0 * 2 + 1] = 1.0;  // element (0, 1): top-left in the image
  write_pgm(3, 2, col, dir / "corner.pgm");
  EXPECT_EQ(slurp(dir / "corner.pgm"), "P2\n3 2\n255\n255 0 0\n0 0 0\n");
  EXPECT_EQ(to_gray(0.5), 128);
  EXPECT_EQ(to_gray(-0.2), 0);
}

TEST(Vtk, HeaderGrammarAndRoundTrip) {
  const FieldSnapshot s = random_snapshot(5, 3, 2, 3);
  const fs::path dir = scratch_dir("vtk");
  write_vtk(s, dir / "s.vtk");
  std::istringstream in(slurp(dir / "s.vtk"));
  std::string line;
  std::vector<std::string> head;
  for (int k = 0; k < 8 && std::getline(in, line); ++k) head.push_back(line);
  EXPECT_EQ(head[0], "# vtk DataFile Version 3.0");
  EXPECT_EQ(head[2], "ASCII");
  EXPECT_EQ(head[3], "DATASET STRUCTURED_POINTS");
  EXPECT_EQ(head[4], "DIMENSIONS 6 4 1");
  EXPECT_EQ(head[7], "CELL_DATA 15");
  const std::string text = slurp(dir / "s.vtk");
  for (const char* key : {"SCALARS blueprint_rho1 double 1", "SCALARS eroded_rho2 double 1", "POINT_DATA 24",
                          "SCALARS pressure double 1", "VECTORS displacement double"})
    EXPECT_NE(text.find(key), std::string::npos) << key;

  const FieldSnapshot r = read_vtk(dir / "s.vtk");
  EXPECT_EQ(r.nelx, 5);
  EXPECT_EQ(r.nely, 3);
  EXPECT_EQ(r.blueprint, s.blueprint);
  EXPECT_EQ(r.eroded, s.eroded);
  EXPECT_EQ(r.pressure, s.pressure);
  EXPECT_EQ(r.displacement, s.displacement);
}

TEST(Vtk, TruncatedFileIsIoError) {
  const FieldSnapshot s = random_snapshot(3, 2, 1, 4);
  const fs::path dir = scratch_dir("vtk_trunc");
  write_vtk(s, dir / "s.vtk");
  const std::string text = slurp(dir / "s.vtk");
  std::ofstream(dir / "cut.vtk") << text.substr(0, text.size() / 2);
  EXPECT_THROW(read_vtk(dir / "cut.vtk"), IoError);
  EXPECT_THROW(read_vtk(dir / "missing.vtk"), IoError);
}

TEST(Mirror, GripperHalfBecomesSquareFullDomain) {
  const FieldSnapshot half = random_snapshot(200, 100, 2, 5);
  const FieldSnapshot full = mirror_full_design(half, SymmetrySpec{true, false});
  EXPECT_EQ(full.nelx, 200);
  EXPECT_EQ(full.nely, 200);
  EXPECT_DOUBLE_EQ(full.origin_y, -100 * half.dy);
  for (int i = 0; i < 200; i += 17)
    for (int j = 0; j < 100; j += 7) {
      const int src = i * 100 + j;
      EXPECT_EQ(full.blueprint.row(i * 200 + 100 + j), half.blueprint.row(src));
      EXPECT_EQ(full.blueprint.row(i * 200 + 99 - j), half.blueprint.row(src));
    }
  for (int i = 0; i <= 200; i += 13)
    for (int j = 0; j <= 100; j += 9) {
      const int src = i * 101 + j;
      const int up = i * 201 + 100 + j, down = i * 201 + 100 - j;
      EXPECT_EQ(full.pressure[up], half.pressure[src]);
      EXPECT_EQ(full.pressure[down], half.pressure[src]);
      EXPECT_EQ(full.displacement[2 * down], half.displacement[2 * src]);
      if (j > 0) EXPECT_EQ(full.displacement[2 * down + 1], -half.displacement[2 * src + 1]);
    }
}

TEST(Mirror, ContractorQuarterBecomesFullSquare) {
  const FieldSnapshot q = random_snapshot(100, 100, 2, 6);
  const FieldSnapshot full = mirror_full_design(q, SymmetrySpec{true, true});
  EXPECT_EQ(full.nelx, 200);
  EXPECT_EQ(full.nely, 200);
  for (int i = 0; i < 100; i += 11)
    for (int j = 0; j < 100; j += 13) {
      const auto row = q.blueprint.row(i * 100 + j);
      EXPECT_EQ(full.blueprint.row(i * 200 + 100 + j), row);
      EXPECT_EQ(full.blueprint.row((199 - i) * 200 + 100 + j), row);
      EXPECT_EQ(full.blueprint.row(i * 200 + 99 - j), row);
      EXPECT_EQ(full.blueprint.row((199 - i) * 200 + 99 - j), row);
    }
  // Right-hand copy flips ux.
  const int src = 40 * 101 + 60;
  const int dst = 160 * 201 + 100 + 60;
  EXPECT_EQ(full.displacement[2 * dst], -q.displacement[2 * src]);
  EXPECT_EQ(full.displacement[2 * dst + 1], q.displacement[2 * src + 1]);
}

TEST(Mirror, NoMirrorLineIsConfigError) {
  const FieldSnapshot s = random_snapshot(4, 2, 1, 7);
  EXPECT_THROW(mirror_full_design(s, SymmetrySpec{false, false}), ConfigError);
}

TEST(Export, WritesExpectedFileSet) {
  const FieldSnapshot s = random_snapshot(6, 3, 2, 8);
  const fs::path dir = scratch_dir("export");
  const auto files = export_fields(s, {ExportFormat::Vtk, ExportFormat::Csv, ExportFormat::Pgm}, dir, "design");
  EXPECT_EQ(files.size(), 1u + 2u + 4u);
  for (const char* name : {"design.vtk", "design_blueprint.csv", "design_eroded.csv", "design_blueprint_rho1.pgm",
                           "design_eroded_rho2.pgm"})
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  EXPECT_EQ(parse_export_format("vtk-legacy-ascii"), ExportFormat::Vtk);
  EXPECT_THROW(parse_export_format("png"), ConfigError);
  EXPECT_THROW(export_fields(s, {ExportFormat::Csv}, dir / "missing" / "deeper", "x"), IoError);
}

TEST(History, ColumnsAndRows) {
  const fs::path dir = scratch_dir("history");
  {
    HistoryWriter w(dir, 2);
    IterationRecord r;
    r.iteration = 1;
    r.objective = -1e-3;
    r.output_eroded = -1e-3;
    r.output_blueprint = -2e-3;
    r.strain_energy = 3.25;
    r.se_star = 3.0;
    r.se_ratio = 3.25 / 3.0;
    r.volume = {0.5, 1.0};
    r.beta = 1.0;
    r.wall_time = 0.123456789;
    w.append(r);
    r.volume = {1.0};
    EXPECT_THROW(w.append(r), ContractViolation);
  }
  std::istringstream in(slurp(dir / "history.csv"));
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_FALSE(std::getline(in, extra));
  EXPECT_EQ(header,
            "iteration,objective,output_eroded,output_blueprint,strain_energy,se_star,se_ratio,volume_ratio1,"
            "volume_ratio2,beta,max_change");
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
  EXPECT_EQ(row.substr(0, 8), "1,-0.001");
  EXPECT_EQ(header.find("wall"), std::string::npos);
  EXPECT_EQ(slurp(dir / "timing.csv"), "iteration,wall_time\n1,0.123457\n");
}

TEST(History, UnwritableDirectoryIsIoError) {
  EXPECT_THROW(HistoryWriter(fs::path("/nonexistent/pneumo/dir"), 2), IoError);
}
