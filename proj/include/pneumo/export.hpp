#pragma once

// Field snapshots and their file formats.
//
// VTK: legacy ASCII, version 3.0, DATASET STRUCTURED_POINTS.
//   DIMENSIONS (nelx+1) (nely+1) 1, ORIGIN x0 y0 0, SPACING dx dy 1.
//   CELL_DATA nelx*nely: one SCALARS block per column and realization, named
//   blueprint_rho<k> / eroded_rho<k> (k from 1).
//   POINT_DATA (nelx+1)*(nely+1): SCALARS pressure, VECTORS displacement
//   (z = 0). Values are in VTK order, x fastest, printed with 17 significant
//   digits.
// CSV: header "index,x,y,rho1,...,rhom", one row per element in mesh order
//   (column-major, y fastest); x, y are element centroids. 17 significant digits.
// PGM: plain P2, width nelx, height nely, maxval 255, first row is the top of
//   the domain. Pixel = round(255 * rho) clamped to [0, 255]; 255 is solid.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pneumo/errors.hpp"
#include "pneumo/fields.hpp"
#include "pneumo/mesh.hpp"

namespace pneumo {

struct FieldSnapshot {
  int nelx = 0;
  int nely = 0;
  double dx = 0.0;
  double dy = 0.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  Eigen::MatrixXd blueprint;     // nel x m, mesh element order
  Eigen::MatrixXd eroded;        // nel x m
  Eigen::VectorXd pressure;      // per node, blueprint realization
  Eigen::VectorXd displacement;  // 2 per node, blueprint realization

  int num_elements() const { return nelx * nely; }
  int num_nodes() const { return (nelx + 1) * (nely + 1); }
  int num_columns() const { return static_cast<int>(blueprint.cols()); }

  void validate() const {
    if (nelx <= 0 || nely <= 0 || !(dx > 0.0) || !(dy > 0.0)) throw ContractViolation("snapshot: bad grid");
    if (blueprint.rows() != num_elements() || blueprint.cols() < 1) throw ContractViolation("snapshot: blueprint size mismatch");
    if (eroded.rows() != blueprint.rows() || eroded.cols() != blueprint.cols())
      throw ContractViolation("snapshot: eroded size mismatch");
    if (pressure.size() != num_nodes()) throw ContractViolation("snapshot: pressure size mismatch");
    if (displacement.size() != 2 * num_nodes()) throw ContractViolation("snapshot: displacement size mismatch");
  }
};

inline FieldSnapshot make_snapshot(const StructuredMesh& mesh, const DesignField& blueprint, const DesignField& eroded,
                                   const Eigen::VectorXd& pressure, const Eigen::VectorXd& displacement) {
  FieldSnapshot s;
  s.nelx = mesh.nelx();
  s.nely = mesh.nely();
  s.dx = mesh.dx();
  s.dy = mesh.dy();
  s.blueprint = blueprint;
  s.eroded = eroded;
  s.pressure = pressure;
  s.displacement = displacement;
  s.validate();
  return s;
}

// Reflects a half or quarter snapshot into the full domain. Mirroring about
// the bottom edge places the copy below y = origin_y and flips uy; mirroring
// about the right edge places it right of the domain and flips ux.
inline FieldSnapshot mirror_full_design(const FieldSnapshot& half, const SymmetrySpec& sym) {
  half.validate();
  if (sym.copies() == 1) throw ConfigError("mirror: benchmark has no mirror line");
  FieldSnapshot full = half;
  const int rx = sym.about_right ? 2 : 1;
  const int ry = sym.about_bottom ? 2 : 1;
  full.nelx = half.nelx * rx;
  full.nely = half.nely * ry;
  if (sym.about_bottom) full.origin_y = half.origin_y - half.nely * half.dy;
  const int m = half.num_columns();
  full.blueprint.resize(full.num_elements(), m);
  full.eroded.resize(full.num_elements(), m);
  full.pressure.resize(full.num_nodes());
  full.displacement.resize(2 * full.num_nodes());

  // Full-grid index -> source index in the half grid, and whether it was reflected.
  auto src_col = [&](int i, int n) { return sym.about_right && i >= n ? 2 * n - 1 - i : i; };
  auto src_row = [&](int j, int n) { return sym.about_bottom ? (j < n ? n - 1 - j : j - n) : j; };
  auto src_node_col = [&](int i, int n) { return sym.about_right && i > n ? 2 * n - i : i; };
  auto src_node_row = [&](int j, int n) { return sym.about_bottom ? std::abs(j - n) : j; };

  for (int i = 0; i < full.nelx; ++i)
    for (int j = 0; j < full.nely; ++j) {
      const int e = i * full.nely + j;
      const int s = src_col(i, half.nelx) * half.nely + src_row(j, half.nely);
      full.blueprint.row(e) = half.blueprint.row(s);
      full.eroded.row(e) = half.eroded.row(s);
    }
  for (int i = 0; i <= full.nelx; ++i)
    for (int j = 0; j <= full.nely; ++j) {
      const int n = i * (full.nely + 1) + j;
      const int s = src_node_col(i, half.nelx) * (half.nely + 1) + src_node_row(j, half.nely);
      full.pressure[n] = half.pressure[s];
      const bool flip_x = sym.about_right && i > half.nelx;
      const bool flip_y = sym.about_bottom && j < half.nely;
      full.displacement[2 * n] = (flip_x ? -1.0 : 1.0) * half.displacement[2 * s];
      full.displacement[2 * n + 1] = (flip_y ? -1.0 : 1.0) * half.displacement[2 * s + 1];
    }
  return full;
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  return in;
}

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline void write_vtk(const FieldSnapshot& s, const std::filesystem::path& path) {
  s.validate();
  auto out = detail::open_for_write(path);
  out << "# vtk DataFile Version 3.0\n"
      << "pneumo field snapshot\n"
      << "ASCII\n"
      << "DATASET STRUCTURED_POINTS\n"
      << "DIMENSIONS " << s.nelx + 1 << ' ' << s.nely + 1 << " 1\n"
      << "ORIGIN " << detail::fmt17(s.origin_x) << ' ' << detail::fmt17(s.origin_y) << " 0\n"
      << "SPACING " << detail::fmt17(s.dx) << ' ' << detail::fmt17(s.dy) << " 1\n";
  out << "CELL_DATA " << s.num_elements() << '\n';
  for (const auto& [name, field] : {std::pair<const char*, const Eigen::MatrixXd*>{"blueprint", &s.blueprint},
                                    std::pair<const char*, const Eigen::MatrixXd*>{"eroded", &s.eroded}})
    for (int k = 0; k < s.num_columns(); ++k) {
      out << "SCALARS " << name << "_rho" << k + 1 << " double 1\nLOOKUP_TABLE default\n";
      for (int j = 0; j < s.nely; ++j)
        for (int i = 0; i < s.nelx; ++i) out << detail::fmt17((*field)(i * s.nely + j, k)) << '\n';
    }
  out << "POINT_DATA " << s.num_nodes() << '\n' << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int j = 0; j <= s.nely; ++j)
    for (int i = 0; i <= s.nelx; ++i) out << detail::fmt17(s.pressure[i * (s.nely + 1) + j]) << '\n';
  out << "VECTORS displacement double\n";
  for (int j = 0; j <= s.nely; ++j)
    for (int i = 0; i <= s.nelx; ++i) {
      const int n = i * (s.nely + 1) + j;
      out << detail::fmt17(s.displacement[2 * n]) << ' ' << detail::fmt17(s.displacement[2 * n + 1]) << " 0\n";
    }
  detail::finish(out, path);
}

// Reads back a file written by write_vtk.
inline FieldSnapshot read_vtk(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  auto expect = [&](const std::string& want) {
    std::string got;
    if (!(in >> got) || got != want) throw IoError("vtk: expected '" + want + "', got '" + got + "'");
  };
  std::string line;
  std::getline(in, line);
  if (line != "# vtk DataFile Version 3.0") throw IoError("vtk: bad header");
  std::getline(in, line);
  expect("ASCII");
  expect("DATASET");
  expect("STRUCTURED_POINTS");
  FieldSnapshot s;
  int nz = 0;
  double z0 = 0.0, dz = 0.0;
  expect("DIMENSIONS");
  in >> s.nelx >> s.nely >> nz;
  s.nelx -= 1;
  s.nely -= 1;
  expect("ORIGIN");
  in >> s.origin_x >> s.origin_y >> z0;
  expect("SPACING");
  in >> s.dx >> s.dy >> dz;
  if (!in || nz != 1 || s.nelx < 1 || s.nely < 1) throw IoError("vtk: bad geometry block");
  expect("CELL_DATA");
  int ncell = 0;
  in >> ncell;
  if (ncell != s.num_elements()) throw IoError("vtk: CELL_DATA count mismatch");

  std::vector<Eigen::VectorXd> bp, er;
  std::string word;
  while (in >> word && word == "SCALARS") {
    std::string name, type;
    int comps = 0;
    in >> name >> type >> comps;
    expect("LOOKUP_TABLE");
    expect("default");
    Eigen::VectorXd col(ncell);
    for (int j = 0; j < s.nely; ++j)
      for (int i = 0; i < s.nelx; ++i) in >> col[i * s.nely + j];
    if (!in) throw IoError("vtk: truncated cell block '" + name + "'");
    (name.rfind("blueprint_", 0) == 0 ? bp : er).push_back(col);
  }
  if (word != "POINT_DATA" || bp.empty() || bp.size() != er.size()) throw IoError("vtk: bad cell data section");
  s.blueprint.resize(ncell, static_cast<Eigen::Index>(bp.size()));
  s.eroded.resize(ncell, static_cast<Eigen::Index>(er.size()));
  for (std::size_t k = 0; k < bp.size(); ++k) {
    s.blueprint.col(static_cast<Eigen::Index>(k)) = bp[k];
    s.eroded.col(static_cast<Eigen::Index>(k)) = er[k];
  }
  int npts = 0;
  in >> npts;
  if (npts != s.num_nodes()) throw IoError("vtk: POINT_DATA count mismatch");
  expect("SCALARS");
  expect("pressure");
  expect("double");
  expect("1");
  expect("LOOKUP_TABLE");
  expect("default");
  s.pressure.resize(npts);
  for (int j = 0; j <= s.nely; ++j)
    for (int i = 0; i <= s.nelx; ++i) in >> s.pressure[i * (s.nely + 1) + j];
  expect("VECTORS");
  expect("displacement");
  expect("double");
  s.displacement.resize(2 * npts);
  for (int j = 0; j <= s.nely; ++j)
    for (int i = 0; i <= s.nelx; ++i) {
      const int n = i * (s.nely + 1) + j;
      double z = 0.0;
      in >> s.displacement[2 * n] >> s.displacement[2 * n + 1] >> z;
    }
  if (!in) throw IoError("vtk: truncated point data");
  return s;
}

inline void write_csv(const FieldSnapshot& s, const Eigen::MatrixXd& field, const std::filesystem::path& path) {
  s.validate();
  if (field.rows() != s.num_elements()) throw ContractViolation("csv: field size mismatch");
  auto out = detail::open_for_write(path);
  out << "index,x,y";
  for (Eigen::Index k = 0; k < field.cols(); ++k) out << ",rho" << k + 1;
  out << '\n';
  for (int e = 0; e < s.num_elements(); ++e) {
    const int i = e / s.nely, j = e % s.nely;
    out << e << ',' << detail::fmt17(s.origin_x + (i + 0.5) * s.dx) << ',' << detail::fmt17(s.origin_y + (j + 0.5) * s.dy);
    for (Eigen::Index k = 0; k < field.cols(); ++k) out << ',' << detail::fmt17(field(e, k));
    out << '\n';
  }
  detail::finish(out, path);
}

struct CsvField {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::MatrixXd rho;
};

inline CsvField read_csv(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,x,y", 0) != 0) throw IoError("csv: bad header in '" + path.string() + "'");
  const auto cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 2;
  if (cols < 1) throw IoError("csv: no density columns");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != cols + 3) throw IoError("csv: ragged row " + std::to_string(rows.size()));
    if (static_cast<std::size_t>(vals[0]) != rows.size()) throw IoError("csv: index out of order");
    rows.push_back(std::move(vals));
  }
  CsvField f;
  const auto n = static_cast<Eigen::Index>(rows.size());
  f.x.resize(n);
  f.y.resize(n);
  f.rho.resize(n, cols);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& v = rows[static_cast<std::size_t>(r)];
    f.x[r] = v[1];
    f.y[r] = v[2];
    for (int k = 0; k < cols; ++k) f.rho(r, k) = v[static_cast<std::size_t>(k) + 3];
  }
  return f;
}

inline int to_gray(double rho) { return static_cast<int>(std::lround(255.0 * std::clamp(rho, 0.0, 1.0))); }

inline void write_pgm(int nelx, int nely, const Eigen::VectorXd& column, const std::filesystem::path& path) {
  if (column.size() != static_cast<Eigen::Index>(nelx) * nely) throw ContractViolation("pgm: field size mismatch");
  auto out = detail::open_for_write(path);
  out << "P2\n" << nelx << ' ' << nely << "\n255\n";
  for (int j = nely - 1; j >= 0; --j)
    for (int i = 0; i < nelx; ++i) out << to_gray(column[i * nely + j]) << (i + 1 == nelx ? '\n' : ' ');
  detail::finish(out, path);
}

// Pixels back in mesh element order.
struct PgmImage {
  int width = 0;
  int height = 0;
  std::vector<int> pixels;
};

inline PgmImage read_pgm(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::string magic;
  int maxval = 0;
  PgmImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (!in || magic != "P2" || maxval != 255 || img.width < 1 || img.height < 1) throw IoError("pgm: bad header");
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
  for (int j = img.height - 1; j >= 0; --j)
    for (int i = 0; i < img.width; ++i) in >> img.pixels[static_cast<std::size_t>(i * img.height + j)];
  if (!in) throw IoError("pgm: truncated pixel data");
  return img;
}

enum class ExportFormat { Vtk, Csv, Pgm };

inline ExportFormat parse_export_format(const std::string& name) {
  if (name == "vtk" || name == "vtk-legacy-ascii") return ExportFormat::Vtk;
  if (name == "csv") return ExportFormat::Csv;
  if (name == "pgm") return ExportFormat::Pgm;
  throw ConfigError("export: unknown format '" + name + "' (vtk, csv, pgm)");
}

// Writes <stem>.vtk, <stem>_blueprint.csv / <stem>_eroded.csv and one
// <stem>_<realization>_rho<k>.pgm per column. Returns the paths written.
inline std::vector<std::filesystem::path> export_fields(const FieldSnapshot& s, const std::vector<ExportFormat>& formats,
                                                        const std::filesystem::path& dir, const std::string& stem) {
  s.validate();
  std::vector<std::filesystem::path> written;
  for (ExportFormat f : formats) {
    if (f == ExportFormat::Vtk) {
      written.push_back(dir / (stem + ".vtk"));
      write_vtk(s, written.back());
    } else if (f == ExportFormat::Csv) {
      written.push_back(dir / (stem + "_blueprint.csv"));
      write_csv(s, s.blueprint, written.back());
      written.push_back(dir / (stem + "_eroded.csv"));
      write_csv(s, s.eroded, written.back());
    } else {
      for (int k = 0; k < s.num_columns(); ++k) {
        written.push_back(dir / (stem + "_blueprint_rho" + std::to_string(k + 1) + ".pgm"));
        write_pgm(s.nelx, s.nely, s.blueprint.col(k), written.back());
        written.push_back(dir / (stem + "_eroded_rho" + std::to_string(k + 1) + ".pgm"));
        write_pgm(s.nelx, s.nely, s.eroded.col(k), written.back());
      }
    }
  }
  return written;
}

}  // namespace pneumo
