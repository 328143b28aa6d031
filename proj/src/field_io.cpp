#include "epdiff/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "epdiff/errors.hpp"

namespace epdiff {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string json_number(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

void write_field(std::ostream& out, const SpectralField& f) {
  const TorusGrid& g = f.grid();
  out << "EPDIFF-FIELD v1 d=" << g.dim() << " N=" << g.n() << " c=" << f.components() << '\n';
  for (int c = 0; c < f.components(); ++c) {
    for (std::size_t i : g.band_indices()) {
      const Complex z = f.at(c, i);
      if (z == Complex{}) continue;
      const Frequency k = g.frequency(i);
      out << c << ' ' << k[0];
      if (g.dim() == 2) out << ' ' << k[1];
      out << ' ' << format_double(z.real()) << ' ' << format_double(z.imag()) << '\n';
    }
  }
}

SpectralField read_field(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty field file");
  int d = 0, n = 0, c = 0;
  if (std::sscanf(header.c_str(), "EPDIFF-FIELD v1 d=%d N=%d c=%d", &d, &n, &c) != 3) {
    throw ParseError("bad field header: " + header);
  }
  SpectralField f(TorusGrid(d, n), c);
  const TorusGrid& g = f.grid();
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    int comp = 0;
    Frequency k{0, 0};
    double re = 0.0, im = 0.0;
    ls >> comp >> k[0];
    if (d == 2) ls >> k[1];
    ls >> re >> im;
    if (!ls) throw ParseError("malformed field line " + std::to_string(line_no));
    if (comp < 0 || comp >= c) throw ParseError("component out of range on line " + std::to_string(line_no));
    if (!g.in_band(k)) throw ParseError("frequency outside band on line " + std::to_string(line_no));
    f.at(comp, g.index_of(k)) = Complex(re, im);
  }
  const double defect = f.reality_defect();
  if (defect > 1e-12 * (1.0 + f.max_abs_coefficient())) {
    throw RealityViolation("field file violates conjugate symmetry (defect " +
                           format_double(defect) + ")");
  }
  return f;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw ValidationError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_field(const std::filesystem::path& path, const SpectralField& f) {
  std::ostringstream out;
  write_field(out, f);
  write_file_atomically(path, out.str());
}

SpectralField load_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open field file " + path.string());
  return read_field(in);
}

}  // namespace epdiff
