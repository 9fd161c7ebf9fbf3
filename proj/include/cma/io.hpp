#pragma once

// CSV grid dumps, the CMAG binary cache and JSON helpers.

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cma/error.hpp"
#include "cma/grid.hpp"
#include "cma/sections.hpp"

namespace cma::io {

using json = nlohmann::ordered_json;

inline constexpr char kMagic[4] = {'C', 'M', 'A', 'G'};
inline constexpr std::uint16_t kCacheVersion = 1;

static_assert(std::endian::native == std::endian::little, "cache format assumes little-endian hosts");

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  for (int p = 1; p < 17; ++p) {
    std::ostringstream t;
    t << std::setprecision(p) << v;
    if (std::stod(t.str()) == v) return t.str();
  }
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw FormatError("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// index,x1,y1[,x2,y2],value for every domain node.
inline std::string grid_csv(const GridFunction& u) {
  const GridDomain& d = *u.domain;
  static const char* names[] = {"x1", "y1", "x2", "y2"};
  std::ostringstream os;
  os << "index";
  for (int a = 0; a < d.dims(); ++a) os << ',' << names[a];
  os << ",value\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.in_domain(i)) continue;
    const RealPoint x = d.coords(i);
    os << i;
    for (int a = 0; a < d.dims(); ++a) os << ',' << fmt(x(a));
    os << ',' << fmt(u.values[i]) << '\n';
  }
  return os.str();
}

inline void write_grid_csv(const std::string& path, const GridFunction& u) { write_text(path, grid_csv(u)); }

struct CacheHeader {
  std::uint16_t version = kCacheVersion;
  std::uint16_t n = 1;
  std::uint32_t resolution = 0;
  double h = 0.0;
};

struct CacheContents {
  CacheHeader header;
  std::vector<double> values;  // row-major, NaN outside the domain
};

template <class T>
void put(std::string& buf, const T& v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  buf.append(b, sizeof(T));
}

template <class T>
T get(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw FormatError("cache truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

inline std::string encode_cache(const GridFunction& u) {
  const GridDomain& d = *u.domain;
  std::string buf(kMagic, 4);
  put<std::uint16_t>(buf, kCacheVersion);
  put<std::uint16_t>(buf, static_cast<std::uint16_t>(d.n()));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(d.resolution()));
  put<double>(buf, d.h());
  for (double v : u.values) put<double>(buf, v);
  return buf;
}

inline CacheContents decode_cache(const std::string& buf) {
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError("not a CMAG cache");
  std::size_t pos = 4;
  CacheContents c;
  c.header.version = get<std::uint16_t>(buf, pos);
  if (c.header.version != kCacheVersion) throw FormatError("unsupported cache version");
  c.header.n = get<std::uint16_t>(buf, pos);
  c.header.resolution = get<std::uint32_t>(buf, pos);
  c.header.h = get<double>(buf, pos);
  if (c.header.n < 1 || c.header.n > 2 || c.header.resolution < 2) throw FormatError("corrupt cache header");
  std::size_t count = 1;
  for (int a = 0; a < 2 * c.header.n; ++a) count *= c.header.resolution;
  if (buf.size() - pos != count * sizeof(double)) throw FormatError("cache payload size mismatch");
  c.values.resize(count);
  std::memcpy(c.values.data(), buf.data() + pos, count * sizeof(double));
  return c;
}

inline json shape_json(const ShapeSpec& s) {
  json j;
  switch (s.kind) {
    case ShapeSpec::Kind::Ball:
      j["kind"] = "ball";
      j["radius"] = s.radius;
      break;
    case ShapeSpec::Kind::PerturbedBall:
      j["kind"] = "perturbed_ball";
      j["gamma"] = s.gamma;
      j["mode"] = s.mode;
      break;
    case ShapeSpec::Kind::LevelSet:
      throw FormatError("level-set domains cannot be serialized");
  }
  return j;
}

inline ShapeSpec shape_from_json(const json& j) {
  const std::string k = j.at("kind").get<std::string>();
  if (k == "ball") return ShapeSpec::ball(j.at("radius").get<double>());
  if (k == "perturbed_ball") return ShapeSpec::perturbed_ball(j.at("gamma").get<double>(), j.at("mode").get<int>());
  throw FormatError("unknown shape kind " + k);
}

/// Solved instance: the binary cache plus `<path>.meta.json` holding the shape and right-hand side.
struct Instance {
  GridFunction u;
  ShapeSpec shape;
  std::string f_expr;
  double eps = 0.0;
};

inline void write_instance(const std::string& path, const GridFunction& u, const std::string& f_expr, double eps) {
  write_text(path, encode_cache(u));
  json meta;
  meta["shape"] = shape_json(u.domain->shape());
  meta["half_width"] = u.domain->half_width();
  meta["f_expr"] = f_expr;
  meta["eps"] = eps;
  write_text(path + ".meta.json", meta.dump(2) + "\n");
}

inline Instance read_instance(const std::string& path) {
  const CacheContents c = decode_cache(read_text(path));
  const json meta = json::parse(read_text(path + ".meta.json"));
  Instance inst;
  inst.shape = shape_from_json(meta.at("shape"));
  inst.f_expr = meta.at("f_expr").get<std::string>();
  inst.eps = meta.at("eps").get<double>();
  const double hw = meta.at("half_width").get<double>();
  auto d = make_domain(c.header.n, inst.shape, static_cast<int>(c.header.resolution), hw);
  if (std::abs(d->h() - c.header.h) > 1e-12 * c.header.h) throw FormatError("cache spacing disagrees with metadata");
  inst.u = GridFunction(d);
  for (std::size_t i = 0; i < d->size(); ++i)
    if (d->in_domain(i)) {
      if (!std::isfinite(c.values[i])) throw FormatError("cache has non-finite value inside the domain");
      inst.u.values[i] = c.values[i];
    }
  return inst;
}

// ---------------------------------------------------------------------------
// JSON views

inline json to_json(const RealPoint& x) {
  json a = json::array();
  for (int i = 0; i < x.size(); ++i) a.push_back(x(i));
  return a;
}

inline RealPoint point_from_json(const json& j) {
  RealPoint x(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) x(static_cast<int>(i)) = j[i].get<double>();
  return x;
}

/// Complex matrix as n^2 (re, im) pairs in row-major order.
inline json to_json(const CMat& m) {
  json a = json::array();
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) a.push_back(json::array({m(r, c).real(), m(r, c).imag()}));
  return a;
}

inline CMat cmat_from_json(const json& j) {
  const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(j.size()))));
  if (n * n != static_cast<int>(j.size())) throw FormatError("matrix entry count is not a square");
  CMat m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = cplx(j[r * n + c][0].get<double>(), j[r * n + c][1].get<double>());
  return m;
}

inline json to_json(const CVec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(json::array({v(i).real(), v(i).imag()}));
  return a;
}

inline CVec cvec_from_json(const json& j) {
  CVec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = cplx(j[i][0].get<double>(), j[i][1].get<double>());
  return v;
}

inline json to_json(const PluriharmonicPoly& p) {
  return json{{"center", to_json(p.center)}, {"l", to_json(p.l)}, {"b", to_json(p.b)}};
}

inline PluriharmonicPoly poly_from_json(const json& j) {
  PluriharmonicPoly p;
  p.center = cvec_from_json(j.at("center"));
  p.l = cvec_from_json(j.at("l"));
  p.b = cmat_from_json(j.at("b"));
  return p;
}

inline json to_json(const SectionChain& c) {
  json j;
  j["x0"] = to_json(c.x0);
  j["x0_node"] = c.x0_node;
  j["sigma"] = c.sigma;
  j["mu0"] = c.mu0;
  j["mu0_formula"] = c.mu0_formula;
  j["measured_c_prime"] = c.measured_c_prime;
  json levels = json::array();
  for (const auto& lv : c.levels) {
    json l;
    l["k"] = lv.k;
    l["mu"] = lv.mu;
    l["T_tilde"] = to_json(lv.T_tilde);
    l["T"] = to_json(lv.T);
    l["increment"] = to_json(lv.increment);
    l["shift"] = to_json(lv.shift);
    l["raw_det"] = lv.raw_det;
    l["t_tilde_deviation"] = lv.t_tilde_deviation;
    l["composite_abs_det"] = lv.composite_abs_det;
    l["fit"] = {{"c_in", lv.fit.c_in}, {"c_out", lv.fit.c_out}};
    l["inner_radius"] = lv.inner_radius;
    l["outer_radius"] = lv.outer_radius;
    l["radius"] = lv.radius;
    l["lattice_h"] = lv.lattice_h;
    l["fit_pass"] = lv.fit_pass;
    levels.push_back(l);
  }
  j["levels"] = levels;
  return j;
}

/// Restores the fields needed to cut sections again (shifts, transforms, radii).
inline SectionChain chain_from_json(const json& j) {
  SectionChain c;
  c.x0 = point_from_json(j.at("x0"));
  c.x0_node = j.at("x0_node").get<std::size_t>();
  c.sigma = j.at("sigma").get<double>();
  c.mu0 = j.at("mu0").get<double>();
  c.mu0_formula = j.at("mu0_formula").get<double>();
  c.measured_c_prime = j.at("measured_c_prime").get<double>();
  for (const auto& l : j.at("levels")) {
    ChainLevel lv;
    lv.k = l.at("k").get<int>();
    lv.mu = l.at("mu").get<double>();
    lv.T_tilde = cmat_from_json(l.at("T_tilde"));
    lv.T = cmat_from_json(l.at("T"));
    lv.increment = poly_from_json(l.at("increment"));
    lv.shift = poly_from_json(l.at("shift"));
    lv.raw_det = l.at("raw_det").get<double>();
    lv.t_tilde_deviation = l.at("t_tilde_deviation").get<double>();
    lv.composite_abs_det = l.at("composite_abs_det").get<double>();
    lv.fit.c_in = l.at("fit").at("c_in").get<double>();
    lv.fit.c_out = l.at("fit").at("c_out").get<double>();
    lv.inner_radius = l.at("inner_radius").get<double>();
    lv.outer_radius = l.at("outer_radius").get<double>();
    lv.radius = l.at("radius").get<double>();
    lv.lattice_h = l.at("lattice_h").get<double>();
    lv.fit_pass = l.at("fit_pass").get<bool>();
    c.levels.push_back(std::move(lv));
  }
  return c;
}

}  // namespace cma::io
