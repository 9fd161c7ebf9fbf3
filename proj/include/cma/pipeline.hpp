#pragma once

// Experiment configuration, the staged pipeline and the hashed manifest.

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cma/badset.hpp"
#include "cma/covering.hpp"
#include "cma/engulfing.hpp"
#include "cma/error.hpp"
#include "cma/expr.hpp"
#include "cma/grid.hpp"
#include "cma/io.hpp"
#include "cma/sections.hpp"
#include "cma/solver.hpp"
#include "cma/w2p.hpp"

namespace cma {

inline constexpr const char* kLibraryVersion = "0.3.0";

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw ResourceError("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeded sampling (explicit arithmetic on mt19937_64 output, so streams do not
// depend on the standard library's distribution implementations)

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Config

struct ExperimentConfig {
  int n = 1;
  int resolution = 65;
  double gamma = 0.05;
  double eps = 0.01;
  std::string f_expr = "1 + eps*cos(4*x1)";
  double sigma = 0.2;
  double mu0 = 0.1;
  int k_max = 3;
  int level_resolution = 33;
  std::string eps_bar = "paper-recipe(2)";
  std::vector<double> p = {2.0};
  int stride = 4;
  double badset_mu0 = 0.01;
  int badset_levels = 2;
  int badset_k_max = 4;
  int chain_points = 8;
  double chain_radius = 0.45;
  int pairs = 40;
  int families = 5;
  int family_size = 8;
  int weak_fields = 3;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  /// eps_bar value: a number or "paper-recipe(p)".
  double eps_bar_value() const {
    const std::string pre = "paper-recipe(";
    if (eps_bar.rfind(pre, 0) == 0 && eps_bar.back() == ')') {
      const std::string arg = eps_bar.substr(pre.size(), eps_bar.size() - pre.size() - 1);
      double pv = 0.0;
      try {
        pv = std::stod(arg);
      } catch (const std::exception&) {
        throw ValidationError("config: bad eps_bar recipe argument '" + arg + "'");
      }
      if (!(pv >= 1.0)) throw ValidationError("config: eps_bar recipe needs p >= 1");
      return eps_bar_recipe(n, pv);
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(eps_bar, &used);
      if (used != eps_bar.size()) throw ValidationError("");
      return v;
    } catch (const std::exception&) {
      throw ValidationError("config: eps_bar must be a number or paper-recipe(p)");
    }
  }

  Expression f() const { return Expression::parse(f_expr, {{"eps", eps}, {"gamma", gamma}}); }

  ShapeSpec shape() const { return gamma > 0.0 ? ShapeSpec::perturbed_ball(gamma) : ShapeSpec::ball(1.0); }

  void validate() const {
    if (n != 1 && n != 2) throw ValidationError("config: n must be 1 or 2");
    if (resolution < 9 || resolution % 2 == 0) throw ValidationError("config: resolution must be odd and at least 9");
    if (!(gamma >= 0.0 && gamma <= 0.2)) throw ValidationError("config: gamma must lie in [0, 0.2]");
    if (!(eps >= 0.0 && eps <= 0.2)) throw ValidationError("config: eps must lie in [0, 0.2]");
    if (!(sigma > 0.0 && sigma < 1.0)) throw ValidationError("config: sigma must lie in (0, 1)");
    if (!(mu0 >= 0.01 && mu0 <= 0.25)) throw ValidationError("config: mu0 must lie in [0.01, 0.25]");
    if (!(badset_mu0 >= 0.01 && badset_mu0 <= 0.25)) throw ValidationError("config: badset_mu0 must lie in [0.01, 0.25]");
    if (k_max < 1 || badset_levels < 1 || badset_k_max < 1) throw ValidationError("config: level counts must be positive");
    if (level_resolution < 9) throw ValidationError("config: level_resolution must be at least 9");
    if (stride < 1) throw ValidationError("config: stride must be positive");
    if (p.empty()) throw ValidationError("config: p list is empty");
    for (double q : p)
      if (!(q >= 1.0)) throw ValidationError("config: every p must be at least 1");
    if (!(eps_bar_value() > 0.0)) throw ValidationError("config: eps_bar must be positive");
    if (chain_points < 1 || pairs < 0 || families < 0 || family_size < 1 || weak_fields < 0)
      throw ValidationError("config: sample counts out of range");
    if (!(chain_radius > 0.0 && chain_radius < 1.0 - gamma)) throw ValidationError("config: chain_radius out of range");
    if (output_dir.empty()) throw ValidationError("config: output_dir is empty");
    f();  // parse check
  }
};

inline io::json to_json(const ExperimentConfig& c) {
  io::json j;
  j["n"] = c.n;
  j["resolution"] = c.resolution;
  j["gamma"] = c.gamma;
  j["eps"] = c.eps;
  j["f_expr"] = c.f_expr;
  j["sigma"] = c.sigma;
  j["mu0"] = c.mu0;
  j["k_max"] = c.k_max;
  j["level_resolution"] = c.level_resolution;
  j["eps_bar"] = c.eps_bar;
  j["p"] = c.p;
  j["stride"] = c.stride;
  j["badset_mu0"] = c.badset_mu0;
  j["badset_levels"] = c.badset_levels;
  j["badset_k_max"] = c.badset_k_max;
  j["chain_points"] = c.chain_points;
  j["chain_radius"] = c.chain_radius;
  j["pairs"] = c.pairs;
  j["families"] = c.families;
  j["family_size"] = c.family_size;
  j["weak_fields"] = c.weak_fields;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const io::json& j) {
  ExperimentConfig c;
  const io::json defaults = to_json(c);
  for (const auto& [k, v] : j.items())
    if (!defaults.contains(k)) throw ValidationError("config: unknown key '" + k + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n", c.n);
    get("resolution", c.resolution);
    get("gamma", c.gamma);
    get("eps", c.eps);
    get("f_expr", c.f_expr);
    get("sigma", c.sigma);
    get("mu0", c.mu0);
    get("k_max", c.k_max);
    get("level_resolution", c.level_resolution);
    if (j.contains("eps_bar"))
      c.eps_bar = j["eps_bar"].is_number() ? io::fmt(j["eps_bar"].get<double>()) : j["eps_bar"].get<std::string>();
    get("p", c.p);
    get("stride", c.stride);
    get("badset_mu0", c.badset_mu0);
    get("badset_levels", c.badset_levels);
    get("badset_k_max", c.badset_k_max);
    get("chain_points", c.chain_points);
    get("chain_radius", c.chain_radius);
    get("pairs", c.pairs);
    get("families", c.families);
    get("family_size", c.family_size);
    get("weak_fields", c.weak_fields);
    get("seed", c.seed);
    get("output_dir", c.output_dir);
  } catch (const io::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

/// Hash of the canonical config without the output directory.
inline std::string config_hash(const ExperimentConfig& c) {
  io::json j = to_json(c);
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Stage helpers shared with the CLI

struct SolvedInstance {
  DomainPtr domain;
  GridFunction f;
  SolveResult u;
  SolveResult v0;
};

inline SolvedInstance solve_instance(int n, const ShapeSpec& shape, int resolution, const Expression& f_expr,
                                     double eps) {
  SolvedInstance s;
  s.domain = make_domain(n, shape, resolution);
  s.f = GridFunction::sample(s.domain, [&](const RealPoint& x) { return f_expr(x); });
  for (std::size_t i : s.domain->interior_nodes())
    if (std::abs(s.f.values[i] - 1.0) > eps + 1e-12)
      throw ValidationError("f leaves the band |f - 1| <= eps at node " + std::to_string(i));
  const BoundaryData g = zero_boundary_data(s.domain);
  s.u = solve_dirichlet(s.domain, s.f, g);
  s.v0 = solve_dirichlet(s.domain, GridFunction::constant(s.domain, 1.0), g);
  return s;
}

inline io::json to_json(const SolveReport& r) {
  return io::json{{"iterations", r.iterations},
                  {"residual", r.residual},
                  {"min_eigenvalue", r.min_eigenvalue},
                  {"boundary_max_error", r.boundary_max_error},
                  {"boundary_offset", r.boundary_offset},
                  {"residual_history", r.residual_history}};
}

/// Random interior nodes within `radius` of the origin, distinct, in draw order.
inline std::vector<std::size_t> sample_base_points(const GridDomain& d, double radius, int count, Rng& rng) {
  std::vector<std::size_t> pool;
  for (std::size_t i : d.interior_nodes())
    if (d.coords(i).norm() <= radius) pool.push_back(i);
  if (pool.empty()) throw PreconditionError("sample_base_points: no interior node in the sampling ball");
  std::vector<std::size_t> out;
  while (static_cast<int>(out.size()) < count && !pool.empty()) {
    const std::size_t k = rng.index(pool.size());
    out.push_back(pool[k]);
    pool.erase(pool.begin() + static_cast<long>(k));
  }
  return out;
}

struct EngulfSample {
  std::size_t chain1 = 0, chain2 = 0;
  double mu1 = 0.0, mu2 = 0.0;
  EngulfVerdict verdict;
};

/// Draws section pairs from the chains (heights log-uniform in [mu0^depth, mu0],
/// mu1 in [mu2/4, 4 mu2]) until `count` intersecting pairs are checked or the
/// attempt budget runs out.
inline std::vector<EngulfSample> sample_engulf_pairs(const FieldPtr& u, const std::vector<SectionChain>& chains,
                                                     int count, Rng& rng, int max_attempts = 0) {
  std::vector<EngulfSample> out;
  if (chains.empty() || count <= 0) return out;
  if (max_attempts <= 0) max_attempts = 50 * count;
  for (int t = 0; t < max_attempts && static_cast<int>(out.size()) < count; ++t) {
    const std::size_t a = rng.index(chains.size()), b = rng.index(chains.size());
    const auto& c2 = chains[b];
    const double lo = std::log(std::pow(c2.mu0, c2.depth())), hi = std::log(c2.mu0);
    const double mu2 = std::exp(rng.uniform(lo, hi));
    const double mu1 = mu2 * std::exp(rng.uniform(std::log(0.25), std::log(4.0)));
    try {
      const Section s1 = chains[a].section(u, mu1);
      const Section s2 = c2.section(u, mu2);
      const EngulfVerdict v = check_engulfing(s1, s2);
      if (v.status == EngulfStatus::NotApplicable) continue;
      out.push_back({a, b, mu1, mu2, v});
    } catch (const SectionEscapeError&) {
    }
  }
  return out;
}

/// Family of chain sections at random heights in [mu0^depth, mu0].
inline std::vector<SectionMember> sample_section_family(const FieldPtr& u, const std::vector<SectionChain>& chains,
                                                        int size, Rng& rng) {
  std::vector<SectionMember> F;
  for (int t = 0; t < 20 * size && static_cast<int>(F.size()) < size; ++t) {
    const auto& c = chains[rng.index(chains.size())];
    const double mu = std::exp(rng.uniform(std::log(std::pow(c.mu0, c.depth())), std::log(c.mu0)));
    try {
      F.push_back({to_pointed(c.section(u, mu)), mu});
    } catch (const SectionEscapeError&) {
    }
  }
  return F;
}

/// Random subset of the family's union (each node kept with probability 1/2, at least one).
inline std::vector<std::size_t> sample_target_set(const std::vector<SectionMember>& F, Rng& rng) {
  std::vector<std::size_t> all;
  for (const auto& m : F) all.insert(all.end(), m.set.nodes.begin(), m.set.nodes.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<std::size_t> X;
  for (std::size_t i : all)
    if (rng.uniform() < 0.5) X.push_back(i);
  if (X.empty() && !all.empty()) X.push_back(all[rng.index(all.size())]);
  return X;
}

/// Nonnegative random field: a few Gaussian bumps.
inline GridFunction random_bump_field(const DomainPtr& d, Rng& rng, int bumps = 3) {
  std::vector<RealPoint> centers;
  std::vector<double> widths, heights;
  for (int b = 0; b < bumps; ++b) {
    RealPoint c(d->dims());
    for (int a = 0; a < d->dims(); ++a) c(a) = rng.uniform(-0.5, 0.5);
    centers.push_back(c);
    widths.push_back(rng.uniform(0.05, 0.3));
    heights.push_back(rng.uniform(0.5, 2.0));
  }
  return GridFunction::sample(d, [&](const RealPoint& x) {
    double v = 0.0;
    for (int b = 0; b < bumps; ++b) v += heights[b] * std::exp(-(x - centers[b]).squaredNorm() / (widths[b] * widths[b]));
    return v;
  });
}

inline std::vector<double> dyadic_levels(double lo, double hi) {
  std::vector<double> ts;
  for (double t = lo; t <= hi * (1 + 1e-12); t *= 2.0) ts.push_back(t);
  return ts;
}

struct BadSetRun {
  std::vector<std::size_t> sampled;
  ExtentTable extents;
  std::size_t chain_failures = 0;
  BadSetReport report;
};

/// Chains at every strided node of B_0.8 (level heights badset_mu0^k), then the decay table.
inline BadSetRun run_badset(const FieldPtr& u, const GridFunction& v0, const ChainConfig& chain_cfg, double eps_bar,
                            int k_max, int stride) {
  BadSetRun r;
  r.sampled = strided_ball_nodes(*u->domain, 0.8, stride);
  for (std::size_t s : r.sampled) {
    try {
      r.extents[s] = extents_from_chain(construct_section_chain(u, v0, s, chain_cfg));
    } catch (const Error&) {
      ++r.chain_failures;
    }
  }
  if (r.chain_failures > 0)
    throw PreconditionError("run_badset: " + std::to_string(r.chain_failures) + " base points have no section chain");
  r.report = badset_decay_experiment(*u->domain, r.sampled, r.extents, eps_bar, k_max, stride);
  return r;
}

inline io::json to_json(const BadSetReport& r) {
  io::json rows = io::json::array();
  for (const auto& w : r.rows)
    rows.push_back({{"k", w.k},
                    {"r", w.r},
                    {"measure", w.measure},
                    {"bound", w.bound},
                    {"ratio", w.ratio},
                    {"measure_b06", w.measure_06},
                    {"dk_count", w.dk_count},
                    {"ak_count", w.ak_count},
                    {"pass", w.pass},
                    {"vacuous", w.vacuous}});
  return io::json{{"n", r.n},         {"stride", r.stride}, {"eps_bar", r.eps_bar}, {"sampled", r.sampled},
                  {"monotone", r.monotone}, {"pass", r.pass()}, {"rows", rows}};
}

inline std::string badset_csv(const BadSetReport& r) {
  std::ostringstream os;
  os << "k,r,measure,bound,ratio,measure_b06,dk_count,ak_count,pass,vacuous\n";
  for (const auto& w : r.rows)
    os << w.k << ',' << io::fmt(w.r) << ',' << io::fmt(w.measure) << ',' << io::fmt(w.bound) << ','
       << io::fmt(w.ratio) << ',' << io::fmt(w.measure_06) << ',' << w.dk_count << ',' << w.ak_count << ','
       << (w.pass ? 1 : 0) << ',' << (w.vacuous ? 1 : 0) << '\n';
  return os.str();
}

inline io::json norm_report(const GridFunction& u, const BadSetReport& rep, double p, double eps_bar, double f_min) {
  const auto region = nodes_in_ball(*u.domain, RealPoint::Zero(u.domain->dims()), 0.6);
  const DirectQuadrature dq = direct_quadrature(u, p, region);
  const DyadicBound db = dyadic_bound(rep, p, eps_bar, f_min);
  const FullW2p fw = full_w2p(u, p, region);
  io::json terms = io::json::array();
  for (const auto& t : db.terms)
    terms.push_back({{"k", t.k}, {"trace_bound", t.trace_bound}, {"measure", t.measure}, {"term", t.term}});
  return io::json{{"p", p},
                  {"region", "B_0.6"},
                  {"region_nodes", dq.nodes},
                  {"direct_laplacian", dq.laplacian_p},
                  {"direct_trace_inverse", dq.trace_inv_p},
                  {"direct_total", dq.total()},
                  {"am_hm_violations", dq.am_hm_violations},
                  {"dyadic_ratio", db.ratio},
                  {"dyadic_terms", terms},
                  {"dyadic_truncated", db.truncated},
                  {"dyadic_tail", db.tail_valid ? io::json(db.tail) : io::json(nullptr)},
                  {"dyadic_total", db.tail_valid ? io::json(db.total) : io::json(nullptr)},
                  {"tail_valid", db.tail_valid},
                  {"dominates", db.tail_valid && dq.total() <= db.total},
                  {"full_w2p", fw.value},
                  {"u_norm", fw.u_norm},
                  {"laplacian_norm", fw.lap_norm},
                  {"classical_ratio", fw.ratio}};
}

// ---------------------------------------------------------------------------
// Pipeline

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// File name -> contents, in write order.
struct Bundle {
  std::vector<std::pair<std::string, std::string>> files;
  io::json manifest;
  bool all_pass = false;

  void add(const std::string& name, const std::string& text) { files.emplace_back(name, text); }
  void add(const std::string& name, const io::json& j) { files.emplace_back(name, j.dump(2) + "\n"); }
};

namespace detail {

inline io::json build_manifest(const ExperimentConfig& cfg, const Bundle& b, const io::json& stages,
                               const io::json& verdicts) {
  io::json m;
  m["library_version"] = kLibraryVersion;
  m["cache_format_version"] = io::kCacheVersion;
  m["config"] = to_json(cfg);
  m["config_hash"] = config_hash(cfg);
  m["seed"] = cfg.seed;
  m["stages"] = stages;
  m["verdicts"] = verdicts;
  io::json files = io::json::object();
  for (const auto& [name, text] : b.files) files[name] = sha256_hex(text);
  m["files"] = files;
  return m;
}

inline void write_bundle(const std::string& dir, const Bundle& b) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, text] : b.files) io::write_text((std::filesystem::path(dir) / name).string(), text);
  io::write_text((std::filesystem::path(dir) / "manifest.json").string(), b.manifest.dump(2) + "\n");
}

}  // namespace detail

/// Runs every stage in memory, then writes the bundle and manifest. A failing
/// stage is recorded in the manifest (files produced so far are still written)
/// and rethrown as StageError. Invalid configs throw before anything is written.
inline Bundle run_pipeline(const ExperimentConfig& cfg, bool write = true) {
  cfg.validate();
  Bundle b;
  io::json stages = io::json::array();
  io::json verdicts = io::json::object();
  Rng rng(cfg.seed);
  const double eps_bar = cfg.eps_bar_value();
  std::string stage;

  try {
    stage = "solve";
    const Expression f = cfg.f();
    SolvedInstance inst = solve_instance(cfg.n, cfg.shape(), cfg.resolution, f, cfg.eps);
    const GridDomain& d = *inst.domain;
    const double slack = 10.0 * d.h() * d.h();
    const SandwichCertificate sand = comparison_sandwich(inst.u.u, inst.v0.u, cfg.eps, cfg.n, slack);
    const double barrier = barrier_violation(inst.v0.u, cfg.gamma);
    io::json solve_j{{"solution", to_json(inst.u.report)},
                     {"v0", to_json(inst.v0.report)},
                     {"h", d.h()},
                     {"sandwich",
                      {{"max_abs_difference", sand.max_abs_difference},
                       {"lower_violation", sand.lower_violation},
                       {"upper_violation", sand.upper_violation},
                       {"slack", slack},
                       {"pass", sand.pass()}}},
                     {"barrier", {{"violation", barrier}, {"slack", slack}, {"pass", barrier <= slack}}}};
    b.add("solve.json", solve_j);
    b.add("solution.csv", io::grid_csv(inst.u.u));
    b.add("solution.cmag", io::encode_cache(inst.u.u));
    {
      io::json meta;
      meta["shape"] = io::shape_json(d.shape());
      meta["half_width"] = d.half_width();
      meta["f_expr"] = cfg.f_expr;
      meta["eps"] = cfg.eps;
      b.add("solution.cmag.meta.json", meta);
    }
    verdicts["sandwich"] = sand.pass();
    verdicts["barrier"] = barrier <= slack;
    stages.push_back({{"stage", stage}, {"status", "ok"}});

    stage = "sections";
    const FieldPtr u = std::make_shared<const GridFunction>(inst.u.u);
    ChainConfig ccfg;
    ccfg.sigma = cfg.sigma;
    ccfg.mu0 = cfg.mu0;
    ccfg.k_max = cfg.k_max;
    ccfg.level_resolution = cfg.level_resolution;
    std::vector<SectionChain> chains;
    io::json chains_j = io::json::array();
    bool fits = true;
    for (std::size_t x0 : sample_base_points(d, cfg.chain_radius, cfg.chain_points, rng)) {
      chains.push_back(construct_section_chain(u, inst.v0.u, x0, ccfg));
      for (const auto& lv : chains.back().levels) fits = fits && lv.fit_pass;
      chains_j.push_back(io::to_json(chains.back()));
    }
    b.add("chains.json", chains_j);
    verdicts["section_fits"] = fits;
    stages.push_back({{"stage", stage}, {"status", "ok"}});

    stage = "engulf";
    const auto pairs = sample_engulf_pairs(u, chains, cfg.pairs, rng);
    io::json pairs_j = io::json::array();
    bool engulf_ok = true;
    for (const auto& s : pairs) {
      engulf_ok = engulf_ok && s.verdict.status == EngulfStatus::Pass;
      pairs_j.push_back({{"chain1", s.chain1},
                         {"chain2", s.chain2},
                         {"mu1", s.mu1},
                         {"mu2", s.mu2},
                         {"status", to_string(s.verdict.status)},
                         {"strict_misses", s.verdict.strict_misses},
                         {"offending_nodes", s.verdict.offending_nodes}});
    }
    b.add("engulf.json", io::json{{"pairs", pairs_j}, {"checked", pairs.size()}, {"pass", engulf_ok}});
    verdicts["engulfing"] = engulf_ok;
    stages.push_back({{"stage", stage}, {"status", "ok"}});

    stage = "cover";
    io::json fam_j = io::json::array();
    bool cover_ok = true;
    for (int t = 0; t < cfg.families; ++t) {
      const auto F = sample_section_family(u, chains, cfg.family_size, rng);
      if (F.empty()) continue;
      const auto X = sample_target_set(F, rng);
      const Selection sel = vitali_select(F, X);
      cover_ok = cover_ok && sel.disjoint && sel.covered;
      fam_j.push_back({{"members", F.size()},
                       {"target_nodes", X.size()},
                       {"selected", sel.selected},
                       {"disjoint", sel.disjoint},
                       {"covered", sel.covered}});
    }
    std::ostringstream weak_csv;
    weak_csv << "field,t,level_measure,bound\n";
    bool weak_ok = true;
    {
      const auto F = sample_section_family(u, chains, 4 * cfg.family_size, rng);
      std::vector<std::size_t> region;
      for (const auto& m : F) region.insert(region.end(), m.set.nodes.begin(), m.set.nodes.end());
      std::sort(region.begin(), region.end());
      region.erase(std::unique(region.begin(), region.end()), region.end());
      for (int w = 0; w < cfg.weak_fields && !F.empty(); ++w) {
        const GridFunction fld = random_bump_field(inst.domain, rng);
        const WeakTypeReport rep = weak_type_check(fld, F, region, dyadic_levels(1.0 / 64.0, 4.0));
        weak_ok = weak_ok && rep.pass();
        for (const auto& l : rep.levels)
          weak_csv << w << ',' << io::fmt(l.t) << ',' << io::fmt(l.level_measure) << ',' << io::fmt(l.bound) << '\n';
      }
    }
    b.add("cover.json", io::json{{"families", fam_j}, {"pass", cover_ok}, {"weak_type_pass", weak_ok}});
    b.add("weak_type.csv", weak_csv.str());
    verdicts["covering"] = cover_ok;
    verdicts["weak_type"] = weak_ok;
    stages.push_back({{"stage", stage}, {"status", "ok"}});

    stage = "badset";
    ChainConfig bcfg = ccfg;
    bcfg.mu0 = cfg.badset_mu0;
    bcfg.k_max = cfg.badset_levels;
    const BadSetRun br = run_badset(u, inst.v0.u, bcfg, eps_bar, cfg.badset_k_max, cfg.stride);
    const ContactDensity cd = contact_density(inst.u.u, inst.v0.u, cfg.eps, cfg.gamma);
    io::json hb_j = io::json::array();
    bool hb_ok = true;
    for (int k = 1; k <= cfg.badset_k_max; ++k) {
      const auto mask = classify_Dk(d, br.sampled, br.extents, k);
      std::vector<std::size_t> dk;
      for (std::size_t j = 0; j < mask.size(); ++j)
        if (mask[j]) dk.push_back(br.sampled[j]);
      const HessianBoundVerdict hv = hessian_bounds_on_Dk(inst.u.u, dk, k);
      hb_ok = hb_ok && hv.pass();
      hb_j.push_back({{"k", k},
                      {"checked", hv.checked},
                      {"violations", hv.violations},
                      {"min_eigenvalue", hv.checked ? io::json(hv.min_eigenvalue) : io::json(nullptr)},
                      {"max_eigenvalue", hv.max_eigenvalue}});
    }
    io::json bj = to_json(br.report);
    bj["contact"] = {{"fraction", cd.fraction}, {"constant", cd.constant}, {"sweeps", cd.sweeps}};
    bj["hessian_bounds"] = hb_j;
    b.add("badset.json", bj);
    b.add("badset.csv", badset_csv(br.report));
    {
      std::ostringstream plot;
      plot << "k,measure\n";
      for (const auto& w : br.report.rows) plot << w.k << ',' << io::fmt(w.measure) << '\n';
      b.add("badset_plot.csv", plot.str());
    }
    verdicts["decay"] = br.report.pass();
    verdicts["hessian_bounds"] = hb_ok;
    stages.push_back({{"stage", stage}, {"status", "ok"}});

    stage = "w2p";
    double f_min = std::numeric_limits<double>::infinity();
    for (std::size_t i : d.interior_nodes()) f_min = std::min(f_min, inst.f.values[i]);
    io::json norms = io::json::array();
    bool dom = true;
    for (double p : cfg.p) {
      io::json nr = norm_report(inst.u.u, br.report, p, eps_bar, f_min);
      dom = dom && nr["dominates"].get<bool>();
      norms.push_back(nr);
    }
    b.add("norms.json", norms);
    verdicts["dyadic_dominates"] = dom;
    stages.push_back({{"stage", stage}, {"status", "ok"}});
  } catch (const std::exception& e) {
    stages.push_back({{"stage", stage}, {"status", "error"}, {"message", e.what()}});
    b.manifest = detail::build_manifest(cfg, b, stages, verdicts);
    if (write) detail::write_bundle(cfg.output_dir, b);
    throw StageError(stage, e.what());
  }
  bool all = true;
  for (const auto& [k, v] : verdicts.items()) all = all && v.get<bool>();
  b.all_pass = all;
  verdicts["all_pass"] = all;
  b.manifest = detail::build_manifest(cfg, b, stages, verdicts);
  if (write) detail::write_bundle(cfg.output_dir, b);
  return b;
}

}  // namespace cma
