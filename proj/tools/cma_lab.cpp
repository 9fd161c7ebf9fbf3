// cma_lab: command-line front end.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cma/pipeline.hpp"

using namespace cma;
using io::json;

namespace {

struct Loaded {
  io::Instance inst;
  FieldPtr u;
  GridFunction v0;
  GridFunction f;
};

Loaded load(const std::string& path) {
  Loaded l;
  l.inst = io::read_instance(path);
  l.u = std::make_shared<const GridFunction>(l.inst.u);
  const auto d = l.inst.u.domain;
  const Expression fe = Expression::parse(l.inst.f_expr, {{"eps", l.inst.eps}, {"gamma", l.inst.shape.gamma}});
  l.f = GridFunction::sample(d, [&](const RealPoint& x) { return fe(x); });
  l.v0 = solve_dirichlet(d, GridFunction::constant(d, 1.0), zero_boundary_data(d)).u;
  return l;
}

RealPoint parse_point(const std::string& s, int dims) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  if (static_cast<int>(v.size()) != dims)
    throw ValidationError("point '" + s + "' needs " + std::to_string(dims) + " coordinates");
  RealPoint x(dims);
  for (int a = 0; a < dims; ++a) x(a) = v[a];
  return x;
}

void emit(const std::string& path, const json& j) {
  if (path.empty())
    std::cout << j.dump(2) << "\n";
  else
    io::write_text(path, j.dump(2) + "\n");
}

double eps_bar_arg(const std::string& s, int n) {
  ExperimentConfig c;
  c.n = n;
  c.eps_bar = s;
  return c.eps_bar_value();
}

std::vector<std::size_t> read_index_csv(const std::string& path) {
  std::stringstream ss(io::read_text(path));
  std::string line;
  std::vector<std::size_t> out;
  bool first = true;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const std::string cell = line.substr(0, line.find(','));
    if (first && cell == "index") {
      first = false;
      continue;
    }
    first = false;
    out.push_back(std::stoull(cell));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex Monge-Ampere W^{2,p} lab"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "Dirichlet solve on a (perturbed) ball");
  int n = 1, res = 65;
  double gamma = 0.0, eps = 0.0;
  std::string f_expr = "1", out, report;
  solve->add_option("--n", n, "complex dimension (1 or 2)");
  solve->add_option("--resolution", res, "nodes per axis (odd)");
  solve->add_option("--gamma", gamma, "boundary perturbation");
  solve->add_option("--eps", eps, "right-hand-side band |f - 1| <= eps");
  solve->add_option("--f-expr", f_expr, "right-hand side, e.g. '1 + eps*cos(4*x1)'");
  solve->add_option("--out", out, "output: *.csv grid dump, otherwise CMAG cache (+ .meta.json)");
  solve->add_option("--report", report, "JSON report path (stdout when omitted)");

  // sections
  auto* sections = app.add_subcommand("sections", "Section chains at given centers");
  std::string instance;
  std::vector<std::string> centers;
  double sigma = 0.2, mu0 = 0.1;
  int levels = 3, level_res = 33;
  std::string out_chain;
  sections->add_option("--instance", instance, "solver cache")->required();
  sections->add_option("--center", centers, "base point x1,y1[,x2,y2] (repeatable)")->required();
  sections->add_option("--sigma", sigma);
  sections->add_option("--mu0", mu0);
  sections->add_option("--levels", levels);
  sections->add_option("--level-resolution", level_res);
  sections->add_option("--out-chain", out_chain, "chain JSON path (stdout when omitted)");

  // engulf
  auto* engulf = app.add_subcommand("engulf", "Engulfing checks on sampled section pairs");
  std::string chains_path;
  int pairs = 50;
  std::uint64_t seed = 1;
  engulf->add_option("--instance", instance, "solver cache")->required();
  engulf->add_option("--chains", chains_path, "chain JSON from `sections`")->required();
  engulf->add_option("--pairs", pairs);
  engulf->add_option("--seed", seed);
  engulf->add_option("--report", report);

  // cover
  auto* cover = app.add_subcommand("cover", "Vitali selection for a section family");
  std::string family_path, target_path;
  cover->add_option("--instance", instance, "solver cache")->required();
  cover->add_option("--family", family_path, "JSON list of {center_node, mu, shift?}")->required();
  cover->add_option("--target-set", target_path, "CSV of node indices (default: union of the family)");
  cover->add_option("--report", report);

  // badset
  auto* badset = app.add_subcommand("badset", "D_k / A_k classification and decay table");
  std::string eps_bar = "paper-recipe(2)";
  int k_max = 4, stride = 4;
  double bad_mu0 = 0.01;
  int bad_levels = 2;
  badset->add_option("--instance", instance, "solver cache")->required();
  badset->add_option("--eps-bar", eps_bar, "number or paper-recipe(p)");
  badset->add_option("--k-max", k_max);
  badset->add_option("--stride", stride);
  badset->add_option("--mu0", bad_mu0, "chain level ratio for base points in B_0.8");
  badset->add_option("--levels", bad_levels);
  badset->add_option("--level-resolution", level_res);
  badset->add_option("--report", report, "JSON report; rows also written to <report>.csv");

  // w2p
  auto* w2p = app.add_subcommand("w2p", "Direct, dyadic and full W^{2,p} quantities");
  std::vector<double> ps{2.0};
  w2p->add_option("--instance", instance, "solver cache")->required();
  w2p->add_option("--p", ps, "exponent(s)");
  w2p->add_option("--eps-bar", eps_bar);
  w2p->add_option("--k-max", k_max);
  w2p->add_option("--stride", stride);
  w2p->add_option("--mu0", bad_mu0);
  w2p->add_option("--levels", bad_levels);
  w2p->add_option("--level-resolution", level_res);
  w2p->add_option("--report", report);

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Full staged run with manifest");
  std::string config_path, out_dir;
  pipeline->add_option("--config", config_path, "JSON config")->required();
  pipeline->add_option("--out", out_dir, "output directory (overrides config)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      ExperimentConfig c;
      c.n = n;
      c.resolution = res;
      c.gamma = gamma;
      c.eps = eps;
      c.f_expr = f_expr;
      c.output_dir = ".";
      c.validate();
      const SolvedInstance s = solve_instance(n, c.shape(), res, c.f(), eps);
      const double slack = 10.0 * s.domain->h() * s.domain->h();
      const SandwichCertificate sand = comparison_sandwich(s.u.u, s.v0.u, eps, n, slack);
      json r{{"n", n},
             {"resolution", res},
             {"h", s.domain->h()},
             {"solution", to_json(s.u.report)},
             {"sandwich", {{"max_abs_difference", sand.max_abs_difference}, {"pass", sand.pass()}}},
             {"barrier_violation", barrier_violation(s.v0.u, gamma)}};
      if (!out.empty()) {
        if (std::filesystem::path(out).extension() == ".csv")
          io::write_grid_csv(out, s.u.u);
        else
          io::write_instance(out, s.u.u, f_expr, eps);
      }
      emit(report, r);
    } else if (*sections) {
      const Loaded l = load(instance);
      ChainConfig cfg;
      cfg.sigma = sigma;
      cfg.mu0 = mu0;
      cfg.k_max = levels;
      cfg.level_resolution = level_res;
      cfg.validate();
      json arr = json::array();
      for (const auto& c : centers) {
        const RealPoint x = parse_point(c, l.u->domain->dims());
        arr.push_back(io::to_json(construct_section_chain(l.u, l.v0, l.u->domain->nearest_node(x), cfg)));
      }
      emit(out_chain, arr);
    } else if (*engulf) {
      const Loaded l = load(instance);
      std::vector<SectionChain> chains;
      for (const auto& j : json::parse(io::read_text(chains_path))) chains.push_back(io::chain_from_json(j));
      Rng rng(seed);
      const auto samples = sample_engulf_pairs(l.u, chains, pairs, rng);
      json rows = json::array();
      bool ok = true;
      for (const auto& s : samples) {
        ok = ok && s.verdict.status == EngulfStatus::Pass;
        rows.push_back({{"chain1", s.chain1},
                        {"chain2", s.chain2},
                        {"mu1", s.mu1},
                        {"mu2", s.mu2},
                        {"status", to_string(s.verdict.status)},
                        {"strict_misses", s.verdict.strict_misses},
                        {"offending_nodes", s.verdict.offending_nodes}});
      }
      emit(report, json{{"seed", seed}, {"checked", samples.size()}, {"pass", ok}, {"pairs", rows}});
    } else if (*cover) {
      const Loaded l = load(instance);
      const GridDomain& d = *l.u->domain;
      std::vector<SectionMember> F;
      for (const auto& m : json::parse(io::read_text(family_path))) {
        const std::size_t c = m.at("center_node").get<std::size_t>();
        const double mu = m.at("mu").get<double>();
        const PluriharmonicPoly h =
            m.contains("shift") ? io::poly_from_json(m["shift"]) : PluriharmonicPoly::zero(to_complex(d.coords(c)));
        F.push_back({to_pointed(build_section(l.u, c, mu, h)), mu});
      }
      std::vector<std::size_t> X;
      if (!target_path.empty()) {
        X = read_index_csv(target_path);
      } else {
        for (const auto& m : F) X.insert(X.end(), m.set.nodes.begin(), m.set.nodes.end());
        std::sort(X.begin(), X.end());
        X.erase(std::unique(X.begin(), X.end()), X.end());
      }
      const Selection sel = vitali_select(F, X);
      emit(report, json{{"members", F.size()},
                        {"target_nodes", X.size()},
                        {"selected", sel.selected},
                        {"disjoint", sel.disjoint},
                        {"covered", sel.covered},
                        {"uncovered", sel.uncovered}});
    } else if (*badset || *w2p) {
      const Loaded l = load(instance);
      const double eb = eps_bar_arg(eps_bar, l.u->domain->n());
      ChainConfig cfg;
      cfg.mu0 = bad_mu0;
      cfg.k_max = bad_levels;
      cfg.level_resolution = level_res;
      const BadSetRun br = run_badset(l.u, l.v0, cfg, eb, k_max, stride);
      if (*badset) {
        const ContactDensity cd = contact_density(*l.u, l.v0, l.inst.eps, l.inst.shape.gamma);
        json j = to_json(br.report);
        j["contact"] = {{"fraction", cd.fraction}, {"constant", cd.constant}};
        emit(report, j);
        if (!report.empty()) io::write_text(report + ".csv", badset_csv(br.report));
      } else {
        double f_min = std::numeric_limits<double>::infinity();
        for (std::size_t i : l.u->domain->interior_nodes()) f_min = std::min(f_min, l.f.values[i]);
        json arr = json::array();
        for (double p : ps) arr.push_back(norm_report(*l.u, br.report, p, eb, f_min));
        emit(report, arr);
      }
    } else if (*pipeline) {
      ExperimentConfig c = config_from_json(json::parse(io::read_text(config_path)));
      if (!out_dir.empty()) c.output_dir = out_dir;
      const Bundle b = run_pipeline(c);
      std::cout << b.manifest["verdicts"].dump(2) << "\n";
      return b.all_pass ? 0 : 3;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
