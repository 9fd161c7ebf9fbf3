#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "cma/expr.hpp"
#include "cma/io.hpp"
#include "cma/solver.hpp"

using namespace cma;

namespace {

RealPoint pt(std::initializer_list<double> v) {
  RealPoint x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double a : v) x(k++) = a;
  return x;
}

std::filesystem::path tmp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cma_io_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Expr, EvaluatesArithmeticAndFunctions) {
  const RealPoint x = pt({0.3, -0.4});
  EXPECT_DOUBLE_EQ(Expression::parse("1 + 2*3 - 4/2")(x), 5.0);
  EXPECT_DOUBLE_EQ(Expression::parse("2^3^2")(x), 512.0);
  EXPECT_DOUBLE_EQ(Expression::parse("-2^2")(x), -4.0);
  EXPECT_DOUBLE_EQ(Expression::parse("r")(x), 0.5);
  EXPECT_NEAR(Expression::parse("r2")(x), 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(Expression::parse("x*y")(x), 0.3 * -0.4);
  EXPECT_DOUBLE_EQ(Expression::parse("1 + eps*cos(4*x1)", {{"eps", 0.01}})(x), 1.0 + 0.01 * std::cos(1.2));
  EXPECT_DOUBLE_EQ(Expression::parse("sqrt(abs(y1)) + exp(0) + log(1) + tanh(0) + sin(pi)")(x),
                   std::sqrt(0.4) + 1.0 + std::sin(std::numbers::pi));
  EXPECT_DOUBLE_EQ(Expression::parse("x2 + y2")(pt({0.1, 0.2, 0.3, 0.4})), 0.7);
}

TEST(Expr, RejectsBadInput) {
  for (const char* bad : {"1 +", "foo", "sin(1", "1 2", "", "(x1", "gamma"})
    EXPECT_THROW(Expression::parse(bad), ValidationError) << bad;
  try {
    Expression::parse("1 + $");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("4"), std::string::npos);
  }
}

TEST(Io, ShortestRoundTripFormatting) {
  EXPECT_EQ(io::fmt(0.1), "0.1");
  EXPECT_EQ(io::fmt(1.0), "1");
  EXPECT_EQ(io::fmt(std::nan("")), "nan");
  EXPECT_EQ(io::fmt(-std::numeric_limits<double>::infinity()), "-inf");
  const double v = 1.0 / 3.0;
  EXPECT_EQ(std::stod(io::fmt(v)), v);
}

TEST(Io, GridCsvLayout) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 9, 1.0);
  const auto u = GridFunction::sample(d, [](const RealPoint& x) { return x(0) + 2 * x(1); });
  const std::string csv = io::grid_csv(u);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "index,x1,y1,value");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> f;
    std::getline(ls, tok, ',');
    const std::size_t idx = std::stoul(tok);
    while (std::getline(ls, tok, ',')) f.push_back(std::stod(tok));
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f[0], d->coords(idx)(0));
    EXPECT_EQ(f[2], u.values[idx]);
  }
  std::size_t dom = 0;
  for (std::size_t i = 0; i < d->size(); ++i) dom += d->in_domain(i);
  EXPECT_EQ(rows, dom);

  auto d2 = make_domain(2, ShapeSpec::ball(1.0), 9, 1.0);
  EXPECT_EQ(io::grid_csv(GridFunction::constant(d2, 0.0)).substr(0, 24), "index,x1,y1,x2,y2,value\n");
}

TEST(Io, CacheRoundTripAndHeader) {
  auto d = make_domain(1, ShapeSpec::perturbed_ball(0.05), 17);
  const auto u = GridFunction::sample(d, [](const RealPoint& x) { return std::sin(x(0)) - x(1); });
  const std::string buf = io::encode_cache(u);
  ASSERT_EQ(buf.size(), 4 + 2 + 2 + 4 + 8 + 8 * d->size());
  EXPECT_EQ(buf.substr(0, 4), "CMAG");
  std::uint16_t ver = 0;
  std::memcpy(&ver, buf.data() + 4, 2);
  EXPECT_EQ(ver, 1);
  const auto c = io::decode_cache(buf);
  EXPECT_EQ(c.header.n, 1);
  EXPECT_EQ(c.header.resolution, 17u);
  EXPECT_EQ(c.header.h, d->h());
  for (std::size_t i = 0; i < d->size(); ++i) {
    if (d->in_domain(i))
      EXPECT_EQ(c.values[i], u.values[i]);
    else
      EXPECT_TRUE(std::isnan(c.values[i]));
  }
}

TEST(Io, CorruptCachesAreRejected) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 9);
  const std::string good = io::encode_cache(GridFunction::constant(d, 1.0));
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(io::decode_cache(bad), FormatError);
  bad = good;
  bad[4] = 7;
  EXPECT_THROW(io::decode_cache(bad), FormatError);
  EXPECT_THROW(io::decode_cache(good.substr(0, good.size() - 3)), FormatError);
  EXPECT_THROW(io::decode_cache(good.substr(0, 10)), FormatError);
  EXPECT_THROW(io::decode_cache(good + "x"), FormatError);
}

TEST(Io, InstanceRoundTrip) {
  const auto dir = tmp_dir("instance");
  auto d = make_domain(1, ShapeSpec::perturbed_ball(0.05), 17);
  auto r = solve_dirichlet(d, GridFunction::constant(d, 1.0), zero_boundary_data(d));
  const std::string path = (dir / "u.cmag").string();
  io::write_instance(path, r.u, "1", 0.0);
  EXPECT_TRUE(std::filesystem::exists(path + ".meta.json"));
  const auto inst = io::read_instance(path);
  EXPECT_EQ(inst.f_expr, "1");
  EXPECT_EQ(inst.shape.kind, d->shape().kind);
  EXPECT_EQ(inst.u.domain->h(), d->h());
  for (std::size_t i = 0; i < d->size(); ++i)
    if (d->in_domain(i)) EXPECT_EQ(inst.u.values[i], r.u.values[i]);
  EXPECT_THROW(io::read_instance((dir / "missing.cmag").string()), FormatError);
}

TEST(Io, ChainJsonRoundTrip) {
  auto d = make_domain(1, ShapeSpec::perturbed_ball(0.05), 33);
  const auto g = zero_boundary_data(d);
  auto f = GridFunction::sample(d, [](const RealPoint& x) { return 1.0 + 0.01 * std::cos(4 * x(0)); });
  auto sol = solve_dirichlet(d, f, g);
  auto v0 = solve_dirichlet(d, GridFunction::constant(d, 1.0), g);
  auto u = std::make_shared<const GridFunction>(sol.u);
  ChainConfig cfg;
  cfg.k_max = 2;
  cfg.level_resolution = 17;
  const auto chain = construct_section_chain(u, v0.u, d->nearest_node(pt({0.2, 0.1})), cfg);
  const io::json j = io::to_json(chain);
  const auto back = io::chain_from_json(io::json::parse(j.dump()));
  EXPECT_EQ(io::to_json(back).dump(), j.dump());
  ASSERT_EQ(back.levels.size(), chain.levels.size());
  for (std::size_t k = 0; k < chain.levels.size(); ++k) {
    EXPECT_EQ(back.levels[k].T, chain.levels[k].T);
    EXPECT_EQ(back.levels[k].radius, chain.levels[k].radius);
  }
}
