#include "oracles.hpp"
#include "qom/graph.hpp"

#include <doctest.h>

#include <set>

using namespace qom;

namespace {

Metasurface single(double center, double q = 330.0, double axis = 0.0, std::string name = "ms") {
  Metasurface m;
  m.name = std::move(name);
  m.resonances.push_back({"r" + std::to_string(static_cast<int>(center)), center, q, axis});
  return m;
}

PumpConfig pump(double nm, std::optional<std::string> group = "comb", double pol = 0.0) {
  PumpConfig p;
  p.wavelength_nm = nm;
  p.power_mW = 1.0;
  p.pol_deg = pol;
  p.coherent_group_id = std::move(group);
  return p;
}

EntanglementGraph manual(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges) {
  EntanglementGraph g;
  for (std::size_t v = 0; v < n; ++v) {
    WavelengthBin b;
    b.center_nm = 1300.0 + 20.0 * static_cast<double>(v);
    b.tolerance_nm = 1.0;
    g.vertices.push_back(b);
  }
  std::size_t k = 0;
  for (auto [a, b] : edges) g.edges.push_back({std::min(a, b), std::max(a, b), k++, 700.0, {}, false});
  return g;
}

std::set<std::tuple<long, long, std::size_t>> edge_set(const EntanglementGraph& g) {
  std::set<std::tuple<long, long, std::size_t>> s;
  for (const auto& e : g.edges) {
    s.insert({std::lround(g.vertices[e.a].center_nm * 1000), std::lround(g.vertices[e.b].center_nm * 1000),
              e.pump_index});
  }
  return s;
}

}  // namespace

TEST_CASE("two pumps on one resonance make a three-vertex path") {
  const std::vector<Metasurface> ms{single(1359.0)};
  const std::vector<PumpConfig> ps{pump(725.0), pump(718.0)};
  const auto g = build_graph(ms, ps);
  REQUIRE(g.vertices.size() == 3);
  CHECK(g.vertices[0].center_nm == doctest::Approx(1359.0));
  CHECK(g.vertices[1].center_nm == doctest::Approx(1522.2).epsilon(0.05 / 1522.2));
  CHECK(g.vertices[2].center_nm == doctest::Approx(1554.1).epsilon(0.05 / 1554.1));
  CHECK(g.vertices[0].on_resonance());
  CHECK_FALSE(g.vertices[2].on_resonance());
  REQUIRE(g.edges.size() == 2);
  CHECK(g.classification.label() == "path-3");
  CHECK_FALSE(g.classification.has_incoherent_edges);
  for (const auto& e : g.edges) {
    const double via = e.pump_wavelength_nm;
    CHECK(((e.b == 2 && via == 725.0) || (e.b == 1 && via == 718.0)));
  }
  const Eigen::MatrixXi adj = g.adjacency();
  CHECK(adj(0, 1) == 1);
  CHECK(adj(0, 2) == 1);
  CHECK(adj(1, 2) == 0);
}

TEST_CASE("a third pump on the shared mode makes a star") {
  const std::vector<Metasurface> ms{single(1359.0)};
  const std::vector<PumpConfig> ps{pump(725.0), pump(718.0), pump(710.0)};
  const auto g = build_graph(ms, ps);
  CHECK(g.classification.kind == GraphKind::kStar);
  CHECK(g.classification.label() == "star-4");
}

TEST_CASE("degenerate pump gives one flagged vertex") {
  const std::vector<Metasurface> ms{single(1446.0)};
  const std::vector<PumpConfig> ps{pump(723.0)};
  const auto g = build_graph(ms, ps);
  REQUIRE(g.vertices.size() == 1);
  CHECK(g.vertices[0].degenerate);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].self_loop());
  CHECK(g.classification.label() == "single-edge");
}

TEST_CASE("classifier on hand-made graphs") {
  CHECK(classify(manual(3, {{0, 1}, {1, 2}})).label() == "path-3");
  CHECK(classify(manual(4, {{0, 1}, {1, 2}, {2, 3}})).label() == "path-4");
  CHECK(classify(manual(4, {{0, 1}, {0, 2}, {0, 3}})).label() == "star-4");
  CHECK(classify(manual(5, {{2, 0}, {2, 1}, {2, 3}, {2, 4}})).label() == "star-5");
  CHECK(classify(manual(3, {{0, 1}, {1, 2}, {0, 2}})).label() == "general");
  CHECK(classify(manual(2, {{0, 1}})).label() == "single-edge");
  CHECK(classify(manual(2, {})).label() == "empty");
  CHECK(classify(manual(4, {{0, 1}, {2, 3}})).label() == "general");
  CHECK(classify(manual(3, {{0, 1}, {1, 1}, {1, 2}})).label() == "general");
}

TEST_CASE("pumps from different groups are flagged incoherent") {
  const std::vector<Metasurface> ms{single(1359.0)};
  const std::vector<PumpConfig> mixed{pump(725.0, "x"), pump(718.0, "y")};
  const auto g = build_graph(ms, mixed);
  CHECK(g.classification.has_incoherent_edges);
  CHECK(g.classification.kind == GraphKind::kPath);  // annotated, not rejected
  for (const auto& e : g.edges) CHECK(e.incoherent);
  const std::vector<PumpConfig> unnamed{pump(725.0, std::nullopt), pump(718.0, std::nullopt)};
  CHECK(build_graph(ms, unnamed).classification.has_incoherent_edges);
  CHECK(to_dot(g).find("dashed") != std::string::npos);
}

TEST_CASE("uncoupled resonances and resonances below the pump stay dark") {
  Metasurface m = single(1359.0, 330.0, 0.0);
  m.resonances.push_back({"md", 1429.0, 1000.0, 90.0});
  const std::vector<Metasurface> ms{m};
  const std::vector<PumpConfig> aligned{pump(725.0, "comb", 0.0)};
  CHECK(build_graph(ms, aligned).edges.size() == 1);
  const std::vector<PumpConfig> tilted{pump(725.0, "comb", 40.0)};
  const auto both = build_graph(ms, tilted);
  CHECK(both.edges.size() == 2);
  CHECK(both.vertices.size() == 4);
  CHECK(both.classification.label() == "general");

  const std::vector<PumpConfig> blue{pump(1400.0)};
  const auto skipped = build_graph(ms, blue);
  CHECK(skipped.edges.empty());
  CHECK_FALSE(skipped.warnings.empty());
  CHECK_THROWS_AS(build_graph(std::span<const Metasurface>{}, aligned), std::invalid_argument);
}

TEST_CASE("every edge conserves energy within the bin tolerance") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> lam(1250.0, 1650.0), pnm(640.0, 760.0), q(100.0, 2000.0), ax(0.0, 180.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Metasurface> ms(1 + trial % 3);
    for (auto& m : ms) {
      m.name = "m";
      for (int r = 0; r < 1 + trial % 4; ++r) m.resonances.push_back({"r", lam(rng), q(rng), ax(rng)});
    }
    std::vector<PumpConfig> ps;
    for (int k = 0; k < 1 + trial % 5; ++k) ps.push_back(pump(pnm(rng), "g", ax(rng)));
    const auto g = build_graph(ms, ps);
    for (const auto& e : g.edges) {
      const auto& a = g.vertices[e.a];
      const auto& b = g.vertices[e.b];
      REQUIRE(std::abs(1.0 / a.center_nm + 1.0 / b.center_nm - 1.0 / e.pump_wavelength_nm) <=
              energy_tolerance_inv_nm(a, b));
      REQUIRE((a.on_resonance() || b.on_resonance()));
    }
    for (std::size_t v = 1; v < g.vertices.size(); ++v) REQUIRE(g.vertices[v - 1].center_nm < g.vertices[v].center_nm);
  }
}

TEST_CASE("planning pumps for target edges") {
  const std::vector<Metasurface> ms{single(1359.0)};
  const auto one = plan_pumps({{1359.0, 1554.1}, {{0, 1}}}, ms);
  REQUIRE(one.feasible());
  CHECK(one.pumps[0].wavelength_nm == doctest::Approx(725.0).epsilon(1e-4));

  const TargetGraph path{{1554.1, 1359.0, 1522.2}, {{0, 1}, {1, 2}}};
  const auto plan = plan_pumps(path, ms);
  REQUIRE(plan.pumps.size() == 2);
  CHECK(plan.pumps[0].wavelength_nm == doctest::Approx(725.0).epsilon(1e-4));
  CHECK(plan.pumps[1].wavelength_nm == doctest::Approx(718.0).epsilon(1e-4));
  const auto pumps = plan.pump_configs();
  const auto built = build_graph(ms, pumps);
  CHECK(embeds(built, path));
  CHECK(built.classification.label() == "path-3");

  const std::vector<Metasurface> at1400{single(1400.0)};
  const auto degenerate = plan_pumps({{1400.0}, {{0, 0}}}, at1400);
  REQUIRE(degenerate.pumps.size() == 1);
  CHECK(degenerate.pumps[0].wavelength_nm == doctest::Approx(700.0));
  CHECK(degenerate.pumps[0].degenerate);

  const auto off = plan_pumps({{1300.0, 1500.0}, {{0, 1}}}, ms);
  CHECK_FALSE(off.feasible());
  CHECK(off.infeasible_edges == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(plan_pumps({{1300.0}, {{0, 3}}}, ms), std::invalid_argument);
}

TEST_CASE("plan then build reproduces random feasible targets") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = oracle::random_feasible_target(rng);
    const auto plan = plan_pumps(t.target, t.metasurfaces);
    REQUIRE(plan.feasible());
    const auto pumps = plan.pump_configs();
    REQUIRE(embeds(build_graph(t.metasurfaces, pumps), t.target));
  }
}

TEST_CASE("several metasurfaces under one pump form the union of their graphs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lam(1300.0, 1600.0), q(200.0, 1500.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Metasurface> ms;
    for (int k = 0; k < 2 + trial % 3; ++k) {
      ms.push_back(single(lam(rng), q(rng), 0.0, "m" + std::to_string(k)));
    }
    const std::vector<PumpConfig> ps{pump(700.0 + trial % 20)};
    const auto joint = build_graph(ms, ps);
    std::vector<EntanglementGraph> parts;
    for (const auto& m : ms) parts.push_back(build_graph(std::span(&m, 1), ps));
    const auto pooled = graph_union(parts);
    REQUIRE(pooled.vertices.size() == joint.vertices.size());
    for (std::size_t v = 0; v < joint.vertices.size(); ++v) {
      REQUIRE(pooled.vertices[v].center_nm == doctest::Approx(joint.vertices[v].center_nm));
      REQUIRE(pooled.vertices[v].members.size() == joint.vertices[v].members.size());
    }
    REQUIRE(edge_set(pooled) == edge_set(joint));
    REQUIRE(pooled.classification.label() == joint.classification.label());
  }
}

TEST_CASE("DOT output lists every vertex and edge") {
  const std::vector<Metasurface> ms{single(1359.0)};
  const std::vector<PumpConfig> ps{pump(725.0), pump(718.0)};
  const auto dot = to_dot(build_graph(ms, ps));
  CHECK(dot.rfind("graph ", 0) == 0);
  CHECK(dot.find("path-3") != std::string::npos);
  std::size_t dashes = 0;
  for (auto p = dot.find("--"); p != std::string::npos; p = dot.find("--", p + 2)) ++dashes;
  CHECK(dashes == 2);
  CHECK(dot.find("doublecircle") != std::string::npos);
}
