#include "qom/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace qom {

namespace {

std::string fmt_nm(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", x);
  return buf;
}

// Something to be merged: a single member, or a whole bin of another graph.
struct Item {
  double center_nm;
  double tolerance_nm;
  std::vector<BinMember> members;
  bool degenerate = false;
};

// An edge between items, before merging.
struct RawEdge {
  std::size_t a, b;
  std::size_t pump_index;
  double pump_nm;
  std::optional<std::string> group;
};

WavelengthBin make_bin(std::vector<BinMember> members, bool degenerate) {
  WavelengthBin bin;
  std::sort(members.begin(), members.end(), [](const BinMember& x, const BinMember& y) {
    return std::tie(x.center_nm, x.tag) < std::tie(y.center_nm, y.tag);
  });
  double on_sum = 0.0, all_sum = 0.0;
  int on_n = 0;
  bin.tolerance_nm = members.front().tolerance_nm;
  for (const auto& m : members) {
    all_sum += m.center_nm;
    if (m.on_resonance) {
      on_sum += m.center_nm;
      ++on_n;
    }
    bin.tolerance_nm = std::min(bin.tolerance_nm, m.tolerance_nm);
  }
  bin.center_nm = on_n > 0 ? on_sum / on_n : all_sum / static_cast<double>(members.size());
  bin.members = std::move(members);
  bin.degenerate = degenerate;
  return bin;
}

EntanglementGraph merge(std::vector<Item> items, const std::vector<RawEdge>& raw,
                        std::vector<std::string> warnings) {
  EntanglementGraph g;
  g.warnings = std::move(warnings);
  if (items.empty()) {
    g.classification = classify(g);
    return g;
  }
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return items[x].center_nm < items[y].center_nm; });

  // Single linkage over sorted neighbours.
  std::vector<std::size_t> bin_of(items.size());
  std::vector<std::vector<std::size_t>> groups{{order[0]}};
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = items[order[k - 1]];
    const auto& cur = items[order[k]];
    if (cur.center_nm - prev.center_nm > std::min(prev.tolerance_nm, cur.tolerance_nm)) groups.emplace_back();
    groups.back().push_back(order[k]);
  }
  for (std::size_t v = 0; v < groups.size(); ++v) {
    std::vector<BinMember> members;
    bool degenerate = false;
    for (auto i : groups[v]) {
      bin_of[i] = v;
      members.insert(members.end(), items[i].members.begin(), items[i].members.end());
      degenerate = degenerate || items[i].degenerate;
    }
    g.vertices.push_back(make_bin(std::move(members), degenerate));
  }

  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
  for (const auto& e : raw) {
    auto a = bin_of[e.a], b = bin_of[e.b];
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b, e.pump_index}).second) continue;
    const auto& va = g.vertices[a];
    const auto& vb = g.vertices[b];
    const double mismatch = std::abs(1.0 / va.center_nm + 1.0 / vb.center_nm - 1.0 / e.pump_nm);
    if (mismatch > energy_tolerance_inv_nm(va, vb)) {
      g.warnings.push_back("dropped edge " + fmt_nm(va.center_nm) + "-" + fmt_nm(vb.center_nm) + " via " +
                           fmt_nm(e.pump_nm) + " nm: bins merged beyond energy conservation");
      continue;
    }
    if (a == b) g.vertices[a].degenerate = true;
    g.edges.push_back({a, b, e.pump_index, e.pump_nm, e.group, false});
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& x, const GraphEdge& y) {
    return std::tie(x.a, x.b, x.pump_index) < std::tie(y.a, y.b, y.pump_index);
  });

  // Coupling through a shared mode needs the pumps to be mutually coherent.
  for (auto& e : g.edges) {
    for (const auto& f : g.edges) {
      const bool touches = e.a == f.a || e.a == f.b || e.b == f.a || e.b == f.b;
      if (!touches || e.pump_index == f.pump_index) continue;
      if (!e.coherent_group_id || !f.coherent_group_id || *e.coherent_group_id != *f.coherent_group_id) {
        e.incoherent = true;
      }
    }
  }
  g.classification = classify(g);
  return g;
}

}  // namespace

bool WavelengthBin::on_resonance() const {
  return std::any_of(members.begin(), members.end(), [](const BinMember& m) { return m.on_resonance; });
}

Eigen::MatrixXi EntanglementGraph::adjacency() const {
  const auto n = static_cast<Eigen::Index>(vertices.size());
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(n, n);
  for (const auto& e : edges) {
    const auto a = static_cast<Eigen::Index>(e.a), b = static_cast<Eigen::Index>(e.b);
    m(a, b) += 1;
    if (a != b) m(b, a) += 1;
  }
  return m;
}

std::optional<std::size_t> EntanglementGraph::find_vertex(double lambda_nm, double slack_nm) const {
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    const double d = std::abs(vertices[v].center_nm - lambda_nm);
    if (d <= vertices[v].tolerance_nm + slack_nm && (!best || d < best_d)) {
      best = v;
      best_d = d;
    }
  }
  return best;
}

double energy_tolerance_inv_nm(const WavelengthBin& a, const WavelengthBin& b) {
  // d(1/x) = dx / x^2, taken at the worst edge of each bin.
  auto slack = [](const WavelengthBin& v) {
    const double lo = v.center_nm - v.tolerance_nm;
    return lo > 0.0 ? v.tolerance_nm / (lo * lo) : INFINITY;
  };
  return slack(a) + slack(b) + 1e-12 / std::min(a.center_nm, b.center_nm);
}

EntanglementGraph build_graph(std::span<const Metasurface> metasurfaces, std::span<const PumpConfig> pumps,
                              const GraphOptions& options) {
  if (metasurfaces.empty()) throw std::invalid_argument("build_graph: no metasurfaces");
  if (pumps.empty()) throw std::invalid_argument("build_graph: no pumps");
  if (options.tolerance_nm && !(*options.tolerance_nm > 0.0)) {
    throw std::invalid_argument("build_graph: tolerance must be positive");
  }
  std::vector<Item> items;
  std::vector<RawEdge> raw;
  std::vector<std::string> warnings;
  for (std::size_t p = 0; p < pumps.size(); ++p) {
    const auto& pump = pumps[p];
    validate(pump);
    for (const auto& ms : metasurfaces) {
      for (const auto& r : ms.resonances) {
        if (polarization_coupling(r, pump.pol_deg) < options.min_coupling) continue;
        const double lr = r.center_wavelength_nm;
        if (lr <= pump.wavelength_nm) {
          warnings.push_back("skipped resonance " + r.label + " at " + fmt_nm(lr) + " nm: not above pump " +
                             fmt_nm(pump.wavelength_nm) + " nm");
          continue;
        }
        const double li = idler_wavelength(pump.wavelength_nm, lr);
        const double tol_r = options.tolerance_nm.value_or(0.5 * r.fwhm_nm());
        const double tol_i = options.tolerance_nm.value_or(tol_r * (li / lr) * (li / lr));
        const std::string where = ms.name.empty() ? r.label : ms.name + "/" + r.label;
        const std::size_t ir = items.size();
        items.push_back({lr, tol_r, {{lr, tol_r, where, true}}});
        items.push_back({li, tol_i, {{li, tol_i, "idler:" + where + "@" + fmt_nm(pump.wavelength_nm), false}}});
        raw.push_back({ir, ir + 1, p, pump.wavelength_nm, pump.coherent_group_id});
      }
    }
  }
  return merge(std::move(items), raw, std::move(warnings));
}

EntanglementGraph graph_union(std::span<const EntanglementGraph> graphs) {
  std::vector<Item> items;
  std::vector<RawEdge> raw;
  std::vector<std::string> warnings;
  for (const auto& g : graphs) {
    const std::size_t base = items.size();
    for (const auto& v : g.vertices) items.push_back({v.center_nm, v.tolerance_nm, v.members, v.degenerate});
    for (const auto& e : g.edges) {
      raw.push_back({base + e.a, base + e.b, e.pump_index, e.pump_wavelength_nm, e.coherent_group_id});
    }
    warnings.insert(warnings.end(), g.warnings.begin(), g.warnings.end());
  }
  return merge(std::move(items), raw, std::move(warnings));
}

std::string Classification::label() const {
  switch (kind) {
    case GraphKind::kEmpty: return "empty";
    case GraphKind::kSingleEdge: return "single-edge";
    case GraphKind::kPath: return "path-" + std::to_string(vertex_count);
    case GraphKind::kStar: return "star-" + std::to_string(vertex_count);
    case GraphKind::kGeneral: return "general";
  }
  return "general";
}

Classification classify(const EntanglementGraph& graph) {
  Classification c;
  c.has_incoherent_edges =
      std::any_of(graph.edges.begin(), graph.edges.end(), [](const GraphEdge& e) { return e.incoherent; });

  std::set<std::pair<std::size_t, std::size_t>> simple;
  std::set<std::size_t> touched;
  bool loops = false;
  for (const auto& e : graph.edges) {
    touched.insert(e.a);
    touched.insert(e.b);
    if (e.self_loop()) {
      loops = true;
    } else {
      simple.insert({e.a, e.b});
    }
  }
  c.vertex_count = touched.size();
  const std::size_t m = simple.size();
  if (m == 0) {
    c.kind = loops ? GraphKind::kSingleEdge : GraphKind::kEmpty;
    return c;
  }
  if (loops) {
    c.kind = GraphKind::kGeneral;
    return c;
  }
  if (m == 1) {
    c.kind = GraphKind::kSingleEdge;
    return c;
  }

  std::map<std::size_t, std::vector<std::size_t>> adj;
  for (const auto& [a, b] : simple) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  const std::size_t n = adj.size();
  std::set<std::size_t> reached{adj.begin()->first};
  std::vector<std::size_t> stack{adj.begin()->first};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (auto w : adj[v]) {
      if (reached.insert(w).second) stack.push_back(w);
    }
  }
  const bool tree = reached.size() == n && m == n - 1;
  std::size_t max_degree = 0;
  for (const auto& [v, nb] : adj) max_degree = std::max(max_degree, nb.size());
  if (tree && max_degree <= 2) {
    c.kind = GraphKind::kPath;
  } else if (tree && max_degree == n - 1) {
    c.kind = GraphKind::kStar;
  } else {
    c.kind = GraphKind::kGeneral;
  }
  return c;
}

std::vector<PumpConfig> PumpPlan::pump_configs(double power_mW) const {
  std::vector<PumpConfig> out;
  for (const auto& p : pumps) {
    PumpConfig c;
    c.wavelength_nm = p.wavelength_nm;
    c.power_mW = power_mW;
    c.pol_deg = p.pol_deg;
    c.coherent_group_id = "plan";
    out.push_back(c);
  }
  return out;
}

PumpPlan plan_pumps(const TargetGraph& target, std::span<const Metasurface> metasurfaces,
                    std::optional<double> tolerance_nm) {
  PumpPlan plan;
  auto resonance_near = [&](double lambda) -> const Resonance* {
    const Resonance* best = nullptr;
    double best_d = INFINITY;
    for (const auto& ms : metasurfaces) {
      for (const auto& r : ms.resonances) {
        const double d = std::abs(r.center_wavelength_nm - lambda);
        if (d <= tolerance_nm.value_or(0.5 * r.fwhm_nm()) && d < best_d) {
          best = &r;
          best_d = d;
        }
      }
    }
    return best;
  };
  for (std::size_t k = 0; k < target.edges.size(); ++k) {
    const auto [i, j] = target.edges[k];
    if (i >= target.vertices_nm.size() || j >= target.vertices_nm.size()) {
      throw std::invalid_argument("plan_pumps: edge " + std::to_string(k) + " references a missing vertex");
    }
    const double a = target.vertices_nm[i], b = target.vertices_nm[j];
    const Resonance* r = resonance_near(a);
    if (!r) r = resonance_near(b);
    if (!r) {
      plan.infeasible_edges.push_back(k);
      continue;
    }
    const double tol = tolerance_nm.value_or(0.5 * r->fwhm_nm());
    plan.pumps.push_back({pump_wavelength_for(a, b), r->pol_axis_deg, k, r->label, std::abs(a - b) <= tol});
  }
  return plan;
}

bool embeds(const EntanglementGraph& graph, const TargetGraph& target, double slack_nm) {
  for (const auto& [i, j] : target.edges) {
    const auto a = graph.find_vertex(target.vertices_nm.at(i), slack_nm);
    const auto b = graph.find_vertex(target.vertices_nm.at(j), slack_nm);
    if (!a || !b) return false;
    const auto lo = std::min(*a, *b), hi = std::max(*a, *b);
    const bool found = std::any_of(graph.edges.begin(), graph.edges.end(),
                                   [&](const GraphEdge& e) { return e.a == lo && e.b == hi; });
    if (!found) return false;
  }
  return true;
}

std::string to_dot(const EntanglementGraph& graph) {
  std::string s = "graph entanglement {\n  label=\"" + graph.classification.label() + "\";\n";
  for (std::size_t v = 0; v < graph.vertices.size(); ++v) {
    const auto& bin = graph.vertices[v];
    s += "  v" + std::to_string(v) + " [label=\"" + fmt_nm(bin.center_nm) + " nm\"";
    if (bin.on_resonance()) s += ", shape=doublecircle";
    if (bin.degenerate) s += ", style=filled";
    s += "];\n";
  }
  for (const auto& e : graph.edges) {
    s += "  v" + std::to_string(e.a) + " -- v" + std::to_string(e.b) + " [label=\"" +
         fmt_nm(e.pump_wavelength_nm) + "\"";
    if (e.incoherent) s += ", style=dashed";
    s += "];\n";
  }
  return s + "}\n";
}

}  // namespace qom
