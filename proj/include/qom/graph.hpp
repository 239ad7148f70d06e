#pragma once

#include "qom/optics.hpp"
#include "qom/spdc.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qom {

/// One wavelength that entered a bin before merging.
struct BinMember {
  double center_nm = 0.0;
  double tolerance_nm = 0.0;
  std::string tag;  // resonance label, or "idler:<label>@<pump>"
  bool on_resonance = false;
};

/// A frequency mode; one graph vertex.
struct WavelengthBin {
  double center_nm = 0.0;
  double tolerance_nm = 0.0;
  std::vector<BinMember> members;
  bool degenerate = false;  // both photons of some pair land here

  bool on_resonance() const;
};

struct GraphEdge {
  std::size_t a = 0;  // vertex indices, a <= b
  std::size_t b = 0;
  std::size_t pump_index = 0;
  double pump_wavelength_nm = 0.0;
  std::optional<std::string> coherent_group_id;
  /// Shares a vertex with an edge driven by a pump outside this edge's
  /// coherence group.
  bool incoherent = false;

  bool self_loop() const { return a == b; }
};

enum class GraphKind { kEmpty, kSingleEdge, kPath, kStar, kGeneral };

struct Classification {
  GraphKind kind = GraphKind::kEmpty;
  std::size_t vertex_count = 0;  // vertices touched by an edge
  bool has_incoherent_edges = false;

  /// "single-edge", "path-3", "star-4", "general", "empty".
  std::string label() const;
};

struct EntanglementGraph {
  std::vector<WavelengthBin> vertices;  // sorted by center
  std::vector<GraphEdge> edges;
  Classification classification;
  std::vector<std::string> warnings;

  /// Symmetric edge multiplicity matrix; self-loops on the diagonal.
  Eigen::MatrixXi adjacency() const;
  /// Index of the bin within its tolerance of `lambda_nm`, if any.
  std::optional<std::size_t> find_vertex(double lambda_nm, double slack_nm = 0.0) const;
};

struct GraphOptions {
  /// Merge radius for every bin; defaults to half the resonance FWHM
  /// (carried over to the derived idler by the energy-conservation slope).
  std::optional<double> tolerance_nm;
  /// Resonances with cos^2(pump pol - axis) below this are not excited.
  double min_coupling = 0.01;
};

/// Pairwise-coupling graph: every pump with every excited resonance emits a
/// pair (resonance, idler); coinciding wavelengths merge into one vertex.
/// Combinations with the resonance at or below the pump wavelength are
/// skipped with a warning. Throws std::invalid_argument for empty inputs.
EntanglementGraph build_graph(std::span<const Metasurface> metasurfaces, std::span<const PumpConfig> pumps,
                              const GraphOptions& options = {});

/// Several graphs (e.g. separate metasurfaces under the same pumps) seen as
/// one: all bin members are pooled and merged again.
EntanglementGraph graph_union(std::span<const EntanglementGraph> graphs);

/// Path and star are decided on the simple graph (no loops, no multi-edges);
/// a two-edge path is reported as path-3, stars need three or more edges.
/// A lone degenerate pair counts as a single edge.
Classification classify(const EntanglementGraph& graph);

/// Slack on 1/a + 1/b - 1/p for an edge between two bins.
double energy_tolerance_inv_nm(const WavelengthBin& a, const WavelengthBin& b);

struct TargetGraph {
  std::vector<double> vertices_nm;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
};

struct PlannedPump {
  double wavelength_nm = 0.0;
  double pol_deg = 0.0;  // aligned with the resonance that anchors the edge
  std::size_t edge_index = 0;
  std::string resonance_label;
  bool degenerate = false;
};

struct PumpPlan {
  std::vector<PlannedPump> pumps;
  std::vector<std::size_t> infeasible_edges;

  bool feasible() const { return infeasible_edges.empty(); }
  std::vector<PumpConfig> pump_configs(double power_mW = 1.0) const;
};

/// One pump per target edge, (1/a + 1/b)^-1, as long as one endpoint sits
/// on a resonance (within the tolerance, default FWHM/2). Other edges are
/// reported as infeasible.
PumpPlan plan_pumps(const TargetGraph& target, std::span<const Metasurface> metasurfaces,
                    std::optional<double> tolerance_nm = {});

/// True when every target edge appears in `graph` between bins within
/// `slack_nm` (plus the bin tolerance) of the target wavelengths.
bool embeds(const EntanglementGraph& graph, const TargetGraph& target, double slack_nm = 0.0);

/// DOT text for external visualization.
std::string to_dot(const EntanglementGraph& graph);

}  // namespace qom
