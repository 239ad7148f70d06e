// qomsim: scenario-driven photon-pair source simulator.
#include "qom/pipeline.hpp"
#include "qom/stream_io.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string scenario;
  std::string out = "qom-out";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string format = "csv";
  std::vector<std::string> streams;
  bool force = false;
  bool binary = false;
  bool events = false;
  double duration = 0.0;
  std::string param;
  std::string values;
  std::string range;
  std::string g2;
};

struct Context {
  qom::Scenario scenario;
  std::optional<std::uint64_t> seed_override;
  std::string hash;
  qom::TableFormat format;
  std::optional<double> duration;
};

Context load(const Flags& f, const CLI::Option* seed_opt, const CLI::Option* duration_opt) {
  Context c;
  c.scenario = qom::load_scenario(f.scenario);
  if (seed_opt->count()) c.seed_override = f.seed;
  c.hash = qom::scenario_hash(c.scenario, c.seed_override);
  c.format = f.format == "json" ? qom::TableFormat::kJson : qom::TableFormat::kCsv;
  if (duration_opt->count()) c.duration = f.duration;
  return c;
}

std::string ext(qom::TableFormat f) { return f == qom::TableFormat::kJson ? ".json" : ".csv"; }

void add_simulation(qom::Bundle& bundle, const Context& c, const qom::Simulation& sim, bool binary, bool events) {
  bundle.add_json("summary.json", sim.summary);
  bundle.add("streams.csv", qom::streams_csv(sim.streams, {c.hash, sim.duration_s}));
  if (binary) {
    for (const auto& s : sim.streams) bundle.add(s.channel_id + ".f64", qom::stream_binary(s));
  }
  if (events) bundle.add("events.csv", qom::events_table(sim.events, c.hash));
  const auto& window = c.scenario.generation.model.window;
  const auto grid = Eigen::ArrayXd::LinSpaced(static_cast<Eigen::Index>(std::lround((window.hi_nm - window.lo_nm) / 0.1)) + 1,
                                              window.lo_nm, window.hi_nm);
  for (const auto& m : c.scenario.metasurfaces) {
    const auto t = qom::transmission_spectrum(m, grid, c.scenario.pumps.front().pol_deg);
    bundle.add("transmission_" + m.name + ".csv", qom::transmission_table(t, c.hash));
  }
}

void add_analysis(qom::Bundle& bundle, const Context& c, const qom::Analysis& a) {
  for (const auto& [name, h] : a.histograms) {
    bundle.add("histogram_" + name + ext(c.format), qom::histogram_table(h, c.hash, c.format));
  }
  for (const auto& [name, s] : a.spectra) {
    bundle.add("spectrum_" + name + ext(c.format), qom::spectrum_table(s, c.hash, c.format));
  }
  if (c.format == qom::TableFormat::kCsv && !a.g2.empty()) bundle.add("g2.csv", qom::estimates_table(a, c.hash));
  bundle.add_json("report.json", qom::analysis_report(c.scenario, a));
}

void add_graph(qom::Bundle& bundle, const Context& c) {
  const qom::GraphRequest req = c.scenario.graph.value_or(qom::GraphRequest{});
  const auto graph = qom::build_graph(c.scenario.metasurfaces, c.scenario.pumps, req.options);
  bundle.add_json("graph.json", qom::to_json(graph));
  bundle.add("graph.dot", "// scenario_hash=" + c.hash + "\n" + qom::to_dot(graph));
  if (req.target) {
    const auto plan = qom::plan_pumps(*req.target, c.scenario.metasurfaces, req.options.tolerance_nm);
    auto report = qom::to_json(plan, *req.target);
    if (!plan.pumps.empty()) {
      auto planned = c.scenario.pumps.front();
      std::vector<qom::PumpConfig> pumps;
      for (auto p : plan.pump_configs(planned.power_mW)) pumps.push_back(p);
      report["round_trip"] =
          qom::embeds(qom::build_graph(c.scenario.metasurfaces, pumps, req.options), *req.target);
    }
    bundle.add_json("plan.json", report);
  }
}

std::vector<qom::TimestampStream> streams_for(const Flags& f, const Context& c) {
  std::vector<std::filesystem::path> paths(f.streams.begin(), f.streams.end());
  return qom::load_streams(paths, c.hash, f.force, c.duration ? c.duration : std::optional(c.scenario.duration_s));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate and analyze photon pairs from resonant metasurfaces"};
  app.set_version_flag("--version", qom::library_version());
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--scenario", f.scenario, "Scenario JSON file")->check(CLI::ExistingFile);
  app.add_option("--out", f.out, "Output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", f.seed, "Root seed (overrides the scenario)");
  app.add_option("--threads", f.threads, "Worker threads")->check(CLI::Range(1u, 256u))->capture_default_str();
  app.add_option("--format", f.format, "Table format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  auto* duration_opt = app.add_option("--duration", f.duration, "Duration override in seconds")
                           ->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "Generate pairs and detector timestamp streams");
  simulate->add_flag("--binary", f.binary, "Also write <channel>.f64 little-endian streams");
  simulate->add_flag("--events", f.events, "Also write the generated pair events");
  auto* analyze = app.add_subcommand("analyze", "Histograms, g2 and Cauchy-Schwarz from timestamp streams");
  analyze->add_option("--streams", f.streams, "Stream files (CSV or .f64)")->required()->check(CLI::ExistingFile);
  analyze->add_flag("--force", f.force, "Accept streams from another scenario");
  auto* spectrum = app.add_subcommand("spectrum", "Reconstruct emission spectra from coincidence delays");
  spectrum->add_option("--streams", f.streams, "Stream files; simulated when omitted")->check(CLI::ExistingFile);
  spectrum->add_flag("--force", f.force, "Accept streams from another scenario");
  auto* graph = app.add_subcommand("graph", "Build the entanglement graph and plan pumps for a target");
  auto* scan = app.add_subcommand("scan", "Sweep pump power or detuning");
  scan->add_option("--param", f.param, "pump_power or detuning")->check(CLI::IsMember({"pump_power", "detuning"}));
  scan->add_option("--values", f.values, "List, a..b or a..b:n");
  scan->add_option("--range", f.range, "+-X or a..b (nm)");
  scan->add_option("--g2", f.g2, "g2 request evaluated at each power");
  auto* run = app.add_subcommand("run", "simulate + analyze + spectrum + graph into one bundle");
  run->add_flag("--binary", f.binary, "Also write <channel>.f64 little-endian streams");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (f.scenario.empty()) throw UsageError("--scenario is required");
    const Context c = load(f, seed_opt, duration_opt);
    auto* sub = app.get_subcommands().front();
    qom::Bundle bundle(c.scenario.name, c.hash, c.seed_override ? c.seed_override : c.scenario.seed, sub->get_name());

    if (sub == simulate || sub == run) {
      const auto sim = qom::simulate(c.scenario, qom::resolve_seed(c.scenario, c.seed_override), f.threads, c.duration);
      add_simulation(bundle, c, sim, f.binary, f.events);
      if (sub == run) {
        add_analysis(bundle, c, qom::analyze(c.scenario, sim.streams));
        if (c.scenario.graph) add_graph(bundle, c);
      }
    } else if (sub == analyze) {
      add_analysis(bundle, c, qom::analyze(c.scenario, streams_for(f, c)));
    } else if (sub == spectrum) {
      if (c.scenario.analysis.spectra.empty()) throw qom::ValidationError("/analysis/spectra", "no spectrum requested");
      if (f.streams.empty()) {
        const auto sim =
            qom::simulate(c.scenario, qom::resolve_seed(c.scenario, c.seed_override), f.threads, c.duration);
        add_analysis(bundle, c, qom::analyze_spectra(c.scenario, sim.streams));
      } else {
        add_analysis(bundle, c, qom::analyze_spectra(c.scenario, streams_for(f, c)));
      }
    } else if (sub == graph) {
      add_graph(bundle, c);
    } else if (sub == scan) {
      std::string param = f.param;
      if (param.empty() && c.scenario.scan) param = c.scenario.scan->param;
      if (param.empty()) throw UsageError("scan needs --param or a scan section in the scenario");
      std::vector<double> values;
      try {
        if (!f.values.empty()) {
          values = qom::parse_scan_values(f.values, param == "pump_power");
        } else if (!f.range.empty()) {
          values = qom::parse_scan_values(f.range, false);
        } else if (c.scenario.scan && c.scenario.scan->param == param && !c.scenario.scan->values.empty()) {
          values = c.scenario.scan->values;
        } else {
          throw UsageError("scan needs --values or --range");
        }
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("scan values: ") + e.what());
      }
      qom::ScanTable table;
      if (param == "pump_power") {
        std::string g2 = f.g2;
        if (g2.empty() && c.scenario.scan) g2 = c.scenario.scan->g2;
        if (g2.empty() && !c.scenario.analysis.g2.empty()) g2 = c.scenario.analysis.g2.front().name;
        if (g2.empty()) throw qom::ValidationError("/analysis/g2", "pump_power scan needs a g2 request");
        try {
          table = qom::scan_pump_power(c.scenario, values, qom::resolve_seed(c.scenario, c.seed_override), f.threads,
                                       g2, c.duration);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      } else {
        table = qom::scan_detuning(c.scenario, values);
      }
      bundle.add("scan_" + param + ext(c.format), qom::scan_table(table, c.hash, c.format));
      if (!table.fit.is_null()) bundle.add_json("scan_" + param + "_fit.json", table.fit);
    }
    bundle.write(f.out);
    std::cout << "wrote " << bundle.files().size() + 1 << " files to " << f.out << " (scenario " << c.hash.substr(0, 12)
              << ")\n";
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const qom::ValidationError& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return 2;
  } catch (const qom::ProvenanceError& e) {
    std::cerr << "provenance check failed: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
