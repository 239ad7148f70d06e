#include "qom/pipeline.hpp"

#include "qom/hash.hpp"
#include "qom/random.hpp"
#include "qom/stream_io.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

namespace qom {

using nlohmann::json;

namespace {

const TimestampStream& channel(const std::vector<TimestampStream>& streams, const std::string& id) {
  for (const auto& s : streams) {
    if (s.channel_id == id) return s;
  }
  throw std::runtime_error("no timestamp stream for channel '" + id + "'");
}

std::string hash_comment(const std::string& hash) { return "# scenario_hash=" + hash + "\n"; }

double round_sig(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return std::stod(buf);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_number(const std::string& text) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(x)) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return x;
}

CoincidenceHistogram histogram_for(const HistogramRequest& r, const std::vector<TimestampStream>& streams) {
  return coincidence_histogram(channel(streams, r.channels.a), channel(streams, r.channels.b), r.bin_ps,
                               r.span_ps);
}

void run_spectra(const Scenario& s, const std::vector<TimestampStream>& streams, Analysis& out) {
  for (const auto& req : s.analysis.spectra) {
    const auto* h = s.find_histogram(req.histogram);
    if (!out.histograms.count(h->name)) out.histograms.emplace(h->name, histogram_for(*h, streams));
    const auto* setup = s.find_setup(h->setup);
    auto options = req.options;
    options.timing_fwhm_ps = timing_fwhm_ps(setup->detector_a, setup->detector_b);
    auto spectrum = reconstruct_spectrum(out.histograms.at(h->name), *s.setup_fiber(h->setup),
                                         s.pumps[req.pump].wavelength_nm, options);
    out.peaks[req.name] = find_peaks(spectrum.lambda_nm, spectrum.intensity, req.min_relative_height);
    out.spectra.emplace(req.name, std::move(spectrum));
  }
}

}  // namespace

std::string library_version() { return "qomsim " QOM_VERSION; }

Simulation simulate(const Scenario& s, std::uint64_t seed, unsigned threads, std::optional<double> duration_override) {
  Simulation out;
  out.seed = seed;
  out.duration_s = duration_override.value_or(s.duration_s);
  auto options = s.generation;
  options.threads = std::max(1u, threads);
  out.events = generate_events(s.metasurfaces, s.pumps, out.duration_s, s.stats_mode, seed, options);
  const auto& events = out.events;
  out.pair_count = events.size();

  json sources = json::array();
  for (std::size_t m = 0; m < s.metasurfaces.size(); ++m) {
    for (std::size_t p = 0; p < s.pumps.size(); ++p) {
      const double rate = total_pair_rate(s.metasurfaces[m], s.pumps[p], options.model);
      sources.push_back({{"metasurface", s.metasurfaces[m].name},
                         {"pump_index", p},
                         {"pump_nm", s.pumps[p].wavelength_nm},
                         {"pair_rate_hz", rate},
                         {"film_pair_rate_hz", unpatterned_pair_rate(s.metasurfaces[m], s.pumps[p], options.model)}});
    }
  }
  json channels = json::object();
  for (const auto& setup : s.setups) {
    auto streams = run_setup(events, setup, out.duration_s, seed);
    for (auto* st : {&streams.a, &streams.b}) {
      channels[st->channel_id] = {{"counts", st->size()}, {"rate_cps", st->rate_cps()}};
      out.streams.push_back(std::move(*st));
    }
  }
  json layouts = json::object();
  for (const auto& setup : s.setups) layouts[setup.name] = describe(setup);
  out.summary = {{"seed", seed},
                 {"duration_s", out.duration_s},
                 {"stats_mode", std::string(to_string(s.stats_mode))},
                 {"pairs", out.pair_count},
                 {"sources", sources},
                 {"channels", channels},
                 {"setups", layouts}};
  return out;
}

Analysis analyze(const Scenario& s, const std::vector<TimestampStream>& streams) {
  Analysis out;
  for (const auto& h : s.analysis.histograms) out.histograms.emplace(h.name, histogram_for(h, streams));
  for (const auto& g : s.analysis.g2) {
    const auto& a = channel(streams, g.channels.a);
    const auto& b = channel(streams, g.channels.b);
    out.g2.emplace(g.name, g.kind == G2Kind::kCross ? g2_cross(a, b, g.options) : g2_auto(a, b, g.options));
  }
  if (const auto& cs = s.analysis.cs) out.cs = cs_test(out.g2.at(cs->si), out.g2.at(cs->ss), out.g2.at(cs->ii));
  run_spectra(s, streams, out);
  return out;
}

Analysis analyze_spectra(const Scenario& s, const std::vector<TimestampStream>& streams) {
  Analysis out;
  run_spectra(s, streams, out);
  return out;
}

ScanTable scan_pump_power(const Scenario& s, const std::vector<double>& powers, std::uint64_t seed,
                          unsigned threads, const std::string& g2_name, std::optional<double> duration_override) {
  const auto* req = s.find_g2(g2_name);
  if (!req) throw ValidationError("/scan/g2", "no g2 request named '" + g2_name + "'");
  Scenario base = s;
  if (!req->setup.empty()) {
    base.setups = {*s.find_setup(req->setup)};
  }
  for (double p : powers) {
    if (!(p > 0.0)) throw std::invalid_argument("scan powers must be positive");
  }
  const double duration = duration_override.value_or(s.scan && s.scan->duration_s ? *s.scan->duration_s : s.duration_s);

  std::vector<CorrelationEstimate> results(powers.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < powers.size(); i = next++) {
      Scenario point = base;
      for (auto& pump : point.pumps) pump.power_mW = powers[i];
      const auto sim = simulate(point, derive_seed(seed, "scan/" + std::to_string(i)), 1, duration);
      const auto& a = channel(sim.streams, req->channels.a);
      const auto& b = channel(sim.streams, req->channels.b);
      results[i] = req->kind == G2Kind::kCross ? g2_cross(a, b, req->options) : g2_auto(a, b, req->options);
    }
  };
  std::vector<std::future<void>> pool;
  for (unsigned t = 1; t < std::max(1u, threads); ++t) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();

  ScanTable table;
  table.columns = {"power_mW", "g2", "g2_error", "coincidences", "rate_a_cps", "rate_b_cps", "coincidence_rate_cps"};
  std::vector<PowerPoint> points;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const auto& e = results[i];
    table.rows.push_back({powers[i], e.value, e.std_error, static_cast<double>(e.coincidences), e.rate_a, e.rate_b,
                          e.coincidence_rate});
    points.push_back({powers[i], e.value, e.std_error});
  }
  const auto fit = power_scan_fit(points);
  table.fit = {{"model", "g2 = offset + amplitude / P ; g2 = 1 + free_amplitude * P^exponent"},
               {"offset", fit.offset},
               {"offset_error", fit.offset_error},
               {"amplitude", fit.amplitude},
               {"amplitude_error", fit.amplitude_error},
               {"r_squared", fit.r_squared},
               {"chi2_per_dof", fit.chi2_per_dof},
               {"free_amplitude", fit.free_amplitude},
               {"exponent", fit.exponent ? json(*fit.exponent) : json(nullptr)},
               {"exponent_error", fit.exponent_error}};
  return table;
}

ScanTable scan_detuning(const Scenario& s, const std::vector<double>& detunings) {
  const auto& pump0 = s.pumps.front();
  const Resonance* ref = nullptr;
  for (const auto& r : s.metasurfaces.front().resonances) {
    if (polarization_coupling(r, pump0.pol_deg) >= 0.01) {
      ref = &r;
      break;
    }
  }
  if (!ref) throw std::runtime_error("detuning scan: the first pump excites no resonance of the first metasurface");
  const auto& model = s.generation.model;
  auto rates = [&](double pump_nm) {
    PumpConfig p = pump0;
    p.wavelength_nm = pump_nm;
    double r = 0.0, film = 0.0;
    for (const auto& m : s.metasurfaces) {
      r += total_pair_rate(m, p, model);
      film += unpatterned_pair_rate(m, p, model);
    }
    return std::pair{r, film};
  };
  const double at_zero = rates(0.5 * ref->center_wavelength_nm).first;
  ScanTable table;
  table.columns = {"detuning_nm", "pump_nm", "pair_rate_hz", "film_pair_rate_hz", "enhancement", "relative_to_degenerate"};
  for (double d : detunings) {
    const double pump_nm = 0.5 * (ref->center_wavelength_nm + d);
    const auto [r, film] = rates(pump_nm);
    table.rows.push_back({d, pump_nm, r, film, film > 0.0 ? r / film : 0.0, at_zero > 0.0 ? r / at_zero : 0.0});
  }
  table.fit = {{"reference_resonance", ref->label}, {"reference_nm", ref->center_wavelength_nm},
               {"pump_power_mW", pump0.power_mW}};
  return table;
}

std::vector<double> parse_scan_values(const std::string& input, bool log_spaced) {
  std::string text = trim(input);
  if (text.size() > 2 && text.compare(text.size() - 2, 2, "nm") == 0) text = trim(text.substr(0, text.size() - 2));
  if (text.empty()) throw std::invalid_argument("empty scan values");
  auto linear = [](double a, double b, long n) {
    std::vector<double> v;
    for (long k = 0; k < n; ++k) v.push_back(round_sig(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1)));
    return v;
  };
  for (const std::string pm : {"\xC2\xB1", "+-", "+/-"}) {
    if (text.rfind(pm, 0) == 0) {
      const double x = std::abs(to_number(trim(text.substr(pm.size()))));
      if (x == 0.0) return {0.0};
      return linear(-x, x, 21);
    }
  }
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    std::string rest = text.substr(dots + 2);
    long n = 0;
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
      n = static_cast<long>(to_number(trim(rest.substr(colon + 1))));
      if (n < 2) throw std::invalid_argument("a range needs at least 2 points");
      rest = rest.substr(0, colon);
    }
    const double a = to_number(trim(text.substr(0, dots)));
    const double b = to_number(trim(rest));
    if (log_spaced && a > 0.0 && b > 0.0) {
      if (n == 0) n = 6;
      std::vector<double> v;
      for (long k = 0; k < n; ++k) {
        v.push_back(round_sig(a * std::pow(b / a, static_cast<double>(k) / static_cast<double>(n - 1))));
      }
      return v;
    }
    return linear(a, b, n == 0 ? 21 : n);
  }
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(to_number(trim(item)));
  return v;
}

std::string histogram_table(const CoincidenceHistogram& h, const std::string& hash, TableFormat format) {
  if (format == TableFormat::kJson) {
    json delays = json::array(), counts = json::array();
    for (std::size_t i = 0; i < h.size(); ++i) {
      delays.push_back(h.bin_center_ps(i));
      counts.push_back(h.counts[i]);
    }
    return json{{"scenario_hash", hash},
                {"bin_width_ps", h.bin_width_ps},
                {"integration_time_s", h.integration_time_s},
                {"delay_ps", delays},
                {"counts", counts}}
               .dump(1) + "\n";
  }
  std::string out = hash_comment(hash) + "# bin_width_ps=" + format_double(h.bin_width_ps) +
                    "\n# integration_time_s=" + format_double(h.integration_time_s) + "\ndelay_ps,counts\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    out += format_double(h.bin_center_ps(i)) + "," + std::to_string(h.counts[i]) + "\n";
  }
  return out;
}

std::string spectrum_table(const ReconstructedSpectrum& s, const std::string& hash, TableFormat format) {
  if (format == TableFormat::kJson) {
    json lambda = json::array(), intensity = json::array();
    for (Eigen::Index i = 0; i < s.lambda_nm.size(); ++i) {
      lambda.push_back(s.lambda_nm(i));
      intensity.push_back(s.intensity(i));
    }
    return json{{"scenario_hash", hash},
                {"bin_width_nm", s.bin_width_nm},
                {"resolution_nm", s.resolution_nm},
                {"lambda_error_nm", s.lambda_error_nm()},
                {"lambda_nm", lambda},
                {"intensity", intensity}}
               .dump(1) + "\n";
  }
  std::string out = hash_comment(hash) + "# resolution_nm=" + format_double(s.resolution_nm) +
                    "\nlambda_nm,intensity,lambda_err_nm\n";
  const std::string err = format_double(s.lambda_error_nm());
  for (Eigen::Index i = 0; i < s.lambda_nm.size(); ++i) {
    out += format_double(s.lambda_nm(i)) + "," + format_double(s.intensity(i)) + "," + err + "\n";
  }
  return out;
}

std::string transmission_table(const Spectrum& t, const std::string& hash) {
  std::string out = hash_comment(hash) + "wavelength_nm,transmittance\n";
  for (Eigen::Index i = 0; i < t.size(); ++i) out += format_double(t.lambda_nm(i)) + "," + format_double(t.value(i)) + "\n";
  return out;
}

std::string estimates_table(const Analysis& a, const std::string& hash) {
  std::string out = hash_comment(hash) +
                    "name,g2,std_error,coincidences,counts_a,counts_b,window_s,integration_time_s,peak_offset_ps\n";
  for (const auto& [name, e] : a.g2) {
    out += name + "," + format_double(e.value) + "," + format_double(e.std_error) + "," +
           std::to_string(e.coincidences) + "," + std::to_string(e.counts_a) + "," + std::to_string(e.counts_b) +
           "," + format_double(e.window_s) + "," + format_double(e.integration_time_s) + "," +
           format_double(e.peak_offset_ps) + "\n";
  }
  if (a.cs) {
    out += "# cauchy_schwarz lhs=" + format_double(a.cs->lhs) + " lhs_error=" + format_double(a.cs->lhs_error) +
           " rhs=" + format_double(a.cs->rhs) + " rhs_error=" + format_double(a.cs->rhs_error) +
           " violated=" + (a.cs->violated ? "true" : "false") + " sigma=" + format_double(a.cs->sigma_violation) + "\n";
  }
  return out;
}

std::string events_table(const std::vector<PairEvent>& events, const std::string& hash) {
  std::string out = hash_comment(hash) + "t_emit_s,lambda_s_nm,lambda_i_nm,pump_index,metasurface_index\n";
  for (const auto& e : events) {
    out += format_double(e.t_emit_s) + "," + format_double(e.lambda_s_nm) + "," + format_double(e.lambda_i_nm) + "," +
           std::to_string(e.pump_index) + "," + std::to_string(e.metasurface_index) + "\n";
  }
  return out;
}

std::string scan_table(const ScanTable& t, const std::string& hash, TableFormat format) {
  if (format == TableFormat::kJson) {
    json rows = json::array();
    for (const auto& r : t.rows) {
      json row = json::object();
      for (std::size_t c = 0; c < t.columns.size(); ++c) row[t.columns[c]] = r[c];
      rows.push_back(row);
    }
    return json{{"scenario_hash", hash}, {"rows", rows}, {"fit", t.fit}}.dump(1) + "\n";
  }
  std::string out = hash_comment(hash);
  for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + t.columns[c];
  out += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + format_double(r[c]);
    out += "\n";
  }
  return out;
}

json to_json(const CorrelationEstimate& e) {
  return {{"g2", e.value},
          {"std_error", e.std_error},
          {"coincidences", e.coincidences},
          {"counts_a", e.counts_a},
          {"counts_b", e.counts_b},
          {"coincidence_rate_cps", e.coincidence_rate},
          {"rate_a_cps", e.rate_a},
          {"rate_b_cps", e.rate_b},
          {"window_s", e.window_s},
          {"integration_time_s", e.integration_time_s},
          {"peak_offset_ps", e.peak_offset_ps},
          {"accidentals_subtracted", e.accidentals_subtracted}};
}

json to_json(const CauchySchwarzResult& r) {
  return {{"lhs", r.lhs},
          {"lhs_error", r.lhs_error},
          {"rhs", r.rhs},
          {"rhs_error", r.rhs_error},
          {"violated", r.violated},
          {"sigma_violation", r.sigma_violation}};
}

json to_json(const std::vector<SpectralPeak>& peaks) {
  json out = json::array();
  for (const auto& p : peaks) out.push_back({{"center_nm", p.center_nm}, {"fwhm_nm", p.fwhm_nm}, {"height", p.height}});
  return out;
}

json to_json(const EntanglementGraph& g) {
  json vertices = json::array(), edges = json::array();
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    const auto& b = g.vertices[v];
    json tags = json::array();
    for (const auto& m : b.members) tags.push_back(m.tag);
    vertices.push_back({{"id", v},
                        {"center_nm", b.center_nm},
                        {"tolerance_nm", b.tolerance_nm},
                        {"on_resonance", b.on_resonance()},
                        {"degenerate", b.degenerate},
                        {"sources", tags}});
  }
  for (const auto& e : g.edges) {
    edges.push_back({{"a", e.a},
                     {"b", e.b},
                     {"pump_index", e.pump_index},
                     {"pump_nm", e.pump_wavelength_nm},
                     {"coherent_group_id", e.coherent_group_id ? json(*e.coherent_group_id) : json(nullptr)},
                     {"incoherent", e.incoherent}});
  }
  const auto adj = g.adjacency();
  json matrix = json::array();
  for (Eigen::Index i = 0; i < adj.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < adj.cols(); ++j) row.push_back(adj(i, j));
    matrix.push_back(row);
  }
  return {{"vertices", vertices},
          {"edges", edges},
          {"adjacency", matrix},
          {"classification", g.classification.label()},
          {"has_incoherent_edges", g.classification.has_incoherent_edges},
          {"warnings", g.warnings}};
}

json to_json(const PumpPlan& plan, const TargetGraph& target) {
  json pumps = json::array();
  for (const auto& p : plan.pumps) {
    const auto [i, j] = target.edges[p.edge_index];
    pumps.push_back({{"edge", p.edge_index},
                     {"endpoints_nm", {target.vertices_nm[i], target.vertices_nm[j]}},
                     {"pump_nm", p.wavelength_nm},
                     {"pol_deg", p.pol_deg},
                     {"resonance", p.resonance_label},
                     {"degenerate", p.degenerate}});
  }
  return {{"feasible", plan.feasible()}, {"pumps", pumps}, {"infeasible_edges", plan.infeasible_edges}};
}

json analysis_report(const Scenario& s, const Analysis& a) {
  json report = {{"scenario", s.name}};
  json g2 = json::object();
  for (const auto& [name, e] : a.g2) g2[name] = to_json(e);
  report["g2"] = g2;
  report["cs"] = a.cs ? to_json(*a.cs) : json(nullptr);
  json hist = json::object();
  for (const auto& [name, h] : a.histograms) {
    hist[name] = {{"total", h.total()}, {"bins", h.size()}, {"integration_time_s", h.integration_time_s}};
  }
  report["histograms"] = hist;
  json spectra = json::object();
  for (const auto& [name, sp] : a.spectra) {
    const auto& req = *std::find_if(s.analysis.spectra.begin(), s.analysis.spectra.end(),
                                    [&](const SpectrumRequest& r) { return r.name == name; });
    const auto& fiber = *s.setup_fiber(s.find_histogram(req.histogram)->setup);
    spectra[name] = {{"resolution_nm", sp.resolution_nm},
                     {"pump_nm", s.pumps[req.pump].wavelength_nm},
                     {"fiber", {{"length_km", fiber.length_km},
                                {"dispersion_ps_per_nm_km", fiber.dispersion_ps_per_nm_km},
                                {"reference_nm", fiber.reference_wavelength_nm}}},
                     {"lambda_error_nm", sp.lambda_error_nm()},
                     {"peaks", to_json(a.peaks.at(name))}};
  }
  report["spectra"] = spectra;
  return report;
}

Bundle::Bundle(std::string scenario_name, std::string scenario_hash, std::optional<std::uint64_t> seed,
               std::string command)
    : scenario_name_(std::move(scenario_name)),
      hash_(std::move(scenario_hash)),
      seed_(seed),
      command_(std::move(command)) {}

void Bundle::add(const std::string& name, std::string content) { files_[name] = std::move(content); }

void Bundle::add_json(const std::string& name, json content) {
  content["scenario_hash"] = hash_;
  files_[name] = content.dump(2) + "\n";
}

std::string Bundle::manifest() const {
  json files = json::object();
  for (const auto& [name, content] : files_) files[name] = sha256_hex(content);
  json m = {{"scenario", scenario_name_},
            {"scenario_hash", hash_},
            {"seed", seed_ ? json(*seed_) : json(nullptr)},
            {"command", command_},
            {"version", library_version()},
            {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
            {"files", files}};
  return m.dump(2) + "\n";
}

void Bundle::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  };
  for (const auto& [name, content] : files_) put(name, content);
  put("manifest.json", manifest());
}

std::vector<TimestampStream> load_streams(const std::vector<std::filesystem::path>& paths,
                                          const std::string& expected_hash, bool force,
                                          std::optional<double> duration_s) {
  std::vector<TimestampStream> out;
  auto add = [&](TimestampStream s) {
    for (const auto& o : out) {
      if (o.channel_id == s.channel_id) throw std::runtime_error("channel '" + s.channel_id + "' given twice");
    }
    out.push_back(std::move(s));
  };
  for (const auto& p : paths) {
    if (p.extension() == ".f64") {
      add(read_stream_binary(p, p.stem().string(), duration_s));
      continue;
    }
    auto file = read_streams_csv(p, duration_s);
    if (file.info.scenario_hash && *file.info.scenario_hash != expected_hash && !force) {
      throw ProvenanceError(p.string() + " was produced by scenario " + *file.info.scenario_hash +
                            ", not " + expected_hash + " (pass the matching --seed, or --force)");
    }
    for (auto& s : file.streams) add(std::move(s));
  }
  return out;
}

}  // namespace qom
