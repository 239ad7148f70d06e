#include "qom/config.hpp"

#include "qom/hash.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qom {

using nlohmann::json;

ValidationError::ValidationError(std::string path, const std::string& message, int line)
    : std::runtime_error((path.empty() ? std::string("scenario") : path) +
                         (line > 0 ? " (line " + std::to_string(line) + ")" : std::string()) + ": " + message),
      path_(std::move(path)),
      line_(line) {}

namespace {

// Approximate source line of a JSON pointer: follow the object keys through
// the text in order. Array indices are not resolved.
int line_of(const std::string& text, const std::string& pointer) {
  std::size_t pos = 0;
  bool any = false;
  std::stringstream ss(pointer);
  std::string token;
  while (std::getline(ss, token, '/')) {
    if (token.empty() || std::all_of(token.begin(), token.end(), ::isdigit)) continue;
    const auto at = text.find('"' + token + '"', pos);
    if (at == std::string::npos) break;
    pos = at;
    any = true;
  }
  if (!any) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

class Ctx {
 public:
  explicit Ctx(const std::string& text) : text_(text) {}
  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw ValidationError(path, msg, line_of(text_, path));
  }

 private:
  const std::string& text_;
};

// Strict view of one JSON object: every key must be read or it is reported.
class Obj {
 public:
  Obj(const Ctx& ctx, const json& j, std::string path) : ctx_(ctx), j_(j), path_(std::move(path)) {
    if (!j_.is_object()) ctx_.fail(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const { ctx_.fail(at(key), msg); }

  double number(const std::string& key, std::optional<double> fallback = {}) {
    if (!has(key)) {
      if (!fallback) fail(key, "missing required field");
      return *fallback;
    }
    const auto& v = raw(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }
  double positive(const std::string& key, std::optional<double> fallback = {}) {
    const double x = number(key, fallback);
    if (!(x > 0.0)) fail(key, "must be positive");
    return x;
  }
  double nonnegative(const std::string& key, std::optional<double> fallback = {}) {
    const double x = number(key, fallback);
    if (!(x >= 0.0)) fail(key, "must be nonnegative");
    return x;
  }
  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }
  std::string string(const std::string& key, std::optional<std::string> fallback = {}) {
    if (!has(key)) {
      if (!fallback) fail(key, "missing required field");
      return *fallback;
    }
    const auto& v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }
  std::uint64_t index(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_number_unsigned()) fail(key, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  const json& array(const std::string& key, bool required) {
    static const json empty = json::array();
    if (!has(key)) {
      if (required) fail(key, "missing required field");
      return empty;
    }
    const auto& v = raw(key);
    if (!v.is_array()) fail(key, "expected an array");
    return v;
  }
  Obj object(const std::string& key) { return Obj(ctx_, raw(key), at(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) ctx_.fail(at(key), "unknown field");
    }
  }

  const Ctx& ctx() const { return ctx_; }
  const std::string& path() const { return path_; }

 private:
  const Ctx& ctx_;
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string item_path(const Obj& o, const std::string& key, std::size_t i) {
  return o.at(key) + "/" + std::to_string(i);
}

Resonance parse_resonance(Obj o) {
  Resonance r;
  r.label = o.string("label");
  r.center_wavelength_nm = o.positive("center_nm");
  r.q_factor = o.positive("q");
  r.pol_axis_deg = o.number("pol_axis_deg", 0.0);
  if (!(r.pol_axis_deg >= 0.0 && r.pol_axis_deg < 180.0)) o.fail("pol_axis_deg", "must lie in [0, 180)");
  r.peak_enhancement_scale = o.nonnegative("kappa", kDefaultKappa);
  r.fano_asymmetry = o.optional_number("fano_q");
  o.finish();
  return r;
}

Metasurface parse_metasurface(Obj o) {
  Metasurface m;
  m.name = o.string("name");
  if (m.name.empty() || m.name.find_first_of("/\\\n") != std::string::npos) {
    o.fail("name", "must be nonempty without path separators");
  }
  m.chi2_pm_per_V = o.nonnegative("chi2_pm_per_V", 450.0);
  m.film_thickness_nm = o.positive("film_thickness_nm", 500.0);
  const auto& rs = o.array("resonances", false);
  std::set<std::string> labels;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    m.resonances.push_back(parse_resonance(Obj(o.ctx(), rs[i], item_path(o, "resonances", i))));
    if (!labels.insert(m.resonances.back().label).second) {
      o.ctx().fail(item_path(o, "resonances", i) + "/label", "duplicate resonance label");
    }
  }
  o.finish();
  return m;
}

PumpConfig parse_pump(Obj o) {
  PumpConfig p;
  p.wavelength_nm = o.positive("wavelength_nm");
  p.power_mW = o.nonnegative("power_mW");
  p.pol_deg = o.number("pol_deg", 0.0);
  p.spot_diameter_um = o.positive("spot_diameter_um", 140.0);
  if (o.has("coherent_group_id")) p.coherent_group_id = o.string("coherent_group_id");
  o.finish();
  return p;
}

DetectorSpec parse_detector(Obj o) {
  DetectorSpec d;
  d.efficiency = o.number("efficiency", d.efficiency);
  if (!(d.efficiency >= 0.0 && d.efficiency <= 1.0)) o.fail("efficiency", "must lie in [0, 1]");
  d.dark_count_rate_cps = o.nonnegative("dark_cps", d.dark_count_rate_cps);
  d.jitter_sigma_ps = o.nonnegative("jitter_ps", d.jitter_sigma_ps);
  d.dead_time_ns = o.nonnegative("dead_time_ns", d.dead_time_ns);
  o.finish();
  return d;
}

ChainStage parse_stage(Obj o) {
  const std::string type = o.string("type");
  if (type == "fiber") {
    FiberSpec f;
    f.length_km = o.nonnegative("length_km", f.length_km);
    f.dispersion_ps_per_nm_km = o.number("dispersion_ps_per_nm_km", f.dispersion_ps_per_nm_km);
    f.reference_wavelength_nm = o.positive("reference_nm", f.reference_wavelength_nm);
    f.common_delay_ps = o.number("common_delay_ps", 0.0);
    o.finish();
    return f;
  }
  if (type == "bandpass") {
    BandpassSpec b;
    b.center_nm = o.positive("center_nm");
    b.fwhm_nm = o.positive("fwhm_nm");
    b.transmission_peak = o.number("peak", 1.0);
    if (!(b.transmission_peak >= 0.0 && b.transmission_peak <= 1.0)) o.fail("peak", "must lie in [0, 1]");
    b.order = o.positive("order", 4.0);
    o.finish();
    return b;
  }
  o.fail("type", "unknown stage type '" + type + "' (expected fiber or bandpass)");
}

std::vector<ChainStage> parse_stages(Obj& o, const std::string& key) {
  std::vector<ChainStage> out;
  const auto& arr = o.array(key, false);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(parse_stage(Obj(o.ctx(), arr[i], item_path(o, key, i))));
  }
  return out;
}

SetupSpec parse_setup(Obj o) {
  SetupSpec s;
  s.name = o.string("name");
  if (s.name.empty() || s.name.find_first_of("/.,\n") != std::string::npos) {
    o.fail("name", "must be nonempty without '/', '.', ','");
  }
  s.shared = parse_stages(o, "shared");
  s.split_ratio = o.number("split_ratio", 0.5);
  if (!(s.split_ratio > 0.0 && s.split_ratio < 1.0)) o.fail("split_ratio", "must lie strictly between 0 and 1");
  s.arm_a = parse_stages(o, "arm_a");
  s.arm_b = parse_stages(o, "arm_b");
  if (o.has("detector")) {
    if (o.has("detector_a") || o.has("detector_b")) o.fail("detector", "give either detector or detector_a/detector_b");
    s.detector_a = s.detector_b = parse_detector(o.object("detector"));
  } else {
    if (o.has("detector_a")) s.detector_a = parse_detector(o.object("detector_a"));
    if (o.has("detector_b")) s.detector_b = parse_detector(o.object("detector_b"));
  }
  o.finish();
  return s;
}

// Either "setup" or both "a" and "b".
void parse_channels(Obj& o, std::string& setup, ChannelPair& channels) {
  if (o.has("setup")) {
    if (o.has("a") || o.has("b")) o.fail("setup", "give either setup or a/b channel ids");
    setup = o.string("setup");
    channels = {setup + ".a", setup + ".b"};
  } else {
    channels = {o.string("a"), o.string("b")};
  }
}

void parse_analysis(Obj o, Scenario& s) {
  auto& a = s.analysis;
  std::set<std::string> names;
  auto unique = [&](Obj& item, const std::string& name) {
    if (name.empty()) item.fail("name", "must be nonempty");
    if (!names.insert(name).second) item.fail("name", "duplicate analysis name '" + name + "'");
  };
  const auto& hs = o.array("histograms", false);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    Obj h(o.ctx(), hs[i], item_path(o, "histograms", i));
    HistogramRequest r;
    r.name = h.string("name");
    unique(h, r.name);
    parse_channels(h, r.setup, r.channels);
    r.bin_ps = h.positive("bin_ps", r.bin_ps);
    r.span_ps = h.positive("span_ps", r.span_ps);
    if (2 * static_cast<long>(std::floor(r.span_ps / (2.0 * r.bin_ps))) + 1 < 100) {
      h.fail("span_ps", "histogram needs at least 100 bins (span / bin)");
    }
    h.finish();
    a.histograms.push_back(r);
  }
  const auto& gs = o.array("g2", false);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    Obj g(o.ctx(), gs[i], item_path(o, "g2", i));
    G2Request r;
    r.name = g.string("name");
    unique(g, r.name);
    const std::string kind = g.string("kind", "cross");
    if (kind == "cross") {
      r.kind = G2Kind::kCross;
    } else if (kind == "auto") {
      r.kind = G2Kind::kAuto;
    } else {
      g.fail("kind", "expected cross or auto");
    }
    parse_channels(g, r.setup, r.channels);
    r.options.window_ps = g.positive("window_ps", r.options.window_ps);
    r.options.peak_offset_ps = g.optional_number("peak_offset_ps");
    r.options.search_span_ps = g.positive("search_span_ps", r.options.search_span_ps);
    r.options.subtract_accidentals = g.boolean("subtract_accidentals", false);
    g.finish();
    a.g2.push_back(r);
  }
  if (o.has("cs")) {
    Obj c = o.object("cs");
    CsRequest r{c.string("si"), c.string("ss"), c.string("ii")};
    for (const auto& [key, name] : {std::pair{"si", r.si}, {"ss", r.ss}, {"ii", r.ii}}) {
      if (!s.find_g2(name)) c.fail(key, "no g2 request named '" + name + "'");
    }
    c.finish();
    a.cs = r;
  }
  const auto& ss = o.array("spectra", false);
  for (std::size_t i = 0; i < ss.size(); ++i) {
    Obj sp(o.ctx(), ss[i], item_path(o, "spectra", i));
    SpectrumRequest r;
    r.name = sp.string("name");
    unique(sp, r.name);
    r.histogram = sp.string("histogram");
    const auto* h = s.find_histogram(r.histogram);
    if (!h) sp.fail("histogram", "no histogram named '" + r.histogram + "'");
    if (h->setup.empty()) sp.fail("histogram", "spectra need a histogram defined by setup");
    const auto* fiber = s.setup_fiber(h->setup);
    if (!fiber || fiber->dispersion_ps_per_nm() == 0.0) {
      sp.fail("histogram", "setup '" + h->setup + "' has no dispersive fiber");
    }
    r.pump = sp.index("pump", 0);
    if (r.pump >= s.pumps.size()) sp.fail("pump", "pump index out of range");
    r.options.lambda_bin_nm = sp.positive("bin_nm", 1.0);
    r.options.lambda_min_nm = sp.positive("min_nm", 1100.0);
    r.options.lambda_max_nm = sp.positive("max_nm", 1800.0);
    if (!(r.options.lambda_max_nm > r.options.lambda_min_nm)) sp.fail("max_nm", "must exceed min_nm");
    r.options.zero_delay_ps = sp.number("zero_delay_ps", 0.0);
    r.min_relative_height = sp.number("min_relative_height", 0.1);
    sp.finish();
    a.spectra.push_back(r);
  }
  o.finish();
}

void check_channel_refs(const Scenario& s, const Ctx& ctx) {
  auto check = [&](const std::string& path, const std::string& setup) {
    if (!setup.empty() && !s.find_setup(setup)) ctx.fail(path + "/setup", "no setup named '" + setup + "'");
  };
  for (std::size_t i = 0; i < s.analysis.histograms.size(); ++i) {
    check("/analysis/histograms/" + std::to_string(i), s.analysis.histograms[i].setup);
  }
  for (std::size_t i = 0; i < s.analysis.g2.size(); ++i) {
    check("/analysis/g2/" + std::to_string(i), s.analysis.g2[i].setup);
  }
}

TargetGraph parse_target(Obj o) {
  TargetGraph t;
  const auto& vs = o.array("vertices_nm", true);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (!vs[i].is_number() || !(vs[i].get<double>() > 0.0)) {
      o.ctx().fail(item_path(o, "vertices_nm", i), "expected a positive wavelength");
    }
    t.vertices_nm.push_back(vs[i].get<double>());
  }
  const auto& es = o.array("edges", true);
  for (std::size_t i = 0; i < es.size(); ++i) {
    const auto& e = es[i];
    const bool ok = e.is_array() && e.size() == 2 && e[0].is_number_unsigned() && e[1].is_number_unsigned() &&
                    e[0].get<std::size_t>() < t.vertices_nm.size() && e[1].get<std::size_t>() < t.vertices_nm.size();
    if (!ok) o.ctx().fail(item_path(o, "edges", i), "expected [i, j] with valid vertex indices");
    t.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
  o.finish();
  return t;
}

Scenario parse(const json& doc, const Ctx& ctx) {
  Scenario s;
  Obj root(ctx, doc, "");
  if (!root.has("schema_version")) root.fail("schema_version", "missing required field");
  const auto& version = root.raw("schema_version");
  if (!version.is_number_integer() || version.get<long>() != kSchemaVersion) {
    root.fail("schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  s.name = root.string("name");
  if (root.has("seed")) s.seed = root.index("seed", 0);
  s.duration_s = root.positive("duration_s", 1.0);

  const auto& ms = root.array("metasurfaces", true);
  if (ms.empty()) root.fail("metasurfaces", "at least one metasurface is required");
  for (std::size_t i = 0; i < ms.size(); ++i) {
    s.metasurfaces.push_back(parse_metasurface(Obj(ctx, ms[i], item_path(root, "metasurfaces", i))));
  }
  const auto& ps = root.array("pumps", true);
  if (ps.empty()) root.fail("pumps", "at least one pump is required");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    s.pumps.push_back(parse_pump(Obj(ctx, ps[i], item_path(root, "pumps", i))));
  }

  if (root.has("source")) {
    Obj src = root.object("source");
    const std::string mode = src.string("stats_mode", "poisson");
    try {
      s.stats_mode = parse_stats_mode(mode);
    } catch (const std::invalid_argument&) {
      src.fail("stats_mode", "expected poisson or thermal-cell");
    }
    auto& model = s.generation.model;
    model.rate_constant = src.nonnegative("rate_constant", kDefaultRateConstant);
    if (src.has("window_nm")) {
      const auto& w = src.raw("window_nm");
      if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number() ||
          !(w[0].get<double>() > 0.0 && w[1].get<double>() > w[0].get<double>())) {
        src.fail("window_nm", "expected [lo, hi] with 0 < lo < hi");
      }
      model.window.lo_nm = w[0].get<double>();
      model.window.hi_nm = w[1].get<double>();
    }
    model.window.step_nm = src.positive("grid_step_nm", model.window.step_nm);
    if (src.has("coherence_time_s")) s.generation.coherence_time_s = src.positive("coherence_time_s");
    src.finish();
  }

  const auto& ss = root.array("setups", false);
  for (std::size_t i = 0; i < ss.size(); ++i) {
    s.setups.push_back(parse_setup(Obj(ctx, ss[i], item_path(root, "setups", i))));
    for (std::size_t k = 0; k < i; ++k) {
      if (s.setups[k].name == s.setups[i].name) ctx.fail(item_path(root, "setups", i) + "/name", "duplicate setup name");
    }
  }
  if (root.has("analysis")) parse_analysis(root.object("analysis"), s);
  check_channel_refs(s, ctx);

  if (root.has("graph")) {
    Obj g = root.object("graph");
    GraphRequest r;
    if (g.has("tolerance_nm")) r.options.tolerance_nm = g.positive("tolerance_nm");
    r.options.min_coupling = g.nonnegative("min_coupling", r.options.min_coupling);
    if (g.has("target")) r.target = parse_target(g.object("target"));
    g.finish();
    s.graph = r;
  }
  if (root.has("scan")) {
    Obj sc = root.object("scan");
    ScanSpec r;
    r.param = sc.string("param");
    if (r.param != "pump_power" && r.param != "detuning") sc.fail("param", "expected pump_power or detuning");
    const auto& vs = sc.array("values", false);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (!vs[i].is_number()) sc.ctx().fail(item_path(sc, "values", i), "expected a number");
      r.values.push_back(vs[i].get<double>());
    }
    r.g2 = sc.string("g2", "");
    if (!r.g2.empty() && !s.find_g2(r.g2)) sc.fail("g2", "no g2 request named '" + r.g2 + "'");
    if (sc.has("duration_s")) r.duration_s = sc.positive("duration_s");
    sc.finish();
    s.scan = r;
  }
  root.finish();

  for (std::size_t i = 0; i < s.metasurfaces.size(); ++i) {
    try {
      validate(s.metasurfaces[i]);
    } catch (const std::invalid_argument& e) {
      ctx.fail("/metasurfaces/" + std::to_string(i), e.what());
    }
  }
  return s;
}

}  // namespace

const SetupSpec* Scenario::find_setup(const std::string& n) const {
  for (const auto& s : setups) {
    if (s.name == n) return &s;
  }
  return nullptr;
}

const HistogramRequest* Scenario::find_histogram(const std::string& n) const {
  for (const auto& h : analysis.histograms) {
    if (h.name == n) return &h;
  }
  return nullptr;
}

const G2Request* Scenario::find_g2(const std::string& n) const {
  for (const auto& g : analysis.g2) {
    if (g.name == n) return &g;
  }
  return nullptr;
}

const FiberSpec* Scenario::setup_fiber(const std::string& n) const {
  const auto* s = find_setup(n);
  if (!s) return nullptr;
  for (const auto* stages : {&s->shared, &s->arm_a}) {
    for (const auto& st : *stages) {
      if (const auto* f = std::get_if<FiberSpec>(&st)) return f;
    }
  }
  return nullptr;
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
    throw ValidationError("", std::string("malformed JSON: ") + e.what(), line);
  }
  const Ctx ctx(text);
  Scenario s = parse(doc, ctx);
  s.document = std::move(doc);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("", "cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_hash(const Scenario& s, std::optional<std::uint64_t> seed) {
  json doc = s.document;
  if (seed) doc["seed"] = *seed;
  return sha256_hex(doc.dump());
}

std::uint64_t resolve_seed(const Scenario& s, std::optional<std::uint64_t> seed_override) {
  if (seed_override) return *seed_override;
  if (s.seed) return *s.seed;
  throw ValidationError("/seed", "a seed is required for simulation (scenario field or --seed)");
}

}  // namespace qom
