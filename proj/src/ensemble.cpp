#include "arrowhead/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "arrowhead/errors.hpp"

namespace arrowhead {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- model ----

DisorderModel ModelSpec::build() const { return build(width); }

DisorderModel ModelSpec::build(double w) const {
  if (type == "box") return DisorderModel::box(w);
  if (type == "semicircle") return semicircle_model(w);
  throw UnsupportedModelError("unknown model type '" + type + "'");
}

// ---- config parsing ----

namespace {

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(path + "/" + it.key(), "unknown key");
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) throw ConfigError(path, "must be positive");
  return v;
}

double nonnegative(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v >= 0.0)) throw ConfigError(path, "must be >= 0");
  return v;
}

std::uint64_t unsigned_int(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0))
    throw ConfigError(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

template <class F>
auto list(const json& j, const std::string& path, F&& item) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array");
  std::vector<decltype(item(j[0], path))> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(j[i], path + "/" + std::to_string(i)));
  return out;
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

const std::vector<ExperimentKind>& experiment_kinds() {
  static const std::vector<ExperimentKind> kinds = {
      {"spectrum", "secular eigenvalues with interlacing certificate and root residuals"},
      {"shifts", "binned energy shifts of dark states against the large-N mean shift"},
      {"spacings", "spacing histogram of the cotangent level model against Poisson and semi-Poisson"},
      {"ipr", "binned inverse participation ratios of dark states"},
      {"fractal", "multifractal dimension from the size scaling of IPR(q)"},
      {"spectral-function", "ensemble-mean photon spectral function against the large-N continuum"},
      {"covariance", "ensemble covariance of the smoothed spectral function against the large-N kernel"},
      {"photon-weights", "binned photon weights and polariton weights against large-N values"},
      {"escape", "escape probability from sites near a target energy, finite N and large N"},
      {"escape-sweep", "disorder-averaged escape rate over a (g, W) grid"},
      {"transport", "steady-state populations and currents of single realizations"},
      {"transport-sweep", "ensemble-mean output current over (N, g, W) with dark-state share"},
  };
  return kinds;
}

std::string config_hash(const json& resolved) {
  json copy = resolved;
  copy.erase("output");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(copy.dump())));
  return buf;
}

ExperimentConfig parse_config(const json& j) {
  allow_keys(j, "", {"kind", "description", "model", "N", "sizes", "g", "g_values", "W_values", "seeds", "binning",
                     "sigma", "q", "q_values", "alpha", "alpha_values", "grid", "transport", "escape", "checks",
                     "output"});
  ExperimentConfig c;
  if (!j.contains("kind")) throw ConfigError("/kind", "required");
  c.kind = text(j["kind"], "/kind");
  const auto& kinds = experiment_kinds();
  if (std::none_of(kinds.begin(), kinds.end(), [&](const ExperimentKind& k) { return k.name == c.kind; }))
    throw ConfigError("/kind", "unknown experiment kind '" + c.kind + "'");

  if (j.contains("model")) {
    const auto& m = j["model"];
    allow_keys(m, "/model", {"type", "W"});
    if (m.contains("type")) c.model.type = text(m["type"], "/model/type");
    if (c.model.type != "box" && c.model.type != "semicircle")
      throw ConfigError("/model/type", "expected 'box' or 'semicircle'");
    if (m.contains("W")) c.model.width = positive(m["W"], "/model/W");
  }
  const auto size_item = [](const json& v, const std::string& p) {
    const auto n = unsigned_int(v, p);
    if (n < 2) throw ConfigError(p, "N must be >= 2");
    return static_cast<std::size_t>(n);
  };
  if (j.contains("N") && j.contains("sizes")) throw ConfigError("/N", "give either N or sizes");
  if (j.contains("N")) c.sizes = {size_item(j["N"], "/N")};
  if (j.contains("sizes")) c.sizes = list(j["sizes"], "/sizes", size_item);
  if (j.contains("g") && j.contains("g_values")) throw ConfigError("/g", "give either g or g_values");
  if (j.contains("g")) c.g_values = {nonnegative(j["g"], "/g")};
  if (j.contains("g_values")) c.g_values = list(j["g_values"], "/g_values", nonnegative);
  c.widths = j.contains("W_values") ? list(j["W_values"], "/W_values", positive) : std::vector<double>{c.model.width};

  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    allow_keys(s, "/seeds", {"base", "count"});
    if (s.contains("base")) c.seeds.base = unsigned_int(s["base"], "/seeds/base");
    if (s.contains("count")) c.seeds.count = unsigned_int(s["count"], "/seeds/count");
    if (c.seeds.count == 0) throw ConfigError("/seeds/count", "must be >= 1");
  }
  const auto model = c.model.build();
  c.binning.lo = model.lo();
  c.binning.hi = model.hi();
  if (j.contains("binning")) {
    const auto& b = j["binning"];
    allow_keys(b, "/binning", {"bins", "lo", "hi"});
    if (b.contains("bins")) c.binning.bins = unsigned_int(b["bins"], "/binning/bins");
    if (b.contains("lo")) c.binning.lo = number(b["lo"], "/binning/lo");
    if (b.contains("hi")) c.binning.hi = number(b["hi"], "/binning/hi");
    if (c.binning.bins == 0) throw ConfigError("/binning/bins", "must be >= 1");
    if (!(c.binning.hi > c.binning.lo)) throw ConfigError("/binning", "hi must exceed lo");
  }
  if (j.contains("sigma")) c.sigma = positive(j["sigma"], "/sigma");
  if (j.contains("q") && j.contains("q_values")) throw ConfigError("/q", "give either q or q_values");
  if (j.contains("q")) c.q_values = {positive(j["q"], "/q")};
  if (j.contains("q_values")) c.q_values = list(j["q_values"], "/q_values", positive);
  if (j.contains("alpha") && j.contains("alpha_values")) throw ConfigError("/alpha", "give either alpha or alpha_values");
  if (j.contains("alpha")) c.alpha_values = {number(j["alpha"], "/alpha")};
  if (j.contains("alpha_values")) c.alpha_values = list(j["alpha_values"], "/alpha_values", number);
  if (j.contains("grid")) {
    c.grid = text(j["grid"], "/grid");
    if (c.grid != "random" && c.grid != "equally_spaced") throw ConfigError("/grid", "expected 'random' or 'equally_spaced'");
  }
  if (j.contains("transport")) {
    const auto& t = j["transport"];
    allow_keys(t, "/transport", {"gamma_in_tilde", "gamma_out", "in_site", "out_site"});
    if (t.contains("gamma_in_tilde")) c.transport.gamma_in_tilde = nonnegative(t["gamma_in_tilde"], "/transport/gamma_in_tilde");
    if (t.contains("gamma_out")) c.transport.gamma_out = nonnegative(t["gamma_out"], "/transport/gamma_out");
    if (t.contains("in_site")) c.transport.in_site = unsigned_int(t["in_site"], "/transport/in_site");
    if (t.contains("out_site") && !t["out_site"].is_null())
      c.transport.out_site = unsigned_int(t["out_site"], "/transport/out_site");
  }
  if (j.contains("escape")) {
    const auto& e = j["escape"];
    allow_keys(e, "/escape", {"energy", "window", "t_min", "gt_max", "count", "large_n"});
    if (e.contains("energy")) c.escape.energy = number(e["energy"], "/escape/energy");
    if (e.contains("window")) c.escape.window = positive(e["window"], "/escape/window");
    if (e.contains("t_min")) c.escape.t_min = positive(e["t_min"], "/escape/t_min");
    if (e.contains("gt_max")) c.escape.gt_max = positive(e["gt_max"], "/escape/gt_max");
    if (e.contains("count")) c.escape.count = unsigned_int(e["count"], "/escape/count");
    if (e.contains("large_n")) c.escape.large_n = boolean(e["large_n"], "/escape/large_n");
    if (c.escape.count < 2) throw ConfigError("/escape/count", "must be >= 2");
  }
  if (j.contains("checks")) {
    const auto& arr = j["checks"];
    if (!arr.is_array()) throw ConfigError("/checks", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "/checks/" + std::to_string(i);
      const auto& x = arr[i];
      allow_keys(x, p, {"name", "quantity", "min", "max", "target", "rel_tol", "abs_tol"});
      CheckSpec k;
      if (!x.contains("quantity")) throw ConfigError(p + "/quantity", "required");
      k.quantity = text(x["quantity"], p + "/quantity");
      k.name = x.contains("name") ? text(x["name"], p + "/name") : k.quantity;
      if (x.contains("min")) k.min = number(x["min"], p + "/min");
      if (x.contains("max")) k.max = number(x["max"], p + "/max");
      if (x.contains("target")) k.target = number(x["target"], p + "/target");
      if (x.contains("rel_tol")) k.rel_tol = nonnegative(x["rel_tol"], p + "/rel_tol");
      if (x.contains("abs_tol")) k.abs_tol = nonnegative(x["abs_tol"], p + "/abs_tol");
      if (!k.min && !k.max && !k.target) throw ConfigError(p, "needs min, max or target");
      c.checks.push_back(k);
    }
  }
  if (j.contains("output")) c.output = text(j["output"], "/output");

  // resolved form
  json r;
  r["kind"] = c.kind;
  r["model"] = {{"type", c.model.type}, {"W", c.model.width}};
  r["sizes"] = c.sizes;
  r["g_values"] = c.g_values;
  r["W_values"] = c.widths;
  r["seeds"] = {{"base", c.seeds.base}, {"count", c.seeds.count}};
  r["binning"] = {{"bins", c.binning.bins}, {"lo", c.binning.lo}, {"hi", c.binning.hi}};
  r["sigma"] = c.sigma;
  r["q_values"] = c.q_values;
  r["alpha_values"] = c.alpha_values;
  r["grid"] = c.grid;
  r["transport"] = {{"gamma_in_tilde", c.transport.gamma_in_tilde},
                    {"gamma_out", c.transport.gamma_out},
                    {"in_site", c.transport.in_site},
                    {"out_site", c.transport.out_site ? json(*c.transport.out_site) : json(nullptr)}};
  r["escape"] = {{"energy", c.escape.energy}, {"window", c.escape.window}, {"t_min", c.escape.t_min},
                 {"gt_max", c.escape.gt_max}, {"count", c.escape.count},   {"large_n", c.escape.large_n}};
  json checks = json::array();
  for (const auto& k : c.checks)
    checks.push_back({{"name", k.name},
                      {"quantity", k.quantity},
                      {"min", opt(k.min)},
                      {"max", opt(k.max)},
                      {"target", opt(k.target)},
                      {"rel_tol", k.rel_tol},
                      {"abs_tol", k.abs_tol}});
  r["checks"] = checks;
  r["output"] = c.output;
  c.resolved = r;
  c.hash = config_hash(r);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---- workers and averages ----

std::size_t worker_count() {
  if (const char* v = std::getenv("ARROWHEAD_LAB_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || n < 1) throw ConfigError("ARROWHEAD_LAB_WORKERS", "expected a positive integer");
    return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

num::MeanStderr ensemble_average(std::span<const double> values) {
  if (values.empty()) throw EmptyEnsembleError("ensemble_average: zero realizations");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return num::mean_stderr(v);
}

// ---- report ----

void EnsembleReport::add(std::string name, double mean, double se, std::size_t count, std::string units) {
  quantities.push_back({std::move(name), mean, se, count, std::move(units)});
}

const Quantity* EnsembleReport::find(const std::string& name) const {
  for (const auto& q : quantities)
    if (q.name == name) return &q;
  return nullptr;
}

bool EnsembleReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json EnsembleReport::manifest(const std::string& timestamp) const {
  json m;
  m["kind"] = kind;
  m["config_hash"] = config_hash;
  m["config"] = config;
  m["realizations"] = realizations;
  m["failures"] = failures;
  m["failure_messages"] = failure_messages;
  if (sigma) m["smoothing"] = {{"kernel", "lorentzian"}, {"sigma", *sigma}};
  json files = json::array();
  for (const auto& a : artifacts) files.push_back({{"file", a.file}, {"description", a.description}, {"units", a.units}});
  m["files"] = files;
  json qs = json::array();
  for (const auto& q : quantities)
    qs.push_back({{"name", q.name},
                  {"mean", finite_or_null(q.mean)},
                  {"stderr", finite_or_null(q.stderr_)},
                  {"count", q.count},
                  {"units", q.units}});
  m["quantities"] = qs;
  json cs = json::array();
  for (const auto& c : checks)
    cs.push_back({{"name", c.name}, {"quantity", c.quantity}, {"value", finite_or_null(c.value)}, {"passed", c.passed},
                  {"detail", c.detail}});
  m["checks"] = cs;
  m["passed"] = passed();
  // the only run-dependent field
  m["timestamp"] = {{"utc", timestamp}, {"wall_time_s", wall_time}};
  return m;
}

void evaluate_checks(const std::vector<CheckSpec>& checks, EnsembleReport& report) {
  report.checks.clear();
  for (const auto& k : checks) {
    CheckResult r;
    r.name = k.name;
    r.quantity = k.quantity;
    const Quantity* q = report.find(k.quantity);
    if (!q) {
      r.passed = false;
      r.value = std::nan("");
      r.detail = "quantity not produced by this experiment";
      report.checks.push_back(r);
      continue;
    }
    r.value = q->mean;
    bool ok = std::isfinite(r.value);
    std::ostringstream d;
    if (k.min) {
      ok = ok && r.value >= *k.min;
      d << "min " << *k.min << ' ';
    }
    if (k.max) {
      ok = ok && r.value <= *k.max;
      d << "max " << *k.max << ' ';
    }
    if (k.target) {
      const double tol = k.abs_tol + k.rel_tol * std::abs(*k.target);
      ok = ok && std::abs(r.value - *k.target) <= tol;
      d << "target " << *k.target << " tol " << tol;
    }
    r.passed = ok;
    r.detail = d.str();
    report.checks.push_back(r);
  }
}

// ---- files ----

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_atomic: cannot open " + tmp);
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write_atomic: write failed for " + tmp);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("write_atomic: rename failed for " + path);
  }
}

namespace {

std::string with_header(const Artifact& a, const std::string& hash) {
  if (a.file.size() >= 4 && a.file.compare(a.file.size() - 4, 4, ".csv") == 0)
    return "# config_hash: " + hash + "\n" + a.content;
  return a.content;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

std::vector<std::string> emit_plot_data(const EnsembleReport& report, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("emit_plot_data: cannot create " + dir + ": " + ec.message());
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& a : report.artifacts) files.emplace_back((fs::path(dir) / a.file).string(), with_header(a, report.config_hash));
  files.emplace_back((fs::path(dir) / "manifest.json").string(), report.manifest(utc_now()).dump(2) + "\n");

  std::vector<std::string> staged;
  try {
    for (const auto& [path, content] : files) {
      const std::string tmp = path + ".tmp";
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("emit_plot_data: cannot open " + tmp);
      staged.push_back(tmp);
      out << content;
      out.flush();
      if (!out) throw std::runtime_error("emit_plot_data: write failed for " + tmp);
    }
  } catch (...) {
    for (const auto& t : staged) fs::remove(t, ec);
    throw;
  }
  std::vector<std::string> written;
  for (const auto& [path, content] : files) {
    fs::rename(path + ".tmp", path, ec);
    if (ec) throw std::runtime_error("emit_plot_data: rename failed for " + path);
    written.push_back(path);
  }
  return written;
}

std::string read_artifact(const std::string& path, const std::string& expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_artifact: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string s = ss.str();
  const std::string prefix = "# config_hash: ";
  if (s.rfind(prefix, 0) == 0) {
    const auto eol = s.find('\n');
    const std::string h = s.substr(prefix.size(), eol - prefix.size());
    if (h != expected_hash) throw ConfigError(path, "config hash " + h + " does not match " + expected_hash);
    return s.substr(eol + 1);
  }
  try {
    const auto j = json::parse(s);
    if (j.value("config_hash", std::string()) != expected_hash)
      throw ConfigError(path, "config hash does not match " + expected_hash);
    return s;
  } catch (const json::parse_error&) {
    throw ConfigError(path, "artifact carries no config hash");
  }
}

}  // namespace arrowhead
