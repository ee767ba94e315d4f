#include "frontmix/config_io.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "frontmix/errors.hpp"

namespace frontmix {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& ctx, const std::string& what) {
  throw ConfigError(ctx + ": " + what);
}

// Strict schema: every present key must be in the allowed set.
void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(ctx, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok) bad(ctx, "unknown key \"" + it.key() + "\"");
  }
}

double get_num(const json& j, const std::string& ctx, const char* key,
               double dflt, bool required = false) {
  if (!j.contains(key)) {
    if (required) bad(ctx, std::string("missing \"") + key + "\"");
    return dflt;
  }
  if (!j[key].is_number()) bad(ctx, std::string("\"") + key + "\" must be a number");
  return j[key].get<double>();
}

int get_int(const json& j, const std::string& ctx, const char* key, int dflt,
            bool required = false) {
  if (!j.contains(key)) {
    if (required) bad(ctx, std::string("missing \"") + key + "\"");
    return dflt;
  }
  if (!j[key].is_number_integer())
    bad(ctx, std::string("\"") + key + "\" must be an integer");
  return j[key].get<int>();
}

bool get_bool(const json& j, const std::string& ctx, const char* key,
              bool dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_boolean())
    bad(ctx, std::string("\"") + key + "\" must be a boolean");
  return j[key].get<bool>();
}

Piece parse_piece(const json& j, const std::string& ctx) {
  check_keys(j, ctx, {"kind", "a", "b", "coef"});
  Piece p;
  p.a = get_num(j, ctx, "a", 0.0, true);
  p.b = get_num(j, ctx, "b", 0.0, true);
  if (!j.contains("kind") || !j["kind"].is_string())
    bad(ctx, "missing or non-string \"kind\"");
  const std::string k = j["kind"].get<std::string>();
  if (k == "constant")
    p.kind = PieceKind::constant;
  else if (k == "polynomial")
    p.kind = PieceKind::polynomial;
  else if (k == "sinusoid_window")
    p.kind = PieceKind::sinusoid_window;
  else
    bad(ctx, "unknown piece kind \"" + k + "\"");
  if (!j.contains("coef") || !j["coef"].is_array())
    bad(ctx, "missing or non-array \"coef\"");
  for (const auto& c : j["coef"]) {
    if (!c.is_number()) bad(ctx, "coef entries must be numbers");
    p.coef.push_back(c.get<double>());
  }
  return p;
}

PiecewiseDensity parse_density(const json& j, const std::string& ctx) {
  if (!j.is_array()) bad(ctx, "expected an array of pieces");
  std::vector<Piece> pieces;
  int i = 0;
  for (const auto& pj : j)
    pieces.push_back(parse_piece(pj, ctx + "[" + std::to_string(i++) + "]"));
  return PiecewiseDensity(std::move(pieces));
}

FluxTerm parse_flux_term(const json& j, const std::string& ctx) {
  check_keys(j, ctx,
             {"kind", "amplitude", "rate", "omega", "phase", "t0", "t1",
              "times", "values"});
  if (!j.contains("kind") || !j["kind"].is_string())
    bad(ctx, "missing or non-string \"kind\"");
  const std::string k = j["kind"].get<std::string>();
  FluxTerm t;
  if (k == "exponential")
    t.kind = FluxTerm::Kind::exponential;
  else if (k == "damped_sinusoid")
    t.kind = FluxTerm::Kind::damped_sinusoid;
  else if (k == "tabulated")
    t.kind = FluxTerm::Kind::tabulated;
  else
    bad(ctx, "unknown flux term kind \"" + k + "\"");
  t.amplitude = get_num(j, ctx, "amplitude", t.amplitude);
  t.rate = get_num(j, ctx, "rate", t.rate);
  t.omega = get_num(j, ctx, "omega", t.omega);
  t.phase = get_num(j, ctx, "phase", t.phase);
  t.t0 = get_num(j, ctx, "t0", t.t0);
  t.t1 = get_num(j, ctx, "t1", t.t1);
  if (t.kind == FluxTerm::Kind::tabulated) {
    if (!j.contains("times") || !j.contains("values"))
      bad(ctx, "tabulated term needs \"times\" and \"values\"");
    for (const auto& v : j["times"]) t.times.push_back(v.get<double>());
    for (const auto& v : j["values"]) t.values.push_back(v.get<double>());
  }
  return t;
}

FluxSchedule parse_schedule(const json& j, const std::string& ctx) {
  if (!j.is_array()) bad(ctx, "expected an array of flux terms");
  std::vector<FluxTerm> terms;
  int i = 0;
  for (const auto& tj : j)
    terms.push_back(parse_flux_term(tj, ctx + "[" + std::to_string(i++) + "]"));
  return FluxSchedule(std::move(terms));
}

ProblemSpec parse_problem(const json& j, const std::string& ctx) {
  check_keys(j, ctx,
             {"ell", "D", "v", "rho_a", "rho_b", "j1", "j2", "fronts",
              "dirichlet", "normalized"});
  ProblemSpec p;
  p.ell = get_num(j, ctx, "ell", p.ell);
  p.D = get_num(j, ctx, "D", p.D);
  p.v = get_num(j, ctx, "v", p.v);
  if (j.contains("rho_a")) p.rho_a = parse_density(j["rho_a"], ctx + ".rho_a");
  if (j.contains("rho_b")) p.rho_b = parse_density(j["rho_b"], ctx + ".rho_b");
  if (j.contains("j1")) p.j1 = parse_schedule(j["j1"], ctx + ".j1");
  if (j.contains("j2")) p.j2 = parse_schedule(j["j2"], ctx + ".j2");
  if (j.contains("fronts")) {
    if (!j["fronts"].is_array()) bad(ctx, "\"fronts\" must be an array");
    int i = 0;
    for (const auto& fj : j["fronts"]) {
      const std::string fctx = ctx + ".fronts[" + std::to_string(i++) + "]";
      check_keys(fj, fctx, {"species", "lo", "hi"});
      FrontBlock b;
      if (!fj.contains("species") || !fj["species"].is_string())
        bad(fctx, "missing or non-string \"species\"");
      const std::string sp = fj["species"].get<std::string>();
      if (sp == "a")
        b.species_a = true;
      else if (sp == "b")
        b.species_a = false;
      else
        bad(fctx, "\"species\" must be \"a\" or \"b\"");
      b.lo = get_num(fj, fctx, "lo", 0.0, true);
      b.hi = get_num(fj, fctx, "hi", 0.0, true);
      p.fronts.push_back(b);
    }
  }
  p.dirichlet = get_bool(j, ctx, "dirichlet", false);
  p.normalized = get_bool(j, ctx, "normalized", false);
  p.validate();
  return p;
}

NetworkSpec parse_network(const json& j, const std::string& ctx,
                          int* interval_out, bool* ratio_out,
                          NetGrid* grid_out) {
  check_keys(j, ctx,
             {"ttree", "vertices", "edges", "path", "source_points", "D",
              "releases", "leaf_flux", "grid", "interval", "ratio_curve"});
  NetworkSpec net;
  if (j.contains("ttree")) {
    const json& tj = j["ttree"];
    const std::string tctx = ctx + ".ttree";
    check_keys(tj, tctx,
               {"iterations", "base_length", "attach_frac", "length_ratio"});
    net = build_ttree(get_int(tj, tctx, "iterations", 1, true),
                      get_num(tj, tctx, "base_length", 1.0, true),
                      get_num(tj, tctx, "attach_frac", 0.5),
                      get_num(tj, tctx, "length_ratio", 0.5));
    if (j.contains("vertices") || j.contains("edges") || j.contains("path") ||
        j.contains("source_points"))
      bad(ctx, "\"ttree\" excludes explicit vertices/edges/path/source_points");
  } else {
    net.nv = get_int(j, ctx, "vertices", 0, true);
    if (!j.contains("edges") || !j["edges"].is_array())
      bad(ctx, "missing or non-array \"edges\"");
    int i = 0;
    for (const auto& ej : j["edges"]) {
      const std::string ectx = ctx + ".edges[" + std::to_string(i++) + "]";
      check_keys(ej, ectx, {"a", "b", "length", "rho"});
      NetEdge e;
      e.a = get_int(ej, ectx, "a", 0, true);
      e.b = get_int(ej, ectx, "b", 0, true);
      e.length = get_num(ej, ectx, "length", 0.0, true);
      if (ej.contains("rho")) e.rho = parse_density(ej["rho"], ectx + ".rho");
      net.edges.push_back(e);
    }
    if (!j.contains("path") || !j["path"].is_array())
      bad(ctx, "missing or non-array \"path\"");
    for (const auto& v : j["path"]) net.path.push_back(v.get<int>());
    if (j.contains("source_points"))
      for (const auto& v : j["source_points"])
        net.source_points.push_back(v.get<double>());
  }
  net.D = get_num(j, ctx, "D", net.D);
  if (j.contains("releases")) {
    if (!j["releases"].is_array()) bad(ctx, "\"releases\" must be an array");
    int i = 0;
    for (const auto& rj : j["releases"]) {
      const std::string rctx = ctx + ".releases[" + std::to_string(i++) + "]";
      check_keys(rj, rctx, {"vertex", "mass", "width"});
      add_release(net, get_int(rj, rctx, "vertex", 0, true),
                  get_num(rj, rctx, "mass", 0.0, true),
                  get_num(rj, rctx, "width", 0.0, true));
    }
  }
  if (j.contains("leaf_flux")) {
    const json& lf = j["leaf_flux"];
    if (!lf.is_object()) bad(ctx, "\"leaf_flux\" must map vertex id to terms");
    net.leaf_flux.assign(net.nv, FluxSchedule::zero());
    for (auto it = lf.begin(); it != lf.end(); ++it) {
      int v = -1;
      try {
        v = std::stoi(it.key());
      } catch (...) {
        bad(ctx, "leaf_flux key \"" + it.key() + "\" is not a vertex id");
      }
      if (v < 0 || v >= net.nv)
        bad(ctx, "leaf_flux vertex " + it.key() + " out of range");
      net.leaf_flux[v] =
          parse_schedule(it.value(), ctx + ".leaf_flux." + it.key());
    }
  }
  if (j.contains("grid")) {
    const json& gj = j["grid"];
    const std::string gctx = ctx + ".grid";
    check_keys(gj, gctx, {"dx", "dt", "theta", "record_every"});
    grid_out->dx = get_num(gj, gctx, "dx", grid_out->dx);
    grid_out->dt = get_num(gj, gctx, "dt", grid_out->dt);
    grid_out->theta = get_num(gj, gctx, "theta", grid_out->theta);
    grid_out->record_every = get_int(gj, gctx, "record_every", grid_out->record_every);
  }
  *interval_out = get_int(j, ctx, "interval", *interval_out);
  *ratio_out = get_bool(j, ctx, "ratio_curve", *ratio_out);
  net.validate();
  return net;
}

json piece_to_json(const Piece& p) {
  json j;
  switch (p.kind) {
    case PieceKind::constant: j["kind"] = "constant"; break;
    case PieceKind::polynomial: j["kind"] = "polynomial"; break;
    case PieceKind::sinusoid_window: j["kind"] = "sinusoid_window"; break;
  }
  j["a"] = p.a;
  j["b"] = p.b;
  j["coef"] = p.coef;
  return j;
}

json term_to_json(const FluxTerm& t) {
  json j;
  switch (t.kind) {
    case FluxTerm::Kind::exponential: j["kind"] = "exponential"; break;
    case FluxTerm::Kind::damped_sinusoid: j["kind"] = "damped_sinusoid"; break;
    case FluxTerm::Kind::tabulated: j["kind"] = "tabulated"; break;
  }
  j["amplitude"] = t.amplitude;
  j["rate"] = t.rate;
  if (t.kind == FluxTerm::Kind::damped_sinusoid) {
    j["omega"] = t.omega;
    j["phase"] = t.phase;
  }
  j["t0"] = t.t0;
  if (std::isfinite(t.t1)) j["t1"] = t.t1;
  if (t.kind == FluxTerm::Kind::tabulated) {
    j["times"] = t.times;
    j["values"] = t.values;
  }
  return j;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }

  const std::string ctx = std::filesystem::path(path).filename().string();
  check_keys(j, ctx,
             {"name", "problem", "network", "grid", "horizon", "s_grid",
              "t_grid", "inversion"});

  RunConfig cfg;
  cfg.name = j.contains("name") ? j["name"].get<std::string>()
                                : std::filesystem::path(path).stem().string();
  try {
    if (j.contains("problem"))
      cfg.problem = parse_problem(j["problem"], ctx + ".problem");
    if (j.contains("network"))
      cfg.network =
          parse_network(j["network"], ctx + ".network", &cfg.network_interval,
                        &cfg.ratio_curve, &cfg.net_grid);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    // Domain validation failures surface as config errors at load time.
    throw ConfigError(ctx + ": " + e.what());
  }

  if (j.contains("grid")) {
    const json& gj = j["grid"];
    const std::string gctx = ctx + ".grid";
    check_keys(gj, gctx, {"nx", "dt", "theta", "record_every"});
    cfg.grid.nx = get_int(gj, gctx, "nx", cfg.grid.nx);
    cfg.grid.dt = get_num(gj, gctx, "dt", cfg.grid.dt);
    cfg.grid.theta = get_num(gj, gctx, "theta", cfg.grid.theta);
    cfg.grid.record_every =
        get_int(gj, gctx, "record_every", cfg.grid.record_every);
  }
  cfg.horizon = get_num(j, ctx, "horizon", cfg.horizon);

  auto parse_range = [&](const char* key, GridRange* r) {
    if (!j.contains(key)) return;
    const json& rj = j[key];
    const std::string rctx = ctx + "." + key;
    check_keys(rj, rctx, {"min", "max", "points"});
    r->lo = get_num(rj, rctx, "min", r->lo, true);
    r->hi = get_num(rj, rctx, "max", r->hi, true);
    r->points = get_int(rj, rctx, "points", r->points, true);
    if (!(r->lo > 0.0) && key == std::string("s_grid"))
      bad(rctx, "min must be positive");
    if (r->hi < r->lo) bad(rctx, "max must be >= min");
    if (r->points < 1) bad(rctx, "points must be >= 1");
  };
  parse_range("s_grid", &cfg.s_grid);
  parse_range("t_grid", &cfg.t_grid);

  if (j.contains("inversion")) {
    const json& ij = j["inversion"];
    const std::string ictx = ctx + ".inversion";
    check_keys(ij, ictx, {"method", "terms", "euler_m"});
    if (ij.contains("method")) {
      const std::string m = ij["method"].get<std::string>();
      if (m == "stehfest")
        cfg.method.kind = InversionKind::gaver_stehfest;
      else if (m == "euler")
        cfg.method.kind = InversionKind::euler_summation;
      else
        bad(ictx, "method must be \"stehfest\" or \"euler\"");
    }
    cfg.method.terms = get_int(ij, ictx, "terms", cfg.method.terms);
    cfg.method.euler_m = get_int(ij, ictx, "euler_m", cfg.method.euler_m);
  }
  return cfg;
}

std::string network_to_json(const NetworkSpec& net) {
  json j;
  j["vertices"] = net.nv;
  j["D"] = net.D;
  json edges = json::array();
  for (const auto& e : net.edges) {
    json ej;
    ej["a"] = e.a;
    ej["b"] = e.b;
    ej["length"] = e.length;
    json rho = json::array();
    for (const auto& p : e.rho.pieces()) rho.push_back(piece_to_json(p));
    ej["rho"] = rho;
    edges.push_back(ej);
  }
  j["edges"] = edges;
  j["path"] = net.path;
  j["source_points"] = net.source_points;
  json lf = json::object();
  for (int v = 0; v < (int)net.leaf_flux.size(); ++v) {
    if (net.leaf_flux[v].is_zero()) continue;
    json terms = json::array();
    for (const auto& t : net.leaf_flux[v].terms()) terms.push_back(term_to_json(t));
    lf[std::to_string(v)] = terms;
  }
  if (!lf.empty()) j["leaf_flux"] = lf;
  return j.dump(2) + "\n";
}

uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                (unsigned long long)fnv1a64(bytes.data(), bytes.size()));
  return buf;
}

std::vector<double> geometric_points(const GridRange& g) {
  std::vector<double> out;
  out.reserve(g.points);
  if (g.points == 1) {
    out.push_back(g.lo);
    return out;
  }
  const double r = std::log(g.hi / g.lo) / (g.points - 1);
  for (int i = 0; i < g.points; ++i) out.push_back(g.lo * std::exp(r * i));
  out.back() = g.hi;
  return out;
}

std::vector<double> linear_points(const GridRange& g) {
  std::vector<double> out;
  out.reserve(g.points);
  if (g.points == 1) {
    out.push_back(g.lo);
    return out;
  }
  const double h = (g.hi - g.lo) / (g.points - 1);
  for (int i = 0; i < g.points; ++i) out.push_back(g.lo + h * i);
  out.back() = g.hi;
  return out;
}

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

int thread_budget() {
  if (const char* env = std::getenv("FRONTMIX_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return (int)std::min<long>(v, 64);
    return 1;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return (int)std::min<unsigned>(hw > 0 ? hw : 1, 64);
}

void parallel_for(int n, const std::function<void(int)>& body) {
  const int k = std::min(thread_budget(), n);
  if (k <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(k);
  for (int t = 0; t < k; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

struct CsvWriter::Impl {
  std::ofstream out;
};

CsvWriter::CsvWriter(const std::string& path, const std::string& header)
    : impl_(new Impl) {
  impl_->out.open(path, std::ios::binary);
  if (!impl_->out) throw ConfigError(path + ": cannot open for writing");
  impl_->out << "# manifest: manifest.json\n" << header << "\n";
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << cells[i];
  }
  impl_->out << '\n';
}

void write_manifest(const std::string& out_dir, const RunManifest& m) {
  json j;
  j["tool"] = "frontmix";
  j["version"] = "1.0.0";
  j["command"] = m.command;
  j["config"] = m.config_path;
  j["config_hash"] = m.config_hash;
  json params = json::object();
  for (const auto& [k, v] : m.parameters) params[k] = v;
  j["parameters"] = params;
  j["outputs"] = m.outputs;
  // The only wall-clock data in any output; CSV bodies stay byte-stable.
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  j["written"] = buf;
  std::ofstream out(std::filesystem::path(out_dir) / "manifest.json",
                    std::ios::binary);
  if (!out) throw ConfigError(out_dir + ": cannot write manifest.json");
  out << j.dump(2) << "\n";
}

}  // namespace frontmix
