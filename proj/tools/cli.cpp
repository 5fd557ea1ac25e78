#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hslab/hslab.hpp"

namespace hslab::cli {

namespace {

using io::Json;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Argument parsing

std::vector<double> parse_ladder(const std::string& text) {
  if (text == "default") return {};
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("--q-ladder: '" + tok + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError("--q-ladder: empty list");
  return out;
}

struct Flags {
  int n = 0;
  double s = 0.0;
  double a_const = 0.0;
  std::string a_file;
  double rho = 0.0;
  double eps_min = 0.0;
  double eps_max = 0.0;
  std::string ladder;
  int threads = 0;
  std::string csv, json_out, svg, config;
};

struct Bound {
  CLI::Option* n = nullptr;
  CLI::Option* s = nullptr;
  CLI::Option* a_const = nullptr;
  CLI::Option* a_file = nullptr;
  CLI::Option* rho = nullptr;
  CLI::Option* eps_min = nullptr;
  CLI::Option* eps_max = nullptr;
  CLI::Option* ladder = nullptr;
  CLI::Option* threads = nullptr;
  CLI::Option* csv = nullptr;
  CLI::Option* json_out = nullptr;
  CLI::Option* svg = nullptr;
  CLI::Option* config = nullptr;
};

void add_common(CLI::App* sub, RunConfig& cfg, Flags& f, Bound& b) {
  b.csv = sub->add_option("--csv", f.csv, "CSV output path");
  b.json_out = sub->add_option("--json", f.json_out, "JSON output path");
  b.config = sub->add_option("--config", f.config, "JSON config file; its values override flags");
  b.threads = sub->add_option("--threads", f.threads, "Worker threads (capped by HSLAB_THREADS)");
  sub->add_option("--seed", cfg.seed, "Seed for randomized property checks");
}

void add_potential(CLI::App* sub, Flags& f, Bound& b) {
  b.a_const = sub->add_option("--a-const", f.a_const, "Constant potential a");
  b.a_file = sub->add_option("--a-file", f.a_file, "CSV of radial samples r,a(r)");
  b.a_const->excludes(b.a_file);
}

}  // namespace

RunConfig parse_args(int argc, const char* const* argv) {
  RunConfig cfg;
  Flags f;
  CLI::App app{"Hardy-Sobolev constants, test-function expansions, masses and minimizers"};
  app.require_subcommand(1);

  auto* constants = app.add_subcommand("constants", "K(n,s), 2*(s), c_{n,s}, C1, C2");
  auto* identities = app.add_subcommand("identities", "integral identities of the bubble");
  auto* bubble = app.add_subcommand("bubble", "bubble integrals, PDE residual, extremality");
  auto* expand = app.add_subcommand("expand", "K J(u_eps) - 1 sweep and asymptotic fit");
  auto* mass = app.add_subcommand("mass", "Green's function and mass on S^3");
  auto* minimize = app.add_subcommand("minimize", "subcritical continuation to the critical exponent");

  std::vector<Bound> bounds(6);
  std::vector<CLI::App*> subs{constants, identities, bubble, expand, mass, minimize};
  for (std::size_t k = 0; k < subs.size(); ++k) add_common(subs[k], cfg, f, bounds[k]);
  for (auto* sub : {constants, bubble, expand, minimize}) {
    auto& bd = bounds[static_cast<std::size_t>(std::find(subs.begin(), subs.end(), sub) - subs.begin())];
    bd.n = sub->add_option("--n", f.n, "Dimension n >= 3");
    bd.s = sub->add_option("--s", f.s, "Singularity exponent s in [0, 2)");
  }
  identities->add_option("--grid", cfg.identity_grid, "Parameter grid: default | quick");
  for (auto* sub : {expand, mass, minimize}) {
    auto& bd = bounds[static_cast<std::size_t>(std::find(subs.begin(), subs.end(), sub) - subs.begin())];
    sub->add_option("--radius", cfg.radius, "Sphere radius R");
    add_potential(sub, f, bd);
  }
  auto& be = bounds[3];
  be.rho = expand->add_option("--rho", f.rho, "Cutoff radius (default 0.4 R)");
  be.eps_min = expand->add_option("--eps-min", f.eps_min, "Smallest eps (default 1e-4 rho)");
  be.eps_max = expand->add_option("--eps-max", f.eps_max, "Largest eps (default 1e-2 rho)");
  expand->add_option("--per-decade", cfg.per_decade, "eps samples per decade");
  expand->add_option("--grid-N", cfg.grid_N, "Cells of the Green solver grid (n = 3)");
  be.svg = expand->add_option("--svg", f.svg, "Log-log plot of |K J - 1| against eps");
  mass->add_option("--grid-N", cfg.grid_N, "Radial cells");
  auto& bm = bounds[5];
  bm.ladder = minimize->add_option("--q-ladder", f.ladder, "Comma-separated q values or 'default'");
  minimize->add_option("--grid-N", cfg.grid_N, "Radial cells");
  minimize->add_option("--max-iters", cfg.max_iters, "Iteration cap per rung");
  minimize->add_option("--tol", cfg.tol, "Euler-Lagrange residual tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    throw HelpRequested(active->help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::CallForVersion&) {
    throw HelpRequested("hslab\n");
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  std::size_t k = 0;
  for (; k < subs.size(); ++k) {
    if (subs[k]->parsed()) break;
  }
  cfg.subcommand = subs[k]->get_name();
  const Bound& bd = bounds[k];
  auto given = [](const CLI::Option* o) { return o != nullptr && o->count() > 0; };
  if (given(bd.n)) cfg.n = f.n;
  if (given(bd.s)) cfg.s = f.s;
  if (given(bd.a_const)) cfg.a_const = f.a_const;
  if (given(bd.a_file)) cfg.a_file = f.a_file;
  if (given(bd.rho)) cfg.rho = f.rho;
  if (given(bd.eps_min)) cfg.eps_min = f.eps_min;
  if (given(bd.eps_max)) cfg.eps_max = f.eps_max;
  if (given(bd.ladder)) cfg.q_ladder = parse_ladder(f.ladder);
  if (given(bd.threads)) cfg.threads = f.threads;
  if (given(bd.csv)) cfg.csv_path = f.csv;
  if (given(bd.json_out)) cfg.json_path = f.json_out;
  if (given(bd.svg)) cfg.svg_path = f.svg;
  if (given(bd.config)) {
    cfg.config_path = f.config;
    std::ifstream in(f.config, std::ios::binary);
    if (!in) throw UsageError("--config: cannot read '" + f.config + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_json(cfg, ss.str());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Config file

namespace {

class ConfigReader {
 public:
  static void check_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw UsageError("config: " + path + " must be an object");
    for (const auto& item : obj.items()) {
      const std::string& key = item.key();
      const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                  [&](const char* a) { return key == a; });
      if (!ok) throw UsageError("config: unknown field " + join(path, key));
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  static double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw UsageError("config: " + path + " must be a number");
    return v.get<double>();
  }
  static long long integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw UsageError("config: " + path + " must be an integer");
    return v.get<long long>();
  }
  static std::string string(const json& v, const std::string& path) {
    if (!v.is_string()) throw UsageError("config: " + path + " must be a string");
    return v.get<std::string>();
  }
};

int to_int(long long v, const std::string& path) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw UsageError("config: " + path + " is out of range");
  }
  return static_cast<int>(v);
}

}  // namespace

void apply_config_json(RunConfig& cfg, const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config: invalid JSON: ") + e.what());
  }
  using R = ConfigReader;
  R::check_keys(root, "",
               {"subcommand", "manifold", "bubble", "potential", "grid", "expansion", "solver",
                "output", "seed", "threads"});
  if (root.contains("subcommand")) {
    const auto sub = R::string(root["subcommand"], "subcommand");
    if (sub != cfg.subcommand) {
      throw UsageError("config: subcommand is '" + sub + "' but '" + cfg.subcommand +
                       "' was invoked");
    }
  }
  if (root.contains("manifold")) {
    const auto& m = root["manifold"];
    R::check_keys(m, "manifold", {"kind", "n", "radius"});
    if (m.contains("kind")) {
      const auto kind = R::string(m["kind"], "manifold.kind");
      if (kind != "sphere") throw UsageError("config: manifold.kind must be \"sphere\"");
    }
    if (m.contains("n")) cfg.n = to_int(R::integer(m["n"], "manifold.n"), "manifold.n");
    if (m.contains("radius")) cfg.radius = R::number(m["radius"], "manifold.radius");
  }
  if (root.contains("bubble")) {
    const auto& b = root["bubble"];
    R::check_keys(b, "bubble", {"n", "s"});
    if (b.contains("n")) cfg.n = to_int(R::integer(b["n"], "bubble.n"), "bubble.n");
    if (b.contains("s")) cfg.s = R::number(b["s"], "bubble.s");
  }
  if (root.contains("potential")) {
    const auto& p = root["potential"];
    R::check_keys(p, "potential", {"a_const", "a_file"});
    if (p.contains("a_const")) {
      cfg.a_const = R::number(p["a_const"], "potential.a_const");
      cfg.a_file.reset();
    }
    if (p.contains("a_file")) {
      cfg.a_file = R::string(p["a_file"], "potential.a_file");
      cfg.a_const.reset();
    }
    if (p.contains("a_const") && p.contains("a_file")) {
      throw UsageError("config: potential.a_const and potential.a_file are exclusive");
    }
  }
  if (root.contains("grid")) {
    const auto& g = root["grid"];
    R::check_keys(g, "grid", {"N", "preset"});
    if (g.contains("N")) cfg.grid_N = to_int(R::integer(g["N"], "grid.N"), "grid.N");
    if (g.contains("preset")) cfg.identity_grid = R::string(g["preset"], "grid.preset");
  }
  if (root.contains("expansion")) {
    const auto& e = root["expansion"];
    R::check_keys(e, "expansion", {"rho", "eps_min", "eps_max", "per_decade"});
    if (e.contains("rho")) cfg.rho = R::number(e["rho"], "expansion.rho");
    if (e.contains("eps_min")) cfg.eps_min = R::number(e["eps_min"], "expansion.eps_min");
    if (e.contains("eps_max")) cfg.eps_max = R::number(e["eps_max"], "expansion.eps_max");
    if (e.contains("per_decade")) {
      cfg.per_decade = to_int(R::integer(e["per_decade"], "expansion.per_decade"),
                              "expansion.per_decade");
    }
  }
  if (root.contains("solver")) {
    const auto& s = root["solver"];
    R::check_keys(s, "solver", {"q_ladder", "max_iters", "tol"});
    if (s.contains("q_ladder")) {
      const auto& q = s["q_ladder"];
      if (q.is_string()) {
        if (q.get<std::string>() != "default") {
          throw UsageError("config: solver.q_ladder must be \"default\" or an array of numbers");
        }
        cfg.q_ladder.clear();
      } else if (q.is_array()) {
        cfg.q_ladder.clear();
        for (std::size_t i = 0; i < q.size(); ++i) {
          cfg.q_ladder.push_back(R::number(q[i], "solver.q_ladder[" + std::to_string(i) + "]"));
        }
        if (cfg.q_ladder.empty()) throw UsageError("config: solver.q_ladder is empty");
      } else {
        throw UsageError("config: solver.q_ladder must be \"default\" or an array of numbers");
      }
    }
    if (s.contains("max_iters")) cfg.max_iters = R::integer(s["max_iters"], "solver.max_iters");
    if (s.contains("tol")) cfg.tol = R::number(s["tol"], "solver.tol");
  }
  if (root.contains("output")) {
    const auto& o = root["output"];
    R::check_keys(o, "output", {"csv", "json", "svg"});
    if (o.contains("csv")) cfg.csv_path = R::string(o["csv"], "output.csv");
    if (o.contains("json")) cfg.json_path = R::string(o["json"], "output.json");
    if (o.contains("svg")) cfg.svg_path = R::string(o["svg"], "output.svg");
  }
  if (root.contains("seed")) {
    const long long seed = R::integer(root["seed"], "seed");
    if (seed < 0) throw UsageError("config: seed must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(seed);
  }
  if (root.contains("threads")) cfg.threads = to_int(R::integer(root["threads"], "threads"), "threads");
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

void require_writable(const std::optional<std::string>& path, const char* field) {
  if (!path) return;
  namespace fs = std::filesystem;
  require(!path->empty(), std::string(field) + ": empty path");
  const fs::path p(*path);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  std::error_code ec;
  require(fs::is_directory(dir, ec),
          std::string(field) + ": directory '" + dir.string() + "' does not exist");
  require(!fs::is_directory(p, ec), std::string(field) + ": '" + *path + "' is a directory");
}

int default_n(const RunConfig& cfg) { return cfg.subcommand == "mass" ? 3 : 5; }

}  // namespace

void validate(const RunConfig& cfg) {
  const auto& sub = cfg.subcommand;
  const int n = cfg.n.value_or(default_n(cfg));
  require(n >= 3 && n <= 64, "n: must be an integer in [3, 64]");
  if (cfg.s) require(*cfg.s >= 0.0 && *cfg.s < 2.0, "s: must lie in [0, 2)");
  require(std::isfinite(cfg.radius) && cfg.radius > 0.0, "radius: must be positive");
  if (cfg.a_const) require(std::isfinite(*cfg.a_const), "a_const: must be finite");
  require(!(cfg.a_const && cfg.a_file), "potential: a_const and a_file are exclusive");
  if (cfg.a_file) {
    std::error_code ec;
    require(std::filesystem::is_regular_file(*cfg.a_file, ec),
            "a_file: cannot read '" + *cfg.a_file + "'");
  }
  require(cfg.grid_N >= RadialGrid::kMinNodes && cfg.grid_N <= 1 << 20,
          "grid.N: must lie in [" + std::to_string(RadialGrid::kMinNodes) + ", 1048576]");
  require(cfg.identity_grid == "default" || cfg.identity_grid == "quick",
          "grid: must be \"default\" or \"quick\"");
  if (cfg.rho) {
    require(std::isfinite(*cfg.rho) && *cfg.rho > 0.0, "rho: must be positive");
    require(2.0 * *cfg.rho < std::numbers::pi * cfg.radius, "rho: 2 rho must be below pi R");
  }
  if (cfg.eps_min) require(*cfg.eps_min > 0.0, "eps_min: must be positive");
  if (cfg.eps_max) require(*cfg.eps_max > 0.0, "eps_max: must be positive");
  if (cfg.eps_min && cfg.eps_max) require(*cfg.eps_min < *cfg.eps_max, "eps_min: must be below eps_max");
  require(cfg.per_decade >= 1 && cfg.per_decade <= 1000, "per_decade: must lie in [1, 1000]");
  require(cfg.max_iters >= 1, "max_iters: must be positive");
  require(std::isfinite(cfg.tol) && cfg.tol > 0.0, "tol: must be positive");
  if (cfg.threads) require(*cfg.threads >= 1, "threads: must be positive");
  require_writable(cfg.csv_path, "csv");
  require_writable(cfg.json_path, "json");
  require_writable(cfg.svg_path, "svg");

  if (sub == "mass") require(n == 3, "manifold.n: the mass is defined for n = 3 only");
  if (sub == "expand") {
    const double rho = cfg.rho.value_or(kGreenCutoffFraction * cfg.radius);
    require(rho < 0.5 * std::numbers::pi * cfg.radius, "rho: must lie in (0, pi R / 2)");
    const double hi = cfg.eps_max.value_or(1e-2 * rho);
    const double lo = cfg.eps_min.value_or(1e-4 * rho);
    require(hi <= rho / 10.0 * (1.0 + 1e-12), "eps_max: must not exceed rho / 10");
    require(lo < hi, "eps_min: must be below eps_max");
    require(std::log10(hi / lo) >= 1.5 - 1e-9, "eps range: must span at least 1.5 decades");
  }
  if (sub == "minimize") {
    const double s = cfg.s.value_or(1.0);
    const double crit = 2.0 * (n - s) / (n - 2.0);
    for (std::size_t k = 0; k < cfg.q_ladder.size(); ++k) {
      const double q = cfg.q_ladder[k];
      require(q > 2.0 && q <= crit * (1.0 + 1e-14),
              "q_ladder[" + std::to_string(k) + "]: must lie in (2, 2*(s)]");
      require(k == 0 || q > cfg.q_ladder[k - 1], "q_ladder: must be increasing");
    }
  }
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  unsigned threads;
};

void emit_json(const Context& c, const Json& doc, bool primary) {
  const auto text = doc.dump();
  if (c.cfg.json_path) {
    io::atomic_write(*c.cfg.json_path, text);
  } else if (primary) {
    c.out << text;
  }
}

void emit_csv(const Context& c, const io::CsvTable& table, bool primary) {
  if (c.cfg.csv_path) {
    io::atomic_write(*c.cfg.csv_path, table.str());
  } else if (primary) {
    c.out << table.str();
  }
}

Json anchors(std::initializer_list<const char*> labels) {
  Json a = Json::array();
  for (const char* l : labels) a.push(l);
  return a;
}

Json header(const std::string& command, Json anchor) {
  Json j = Json::object();
  j.set("command", command);
  j.set("paper_anchor", std::move(anchor));
  return j;
}

Potential read_potential_file(const std::string& path, double radius) {
  std::ifstream in(path);
  if (!in) throw DomainError("a_file: cannot read '" + path + "'");
  std::vector<std::pair<double, double>> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double r = 0.0, a = 0.0;
    if (!(ls >> r >> a)) {
      if (pts.empty()) continue;  // header line
      throw DomainError("a_file: malformed line '" + line + "'");
    }
    pts.emplace_back(r, a);
  }
  if (pts.size() < 2) throw DomainError("a_file: need at least two samples");
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (!(pts[i].first > pts[i - 1].first)) throw DomainError("a_file: radii must increase");
  }
  const double L = std::numbers::pi * radius;
  if (pts.front().first > 0.0 || pts.back().first < L * (1.0 - 1e-12)) {
    throw DomainError("a_file: samples must cover [0, pi R]");
  }
  return Potential::radial([pts](double r) {
    if (r <= pts.front().first) return pts.front().second;
    if (r >= pts.back().first) return pts.back().second;
    const auto it = std::upper_bound(pts.begin(), pts.end(), r,
                                     [](double x, const auto& p) { return x < p.first; });
    const auto& [r1, a1] = *it;
    const auto& [r0, a0] = *(it - 1);
    return a0 + (a1 - a0) * (r - r0) / (r1 - r0);
  });
}

Potential make_potential(const RunConfig& cfg) {
  if (cfg.a_file) return read_potential_file(*cfg.a_file, cfg.radius);
  return Potential::constant(cfg.a_const.value_or(0.1));
}

void describe_potential(Json& j, const RunConfig& cfg) {
  if (cfg.a_file) {
    j.set("a_file", *cfg.a_file);
  } else {
    j.set("a_const", cfg.a_const.value_or(0.1));
  }
}

int cmd_constants(const Context& c) {
  const BubbleParams b(c.cfg.n.value_or(5), c.cfg.s.value_or(1.0));
  Json j = header("constants",
                  anchors({"Hardy-Sobolev exponent 2*(s) = 2(n-s)/(n-2)",
                           "sharp constant K(n,s) as the extremal quotient of the bubble Phi",
                           "Gamma-function closed form of K(n,s)",
                           "curvature threshold c_{n,s} = (n-2)(6-s)/(12(2n-2-s))",
                           "expansion constants C1 = int Phi^2 / int |grad Phi|^2 and C2"}));
  const double K = sharp_constant(b);
  const double Kc = sharp_constant_closed_form(b);
  const auto k = expansion_constants(b);
  j.set("n", b.n());
  j.set("s", b.s());
  j.set("crit", b.crit());
  j.set("omega_n_minus_1", sphere_volume(b.n() - 1));
  j.set("K", K);
  j.set("K_closed_form", Kc);
  j.set("K_rel_diff", std::fabs(K - Kc) / K);
  j.set("kappa", bubble_kappa(b));
  j.set("c", k.c);
  if (k.C1) j.set("C1", *k.C1);
  if (k.C2) j.set("C2", *k.C2);
  if (k.C1 && k.C2) j.set("C2_over_C1", *k.C2 / *k.C1);
  if (k.log_prefactor) j.set("log_prefactor", *k.log_prefactor);
  if (b.s() == 0.0) {
    j.set("K_classical", 4.0 / (b.n() * (b.n() - 2.0) *
                                std::pow(sphere_volume(b.n()), 2.0 / b.n())));
  }
  Json integrals = Json::object();
  for (auto f : kAllBubbleFields) {
    if (field_converges(b, f)) integrals.set(std::string(field_name(f)), bubble_integral(b, f));
  }
  j.set("integrals", std::move(integrals));
  emit_json(c, j, true);
  if (c.cfg.csv_path) {
    io::CsvTable t({"quantity", "value"});
    t.add_row({std::string("K"), K});
    t.add_row({std::string("K_closed_form"), Kc});
    t.add_row({std::string("c"), k.c});
    if (k.C1) t.add_row({std::string("C1"), *k.C1});
    if (k.C2) t.add_row({std::string("C2"), *k.C2});
    emit_csv(c, t, false);
  }
  return kExitOk;
}

int cmd_identities(const Context& c) {
  std::vector<BubbleParams> params;
  const bool quick = c.cfg.identity_grid == "quick";
  const std::vector<int> dims = quick ? std::vector<int>{3, 4, 5, 6} : std::vector<int>{3, 4, 5, 6, 7, 8, 9, 10};
  const std::vector<double> svals = quick ? std::vector<double>{0.0, 1.0} : linear_grid(0.0, 1.75, 0.25);
  for (int n : dims) {
    for (double s : svals) params.emplace_back(n, s);
  }
  const auto results = parallel_map<std::vector<IdentityRow>>(
      params.size(), [&](std::size_t i) { return integral_identities(params[i]); }, c.threads);
  io::CsvTable t({"n", "s", "field", "closed_form", "quadrature", "rel_err"});
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (const auto& row : results[i]) {
      t.add_row({static_cast<long long>(params[i].n()), params[i].s(), row.name, row.closed_form,
                 row.quadrature, row.rel_err});
      worst = std::max(worst, row.rel_err);
    }
  }
  emit_csv(c, t, true);
  if (c.cfg.json_path) {
    Json j = header(
        "identities",
        anchors({"int |X|^2 |grad Phi|^2 / int Phi^2 = n(n-2)(n+2-s) / (2(2n-2-s))",
                 "int |X|^{2-s} Phi^{2*} / int Phi^2 = n(n-4) / (2(n-2)(2n-2-s))",
                 "int |grad Phi|^2 = (n-2)(n-s) int Phi^{2*} |X|^{-s}",
                 "omega_2 int t^{2-s} (1+t^{2-s})^{-(5-2s)/(2-s)} dt = omega_2 / (3-s)"}));
    j.set("grid", c.cfg.identity_grid);
    j.set("rows", static_cast<long long>(t.rows()));
    j.set("max_rel_err", worst);
    j.set("tolerance", 1e-8);
    j.set("all_within_tolerance", worst <= 1e-8);
    emit_json(c, j, false);
  }
  return kExitOk;
}

int cmd_bubble(const Context& c) {
  const BubbleParams b(c.cfg.n.value_or(5), c.cfg.s.value_or(1.0));
  io::CsvTable t({"n", "s", "field", "closed_form", "quadrature", "rel_err"});
  double worst = 0.0;
  for (const auto& row : compare_bubble_integrals(b)) {
    t.add_row({static_cast<long long>(b.n()), b.s(), std::string(field_name(row.field)),
               row.closed_form, row.quadrature, row.rel_err});
    worst = std::max(worst, row.rel_err);
  }
  emit_csv(c, t, true);
  if (c.cfg.json_path) {
    const double K = sharp_constant(b);
    const auto ext = extremality_check(b, c.cfg.seed, 20);
    const auto grid = log_spaced(1e-3, 1e3, 241);
    Json j = header("bubble",
                    anchors({"extremal profile Phi(X) = (1 + |X|^{2-s})^{-(n-2)/(2-s)}",
                             "bubble equation Delta Phi = (n-2)(n-s) Phi^{2*-1} / |X|^s",
                             "Euclidean quotient of Phi equals 1/K(n,s)"}));
    j.set("n", b.n());
    j.set("s", b.s());
    j.set("crit", b.crit());
    j.set("max_rel_err", worst);
    j.set("K", K);
    j.set("quotient_times_K", ext.base * K);
    j.set("pde_residual", bubble_pde_residual(b, grid));
    Json e = Json::object();
    e.set("seed", static_cast<long long>(c.cfg.seed));
    e.set("trials", ext.trials);
    e.set("min_ratio", ext.min_ratio);
    e.set("never_smaller", ext.min_ratio >= 1.0 - 1e-12);
    j.set("extremality", std::move(e));
    emit_json(c, j, false);
  }
  return kExitOk;
}

std::vector<double> eps_list_for(const RunConfig& cfg, double rho) {
  const double hi = cfg.eps_max.value_or(1e-2 * rho);
  const double lo = cfg.eps_min.value_or(1e-4 * rho);
  return geometric_eps_list(lo, hi, cfg.per_decade);
}

Json fit_json(const ExpansionFit& fit) {
  Json j = Json::object();
  j.set("model", model_name(fit.model));
  j.set("dimension_rule", model_name(fit.dimension_rule));
  j.set("agrees_with_dimension_rule", fit.agrees_with_dimension_rule());
  j.set("slope", fit.slope);
  j.set("leading", fit.leading);
  j.set("residual", fit.residual);
  Json cands = Json::array();
  for (const auto& m : fit.candidates) {
    Json cj = Json::object();
    cj.set("model", model_name(m.model));
    cj.set("intercept", m.intercept);
    cj.set("slope", m.slope);
    cj.set("nuisance", m.nuisance);
    cj.set("residual", m.residual);
    cands.push(std::move(cj));
  }
  j.set("candidates", std::move(cands));
  return j;
}

int cmd_expand(const Context& c) {
  const auto& cfg = c.cfg;
  const auto m = ModelManifold::round_sphere(cfg.n.value_or(5), cfg.radius);
  const double s = cfg.s.value_or(1.0);
  const double rho = cfg.rho.value_or(kGreenCutoffFraction * cfg.radius);
  const auto a = make_potential(cfg);
  const TestFamily fam(m, s, a, rho, eps_list_for(cfg, rho));
  const auto b = fam.bubble();

  Json j = Json::object();
  ExpansionFit fit;
  double target = 0.0;
  Json extra = Json::object();
  if (m.n() == 3) {
    j = header("expand", anchors({"three-dimensional test function v_eps = eta u_eps + sqrt(eps) beta",
                                  "mass expansion K J(v_eps) = 1 - B eps + o(eps), B proportional to m(x0)",
                                  "Green's function omega_2 G = eta/r + beta, mass m = beta(x0)"}));
    const auto green = solve_green(m, a, cfg.grid_N, rho);
    fit = fit_mass_expansion(fam, green, c.threads);
    target = -mass_target(fam, green.mass);
    extra.set("mass", green.mass);
    extra.set("mass_coefficient", mass_coefficient(fit));
    extra.set("mass_coefficient_target", mass_target(fam, green.mass));
    extra.set("mass_coefficient_combined", mass_target_combined(fam, green.mass));
  } else {
    const char* lead = m.n() == 4
                           ? "n = 4 expansion K J(u_eps) = 1 + c eps^2 ln(1/eps) (a(x0) - Scal/6) + O(eps^2)"
                           : "expansion K J(u_eps) = 1 + (C1 a(x0) - C2 Scal) eps^2 + o(eps^2)";
    j = header("expand", anchors({"bubble test function u_eps(x) = eps^{-(n-2)/2} Phi(d(x0,x)/eps)", lead,
                                  "curvature threshold c_{n,s} = (n-2)(6-s)/(12(2n-2-s))"}));
    fit = fit_high_dim_expansion(fam, c.threads);
    target = high_dim_target(fam);
    extra.set("scalar_curvature", m.scalar_curvature());
    extra.set("c", curvature_threshold(m.n(), s));
  }
  j.set("n", m.n());
  j.set("s", s);
  j.set("radius", m.radius());
  describe_potential(j, cfg);
  j.set("rho", rho);
  j.set("eps_min", fam.eps_list.back());
  j.set("eps_max", fam.eps_list.front());
  j.set("samples", static_cast<long long>(fam.eps_list.size()));
  j.set("K", sharp_constant(b));
  j.set("fit", fit_json(fit));
  j.set("slope_target", target);
  j.set("slope_rel_err", target != 0.0 ? std::fabs(fit.slope - target) / std::fabs(target)
                                       : std::fabs(fit.slope));
  j.set("details", std::move(extra));

  io::CsvTable t({"eps", "J", "KJ_minus_1"});
  std::vector<double> xs, ys, fitted;
  const auto& best = fit.candidate(fit.model);
  for (const auto& smp : fit.samples) {
    t.add_row({smp.eps, smp.J, smp.kj_minus_one});
    xs.push_back(smp.eps);
    ys.push_back(smp.kj_minus_one);
    const auto g = model_basis(fit.model, smp.eps);
    double v = best.intercept + best.slope * g[0];
    for (std::size_t k = 0; k < best.nuisance.size(); ++k) v += best.nuisance[k] * g[k + 1];
    fitted.push_back(v);
  }
  emit_json(c, j, true);
  emit_csv(c, t, false);
  if (cfg.svg_path) {
    const auto svg = io::svg_loglog(
        {{"|K J - 1|", xs, ys, false}, {std::string("fit: ") + std::string(model_name(fit.model)), xs, fitted, true}},
        "K J - 1 against eps (n = " + std::to_string(m.n()) + ")", "eps", "|K J - 1|");
    io::atomic_write(*cfg.svg_path, svg);
  }
  return kExitOk;
}

int cmd_mass(const Context& c) {
  const auto& cfg = c.cfg;
  const auto m = ModelManifold::round_sphere(3, cfg.radius);
  const auto a = make_potential(cfg);
  const auto green = solve_green(m, a, cfg.grid_N);
  Json j = header("mass", anchors({"Green's function of Delta_g + a with omega_2 d(x0,x) G -> 1 at x0",
                                   "decomposition omega_2 G = eta/r + beta, mass m(x0) = beta(x0)",
                                   "comparison: a <= a' implies m(a) >= m(a')"}));
  j.set("radius", cfg.radius);
  describe_potential(j, cfg);
  j.set("grid_N", cfg.grid_N);
  j.set("mass", green.mass);
  j.set("residual", green.residual);
  j.set("coercivity_margin", green.coercivity_margin);
  j.set("cutoff_rho", green.cutoff.rho());
  j.set("pole_exponent", green.mass_alpha);
  j.set("beta_energy", green.beta_energy);
  if (!cfg.a_file) j.set("mass_closed_form", constant_potential_mass(cfg.radius, a.at_pole()));
  emit_json(c, j, true);
  io::CsvTable t({"r", "G", "beta"});
  const auto r = green.G.grid->nodes();
  for (std::size_t i = 0; i < r.size(); ++i) t.add_row({r[i], green.G[i], green.beta[i]});
  emit_csv(c, t, false);
  return kExitOk;
}

int cmd_minimize(const Context& c) {
  const auto& cfg = c.cfg;
  const auto m = ModelManifold::round_sphere(cfg.n.value_or(5), cfg.radius);
  const double s = cfg.s.value_or(1.0);
  const auto a = make_potential(cfg);
  const BubbleParams b(m.n(), s);
  const auto ladder = cfg.q_ladder.empty() ? default_ladder(b) : cfg.q_ladder;
  const auto problem = SubcriticalProblem::make(m, s, a, ladder.back(), cfg.grid_N);
  const RadialOperator op(problem.grid, a);
  const double coercivity = op.coercivity_margin();
  if (!(coercivity > kCoercivityThreshold)) {
    throw CoercivityError(coercivity, "minimize: Delta_g + a is not coercive");
  }
  MinimizerOptions opt;
  opt.tol = cfg.tol;
  opt.max_iters = cfg.max_iters;
  const auto init = bubble_initial_guess(problem, default_initial_eps(m));
  const auto cont = continuation(problem, ladder, init, opt);

  Json j = header("minimize", anchors({"subcritical problem lambda_q = inf J_q(u), q < 2*(s)",
                                       "Euler-Lagrange equation Delta_g u + a u = lambda u^{q-1} / d(x0,x)^s",
                                       "existence criterion lambda < 1/K(n,s)"}));
  j.set("n", m.n());
  j.set("s", s);
  j.set("radius", m.radius());
  describe_potential(j, cfg);
  j.set("grid_N", cfg.grid_N);
  j.set("q_ladder", ladder);
  std::vector<double> residuals;
  Json iters = Json::array();
  Json converged = Json::array();
  for (const auto& st : cont.stages) {
    residuals.push_back(st.el_residual);
    iters.push(st.iterations);
    converged.push(st.converged);
  }
  j.set("lambda_sequence", cont.lambdas());
  j.set("residuals", residuals);
  j.set("iterations", std::move(iters));
  j.set("converged", std::move(converged));
  j.set("complete", cont.complete());
  j.set("cauchy_tail", cont.cauchy_tail());
  j.set("tail_differences", cont.tail_differences());
  const double threshold = 1.0 / sharp_constant(b);
  Json margins = Json::object();
  margins.set("coercivity", coercivity);
  if (cont.complete()) {
    const auto& fin = cont.final_stage();
    const auto v = existence_verdict(fin, b);
    j.set("verdict", verdict_name(v.verdict));
    j.set("under_resolved", v.under_resolved);
    margins.set("threshold", v.margin);
    margins.set("relative_threshold", v.margin / v.threshold);
    j.set("threshold", v.threshold);
    j.set("normalization", fin.normalization);
    j.set("min_u", *std::min_element(fin.u.values.begin(), fin.u.values.end()));
    if (std::fabs(fin.q - b.crit()) <= 1e-14 * b.crit()) {
      const auto eps = geometric_eps_list(0.005 * m.radius(), 0.2 * m.radius(), 6);
      j.set("bubble_family_min", bubble_family_minimum(problem.with_q(fin.q), eps));
    }
  } else {
    j.set("verdict", nullptr);
    j.set("threshold", threshold);
    j.set("failure", cont.failure);
    j.set("failure_index", static_cast<long long>(*cont.failure_index));
  }
  j.set("margins", std::move(margins));
  emit_json(c, j, true);
  if (!cont.stages.empty()) {
    io::CsvTable t({"r", "u"});
    const auto& u = cont.stages.back().u;
    const auto r = u.grid->nodes();
    for (std::size_t i = 0; i < r.size(); ++i) t.add_row({r[i], u[i]});
    emit_csv(c, t, false);
  }
  return cont.complete() ? kExitOk : kExitConvergence;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out) {
  unsigned threads = thread_budget();
  if (cfg.threads) threads = std::min(threads, static_cast<unsigned>(*cfg.threads));
  const Context c{cfg, out, threads};
  const auto& sub = cfg.subcommand;
  if (sub == "constants") return cmd_constants(c);
  if (sub == "identities") return cmd_identities(c);
  if (sub == "bubble") return cmd_bubble(c);
  if (sub == "expand") return cmd_expand(c);
  if (sub == "mass") return cmd_mass(c);
  if (sub == "minimize") return cmd_minimize(c);
  throw UsageError("unknown subcommand '" + sub + "'");
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    const auto cfg = parse_args(argc, argv);
    validate(cfg);
    return run(cfg, out);
  } catch (const HelpRequested& h) {
    out << h.what();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConvergenceError& e) {
    err << "convergence failure: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const PropertyViolation& e) {
    err << "property violation: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace hslab::cli
