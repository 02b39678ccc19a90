#include "cli.hpp"

#include "mfde/averaging.hpp"
#include "mfde/esc.hpp"
#include "mfde/mfde.hpp"
#include "mfde/stieltjes.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

namespace mfde::cli {

namespace {

const std::vector<std::string> kSubcommands{"integrate", "mfde", "avg", "es"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double num(const RunConfig& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  const char* s = v.c_str();
  char* end = nullptr;
  const double d = std::strtod(s, &end);
  if (v.empty() || end != s + v.size() || !std::isfinite(d)) {
    throw UsageError("malformed number for " + key + ": '" + v + "'");
  }
  return d;
}

int integer(const RunConfig& cfg, const std::string& key) {
  const double d = num(cfg, key);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw UsageError(key + " must be an integer");
  return static_cast<int>(d);
}

bool on_off(const RunConfig& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v == "on") return true;
  if (v == "off") return false;
  throw UsageError(key + " must be on or off");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d)) {
    throw UsageError("malformed number in " + what + ": '" + s + "'");
  }
  return d;
}

std::vector<double> number_list(const RunConfig& cfg, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split(cfg.get(key), ',')) out.push_back(parse_double(item, key));
  if (out.empty()) throw UsageError(key + " is empty");
  return out;
}

std::vector<Jump> jump_list(const RunConfig& cfg, const std::string& key) {
  std::vector<Jump> out;
  const std::string& v = cfg.get(key);
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError(key + " entries must be time:magnitude");
    out.push_back({parse_double(trim(item.substr(0, colon)), key),
                   parse_double(trim(item.substr(colon + 1)), key)});
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << text;
}

std::string summary_path_for(const std::string& out) {
  const auto dot = out.rfind('.');
  const auto slash = out.rfind('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? out.substr(0, dot) : out) + "_summary.txt";
}

struct Named {
  std::function<double(double)> fn;
  std::function<double(double)> primitive;
};

const std::map<std::string, Named>& densities() {
  static const std::map<std::string, Named> m{
      {"one", {[](double) { return 1.0; }, [](double t) { return t; }}},
      {"zero", {{}, {}}},
      {"t", {[](double t) { return t; }, [](double t) { return 0.5 * t * t; }}},
      {"exp", {[](double t) { return std::exp(t); }, [](double t) { return std::exp(t); }}},
      {"cos2",
       {[](double t) { return std::cos(t) * std::cos(t); },
        [](double t) { return 0.5 * t + 0.25 * std::sin(2.0 * t); }}},
  };
  return m;
}

const std::map<std::string, std::function<double(double)>>& integrands() {
  static const std::map<std::string, std::function<double(double)>> m{
      {"one", [](double) { return 1.0; }},
      {"s", [](double s) { return s; }},
      {"s2", [](double s) { return s * s; }},
      {"cos", [](double s) { return std::cos(s); }},
      {"exp", [](double s) { return std::exp(s); }},
  };
  return m;
}

template <class Map>
const typename Map::mapped_type& lookup(const Map& m, const std::string& id,
                                        const std::string& what) {
  auto it = m.find(id);
  if (it == m.end()) {
    std::string known;
    for (const auto& [k, v] : m) known += (known.empty() ? "" : ", ") + k;
    throw UsageError("unknown " + what + " '" + id + "' (" + known + ")");
  }
  return it->second;
}

// ---- integrate -------------------------------------------------------------

int run_integrate(const RunConfig& cfg) {
  const Named& dens = lookup(densities(), cfg.get("density"), "density");
  const auto& f = lookup(integrands(), cfg.get("f"), "integrand");
  const double a = num(cfg, "from");
  const double b = num(cfg, "to");
  const int levels = integer(cfg, "levels");
  QuadConfig q;
  q.base_mesh = num(cfg, "mesh");
  q.abs_tol = num(cfg, "tol");
  if (levels < 1 || levels > 24) throw UsageError("levels must lie in [1, 24]");
  std::vector<Jump> jumps = jump_list(cfg, "jumps");
  std::optional<Integrator> g;
  try {
    q.validate();
    g.emplace(0.0, 0.0, dens.fn, jumps, dens.primitive);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const double value = integrate_scalar(f, *g, a, b, q);
  const auto ladder = refine_oracle(scalar_integrand(f), *g, a, b, levels);
  std::ostringstream os;
  os << "value=" << fmt17(value) << "\n";
  os << "level,approximation,abs_delta\n";
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    os << k + 1 << "," << fmt17(ladder[k][0]) << "," << fmt17(std::abs(ladder[k][0] - value))
       << "\n";
  }
  std::cout << os.str();
  return 0;
}

// ---- mfde ------------------------------------------------------------------

MfdeProblem build_mfde(const RunConfig& cfg) {
  const std::string& ex = cfg.get("example");
  const double sigma = num(cfg, "sigma");
  const double step = num(cfg, "step");
  const double tol = num(cfg, "tol");
  if (!(sigma > 0.0) || !(step > 0.0) || !(tol > 0.0)) {
    throw UsageError("sigma, step and tol must be positive");
  }
  MfdeProblem p;
  if (ex == "tanh") {
    p = example_tanh(sigma, step, tol);
  } else if (ex == "linear") {
    try {
      p = example_linear(num(cfg, "a"), num(cfg, "b"), num(cfg, "delay"), num(cfg, "phi0"),
                         jump_list(cfg, "jumps"), sigma, step, tol);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  } else {
    throw UsageError("unknown example '" + ex + "' (tanh, linear)");
  }
  p.t0 = num(cfg, "t0");
  return p;
}

std::string trajectory_csv(const Trajectory& x) {
  std::ostringstream os;
  const int d = x.dim();
  os << "t";
  for (const char* name : {"value", "post_jump_value"}) {
    for (int i = 0; i < d; ++i) {
      os << "," << name;
      if (d > 1) os << "_" << i + 1;
    }
  }
  os << "\n";
  for (std::size_t k = 0; k < x.mesh().size(); ++k) {
    os << fmt17(x.mesh()[k]);
    for (int i = 0; i < d; ++i) os << "," << fmt17(x.values()[k][i]);
    for (int i = 0; i < d; ++i) os << "," << fmt17(x.posts()[k][i]);
    os << "\n";
  }
  return os.str();
}

int run_mfde(const RunConfig& cfg) {
  const MfdeProblem p = build_mfde(cfg);
  const int samples = integer(cfg, "hypothesis-samples");
  if (samples < 0) throw UsageError("hypothesis-samples must be >= 0");
  const std::string& out = cfg.get("out");
  Entries res;
  int code = 0;
  try {
    const SolveResult r = solve_picard(p);
    const double resid = residual(r.x, p);
    res = {{"status", "solved"},
           {"residual", fmt17(resid)},
           {"iterations", std::to_string(r.iterations)},
           {"windows", std::to_string(r.windows)},
           {"final_delta", fmt17(r.final_delta)},
           {"x_end", fmt17(r.x.values().back()[0])}};
    if (samples > 0) {
      const HypothesisReport h = check_hypotheses(p, samples, cfg.seed);
      res.push_back({"hypothesis_b2_ratio", fmt17(h.b2_ratio)});
      res.push_back({"hypothesis_b3_ratio", fmt17(h.b3_ratio)});
      res.push_back({"hypothesis_b4_ratio", fmt17(h.b4_ratio)});
      res.push_back({"hypothesis_b4_label", h.b4_label});
      res.push_back({"hypothesis_b6_ratio", fmt17(h.b6_ratio)});
    }
    if (!out.empty()) write_text(out, trajectory_csv(r.x));
    std::cout << "mfde: residual=" << fmt17(resid) << " iterations=" << r.iterations
              << " windows=" << r.windows << "\n";
  } catch (const ConvergenceError& e) {
    res = {{"status", "no-convergence"}, {"error", e.what()},
           {"final_delta", fmt17(e.final_delta())}};
    code = 1;
  } catch (const NumericalError& e) {
    res = {{"status", "numerical-failure"}, {"error", e.what()}};
    code = 1;
  }
  if (!out.empty()) write_text(summary_path_for(out), format_summary(cfg, res));
  if (code != 0) std::cerr << "mfde: " << res[1].second << "\n";
  return code;
}

// ---- avg -------------------------------------------------------------------

AvgProblem build_avg(const RunConfig& cfg) {
  const std::string& c = cfg.get("case");
  const double L = num(cfg, "L");
  const double eps0 = num(cfg, "eps0");
  const double phi0 = num(cfg, "phi0");
  if (!(L > 0.0) || !(eps0 > 0.0)) throw UsageError("L and eps0 must be positive");
  AvgProblem p;
  if (c == "linear") {
    const double a0 = num(cfg, "a0");
    const double b0 = num(cfg, "b0");
    p = linear_case(a0, b0, phi0, L, eps0);
    const double T = num(cfg, "T");
    if (!(T > 0.0)) throw UsageError("T must be positive");
    const double w = 2.0 * std::numbers::pi / T;
    p.f = [a0, b0, w](double s, const History& psi) {
      Vec out(1);
      out[0] = (a0 + b0 * std::cos(w * s)) * psi.component(0.0, 0);
      return out;
    };
    p.T = T;
    p.alpha = T;
  } else if (c == "sine") {
    p = sine_case(phi0, L, eps0);
  } else {
    throw UsageError("unknown case '" + c + "' (linear, sine, config:<file>)");
  }
  p.step = num(cfg, "step");
  if (!(p.step > 0.0)) throw UsageError("step must be positive");
  return p;
}

int run_avg(const RunConfig& cfg) {
  const AvgProblem p = build_avg(cfg);
  const std::vector<double> eps = number_list(cfg, "eps");
  for (double e : eps) {
    if (!(e > 0.0) || e > p.eps0 * (1.0 + 1e-12)) {
      throw UsageError("every eps must lie in (0, eps0]");
    }
  }
  AvgReport rep;
  try {
    rep = compare(p, eps, sweep_threads());
  } catch (const NumericalError& e) {
    std::cerr << "avg: " << e.what() << "\n";
    return 1;
  }
  const std::string slope = rep.slope_valid ? fmt17(rep.slope) : "nan";
  std::ostringstream csv;
  csv << "eps,sup_error,J_times_eps,pass,slope\n";
  bool failed = false;
  for (const auto& c : rep.cases) {
    failed = failed || !c.solved;
    csv << fmt17(c.eps) << "," << (c.solved ? fmt17(c.sup_error) : "nan") << ","
        << fmt17(c.j_times_eps) << "," << (c.pass ? "true" : "false") << "," << slope << "\n";
  }
  const std::string& out = cfg.get("out");
  Entries res{{"status", failed ? "numerical-failure" : "solved"},
              {"theoretical_J", fmt17(rep.theoretical_J)},
              {"estimate_based", rep.estimate_based ? "true" : "false"},
              {"slope", slope},
              {"all_within_bound", rep.all_within_bound() ? "true" : "false"}};
  for (const auto& c : rep.cases) {
    if (!c.solved) res.push_back({"failure_eps_" + fmt17(c.eps), c.failure});
  }
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(out, csv.str());
    write_text(summary_path_for(out), format_summary(cfg, res));
  }
  std::cout << "avg: J=" << fmt17(rep.theoretical_J) << " slope=" << slope
            << " within_bound=" << (rep.all_within_bound() ? "true" : "false") << "\n";
  return failed ? 1 : 0;
}

// ---- es --------------------------------------------------------------------

EsParams build_es(const RunConfig& cfg) {
  const std::string& preset = cfg.get("preset");
  EsParams p;
  if (preset == "table1") {
    p = EsParams::table1();
  } else if (preset != "none") {
    throw UsageError("unknown preset '" + preset + "' (table1, none)");
  }
  p.k_gain = num(cfg, "k");
  p.c = num(cfg, "c");
  p.a = num(cfg, "a");
  p.omega = num(cfg, "omega");
  p.theta_star = num(cfg, "theta-star");
  p.y_star = num(cfg, "y-star");
  p.hessian = num(cfg, "hessian");
  p.theta_hat0 = num(cfg, "theta-hat0");
  p.u0 = num(cfg, "u0");
  p.dt = num(cfg, "dt");
  p.t_end = num(cfg, "t-end");
  p.denom_floor = num(cfg, "denom-floor");
  p.predictor_on = on_off(cfg, "predictor");
  if (cfg.get("washout") != "auto") p.washout = num(cfg, "washout");
  const std::string& feas = cfg.get("feasibility");
  if (feas == "abort") {
    p.feasibility = FeasibilityPolicy::abort;
  } else if (feas == "monitor") {
    p.feasibility = FeasibilityPolicy::monitor;
  } else {
    throw UsageError("feasibility must be abort or monitor");
  }
  const std::string& model = cfg.get("model");
  if (model != "full" && model != "average") throw UsageError("model must be full or average");
  p.average_model = model == "average";
  try {
    p.delay = make_delay(cfg.get("delay"));
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return p;
}

std::string trace_csv(const EsTrace& tr) {
  std::string s = "t,theta,theta_hat,y,G,H_hat,U,Gamma,phi,sigma,feas_margin\n";
  s.reserve(tr.size() * 200);
  const bool delays = tr.phi.size() == tr.size() && tr.sigma.size() == tr.size();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double row[] = {tr.times[i], tr.theta[i], tr.theta_hat[i], tr.y[i], tr.G[i],
                          tr.H_hat[i], tr.U[i],     tr.Gamma[i],
                          delays ? tr.phi[i] : std::nan(""),
                          delays ? tr.sigma[i] : std::nan(""), tr.feas_margin[i]};
    for (std::size_t k = 0; k < std::size(row); ++k) {
      if (k) s += ',';
      s += fmt17(row[k]);
    }
    s += '\n';
  }
  return s;
}

std::string pde_csv(const PdeDiag& d) {
  std::string s = "t,x,alpha\n";
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    for (std::size_t j = 0; j < d.x_grid.size(); ++j) {
      s += fmt17(d.times[k]) + "," + fmt17(d.x_grid[j]) + "," + fmt17(d.alpha[k][j]) + "\n";
    }
  }
  return s;
}

Entries flag_entries(const EsTrace& tr) {
  return {{"delay_rate_warning", tr.flags.delay_rate_warning ? "true" : "false"},
          {"delay_rate_time", fmt17(tr.flags.delay_rate_time)},
          {"feasibility_clamps", std::to_string(tr.flags.feasibility_clamps)},
          {"first_violation_time", fmt17(tr.flags.first_violation_time)}};
}

int run_es(const RunConfig& cfg) {
  const EsParams p = build_es(cfg);
  const int grid = integer(cfg, "pde-grid");
  const int stride = integer(cfg, "pde-stride");
  if (grid != 0 && grid < 2) throw UsageError("pde-grid must be 0 or >= 2");
  if (stride < 1) throw UsageError("pde-stride must be >= 1");
  double tail = 0.75 * p.t_end;
  if (cfg.get("tail-start") != "auto") tail = num(cfg, "tail-start");
  if (!(tail <= p.t_end)) throw UsageError("tail-start exceeds t-end");
  const std::string& prefix = cfg.get("out");

  auto emit = [&](const EsTrace& tr, const Entries& res) {
    if (prefix.empty()) return;
    write_text(prefix + "_trace.csv", trace_csv(tr));
    write_text(prefix + "_summary.txt", format_summary(cfg, res));
  };

  const auto start = std::chrono::steady_clock::now();
  EsTrace tr;
  try {
    tr = simulate(p);
  } catch (const FeasibilityError& e) {
    Entries res{{"status", "feasibility-abort"},
                {"converged", "false"},
                {"error", e.what()},
                {"abort_time", fmt17(e.time())}};
    for (auto& kv : flag_entries(e.partial())) res.push_back(kv);
    emit(e.partial(), res);
    std::cerr << "es: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    emit(EsTrace{}, {{"status", "numerical-failure"}, {"converged", "false"}, {"error", e.what()}});
    std::cerr << "es: " << e.what() << "\n";
    return 1;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const EsMetrics m = metrics(tr, tail);
  const bool converged = m.theta_err <= 0.35 && m.y_err <= 0.10 && m.u_abs <= 0.2;
  Entries res{{"status", "completed"},
              {"converged", converged ? "true" : "false"},
              {"tail_start", fmt17(tail)},
              {"theta_err", fmt17(m.theta_err)},
              {"y_err", fmt17(m.y_err)},
              {"u_abs", fmt17(m.u_abs)},
              {"min_feas_margin", fmt17(m.min_feas_margin)}};
  for (auto& kv : flag_entries(tr)) res.push_back(kv);

  int code = 0;
  std::optional<PdeDiag> pde;
  if (grid >= 2) {
    try {
      pde = pde_diag(tr, grid, stride);
      res.push_back({"pde_boundary_gap", fmt17(pde->max_boundary_gap)});
    } catch (const NumericalError& e) {
      res.push_back({"pde_error", e.what()});
      code = 1;
    }
  }
  emit(tr, res);
  if (pde && !prefix.empty()) write_text(prefix + "_pde.csv", pde_csv(*pde));
  std::cout << "es: converged=" << (converged ? "true" : "false")
            << " theta_err=" << fmt17(m.theta_err) << " y_err=" << fmt17(m.y_err)
            << " u_abs=" << fmt17(m.u_abs) << " min_feas_margin=" << fmt17(m.min_feas_margin)
            << " runtime_s=" << secs << "\n";
  return code;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot read config file " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

const std::string& RunConfig::get(const std::string& key) const {
  for (const auto& [k, v] : params) {
    if (k == key) return v;
  }
  throw std::logic_error("unknown config key " + key);
}

const Entries& defaults_for(const std::string& sub) {
  static const std::map<std::string, Entries> table{
      {"integrate",
       {{"density", "one"},
        {"f", "one"},
        {"jumps", ""},
        {"from", "0"},
        {"to", "1"},
        {"mesh", "0.01"},
        {"tol", "1e-10"},
        {"levels", "8"},
        {"seed", "42"}}},
      {"mfde",
       {{"example", "tanh"},
        {"t0", "0"},
        {"sigma", "2"},
        {"step", "0.005"},
        {"tol", "1e-10"},
        {"a", "0"},
        {"b", "1"},
        {"delay", "0"},
        {"phi0", "0"},
        {"jumps", ""},
        {"hypothesis-samples", "20"},
        {"out", ""},
        {"seed", "42"}}},
      {"avg",
       {{"case", "linear"},
        {"eps", "0.2,0.1,0.05,0.025"},
        {"L", "1"},
        {"T", "6.2831853071795862"},
        {"a0", "-0.5"},
        {"b0", "1"},
        {"phi0", "1"},
        {"eps0", "0.2"},
        {"step", "0.05"},
        {"out", ""},
        {"seed", "42"}}},
      {"es",
       {{"preset", "table1"},
        {"k", "0.2"},
        {"c", "2"},
        {"a", "0.2"},
        {"omega", "8"},
        {"theta-star", "8"},
        {"y-star", "64"},
        {"hessian", "-1"},
        {"delay", "sin5sq"},
        {"predictor", "on"},
        {"dt", "1e-3"},
        {"t-end", "200"},
        {"theta-hat0", "0"},
        {"u0", "0"},
        {"washout", "auto"},
        {"feasibility", "abort"},
        {"denom-floor", "1e-6"},
        {"model", "full"},
        {"tail-start", "auto"},
        {"pde-grid", "21"},
        {"pde-stride", "100"},
        {"out", ""},
        {"seed", "42"}}},
  };
  auto it = table.find(sub);
  if (it == table.end()) throw UsageError("unknown subcommand '" + sub + "'");
  return it->second;
}

KeyMap parse_config_text(const std::string& text, const std::string& sub) {
  const Entries& known = defaults_for(sub);
  auto is_known = [&](const std::string& k) {
    for (const auto& [name, v] : known) {
      if (name == k) return true;
    }
    return false;
  };
  KeyMap out;
  std::string section = sub;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      const bool ok = section == "result" ||
                      std::find(kSubcommands.begin(), kSubcommands.end(), section) !=
                          kSubcommands.end();
      if (!ok) throw UsageError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section != sub) continue;
    if (!is_known(key)) throw UsageError(where + ": unknown key '" + key + "'");
    out[key] = value;
  }
  return out;
}

RunConfig resolve(const std::string& sub, const KeyMap& file, const KeyMap& cli) {
  RunConfig cfg;
  cfg.subcommand = sub;
  for (const auto& [k, def] : defaults_for(sub)) {
    std::string v = def;
    if (auto it = file.find(k); it != file.end()) v = it->second;
    if (auto it = cli.find(k); it != cli.end()) v = it->second;
    cfg.params.emplace_back(k, v);
  }
  for (const auto* m : {&file, &cli}) {
    for (const auto& [k, v] : *m) {
      bool ok = false;
      for (const auto& [name, d] : cfg.params) ok = ok || name == k;
      if (!ok) throw UsageError("unknown key '" + k + "'");
    }
  }
  const std::string& seed = cfg.get("seed");
  char* end = nullptr;
  const unsigned long long s = std::strtoull(seed.c_str(), &end, 10);
  if (seed.empty() || seed.front() == '-' || end != seed.c_str() + seed.size()) {
    throw UsageError("seed must be an unsigned integer");
  }
  cfg.seed = s;
  return cfg;
}

RunConfig parse_args(int argc, const char* const* argv) {
  CLI::App app{"Measure FDE toolkit: Stieltjes integration, Picard solver, averaging, "
               "extremum seeking"};
  app.name("mfde");
  app.require_subcommand(1);

  std::map<std::string, std::map<std::string, std::string>> storage;
  std::map<std::string, std::map<std::string, CLI::Option*>> opts;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> blurbs{
      {"integrate", "Stieltjes integral of f against g with the refinement ladder"},
      {"mfde", "solve a measure FDE by windowed Picard iteration"},
      {"avg", "periodic averaging comparison over an eps sweep"},
      {"es", "extremum seeking with state-dependent delay and predictor feedback"}};
  for (const auto& sub : kSubcommands) {
    CLI::App* s = app.add_subcommand(sub, blurbs.at(sub));
    subs[sub] = s;
    s->add_option("--config", config_paths[sub], "key=value config file");
    for (const auto& [key, def] : defaults_for(sub)) {
      std::string help = def.empty() ? "" : "default: " + def;
      opts[sub][key] = s->add_option("--" + key, storage[sub][key], help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return {};
  } catch (const CLI::ParseError& e) {
    std::ostringstream os;
    os << e.what() << "\n" << app.help();
    throw UsageError(os.str());
  }

  for (const auto& sub : kSubcommands) {
    if (!subs[sub]->parsed()) continue;
    KeyMap cli;
    for (const auto& [key, opt] : opts[sub]) {
      if (opt->count() > 0) cli[key] = storage[sub][key];
    }
    KeyMap file;
    if (!config_paths[sub].empty()) file = parse_config_text(read_file(config_paths[sub]), sub);
    if (sub == "avg") {
      // --case config:<file> pulls the case description from a file.
      auto pick = cli.count("case") ? cli.at("case") : (file.count("case") ? file.at("case") : "");
      const std::string prefix = "config:";
      if (pick.rfind(prefix, 0) == 0) {
        KeyMap from = parse_config_text(read_file(pick.substr(prefix.size())), sub);
        for (const auto& [k, v] : file) from[k] = v;
        file = from;
        cli.erase("case");
        if (file.count("case") && file.at("case").rfind(prefix, 0) == 0) {
          throw UsageError("nested config: case");
        }
        if (!file.count("case")) file["case"] = "linear";
      }
    }
    return resolve(sub, file, cli);
  }
  throw UsageError(app.help());
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_summary(const RunConfig& cfg, const Entries& results) {
  std::ostringstream os;
  os << "# resolved configuration; usable as --config input\n";
  os << "[" << cfg.subcommand << "]\n";
  for (const auto& [k, v] : cfg.params) os << k << " = " << v << "\n";
  os << "\n[result]\n";
  for (const auto& [k, v] : results) {
    std::string clean = v;
    for (char& ch : clean) {
      if (ch == '\n' || ch == '#') ch = ' ';
    }
    os << k << " = " << clean << "\n";
  }
  return os.str();
}

int run(const RunConfig& cfg) {
  if (cfg.subcommand == "integrate") return run_integrate(cfg);
  if (cfg.subcommand == "mfde") return run_mfde(cfg);
  if (cfg.subcommand == "avg") return run_avg(cfg);
  if (cfg.subcommand == "es") return run_es(cfg);
  throw UsageError("unknown subcommand '" + cfg.subcommand + "'");
}

int main_entry(int argc, const char* const* argv) {
  try {
    const RunConfig cfg = parse_args(argc, argv);
    if (cfg.subcommand.empty()) return 0;  // help
    return run(cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mfde::cli
