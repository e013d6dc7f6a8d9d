#include "ncfilter/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ncfilter/extended.hpp"

namespace ncfilter {

using json = nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& why) {
  fail(ErrorCode::config, path + ": " + why);
}

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) config_error(path, "expected an object");
  std::vector<std::string> unknown;
  for (const auto& item : obj.items())
    if (!allowed.count(item.key())) unknown.push_back(item.key());
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    config_error(path, "unknown key(s): " + list);
  }
}

double get_number(const json& obj, const std::string& key,
                  const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) config_error(path + "." + key, "missing");
  if (!it->is_number()) config_error(path + "." + key, "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) config_error(path + "." + key, "must be finite");
  return v;
}

double get_number_or(const json& obj, const std::string& key, double fallback,
                     const std::string& path) {
  return obj.contains(key) ? get_number(obj, key, path) : fallback;
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) config_error(path + "." + key, "missing");
  if (!it->is_string()) config_error(path + "." + key, "expected a string");
  return it->get<std::string>();
}

cplx parse_complex(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    config_error(path, "expected a complex number [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

Operator parse_operator(const json& j, int dim, const std::string& path) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(dim) * dim)
    config_error(path, "expected " + std::to_string(dim * dim) +
                           " row-major [re, im] entries");
  Operator op(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) {
      const auto idx = static_cast<std::size_t>(r * dim + c);
      op(r, c) = parse_complex(j[idx], path + "[" + std::to_string(idx) + "]");
    }
  if (!is_finite(op)) config_error(path, "non-finite entry");
  return op;
}

json operator_json(const Operator& op) {
  json out = json::array();
  for (int r = 0; r < op.rows(); ++r)
    for (int c = 0; c < op.cols(); ++c) out.push_back(complex_json(op(r, c)));
  return out;
}

Envelope parse_envelope(const json& j, Envelope::Mode mode,
                        const std::string& path) {
  const std::string kind = get_string(j, "kind", path);
  try {
    if (kind == "gaussian") {
      check_keys(j, path, {"kind", "omega", "t_c"});
      const double omega = get_number(j, "omega", path);
      if (!(omega > 0.0)) config_error(path + ".omega", "must be > 0");
      return Envelope::gaussian(omega, get_number(j, "t_c", path), mode);
    }
    if (kind == "tabulated") {
      check_keys(j, path, {"kind", "times", "values"});
      if (!j.contains("times") || !j["times"].is_array())
        config_error(path + ".times", "expected an array");
      if (!j.contains("values") || !j["values"].is_array())
        config_error(path + ".values", "expected an array");
      std::vector<double> times;
      for (const auto& x : j["times"]) {
        if (!x.is_number()) config_error(path + ".times", "expected numbers");
        times.push_back(x.get<double>());
      }
      std::vector<cplx> values;
      for (std::size_t i = 0; i < j["values"].size(); ++i)
        values.push_back(parse_complex(j["values"][i],
                                       path + ".values[" + std::to_string(i) + "]"));
      return Envelope::tabulated(std::move(times), std::move(values), mode);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    config_error(path, e.what());
  }
  config_error(path + ".kind", "expected \"gaussian\" or \"tabulated\"");
}

json envelope_json(const Envelope& e) {
  if (e.kind() == Envelope::Kind::gaussian)
    return {{"kind", "gaussian"}, {"omega", e.omega()}, {"t_c", e.t_c()}};
  json values = json::array();
  for (const auto& v : e.values()) values.push_back(complex_json(v));
  return {{"kind", "tabulated"}, {"times", e.times()}, {"values", values}};
}

Operator parse_rho0(const json& j, int dim, std::string& kind,
                    const std::string& path) {
  if (j.is_string()) {
    kind = j.get<std::string>();
    if (kind == "ground") return projector(dim, 0);
    if (kind == "excited") return projector(dim, dim - 1);
    config_error(path, "expected \"ground\", \"excited\" or a matrix");
  }
  kind = "matrix";
  Operator rho = parse_operator(j, dim, path);
  if (!is_hermitian(rho, 1e-10)) config_error(path, "must be Hermitian");
  if (std::abs(rho.trace() - cplx(1.0)) > 1e-10)
    config_error(path, "must have unit trace");
  Eigen::SelfAdjointEigenSolver<Operator> es(rho);
  if (es.eigenvalues().minCoeff() < -1e-10)
    config_error(path, "must be positive semidefinite");
  return rho;
}

void parse_system(const json& j, ScenarioConfig& cfg) {
  const std::string path = "system";
  if (!j.is_object()) config_error(path, "expected an object");
  int dim;
  if (j.contains("preset")) {
    check_keys(j, path, {"preset", "kappa", "rho0"});
    cfg.system_preset = get_string(j, "preset", path);
    if (cfg.system_preset != "two-level-decay")
      config_error(path + ".preset", "unknown system preset '" +
                                         cfg.system_preset + "'");
    cfg.kappa = get_number_or(j, "kappa", 1.0, path);
    if (!(cfg.kappa > 0.0)) config_error(path + ".kappa", "must be > 0");
    cfg.model = SystemModel::two_level_decay(cfg.kappa);
    dim = 2;
  } else {
    check_keys(j, path, {"dim", "H", "L", "S", "rho0"});
    cfg.system_preset.clear();
    const double d = get_number(j, "dim", path);
    if (d < 1 || d > 8 || d != std::floor(d))
      config_error(path + ".dim", "must be an integer in 1..8");
    dim = static_cast<int>(d);
    if (!j.contains("L")) config_error(path + ".L", "missing");
    const Operator H = j.contains("H") ? parse_operator(j["H"], dim, path + ".H")
                                       : Operator::Zero(dim, dim);
    const Operator L = parse_operator(j["L"], dim, path + ".L");
    const Operator S = j.contains("S") ? parse_operator(j["S"], dim, path + ".S")
                                       : identity(dim);
    try {
      cfg.model = SystemModel::make(H, L, S);
    } catch (const Error& e) {
      config_error(path, e.what());
    }
  }
  cfg.rho0 = parse_rho0(j.contains("rho0") ? j["rho0"] : json("ground"), dim,
                        cfg.rho0_kind, path + ".rho0");
}

void parse_field(const json& j, ScenarioConfig& cfg) {
  const std::string path = "field";
  if (!j.is_object()) config_error(path, "expected an object");
  const std::string kind = get_string(j, "kind", path);
  if (kind == "photon_combo") {
    check_keys(j, path, {"kind", "gamma", "envelope"});
    if (!j.contains("gamma")) config_error(path + ".gamma", "missing");
    const json& g = j["gamma"];
    check_keys(g, path + ".gamma", {"g00", "g11", "g01"});
    GammaMatrix gm;
    gm.g00 = get_number(g, "g00", path + ".gamma");
    gm.g11 = get_number(g, "g11", path + ".gamma");
    gm.g01 = g.contains("g01") ? parse_complex(g["g01"], path + ".gamma.g01")
                               : cplx(0.0);
    try {
      gm.validate();
    } catch (const Error& e) {
      config_error(path + ".gamma", e.what());
    }
    if (!j.contains("envelope")) config_error(path + ".envelope", "missing");
    Envelope xi = parse_envelope(j["envelope"], Envelope::Mode::unit_norm,
                                 path + ".envelope");
    cfg.field = FieldState::photon_combo(gm, std::move(xi));
  } else if (kind == "coherent_mixture") {
    check_keys(j, path, {"kind", "weights", "envelopes"});
    if (!j.contains("weights") || !j["weights"].is_array())
      config_error(path + ".weights", "expected an array");
    if (!j.contains("envelopes") || !j["envelopes"].is_array())
      config_error(path + ".envelopes", "expected an array");
    std::vector<double> w;
    for (const auto& x : j["weights"]) {
      if (!x.is_number()) config_error(path + ".weights", "expected numbers");
      w.push_back(x.get<double>());
    }
    std::vector<Envelope> alphas;
    for (std::size_t i = 0; i < j["envelopes"].size(); ++i)
      alphas.push_back(parse_envelope(j["envelopes"][i], Envelope::Mode::coherent,
                                      path + ".envelopes[" + std::to_string(i) + "]"));
    try {
      cfg.field = FieldState::coherent_mixture(std::move(w), std::move(alphas));
    } catch (const Error& e) {
      config_error(path, e.what());
    }
  } else {
    config_error(path + ".kind",
                 "expected \"photon_combo\" or \"coherent_mixture\"");
  }
}

json system_json(const ScenarioConfig& cfg) {
  json s;
  if (!cfg.system_preset.empty()) {
    s = {{"preset", cfg.system_preset}, {"kappa", cfg.kappa}};
  } else {
    s = {{"dim", cfg.model.dim()},
         {"H", operator_json(cfg.model.H)},
         {"L", operator_json(cfg.model.L)},
         {"S", operator_json(cfg.model.S)}};
  }
  if (cfg.rho0_kind == "matrix")
    s["rho0"] = operator_json(cfg.rho0);
  else
    s["rho0"] = cfg.rho0_kind;
  return s;
}

json field_json(const FieldState& fs) {
  if (fs.is_photon()) {
    const auto& p = fs.photon();
    return {{"kind", "photon_combo"},
            {"gamma",
             {{"g00", p.gamma.g00}, {"g11", p.gamma.g11},
              {"g01", complex_json(p.gamma.g01)}}},
            {"envelope", envelope_json(p.xi)}};
  }
  const auto& c = fs.coherent();
  json envs = json::array();
  for (const auto& e : c.alphas) envs.push_back(envelope_json(e));
  return {{"kind", "coherent_mixture"}, {"weights", c.weights}, {"envelopes", envs}};
}

const char* measurement_name(Measurement m) {
  switch (m) {
    case Measurement::none: return "none";
    case Measurement::counting: return "counting";
    case Measurement::homodyne: return "homodyne";
  }
  return "none";
}

json config_json(const ScenarioConfig& cfg, bool with_output) {
  json j = {{"name", cfg.name},
            {"system", system_json(cfg)},
            {"field", field_json(cfg.field_state())},
            {"measurement", measurement_name(cfg.measurement)},
            {"grid", {{"dt", cfg.dt}, {"T", cfg.T}}},
            {"ensemble", {{"M", cfg.M}, {"master_seed", cfg.master_seed}}},
            {"verify", {{"reduced_coupling_scale", cfg.reduced_coupling_scale}}}};
  if (with_output)
    j["output"] = {{"path", cfg.out_path}, {"format", cfg.format}};
  return j;
}

}  // namespace

const FieldState& ScenarioConfig::field_state() const {
  if (!field) fail(ErrorCode::config, "field: missing");
  return *field;
}

ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::config, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config", {"name", "system", "field", "measurement", "grid",
                           "ensemble", "output", "verify"});
  ScenarioConfig cfg;
  try {
    if (j.contains("name")) cfg.name = get_string(j, "name", "config");
    if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos)
      config_error("name", "must be a non-empty file-name-safe string");

    if (!j.contains("system")) config_error("system", "missing");
    parse_system(j["system"], cfg);
    if (!j.contains("field")) config_error("field", "missing");
    parse_field(j["field"], cfg);

    if (j.contains("measurement")) {
      const std::string m = get_string(j, "measurement", "config");
      if (m == "none") cfg.measurement = Measurement::none;
      else if (m == "counting") cfg.measurement = Measurement::counting;
      else if (m == "homodyne") cfg.measurement = Measurement::homodyne;
      else config_error("measurement", "expected none, counting or homodyne");
    }

    cfg.T = default_horizon(*cfg.field);
    if (j.contains("grid")) {
      const json& g = j["grid"];
      check_keys(g, "grid", {"dt", "T"});
      cfg.dt = get_number_or(g, "dt", cfg.dt, "grid");
      cfg.T = get_number_or(g, "T", cfg.T, "grid");
    }
    if (!(cfg.dt > 0.0)) config_error("grid.dt", "must be > 0");
    if (!(cfg.T > 0.0)) config_error("grid.T", "must be > 0");
    if (cfg.T / cfg.dt > 1e8) config_error("grid", "too many steps");

    if (j.contains("ensemble")) {
      const json& e = j["ensemble"];
      check_keys(e, "ensemble", {"M", "master_seed"});
      if (e.contains("M")) {
        if (!e["M"].is_number_integer() || e["M"].get<long long>() < 1 ||
            e["M"].get<long long>() > 100000000)
          config_error("ensemble.M", "must be an integer >= 1");
        cfg.M = static_cast<int>(e["M"].get<long long>());
      }
      if (e.contains("master_seed")) {
        if (!e["master_seed"].is_number_unsigned() &&
            !(e["master_seed"].is_number_integer() &&
              e["master_seed"].get<long long>() >= 0))
          config_error("ensemble.master_seed", "must be a non-negative integer");
        cfg.master_seed = e["master_seed"].get<std::uint64_t>();
      }
    }

    if (j.contains("output")) {
      const json& o = j["output"];
      check_keys(o, "output", {"path", "format"});
      if (o.contains("path")) cfg.out_path = get_string(o, "path", "output");
      if (o.contains("format")) cfg.format = get_string(o, "format", "output");
      if (cfg.format != "csv" && cfg.format != "json")
        config_error("output.format", "expected csv or json");
    }

    if (j.contains("verify")) {
      const json& v = j["verify"];
      check_keys(v, "verify", {"reduced_coupling_scale"});
      cfg.reduced_coupling_scale =
          get_number_or(v, "reduced_coupling_scale", 1.0, "verify");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::config, std::string("config: ") + e.what());
  }
  return cfg;
}

std::string to_json(const ScenarioConfig& cfg) {
  return config_json(cfg, true).dump(2);
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  return config_json(a, true) == config_json(b, true);
}

std::uint64_t config_hash(const ScenarioConfig& cfg) {
  const std::string s = config_json(cfg, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::vector<std::string> preset_names() {
  return {"fig1-ground", "fig1-excited", "fig2-ground", "fig2-excited"};
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.system_preset = "two-level-decay";
  cfg.kappa = 1.0;
  cfg.model = SystemModel::two_level_decay(1.0);
  cfg.measurement = Measurement::counting;
  cfg.dt = 1e-3;
  // long enough for the count probability to settle well below 1e-3
  cfg.T = 20.0;
  cfg.M = 2000;
  cfg.master_seed = 20240101;

  if (name == "fig1-ground" || name == "fig1-excited") {
    GammaMatrix g;
    g.g00 = 0.2;
    g.g11 = 0.8;
    cfg.field = FieldState::photon_combo(
        g, Envelope::gaussian(1.46, 3.0, Envelope::Mode::unit_norm));
  } else if (name == "fig2-ground" || name == "fig2-excited") {
    cfg.field = FieldState::coherent_mixture(
        {0.5, 0.5}, {Envelope::gaussian(2.4, 3.0, Envelope::Mode::coherent),
                     Envelope::gaussian(2.4, 5.0, Envelope::Mode::coherent)});
  } else {
    fail(ErrorCode::config, "unknown preset '" + name + "'");
  }
  const bool excited = name.size() > 8 && name.substr(name.size() - 7) == "excited";
  cfg.rho0_kind = excited ? "excited" : "ground";
  cfg.rho0 = projector(2, excited ? 1 : 0);
  return cfg;
}

ScenarioConfig load_config(const std::string& preset_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) != names.end())
    return preset(preset_or_path);
  std::ifstream in(preset_or_path);
  if (!in)
    fail(ErrorCode::io, "cannot open config '" + preset_or_path +
                            "' (and it is not a preset name)");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

const std::vector<double>& Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) fail(ErrorCode::invalid_argument, "no column '" + name + "'");
  return data[static_cast<std::size_t>(it - columns.begin())];
}

namespace {

void add_column(Table& t, std::string name, std::vector<double> v) {
  t.columns.push_back(std::move(name));
  t.data.push_back(std::move(v));
}

Table deterministic_table(const ScenarioConfig& cfg) {
  const FieldState& fs = cfg.field_state();
  const TimeGrid grid = cfg.grid();
  const SystemModel& model = cfg.model;
  const HierarchyRhs rhs = [&](const HierarchyState& s, double t) {
    return rhs_field(s, t, model, fs);
  };
  const auto states = integrate_deterministic(rhs, initial_state(cfg.rho0, fs), grid);
  const int d = model.dim();
  std::vector<double> t, flux, pexc;
  for (int n = 0; n <= grid.steps; ++n) {
    t.push_back(grid.t(n));
    flux.push_back(photon_flux(fs, grid.t(n)));
    pexc.push_back(unconditional_state(states[static_cast<std::size_t>(n)], fs)(d - 1, d - 1).real());
  }
  Table tab;
  add_column(tab, "t", std::move(t));
  add_column(tab, "flux", std::move(flux));
  add_column(tab, "P_exc", std::move(pexc));
  if (cfg.measurement != Measurement::none) {
    auto p0 = survival_curve(model, fs, cfg.rho0, grid);
    for (double& p : p0) p = 1.0 - p;
    add_column(tab, "P_atleast_one_count", std::move(p0));
  }
  return tab;
}

}  // namespace

Table run_scenario(const ScenarioConfig& cfg) { return deterministic_table(cfg); }

Table run_trajectories(const ScenarioConfig& cfg, int threads) {
  if (cfg.measurement == Measurement::none)
    fail(ErrorCode::config,
         "measurement: trajectories need \"counting\" or \"homodyne\"");
  Table tab = deterministic_table(cfg);
  const Scheme scheme =
      cfg.measurement == Measurement::counting ? Scheme::counting : Scheme::homodyne;
  const EnsembleStats st = run_ensemble(cfg.model, cfg.field_state(), cfg.rho0,
                                        cfg.grid(), scheme, cfg.M,
                                        cfg.master_seed, threads);
  add_column(tab, "P_exc_mean", st.p_exc.mean);
  add_column(tab, "P_exc_stderr", st.p_exc.stderr_);
  add_column(tab, "rate_mean", st.rate.mean);
  add_column(tab, "rate_stderr", st.rate.stderr_);
  if (scheme == Scheme::counting) {
    add_column(tab, "P_atleast_one_count_mean", st.atleast_one.mean);
    add_column(tab, "P_atleast_one_count_stderr", st.atleast_one.stderr_);
    tab.count_distribution = empirical_count_distribution(st);
  }
  if (st.clamp_count > 0)
    tab.warnings.push_back(
        "clamped " + std::to_string(st.clamp_count) +
        " negative counting intensities to 0 (first-order step error near "
        "zero intensity; shrinks with dt)");
  if (st.coarse_dt)
    tab.warnings.push_back("k_t dt exceeded 0.1; consider a smaller dt");
  return tab;
}

bool OracleReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const OracleCheck& c) { return c.passed(); });
}

std::string OracleReport::text() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.passed() ? "ok   " : "FAIL ") << std::left << std::setw(40) << c.name
       << " max deviation " << std::scientific << std::setprecision(3)
       << c.deviation << "  (tolerance " << c.tolerance << ")\n";
  }
  for (const auto& n : notes) os << "note: " << n << "\n";
  os << (passed() ? "all checks passed" : "oracle comparison FAILED") << "\n";
  return os.str();
}

namespace {

template <class Fn>
void run_check(OracleReport& rep, const std::string& name, double tol, Fn&& fn) {
  OracleCheck c{name, 0.0, tol};
  try {
    c.deviation = fn();
    if (!std::isfinite(c.deviation))
      c.deviation = std::numeric_limits<double>::infinity();
  } catch (const std::exception& e) {
    c.deviation = std::numeric_limits<double>::infinity();
    rep.notes.push_back(name + ": " + e.what());
  }
  rep.checks.push_back(c);
}

}  // namespace

OracleReport compare_oracle(const ScenarioConfig& cfg, int seeds, int threads) {
  (void)threads;
  const FieldState& fs = cfg.field_state();
  const TimeGrid grid = cfg.grid();
  const SystemModel& model = cfg.model;
  SystemModel reduced = model;
  reduced.L *= cfg.reduced_coupling_scale;
  OracleReport rep;

  if (fs.is_coherent() && fs.coherent().weights.size() != 2) {
    rep.notes.push_back(
        "extended-system checks need exactly two coherent components; skipped");
    return rep;
  }
  const AncillaGenerator gen = AncillaGenerator::from_field(fs);

  run_check(rep, "deterministic partial trace", 1e-8, [&] {
    const HierarchyRhs rhs = [&](const HierarchyState& s, double t) {
      return rhs_field(s, t, reduced, fs);
    };
    const auto red = integrate_deterministic(rhs, initial_state(cfg.rho0, fs), grid);
    const auto ext = integrate_extended(initial_extended_state(cfg.rho0, fs), grid,
                                        model, gen);
    double dev = 0.0;
    for (std::size_t n = 0; n < red.size(); ++n)
      dev = std::max(dev, max_abs(partial_trace_ancilla(ext[n].rho, model.dim()) -
                                  unconditional_state(red[n], fs)));
    return dev;
  });

  if (fs.is_photon()) {
    run_check(rep, "fock vs cascade hierarchy", 1e-8, [&] {
      const Envelope& xi = fs.photon().xi;
      const HierarchyRhs fock = [&](const HierarchyState& s, double t) {
        return rhs_fock_hierarchy(s, t, model, xi);
      };
      const HierarchyRhs casc = [&](const HierarchyState& s, double t) {
        return rhs_cascade_hierarchy(s, t, reduced, xi);
      };
      const auto a = integrate_deterministic(fock, initial_fock(cfg.rho0), grid);
      const auto b = integrate_deterministic(
          casc, initial_cascade(cfg.rho0, fs.photon().gamma), grid);
      double dev = 0.0;
      for (std::size_t n = 0; n < a.size(); ++n)
        dev = std::max(dev, max_abs_diff(fock_to_cascade(a[n], fs.photon().gamma), b[n]));
      return dev;
    });
  }

  run_check(rep, "no-count probability vs H_eff", 1e-8, [&] {
    const auto p0 = survival_curve(reduced, fs, cfg.rho0, grid);
    ExtendedState st = initial_extended_state(cfg.rho0, fs);
    double dev = std::abs(p0[0] - st.rho.trace().real());
    for (int n = 0; n < grid.steps; ++n) {
      st = heff_propagate(st, grid.t(n), grid.t(n + 1), model, gen, grid.dt);
      dev = std::max(dev, std::abs(p0[static_cast<std::size_t>(n) + 1] -
                                   st.rho.trace().real()));
    }
    return dev;
  });

  for (const Scheme scheme : {Scheme::counting, Scheme::homodyne}) {
    const std::string label =
        scheme == Scheme::counting ? "same-record counting" : "same-record homodyne";
    double rate_dev = 0.0;
    run_check(rep, label + " states", 1e-6, [&] {
      double dev = 0.0;
      for (int s = 0; s < seeds; ++s) {
        std::vector<HierarchyState> states;
        TrajectoryOptions opts;
        opts.observer = [&](int, const FilterState& f) {
          states.push_back(static_cast<const HierarchyState&>(f));
        };
        const std::uint64_t seed = trajectory_seed(cfg.master_seed, 1000 + s);
        const TrajectoryResult r =
            scheme == Scheme::counting
                ? simulate_counting(reduced, fs, cfg.rho0, grid, seed, opts)
                : simulate_homodyne(reduced, fs, cfg.rho0, grid, seed, opts);
        const ExtendedReplay ext = replay_extended(model, fs, cfg.rho0, r.record);
        for (std::size_t n = 0; n < states.size(); ++n) {
          dev = std::max(dev, max_abs_diff(states[n], ext.reduced[n]));
          rate_dev = std::max(rate_dev, std::abs(r.rate[n] - ext.rate[n]));
        }
      }
      return dev;
    });
    run_check(rep, label + " rates", 1e-8, [&] {
      if (!rep.checks.back().passed() && std::isinf(rep.checks.back().deviation))
        return std::numeric_limits<double>::infinity();
      return rate_dev;
    });
  }
  return rep;
}

std::string tool_version() { return NCFILTER_VERSION; }

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string write_outputs(const ScenarioConfig& cfg, const Table& table) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path dir(cfg.out_path);
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create output directory '" + cfg.out_path +
                                  "': " + ec.message());
  const fs::path data = dir / (cfg.name + "." + cfg.format);
  const fs::path meta = dir / (cfg.name + ".meta.json");

  {
    std::ofstream out(data);
    if (!out) fail(ErrorCode::io, "cannot write '" + data.string() + "'");
    if (cfg.format == "csv") {
      for (std::size_t c = 0; c < table.columns.size(); ++c)
        out << (c ? "," : "") << table.columns[c];
      out << "\n";
      for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t c = 0; c < table.columns.size(); ++c)
          out << (c ? "," : "") << fmt17(table.data[c][r]);
        out << "\n";
      }
    } else {
      json rows = json::array();
      for (std::size_t r = 0; r < table.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < table.columns.size(); ++c)
          row.push_back(table.data[c][r]);
        rows.push_back(std::move(row));
      }
      out << json{{"columns", table.columns}, {"rows", rows}}.dump() << "\n";
    }
    if (!out) fail(ErrorCode::io, "write to '" + data.string() + "' failed");
  }
  {
    json m = {{"config", config_json(cfg, true)},
              {"hash", hash_hex(config_hash(cfg))},
              {"seed", cfg.master_seed},
              {"tool_version", tool_version()}};
    if (!table.count_distribution.empty())
      m["count_distribution"] = table.count_distribution;
    if (!table.warnings.empty()) m["warnings"] = table.warnings;
    std::ofstream out(meta);
    if (!out) fail(ErrorCode::io, "cannot write '" + meta.string() + "'");
    out << m.dump(2) << "\n";
    if (!out) fail(ErrorCode::io, "write to '" + meta.string() + "' failed");
  }
  return data.string();
}

}  // namespace ncfilter
