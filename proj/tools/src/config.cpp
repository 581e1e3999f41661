#include "dncs/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

extern char** environ;

namespace dncs::cli {

namespace {

enum class Check { Any, Positive, NonNegative };

int line_of(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  return m.is_null() ? 0 : m.line + 1;
}

std::string num(double v) { return fmt::format("{}", v); }

// Decimal shift of `v` by 10^exp10, rounded once from the shortest repr.
double shift(double v, int exp10) {
  std::string text = fmt::format("{}", v);
  const auto e = text.find_first_of("eE");
  int exponent = exp10;
  if (e != std::string::npos) {
    exponent += std::stoi(text.substr(e + 1));
    text.resize(e);
  }
  return std::stod(fmt::format("{}e{}", text, exponent));
}

// Value in a scaled unit, written with the fewest digits that read back to `si`.
std::string scaled(double si, int exp10) {
  for (int digits = 1; digits <= 17; ++digits) {
    const std::string s = fmt::format("{:.{}g}", shift(si, exp10), digits);
    if (shift(std::stod(s), -exp10) == si) return s;
  }
  return num(shift(si, exp10));
}

/// Missing keys and empty values both fall back to the default.
bool present(const YAML::Node& n) { return n.IsDefined() && !n.IsNull(); }

/// One mapping of the document. Tracks consumed keys so leftovers can be
/// reported as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path, const std::set<std::string>* env_keys)
      : node_(std::move(node)), path_(std::move(path)), env_keys_(env_keys) {
    if (present(node_) && !node_.IsMap()) {
      throw ConfigError(path_, from_env(path_) ? 0 : line_of(node_), "expected a mapping");
    }
  }

  bool from_env(const std::string& dotted) const {
    if (!env_keys_) return false;
    for (const auto& k : *env_keys_) {
      if (dotted == k || dotted.rfind(k + ".", 0) == 0 || dotted.rfind(k + "[", 0) == 0) return true;
    }
    return false;
  }

  /// Line of `n`, or 0 when the value was supplied through the environment.
  int where(const std::string& key, const YAML::Node& n) const {
    return from_env(key_path(key)) ? 0 : line_of(n);
  }

  bool has(const std::string& key) const {
    return present(node_) && node_.IsMap() && present(node_[key]);
  }

  YAML::Node raw(const std::string& key) {
    seen_.insert(key);
    return present(node_) && node_.IsMap() ? node_[key] : YAML::Node();
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  double number(const std::string& key, Check check, double fallback) {
    const YAML::Node n = raw(key);
    if (!present(n)) return fallback;
    const double v = as_number(n, key);
    validate(key, n, v, check);
    return v;
  }

  double as_number(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) throw ConfigError(key_path(key), where(key, n), "expected a number");
    double v;
    if (!YAML::convert<double>::decode(n, v) || !std::isfinite(v)) {
      throw ConfigError(key_path(key), where(key, n),
                        "expected a finite number, got '" + n.Scalar() + "'");
    }
    return v;
  }

  void validate(const std::string& key, const YAML::Node& n, double v, Check check) const {
    if (check == Check::Positive && !(v > 0.0)) {
      throw ConfigError(key_path(key), where(key, n), "must be positive, got " + num(v));
    }
    if (check == Check::NonNegative && !(v >= 0.0)) {
      throw ConfigError(key_path(key), where(key, n), "must be nonnegative, got " + num(v));
    }
  }

  long integer(const std::string& key, long lo, long hi, long fallback) {
    const YAML::Node n = raw(key);
    if (!present(n)) return fallback;
    const double v = as_number(n, key);
    if (v != std::floor(v) || v < static_cast<double>(lo) || v > static_cast<double>(hi)) {
      throw ConfigError(key_path(key), where(key, n),
                        fmt::format("must be an integer in [{}, {}], got {}", lo, hi, n.Scalar()));
    }
    return static_cast<long>(v);
  }

  std::string word(const std::string& key, const std::vector<std::string>& allowed,
                   const std::string& fallback) {
    const YAML::Node n = raw(key);
    if (!present(n)) return fallback;
    if (!n.IsScalar()) throw ConfigError(key_path(key), where(key, n), "expected a word");
    const std::string v = n.Scalar();
    for (const auto& a : allowed) {
      if (v == a) return v;
    }
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError(key_path(key), where(key, n), "must be one of {" + list + "}, got '" + v + "'");
  }

  std::vector<double> numbers(const std::string& key, const YAML::Node& n, Check check) const {
    if (!n.IsSequence()) throw ConfigError(key_path(key), where(key, n), "expected a list");
    std::vector<double> out;
    for (const auto& item : n) {
      const double v = as_number(item, key);
      validate(key, item, v, check);
      out.push_back(v);
    }
    return out;
  }

  Section child(const std::string& key) { return Section(raw(key), key_path(key), env_keys_); }

  const std::set<std::string>* env_keys() const { return env_keys_; }

  void finish() const {
    if (!present(node_) || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      if (!seen_.count(k)) throw ConfigError(key_path(k), where(k, kv.first), "unknown key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
  const std::set<std::string>* env_keys_;
};

ImpedanceSpec read_impedance(Section& s, const std::string& key, const ImpedanceSpec& fallback) {
  const YAML::Node n = s.raw(key);
  if (!present(n)) return fallback;
  ImpedanceSpec out;
  if (n.IsScalar() && n.Scalar() == "open") {
    out.open = true;
    return out;
  }
  const std::vector<double> v = s.numbers(key, n, Check::Any);
  if (v.size() != 2) {
    throw ConfigError(s.key_path(key), s.where(key, n), "expected [real, imag] or 'open'");
  }
  out.z = {v[0], v[1]};
  if (std::abs(out.z) == 0.0) throw ConfigError(s.key_path(key), s.where(key, n), "must be nonzero");
  return out;
}

double unit_scaled(Section& s, const std::string& key, double si, int exp10) {
  const double v = s.number(key, Check::Positive, std::nan(""));
  return std::isnan(v) ? si : shift(v, exp10);
}

GeneratorSpec read_generator(Section s, const GeneratorSpec& fallback) {
  GeneratorSpec g = fallback;
  auto& p = g.params;
  p.L_a0 = unit_scaled(s, "L_a0_mH", p.L_a0, -3);
  p.L_a2 = unit_scaled(s, "L_a2_uH", p.L_a2, -6);
  p.L_f = unit_scaled(s, "L_f_mH", p.L_f, -3);
  p.L_af = unit_scaled(s, "L_af_mH", p.L_af, -3);
  p.R_a = unit_scaled(s, "R_a_mOhm", p.R_a, -3);
  p.R_f = unit_scaled(s, "R_f_mOhm", p.R_f, -3);
  p.J_rot = s.number("J_rot_kgm2", Check::Positive, p.J_rot);
  p.B_fric = s.number("B_fric_kgm2_per_s", Check::NonNegative, p.B_fric);
  p.pole_pairs = static_cast<int>(s.integer("pole_pairs", 1, 1000, p.pole_pairs));
  p.e_f0 = s.number("e_f0_V", Check::NonNegative, p.e_f0);
  const YAML::Node tm = s.raw("T_m_Nm");
  if (present(tm)) {
    if (tm.IsScalar() && tm.Scalar() == "balance") {
      g.balance_torque = true;
    } else {
      g.balance_torque = false;
      p.T_m = s.as_number(tm, "T_m_Nm");
    }
  }
  s.finish();
  return g;
}

Matrix read_gain(Section s, const Matrix& fallback) {
  Matrix K = fallback;
  K(0, 0) = s.number("delta_V_per_rad", Check::Any, K(0, 0));
  K(0, 1) = s.number("omega_V_s_per_rad", Check::Any, K(0, 1));
  K(0, 2) = s.number("psi_f_V_per_Wb", Check::Any, K(0, 2));
  s.finish();
  return K;
}

std::vector<double> delay_range(double start, double stop, double step) {
  std::vector<double> out;
  const long n = std::lround(std::floor((stop - start) / step + 1e-9));
  for (long k = 0; k <= n; ++k) {
    out.push_back(std::round((start + static_cast<double>(k) * step) * 1e12) / 1e12);
  }
  return out;
}

std::set<std::string> apply_overrides(YAML::Node& root,
                                      const std::map<std::string, std::string>& env) {
  const std::string prefix = "DNCS__";
  std::set<std::string> keys;
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::vector<std::string> path;
    std::string rest = name.substr(prefix.size());
    for (size_t pos; (pos = rest.find("__")) != std::string::npos; rest = rest.substr(pos + 2)) {
      path.push_back(rest.substr(0, pos));
    }
    path.push_back(rest);
    for (const auto& part : path) {
      if (part.empty()) throw ConfigError(name, 0, "malformed override name");
    }
    YAML::Node parsed;
    try {
      parsed = YAML::Load(value);
    } catch (const YAML::Exception& e) {
      throw ConfigError(name, 0, std::string("override value is not valid YAML: ") + e.what());
    }
    YAML::Node cur;
    cur.reset(root);
    for (size_t i = 0; i + 1 < path.size(); ++i) {
      YAML::Node next = cur[path[i]];
      if (next && !next.IsMap()) {
        throw ConfigError(name, 0, "'" + path[i] + "' is not a section");
      }
      if (!next) {
        cur[path[i]] = YAML::Node(YAML::NodeType::Map);
        next = cur[path[i]];
      }
      cur.reset(next);
    }
    cur[path.back()] = parsed;
    if (path.size() == 2 && path[0] == "sweep") {
      if (path[1] == "delays_s") {
        for (const char* k : {"delay_start_s", "delay_stop_s", "delay_step_s"}) cur.remove(k);
      } else if (path[1].rfind("delay_", 0) == 0) {
        cur.remove("delays_s");
      }
    }
    std::string dotted;
    for (const auto& part : path) dotted += (dotted.empty() ? "" : ".") + part;
    keys.insert(dotted);
  }
  return keys;
}

BenchmarkConfig from_node(YAML::Node root, const std::set<std::string>& env_keys) {
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  Section top(root, "", &env_keys);
  BenchmarkConfig cfg = default_config();

  if (top.has("generator") && top.has("generators")) {
    throw ConfigError("generators", top.where("generators", root["generators"]),
                      "give either 'generator' (shared) or 'generators' (per machine)");
  }
  if (top.has("generators")) {
    const YAML::Node list = top.raw("generators");
    if (!list.IsSequence() || list.size() != 2) {
      throw ConfigError("generators", top.where("generators", list), "expected a list of two machines");
    }
    cfg.shared_generator = false;
    for (size_t i = 0; i < 2; ++i) {
      cfg.generators[i] =
          read_generator(Section(list[i], fmt::format("generators[{}]", i), top.env_keys()),
                         cfg.generators[i]);
    }
  } else {
    const GeneratorSpec g = read_generator(top.child("generator"), cfg.generators[0]);
    cfg.generators.assign(2, g);
  }

  {
    Section s = top.child("network");
    cfg.omega0 = s.number("omega0_rad_per_s", Check::Positive, cfg.omega0);
    cfg.Z_T = read_impedance(s, "Z_T_Ohm", cfg.Z_T);
    cfg.Z_L = read_impedance(s, "Z_L_Ohm", cfg.Z_L);
    cfg.Z_C = read_impedance(s, "Z_C_Ohm", cfg.Z_C);
    s.finish();
  }
  {
    Section s = top.child("operating_point");
    cfg.reference_angle = s.number("reference_angle_rad", Check::Any, cfg.reference_angle);
    s.finish();
  }
  {
    Section s = top.child("objectives");
    cfg.delta_weight = s.number("delta_weight_per_rad2", Check::NonNegative, cfg.delta_weight);
    cfg.input_weight = s.number("input_weight_per_V2", Check::Positive, cfg.input_weight);
    cfg.output_input_weight =
        s.number("output_input_weight_per_V", Check::NonNegative, cfg.output_input_weight);
    const std::string form = s.word("output_form", {"stacked", "summed"},
                                    cfg.output_form == benchmark::OutputForm::Stacked ? "stacked"
                                                                                      : "summed");
    cfg.output_form =
        form == "stacked" ? benchmark::OutputForm::Stacked : benchmark::OutputForm::Summed;
    s.finish();
  }
  {
    Section s = top.child("gains");
    cfg.gain_lqr = read_gain(s.child("lqr"), cfg.gain_lqr);
    cfg.gain_hinf = read_gain(s.child("hinf"), cfg.gain_hinf);
    s.finish();
  }
  {
    Section s = top.child("sampling");
    cfg.h = s.number("h_s", Check::Positive, cfg.h);
    s.finish();
  }
  {
    Section s = top.child("sweep");
    const bool list = s.has("delays_s");
    const bool range = s.has("delay_start_s") || s.has("delay_stop_s") || s.has("delay_step_s");
    if (list && range) {
      throw ConfigError("sweep.delays_s", s.where("delays_s", s.raw("delays_s")),
                        "give either delays_s or delay_start_s/delay_stop_s/delay_step_s");
    }
    if (list) {
      const YAML::Node n = s.raw("delays_s");
      cfg.delay_grid = s.numbers("delays_s", n, Check::NonNegative);
      for (size_t k = 1; k < cfg.delay_grid.size(); ++k) {
        if (!(cfg.delay_grid[k] > cfg.delay_grid[k - 1])) {
          throw ConfigError("sweep.delays_s", s.where("delays_s", n), "must be strictly ascending");
        }
      }
    } else if (range) {
      const double start = s.number("delay_start_s", Check::NonNegative, 0.0);
      const double stop = s.number("delay_stop_s", Check::NonNegative, 0.5);
      const double step = s.number("delay_step_s", Check::Positive, 0.02);
      if (stop < start) {
        throw ConfigError("sweep.delay_stop_s", s.where("delay_stop_s", s.raw("delay_stop_s")),
                          "must not be below delay_start_s");
      }
      cfg.delay_grid = delay_range(start, stop, step);
    }
    s.finish();
  }
  {
    Section s = top.child("tolerances");
    const YAML::Node g = s.raw("gamma_rel");
    cfg.gamma_tol = s.number("gamma_rel", Check::Positive, cfg.gamma_tol);
    if (!(cfg.gamma_tol < 1.0)) throw ConfigError("tolerances.gamma_rel", s.where("gamma_rel", g), "must be < 1");
    cfg.decomposition_tol = s.number("decomposition_rel", Check::Positive, cfg.decomposition_tol);
    s.finish();
  }
  {
    Section s = top.child("scenario");
    auto& sc = cfg.scenario;
    sc.mode = s.word("mode", {"oscillation", "common"}, sc.mode);
    const YAML::Node init = s.raw("initial_state");
    if (present(init)) {
      if (init.IsSequence()) {
        sc.initial = ScenarioState::Modal;
        sc.initial_modal_state = s.numbers("initial_state", init, Check::Any);
        if (sc.initial_modal_state.size() != 3) {
          throw ConfigError("scenario.initial_state", s.where("initial_state", init),
                            "expected three modal values [delta, omega, psi_f]");
        }
      } else {
        const std::string w = s.word("initial_state", {"default", "zero", "random"}, "default");
        sc.initial = w == "zero"     ? ScenarioState::Zero
                     : w == "random" ? ScenarioState::Random
                                     : ScenarioState::DefaultModal;
      }
    }
    const std::string dist = s.word("disturbance", {"zero", "impulse"},
                                    sc.disturbance == sim::Disturbance::Impulse ? "impulse" : "zero");
    sc.disturbance = dist == "impulse" ? sim::Disturbance::Impulse : sim::Disturbance::Zero;
    sc.impulse_channel = s.integer("impulse_channel", 0, 3, sc.impulse_channel);
    sc.step_s = s.number("step_s", Check::NonNegative, sc.step_s);
    sc.horizon_s = s.number("horizon_s", Check::NonNegative, sc.horizon_s);
    sc.trace_stride = s.integer("trace_stride", 1, 1000000000, sc.trace_stride);
    sc.trace_until_s = s.number("trace_until_s", Check::NonNegative, sc.trace_until_s);
    s.finish();
  }
  top.finish();
  return cfg;
}

void emit_gain(YAML::Emitter& e, const char* name, const Matrix& K) {
  e << YAML::Key << name << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "delta_V_per_rad" << YAML::Value << num(K(0, 0));
  e << YAML::Key << "omega_V_s_per_rad" << YAML::Value << num(K(0, 1));
  e << YAML::Key << "psi_f_V_per_Wb" << YAML::Value << num(K(0, 2));
  e << YAML::EndMap;
}

void emit_impedance(YAML::Emitter& e, const char* name, const ImpedanceSpec& z) {
  e << YAML::Key << name << YAML::Value;
  if (z.open) {
    e << "open";
  } else {
    e << YAML::Flow << YAML::BeginSeq << num(z.z.real()) << num(z.z.imag()) << YAML::EndSeq;
  }
}

void emit_generator(YAML::Emitter& e, const GeneratorSpec& g) {
  const auto& p = g.params;
  e << YAML::BeginMap;
  e << YAML::Key << "L_a0_mH" << YAML::Value << scaled(p.L_a0, 3);
  e << YAML::Key << "L_a2_uH" << YAML::Value << scaled(p.L_a2, 6);
  e << YAML::Key << "L_f_mH" << YAML::Value << scaled(p.L_f, 3);
  e << YAML::Key << "L_af_mH" << YAML::Value << scaled(p.L_af, 3);
  e << YAML::Key << "R_a_mOhm" << YAML::Value << scaled(p.R_a, 3);
  e << YAML::Key << "R_f_mOhm" << YAML::Value << scaled(p.R_f, 3);
  e << YAML::Key << "J_rot_kgm2" << YAML::Value << num(p.J_rot);
  e << YAML::Key << "B_fric_kgm2_per_s" << YAML::Value << num(p.B_fric);
  e << YAML::Key << "pole_pairs" << YAML::Value << p.pole_pairs;
  e << YAML::Key << "e_f0_V" << YAML::Value << num(p.e_f0);
  e << YAML::Key << "T_m_Nm" << YAML::Value << (g.balance_torque ? "balance" : num(p.T_m));
  e << YAML::EndMap;
}

}  // namespace

ConfigError::ConfigError(const std::string& key, int line, const std::string& message)
    : std::runtime_error(line > 0 ? fmt::format("config line {}: {}: {}", line, key, message)
                                  : fmt::format("config: {}: {}", key, message)),
      key_(key),
      line_(line) {}

grid::Impedance ImpedanceSpec::impedance() const {
  return open ? grid::Impedance::open() : grid::Impedance::finite(z);
}

BenchmarkConfig default_config() {
  BenchmarkConfig cfg;
  GeneratorSpec g;
  g.params = benchmark::generator();
  g.balance_torque = true;
  cfg.generators.assign(2, g);
  cfg.Z_T.z = benchmark::kZ_T;
  cfg.Z_L.z = benchmark::kZ_L;
  cfg.Z_C.z = benchmark::kZ_C;
  cfg.gain_lqr = benchmark::gain_K1();
  cfg.gain_hinf = benchmark::gain_K2();
  cfg.delay_grid = delay_range(0.0, 0.5, 0.02);
  return cfg;
}

BenchmarkConfig parse_config(const std::string& text,
                             const std::map<std::string, std::string>& env) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("<document>", e.mark.line + 1, e.msg);
  }
  if (root && !root.IsNull() && !root.IsMap()) {
    throw ConfigError("<document>", line_of(root), "expected a mapping at the top level");
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  const std::set<std::string> keys = apply_overrides(root, env);
  return from_node(root, keys);
}

BenchmarkConfig load_config(const std::string& path,
                            const std::map<std::string, std::string>& env) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), env);
}

std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const size_t eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = entry.substr(0, eq);
    if (name.rfind("DNCS__", 0) == 0) out[name] = entry.substr(eq + 1);
  }
  return out;
}

std::string to_yaml(const BenchmarkConfig& cfg) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  if (cfg.shared_generator) {
    e << YAML::Key << "generator" << YAML::Value;
    emit_generator(e, cfg.generators[0]);
  } else {
    e << YAML::Key << "generators" << YAML::Value << YAML::BeginSeq;
    for (const auto& g : cfg.generators) emit_generator(e, g);
    e << YAML::EndSeq;
  }
  e << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "omega0_rad_per_s" << YAML::Value << num(cfg.omega0);
  emit_impedance(e, "Z_T_Ohm", cfg.Z_T);
  emit_impedance(e, "Z_L_Ohm", cfg.Z_L);
  emit_impedance(e, "Z_C_Ohm", cfg.Z_C);
  e << YAML::EndMap;
  e << YAML::Key << "operating_point" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "reference_angle_rad" << YAML::Value << num(cfg.reference_angle);
  e << YAML::EndMap;
  e << YAML::Key << "objectives" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "delta_weight_per_rad2" << YAML::Value << num(cfg.delta_weight);
  e << YAML::Key << "input_weight_per_V2" << YAML::Value << num(cfg.input_weight);
  e << YAML::Key << "output_input_weight_per_V" << YAML::Value << num(cfg.output_input_weight);
  e << YAML::Key << "output_form" << YAML::Value
    << (cfg.output_form == benchmark::OutputForm::Stacked ? "stacked" : "summed");
  e << YAML::EndMap;
  e << YAML::Key << "gains" << YAML::Value << YAML::BeginMap;
  emit_gain(e, "lqr", cfg.gain_lqr);
  emit_gain(e, "hinf", cfg.gain_hinf);
  e << YAML::EndMap;
  e << YAML::Key << "sampling" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "h_s" << YAML::Value << num(cfg.h);
  e << YAML::EndMap;
  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "delays_s" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double d : cfg.delay_grid) e << num(d);
  e << YAML::EndSeq << YAML::EndMap;
  e << YAML::Key << "tolerances" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "gamma_rel" << YAML::Value << num(cfg.gamma_tol);
  e << YAML::Key << "decomposition_rel" << YAML::Value << num(cfg.decomposition_tol);
  e << YAML::EndMap;
  const auto& sc = cfg.scenario;
  e << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "mode" << YAML::Value << sc.mode;
  e << YAML::Key << "initial_state" << YAML::Value;
  switch (sc.initial) {
    case ScenarioState::Modal:
      e << YAML::Flow << YAML::BeginSeq;
      for (double v : sc.initial_modal_state) e << num(v);
      e << YAML::EndSeq;
      break;
    case ScenarioState::Zero:
      e << "zero";
      break;
    case ScenarioState::Random:
      e << "random";
      break;
    case ScenarioState::DefaultModal:
      e << "default";
      break;
  }
  e << YAML::Key << "disturbance" << YAML::Value
    << (sc.disturbance == sim::Disturbance::Impulse ? "impulse" : "zero");
  e << YAML::Key << "impulse_channel" << YAML::Value << sc.impulse_channel;
  e << YAML::Key << "step_s" << YAML::Value << num(sc.step_s);
  e << YAML::Key << "horizon_s" << YAML::Value << num(sc.horizon_s);
  e << YAML::Key << "trace_stride" << YAML::Value << sc.trace_stride;
  e << YAML::Key << "trace_until_s" << YAML::Value << num(sc.trace_until_s);
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

const std::vector<KeyDoc>& schema() {
  static const std::vector<KeyDoc> keys = {
      {"generator.L_a0_mH", "mH", "stator self inductance, constant part"},
      {"generator.L_a2_uH", "uH", "stator self inductance, saliency part"},
      {"generator.L_f_mH", "mH", "field self inductance"},
      {"generator.L_af_mH", "mH", "stator-field mutual inductance"},
      {"generator.R_a_mOhm", "mOhm", "stator resistance"},
      {"generator.R_f_mOhm", "mOhm", "field resistance"},
      {"generator.J_rot_kgm2", "kg m^2", "rotor inertia"},
      {"generator.B_fric_kgm2_per_s", "kg m^2/s", "friction coefficient (>= 0)"},
      {"generator.pole_pairs", "-", "pole-pair count"},
      {"generator.e_f0_V", "V", "field voltage at the operating point"},
      {"generator.T_m_Nm", "N m", "mechanical torque, or 'balance'"},
      {"network.omega0_rad_per_s", "rad/s", "synchronous speed"},
      {"network.Z_T_Ohm", "Ohm", "generator-to-load-bus impedance [re, im] or 'open'"},
      {"network.Z_L_Ohm", "Ohm", "load shunt impedance [re, im] or 'open'"},
      {"network.Z_C_Ohm", "Ohm", "tie-line impedance [re, im] or 'open'"},
      {"operating_point.reference_angle_rad", "rad", "rotor angle of machine 1"},
      {"objectives.delta_weight_per_rad2", "1/rad^2", "cost weight on each rotor angle"},
      {"objectives.input_weight_per_V2", "1/V^2", "cost weight on each field voltage"},
      {"objectives.output_input_weight_per_V", "rad/V", "field-voltage weight in the output"},
      {"objectives.output_form", "-", "'stacked' [delta; w e_f] or 'summed' delta + w e_f"},
      {"gains.lqr.delta_V_per_rad", "V/rad", "local gain on delta, LQR pipeline"},
      {"gains.lqr.omega_V_s_per_rad", "V s/rad", "local gain on omega, LQR pipeline"},
      {"gains.lqr.psi_f_V_per_Wb", "V/Wb", "local gain on psi_f, LQR pipeline"},
      {"gains.hinf.delta_V_per_rad", "V/rad", "local gain on delta, H-infinity pipeline"},
      {"gains.hinf.omega_V_s_per_rad", "V s/rad", "local gain on omega, H-infinity pipeline"},
      {"gains.hinf.psi_f_V_per_Wb", "V/Wb", "local gain on psi_f, H-infinity pipeline"},
      {"sampling.h_s", "s", "sampling period"},
      {"sweep.delays_s", "s", "explicit delay grid (ascending)"},
      {"sweep.delay_start_s", "s", "delay grid start"},
      {"sweep.delay_stop_s", "s", "delay grid end (inclusive)"},
      {"sweep.delay_step_s", "s", "delay grid spacing"},
      {"tolerances.gamma_rel", "-", "relative resolution of the gamma search"},
      {"tolerances.decomposition_rel", "-", "block-diagonalization tolerance"},
      {"scenario.mode", "-", "'oscillation' or 'common'"},
      {"scenario.initial_state", "-", "'default', 'zero', 'random' or [delta, omega, psi_f] modal"},
      {"scenario.disturbance", "-", "'zero' or 'impulse'"},
      {"scenario.impulse_channel", "-", "disturbance channel index 0..3"},
      {"scenario.step_s", "s", "RK4 step, 0 for automatic"},
      {"scenario.horizon_s", "s", "simulation horizon, 0 for automatic"},
      {"scenario.trace_stride", "-", "record every n-th integrator step"},
      {"scenario.trace_until_s", "s", "stop recording the trace after this time"},
  };
  return keys;
}

Pipeline build_pipeline(const BenchmarkConfig& cfg) {
  Pipeline p;
  for (const auto& g : cfg.generators) {
    g.params.validate();
    p.generators.push_back(g.params);
  }
  p.net = grid::build_two_area_network(cfg.Z_T.impedance(), cfg.Z_L.impedance(),
                                       cfg.Z_C.impedance(), cfg.omega0);
  grid::EquilibriumSpec spec;
  for (const auto& g : cfg.generators) {
    spec.torque.push_back(g.balance_torque ? grid::TorqueMode::Balance : grid::TorqueMode::Fixed);
  }
  spec.reference_angle = cfg.reference_angle;
  spec.initial_delta.assign(cfg.generators.size(), cfg.reference_angle);
  p.op = grid::solve_equilibrium(p.generators, p.net, spec);
  p.plant = grid::linearize(p.generators, p.net, p.op);
  const Index m = p.plant.machines;
  p.objectives.Q = benchmark::cost_Q(m, cfg.delta_weight);
  p.objectives.R = benchmark::cost_R(m, cfg.input_weight);
  p.objectives.C = benchmark::output_C(m, cfg.output_form);
  p.objectives.Du = benchmark::output_Du(m, cfg.output_form, cfg.output_input_weight);
  p.objectives.Dw = Matrix::Zero(p.objectives.C.rows(), p.plant.nw());
  return p;
}

const Matrix& default_gain(const BenchmarkConfig& cfg, distributed::Method method) {
  return method == distributed::Method::Lqr ? cfg.gain_lqr : cfg.gain_hinf;
}

}  // namespace dncs::cli
