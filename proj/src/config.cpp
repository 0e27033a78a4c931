#include "occlp/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace occlp {

namespace {

struct Value {
  enum class Type { Number, Bool, String, Array };
  Type type = Type::Number;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<Value> items;
  int line = 0;
};

const char* type_name(Value::Type t) {
  switch (t) {
    case Value::Type::Number: return "a number";
    case Value::Type::Bool: return "a boolean";
    case Value::Type::String: return "a string";
    case Value::Type::Array: return "an array";
  }
  return "?";
}

class ValueParser {
 public:
  ValueParser(const std::string& text, int line) : s_(text), line_(line) {}

  Value parse_all() {
    Value v = parse();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing text '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(line_, msg); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  Value parse() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    Value v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '[') {
      ++pos_;
      v.type = Value::Type::Array;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      for (;;) {
        v.items.push_back(parse());
        skip_ws();
        if (pos_ >= s_.size()) fail("unterminated array");
        if (s_[pos_] == ',') {
          ++pos_;
          skip_ws();
          // A trailing comma before ']' is allowed.
          if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            return v;
          }
          continue;
        }
        if (s_[pos_] == ']') {
          ++pos_;
          return v;
        }
        fail(std::string("expected ',' or ']' in array, found '") + s_[pos_] + "'");
      }
    }
    if (c == '"') {
      ++pos_;
      v.type = Value::Type::String;
      while (pos_ < s_.size() && s_[pos_] != '"') {
        if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
        v.text += s_[pos_++];
      }
      if (pos_ >= s_.size()) fail("unterminated string");
      ++pos_;
      return v;
    }
    // Bare token: number, boolean or identifier.
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
    }
    const std::string token = s_.substr(start, pos_ - start);
    if (token == "true" || token == "false") {
      v.type = Value::Type::Bool;
      v.boolean = token == "true";
      return v;
    }
    if (std::isdigit(static_cast<unsigned char>(token[0])) || token[0] == '-' || token[0] == '+' || token[0] == '.') {
      char* end = nullptr;
      v.number = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size() || !std::isfinite(v.number)) fail("malformed number '" + token + "'");
      v.type = Value::Type::Number;
      return v;
    }
    for (char ch : token) {
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) {
        fail("unquoted value '" + token + "' (quote strings containing special characters)");
      }
    }
    v.type = Value::Type::String;
    v.text = token;
    return v;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_;
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (!in_string && line[i] == '#') return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

int bracket_balance(const std::string& s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (in_string) continue;
    if (s[i] == '[') ++depth;
    if (s[i] == ']') --depth;
  }
  return depth;
}

struct Entry {
  std::string key;
  Value value;
  int line = 0;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
};

std::vector<Section> parse_document(const std::string& text) {
  std::vector<Section> sections(1);
  std::set<std::string> seen_sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "malformed section header '" + line + "'");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError(line_no, "empty section name");
      if (!seen_sections.insert(name).second) throw ConfigError(line_no, "duplicate section [" + name + "]");
      sections.push_back({name, line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    std::string value_text = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "missing key before '='");
    const int start_line = line_no;
    // Arrays may continue over several lines until their brackets balance.
    while (bracket_balance(value_text) > 0 && std::getline(in, raw)) {
      ++line_no;
      value_text += ' ' + trim(strip_comment(raw));
    }
    if (bracket_balance(value_text) != 0) throw ConfigError(start_line, "unbalanced brackets in value of '" + key + "'");
    for (const auto& e : sections.back().entries) {
      if (e.key == key) throw ConfigError(start_line, "duplicate key '" + key + "'");
    }
    sections.back().entries.push_back({key, ValueParser(value_text, start_line).parse_all(), start_line});
  }
  return sections;
}

// Typed accessors; each mismatch names the key and line.
void expect(const Value& v, Value::Type t, const std::string& key) {
  if (v.type != t) {
    throw ConfigError(v.line, "key '" + key + "' expects " + type_name(t) + ", got " + type_name(v.type));
  }
}

double as_number(const Value& v, const std::string& key) {
  expect(v, Value::Type::Number, key);
  return v.number;
}

int as_int(const Value& v, const std::string& key) {
  const double x = as_number(v, key);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError(v.line, "key '" + key + "' expects an integer");
  return static_cast<int>(x);
}

bool as_bool(const Value& v, const std::string& key) {
  expect(v, Value::Type::Bool, key);
  return v.boolean;
}

std::string as_string(const Value& v, const std::string& key) {
  expect(v, Value::Type::String, key);
  return v.text;
}

std::vector<double> as_numbers(const Value& v, const std::string& key) {
  expect(v, Value::Type::Array, key);
  std::vector<double> out;
  for (const auto& item : v.items) out.push_back(as_number(item, key + " element"));
  return out;
}

std::vector<int> as_ints(const Value& v, const std::string& key) {
  expect(v, Value::Type::Array, key);
  std::vector<int> out;
  for (const auto& item : v.items) out.push_back(as_int(item, key + " element"));
  return out;
}

std::vector<std::string> as_strings(const Value& v, const std::string& key) {
  expect(v, Value::Type::Array, key);
  std::vector<std::string> out;
  for (const auto& item : v.items) out.push_back(as_string(item, key + " element"));
  return out;
}

std::vector<std::vector<double>> as_number_rows(const Value& v, const std::string& key) {
  expect(v, Value::Type::Array, key);
  std::vector<std::vector<double>> out;
  for (const auto& item : v.items) out.push_back(as_numbers(item, key + " element"));
  return out;
}

std::vector<std::vector<int>> as_int_rows(const Value& v, const std::string& key) {
  expect(v, Value::Type::Array, key);
  std::vector<std::vector<int>> out;
  for (const auto& item : v.items) out.push_back(as_ints(item, key + " element"));
  return out;
}

Placement as_placement(const Value& v, const std::string& key) {
  const std::string s = as_string(v, key);
  if (s == "midpoint") return Placement::Midpoint;
  if (s == "nodes") return Placement::Nodes;
  throw ConfigError(v.line, "key '" + key + "' must be \"midpoint\" or \"nodes\", got \"" + s + "\"");
}

const char* placement_name(Placement p) { return p == Placement::Midpoint ? "midpoint" : "nodes"; }

using Handler = std::function<void(const Value&)>;
using Schema = std::map<std::string, std::map<std::string, Handler>>;

Schema make_schema(StudyConfig& c) {
  Schema s;
  s[""]["seed"] = [&](const Value& v) {
    const int seed = as_int(v, "seed");
    if (seed < 0) throw ConfigError(v.line, "seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);
  };

  auto& sys = s["system"];
  sys["name"] = [&](const Value& v) { c.system.name = as_string(v, "name"); };
  sys["cost"] = [&](const Value& v) { c.system.cost = as_string(v, "cost"); };
  sys["inner"] = [&](const Value& v) { c.system.inner = as_number(v, "inner"); };
  sys["outer"] = [&](const Value& v) { c.system.outer = as_number(v, "outer"); };
  sys["control_bound"] = [&](const Value& v) { c.system.control_bound = as_number(v, "control_bound"); };
  sys["region"] = [&](const Value& v) { c.system.region = as_string(v, "region"); };
  sys["lower"] = [&](const Value& v) { c.system.lower = as_numbers(v, "lower"); };
  sys["upper"] = [&](const Value& v) { c.system.upper = as_numbers(v, "upper"); };
  sys["control_lower"] = [&](const Value& v) { c.system.control_lower = as_numbers(v, "control_lower"); };
  sys["control_upper"] = [&](const Value& v) { c.system.control_upper = as_numbers(v, "control_upper"); };
  sys["control_points"] = [&](const Value& v) { c.system.control_points = as_number_rows(v, "control_points"); };
  sys["dynamics"] = [&](const Value& v) { c.system.dynamics = as_strings(v, "dynamics"); };
  sys["first_integrals"] = [&](const Value& v) { c.system.first_integrals = as_strings(v, "first_integrals"); };
  sys["bound_f"] = [&](const Value& v) { c.system.bound_f = as_number(v, "bound_f"); };
  sys["bound_k"] = [&](const Value& v) { c.system.bound_k = as_number(v, "bound_k"); };

  auto& grid = s["grid"];
  grid["state_resolution"] = [&](const Value& v) { c.grid.state_resolution = as_ints(v, "state_resolution"); };
  grid["control_resolution"] = [&](const Value& v) { c.grid.control_resolution = as_ints(v, "control_resolution"); };
  grid["state_placement"] = [&](const Value& v) { c.grid.state_placement = as_placement(v, "state_placement"); };
  grid["radial_placement"] = [&](const Value& v) { c.grid.radial_placement = as_placement(v, "radial_placement"); };
  grid["control_placement"] = [&](const Value& v) {
    c.grid.control_placement = as_placement(v, "control_placement");
  };
  grid["anchor_y0"] = [&](const Value& v) { c.grid.anchor_y0 = as_bool(v, "anchor_y0"); };

  s["basis"]["max_degree"] = [&](const Value& v) { c.basis.max_degree = as_int(v, "max_degree"); };

  auto& prog = s["program"];
  prog["variants"] = [&](const Value& v) {
    c.program.variants.clear();
    for (const auto& name : as_strings(v, "variants")) {
      try {
        c.program.variants.push_back(parse_variant(name));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(v.line, e.what());
      }
    }
  };
  prog["y0"] = [&](const Value& v) { c.program.y0 = as_numbers(v, "y0"); };
  prog["lambda"] = [&](const Value& v) { c.program.lambda = as_numbers(v, "lambda"); };
  prog["epsilon"] = [&](const Value& v) { c.program.epsilon = as_numbers(v, "epsilon"); };
  prog["xi_mass_cap"] = [&](const Value& v) { c.program.xi_mass_cap = as_number(v, "xi_mass_cap"); };
  prog["xi_mass_cap_enabled"] = [&](const Value& v) {
    c.program.xi_mass_cap_enabled = as_bool(v, "xi_mass_cap_enabled");
  };
  prog["tolerance"] = [&](const Value& v) { c.program.tolerance = as_number(v, "tolerance"); };
  prog["export_lp"] = [&](const Value& v) { c.program.export_lp = as_bool(v, "export_lp"); };

  auto& sim = s["simulate"];
  sim["policy"] = [&](const Value& v) { c.simulate.policy = as_string(v, "policy"); };
  sim["control"] = [&](const Value& v) { c.simulate.control = as_numbers(v, "control"); };
  sim["steer"] = [&](const Value& v) { c.simulate.steer = as_numbers(v, "steer"); };
  sim["target"] = [&](const Value& v) { c.simulate.target = as_numbers(v, "target"); };
  sim["hold"] = [&](const Value& v) { c.simulate.hold = as_numbers(v, "hold"); };
  sim["capture_radius"] = [&](const Value& v) { c.simulate.capture_radius = as_number(v, "capture_radius"); };
  sim["feedback"] = [&](const Value& v) { c.simulate.feedback = as_strings(v, "feedback"); };
  sim["schedule_times"] = [&](const Value& v) { c.simulate.schedule_times = as_numbers(v, "schedule_times"); };
  sim["schedule_controls"] = [&](const Value& v) {
    c.simulate.schedule_controls = as_number_rows(v, "schedule_controls");
  };
  sim["table_states"] = [&](const Value& v) { c.simulate.table_states = as_number_rows(v, "table_states"); };
  sim["table_controls"] = [&](const Value& v) { c.simulate.table_controls = as_number_rows(v, "table_controls"); };
  sim["period"] = [&](const Value& v) { c.simulate.period = as_number(v, "period"); };
  sim["T"] = [&](const Value& v) { c.simulate.T = as_numbers(v, "T"); };
  sim["dt"] = [&](const Value& v) { c.simulate.dt = as_number(v, "dt"); };
  sim["lambda"] = [&](const Value& v) { c.simulate.lambda = as_numbers(v, "lambda"); };
  sim["abel_tail"] = [&](const Value& v) { c.simulate.abel_tail = as_number(v, "abel_tail"); };
  sim["budget"] = [&](const Value& v) { c.simulate.budget = as_number(v, "budget"); };
  sim["residual_floor"] = [&](const Value& v) { c.simulate.residual_floor = as_number(v, "residual_floor"); };

  auto& per = s["periodic"];
  per["enabled"] = [&](const Value& v) { c.periodic.enabled = as_bool(v, "enabled"); };
  per["family"] = [&](const Value& v) { c.periodic.family = as_string(v, "family"); };
  per["parameters"] = [&](const Value& v) { c.periodic.parameters = as_numbers(v, "parameters"); };
  per["max_period"] = [&](const Value& v) { c.periodic.max_period = as_number(v, "max_period"); };
  per["closure_tolerance"] = [&](const Value& v) {
    c.periodic.closure_tolerance = as_number(v, "closure_tolerance");
  };
  per["value_threshold"] = [&](const Value& v) { c.periodic.value_threshold = as_number(v, "value_threshold"); };

  auto& conv = s["convergence"];
  conv["state_resolutions"] = [&](const Value& v) {
    c.convergence.state_resolutions = as_int_rows(v, "state_resolutions");
  };
  conv["degrees"] = [&](const Value& v) { c.convergence.degrees = as_ints(v, "degrees"); };
  conv["tolerance"] = [&](const Value& v) { c.convergence.tolerance = as_number(v, "tolerance"); };

  auto& orc = s["oracle"];
  orc["angle_resolution"] = [&](const Value& v) { c.oracle.angle_resolution = as_int(v, "angle_resolution"); };
  orc["control_resolution"] = [&](const Value& v) {
    c.oracle.control_resolution = as_int(v, "control_resolution");
  };
  orc["z"] = [&](const Value& v) { c.oracle.z = as_numbers(v, "z"); };
  orc["tolerance"] = [&](const Value& v) { c.oracle.tolerance = as_number(v, "tolerance"); };

  auto& out = s["output"];
  out["format"] = [&](const Value& v) { c.output.format = as_string(v, "format"); };
  out["path"] = [&](const Value& v) { c.output.path = as_string(v, "path"); };
  out["trajectories"] = [&](const Value& v) { c.output.trajectories = as_bool(v, "trajectories"); };
  out["trajectory_stride"] = [&](const Value& v) { c.output.trajectory_stride = as_int(v, "trajectory_stride"); };
  return s;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string format_vector(const std::vector<double>& v) {
  std::ostringstream os;
  os << '[';
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    os << (i ? ", " : "") << buf;
  }
  os << ']';
  return os.str();
}

// Everything that needs more than one key: run after all keys are read.
void validate(const StudyConfig& c, const std::map<std::string, int>& lines,
              const std::map<std::string, int>& section_lines) {
  auto line_of = [&](const std::string& key) {
    const auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  };
  auto section_line = [&](const std::string& name) {
    const auto it = section_lines.find(name);
    return it == section_lines.end() ? 0 : it->second;
  };
  auto positive = [&](double x, const std::string& key) {
    if (!(x > 0.0)) throw ConfigError(line_of(key), key + " must be positive");
  };

  if (c.basis.max_degree < 1) throw ConfigError(line_of("basis.max_degree"), "max_degree must be ≥ 1");
  positive(c.program.tolerance, "program.tolerance");
  positive(c.program.xi_mass_cap, "program.xi_mass_cap");
  positive(c.simulate.dt, "simulate.dt");
  positive(c.simulate.abel_tail, "simulate.abel_tail");
  positive(c.simulate.budget, "simulate.budget");
  positive(c.simulate.capture_radius, "simulate.capture_radius");
  positive(c.periodic.closure_tolerance, "periodic.closure_tolerance");
  positive(c.periodic.max_period, "periodic.max_period");
  positive(c.convergence.tolerance, "convergence.tolerance");
  positive(c.oracle.tolerance, "oracle.tolerance");
  if (c.simulate.period < 0.0) throw ConfigError(line_of("simulate.period"), "simulate.period must be >= 0");
  if (c.simulate.residual_floor && *c.simulate.residual_floor < 0.0) {
    throw ConfigError(line_of("simulate.residual_floor"), "simulate.residual_floor must be >= 0");
  }
  if (c.oracle.angle_resolution < 1) {
    throw ConfigError(line_of("oracle.angle_resolution"), "angle_resolution must be >= 1");
  }
  if (c.oracle.control_resolution < 0) {
    throw ConfigError(line_of("oracle.control_resolution"), "control_resolution must be >= 0");
  }
  if (c.output.format != "json" && c.output.format != "csv-dir") {
    throw ConfigError(line_of("output.format"), "format must be \"json\" or \"csv-dir\"");
  }
  if (c.output.trajectory_stride < 1) {
    throw ConfigError(line_of("output.trajectory_stride"), "trajectory_stride must be >= 1");
  }

  SystemSpec spec;
  try {
    spec = make_system(c);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(section_line("system"), std::string("[system]: ") + e.what());
  }

  if (c.program.variants.empty()) throw ConfigError(line_of("program.variants"), "variants must not be empty");
  bool needs_y0 = c.simulate.policy != "none" || c.periodic.enabled;
  for (auto v : c.program.variants) {
    if (v != ProgramVariant::Ergodic) needs_y0 = true;
    if (v == ProgramVariant::Discounted) {
      if (c.program.lambda.empty()) throw ConfigError(line_of("program.lambda"), "discounted variant needs lambda");
      for (double l : c.program.lambda) {
        if (!(l > 0.0)) throw ConfigError(line_of("program.lambda"), "lambda values must be positive");
      }
    }
    if (v == ProgramVariant::Perturbed && c.program.epsilon.empty()) {
      throw ConfigError(section_line("program"), "[program] is missing required key 'epsilon' (perturbed variant)");
    }
  }
  for (double e : c.program.epsilon) {
    if (!(e >= 0.0)) throw ConfigError(line_of("program.epsilon"), "epsilon values must be >= 0");
  }
  if (needs_y0 && c.program.y0.empty()) {
    throw ConfigError(section_line("program"), "[program] is missing required key 'y0'");
  }
  if (!c.program.y0.empty()) {
    const int line = line_of("program.y0");
    if (static_cast<int>(c.program.y0.size()) != spec.dim_state) {
      throw ConfigError(line, "y0 has " + std::to_string(c.program.y0.size()) + " components, the state has " +
                                  std::to_string(spec.dim_state));
    }
    if (!spec.region.contains(to_vector(c.program.y0))) {
      throw ConfigError(line, "y0 = " + format_vector(c.program.y0) + " lies outside the state region");
    }
  }

  try {
    (void)make_grid_options(c, spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(section_line("grid"), std::string("[grid]: ") + e.what());
  }

  const std::set<std::string> policies{"none", "constant", "schedule", "feedback", "feedback-table",
                                       "steer-then-hold"};
  if (!policies.count(c.simulate.policy)) {
    throw ConfigError(line_of("simulate.policy"), "unknown policy '" + c.simulate.policy + "'");
  }
  auto need = [&](bool ok, const std::string& key) {
    if (!ok) throw ConfigError(section_line("simulate"), "[simulate] policy '" + c.simulate.policy +
                                                             "' is missing required key '" + key + "'");
  };
  const auto& s = c.simulate;
  if (s.policy == "constant") need(!s.control.empty(), "control");
  if (s.policy == "steer-then-hold") {
    need(!s.steer.empty(), "steer");
    need(!s.target.empty(), "target");
    need(!s.hold.empty(), "hold");
  }
  if (s.policy == "feedback") need(!s.feedback.empty(), "feedback");
  if (s.policy == "schedule") need(!s.schedule_times.empty(), "schedule_times");
  if (s.policy == "feedback-table") need(!s.table_states.empty(), "table_states");
  for (std::size_t i = 0; i < s.T.size(); ++i) {
    if (!(s.T[i] > 0.0) || (i > 0 && !(s.T[i] > s.T[i - 1]))) {
      throw ConfigError(line_of("simulate.T"), "T must be a positive increasing list");
    }
  }
  for (double l : s.lambda) {
    if (!(l > 0.0)) throw ConfigError(line_of("simulate.lambda"), "lambda values must be positive");
  }

  if (c.periodic.enabled) {
    if (c.periodic.parameters.empty()) {
      throw ConfigError(section_line("periodic"), "[periodic] is missing required key 'parameters'");
    }
    if (c.periodic.family != "rotation-cosine" && c.periodic.family != "constant") {
      throw ConfigError(line_of("periodic.family"), "unknown periodic family '" + c.periodic.family + "'");
    }
    if (c.periodic.family == "rotation-cosine" && !spec.region.is_annulus()) {
      throw ConfigError(line_of("periodic.family"), "rotation-cosine family needs an annulus region");
    }
  }

  if (c.convergence.state_resolutions.size() != c.convergence.degrees.size()) {
    throw ConfigError(section_line("convergence"), "state_resolutions and degrees must have the same length");
  }
  for (int d : c.convergence.degrees) {
    if (d < 1) throw ConfigError(line_of("convergence.degrees"), "max_degree must be ≥ 1");
  }
}

std::string q(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

template <typename T, typename F>
std::string list(const std::vector<T>& v, F f) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + f(v[i]);
  return out + "]";
}

std::string numbers(const std::vector<double>& v) { return list(v, num); }
std::string ints(const std::vector<int>& v) {
  return list(v, [](int x) { return std::to_string(x); });
}
std::string strings(const std::vector<std::string>& v) { return list(v, q); }
std::string rows(const std::vector<std::vector<double>>& v) { return list(v, numbers); }

}  // namespace

StudyConfig parse_config(const std::string& text) {
  StudyConfig config;
  Schema schema = make_schema(config);
  const auto sections = parse_document(text);
  std::map<std::string, int> lines;
  std::map<std::string, int> section_lines;
  for (const auto& section : sections) {
    const auto it = schema.find(section.name);
    if (it == schema.end()) throw ConfigError(section.line, "unknown section [" + section.name + "]");
    if (!section.name.empty()) section_lines[section.name] = section.line;
    for (const auto& entry : section.entries) {
      const auto handler = it->second.find(entry.key);
      if (handler == it->second.end()) {
        const std::string where = section.name.empty() ? "at top level" : "in [" + section.name + "]";
        throw ConfigError(entry.line, "unknown key '" + entry.key + "' " + where);
      }
      handler->second(entry.value);
      lines[(section.name.empty() ? "" : section.name + ".") + entry.key] = entry.line;
    }
  }
  // A [periodic] section switches the search on unless it says otherwise.
  if (section_lines.count("periodic") && !lines.count("periodic.enabled")) config.periodic.enabled = true;
  validate(config, lines, section_lines);
  return config;
}

StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(0, path + ": " + e.what());
  }
}

SystemSpec make_system(const StudyConfig& config) {
  const SystemConfig& s = config.system;
  auto controls = [&](int default_dim) {
    if (!s.control_points.empty()) {
      const auto k = static_cast<Eigen::Index>(s.control_points.front().size());
      Eigen::MatrixXd pts(k, static_cast<Eigen::Index>(s.control_points.size()));
      for (std::size_t j = 0; j < s.control_points.size(); ++j) {
        if (static_cast<Eigen::Index>(s.control_points[j].size()) != k) {
          throw std::invalid_argument("control_points must all have the same dimension");
        }
        pts.col(static_cast<Eigen::Index>(j)) = to_vector(s.control_points[j]);
      }
      return ControlRegion::finite(pts);
    }
    Eigen::VectorXd lo = s.control_lower.empty() ? Eigen::VectorXd::Constant(default_dim, -1.0)
                                                 : to_vector(s.control_lower);
    Eigen::VectorXd hi = s.control_upper.empty() ? Eigen::VectorXd::Constant(default_dim, 1.0)
                                                 : to_vector(s.control_upper);
    return ControlRegion::box(lo, hi);
  };
  auto box_region = [&](int default_dim) {
    Eigen::VectorXd lo = s.lower.empty() ? Eigen::VectorXd::Constant(default_dim, -1.0) : to_vector(s.lower);
    Eigen::VectorXd hi = s.upper.empty() ? Eigen::VectorXd::Constant(default_dim, 1.0) : to_vector(s.upper);
    return StateRegion::box(lo, hi);
  };

  SystemSpec spec;
  if (s.name == "rotation") {
    spec = make_rotation_system(s.inner, s.outer, s.cost.value_or("y1"), s.control_bound);
  } else if (s.name == "frozen") {
    spec = make_frozen_system(s.cost.value_or("y1 + u1^2"), box_region(2), controls(1));
  } else if (s.name == "scalar-drift") {
    spec = make_scalar_drift_system(s.cost.value_or("y1"));
  } else if (s.name == "custom") {
    if (s.dynamics.empty()) throw std::invalid_argument("custom system needs 'dynamics'");
    CustomSystemDecl decl;
    decl.dynamics = s.dynamics;
    decl.cost = s.cost.value_or("0");
    decl.first_integrals = s.first_integrals;
    const int m = static_cast<int>(s.dynamics.size());
    StateRegion region = s.region == "annulus"
                             ? StateRegion::annulus(s.inner, s.outer)
                             : (s.region == "box" ? box_region(m)
                                                  : throw std::invalid_argument("region must be box or annulus"));
    spec = make_custom_system(decl, region, controls(1));
  } else {
    throw std::invalid_argument("unknown system name '" + s.name + "'");
  }
  if (s.bound_f) {
    if (!(*s.bound_f >= 0.0)) throw std::invalid_argument("bound_f must be >= 0");
    spec.bound_f = *s.bound_f;
  }
  if (s.bound_k) {
    if (!(*s.bound_k >= 0.0)) throw std::invalid_argument("bound_k must be >= 0");
    spec.bound_k = *s.bound_k;
  }
  return spec;
}

Eigen::VectorXd config_y0(const StudyConfig& config) {
  if (config.program.y0.empty()) throw std::invalid_argument("study needs [program] y0");
  return to_vector(config.program.y0);
}

GridOptions make_grid_options(const StudyConfig& config, const SystemSpec& spec) {
  GridOptions o;
  o.state_resolution = config.grid.state_resolution;
  o.control_resolution = config.grid.control_resolution;
  o.state_placement = config.grid.state_placement;
  o.radial_placement = config.grid.radial_placement;
  o.control_placement = config.grid.control_placement;
  if (o.state_resolution.empty()) {
    o.state_resolution = spec.region.is_annulus() ? std::vector<int>{5, 64} : std::vector<int>(spec.dim_state, 8);
  }
  if (o.control_resolution.empty() && !spec.control_region.is_finite()) {
    o.control_resolution.assign(static_cast<std::size_t>(spec.dim_control), 9);
  }
  const std::size_t want = spec.region.is_annulus() ? 2 : static_cast<std::size_t>(spec.dim_state);
  if (o.state_resolution.size() != want) {
    throw std::invalid_argument("state_resolution needs " + std::to_string(want) + " entries");
  }
  if (!spec.control_region.is_finite() &&
      o.control_resolution.size() != static_cast<std::size_t>(spec.dim_control)) {
    throw std::invalid_argument("control_resolution needs " + std::to_string(spec.dim_control) + " entries");
  }
  for (int n : o.state_resolution) {
    if (n < 1) throw std::invalid_argument("resolutions must be >= 1");
  }
  for (int n : o.control_resolution) {
    if (n < 1) throw std::invalid_argument("resolutions must be >= 1");
  }
  return o;
}

std::string format_config(const StudyConfig& c) {
  std::ostringstream os;
  os << "seed = " << c.seed << "\n\n[system]\n";
  const auto& s = c.system;
  os << "name = " << q(s.name) << '\n';
  if (s.cost) os << "cost = " << q(*s.cost) << '\n';
  os << "inner = " << num(s.inner) << "\nouter = " << num(s.outer) << "\ncontrol_bound = " << num(s.control_bound)
     << "\nregion = " << q(s.region) << "\nlower = " << numbers(s.lower) << "\nupper = " << numbers(s.upper)
     << "\ncontrol_lower = " << numbers(s.control_lower) << "\ncontrol_upper = " << numbers(s.control_upper)
     << "\ncontrol_points = " << rows(s.control_points) << "\ndynamics = " << strings(s.dynamics)
     << "\nfirst_integrals = " << strings(s.first_integrals) << '\n';
  if (s.bound_f) os << "bound_f = " << num(*s.bound_f) << '\n';
  if (s.bound_k) os << "bound_k = " << num(*s.bound_k) << '\n';

  os << "\n[grid]\nstate_resolution = " << ints(c.grid.state_resolution)
     << "\ncontrol_resolution = " << ints(c.grid.control_resolution)
     << "\nstate_placement = " << q(placement_name(c.grid.state_placement))
     << "\nradial_placement = " << q(placement_name(c.grid.radial_placement))
     << "\ncontrol_placement = " << q(placement_name(c.grid.control_placement))
     << "\nanchor_y0 = " << (c.grid.anchor_y0 ? "true" : "false") << '\n';

  os << "\n[basis]\nmax_degree = " << c.basis.max_degree << '\n';

  std::vector<std::string> variants;
  for (auto v : c.program.variants) variants.emplace_back(to_string(v));
  os << "\n[program]\nvariants = " << strings(variants) << "\ny0 = " << numbers(c.program.y0)
     << "\nlambda = " << numbers(c.program.lambda) << "\nepsilon = " << numbers(c.program.epsilon)
     << "\nxi_mass_cap = " << num(c.program.xi_mass_cap)
     << "\nxi_mass_cap_enabled = " << (c.program.xi_mass_cap_enabled ? "true" : "false")
     << "\ntolerance = " << num(c.program.tolerance) << "\nexport_lp = " << (c.program.export_lp ? "true" : "false")
     << '\n';

  const auto& m = c.simulate;
  os << "\n[simulate]\npolicy = " << q(m.policy) << "\ncontrol = " << numbers(m.control)
     << "\nsteer = " << numbers(m.steer) << "\ntarget = " << numbers(m.target) << "\nhold = " << numbers(m.hold)
     << "\ncapture_radius = " << num(m.capture_radius) << "\nfeedback = " << strings(m.feedback)
     << "\nschedule_times = " << numbers(m.schedule_times) << "\nschedule_controls = " << rows(m.schedule_controls)
     << "\ntable_states = " << rows(m.table_states) << "\ntable_controls = " << rows(m.table_controls)
     << "\nperiod = " << num(m.period) << "\nT = " << numbers(m.T) << "\ndt = " << num(m.dt)
     << "\nlambda = " << numbers(m.lambda) << "\nabel_tail = " << num(m.abel_tail) << "\nbudget = " << num(m.budget)
     << '\n';
  if (m.residual_floor) os << "residual_floor = " << num(*m.residual_floor) << '\n';

  const auto& p = c.periodic;
  os << "\n[periodic]\nenabled = " << (p.enabled ? "true" : "false") << "\nfamily = " << q(p.family)
     << "\nparameters = " << numbers(p.parameters) << "\nmax_period = " << num(p.max_period)
     << "\nclosure_tolerance = " << num(p.closure_tolerance) << '\n';
  if (p.value_threshold) os << "value_threshold = " << num(*p.value_threshold) << '\n';

  os << "\n[convergence]\nstate_resolutions = "
     << list(c.convergence.state_resolutions, ints) << "\ndegrees = " << ints(c.convergence.degrees)
     << "\ntolerance = " << num(c.convergence.tolerance) << '\n';

  os << "\n[oracle]\nangle_resolution = " << c.oracle.angle_resolution
     << "\ncontrol_resolution = " << c.oracle.control_resolution << "\nz = " << numbers(c.oracle.z)
     << "\ntolerance = " << num(c.oracle.tolerance) << '\n';

  os << "\n[output]\nformat = " << q(c.output.format) << "\npath = " << q(c.output.path)
     << "\ntrajectories = " << (c.output.trajectories ? "true" : "false")
     << "\ntrajectory_stride = " << c.output.trajectory_stride << '\n';
  return os.str();
}

std::string default_config_text() {
  return R"(# occlp study configuration: every key with its default.
# Sections are optional unless a study needs them; unknown keys are errors.

seed = 1                       # seeds the off-grid certificate sampling

[system]
name = "rotation"              # rotation | frozen | scalar-drift | custom
# cost = "y1"                  # expression in y1.., u1..; default depends on the system
inner = 0.5                    # rotation (and custom annulus) radii
outer = 1.5
control_bound = 1.0            # rotation: U = [-control_bound, control_bound]
region = "box"                 # custom systems: box | annulus
lower = []                     # box corners, default [-1, ...]
upper = []                     #              default [ 1, ...]
control_lower = []             # control box, default [-1]
control_upper = []             #              default [ 1]
control_points = []            # finite control set, e.g. [[-1], [0], [1]]
dynamics = []                  # custom: one expression per state component
first_integrals = []           # custom: expressions F(y) with grad F . f = 0
# bound_f = 1.5                # override the sampled sup |f|
# bound_k = 1.5                # override the sampled sup |k|

[grid]
state_resolution = []          # annulus: [n_r, n_theta] (default [5, 64]); box: one count per axis (default 8)
control_resolution = []        # one count per control axis (default 9)
state_placement = "midpoint"   # box axes: midpoint | nodes
radial_placement = "nodes"     # annulus radii: midpoint | nodes
control_placement = "nodes"    # control axes: midpoint | nodes
anchor_y0 = true               # add atoms through y0 when it is off-grid

[basis]
max_degree = 4                 # monomials of total degree 1..max_degree

[program]
variants = ["nonergodic"]      # any of ergodic, nonergodic, discounted, perturbed
y0 = []                        # required unless only the ergodic variant runs
lambda = [0.1]                 # discounted variant
epsilon = []                   # perturbed variant (required for it)
xi_mass_cap = 1000000
xi_mass_cap_enabled = true
tolerance = 1e-06              # duality / certificate tolerance
export_lp = false              # write every LP instance to <out>/lp/*.lp

[simulate]
policy = "none"                # none | constant | schedule | feedback | feedback-table | steer-then-hold
control = []                   # constant
steer = []                     # steer-then-hold
target = []
hold = []
capture_radius = 0.001
feedback = []                  # feedback: one expression in y per control
schedule_times = []            # schedule: breakpoints
schedule_controls = []         #           one control vector per breakpoint
table_states = []              # feedback-table: cell states
table_controls = []            #                 one control vector per cell
period = 0                     # > 0 wraps the policy periodically
T = []                         # horizons, increasing
dt = 0.001
lambda = []                    # Abel values
abel_tail = 0.001              # required tail bound e^{-lambda H} bound_k
budget = 0.05                  # Cesaro/LP ordering slack
# residual_floor = 0           # default: measured loop floor (rotation) or 1e-9

[periodic]                     # a present section enables the search
enabled = false
family = "rotation-cosine"     # rotation-cosine (parameters = deltas) | constant (parameters = control values)
parameters = []
max_period = 500
closure_tolerance = 0.001
# value_threshold = -0.9       # optional: last candidate must reach this value

[convergence]
state_resolutions = []         # refinement levels, zipped with degrees
degrees = []
tolerance = 0.02

[oracle]
angle_resolution = 512
control_resolution = 0         # 0: use the grid's control resolution
z = []                         # level-set grid, default 9 levels over [inner^2, outer^2]
tolerance = 0.05

[output]
format = "json"                # json | csv-dir
path = "occlp-report"          # --out overrides
trajectories = false
trajectory_stride = 100
)";
}

nlohmann::json config_to_json(const StudyConfig& c) {
  using nlohmann::json;
  json j;
  j["seed"] = c.seed;
  const auto& s = c.system;
  j["system"] = {{"name", s.name},
                 {"cost", s.cost ? json(*s.cost) : json(nullptr)},
                 {"inner", s.inner},
                 {"outer", s.outer},
                 {"control_bound", s.control_bound},
                 {"region", s.region},
                 {"lower", s.lower},
                 {"upper", s.upper},
                 {"control_lower", s.control_lower},
                 {"control_upper", s.control_upper},
                 {"control_points", s.control_points},
                 {"dynamics", s.dynamics},
                 {"first_integrals", s.first_integrals},
                 {"bound_f", s.bound_f ? json(*s.bound_f) : json(nullptr)},
                 {"bound_k", s.bound_k ? json(*s.bound_k) : json(nullptr)}};
  j["grid"] = {{"state_resolution", c.grid.state_resolution},
               {"control_resolution", c.grid.control_resolution},
               {"state_placement", placement_name(c.grid.state_placement)},
               {"radial_placement", placement_name(c.grid.radial_placement)},
               {"control_placement", placement_name(c.grid.control_placement)},
               {"anchor_y0", c.grid.anchor_y0}};
  j["basis"] = {{"max_degree", c.basis.max_degree}};
  std::vector<std::string> variants;
  for (auto v : c.program.variants) variants.emplace_back(to_string(v));
  j["program"] = {{"variants", variants},
                  {"y0", c.program.y0},
                  {"lambda", c.program.lambda},
                  {"epsilon", c.program.epsilon},
                  {"xi_mass_cap", c.program.xi_mass_cap},
                  {"xi_mass_cap_enabled", c.program.xi_mass_cap_enabled},
                  {"tolerance", c.program.tolerance},
                  {"export_lp", c.program.export_lp}};
  const auto& m = c.simulate;
  j["simulate"] = {{"policy", m.policy},
                   {"control", m.control},
                   {"steer", m.steer},
                   {"target", m.target},
                   {"hold", m.hold},
                   {"capture_radius", m.capture_radius},
                   {"feedback", m.feedback},
                   {"schedule_times", m.schedule_times},
                   {"schedule_controls", m.schedule_controls},
                   {"table_states", m.table_states},
                   {"table_controls", m.table_controls},
                   {"period", m.period},
                   {"T", m.T},
                   {"dt", m.dt},
                   {"lambda", m.lambda},
                   {"abel_tail", m.abel_tail},
                   {"budget", m.budget},
                   {"residual_floor", m.residual_floor ? json(*m.residual_floor) : json(nullptr)}};
  const auto& p = c.periodic;
  j["periodic"] = {{"enabled", p.enabled},
                   {"family", p.family},
                   {"parameters", p.parameters},
                   {"max_period", p.max_period},
                   {"closure_tolerance", p.closure_tolerance},
                   {"value_threshold", p.value_threshold ? json(*p.value_threshold) : json(nullptr)}};
  j["convergence"] = {{"state_resolutions", c.convergence.state_resolutions},
                      {"degrees", c.convergence.degrees},
                      {"tolerance", c.convergence.tolerance}};
  j["oracle"] = {{"angle_resolution", c.oracle.angle_resolution},
                 {"control_resolution", c.oracle.control_resolution},
                 {"z", c.oracle.z},
                 {"tolerance", c.oracle.tolerance}};
  j["output"] = {{"format", c.output.format},
                 {"path", c.output.path},
                 {"trajectories", c.output.trajectories},
                 {"trajectory_stride", c.output.trajectory_stride}};
  return j;
}

}  // namespace occlp
