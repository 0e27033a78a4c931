#include "occlp/report.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace occlp {

using nlohmann::json;

bool ReportBundle::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

std::vector<std::string> ReportBundle::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.passed) out.push_back(c.name + (c.detail.empty() ? "" : ": " + c.detail));
  }
  return out;
}

const ValueEntry* ReportBundle::find_value(const std::string& label) const {
  for (const auto& v : values) {
    if (v.label == label) return &v;
  }
  return nullptr;
}

const SweepTable* ReportBundle::find_sweep(const std::string& name) const {
  for (const auto& s : sweeps) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void to_json(json& j, const ValueEntry& v) {
  j = {{"label", v.label},       {"kind", v.kind},
       {"variant", v.variant},   {"parameter_name", v.parameter_name},
       {"parameter", v.parameter}, {"status", v.status},
       {"value", v.value},       {"has_mu", v.has_mu},
       {"mu", v.mu},             {"duality_gap", v.duality_gap},
       {"iterations", v.iterations}, {"xi_mass", v.xi_mass},
       {"cap_binding", v.cap_binding}, {"error_bound", v.error_bound},
       {"note", v.note}};
}

void from_json(const json& j, ValueEntry& v) {
  j.at("label").get_to(v.label);
  j.at("kind").get_to(v.kind);
  j.at("variant").get_to(v.variant);
  j.at("parameter_name").get_to(v.parameter_name);
  j.at("parameter").get_to(v.parameter);
  j.at("status").get_to(v.status);
  j.at("value").get_to(v.value);
  j.at("has_mu").get_to(v.has_mu);
  j.at("mu").get_to(v.mu);
  j.at("duality_gap").get_to(v.duality_gap);
  j.at("iterations").get_to(v.iterations);
  j.at("xi_mass").get_to(v.xi_mass);
  j.at("cap_binding").get_to(v.cap_binding);
  j.at("error_bound").get_to(v.error_bound);
  j.at("note").get_to(v.note);
}

void to_json(json& j, const CertificateEntry& c) {
  j = {{"label", c.label},
       {"mu", c.mu},
       {"cost_shift", c.cost_shift},
       {"flow_floor", c.flow_floor},
       {"psi", c.psi},
       {"eta", c.eta},
       {"min_cost_slack", c.min_cost_slack},
       {"min_flow_slack", c.min_flow_slack},
       {"has_offgrid", c.has_offgrid},
       {"offgrid_points", c.offgrid_points},
       {"offgrid_min_cost_slack", c.offgrid_min_cost_slack},
       {"offgrid_min_flow_slack", c.offgrid_min_flow_slack},
       {"passed", c.passed}};
}

void from_json(const json& j, CertificateEntry& c) {
  j.at("label").get_to(c.label);
  j.at("mu").get_to(c.mu);
  j.at("cost_shift").get_to(c.cost_shift);
  j.at("flow_floor").get_to(c.flow_floor);
  j.at("psi").get_to(c.psi);
  j.at("eta").get_to(c.eta);
  j.at("min_cost_slack").get_to(c.min_cost_slack);
  j.at("min_flow_slack").get_to(c.min_flow_slack);
  j.at("has_offgrid").get_to(c.has_offgrid);
  j.at("offgrid_points").get_to(c.offgrid_points);
  j.at("offgrid_min_cost_slack").get_to(c.offgrid_min_cost_slack);
  j.at("offgrid_min_flow_slack").get_to(c.offgrid_min_flow_slack);
  j.at("passed").get_to(c.passed);
}

void to_json(json& j, const MeasureAtom& a) { j = {{"atom", a.atom}, {"y", a.y}, {"u", a.u}, {"weight", a.weight}}; }

void from_json(const json& j, MeasureAtom& a) {
  j.at("atom").get_to(a.atom);
  j.at("y").get_to(a.y);
  j.at("u").get_to(a.u);
  j.at("weight").get_to(a.weight);
}

void to_json(json& j, const MeasureEntry& m) {
  j = {{"label", m.label}, {"grid_fingerprint", m.grid_fingerprint}, {"atoms", m.atoms}};
}

void from_json(const json& j, MeasureEntry& m) {
  j.at("label").get_to(m.label);
  j.at("grid_fingerprint").get_to(m.grid_fingerprint);
  j.at("atoms").get_to(m.atoms);
}

void to_json(json& j, const SweepTable& s) {
  j = {{"name", s.name}, {"columns", s.columns}, {"rows", s.rows}, {"monotone", s.monotone}, {"note", s.note}};
}

void from_json(const json& j, SweepTable& s) {
  j.at("name").get_to(s.name);
  j.at("columns").get_to(s.columns);
  j.at("rows").get_to(s.rows);
  j.at("monotone").get_to(s.monotone);
  j.at("note").get_to(s.note);
}

void to_json(json& j, const CheckEntry& c) { j = {{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}}; }

void from_json(const json& j, CheckEntry& c) {
  j.at("name").get_to(c.name);
  j.at("passed").get_to(c.passed);
  j.at("detail").get_to(c.detail);
}

void to_json(json& j, const TrajectoryEntry& t) {
  j = {{"label", t.label}, {"columns", t.columns}, {"rows", t.rows}};
}

void from_json(const json& j, TrajectoryEntry& t) {
  j.at("label").get_to(t.label);
  j.at("columns").get_to(t.columns);
  j.at("rows").get_to(t.rows);
}

json to_json(const ReportBundle& b) {
  json j;
  j["schema"] = b.schema;
  j["study"] = b.study;
  j["environment"] = b.environment;
  j["config"] = b.config;
  j["basis_degree"] = b.basis_degree;
  j["all_passed"] = b.all_passed();
  j["values"] = b.values;
  j["certificates"] = b.certificates;
  j["measures"] = b.measures;
  j["sweeps"] = b.sweeps;
  j["checks"] = b.checks;
  j["trajectories"] = b.trajectories;
  return j;
}

ReportBundle bundle_from_json(const json& j) {
  ReportBundle b;
  j.at("schema").get_to(b.schema);
  if (b.schema != kReportSchema) throw std::invalid_argument("unsupported report schema '" + b.schema + "'");
  j.at("study").get_to(b.study);
  b.environment = j.at("environment");
  b.config = j.at("config");
  j.at("basis_degree").get_to(b.basis_degree);
  j.at("values").get_to(b.values);
  j.at("certificates").get_to(b.certificates);
  j.at("measures").get_to(b.measures);
  j.at("sweeps").get_to(b.sweeps);
  j.at("checks").get_to(b.checks);
  j.at("trajectories").get_to(b.trajectories);
  return b;
}

namespace {

namespace fs = std::filesystem;

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Quotes fields that would break a CSV row.
std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// File-name friendly version of a label.
std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') {
      out += c;
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "unnamed" : out;
}

std::ofstream open(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

void write_table(const fs::path& p, const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows) {
  auto out = open(p);
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << field(columns[i]);
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << num(r[i]);
    out << '\n';
  }
}

}  // namespace

void emit_report(const ReportBundle& b, const std::string& format, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());

  if (format == "json") {
    auto out = open(root / "report.json");
    out << to_json(b).dump(2) << '\n';
    return;
  }
  if (format != "csv-dir") throw std::invalid_argument("unknown report format '" + format + "'");

  {
    auto out = open(root / "values.csv");
    out << "label,kind,variant,parameter_name,parameter,status,value,mu,duality_gap,iterations,xi_mass,cap_binding,"
           "error_bound,note\n";
    for (const auto& v : b.values) {
      out << field(v.label) << ',' << v.kind << ',' << v.variant << ',' << v.parameter_name << ','
          << num(v.parameter) << ',' << v.status << ',' << num(v.value) << ',' << (v.has_mu ? num(v.mu) : "") << ','
          << num(v.duality_gap) << ',' << v.iterations << ',' << num(v.xi_mass) << ',' << int(v.cap_binding) << ','
          << num(v.error_bound) << ',' << field(v.note) << '\n';
    }
  }
  {
    auto out = open(root / "duals.csv");
    out << "label,kind,index,value\n";
    for (const auto& c : b.certificates) {
      const std::string l = field(c.label);
      out << l << ",mu,0," << num(c.mu) << '\n';
      out << l << ",cost_shift,0," << num(c.cost_shift) << '\n';
      out << l << ",flow_floor,0," << num(c.flow_floor) << '\n';
      for (std::size_t i = 0; i < c.psi.size(); ++i) out << l << ",psi," << i << ',' << num(c.psi[i]) << '\n';
      for (std::size_t i = 0; i < c.eta.size(); ++i) out << l << ",eta," << i << ',' << num(c.eta[i]) << '\n';
      out << l << ",min_cost_slack,0," << num(c.min_cost_slack) << '\n';
      out << l << ",min_flow_slack,0," << num(c.min_flow_slack) << '\n';
      if (c.has_offgrid) {
        out << l << ",offgrid_min_cost_slack,0," << num(c.offgrid_min_cost_slack) << '\n';
        out << l << ",offgrid_min_flow_slack,0," << num(c.offgrid_min_flow_slack) << '\n';
      }
    }
  }
  {
    auto out = open(root / "checks.csv");
    out << "name,passed,detail\n";
    for (const auto& c : b.checks) out << field(c.name) << ',' << int(c.passed) << ',' << field(c.detail) << '\n';
  }
  if (!b.measures.empty()) {
    fs::create_directories(root / "measures");
    for (const auto& m : b.measures) {
      const std::size_t ny = m.atoms.empty() ? 0 : m.atoms.front().y.size();
      const std::size_t nu = m.atoms.empty() ? 0 : m.atoms.front().u.size();
      std::vector<std::string> cols{"atom"};
      for (std::size_t i = 0; i < ny; ++i) cols.push_back("y" + std::to_string(i + 1));
      for (std::size_t i = 0; i < nu; ++i) cols.push_back("u" + std::to_string(i + 1));
      cols.emplace_back("weight");
      std::vector<std::vector<double>> rows;
      for (const auto& a : m.atoms) {
        std::vector<double> r{static_cast<double>(a.atom)};
        r.insert(r.end(), a.y.begin(), a.y.end());
        r.insert(r.end(), a.u.begin(), a.u.end());
        r.push_back(a.weight);
        rows.push_back(std::move(r));
      }
      write_table(root / "measures" / (slug(m.label) + ".csv"), cols, rows);
    }
  }
  if (!b.sweeps.empty()) {
    fs::create_directories(root / "sweeps");
    for (const auto& s : b.sweeps) {
      write_table(root / "sweeps" / (slug(s.name) + ".csv"), s.columns, s.rows);
      if (s.columns.size() >= 2) {
        auto dat = open(root / "sweeps" / (slug(s.name) + ".dat"));
        dat << "# " << s.columns[0] << ' ' << s.columns[1] << '\n';
        for (const auto& r : s.rows) dat << num(r[0]) << ' ' << num(r[1]) << '\n';
      }
    }
  }
  if (!b.trajectories.empty()) {
    fs::create_directories(root / "trajectories");
    for (const auto& t : b.trajectories) write_table(root / "trajectories" / (slug(t.label) + ".csv"), t.columns, t.rows);
  }
}

}  // namespace occlp
