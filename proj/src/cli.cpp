#include "dgtime/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

namespace dgtime {

// ---------------------------------------------------------------------------
// Configuration

void StudyConfig::validate() const {
  if (Ns.empty()) throw config_error("Ns must not be empty");
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (Ns[i] < 1) throw config_error("Ns entries must be positive");
    if (i > 0 && Ns[i] <= Ns[i - 1]) throw config_error("Ns must be strictly increasing");
  }
  if (q < 1 || q > 6) throw config_error("q must be in 1..6");
  if (projection != "on" && projection != "off" && projection != "both") {
    throw config_error("projection must be on, off or both");
  }
  for (const auto& n : norms) {
    if (n != "energy" && n != "nodal" && n != "multiplier") {
      throw config_error("unknown norm '" + n + "'");
    }
  }
  if (format != "csv" && format != "md") throw config_error("format must be csv or md");
  if (elements < 2) throw config_error("elements must be >= 2");
  if (!(T > 0.0)) throw config_error("T must be positive");
}

StudyConfig parse_study_config(const std::string& text) {
  using nlohmann::json;
  StudyConfig cfg;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw config_error("config: top level must be an object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "problem") cfg.problem = value.get<std::string>();
      else if (key == "q") cfg.q = value.get<int>();
      else if (key == "Ns") cfg.Ns = value.get<std::vector<int>>();
      else if (key == "projection") cfg.projection = value.get<std::string>();
      else if (key == "norms") cfg.norms = value.get<std::vector<std::string>>();
      else if (key == "output") cfg.output = value.get<std::string>();
      else if (key == "format") cfg.format = value.get<std::string>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "elements") cfg.elements = value.get<int>();
      else if (key == "T") cfg.T = value.get<double>();
      else throw config_error("config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return cfg;
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_study_config(buffer.str());
}

// ---------------------------------------------------------------------------
// Tables

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string cell(const std::optional<Order>& o) {
  if (!o) return {};
  return o->at_floor ? std::string("at-floor") : format_number(o->value);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> parse_value(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw config_error("csv: bad number '" + s + "'");
  return v;
}

std::optional<Order> parse_order(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "at-floor") return Order{0.0, true};
  return Order{*parse_value(s), false};
}

constexpr const char* kCsvHeader = "N,k,err_energy,eoc_energy,err_nodal,eoc_nodal,err_p,eoc_p";

}  // namespace

void write_csv(const EOCTable& table, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : table.rows) {
    out << r.N << ',' << format_number(r.k) << ',' << cell(r.err_energy) << ',' << cell(r.eoc_energy)
        << ',' << cell(r.err_nodal) << ',' << cell(r.eoc_nodal) << ',' << cell(r.err_p) << ','
        << cell(r.eoc_p) << '\n';
  }
}

EOCTable read_csv(std::istream& in) {
  EOCTable table;
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw config_error("csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) throw config_error("csv: expected 8 fields");
    EOCRow r;
    r.N = std::stoi(f[0]);
    r.k = *parse_value(f[1]);
    r.err_energy = parse_value(f[2]);
    r.eoc_energy = parse_order(f[3]);
    r.err_nodal = parse_value(f[4]);
    r.eoc_nodal = parse_order(f[5]);
    r.err_p = parse_value(f[6]);
    r.eoc_p = parse_order(f[7]);
    table.rows.push_back(r);
  }
  return table;
}

void write_markdown(const EOCTable& table, std::ostream& out) {
  out << "### " << table.problem << ": q = " << table.q << ", projection "
      << (table.use_projection ? "on" : "off") << "\n\n";
  out << "| quantity \\ N |";
  for (const auto& r : table.rows) out << ' ' << r.N << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < table.rows.size(); ++i) out << "---|";
  out << '\n';

  auto emit = [&](const char* label, std::optional<double> EOCRow::*err,
                  std::optional<Order> EOCRow::*order) {
    bool any = false;
    for (const auto& r : table.rows) any = any || (r.*err).has_value();
    if (!any) return;
    out << "| " << label << " |";
    for (const auto& r : table.rows) out << ' ' << cell(r.*err) << " |";
    out << "\n| EOC_T |";
    for (const auto& r : table.rows) out << ' ' << cell(r.*order) << " |";
    out << '\n';
  };
  emit("energy error (L2 in time, U-norm)", &EOCRow::err_energy, &EOCRow::eoc_energy);
  emit("max nodal error (M-norm)", &EOCRow::err_nodal, &EOCRow::eoc_nodal);
  emit("multiplier error (L2 in time)", &EOCRow::err_p, &EOCRow::eoc_p);
  if (!table.note.empty()) out << "\n" << table.note << "\n";
}

// ---------------------------------------------------------------------------
// Commands

int thread_limit() {
  if (const char* env = std::getenv("DGTIME_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string variant_path(const std::string& output, const std::string& suffix) {
  std::filesystem::path p(output);
  const std::string stem = p.stem().string() + suffix;
  return (p.parent_path() / (stem + p.extension().string())).string();
}

}  // namespace

int cmd_study(const StudyConfig& config, int threads, std::ostream& out, std::ostream& err) {
  ConstrainedSystem sys;
  try {
    config.validate();
    sys = load_problem(config.problem, config.elements);
  } catch (const std::exception& e) {
    err << "dgtime study: " << e.what() << '\n';
    return 2;
  }
  for (const auto& w : sys.warnings) err << "warning: " << w << '\n';

  StudyOptions opts;
  opts.q = config.q;
  opts.Ns = config.Ns;
  opts.T = config.T;
  opts.threads = threads;
  opts.norms = {false, false, false};
  for (const auto& n : config.norms) {
    if (n == "energy") opts.norms.energy = true;
    if (n == "nodal") opts.norms.nodal = true;
    if (n == "multiplier") opts.norms.multiplier = true;
  }

  std::vector<bool> variants;
  if (config.projection != "off") variants.push_back(true);
  if (config.projection != "on") variants.push_back(false);

  for (bool projected : variants) {
    opts.use_projection = projected;
    EOCTable table;
    try {
      table = run_study(sys, opts);
    } catch (const solver_failure& e) {
      err << "dgtime study: solver failure: " << e.what() << '\n';
      return 3;
    } catch (const data_error& e) {
      err << "dgtime study: data error: " << e.what() << '\n';
      return 3;
    } catch (const std::invalid_argument& e) {
      err << "dgtime study: " << e.what() << '\n';
      return 2;
    }

    std::ostringstream text;
    if (config.format == "csv") {
      write_csv(table, text);
    } else {
      write_markdown(table, text);
    }
    if (config.output.empty()) {
      out << text.str();
      if (config.format == "md") out << '\n';
      continue;
    }
    const std::string path = variants.size() > 1
                                 ? variant_path(config.output, projected ? "_proj" : "_noproj")
                                 : config.output;
    std::ofstream file(path, std::ios::binary);
    file << text.str();
    if (!file) {
      err << "dgtime study: cannot write '" << path << "'\n";
      return 2;
    }
    out << "wrote " << path << '\n';
  }
  return 0;
}

int cmd_validate(const std::string& problem, int elements, std::ostream& out, std::ostream& err) {
  ConstrainedSystem sys;
  try {
    sys = load_problem(problem, elements);
  } catch (const std::exception& e) {
    err << "dgtime validate: " << e.what() << '\n';
    return 2;
  }
  const ValidationReport report = validate_system(sys);
  out << "system " << sys.name << ": m = " << sys.m() << ", r1 = " << sys.r1()
      << ", r2 = " << sys.r2() << ", kernel dimension = " << report.kernel_dim << '\n';
  for (const auto& c : report.checks) {
    const char* status = c.passed ? "PASS" : (c.required ? "FAIL" : "WARN");
    out << status << "  " << c.name << ": " << c.detail << '\n';
  }
  out << (report.passed() ? "all checks passed" : "validation failed") << '\n';
  return report.passed() ? 0 : 1;
}

int cmd_project(const std::string& preset, double T, int N, int q, std::ostream& out,
                std::ostream& err) {
  std::function<double(double)> phi;
  if (preset == "tsq") phi = [](double t) { return t * t; };
  else if (preset == "t") phi = [](double t) { return t; };
  else if (preset == "const1") phi = [](double) { return 1.0; };
  else if (preset == "sin4t") phi = [](double t) { return std::sin(4.0 * t); };
  else {
    err << "dgtime project: unknown preset '" << preset << "' (tsq, t, const1, sin4t)\n";
    return 2;
  }
  try {
    const TimeMesh mesh = build_uniform_mesh(T, N);
    const ProjectionSpec spec(q, gauss_legendre(std::max(q + 2, 4)));
    const BrokenFunction F =
        project_broken([&](double t) { return Vector::Constant(1, phi(t)); }, mesh, 1, spec);
    out << "# projection of '" << preset << "', q = " << q << ", N = " << N << ", T = "
        << format_number(T) << "\n# slab t_begin t_end coefficients (shifted Legendre)\n";
    for (int s = 0; s < N; ++s) {
      out << s + 1 << ' ' << format_number(mesh.slab_begin(s)) << ' '
          << format_number(mesh.slab_end(s));
      // Rounding noise relative to the slab's largest coefficient prints as 0.
      const Matrix& c = F.slab(s).coeffs();
      const double cutoff = 1e-13 * c.cwiseAbs().maxCoeff();
      for (int i = 0; i < q; ++i) {
        out << ' ' << format_number(std::abs(c(i, 0)) <= cutoff ? 0.0 : c(i, 0));
      }
      out << '\n';
    }
  } catch (const std::exception& e) {
    err << "dgtime project: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discontinuous Galerkin time stepping for constrained parabolic problems", "dgtime"};
  app.require_subcommand(1);

  auto* study = app.add_subcommand("study", "run a temporal convergence study");
  std::string config_path, problem, projection, norms, output, format, ns_text;
  int q = 0, elements = 0;
  std::uint64_t seed = 0;
  double T = 0.0;
  study->add_option("--config", config_path, "JSON study configuration");
  study->add_option("--problem", problem, "heat1d | stokes3 | system file");
  study->add_option("--q", q, "temporal dofs per slab (degree q-1)");
  study->add_option("--Ns", ns_text, "comma-separated slab counts");
  study->add_option("--projection", projection, "on | off | both");
  study->add_option("--norms", norms, "comma-separated subset of energy,nodal,multiplier");
  study->add_option("--output", output, "output path (stdout if omitted)");
  study->add_option("--format", format, "csv | md");
  study->add_option("--seed", seed, "seed recorded with the run");
  study->add_option("--elements", elements, "spatial cells for heat1d");
  study->add_option("--T", T, "final time");

  auto* validate = app.add_subcommand("validate", "check the structural assumptions of a system");
  std::string validate_problem;
  int validate_elements = 4;
  validate->add_option("problem", validate_problem, "heat1d | stokes3 | system file")->required();
  validate->add_option("--elements", validate_elements, "spatial cells for heat1d");

  auto* project = app.add_subcommand("project", "print the slab-wise projection of a preset");
  std::string preset;
  double project_T = 1.0;
  int project_N = 1, project_q = 2;
  project->add_option("--preset", preset, "tsq | t | const1 | sin4t")->required();
  project->add_option("--T", project_T, "final time");
  project->add_option("--N", project_N, "number of slabs");
  project->add_option("--q", project_q, "temporal dofs per slab");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "dgtime: " << e.what() << '\n';
    return 2;
  }

  if (*study) {
    StudyConfig cfg;
    try {
      if (!config_path.empty()) cfg = load_study_config(config_path);
      if (study->count("--problem")) cfg.problem = problem;
      if (study->count("--q")) cfg.q = q;
      if (study->count("--Ns")) {
        cfg.Ns.clear();
        for (const auto& s : split(ns_text, ',')) {
          if (s.empty()) continue;
          cfg.Ns.push_back(std::stoi(s));
        }
      }
      if (study->count("--projection")) cfg.projection = projection;
      if (study->count("--norms")) cfg.norms = split(norms, ',');
      if (study->count("--output")) cfg.output = output;
      if (study->count("--format")) cfg.format = format;
      if (study->count("--seed")) cfg.seed = seed;
      if (study->count("--elements")) cfg.elements = elements;
      if (study->count("--T")) cfg.T = T;
    } catch (const std::exception& e) {
      err << "dgtime study: " << e.what() << '\n';
      return 2;
    }
    return cmd_study(cfg, thread_limit(), out, err);
  }
  if (*validate) return cmd_validate(validate_problem, validate_elements, out, err);
  return cmd_project(preset, project_T, project_N, project_q, out, err);
}

}  // namespace dgtime
