#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgtime/analysis.hpp"

namespace dgtime {

/// Unreadable or invalid configuration / system file (exit code 2).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StudyConfig {
  std::string problem = "heat1d";  // heat1d | stokes3 | path to a system file
  int q = 2;
  std::vector<int> Ns;
  std::string projection = "on";   // on | off | both
  std::vector<std::string> norms{"energy", "nodal", "multiplier"};
  std::string output;              // empty: write to stdout
  std::string format = "md";       // csv | md
  std::uint64_t seed = 0;
  int elements = 4;                // spatial cells for heat1d
  double T = 1.0;

  void validate() const;
};

/// Reads the JSON keys of StudyConfig; unknown keys are rejected.
StudyConfig parse_study_config(const std::string& json_text);
StudyConfig load_study_config(const std::string& path);

/// System file: JSON object with dense row-major matrices "M", "A",
/// optional "B1", "B2", "lift", "normU", "normQ1", "u0", and "data" naming
/// a data preset: "zero" (f = g = 0) or "trig" (manufactured
///   u_i(t) = sin((1 + i/2) t + 0.3 i),  p_j(t) = exp((j + 1) t / 2)).
ConstrainedSystem load_system_file(const std::string& path);
ConstrainedSystem parse_system(const std::string& json_text);

/// heat1d (heat_trig with `elements` cells), a saddle preset name, or a
/// system file path.
ConstrainedSystem load_problem(const std::string& ref, int elements);

/// Six significant digits, the precision of all table output.
std::string format_number(double value);

/// CSV columns: N,k,err_energy,eoc_energy,err_nodal,eoc_nodal,err_p,eoc_p.
/// Unselected norms leave empty cells; an order at the error floor is
/// written as "at-floor". LF line endings.
void write_csv(const EOCTable& table, std::ostream& out);
EOCTable read_csv(std::istream& in);

/// Pipe table with one column per N and an EOC_T row under each error row.
void write_markdown(const EOCTable& table, std::ostream& out);

/// Subcommands. Exit codes: 0 success, 1 validation failure, 2 bad input,
/// 3 solver failure.
int cmd_study(const StudyConfig& config, int threads, std::ostream& out, std::ostream& err);
int cmd_validate(const std::string& problem, int elements, std::ostream& out, std::ostream& err);
int cmd_project(const std::string& preset, double T, int N, int q, std::ostream& out,
                std::ostream& err);

/// Thread cap from DGTIME_THREADS, default hardware concurrency.
int thread_limit();

/// Full command-line entry point.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dgtime
