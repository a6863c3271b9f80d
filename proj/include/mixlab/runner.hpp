#pragma once

// Subcommand orchestration shared by the command-line tool and the
// acceptance binary.  Every run writes its CSV outputs plus a manifest.json
// (schema "v1") holding the configuration, a hash of it, the derived
// constants, and the verdicts, so each CSV can be regenerated from the
// manifest alone.  Placement and execution knobs (out, threads) and wall
// times stay out of the manifest; they never change a CSV byte.

#include <cstdio>
#include <string>
#include <vector>

#include "mixlab/grid.hpp"

namespace mixlab::runner {

struct RunConfig {
  std::string subcommand = "all";
  std::string model;            // empty picks the subcommand default
  int res = 0;                  // log2 cells per axis for inducing; 0 = by dim
  int n_max = 12;
  int grid_n = 0;               // operator grid; 0 = by dim
  int n0 = 1;
  std::vector<double> b_list{40.0, 100.0, 400.0};
  std::vector<double> sigma_list{0.0};
  std::string obs_v = "base-wave:3";
  std::string obs_w = "base-wave:3";
  std::int64_t samples = 1'000'000;
  double t_max = 30.0;
  double t_step = 0.125;
  int pairs = 20;
  int degree = 32;
  int blocks = 30;
  int dict = 24;
  std::uint64_t seed = 42;
  int threads = 0;              // 0 = leave the OpenMP default alone
  std::string out = "out";
};

// [run] table of a TOML file; unknown keys are rejected.
RunConfig load_config(const std::string& path);

// Applies cfg.threads to the OpenMP runtime when positive.
void apply_threads(const RunConfig& cfg);

// Executes cfg.subcommand.  Returns 0 on success, 2 when a verdict fails
// (invariant violation, non-contracting fit, flagged inconsistency).
// Usage errors throw check_error; the caller maps those to exit code 1.
int run(const RunConfig& cfg);

// One acceptance criterion result; detail is a short printable summary.
struct CriterionLine {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct AcceptanceOutcome {
  std::vector<CriterionLine> lines;
  bool all_pass = false;
};

// Full acceptance suite at the configured scales.  Writes every CSV under
// cfg.out, prints one line per criterion to log as it completes, and ends
// with a manifest carrying all verdicts.
AcceptanceOutcome run_acceptance(const RunConfig& cfg, std::FILE* log);

} // namespace mixlab::runner
