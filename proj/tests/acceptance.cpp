// Full-scale acceptance suite: every release criterion at its stated
// tolerance, one pass/fail line each.  Runs the same code path as the `all`
// subcommand; the CSV outputs land in acceptance-out/ for inspection.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "doctest.h"
#include "mixlab/runner.hpp"

TEST_CASE("acceptance criteria") {
  mixlab::runner::RunConfig cfg;
  cfg.subcommand = "all";
  cfg.out = (std::filesystem::current_path() / "acceptance-out").string();
  mixlab::runner::AcceptanceOutcome outcome =
      mixlab::runner::run_acceptance(cfg, stdout);
  REQUIRE(outcome.lines.size() == 12);
  for (const auto& line : outcome.lines) {
    INFO("criterion ", line.id, " ", line.name, ": ", line.detail);
    CHECK(line.pass);
  }
  CHECK(outcome.all_pass);
}
