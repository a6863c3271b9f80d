// Serial vs OpenMP timings for the parallel kernels.  Each kernel keeps a
// serial reference path; the outputs must agree bitwise, so the benchmark
// doubles as a cross-check.  --quick shrinks every workload for smoke runs.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mixlab/inducing.hpp"
#include "mixlab/models.hpp"
#include "mixlab/semiflow.hpp"
#include "mixlab/transfer.hpp"

using namespace mixlab;
using models::get_model;

namespace {

double wall(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial, double parallel, bool match) {
  std::printf("%-24s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", name,
              serial, parallel, parallel > 0.0 ? serial / parallel : 0.0,
              match ? "outputs match" : "OUTPUTS DIFFER");
}

bool same(const GridFunction& a, const GridFunction& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (no OpenMP)\n");
#endif
  int failures = 0;

  {
    models::ModelSystem e = get_model("planar-triple");
    auto amb = inducing::make_ambient(e);
    auto cs = inducing::derive_constants(amb);
    const int res = quick ? 7 : 10;
    const int nmax = quick ? 6 : 12;
    inducing::InducingResult rs = inducing::build_inducing(amb, cs, nmax, res, Exec::Serial);
    double ts = wall([&] { rs = inducing::build_inducing(amb, cs, nmax, res, Exec::Serial); });
    inducing::InducingResult rp = inducing::build_inducing(amb, cs, nmax, res, Exec::Parallel);
    double tp = wall([&] { rp = inducing::build_inducing(amb, cs, nmax, res, Exec::Parallel); });
    bool match = rs.tails.size() == rp.tails.size();
    for (std::size_t i = 0; match && i < rs.tails.size(); ++i)
      match = rs.tails[i].leb_R_gt == rp.tails[i].leb_R_gt &&
              rs.tails[i].finished_cells == rp.tails[i].finished_cells;
    report("inducing build", ts, tp, match);
    failures += !match;

    auto ms = inducing::markov_check(rs, 0.99, Exec::Serial);
    auto mp = inducing::markov_check(rp, 0.99, Exec::Parallel);
    double tms = wall([&] { ms = inducing::markov_check(rs, 0.99, Exec::Serial); });
    double tmp = wall([&] { mp = inducing::markov_check(rp, 0.99, Exec::Parallel); });
    bool mmatch = ms.all_pass == mp.all_pass && ms.verdicts.size() == mp.verdicts.size();
    report("markov check", tms, tmp, mmatch);
    failures += !mmatch;
  }

  {
    models::ModelSystem d = get_model("gauss");
    const int grid = quick ? 1 << 10 : 1 << 12;
    auto es = transfer::leading_eigendata(d, 0.0, grid, 1e-13, 400, Exec::Serial);
    auto ep = transfer::leading_eigendata(d, 0.0, grid, 1e-13, 400, Exec::Parallel);
    double ts = wall([&] { es = transfer::leading_eigendata(d, 0.0, grid, 1e-13, 400, Exec::Serial); });
    double tp = wall([&] { ep = transfer::leading_eigendata(d, 0.0, grid, 1e-13, 400, Exec::Parallel); });
    bool match = es.lambda == ep.lambda && same(es.f, ep.f);
    report("gauss eigendata", ts, tp, match);
    failures += !match;
  }

  {
    models::ModelSystem a = get_model("doubling-quadratic");
    const int grid = quick ? 1 << 10 : 1 << 12;
    GridFunction v = transfer::rough_test_function(1, grid, 1.5, 100.0, 11, 3);
    auto rs = transfer::apply_twisted(a, cplx{0.0, 100.0}, v, Exec::Serial);
    auto rp = transfer::apply_twisted(a, cplx{0.0, 100.0}, v, Exec::Parallel);
    const int reps = quick ? 20 : 400;
    double ts = wall([&] {
      for (int i = 0; i < reps; ++i) rs = transfer::apply_twisted(a, cplx{0.0, 100.0}, v, Exec::Serial);
    });
    double tp = wall([&] {
      for (int i = 0; i < reps; ++i) rp = transfer::apply_twisted(a, cplx{0.0, 100.0}, v, Exec::Parallel);
    });
    bool match = same(rs.out, rp.out);
    report("twisted apply", ts, tp, match);
    failures += !match;
  }

  {
    semiflow::SuspensionSystem s =
        semiflow::SuspensionSystem::over_model(get_model("doubling-quadratic"));
    auto v = semiflow::make_observable("base-wave", 3.0);
    std::vector<double> grid;
    const double tmax = quick ? 4.0 : 10.0;
    for (int k = 0; k * 0.5 <= tmax; ++k) grid.push_back(k * 0.5);
    const std::int64_t n = quick ? 20'000 : 200'000;
    auto cs = semiflow::correlation_series(s, v, v, grid, n, 5, Exec::Serial);
    auto cp = semiflow::correlation_series(s, v, v, grid, n, 5, Exec::Parallel);
    double ts = wall([&] { cs = semiflow::correlation_series(s, v, v, grid, n, 5, Exec::Serial); });
    double tp = wall([&] { cp = semiflow::correlation_series(s, v, v, grid, n, 5, Exec::Parallel); });
    bool match = cs.rho == cp.rho && cs.se == cp.se && cs.mean_v == cp.mean_v;
    report("correlation series", ts, tp, match);
    failures += !match;
  }

  if (failures) std::printf("%d kernel(s) disagree between paths\n", failures);
  return failures ? 1 : 0;
}
