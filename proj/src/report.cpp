#include "mixlab/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>

namespace mixlab::report {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_rows(const std::filesystem::path& file, const std::string& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), "report: cannot open " + file.string());
  out << header << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  require(static_cast<bool>(out), "report: write failed for " + file.string());
}

void tails_csv(const std::filesystem::path& dir, const std::vector<inducing::TailRow>& tails) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : tails)
    rows.push_back({std::to_string(r.n), fmt(r.leb_R_gt), fmt(r.leb_A), fmt(r.leb_B)});
  write_rows(dir / "tails.csv", "n,leb_R_gt_n,leb_A_n,leb_B_n", rows);
}

void ratios_csv(const std::filesystem::path& dir, const inducing::RatioReport& rep) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : rep.rows) {
    const bool ok = r.b_ok && r.c_ok && r.facts2_ok;
    rows.push_back({std::to_string(r.n), r.a_na ? "nan" : fmt(r.ratio_a), fmt(r.ratio_b),
                    fmt(r.ratio_c), ok ? "1" : "0"});
  }
  write_rows(dir / "ratios.csv", "n,ratio_a,ratio_b,ratio_c,bound_ok", rows);
}

void components_csv(const std::filesystem::path& dir, const inducing::PartitionState& st,
                    const inducing::MarkovReport& mk) {
  std::map<int, const inducing::MarkovVerdict*> by_id;
  for (const auto& v : mk.verdicts) by_id[v.comp_id] = &v;
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : st.components) {
    const auto it = by_id.find(c.id);
    const inducing::MarkovVerdict* v = it == by_id.end() ? nullptr : it->second;
    rows.push_back({std::to_string(c.id), std::to_string(c.birth_n),
                    std::to_string(c.cells), v && v->onto ? "1" : "0",
                    v && v->into ? "1" : "0", v && v->injective ? "1" : "0"});
  }
  write_rows(dir / "components.csv", "id,birth_n,cells,onto,into,injective", rows);
}

void spectrum_csv(const std::filesystem::path& dir,
                  const std::vector<transfer::EigenData>& eigs) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : eigs) rows.push_back({fmt(e.sigma), fmt(e.lambda), fmt(e.residual)});
  write_rows(dir / "spectrum.csv", "sigma,lambda_sigma,residual", rows);
}

void contraction_csv(const std::filesystem::path& dir,
                     const std::vector<transfer::NormProbe>& probes) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : probes)
    for (std::size_t i = 0; i < p.ns.size(); ++i)
      rows.push_back({fmt(p.b), std::to_string(p.ns[i]), fmt(p.estimates[i])});
  write_rows(dir / "contraction.csv", "b,n,norm_estimate", rows);
}

void cone_csv(const std::filesystem::path& dir, const transfer::ConeIteration& it) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& b : it.blocks)
    rows.push_back({std::to_string(b.m), fmt(b.l2_u), fmt(b.l2_v), b.cone_ok ? "1" : "0"});
  write_rows(dir / "cone.csv", "m,l2_u,l2_v,cone_ok", rows);
}

void correlation_csv(const std::filesystem::path& dir,
                     const semiflow::CorrelationSeries& cs) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < cs.t.size(); ++i)
    rows.push_back({fmt(cs.t[i]), fmt(cs.rho[i]), fmt(cs.se[i])});
  write_rows(dir / "correlation.csv", "t,rho,stderr", rows);
}

void distortion_csv(const std::filesystem::path& dir,
                    const std::vector<semiflow::DistortionResult>& drs) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < drs.size(); ++i)
    rows.push_back({std::to_string(i), fmt(drs[i].D), std::to_string(drs[i].depth),
                    fmt(drs[i].err_bound)});
  write_rows(dir / "distortion.csv", "pair_id,D,depth,err_bound", rows);
}

void cohomology_csv(const std::filesystem::path& dir,
                    const semiflow::ConsistencyReport& rep) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : rep.rows)
    rows.push_back({r.id, std::to_string(rep.degree), fmt(r.residual), fmt(r.E)});
  write_rows(dir / "cohomology.csv", "model,basis_degree,residual,E", rows);
}

void write_manifest(const std::filesystem::path& dir, const std::string& serialized) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), "report: cannot open manifest in " + dir.string());
  out << serialized << '\n';
}

} // namespace mixlab::report
