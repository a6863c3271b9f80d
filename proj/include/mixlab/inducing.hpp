#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mixlab/grid.hpp"
#include "mixlab/models.hpp"

namespace mixlab::inducing {

using models::ModelSystem;

// Stable holonomy interface. Built-in models live on flat leaves, so the
// projection is the identity, but the distortion constants are routed through
// here so curved ambients can slot in later.
struct Holonomy {
  double C2 = 1.0;
  double C3 = 1.0;
  double alpha = 1.0;
  Pt apply(const Pt& x) const { return x; }
};

// Expanding dynamics on an unstable leaf: n-fold application of a uniformly
// expanding map with full affine branches, backward contraction rate lambda,
// and a base point p at the leaf center.
struct AmbientSystem {
  ModelSystem model;
  int dim = 1;
  int arity = 2;        // expansion factor per axis per step
  double lambda = 0.5;  // 1 / arity
  double alpha = 1.0;
  double C1 = 1.0;      // branch distortion (affine: 1)
  Holonomy pi;
  Pt p{0.5, 0.5};
  double delta0 = 0.4;
};

AmbientSystem make_ambient(const ModelSystem& m, double delta0 = 0.4);

// Derived construction constants. delta and eps are the largest admissible
// values on the dyadic ladder {delta0 2^{-j}}.
struct InducingConstants {
  int d_u = 1;
  double delta0 = 0.4;
  double delta1 = 0.2;  // cs-thickness of the thickened neighborhoods
  double delta = 0.05;
  double eps = 0.025;
  int L = 6;
  int N1 = 0;  // backward orbit of p is delta-dense after N1 steps
  int N2 = 0;  // least n with lambda^{N2} < eps/delta0
  int N = 0;   // N1 + N2
  double C1 = 1.0, C2 = 1.0, C3 = 1.0, C4 = 1.0;
  double alpha = 1.0;
  double lambda = 0.5;
  double D = 2.0;   // sup_k of the collar comparison factor
  double a1 = 0.5;  // 1 / (C1 C2^2 D)
  double a0 = 2.5;  // (2 + a1) / (2 a1)
};

// Failed invariant descriptions; empty means the constants are admissible.
std::vector<std::string> constants_violations(const InducingConstants& c);

InducingConstants derive_constants(const AmbientSystem& amb,
                                   const std::map<std::string, double>& overrides = {});

// Index of the annulus I_k containing y (distance measured from p in the
// max norm); 0 when y lies in no annulus.
int annulus_index(const Pt& y, const InducingConstants& c, const Pt& p);
int annulus_index_from_dist(double dist, const InducingConstants& c);

struct ComponentInfo {
  int id = -1;
  int birth_n = 0;
  std::array<std::int64_t, 2> sheet{0, 0};  // integer branch translate per axis
  std::int64_t cells = 0;                   // finished cells (image in D_1)
};

struct GenerationRecord {
  int n = 0;
  double eps_threshold = 0.0;  // base-space radius eps lambda^n
  // measures before the step
  double leb_A_prev = 0.0, leb_B_prev = 0.0;
  // transition measures across the step
  double leb_AA = 0.0, leb_AB = 0.0, leb_AR = 0.0;
  double leb_BA = 0.0, leb_BB = 0.0, leb_BR = 0.0;
  // measures after the step
  double leb_A = 0.0, leb_B = 0.0, leb_R = 0.0, leb_R_gt = 0.0;
  std::int64_t aeps_cells = 0;
  std::int64_t aeps_t_violations = 0;      // A^(eps) cell with t >= 2
  std::int64_t ulm1_B_violations = 0;      // U^{L-1} cell that was in B
  std::int64_t collar_overlap_violations = 0;  // new collar on an old collar
  std::int64_t sheet_conflicts = 0;  // adjacent eligible cells, different sheet
  int components_accepted = 0;
  int candidates_rejected = 0;
  int t_max = 0;
};

// Cell grid over Y with the inductive partition labels.
class PartitionState {
 public:
  static constexpr std::int8_t kLabelA = 0;
  static constexpr std::int8_t kLabelB = 1;
  static constexpr std::int8_t kLabelFinished = 2;

  PartitionState(const AmbientSystem& amb, const InducingConstants& c, int q);

  const AmbientSystem& ambient() const { return amb_; }
  const InducingConstants& constants() const { return c_; }
  int dim() const { return amb_.dim; }
  int q() const { return q_; }
  int nc() const { return nc_; }  // cells per axis
  std::int64_t cell_count() const { return total_; }
  double cell_size() const { return h_; }
  double cell_volume() const { return vol_; }
  double y_lo(int axis) const { return amb_.p[axis] - c_.delta; }
  int generation() const { return n_; }

  std::int64_t index(int i0, int i1 = 0) const {
    return static_cast<std::int64_t>(i1) * nc_ + i0;
  }
  Pt center(std::int64_t idx) const;

  std::vector<std::int8_t> label;
  std::vector<std::int32_t> t;
  std::vector<std::int32_t> collar;   // component id owning the collar, -1
  std::vector<std::int32_t> ret;      // return time R on finished cells, 0
  std::vector<std::int32_t> comp;     // component id on finished cells, -1
  std::vector<ComponentInfo> components;
  std::vector<GenerationRecord> records;

  std::int64_t count_label(std::int8_t lab) const;

  friend void advance_generation(PartitionState& st, Exec exec);

 private:
  AmbientSystem amb_;
  InducingConstants c_;
  int q_ = 0;
  int nc_ = 0;
  std::int64_t total_ = 0;
  double h_ = 0.0;
  double vol_ = 0.0;
  int n_ = 0;
};

// Exact squared Euclidean distance (in cell units) to the nearest source
// cell, per cell. dims = {nx, ny}; ny = 1 in one dimension. INF-filled rows
// stay above 4 (nx^2 + ny^2).
void distance_transform(const std::vector<std::uint8_t>& source, int nx, int ny,
                        std::vector<std::int64_t>& dist2, Exec exec = Exec::Parallel);

void advance_generation(PartitionState& st, Exec exec = Exec::Parallel);

struct TailRow {
  int n = 0;
  double leb_R_gt = 0.0;
  double leb_A = 0.0, leb_B = 0.0, leb_R = 0.0;
  std::int64_t finished_cells = 0;  // cells with R = n
};

struct InducingResult {
  PartitionState state;
  std::vector<TailRow> tails;  // n = 0 .. n_max
};

InducingResult build_inducing(const AmbientSystem& amb, const InducingConstants& c,
                              int n_max, int q, Exec exec = Exec::Parallel);

struct CollarInfo {
  int comp_id = -1;
  int birth_n = 0;
  std::int64_t cells = 0;
  std::int64_t outer_ring_cells = 0;  // t == 1
};

struct CollarCensus {
  std::vector<CollarInfo> collars;
  std::int64_t b_cells = 0;
  std::int64_t t1_cells = 0;
  bool outer_rings_match = false;
  std::int64_t disjointness_violations = 0;  // accumulated over the run
  bool pass = false;
};

CollarCensus collar_census(const PartitionState& st);

struct RatioRow {
  int n = 0;
  double ratio_a = 0.0;  // Leb(B_{n-1} cap A_n) / Leb(B_{n-1}), vs a1 (lower)
  double ratio_b = 0.0;  // Leb(A_{n-1} cap B_n) / Leb(A_{n-1}), vs 1/4
  double ratio_c = 0.0;  // Leb(A_{n-1} cap {R=n}) / Leb(A_{n-1}), vs 1/4
  bool a_na = false;     // B_{n-1} empty
  bool b_ok = false, c_ok = false;
  bool facts2_ok = false;  // Leb(B_n) <= a0 Leb(A_n)
};

struct RatioReport {
  std::vector<RatioRow> rows;
  double a1 = 0.0, a0 = 0.0;
  double slack = 0.02;
  bool all_ok = false;
};

RatioReport ratio_report(const InducingResult& res, double slack = 0.02);

struct TailFit {
  double gamma_hat = 1.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::vector<double> residuals;
  int n_lo = 0, n_hi = 0;  // fitted rows
  bool exponential = false;
};

// Least-squares fit of log Leb(R>n) over the maximal contiguous run of
// generations whose finished-cell count exceeds min_cells.
TailFit tail_fit(const std::vector<TailRow>& tails, std::int64_t min_cells = 100);
TailFit tail_fit(const InducingResult& res, std::int64_t min_cells = 100);

struct MarkovVerdict {
  int comp_id = -1;
  int birth_n = 0;
  double coverage = 0.0;
  bool onto = false, into = false, injective = false;
};

struct MarkovReport {
  std::vector<MarkovVerdict> verdicts;
  bool all_pass = false;
};

MarkovReport markov_check(const InducingResult& res, double coverage_min = 0.99,
                          Exec exec = Exec::Parallel);

struct KeyfactRow {
  int n = 0;
  double leb_window = 0.0;  // Leb of {n <= R <= n+N}
  double leb_A_prev = 0.0;
  double ratio = 0.0;
};

struct KeyfactReport {
  std::vector<KeyfactRow> rows;
  double c1_hat = 0.0;
  bool pass = false;
};

KeyfactReport keyfact_report(const InducingResult& res);

} // namespace mixlab::inducing
