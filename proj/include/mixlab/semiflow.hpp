// Suspension semiflows over the model maps and over induced return maps:
// exact roof-crossing flow steps, invariant-measure sampling, Monte-Carlo
// correlation series with batch-mean error bars, decay-rate fits, the
// temporal distortion function computed through local products on unstable
// leaves, and the coboundary probe that ties distortion to the UNI bound.
#pragma once

#include <functional>

#include "mixlab/inducing.hpp"
#include "mixlab/transfer.hpp"

namespace mixlab::semiflow {

using models::ModelSystem;

// Point of the suspension space: base point y, fiber coordinate z (skew
// models only), height u in [0, r(y)).
struct SuspPoint {
  Pt y;
  std::array<double, 2> z{0.0, 0.0};
  double u = 0.0;
};

class SuspensionSystem {
 public:
  // Suspension over a model map; the invariant base density comes from the
  // leading eigendata at sigma = 0.  density_grid 0 picks a default by dim.
  static SuspensionSystem over_model(const ModelSystem& m, int density_grid = 0);
  static SuspensionSystem over_model_with_roof(ModelSystem m,
                                               const models::RoofFunction& roof,
                                               int density_grid = 0);
  // Suspension over the induced return maps of a finished construction; the
  // roof is the integer return time.  Requires the Markov checks to pass and
  // the fitted tail rate to certify an exponential roof tail.
  static SuspensionSystem over_inducing(const inducing::InducingResult& res);

  bool induced() const { return induced_; }
  const ModelSystem& model() const;
  int base_dim() const { return dim_; }
  bool has_fiber() const { return !induced_ && model_.skew.has_value(); }
  int arity() const;

  double roof(const Pt& y) const;
  double roof_inf() const { return roof_min_; }
  double roof_sup() const { return roof_max_; }
  // Lipschitz bound of the roof in the max metric (grid estimate).
  double roof_lip() const { return roof_lip_; }
  double mean_roof() const { return rbar_; }

  // Fitted tail rate gamma of Leb(R > n) for induced suspensions (0 for
  // model roofs) and the certified abscissa: int e^{eps R} dLeb is finite
  // for eps < -log gamma.  Bounded roofs admit every eps.
  double tail_gamma() const { return tail_gamma_; }
  double admissible_eps() const;

  Pt base_forward(const Pt& y) const;
  Pt inverse_branch(int id, const Pt& y) const;
  std::array<double, 2> fiber_step(const Pt& y, const std::array<double, 2>& z) const;

  double invariant_density(const Pt& y) const;
  double density_sup() const { return f0_sup_; }

  // Fiber coordinate of the unstable leaf defined by the past branch
  // itinerary, evaluated at base point y (folded to machine precision).
  std::array<double, 2> leaf_fiber(const Pt& y, std::span<const int> past) const;

  // One mu^r-distributed point from the given stream (rejection sampling).
  SuspPoint draw(std::mt19937_64& rng) const;

 private:
  bool induced_ = false;
  int dim_ = 1;
  ModelSystem model_;
  GridFunction f0_;
  double f0_sup_ = 1.0;
  double roof_min_ = 0.0, roof_max_ = 0.0, roof_lip_ = 0.0;
  double rbar_ = 0.0, tail_gamma_ = 0.0;

  // induced-suspension data
  double ylo_[2] = {0.0, 0.0};
  double h_ = 0.0;
  int nc_ = 0;
  int arity_induced_ = 2;
  std::vector<std::int32_t> ret_, comp_;
  struct SheetMap {
    double off[2] = {0.0, 0.0};
    double lam_n = 1.0;
    int birth = 0;
  };
  std::vector<SheetMap> sheets_;
  std::vector<std::int64_t> fin_cells_;
  std::vector<double> fin_cumw_;

  std::int64_t cell_of(const Pt& y) const;
};

// Gate-checked constructors: the model must pass the Gibbs-Markov checks,
// the inducing result its Markov checks, before the suspension is built.
SuspensionSystem suspend(const ModelSystem& m);
SuspensionSystem suspend(const inducing::InducingResult& res);

// Exact roof-crossing flow: base steps are applications of the base map, the
// height is advanced by plain arithmetic, no time discretization.
SuspPoint flow_step(const SuspensionSystem& s, SuspPoint p, double t);

// n points distributed as (mu x Lebesgue)/rbar: base from the invariant
// density, height uniform on [0, r(y)], roof weight by rejection.  One RNG
// stream per point, so the sample is independent of thread count.
std::vector<SuspPoint> sample_invariant(const SuspensionSystem& s, std::int64_t n,
                                        std::uint64_t seed, Exec exec = Exec::Parallel);

// ---------------------------------------------------------------------------
// Observables on the suspension.

struct Observable {
  std::string name;
  double alpha = 1.0;
  std::function<double(const SuspensionSystem&, const SuspPoint&)> eval;
};

// Catalog: "constant"; "base-wave" (p1 = frequency, p2 = axis) a height-
// windowed trigonometric bump, C^1 across the roof identification;
// "height-wave" (p1 = frequency) cos(2 pi p1 u / r(y)); "height-indicator"
// (p1 = threshold in (0,1)); "coordinate" (p1 = axis).
Observable make_observable(const std::string& name, double p1 = 1.0, double p2 = 0.0);

// Grid estimate of ||v||_{alpha,k} = sum_{j<=k} ||d_t^j v||_alpha via random
// close pairs and height-difference quotients.
double observable_norm(const SuspensionSystem& s, const Observable& v, int k,
                       int samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Correlation series and decay fits.

struct CorrelationSeries {
  std::vector<double> t;
  std::vector<double> rho;
  std::vector<double> se;  // batch-mean standard errors
  std::int64_t samples = 0;
  double mean_v = 0.0, mean_w = 0.0;
};

// rho(t) = mean v (w o F_t) - mean v mean w over an invariant sample; the
// flow runs incrementally along the sorted t grid, error bars are standard
// deviations of 32 contiguous batch means.
CorrelationSeries correlation_series(const SuspensionSystem& s, const Observable& v,
                                     const Observable& w, const std::vector<double>& t_grid,
                                     std::int64_t n_samples, std::uint64_t seed,
                                     Exec exec = Exec::Parallel);

struct DecayFit {
  double c = 0.0;      // fitted rate, log|rho| ~ log C - c t
  double C = 0.0;
  double r2 = 0.0;
  int points = 0;      // t values above the 3-sigma noise floor
  std::string verdict = "indeterminate";
};

// Least squares on log|rho| over the points above 3 standard errors;
// "exponential" needs c > 0 and R^2 >= 0.9, fewer than 10 usable points is
// "indeterminate", anything else "no-decay-detected".
DecayFit decay_fit(const CorrelationSeries& series);

// ---------------------------------------------------------------------------
// Temporal distortion through local products.

// Point of X = Y x Z together with the past branch itinerary defining its
// unstable leaf; past[j-1] selects the j-th preimage.  The fiber coordinate
// is the fold of the skew maps along the itinerary.
struct LeafPoint {
  Pt y;
  std::array<double, 2> z{0.0, 0.0};
  std::vector<int> past;
};

LeafPoint make_leaf_point(const SuspensionSystem& s, const Pt& y, std::vector<int> past);
LeafPoint sample_leaf_point(const SuspensionSystem& s, std::uint64_t seed,
                            int past_len = 96);

// [x1, x2]: the intersection of the unstable leaf of x1 with the stable leaf
// {y_2} x Z.  Throws when the base points are too far apart for the local
// product chart.
LeafPoint local_product(const SuspensionSystem& s, const LeafPoint& x1,
                        const LeafPoint& x2);

struct DistortionResult {
  double D = 0.0;
  int depth = 0;          // truncation depth of both backward series
  double err_bound = 0.0; // geometric tail bound from branch contraction
  double base_sep = 0.0;
};

// D(x1,x2) = D0(x1,[x1,x2]) + D0(x2,[x2,x1]) with each D0 the backward
// series sum_j {r(z_j) - r(z_j')} along the leaf itinerary of its first
// argument; truncated once the geometric tail falls below tol.
DistortionResult temporal_distortion(const SuspensionSystem& s, const LeafPoint& x1,
                                     const LeafPoint& x2, double tol = 1e-12,
                                     int max_depth = 200);

// ---------------------------------------------------------------------------
// Coboundary probe: least-squares fit of r = xi o F - xi + zeta with xi a
// trigonometric polynomial and zeta constant per branch.

struct CohomologyFit {
  int degree = 0;
  std::vector<double> xi_cos, xi_sin;  // coefficients for k = 1..degree
  std::vector<double> zeta;            // per branch
  double residual = 0.0;               // sup over the grid of the defect
  double l2_residual = 0.0;

  double xi_eval(double y) const;
};

CohomologyFit cohomology_probe(const ModelSystem& m, int degree, int grid_n = 1 << 12);

struct ConsistencyRow {
  std::string id;
  double E = 0.0;         // UNI lower bound at word length 1
  double residual = 0.0;  // coboundary sup defect at the configured degree
  double max_abs_D = 0.0; // over the sampled pairs
  double max_err_bound = 0.0;
  bool flagged = false;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  int degree = 0;
  int pairs = 0;
  bool any_flagged = false;
};

// Cross-table of the UNI bound, the coboundary residual, and the sampled
// distortion; flags a model whose UNI bound vanishes while the coboundary
// fit fails, or vice versa.
ConsistencyReport uni_cohomology_consistency(const std::vector<ModelSystem>& ms,
                                             int degree = 32, int pairs = 20,
                                             std::uint64_t seed = 1);

} // namespace mixlab::semiflow
