// Twisted transfer operators P_s v = sum_h e^{-s r o h} |det Dh| v o h over the
// inverse branches of a model, their normalized form L_s, leading eigendata,
// Lasota-Yorke contraction probes, the UNI lower bound for roof differences,
// and the oscillatory cancellation machinery: ball families, the [3/4,1]
// cutoff chi, cone iteration, and direct norm decay probes.
#pragma once

#include "mixlab/grid.hpp"
#include "mixlab/models.hpp"

namespace mixlab::transfer {

using models::ModelSystem;

struct TwistParameter {
  double sigma = 0.0;
  double b = 0.0;
  double abscissa = 0.05;  // configured bound on |sigma|
  cplx s() const { return cplx{sigma, b}; }
  bool valid() const { return std::abs(sigma) < abscissa; }
};

// ---------------------------------------------------------------------------
// Hurwitz zeta, used to aggregate the infinite branch tail of the continued
// fraction family exactly (for the clamped interpolant).

struct ZetaResult {
  cplx value{0.0, 0.0};
  double err_bound = 0.0;
};

// zeta_H(s, a) = sum_{k>=0} (a+k)^{-s} for Re(s) > 1, a > 0.  Euler-Maclaurin
// with a certified remainder bound.
ZetaResult hurwitz_zeta(cplx s, double a);

// ---------------------------------------------------------------------------
// Core operator applications.

struct ApplyResult {
  GridFunction out;
  // Certified bound on the error of aggregating branches beyond the direct
  // range (countable families only; 0 for finite families).
  double tail_err = 0.0;
};

// (P_s v)(y) = sum over branches h of exp(-s r(h y)) |det Dh(y)| v^(h y),
// v^ the clamped interpolant of v.  The continued fraction family is summed
// directly up to branch 2n and the remainder is aggregated in closed form
// through hurwitz_zeta; beyond 2n every image point lies in the clamp region,
// so the aggregation is exact for the interpolant up to the zeta remainder.
ApplyResult apply_twisted(const ModelSystem& m, cplx s, const GridFunction& v,
                          Exec exec = Exec::Parallel);

struct EigenData {
  double sigma = 0.0;
  double lambda = 0.0;
  GridFunction f;          // positive eigenfunction, integral 1
  double residual = 0.0;   // sup |P_sigma f - lambda f|
  int iterations = 0;
  double tail_err = 0.0;
};

EigenData leading_eigendata(const ModelSystem& m, double sigma, int grid_n,
                            double tol = 1e-13, int max_iter = 400,
                            Exec exec = Exec::Parallel);

// (L_s v) = (lambda_sigma f_sigma)^{-1} P_s(f_sigma v), with sigma from eig
// and s = sigma + ib.  L_sigma 1 = 1 and |L_s v|_inf <= |v|_inf up to the
// eigen-residual.
ApplyResult apply_normalized(const ModelSystem& m, const EigenData& eig, double b,
                             const GridFunction& v, Exec exec = Exec::Parallel);

// n-fold application of L_s.
GridFunction apply_normalized_power(const ModelSystem& m, const EigenData& eig,
                                    double b, const GridFunction& v, int n,
                                    Exec exec = Exec::Parallel);

// ---------------------------------------------------------------------------
// Lasota-Yorke probe: iterate L_s on rough test functions and fit the
// two-term bound  |L_s^n v|_a <= C3(1+|b|^a)|v|_inf + C3 rho^n |v|_a.

struct LasotaYorkeProbe {
  double rho_hat = 0.0;     // fitted seminorm contraction factor per step
  double C3_hat = 0.0;      // smallest C covering the two-term bound
  double rho_target = 0.0;  // rho0^alpha of the model
  std::vector<double> seminorms;  // max over dictionary, per step
  std::vector<double> sups;
  bool pass = false;        // rho_hat <= rho_target + margin
};

LasotaYorkeProbe lasota_yorke_probe(const ModelSystem& m, cplx s, int steps,
                                    int trials, std::uint64_t seed,
                                    int grid_n = 1 << 12, double margin = 0.05);

// ---------------------------------------------------------------------------
// UNI: for two distinct inverse words of length n0,
//   E = inf over the grid of |grad(r_{n0} o h_1 - r_{n0} o h_2) . ell|,
// gradient in closed form; fd_value recomputes the minimizer by central
// differences.  half_slack_ok records |Dpsi . ell| >= E/2 everywhere.

struct UniEstimate {
  double E = 0.0;
  double fd_value = 0.0;
  std::vector<int> word1, word2;
  double minimizer[2] = {0.0, 0.0};
  bool half_slack_ok = true;
  int n0 = 1;
};

UniEstimate uni_estimate(const ModelSystem& m, const std::vector<int>& word1,
                         const std::vector<int>& word2, int grid_n = 1 << 12,
                         const Pt& ell = pt1(1.0));

// Distinguished word pair for the cancellation construction: the pair of
// length-n0 words maximizing the UNI lower bound.  E = 0 when every pair is
// degenerate (constant roof).
UniEstimate uni_best_pair(const ModelSystem& m, int n0, int grid_n = 1 << 10,
                          const Pt& ell = pt1(1.0));

// ---------------------------------------------------------------------------
// Ball family and cutoff (1D models).

struct Ball {
  double y_prime = 0.0;   // greedy family center
  double y_second = 0.0;  // shifted center from the phase search
  int type = -1;          // 0 -> word1 branch, 1 -> word2 branch, -1 untyped
  double margin = 0.0;    // slack of the winning case inequality on the ball
};

struct BallFamily {
  double b = 0.0;
  double E = 0.0;
  double Delta = 0.0;      // 4 pi / E
  double E_prime = 0.0;    // max(16 pi / E, 2)
  double delta_c = 0.0;    // ball radius scale, 0 < delta_c < Delta
  double spacing = 0.0;    // (delta_c + Delta) / |b|
  double radius = 0.0;     // delta_c / |b|; half-balls have radius/2
  std::vector<Ball> balls; // spacing-disjoint, inside (0,1)
  std::vector<int> word1, word2;  // distinguished pair (set by typing)
  int n0 = 1;
  bool coverage_ok = false;  // |b| >= E_prime
};

// Greedy maximal family of centers whose spacing-neighbourhoods fit in (0,1)
// disjointly; empty when |b| <= 2(delta_c + Delta).  Balls start untyped.
BallFamily ball_family(double b, double delta_c, double E);

// Cancellation step for a cone pair (u, v): for each ball, search the
// integral curve for the anti-alignment point y'' of the two distinguished
// branch phases, then assign the type whose case inequality
//   |A_1 v + A_2 v| <= 3/4 A_type u + A_other u
// holds with the larger margin on the ball's cells.  Balls where neither
// case holds keep type -1 (excluded from the cutoff, counted by the caller).
void assign_cancellation_data(const ModelSystem& m, const EigenData& eig,
                              double b, int n0, BallFamily& fam,
                              const GridFunction& u, const GridFunction& v);

struct ChiCutoff {
  GridFunction chi;       // real-valued, 1 - omega / C_prime, range [3/4, 1]
  double eta = 0.8;       // 1 - 1/C_prime; chi == eta on pulled-back half-balls
  double C_prime = 5.0;   // max(measured |omega|_C1 / |b|, 4) + 1
  double omega_c1 = 0.0;  // measured C1 norm of omega
  BallFamily family;      // typed family actually used
  int skipped = 0;        // balls with no valid case
  bool pointwise_ok = false;   // |L_s^{n0} v| <= L_sigma^{n0}(chi u) on the grid
  double pointwise_slack = 0.0;  // max over grid of |L_s^{n0}v| - L_sigma^{n0}(chi u)
};

// Builds omega from per-ball C1 bumps (1 on the half-ball, 0 outside the
// ball) composed with the forward map on the typed branch range, and checks
// the resulting domination |L_s^{n0} v| <= L_sigma^{n0}(chi u) at every grid
// point.  An untyped family is typed first; an empty family yields chi == 1.
ChiCutoff chi_cutoff(const ModelSystem& m, const EigenData& eig, double b,
                     const BallFamily& fam, const GridFunction& u,
                     const GridFunction& v, int n0);

// Measure lower bound: for random positive w with |log w|_a <= K|b|^a,
//   integral_{Bhat} w dmu >= c1_hat * integral_Y w dmu,
// Bhat the union of pulled-back half-balls of the typed family.
struct MeasureLowerBound {
  double c1_hat = 0.0;
  double bhat_mass = 0.0;  // mu(Bhat)
  int trials = 0;
  bool pass = false;       // c1_hat > 0
};

MeasureLowerBound measure_lower_bound_probe(const ModelSystem& m,
                                            const EigenData& eig,
                                            const BallFamily& fam, int trials,
                                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cone iteration: u_{m+1} = L_sigma^{n0}(chi_m u_m), v_{m+1} = L_s^{n0} v_m,
// tracking integral |v_m|^2 dmu and cone membership per block.

struct ConeBlock {
  int m = 0;
  double l2_u = 0.0;
  double l2_v = 0.0;
  bool cone_ok = false;
  double chi_min = 1.0, chi_max = 1.0;
  double domination_slack = 0.0;  // max(|v| - u) at this block
};

struct ConeIteration {
  std::vector<ConeBlock> blocks;
  double beta_hat = 0.0;   // fitted per-block decay of integral |v_m|^2 dmu
  bool cone_ok = false;
  bool uni_degenerate = false;  // E = 0: no cancellation forced
  bool pass = false;
};

ConeIteration cone_iterate(const ModelSystem& m, const EigenData& eig, double b,
                           int n0, int blocks, const GridFunction& v_init,
                           double C4 = 8.0, double beta_threshold = 0.98);

// ---------------------------------------------------------------------------
// Direct norm decay probe: max over a dictionary of ||P_s^n v||_b / ||v||_b
// for n in [n_lo, n_hi].  A lower bound of the operator norm; verdicts use
// only the decay of the estimate.

struct NormProbe {
  double b = 0.0;
  std::vector<int> ns;
  std::vector<double> estimates;
  bool monotone_ok = false;  // nonincreasing up to 1e-3 dictionary noise
  double first = 0.0, last = 0.0;
};

NormProbe norm_contraction_probe(const ModelSystem& m, cplx s, int n_lo, int n_hi,
                                 int dict_size, std::uint64_t seed,
                                 int grid_n = 1 << 12);

// ---------------------------------------------------------------------------
// Test function dictionaries.

// Rough: trig packets plus cone-shaped kinks, normalized to ||.||_b = 1.
// stream 0 returns the constant function.
GridFunction rough_test_function(int dim, int grid_n, double alpha, double b,
                                 std::uint64_t seed, std::uint64_t stream);

// Smooth: trig polynomial with coefficients decaying like k^-2 (mass
// conservation probes).
GridFunction smooth_test_function(int dim, int grid_n, std::uint64_t seed,
                                  std::uint64_t stream);

} // namespace mixlab::transfer
