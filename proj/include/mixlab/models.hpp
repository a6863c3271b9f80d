// Model systems: uniformly expanding Markov maps given by their inverse
// branches, a roof function over the base, and an optional contracting skew
// factor on a fiber.  Branches are closed-form (affine grids, Moebius maps,
// the Gauss family) so words, derivatives, and Birkhoff sums of the roof
// evaluate without orbit searches.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mixlab/common.hpp"
#include "mixlab/toml.hpp"

namespace mixlab::models {

// One application of an inverse branch: image point, (diagonal) derivative,
// and log|det Dh| accumulated over the word.
struct BranchEval {
  Pt point;
  std::array<double, 2> deriv{1.0, 1.0};
  double log_abs_det = 0.0;
};

struct BranchSpec {
  enum class Kind { Affine1D, Mobius1D, Affine2D };
  Kind kind = Kind::Affine1D;
  // Affine1D: h(y) = a + b*y.  Mobius1D: h(y) = (a + b*y)/(c + d*y).
  // Affine2D: h(y) = (a + b*y0, c + d*y1).
  double a = 0, b = 0, c = 0, d = 0;
};

class BranchFamily {
public:
  enum class Kind { AffineGrid, Gauss, Custom };

  static BranchFamily affine_grid(int dim, int k);
  static BranchFamily gauss();
  static BranchFamily custom(int dim, std::vector<BranchSpec> specs);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool countable() const { return kind_ == Kind::Gauss; }
  // For countable families this is the enumeration cap used by sampled
  // checks; operator sums treat the remaining branches analytically.
  int count() const;
  int grid_arity() const { return k_; }

  BranchEval eval(int id, const Pt& y) const;
  BranchEval eval_word(std::span<const int> word, const Pt& y) const;

  // Closed image box of branch id.
  void range(int id, Pt& lo, Pt& hi) const;

  // Forward map F (left inverse of every branch) and the branch whose range
  // contains y.  Points on range boundaries take the lower branch.
  Pt forward(const Pt& y) const;
  int branch_at(const Pt& y) const;

  // sup over the domain of |Dh_id| along each axis (signed magnitude).
  double deriv_sup(int id) const;

private:
  Kind kind_ = Kind::AffineGrid;
  int dim_ = 1;
  int k_ = 2;              // affine grid arity per axis
  int gauss_cap_ = 4096;   // enumeration cap for sampled checks
  std::vector<BranchSpec> specs_;
};

// Roof r(y) = constant + per-axis polynomial + per-axis log term +
// trigonometric terms.  Everything needed in closed form: value, gradient,
// bounds over the domain.
struct TrigTerm {
  int axis = 0;
  int freq = 1;
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
};

struct RoofFunction {
  double constant = 0.0;
  std::array<std::vector<double>, 2> poly{};  // coefficients for y^1, y^2, ...
  std::array<double, 2> log_coeff{0.0, 0.0};  // coeff * log(y_axis)
  std::vector<TrigTerm> trig;

  double eval(const Pt& y, int dim) const;
  double partial(const Pt& y, int dim, int axis) const;
  bool has_log() const { return log_coeff[0] != 0.0 || log_coeff[1] != 0.0; }
};

// Fiber contraction G(y, z) = rate*z + amp*e(y) on Z = [-1,1]^2 with
// e(y) = (cos 2*pi*y0, sin 2*pi*y0).
struct SkewFactor {
  double rate = 0.25;
  double amp = 0.25;
  int fiber_dim = 2;

  std::array<double, 2> eval(const Pt& y, const std::array<double, 2>& z) const;
};

struct ModelSystem {
  std::string id;
  std::string summary;
  int dim = 1;
  double alpha = 1.0;    // Hoelder exponent used by seminorm estimates
  double rho0 = 0.5;     // stored contraction bound sup|Dh|
  double stored_C1 = 1.0;
  BranchFamily branches = BranchFamily::affine_grid(1, 2);
  RoofFunction roof;
  std::optional<SkewFactor> skew;

  double roof_min() const;
  double roof_max() const;
};

std::vector<std::string> list_models();
ModelSystem get_model(const std::string& id);
ModelSystem load_custom_model(const toml::Document& doc);
ModelSystem load_custom_model_file(const std::string& path);

BranchEval branch_eval(const ModelSystem& m, std::span<const int> word, const Pt& y);

// Birkhoff sum r_n(h_w(y)) = sum_{k<n} r(F^k h_w(y)) evaluated branchwise.
double birkhoff_roof(const ModelSystem& m, std::span<const int> word, const Pt& y);

// Gradient of y -> r_n(h_w(y)) (chain rule through the word), used by the
// transversality estimate.
std::array<double, 2> birkhoff_roof_gradient(const ModelSystem& m, std::span<const int> word,
                                             const Pt& y);

struct GibbsMarkovReport {
  double C1_hat = 0.0;        // sampled distortion constant
  double rho0_hat = 0.0;      // sampled contraction rate
  double logdet_alpha_hat = 0.0;
  double tail_series = 0.0;   // sum over branches of e^(eps*|r o h|_inf) * |det Dh|_inf
  double tail_series_bound = 0.0;  // analytic bound on the omitted part
  double partition_gap = 0.0; // largest uncovered gap between branch ranges
  bool partition_ok = false;
  bool expansion_ok = false;
  bool distortion_ok = false;
  bool roof_ok = false;
  bool series_ok = false;
  bool pass = false;
};

GibbsMarkovReport verify_gibbs_markov(const ModelSystem& m, double eps, int max_word_len,
                                      std::uint64_t seed);

struct SkewContractionReport {
  double gamma0_hat = 0.0;
  double C_hat = 0.0;
  bool pass = false;
};

SkewContractionReport verify_skew_contraction(const ModelSystem& m, int samples,
                                              std::uint64_t seed);

} // namespace mixlab::models
