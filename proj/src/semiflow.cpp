#include "mixlab/semiflow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace mixlab::semiflow {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kBatches = 32;
constexpr int kFiberFold = 64;
// Base separation beyond which the local product chart is not attempted.
constexpr double kMaxBaseSep = 0.4;

} // namespace

// ------------------------------------------------------------ construction

const ModelSystem& SuspensionSystem::model() const {
  require(!induced_, "suspension: no model behind an induced suspension");
  return model_;
}

int SuspensionSystem::arity() const {
  return induced_ ? arity_induced_ : model_.branches.count();
}

SuspensionSystem SuspensionSystem::over_model(const ModelSystem& m, int density_grid) {
  SuspensionSystem s;
  s.induced_ = false;
  s.model_ = m;
  s.dim_ = m.dim;
  s.roof_min_ = m.roof_min();
  s.roof_max_ = m.roof_max();
  require(s.roof_min_ > 0.0, "suspension: roof must be strictly positive");

  const int grid = density_grid > 0 ? density_grid : (m.dim == 1 ? 1 << 12 : 1 << 8);
  transfer::EigenData eig = transfer::leading_eigendata(m, 0.0, grid);
  require(eig.residual < 1e-5, "suspension: invariant density did not converge");
  s.f0_ = eig.f;
  s.f0_sup_ = s.f0_.sup_abs();

  GridFunction rg = GridFunction::sample(
      m.dim, grid, [&](const Pt& y) { return cplx{m.roof.eval(y, m.dim), 0.0}; });
  s.rbar_ = rg.integral_weighted(s.f0_).real() / s.f0_.integral().real();

  double lip = 0.0;
  const int lg = m.dim == 1 ? 1 << 12 : 1 << 7;
  GridFunction probe(m.dim, lg);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Pt y = probe.point(i);
    double g = 0.0;
    for (int a = 0; a < m.dim; ++a) g += std::abs(m.roof.partial(y, m.dim, a));
    lip = std::max(lip, g);
  }
  s.roof_lip_ = lip * 1.02 + 1e-12;
  return s;
}

SuspensionSystem SuspensionSystem::over_model_with_roof(ModelSystem m,
                                                        const models::RoofFunction& roof,
                                                        int density_grid) {
  m.roof = roof;
  return over_model(m, density_grid);
}

SuspensionSystem SuspensionSystem::over_inducing(const inducing::InducingResult& res) {
  inducing::MarkovReport mk = inducing::markov_check(res);
  require(mk.all_pass, "induced suspension: Markov checks failed");
  inducing::TailFit tf = inducing::tail_fit(res);
  require(tf.exponential && tf.gamma_hat < 1.0,
          "induced suspension: cannot certify an exponential roof tail");

  const inducing::PartitionState& st = res.state;
  SuspensionSystem s;
  s.induced_ = true;
  s.dim_ = st.dim();
  s.nc_ = st.nc();
  s.h_ = st.cell_size();
  for (int a = 0; a < s.dim_; ++a) s.ylo_[a] = st.y_lo(a);
  s.ret_ = st.ret;
  s.comp_ = st.comp;
  s.arity_induced_ = st.ambient().arity;
  s.tail_gamma_ = tf.gamma_hat;

  s.sheets_.resize(st.components.size());
  for (const inducing::ComponentInfo& info : st.components) {
    SheetMap& sm = s.sheets_[info.id];
    sm.lam_n = std::pow(static_cast<double>(st.ambient().arity), info.birth_n);
    sm.birth = info.birth_n;
    for (int a = 0; a < s.dim_; ++a) sm.off[a] = static_cast<double>(info.sheet[a]);
  }

  double wsum = 0.0;
  std::int64_t nfin = 0;
  std::int32_t rmin = 0, rmax = 0;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(s.ret_.size()); ++i) {
    if (s.ret_[i] <= 0) continue;
    wsum += s.ret_[i];
    ++nfin;
    rmin = rmin == 0 ? s.ret_[i] : std::min(rmin, s.ret_[i]);
    rmax = std::max(rmax, s.ret_[i]);
    s.fin_cells_.push_back(i);
    s.fin_cumw_.push_back(wsum);
  }
  require(nfin > 0, "induced suspension: no finished cells");
  s.roof_min_ = rmin;
  s.roof_max_ = rmax;
  s.roof_lip_ = 0.0;
  s.rbar_ = wsum / static_cast<double>(nfin);
  return s;
}

SuspensionSystem suspend(const ModelSystem& m) {
  models::GibbsMarkovReport rep = models::verify_gibbs_markov(m, 0.05, 6, 17);
  require(rep.pass, "suspend: model failed the Gibbs-Markov checks");
  return SuspensionSystem::over_model(m);
}

SuspensionSystem suspend(const inducing::InducingResult& res) {
  return SuspensionSystem::over_inducing(res);
}

// ------------------------------------------------------------------ queries

std::int64_t SuspensionSystem::cell_of(const Pt& y) const {
  std::int64_t idx = 0;
  for (int a = dim_ - 1; a >= 0; --a) {
    std::int64_t ia = static_cast<std::int64_t>(std::floor((y[a] - ylo_[a]) / h_));
    ia = std::clamp<std::int64_t>(ia, 0, nc_ - 1);
    idx = idx * nc_ + ia;
  }
  return idx;
}

double SuspensionSystem::roof(const Pt& y) const {
  if (!induced_) return model_.roof.eval(y, dim_);
  const std::int32_t r = ret_[cell_of(y)];
  require(r > 0, "induced suspension: point is not in a finished cell");
  return static_cast<double>(r);
}

double SuspensionSystem::admissible_eps() const {
  if (!induced_) return HUGE_VAL;
  return -std::log(tail_gamma_);
}

Pt SuspensionSystem::base_forward(const Pt& y) const {
  if (!induced_) return model_.branches.forward(y);
  const std::int32_t c = comp_[cell_of(y)];
  require(c >= 0, "induced suspension: point is not in a finished cell");
  const SheetMap& sm = sheets_[c];
  Pt img;
  for (int a = 0; a < dim_; ++a) img[a] = sm.lam_n * y[a] - sm.off[a];
  return img;
}

Pt SuspensionSystem::inverse_branch(int id, const Pt& y) const {
  require(!induced_, "inverse_branch: induced suspensions have no branch chart");
  return model_.branches.eval(id, y).point;
}

std::array<double, 2> SuspensionSystem::fiber_step(const Pt& y,
                                                   const std::array<double, 2>& z) const {
  require(has_fiber(), "fiber_step: suspension has no skew factor");
  return model_.skew->eval(y, z);
}

double SuspensionSystem::invariant_density(const Pt& y) const {
  if (induced_ || f0_.size() == 0) return 1.0;
  return f0_.interp(y).real();
}

std::array<double, 2> SuspensionSystem::leaf_fiber(const Pt& y,
                                                   std::span<const int> past) const {
  require(has_fiber(), "leaf_fiber: suspension has no skew factor");
  std::vector<Pt> back(past.size());
  Pt cur = y;
  for (std::size_t j = 0; j < past.size(); ++j) {
    cur = inverse_branch(past[j], cur);
    back[j] = cur;
  }
  std::array<double, 2> z{0.0, 0.0};
  for (std::size_t j = past.size(); j-- > 0;) z = model_.skew->eval(back[j], z);
  return z;
}

// --------------------------------------------------------------------- flow

SuspPoint flow_step(const SuspensionSystem& s, SuspPoint p, double t) {
  require(t >= 0.0, "flow_step: negative time");
  double ry = s.roof(p.y);
  const long cap = static_cast<long>(t / s.roof_inf()) + 4;
  long crossings = 0;
  while (p.u + t >= ry) {
    t -= ry - p.u;
    p.u = 0.0;
    if (s.has_fiber()) p.z = s.fiber_step(p.y, p.z);
    p.y = s.base_forward(p.y);
    ry = s.roof(p.y);
    require(++crossings <= cap, "flow_step: crossing count exceeded the roof bound");
  }
  p.u += t;
  if (p.u < 0.0) p.u = 0.0;
  return p;
}

// ----------------------------------------------------------------- sampling

SuspPoint SuspensionSystem::draw(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  SuspPoint p;
  if (induced_) {
    const double target = U(rng) * fin_cumw_.back();
    const auto it = std::lower_bound(fin_cumw_.begin(), fin_cumw_.end(), target);
    const std::size_t k = static_cast<std::size_t>(it - fin_cumw_.begin());
    const std::int64_t cell = fin_cells_[std::min(k, fin_cells_.size() - 1)];
    std::int64_t rem = cell;
    for (int a = 0; a < dim_; ++a) {
      const std::int64_t ia = rem % nc_;
      rem /= nc_;
      p.y[a] = ylo_[a] + (ia + U(rng)) * h_;
    }
    p.u = U(rng) * ret_[cell];
    return p;
  }
  require(std::isfinite(roof_max_), "sample: unbounded roof is not samplable");
  for (int attempt = 0; attempt < 20000; ++attempt) {
    Pt y;
    for (int a = 0; a < dim_; ++a) y[a] = U(rng);
    if (U(rng) * f0_sup_ > invariant_density(y)) continue;
    const double ry = model_.roof.eval(y, dim_);
    if (U(rng) * roof_max_ > ry) continue;
    p.y = y;
    if (has_fiber()) {
      const int nb = model_.branches.count();
      std::vector<int> past(kFiberFold);
      for (int& b : past) b = static_cast<int>(U(rng) * nb) % nb;
      p.z = leaf_fiber(y, past);
    }
    p.u = U(rng) * ry;
    return p;
  }
  throw check_error("sample: rejection efficiency below 1%");
}

std::vector<SuspPoint> sample_invariant(const SuspensionSystem& s, std::int64_t n,
                                        std::uint64_t seed, Exec exec) {
  require(n >= 0, "sample_invariant: negative count");
  std::vector<SuspPoint> out(static_cast<std::size_t>(n));
  const bool par = exec == Exec::Parallel;
  std::exception_ptr err;
#pragma omp parallel for if (par) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      std::mt19937_64 rng = rng_stream(seed, static_cast<std::uint64_t>(i));
      out[static_cast<std::size_t>(i)] = s.draw(rng);
    } catch (...) {
#pragma omp critical(mixlab_sample_err)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

// -------------------------------------------------------------- observables

Observable make_observable(const std::string& name, double p1, double p2) {
  Observable o;
  o.name = name;
  if (name == "constant") {
    o.eval = [](const SuspensionSystem&, const SuspPoint&) { return 1.0; };
    return o;
  }
  if (name == "base-wave") {
    const double f = std::max(1.0, std::round(p1));
    const int axis = static_cast<int>(std::llround(p2));
    o.eval = [f, axis](const SuspensionSystem& s, const SuspPoint& p) {
      const int a = std::clamp(axis, 0, s.base_dim() - 1);
      double x = p.u / s.roof(p.y);
      x = std::clamp(x, 0.0, 1.0);
      const double w = 16.0 * x * x * (1.0 - x) * (1.0 - x);
      return std::cos(kTwoPi * f * p.y[a]) * w;
    };
    return o;
  }
  if (name == "height-wave") {
    const double f = std::max(1.0, std::round(p1));
    o.eval = [f](const SuspensionSystem& s, const SuspPoint& p) {
      return std::cos(kTwoPi * f * p.u / s.roof(p.y));
    };
    return o;
  }
  if (name == "height-indicator") {
    const double thr = (p1 > 0.0 && p1 < 1.0) ? p1 : 0.5;
    o.eval = [thr](const SuspensionSystem& s, const SuspPoint& p) {
      return p.u < thr * s.roof(p.y) ? 1.0 : 0.0;
    };
    return o;
  }
  if (name == "coordinate") {
    const int axis = static_cast<int>(std::llround(p1));
    o.eval = [axis](const SuspensionSystem& s, const SuspPoint& p) {
      return p.y[std::clamp(axis, 0, s.base_dim() - 1)];
    };
    return o;
  }
  throw check_error("make_observable: unknown name " + name);
}

double observable_norm(const SuspensionSystem& s, const Observable& v, int k,
                       int samples, std::uint64_t seed) {
  require(k >= 0 && k <= 2, "observable_norm: derivative order out of range");
  require(samples > 0, "observable_norm: need samples");
  const double fd = 1e-5;
  // d_t^j v at an interior point, by height differences (the flow is a height
  // translation between crossings).
  auto deriv = [&](const SuspPoint& p, int j) -> double {
    if (j == 0) return v.eval(s, p);
    SuspPoint a = p, b = p;
    a.u += fd;
    b.u -= fd;
    if (j == 1) return (v.eval(s, a) - v.eval(s, b)) / (2.0 * fd);
    return (v.eval(s, a) - 2.0 * v.eval(s, p) + v.eval(s, b)) / (fd * fd);
  };
  double total = 0.0;
  for (int j = 0; j <= k; ++j) {
    double sup = 0.0, semi = 0.0;
    std::mt19937_64 rng = rng_stream(seed, 97 + static_cast<std::uint64_t>(j));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < samples; ++i) {
      SuspPoint p = s.draw(rng);
      const double ry = s.roof(p.y);
      p.u = std::clamp(p.u, 2.0 * fd, ry - 2.0 * fd);
      const double vp = deriv(p, j);
      sup = std::max(sup, std::abs(vp));
      // height pair
      const double du = std::min(0.25 * ry, std::pow(2.0, -3.0 - 8.0 * U(rng)));
      if (p.u + du < ry - 2.0 * fd) {
        SuspPoint q = p;
        q.u += du;
        semi = std::max(semi, std::abs(deriv(q, j) - vp) / std::pow(du, v.alpha));
      }
      // base pair at matched height fraction
      const int a = static_cast<int>(U(rng) * s.base_dim()) % s.base_dim();
      const double dy = std::pow(2.0, -3.0 - 8.0 * U(rng));
      SuspPoint q = p;
      q.y[a] += dy;
      if (q.y[a] < 1.0) {
        const double rq = s.induced() ? ry : s.roof(q.y);
        if (!s.induced()) q.u = std::clamp(p.u / ry * rq, 2.0 * fd, rq - 2.0 * fd);
        const double d = dy + std::abs(q.u - p.u);
        semi = std::max(semi, std::abs(deriv(q, j) - vp) / std::pow(d, v.alpha));
      }
    }
    total += sup + semi;
  }
  return total;
}

// -------------------------------------------------------------- correlation

CorrelationSeries correlation_series(const SuspensionSystem& s, const Observable& v,
                                     const Observable& w, const std::vector<double>& t_grid,
                                     std::int64_t n_samples, std::uint64_t seed,
                                     Exec exec) {
  require(!t_grid.empty(), "correlation_series: empty time grid");
  require(t_grid.front() >= 0.0, "correlation_series: negative time");
  require(std::is_sorted(t_grid.begin(), t_grid.end()),
          "correlation_series: time grid must be sorted");
  require(n_samples >= kBatches, "correlation_series: need at least one sample per batch");

  const std::size_t nt = t_grid.size();
  std::vector<double> bsum_v(kBatches, 0.0), bsum_w(kBatches, 0.0);
  std::vector<std::int64_t> bcount(kBatches, 0);
  std::vector<std::vector<double>> bsum_vw(kBatches, std::vector<double>(nt, 0.0));

  const bool par = exec == Exec::Parallel;
  std::exception_ptr err;
#pragma omp parallel for if (par) schedule(dynamic)
  for (int b = 0; b < kBatches; ++b) {
    try {
      const std::int64_t lo = n_samples * b / kBatches;
      const std::int64_t hi = n_samples * (b + 1) / kBatches;
      bcount[b] = hi - lo;
      for (std::int64_t i = lo; i < hi; ++i) {
        std::mt19937_64 rng = rng_stream(seed, static_cast<std::uint64_t>(i));
        const SuspPoint p0 = s.draw(rng);
        const double vi = v.eval(s, p0);
        bsum_v[b] += vi;
        bsum_w[b] += w.eval(s, p0);
        SuspPoint q = p0;
        double t_prev = 0.0;
        for (std::size_t kti = 0; kti < nt; ++kti) {
          q = flow_step(s, q, t_grid[kti] - t_prev);
          t_prev = t_grid[kti];
          bsum_vw[b][kti] += vi * w.eval(s, q);
        }
      }
    } catch (...) {
#pragma omp critical(mixlab_sample_err)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  CorrelationSeries out;
  out.t = t_grid;
  out.samples = n_samples;
  double sv = 0.0, sw = 0.0;
  for (int b = 0; b < kBatches; ++b) {
    sv += bsum_v[b];
    sw += bsum_w[b];
  }
  out.mean_v = sv / static_cast<double>(n_samples);
  out.mean_w = sw / static_cast<double>(n_samples);
  out.rho.resize(nt);
  out.se.resize(nt);
  for (std::size_t kti = 0; kti < nt; ++kti) {
    double svw = 0.0;
    for (int b = 0; b < kBatches; ++b) svw += bsum_vw[b][kti];
    out.rho[kti] = svw / static_cast<double>(n_samples) - out.mean_v * out.mean_w;
    double cm = 0.0;
    std::array<double, kBatches> cb{};
    for (int b = 0; b < kBatches; ++b) {
      cb[b] = bsum_vw[b][kti] / static_cast<double>(bcount[b]) - out.mean_v * out.mean_w;
      cm += cb[b];
    }
    cm /= kBatches;
    double var = 0.0;
    for (int b = 0; b < kBatches; ++b) var += (cb[b] - cm) * (cb[b] - cm);
    out.se[kti] = std::sqrt(var / (kBatches - 1)) / std::sqrt(static_cast<double>(kBatches));
  }
  return out;
}

DecayFit decay_fit(const CorrelationSeries& series) {
  DecayFit fit;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    if (std::abs(series.rho[i]) > 3.0 * series.se[i] && series.rho[i] != 0.0) {
      xs.push_back(series.t[i]);
      ys.push_back(std::log(std::abs(series.rho[i])));
    }
  }
  fit.points = static_cast<int>(xs.size());
  if (fit.points < 10) {
    fit.verdict = "indeterminate";
    return fit;
  }
  const LineFit lf = fit_line(xs, ys);
  fit.c = -lf.slope;
  fit.C = std::exp(lf.intercept);
  fit.r2 = lf.r2;
  fit.verdict = (fit.c > 1e-12 && fit.r2 >= 0.9) ? "exponential" : "no-decay-detected";
  return fit;
}

// --------------------------------------------------------------- distortion

LeafPoint make_leaf_point(const SuspensionSystem& s, const Pt& y, std::vector<int> past) {
  require(s.has_fiber(), "leaf point: suspension has no skew factor");
  LeafPoint x;
  x.y = y;
  x.past = std::move(past);
  x.z = s.leaf_fiber(y, x.past);
  return x;
}

LeafPoint sample_leaf_point(const SuspensionSystem& s, std::uint64_t seed, int past_len) {
  require(s.has_fiber(), "leaf point: suspension has no skew factor");
  require(past_len > 0, "leaf point: empty past itinerary");
  std::mt19937_64 rng = rng_stream(seed, 11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int nb = s.model().branches.count();
  Pt y;
  for (int a = 0; a < s.base_dim(); ++a) y[a] = U(rng);
  std::vector<int> past(static_cast<std::size_t>(past_len));
  for (int& b : past) b = static_cast<int>(U(rng) * nb) % nb;
  return make_leaf_point(s, y, std::move(past));
}

LeafPoint local_product(const SuspensionSystem& s, const LeafPoint& x1,
                        const LeafPoint& x2) {
  require(s.has_fiber(), "local product: suspension has no skew factor");
  const double sep = dist_inf(x1.y, x2.y, s.base_dim());
  require(sep <= kMaxBaseSep, "local product undefined: base points too far apart");
  return make_leaf_point(s, x2.y, x1.past);
}

namespace {

// sum_{j=1..J} { r(h_{w_j} ... a) - r(h_{w_j} ... b) } along a shared branch
// chain; both backward orbits contract together, so the series is geometric.
double chain_sum(const SuspensionSystem& s, std::span<const int> past, const Pt& ya,
                 const Pt& yb, int J) {
  double acc = 0.0;
  Pt a = ya, b = yb;
  for (int j = 0; j < J; ++j) {
    a = s.inverse_branch(past[j], a);
    b = s.inverse_branch(past[j], b);
    acc += s.roof(a) - s.roof(b);
  }
  return acc;
}

} // namespace

DistortionResult temporal_distortion(const SuspensionSystem& s, const LeafPoint& x1,
                                     const LeafPoint& x2, double tol, int max_depth) {
  require(s.has_fiber(), "temporal distortion: suspension has no skew factor");
  require(tol > 0.0 && max_depth > 0, "temporal distortion: bad truncation request");
  DistortionResult res;
  res.base_sep = dist_inf(x1.y, x2.y, s.base_dim());
  require(res.base_sep <= kMaxBaseSep,
          "local product undefined: base points too far apart");
  if (res.base_sep == 0.0) return res;

  const double lam = s.model().rho0;
  const double lip = s.roof_lip();
  const double lead = 2.0 * lip * res.base_sep / (1.0 - lam);
  int J = 1;
  if (lead > 0.0) {
    while (J < max_depth && lead * std::pow(lam, J + 1) >= tol) ++J;
  }
  J = std::min<int>(J, static_cast<int>(std::min(x1.past.size(), x2.past.size())));
  require(J >= 1, "temporal distortion: itineraries too short");

  const double d1 = chain_sum(s, x1.past, x1.y, x2.y, J);
  const double d2 = chain_sum(s, x2.past, x2.y, x1.y, J);
  res.D = d1 + d2;
  res.depth = J;
  res.err_bound = lead * std::pow(lam, J + 1);
  return res;
}

// --------------------------------------------------------------- cohomology

double CohomologyFit::xi_eval(double y) const {
  double v = 0.0;
  for (std::size_t k = 0; k < xi_cos.size(); ++k) {
    v += xi_cos[k] * std::cos(kTwoPi * (k + 1) * y);
    v += xi_sin[k] * std::sin(kTwoPi * (k + 1) * y);
  }
  return v;
}

CohomologyFit cohomology_probe(const ModelSystem& m, int degree, int grid_n) {
  require(m.dim == 1, "cohomology probe: one-dimensional base only");
  require(m.branches.kind() != models::BranchFamily::Kind::Gauss,
          "cohomology probe: finite branch families only");
  require(degree >= 1 && grid_n >= 64, "cohomology probe: degenerate request");

  const int nb = m.branches.count();
  const int cols = 2 * degree + nb;
  Eigen::MatrixXd A(grid_n, cols);
  Eigen::VectorXd rhs(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double y = (i + 0.5) / grid_n;
    const Pt py = pt1(y);
    const double fy = m.branches.forward(py)[0];
    rhs(i) = m.roof.eval(py, 1);
    for (int k = 1; k <= degree; ++k) {
      A(i, k - 1) = std::cos(kTwoPi * k * fy) - std::cos(kTwoPi * k * y);
      A(i, degree + k - 1) = std::sin(kTwoPi * k * fy) - std::sin(kTwoPi * k * y);
    }
    const int b = m.branches.branch_at(py);
    for (int j = 0; j < nb; ++j) A(i, 2 * degree + j) = j == b ? 1.0 : 0.0;
  }

  Eigen::VectorXd x = A.colPivHouseholderQr().solve(rhs);
  Eigen::VectorXd resid = rhs - A * x;

  CohomologyFit fit;
  fit.degree = degree;
  fit.xi_cos.assign(x.data(), x.data() + degree);
  fit.xi_sin.assign(x.data() + degree, x.data() + 2 * degree);
  fit.zeta.assign(x.data() + 2 * degree, x.data() + cols);
  fit.residual = resid.lpNorm<Eigen::Infinity>();
  fit.l2_residual = std::sqrt(resid.squaredNorm() / grid_n);
  return fit;
}

ConsistencyReport uni_cohomology_consistency(const std::vector<ModelSystem>& ms,
                                             int degree, int pairs, std::uint64_t seed) {
  ConsistencyReport rep;
  rep.degree = degree;
  rep.pairs = pairs;
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    const ModelSystem& m = ms[mi];
    ConsistencyRow row;
    row.id = m.id;
    row.E = transfer::uni_best_pair(m, 1, 1 << 10).E;
    row.residual = cohomology_probe(m, degree).residual;

    ModelSystem md = m;
    if (!md.skew) md.skew = models::SkewFactor{0.25, 0.25, 2};
    SuspensionSystem sus = SuspensionSystem::over_model(md);
    for (int p = 0; p < pairs; ++p) {
      const std::uint64_t base = seed + 1000 * mi;
      LeafPoint x1 = sample_leaf_point(sus, splitmix64(base) + 2 * p, 120);
      LeafPoint x2 = sample_leaf_point(sus, splitmix64(base) + 2 * p + 1, 120);
      for (int a = 0; a < 64 && dist_inf(x1.y, x2.y, 1) > kMaxBaseSep; ++a)
        x2 = sample_leaf_point(sus, splitmix64(base) + 2 * p + 1 + 131 * (a + 1), 120);
      if (dist_inf(x1.y, x2.y, 1) > kMaxBaseSep) continue;
      DistortionResult d = temporal_distortion(sus, x1, x2, 1e-12, 110);
      row.max_abs_D = std::max(row.max_abs_D, std::abs(d.D));
      row.max_err_bound = std::max(row.max_err_bound, d.err_bound);
    }
    row.flagged = (row.E < 1e-6 && row.residual > 1e-3) ||
                  (row.E > 1e-3 && row.residual < 1e-6);
    rep.any_flagged = rep.any_flagged || row.flagged;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

} // namespace mixlab::semiflow
