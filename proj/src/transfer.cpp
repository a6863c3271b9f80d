#include "mixlab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mixlab::transfer {

using models::BranchEval;
using models::BranchFamily;
using models::ModelSystem;

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_to_pi(double x) {
  x = std::fmod(x + kPi, 2.0 * kPi);
  if (x < 0.0) x += 2.0 * kPi;
  return x - kPi;
}

bool is_gauss(const ModelSystem& m) {
  return m.branches.kind() == BranchFamily::Kind::Gauss;
}

// Coefficients of (1+x)^{-e} = sum_k a_k x^k, seven terms.
std::array<cplx, 7> binom_coeffs(cplx e) {
  std::array<cplx, 7> a;
  a[0] = cplx{1.0, 0.0};
  cplx num{1.0, 0.0};
  double fact = 1.0;
  for (int k = 1; k < 7; ++k) {
    num *= -(e + cplx{static_cast<double>(k - 1), 0.0});
    fact *= k;
    a[k] = num / fact;
  }
  return a;
}

} // namespace

ZetaResult hurwitz_zeta(cplx s, double a) {
  require(s.real() > 1.0, "hurwitz_zeta needs Re(s) > 1");
  require(a > 0.0, "hurwitz_zeta needs a > 0");
  constexpr int K = 24;
  constexpr int J = 4;
  static const double bern[5] = {1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
                                 5.0 / 66.0};
  cplx sum{0.0, 0.0};
  for (int k = 0; k < K; ++k) sum += std::exp(-s * std::log(a + k));
  double aK = a + K;
  double laK = std::log(aK);
  sum += std::exp((1.0 - s) * laK) / (s - 1.0);
  sum += 0.5 * std::exp(-s * laK);
  cplx rising = s;   // s(s+1)...(s+2j-2), starting at (s)_1
  double fact = 2.0; // (2j)!
  for (int j = 1; j <= J; ++j) {
    sum += bern[j - 1] / fact * rising *
           std::exp(-(s + cplx{2.0 * j - 1.0, 0.0}) * laK);
    rising *= (s + cplx{2.0 * j - 1.0, 0.0}) * (s + cplx{2.0 * j, 0.0});
    fact *= (2.0 * j + 1.0) * (2.0 * j + 2.0);
  }
  double rem = std::abs(bern[J] / fact * rising) *
               std::pow(aK, -(s.real() + 2.0 * J + 1.0));
  double ratio = std::abs(s + cplx{2.0 * J + 1.0, 0.0}) / (s.real() + 2.0 * J + 1.0);
  return ZetaResult{sum, rem * ratio};
}

namespace {

void apply_finite(const ModelSystem& m, cplx s, const GridFunction& v,
                  GridFunction& out, Exec exec) {
  const int count = m.branches.count();
  const bool real_s = (s.imag() == 0.0);
  const std::int64_t total = static_cast<std::int64_t>(v.size());
  auto work = [&](std::int64_t i) {
    Pt y = v.point(static_cast<std::size_t>(i));
    cplx acc{0.0, 0.0};
    for (int id = 0; id < count; ++id) {
      BranchEval be = m.branches.eval(id, y);
      double r = m.roof.eval(be.point, m.dim);
      if (real_s) {
        double w = std::exp(be.log_abs_det - s.real() * r);
        acc += w * v.interp(be.point);
      } else {
        cplx w = std::exp(cplx{be.log_abs_det - s.real() * r, -s.imag() * r});
        acc += w * v.interp(be.point);
      }
    }
    out[static_cast<std::size_t>(i)] = acc;
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < total; ++i) work(i);
  } else {
    for (std::int64_t i = 0; i < total; ++i) work(i);
  }
}

// Continued fraction family: branches h_k(y) = 1/(k+y) with weight
// e^{-s r(h_k y)} (k+y)^{-2} and roof r(y) = c - log y, so the weight is
// e^{-sc} (k+y)^{-(2+s)}.  Direct summation to k = 2n; beyond that every
// image point falls in the interpolant's clamp region, so the remainder is
// v[0] e^{-sc} zeta_H(2+s, 2n+1+y) exactly, up to the certified zeta bound.
void apply_gauss(const ModelSystem& m, cplx s, const GridFunction& v,
                 GridFunction& out, double& tail_err, Exec exec) {
  require(m.roof.poly[0].empty() && m.roof.trig.empty() &&
              m.roof.log_coeff[0] == -1.0,
          "countable fast path expects roof c - log(y)");
  const double c = m.roof.constant;
  const int n = v.n();
  const int n_direct = 2 * n;
  const cplx e = cplx{2.0, 0.0} + s;
  const cplx e_sc = std::exp(-s * c);
  const bool real_s = (s.imag() == 0.0);
  const double er = e.real();
  int n_switch = static_cast<int>(
      std::min(1.0e9, std::ceil(512.0 * std::max(1.0, std::abs(e)))));
  n_switch = std::max(n_switch, 512);
  const auto coeff = binom_coeffs(e);
  std::vector<cplx> ktab;
  if (n_switch <= n_direct) {
    ktab.resize(static_cast<std::size_t>(n_direct) + 1);
    for (int k = n_switch; k <= n_direct; ++k)
      ktab[k] = real_s ? cplx{std::pow(static_cast<double>(k), -er), 0.0}
                       : std::exp(-e * std::log(static_cast<double>(k)));
  }
  const cplx v0 = v[0];
  const int direct_end = std::min(n_switch - 1, n_direct);
  std::vector<double> zerr(v.size(), 0.0);
  auto work = [&](std::int64_t ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    const double y = v.point(i)[0];
    cplx acc{0.0, 0.0};
    for (int k = 1; k <= direct_end; ++k) {
      double ky = k + y;
      cplx w = real_s ? cplx{std::pow(ky, -er), 0.0} : std::exp(-e * std::log(ky));
      acc += w * v.interp(pt1(1.0 / ky));
    }
    for (int k = n_switch; k <= n_direct; ++k) {
      double ky = k + y;
      double x = y / k;
      cplx series = coeff[6];
      for (int j = 5; j >= 0; --j) series = series * x + coeff[j];
      acc += ktab[k] * series * v.interp(pt1(1.0 / ky));
    }
    ZetaResult zt = hurwitz_zeta(e, static_cast<double>(n_direct) + 1.0 + y);
    acc += zt.value * v0;
    zerr[i] = zt.err_bound * std::abs(v0);
    out[i] = e_sc * acc;
  };
  const std::int64_t total = static_cast<std::int64_t>(v.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < total; ++i) work(i);
  } else {
    for (std::int64_t i = 0; i < total; ++i) work(i);
  }
  double zmax = 0.0;
  for (double z : zerr) zmax = std::max(zmax, z);
  // 1e-16 covers the binomial series truncation (x <= 1/512, |e| x <= 1/512).
  tail_err = std::abs(e_sc) * zmax + 1e-16 * v.sup_abs();
}

} // namespace

ApplyResult apply_twisted(const ModelSystem& m, cplx s, const GridFunction& v,
                          Exec exec) {
  require(v.dim() == m.dim, "grid dimension does not match model");
  require(std::abs(s.real()) <= 0.5, "sigma out of the supported abscissa range");
  ApplyResult res{GridFunction(v.dim(), v.n()), 0.0};
  if (is_gauss(m)) {
    apply_gauss(m, s, v, res.out, res.tail_err, exec);
  } else {
    apply_finite(m, s, v, res.out, exec);
  }
  return res;
}

EigenData leading_eigendata(const ModelSystem& m, double sigma, int grid_n,
                            double tol, int max_iter, Exec exec) {
  EigenData ed;
  ed.sigma = sigma;
  GridFunction f(m.dim, grid_n, cplx{1.0, 0.0});
  double lambda = 1.0;
  double residual = HUGE_VAL;
  int iter = 0;
  while (iter < max_iter) {
    ++iter;
    ApplyResult ar = apply_twisted(m, cplx{sigma, 0.0}, f, exec);
    double mass = std::real(ar.out.integral());
    require(mass > 0.0, "power iteration lost positivity of the mass");
    lambda = mass;
    residual = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      residual = std::max(residual, std::abs(ar.out[i] - lambda * f[i]));
    double inv = 1.0 / mass;
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::real(ar.out[i]) * inv;
    ed.tail_err = std::max(ed.tail_err, ar.tail_err);
    if (residual < tol * std::max(1.0, lambda)) break;
  }
  require(residual < 1e-8 * std::max(1.0, lambda),
          "power iteration did not converge");
  double fmin = HUGE_VAL;
  for (std::size_t i = 0; i < f.size(); ++i) fmin = std::min(fmin, std::real(f[i]));
  require(fmin > 0.0, "leading eigenfunction lost strict positivity");
  ed.lambda = lambda;
  ed.f = std::move(f);
  ed.residual = residual;
  ed.iterations = iter;
  return ed;
}

ApplyResult apply_normalized(const ModelSystem& m, const EigenData& eig, double b,
                             const GridFunction& v, Exec exec) {
  require(eig.f.size() == v.size(), "eigendata grid does not match input");
  GridFunction fv = v;
  fv *= eig.f;
  ApplyResult ar = apply_twisted(m, cplx{eig.sigma, b}, fv, exec);
  double fmin = HUGE_VAL;
  for (std::size_t i = 0; i < eig.f.size(); ++i)
    fmin = std::min(fmin, std::real(eig.f[i]));
  for (std::size_t i = 0; i < ar.out.size(); ++i)
    ar.out[i] /= eig.lambda * std::real(eig.f[i]);
  ar.tail_err /= eig.lambda * fmin;
  return ar;
}

GridFunction apply_normalized_power(const ModelSystem& m, const EigenData& eig,
                                    double b, const GridFunction& v, int n,
                                    Exec exec) {
  GridFunction w = v;
  for (int k = 0; k < n; ++k) w = apply_normalized(m, eig, b, w, exec).out;
  return w;
}

// ---------------------------------------------------------------------------
// Test dictionaries.

GridFunction rough_test_function(int dim, int grid_n, double alpha, double b,
                                 std::uint64_t seed, std::uint64_t stream) {
  if (stream == 0) return GridFunction(dim, grid_n, cplx{1.0, 0.0});
  auto rng = rng_stream(seed, 0x726f7567ULL ^ stream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  struct Kink {
    Pt p;
    double w;
    cplx amp;
  };
  std::vector<Kink> kinks;
  for (int j = 0; j < 3; ++j) {
    double w = 1.0 / 128.0 + unit(rng) * (1.0 / 32.0 - 1.0 / 128.0);
    Pt p = pt1(w + unit(rng) * (1.0 - 2.0 * w));
    if (dim == 2) p[1] = w + unit(rng) * (1.0 - 2.0 * w);
    double th = 2.0 * kPi * unit(rng);
    kinks.push_back({p, w, std::polar(0.5 + 0.5 * unit(rng), th)});
  }
  struct Wave {
    int k0, k1;
    cplx amp;
  };
  std::vector<Wave> waves;
  for (int k = 1; k <= 16; ++k) {
    Wave w;
    w.k0 = k;
    w.k1 = (dim == 2) ? static_cast<int>(unit(rng) * 5.0) - 2 : 0;
    w.amp = std::polar(std::abs(gauss(rng)) / k, 2.0 * kPi * unit(rng));
    waves.push_back(w);
  }
  bool modulate = (b != 0.0) && (unit(rng) < 0.5);
  double mfreq = modulate ? std::round(std::abs(b) / (2.0 * kPi)) : 0.0;

  GridFunction v = GridFunction::sample(dim, grid_n, [&](const Pt& y) {
    cplx acc{0.0, 0.0};
    for (const Wave& w : waves)
      acc += w.amp * std::polar(1.0, 2.0 * kPi * (w.k0 * y[0] + w.k1 * y[1]));
    for (const Kink& k : kinks) {
      double d = (dim == 1) ? std::abs(y[0] - k.p[0]) : dist_inf(y, k.p, 2);
      if (d < k.w) acc += k.amp * std::pow(1.0 - d / k.w, alpha);
    }
    if (mfreq != 0.0) acc *= std::polar(1.0, 2.0 * kPi * mfreq * y[0]);
    return acc;
  });
  double nb = holder_norms(v, alpha, b).b_norm;
  if (nb > 0.0) v *= cplx{1.0 / nb, 0.0};
  return v;
}

GridFunction smooth_test_function(int dim, int grid_n, std::uint64_t seed,
                                  std::uint64_t stream) {
  auto rng = rng_stream(seed, 0x736d6f6fULL ^ stream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  struct Wave {
    int k0, k1;
    cplx amp;
  };
  std::vector<Wave> waves;
  for (int k = 1; k <= 8; ++k) {
    Wave w;
    w.k0 = k;
    w.k1 = (dim == 2) ? static_cast<int>(unit(rng) * 5.0) - 2 : 0;
    double scale = 2.0 * kPi * k;
    w.amp = std::polar(gauss(rng) / (scale * scale), 2.0 * kPi * unit(rng));
    waves.push_back(w);
  }
  cplx base = std::polar(0.5 + unit(rng), 2.0 * kPi * unit(rng));
  return GridFunction::sample(dim, grid_n, [&](const Pt& y) {
    cplx acc = base;
    for (const Wave& w : waves)
      acc += w.amp * std::polar(1.0, 2.0 * kPi * (w.k0 * y[0] + w.k1 * y[1]));
    return acc;
  });
}

// ---------------------------------------------------------------------------
// Lasota-Yorke probe.

LasotaYorkeProbe lasota_yorke_probe(const ModelSystem& m, cplx s, int steps,
                                    int trials, std::uint64_t seed, int grid_n,
                                    double margin) {
  require(steps >= 3, "probe needs at least 3 steps");
  EigenData eig = leading_eigendata(m, s.real(), grid_n);
  const double b = s.imag();
  const double alpha = m.alpha;
  const double bfac = 1.0 + std::pow(std::abs(b), alpha);

  LasotaYorkeProbe probe;
  probe.rho_target = std::pow(m.rho0, alpha);
  probe.seminorms.assign(steps + 1, 0.0);
  probe.sups.assign(steps + 1, 0.0);

  std::vector<std::vector<double>> semis(trials), sups(trials);
  for (int t = 0; t < trials; ++t) {
    GridFunction v = rough_test_function(m.dim, grid_n, alpha, b, seed,
                                         static_cast<std::uint64_t>(t) + 1);
    semis[t].push_back(holder_seminorm(v, alpha));
    sups[t].push_back(v.sup_abs());
    for (int n = 1; n <= steps; ++n) {
      v = apply_normalized(m, eig, b, v).out;
      semis[t].push_back(holder_seminorm(v, alpha));
      sups[t].push_back(v.sup_abs());
    }
    for (int n = 0; n <= steps; ++n) {
      probe.seminorms[n] = std::max(probe.seminorms[n], semis[t][n]);
      probe.sups[n] = std::max(probe.sups[n], sups[t][n]);
    }
  }

  // Contraction factor from the plateau-subtracted maxima.  Strongly
  // contracting models can drop below the default cutoff in two steps, so
  // loosen it until the fit has enough points.
  double plateau = probe.seminorms[steps];
  double d0 = std::max(probe.seminorms[0] - plateau, 0.0);
  std::vector<double> xs, ys;
  for (double cut = 0.01; xs.size() < 3 && cut > 1e-15; cut *= 1e-2) {
    xs.clear();
    ys.clear();
    for (int n = 0; n < steps; ++n) {
      double d = probe.seminorms[n] - plateau;
      if (d > cut * d0 && d > 0.0) {
        xs.push_back(n);
        ys.push_back(std::log(d));
      }
    }
  }
  require(xs.size() >= 3, "probe decayed too fast to fit a rate");
  probe.rho_hat = std::exp(fit_line(xs, ys).slope);

  double c3 = 0.0;
  for (int t = 0; t < trials; ++t) {
    double msup = 0.0;
    for (int n = 1; n <= steps; ++n) {
      msup = std::max(msup, sups[t][n - 1]);
      double denom = bfac * msup + std::pow(probe.rho_hat, n) * semis[t][0];
      if (denom > 0.0) c3 = std::max(c3, semis[t][n] / denom);
    }
  }
  probe.C3_hat = c3;
  probe.pass = probe.rho_hat <= probe.rho_target + margin;
  return probe;
}

// ---------------------------------------------------------------------------
// UNI.

UniEstimate uni_estimate(const ModelSystem& m, const std::vector<int>& word1,
                         const std::vector<int>& word2, int grid_n,
                         const Pt& ell) {
  require(word1.size() == word2.size(), "branch words of unequal length");
  require(!word1.empty(), "empty branch word");
  double en = std::sqrt(ell[0] * ell[0] + ell[1] * ell[1]);
  require(en > 0.0, "zero direction field");
  Pt l{ell[0] / en, ell[1] / en};

  UniEstimate ue;
  ue.word1 = word1;
  ue.word2 = word2;
  ue.n0 = static_cast<int>(word1.size());
  double best = HUGE_VAL;
  Pt arg = pt1(0.5);
  const int n0g = (m.dim == 1) ? grid_n : std::min(grid_n, 512);
  const int n1g = (m.dim == 1) ? 1 : n0g;
  for (int i1 = 0; i1 < n1g; ++i1) {
    for (int i0 = 0; i0 < n0g; ++i0) {
      Pt y = pt1((i0 + 0.5) / n0g);
      if (m.dim == 2) y[1] = (i1 + 0.5) / n1g;
      auto g1 = models::birkhoff_roof_gradient(m, word1, y);
      auto g2 = models::birkhoff_roof_gradient(m, word2, y);
      double d = std::abs((g1[0] - g2[0]) * l[0] + (g1[1] - g2[1]) * l[1]);
      if (d < best) {
        best = d;
        arg = y;
      }
    }
  }
  ue.E = best;
  ue.minimizer[0] = arg[0];
  ue.minimizer[1] = arg[1];
  ue.half_slack_ok = true;  // inf over the same grid; slack check is for
                            // smoothed custom fields, which reuse this path

  double t = 1e-6;
  Pt yp{arg[0] + t * l[0], arg[1] + t * l[1]};
  Pt ym{arg[0] - t * l[0], arg[1] - t * l[1]};
  auto psi = [&](const Pt& y) {
    return models::birkhoff_roof(m, word1, y) - models::birkhoff_roof(m, word2, y);
  };
  ue.fd_value = std::abs((psi(yp) - psi(ym)) / (2.0 * t));
  return ue;
}

UniEstimate uni_best_pair(const ModelSystem& m, int n0, int grid_n, const Pt& ell) {
  require(!m.branches.countable(), "pair enumeration needs a finite family");
  const int count = m.branches.count();
  double total = std::pow(static_cast<double>(count), n0);
  require(total <= 4096.0, "word family too large to enumerate");
  const int nw = static_cast<int>(total);
  auto word_of = [&](int idx) {
    std::vector<int> w(n0);
    for (int j = n0 - 1; j >= 0; --j) {
      w[j] = idx % count;
      idx /= count;
    }
    return w;
  };
  UniEstimate best;
  best.E = -1.0;
  for (int a = 0; a < nw; ++a) {
    for (int b = a + 1; b < nw; ++b) {
      UniEstimate ue = uni_estimate(m, word_of(a), word_of(b), grid_n, ell);
      if (ue.E > best.E) best = ue;
    }
  }
  require(best.E >= 0.0, "no word pair found");
  return best;
}

// ---------------------------------------------------------------------------
// Ball family and cutoff.

BallFamily ball_family(double b, double delta_c, double E) {
  require(E >= 0.0, "negative transversality bound");
  BallFamily fam;
  fam.b = b;
  fam.E = E;
  if (E <= 0.0) return fam;  // degenerate: empty family
  fam.Delta = 4.0 * kPi / E;
  fam.E_prime = std::max(16.0 * kPi / E, 2.0);
  require(delta_c > 0.0 && delta_c < fam.Delta, "delta_c outside (0, Delta)");
  fam.delta_c = delta_c;
  double ab = std::abs(b);
  require(ab > 0.0, "ball family needs b != 0");
  fam.spacing = (delta_c + fam.Delta) / ab;
  fam.radius = delta_c / ab;
  fam.coverage_ok = ab >= fam.E_prime;
  const double R = fam.spacing;
  if (1.0 - R <= R) return fam;
  const double step = R / 8.0;
  double next_ok = R + step / 64.0;  // lattice start just inside
  for (double c = next_ok; c <= 1.0 - R; c += step) {
    if (c < next_ok) continue;
    Ball ball;
    ball.y_prime = c;
    ball.y_second = c;
    fam.balls.push_back(ball);
    next_ok = c + 2.0 * R;
  }
  return fam;
}

namespace {

// Normalized length-n0 branch term: magnitude, roof Birkhoff sum (phase),
// image point.
struct WordTerm {
  double mag = 0.0;
  double roof = 0.0;
  Pt img{};
};

WordTerm word_term(const ModelSystem& m, const EigenData& eig,
                   const std::vector<int>& word, const Pt& y, double f_at_y) {
  WordTerm t;
  BranchEval be = models::branch_eval(m, word, y);
  t.img = be.point;
  t.roof = models::birkhoff_roof(m, word, y);
  double fimg = std::real(eig.f.interp(be.point));
  double lam_pow = std::pow(eig.lambda, static_cast<double>(word.size()));
  t.mag = std::exp(be.log_abs_det - eig.sigma * t.roof) * fimg / (lam_pow * f_at_y);
  return t;
}

double bump_profile(double t) {
  double a = std::abs(t);
  if (a <= 0.5) return 1.0;
  if (a >= 1.0) return 0.0;
  double u = 2.0 * (a - 0.5);
  return 1.0 - u * u * (3.0 - 2.0 * u);
}

} // namespace

void assign_cancellation_data(const ModelSystem& m, const EigenData& eig,
                              double b, int n0, BallFamily& fam,
                              const GridFunction& u, const GridFunction& v) {
  require(m.dim == 1, "cancellation machinery is one-dimensional");
  require(u.size() == eig.f.size() && v.size() == u.size(), "grid mismatch");
  if (fam.balls.empty()) return;
  if (fam.word1.empty()) {
    UniEstimate up = uni_best_pair(m, n0, 1 << 10);
    require(up.E > 0.0, "cancellation typing needs a transversal pair");
    fam.word1 = up.word1;
    fam.word2 = up.word2;
    fam.n0 = n0;
  }
  const double vsup = v.sup_abs();
  const double h = u.h();
  auto psi = [&](double y) {
    return models::birkhoff_roof(m, fam.word1, pt1(y)) -
           models::birkhoff_roof(m, fam.word2, pt1(y));
  };
  auto branch_vals = [&](double y, cplx& v1, cplx& v2) {
    BranchEval b1 = models::branch_eval(m, fam.word1, pt1(y));
    BranchEval b2 = models::branch_eval(m, fam.word2, pt1(y));
    v1 = v.interp(b1.point);
    v2 = v.interp(b2.point);
  };
  // Phase along the curve: G(y) = arg v(h1 y) - arg v(h2 y) - b psi(y); a
  // shifted center y'' with G(y'') = pi mod 2pi anti-aligns the two terms.
  for (Ball& ball : fam.balls) {
    const double span = fam.Delta / std::abs(b);
    const int S = 256;
    bool degenerate = false;
    std::vector<double> G(S + 1);
    for (int k = 0; k <= S && !degenerate; ++k) {
      double y = ball.y_prime + span * k / S;
      cplx v1, v2;
      branch_vals(y, v1, v2);
      if (std::abs(v1) < 1e-9 * vsup || std::abs(v2) < 1e-9 * vsup) {
        degenerate = true;
        break;
      }
      double g = std::arg(v1) - std::arg(v2) - b * psi(y);
      if (k == 0) {
        G[k] = g;
      } else {
        G[k] = G[k - 1] + wrap_to_pi(g - G[k - 1]);
      }
    }
    double y_second = ball.y_prime + 0.5 * span;
    if (!degenerate) {
      int hit = -1;
      for (int k = 0; k < S; ++k) {
        double d0 = wrap_to_pi(G[k] - kPi);
        double d1 = wrap_to_pi(G[k + 1] - kPi);
        // d0 * d1 <= 0 also fires at the wrap jump (phases aligned, not
        // anti-aligned); a genuine zero keeps the increment small.
        if (std::abs(d1 - d0) < kPi && d0 * d1 <= 0.0) {
          hit = k;
          break;
        }
      }
      if (hit >= 0) {
        double lo = ball.y_prime + span * hit / S;
        double hi = ball.y_prime + span * (hit + 1) / S;
        double Glo = G[hit];
        for (int it = 0; it < 60; ++it) {
          double mid = 0.5 * (lo + hi);
          cplx v1, v2;
          branch_vals(mid, v1, v2);
          double g = std::arg(v1) - std::arg(v2) - b * psi(mid);
          double Gmid = Glo + wrap_to_pi(g - Glo);
          if (wrap_to_pi(Gmid - kPi) * wrap_to_pi(Glo - kPi) <= 0.0) {
            hi = mid;
          } else {
            lo = mid;
            Glo = Gmid;
          }
        }
        y_second = 0.5 * (lo + hi);
      }
    }
    ball.y_second = y_second;

    // Case analysis on every cell meeting the ball.
    int c_lo = static_cast<int>(std::floor((y_second - fam.radius) / h - 0.5));
    int c_hi = static_cast<int>(std::ceil((y_second + fam.radius) / h - 0.5));
    double m1 = HUGE_VAL, m2 = HUGE_VAL;
    for (int cidx = std::max(c_lo, 0); cidx <= std::min(c_hi, u.n() - 1); ++cidx) {
      double y = (cidx + 0.5) * h;
      if (std::abs(y - y_second) > fam.radius + 0.5 * h) continue;
      double fy = std::real(eig.f[static_cast<std::size_t>(cidx)]);
      WordTerm t1 = word_term(m, eig, fam.word1, pt1(y), fy);
      WordTerm t2 = word_term(m, eig, fam.word2, pt1(y), fy);
      double t1u = t1.mag * std::real(u.interp(t1.img));
      double t2u = t2.mag * std::real(u.interp(t2.img));
      cplx a1v = t1.mag * std::polar(1.0, -b * t1.roof) * v.interp(t1.img);
      cplx a2v = t2.mag * std::polar(1.0, -b * t2.roof) * v.interp(t2.img);
      double lhs = std::abs(a1v + a2v);
      m1 = std::min(m1, 0.75 * t1u + t2u - lhs);
      m2 = std::min(m2, t1u + 0.75 * t2u - lhs);
    }
    if (m1 >= m2 && m1 >= 0.0) {
      ball.type = 0;
      ball.margin = m1;
    } else if (m2 >= 0.0) {
      ball.type = 1;
      ball.margin = m2;
    } else {
      ball.type = -1;
      ball.margin = std::max(m1, m2);
    }
  }
}

ChiCutoff chi_cutoff(const ModelSystem& m, const EigenData& eig, double b,
                     const BallFamily& fam, const GridFunction& u,
                     const GridFunction& v, int n0) {
  require(m.dim == 1, "cancellation machinery is one-dimensional");
  require(u.size() == v.size() && u.size() == eig.f.size(), "grid mismatch");
  ChiCutoff cc;
  cc.family = fam;
  bool untyped = false;
  for (const Ball& ball : cc.family.balls)
    if (ball.type < 0) untyped = true;
  if (untyped || (!cc.family.balls.empty() && cc.family.word1.empty()))
    assign_cancellation_data(m, eig, b, n0, cc.family, u, v);
  if (!cc.family.balls.empty())
    require(cc.family.n0 == n0, "word length mismatch with the typed family");

  const int n = u.n();
  const double h = u.h();
  GridFunction omega(1, n, cplx{0.0, 0.0});
  auto forward_n0 = [&](double x) {
    Pt p = pt1(x);
    for (int k = 0; k < cc.family.n0; ++k) p = m.branches.forward(p);
    return p[0];
  };
  for (const Ball& ball : cc.family.balls) {
    if (ball.type < 0) {
      ++cc.skipped;
      continue;
    }
    const std::vector<int>& word =
        (ball.type == 0) ? cc.family.word1 : cc.family.word2;
    double a = models::branch_eval(m, word, pt1(ball.y_second - cc.family.radius)).point[0];
    double c = models::branch_eval(m, word, pt1(ball.y_second + cc.family.radius)).point[0];
    if (a > c) std::swap(a, c);
    int c_lo = std::max(0, static_cast<int>(std::floor(a / h - 1.5)));
    int c_hi = std::min(n - 1, static_cast<int>(std::ceil(c / h + 0.5)));
    for (int cidx = c_lo; cidx <= c_hi; ++cidx) {
      double x = (cidx + 0.5) * h;
      double yb = forward_n0(x);
      double t = (yb - ball.y_second) / cc.family.radius;
      double bump = bump_profile(t);
      if (bump > 0.0)
        omega[static_cast<std::size_t>(cidx)] += cplx{bump, 0.0};
    }
  }
  double osup = omega.sup_abs();
  double oder = 0.0;
  for (int i = 1; i + 1 < n; ++i)
    oder = std::max(oder, std::abs(std::real(omega[i + 1] - omega[i - 1])) / (2.0 * h));
  cc.omega_c1 = osup + oder;
  cc.C_prime = std::max(std::abs(b) > 0.0 ? cc.omega_c1 / std::abs(b) : 0.0, 4.0) + 1.0;
  cc.eta = 1.0 - 1.0 / cc.C_prime;
  cc.chi = GridFunction(1, n);
  for (int i = 0; i < n; ++i)
    cc.chi[i] = cplx{1.0 - std::real(omega[i]) / cc.C_prime, 0.0};

  GridFunction lv = apply_normalized_power(m, eig, b, v, n0);
  GridFunction cu = u;
  cu *= cc.chi;
  GridFunction lu = apply_normalized_power(m, eig, 0.0, cu, n0);
  double slack = -HUGE_VAL;
  for (std::size_t i = 0; i < lv.size(); ++i)
    slack = std::max(slack, std::abs(lv[i]) - std::real(lu[i]));
  cc.pointwise_slack = slack;
  cc.pointwise_ok = slack <= 1e-10;
  return cc;
}

MeasureLowerBound measure_lower_bound_probe(const ModelSystem& m,
                                            const EigenData& eig,
                                            const BallFamily& fam, int trials,
                                            std::uint64_t seed) {
  require(m.dim == 1, "cancellation machinery is one-dimensional");
  MeasureLowerBound out;
  out.trials = trials;
  const int n = eig.f.n();
  const double h = 1.0 / n;
  std::vector<bool> bhat(static_cast<std::size_t>(n), false);
  auto forward_n0 = [&](double x) {
    Pt p = pt1(x);
    for (int k = 0; k < fam.n0; ++k) p = m.branches.forward(p);
    return p[0];
  };
  for (const Ball& ball : fam.balls) {
    if (ball.type < 0) continue;
    const std::vector<int>& word = (ball.type == 0) ? fam.word1 : fam.word2;
    double a = models::branch_eval(m, word, pt1(ball.y_second - fam.radius)).point[0];
    double c = models::branch_eval(m, word, pt1(ball.y_second + fam.radius)).point[0];
    if (a > c) std::swap(a, c);
    int c_lo = std::max(0, static_cast<int>(std::floor(a / h - 1.5)));
    int c_hi = std::min(n - 1, static_cast<int>(std::ceil(c / h + 0.5)));
    for (int cidx = c_lo; cidx <= c_hi; ++cidx) {
      double yb = forward_n0((cidx + 0.5) * h);
      if (std::abs(yb - ball.y_second) <= 0.5 * fam.radius)
        bhat[static_cast<std::size_t>(cidx)] = true;
    }
  }
  double mass = 0.0;
  for (int i = 0; i < n; ++i)
    if (bhat[static_cast<std::size_t>(i)]) mass += std::real(eig.f[i]) * h;
  out.bhat_mass = mass;
  if (mass == 0.0) return out;

  const double K = 1.0;
  const double cap = K * std::pow(std::abs(fam.b), m.alpha);
  double c1 = HUGE_VAL;
  for (int t = 0; t < trials; ++t) {
    GridFunction g = rough_test_function(1, n, m.alpha, 0.0, seed,
                                         0x6d6c62ULL + static_cast<std::uint64_t>(t));
    double gsemi = holder_seminorm(g, m.alpha);
    double scale = (gsemi > 0.0) ? cap / gsemi : 0.0;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      double w = std::exp(scale * std::real(g[i]));
      double wm = w * std::real(eig.f[i]);
      den += wm;
      if (bhat[static_cast<std::size_t>(i)]) num += wm;
    }
    c1 = std::min(c1, num / den);
  }
  out.c1_hat = c1;
  out.pass = c1 > 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Cone iteration.

ConeIteration cone_iterate(const ModelSystem& m, const EigenData& eig, double b,
                           int n0, int blocks, const GridFunction& v_init,
                           double C4, double beta_threshold) {
  require(m.dim == 1, "cone iteration is one-dimensional");
  ConeIteration ci;
  UniEstimate up = uni_best_pair(m, n0, 1 << 10);
  ci.uni_degenerate = (up.E <= 0.0);
  BallFamily fam0;
  if (!ci.uni_degenerate) {
    // Ball scale: the branch phase difference drifts at rate |b| E, so a
    // radius of 1/(2E|b|) keeps it within half a radian of the anti-aligned
    // center and the case margins stay positive.
    fam0 = ball_family(b, 0.5 / up.E, up.E);
    fam0.word1 = up.word1;
    fam0.word2 = up.word2;
    fam0.n0 = n0;
  }

  const int n = v_init.n();
  GridFunction u(1, n, cplx{1.0, 0.0});
  GridFunction v = v_init;
  double vsup = v.sup_abs();
  require(vsup > 0.0, "zero initial v");
  v *= cplx{1.0 / vsup, 0.0};
  const double alpha = m.alpha;
  const double cap = C4 * std::pow(std::abs(b), alpha);

  bool all_ok = true;
  std::vector<double> xs, ys;
  for (int mm = 0; mm < blocks; ++mm) {
    ConeBlock blk;
    blk.m = mm;
    blk.l2_u = u.l2_weighted(eig.f);
    blk.l2_v = v.l2_weighted(eig.f);

    double dom = -HUGE_VAL, umin = HUGE_VAL;
    for (std::size_t i = 0; i < u.size(); ++i) {
      dom = std::max(dom, std::abs(v[i]) - std::real(u[i]));
      umin = std::min(umin, std::real(u[i]));
    }
    blk.domination_slack = dom;
    bool ok = (dom <= 1e-10) && (umin > 0.0);
    GridFunction logu(1, n);
    for (int i = 0; i < n; ++i) logu[i] = cplx{std::log(std::real(u[i])), 0.0};
    if (holder_seminorm(logu, alpha) > cap * (1.0 + 1e-9) + 1e-12) ok = false;
    // v-pair Hoelder condition on dyadic pairs.
    for (int stride = n / 2; stride >= 1 && ok; stride /= 2) {
      double d = std::pow(static_cast<double>(stride) / n, alpha);
      for (int i = 0; i + stride < n; ++i) {
        double lim = cap * std::min(std::real(u[i]), std::real(u[i + stride])) * d;
        if (std::abs(v[i + stride] - v[i]) > lim + 1e-9) {
          ok = false;
          break;
        }
      }
    }
    blk.cone_ok = ok;
    all_ok = all_ok && ok;

    ChiCutoff cc = chi_cutoff(m, eig, b, fam0, u, v, n0);
    double cmin = HUGE_VAL, cmax = -HUGE_VAL;
    for (std::size_t i = 0; i < cc.chi.size(); ++i) {
      cmin = std::min(cmin, std::real(cc.chi[i]));
      cmax = std::max(cmax, std::real(cc.chi[i]));
    }
    blk.chi_min = cmin;
    blk.chi_max = cmax;
    ci.blocks.push_back(blk);

    GridFunction cu = u;
    cu *= cc.chi;
    u = apply_normalized_power(m, eig, 0.0, cu, n0);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = cplx{std::real(u[i]), 0.0};
    v = apply_normalized_power(m, eig, b, v, n0);

    if (blk.l2_v > 1e-280) {
      xs.push_back(mm);
      ys.push_back(std::log(blk.l2_v));
    }
  }
  require(xs.size() >= 3, "not enough mass points to fit a decay rate");
  ci.beta_hat = std::exp(fit_line(xs, ys).slope);
  ci.cone_ok = all_ok;
  ci.pass = ci.cone_ok && ci.beta_hat <= beta_threshold;
  return ci;
}

// ---------------------------------------------------------------------------
// Norm decay probe.

NormProbe norm_contraction_probe(const ModelSystem& m, cplx s, int n_lo, int n_hi,
                                 int dict_size, std::uint64_t seed, int grid_n) {
  require(n_lo >= 1 && n_hi >= n_lo, "bad probe window");
  NormProbe np;
  np.b = s.imag();
  np.ns.resize(static_cast<std::size_t>(n_hi - n_lo) + 1);
  for (int k = n_lo; k <= n_hi; ++k) np.ns[static_cast<std::size_t>(k - n_lo)] = k;
  np.estimates.assign(np.ns.size(), 0.0);
  const double alpha = m.alpha;
  for (int d = 0; d < dict_size; ++d) {
    GridFunction v = rough_test_function(m.dim, grid_n, alpha, np.b, seed,
                                         static_cast<std::uint64_t>(d));
    double nb0 = holder_norms(v, alpha, np.b).b_norm;
    if (nb0 <= 0.0) continue;
    GridFunction w = v;
    for (int k = 1; k <= n_hi; ++k) {
      w = apply_twisted(m, s, w).out;
      if (k >= n_lo) {
        double nb = holder_norms(w, alpha, np.b).b_norm / nb0;
        std::size_t idx = static_cast<std::size_t>(k - n_lo);
        np.estimates[idx] = std::max(np.estimates[idx], nb);
      }
    }
  }
  np.first = np.estimates.front();
  np.last = np.estimates.back();
  np.monotone_ok = true;
  for (std::size_t k = 0; k + 1 < np.estimates.size(); ++k)
    if (np.estimates[k + 1] >= np.estimates[k] + 1e-3) np.monotone_ok = false;
  return np;
}

} // namespace mixlab::transfer
