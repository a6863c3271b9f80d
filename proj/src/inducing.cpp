#include "mixlab/inducing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

namespace mixlab::inducing {

namespace {

// sup over k >= 1 of the collar comparison factor
//   D(d, beta, k) = ((1+beta^{k-1})^d - 1) / ((1+beta^{k-1})^d - (1+beta^k)^d),
// attained either at small k or in the k -> infinity limit 1/(1-beta).
double collar_factor_sup(int d, double beta) {
  double best = 1.0 / (1.0 - beta);
  for (int k = 1; k <= 64; ++k) {
    double x = std::pow(beta, k - 1);
    // once 1 + x is within a few ulp of 1 the difference quotient is noise;
    // past this point the ratio sits within 1e-8 of the limit already seeded
    if (x < 1e-8) break;
    double a = std::pow(1.0 + x, d);
    double b = std::pow(1.0 + beta * x, d);
    if (a - b <= 0.0) continue;
    best = std::max(best, (a - 1.0) / (a - b));
  }
  return best;
}

void append(std::vector<std::string>& out, bool ok, const std::string& msg) {
  if (!ok) out.push_back(msg);
}

} // namespace

AmbientSystem make_ambient(const ModelSystem& m, double delta0) {
  require(m.branches.kind() == models::BranchFamily::Kind::AffineGrid,
          "inducing ambient requires a full affine branch grid");
  require(delta0 > 0.0 && delta0 < 0.5, "delta0 must lie in (0, 1/2)");
  AmbientSystem amb;
  amb.model = m;
  amb.dim = m.dim;
  amb.arity = m.branches.grid_arity();
  amb.lambda = 1.0 / amb.arity;
  amb.alpha = 1.0;
  amb.C1 = 1.0;
  amb.p = m.dim == 1 ? pt1(0.5) : pt2(0.5, 0.5);
  amb.delta0 = delta0;
  return amb;
}

std::vector<std::string> constants_violations(const InducingConstants& c) {
  std::vector<std::string> v;
  append(v, c.delta0 > 0.0, "delta0 must be positive");
  append(v, c.lambda > 0.0 && c.lambda < 1.0, "lambda must lie in (0,1)");
  append(v, c.alpha > 0.0 && c.alpha <= 1.0, "alpha must lie in (0,1]");
  append(v, c.d_u == 1 || c.d_u == 2, "unstable dimension must be 1 or 2");
  double cc = c.C1 * c.C2 * c.C2;
  append(v, c.L >= 3, "L must be at least 3");
  append(v, cc * (std::pow(2.0, c.d_u) - 1.0) / std::pow(c.L - 1.0, c.d_u) < 0.25,
         "L too small for the quarter bound");
  append(v, c.delta > 0.0 && c.delta < c.delta0, "delta must lie in (0, delta0)");
  append(v, c.C3 * std::pow(3.0 * c.delta, c.alpha) < 0.5 * c.delta0,
         "holonomy image of 3 delta must stay below delta0/2");
  append(v, c.C4 * (c.L + 1.0) * c.delta < c.delta0,
         "thickened windows must fit inside the delta0 cube");
  append(v, c.eps > 0.0 && c.eps < c.delta, "eps must lie in (0, delta)");
  append(v, c.C3 * std::pow(c.eps, c.alpha) < c.delta,
         "holonomy image of eps must stay below delta");
  append(v, c.C3 * std::pow(c.eps, c.alpha) <
             c.delta * (std::pow(c.lambda, -c.alpha) - 1.0),
         "eps must clear the annulus separation gap");
  append(v, c.L * c.delta + c.eps <= c.delta0,
         "L delta + eps must stay inside delta0");
  append(v, c.N1 >= 1, "N1 must be at least 1");
  append(v, c.N2 >= 1, "N2 must be at least 1");
  append(v, std::pow(c.lambda, c.N2) < c.eps / c.delta0,
         "lambda^N2 must drop below eps/delta0");
  append(v, c.N == c.N1 + c.N2, "N must equal N1 + N2");
  double D = collar_factor_sup(c.d_u, std::pow(c.lambda, c.alpha));
  append(v, std::abs(c.D - D) < 1e-9 * D, "collar factor D inconsistent");
  append(v, std::abs(c.a1 - 1.0 / (cc * c.D)) < 1e-12, "a1 inconsistent with D");
  append(v, c.a1 > 0.0 && c.a1 <= 1.0, "a1 must lie in (0,1]");
  append(v, std::abs(c.a0 - (2.0 + c.a1) / (2.0 * c.a1)) < 1e-12,
         "a0 inconsistent with a1");
  return v;
}

InducingConstants derive_constants(const AmbientSystem& amb,
                                   const std::map<std::string, double>& overrides) {
  InducingConstants c;
  c.d_u = amb.dim;
  c.delta0 = amb.delta0;
  if (auto it = overrides.find("delta0"); it != overrides.end()) c.delta0 = it->second;
  c.delta1 = 0.5 * c.delta0;
  c.C1 = amb.C1;
  c.C2 = amb.pi.C2;
  c.C3 = amb.pi.C3;
  c.C4 = 1.0;
  c.alpha = amb.alpha;
  c.lambda = amb.lambda;
  require(c.lambda > 0.0 && c.lambda < 1.0, "contraction rate must lie in (0,1)");

  double cc = c.C1 * c.C2 * c.C2;
  c.L = 3;
  while (cc * (std::pow(2.0, c.d_u) - 1.0) / std::pow(c.L - 1.0, c.d_u) >= 0.25) {
    ++c.L;
    require(c.L <= 64, "no admissible window multiple L below 64");
  }

  c.delta = 0.0;
  for (int j = 1; j <= 60; ++j) {
    double d = c.delta0 * std::pow(0.5, j);
    if (c.C3 * std::pow(3.0 * d, c.alpha) < 0.5 * c.delta0 &&
        c.C4 * (c.L + 1.0) * d < c.delta0) {
      c.delta = d;
      break;
    }
  }
  require(c.delta > 0.0, "no admissible delta on the dyadic ladder");

  c.eps = 0.0;
  for (int j = 1; j <= 60; ++j) {
    double e = c.delta0 * std::pow(0.5, j);
    if (e < c.delta && c.C3 * std::pow(e, c.alpha) < c.delta &&
        c.C3 * std::pow(e, c.alpha) < c.delta * (std::pow(c.lambda, -c.alpha) - 1.0) &&
        c.L * c.delta + e <= c.delta0) {
      c.eps = e;
      break;
    }
  }
  require(c.eps > 0.0,
              "no admissible eps on the dyadic ladder; delta0 too small or "
              "contraction too weak");

  c.N1 = 1;
  while (0.5 * std::pow(c.lambda, c.N1) > c.delta) {
    ++c.N1;
    require(c.N1 <= 64, "backward orbit fails to become delta-dense");
  }
  c.N2 = 1;
  while (std::pow(c.lambda, c.N2) >= c.eps / c.delta0) {
    ++c.N2;
    require(c.N2 <= 64, "lambda^n fails to drop below eps/delta0");
  }

  for (const auto& [key, val] : overrides) {
    if (key == "delta0") continue;
    else if (key == "delta") c.delta = val;
    else if (key == "delta1") c.delta1 = val;
    else if (key == "eps") c.eps = val;
    else if (key == "L") c.L = static_cast<int>(std::llround(val));
    else if (key == "N1") c.N1 = static_cast<int>(std::llround(val));
    else if (key == "N2") c.N2 = static_cast<int>(std::llround(val));
    else if (key == "C4") c.C4 = val;
    else require(false, "unknown constants override: " + key);
  }
  c.N = c.N1 + c.N2;

  c.D = collar_factor_sup(c.d_u, std::pow(c.lambda, c.alpha));
  c.a1 = 1.0 / (cc * c.D);
  c.a0 = (2.0 + c.a1) / (2.0 * c.a1);

  auto bad = constants_violations(c);
  if (!bad.empty()) {
    std::string msg = "inadmissible inducing constants:";
    for (const auto& s : bad) msg += " " + s + ";";
    require(false, msg);
  }
  return c;
}

int annulus_index_from_dist(double dist, const InducingConstants& c) {
  require(dist <= 2.0 * c.delta * (1.0 + 1e-9), "point outside the annular shell");
  double u = dist / c.delta - 1.0;
  if (u <= 0.0 || u >= 1.0) return 0;
  double beta = std::pow(c.lambda, c.alpha);
  int k = std::max(1, static_cast<int>(std::ceil(std::log(u) / std::log(beta) - 1e-12)));
  while (u < std::pow(beta, k)) ++k;
  while (k > 1 && u >= std::pow(beta, k - 1)) --k;
  return k;
}

int annulus_index(const Pt& y, const InducingConstants& c, const Pt& p) {
  double dist = 0.0;
  for (int a = 0; a < c.d_u; ++a) dist = std::max(dist, std::abs(y[a] - p[a]));
  return annulus_index_from_dist(dist, c);
}

PartitionState::PartitionState(const AmbientSystem& amb, const InducingConstants& c, int q)
    : amb_(amb), c_(c), q_(q) {
  require(q >= 3 && q <= 14, "grid exponent q must lie in [3, 14]");
  require(amb.dim == c.d_u, "ambient dimension does not match the constants");
  nc_ = 1 << q;
  total_ = 1;
  for (int a = 0; a < amb_.dim; ++a) total_ *= nc_;
  h_ = 2.0 * c_.delta / nc_;
  vol_ = std::pow(h_, amb_.dim);
  label.assign(total_, kLabelA);
  t.assign(total_, 0);
  collar.assign(total_, -1);
  ret.assign(total_, 0);
  comp.assign(total_, -1);
}

Pt PartitionState::center(std::int64_t idx) const {
  Pt y{0.0, 0.0};
  std::int64_t rem = idx;
  for (int a = 0; a < amb_.dim; ++a) {
    int i = static_cast<int>(rem % nc_);
    rem /= nc_;
    y[a] = amb_.p[a] - c_.delta + (i + 0.5) * h_;
  }
  return y;
}

std::int64_t PartitionState::count_label(std::int8_t lab) const {
  std::int64_t s = 0;
  for (std::int64_t i = 0; i < total_; ++i)
    if (label[i] == lab) ++s;
  return s;
}

void distance_transform(const std::vector<std::uint8_t>& source, int nx, int ny,
                        std::vector<std::int64_t>& dist2, Exec exec) {
  require(static_cast<std::int64_t>(source.size()) ==
              static_cast<std::int64_t>(nx) * ny,
          "source grid size mismatch");
  const std::int64_t total = static_cast<std::int64_t>(nx) * ny;
  dist2.assign(total, 0);
  const std::int64_t gcap = nx + ny + 1;
  const bool par = exec == Exec::Parallel;

  // pass 1: per row, exact linear distance to the nearest source in the row
  std::vector<std::int64_t> g(total);
#pragma omp parallel for if (par) schedule(static)
  for (int j = 0; j < ny; ++j) {
    const std::int64_t off = static_cast<std::int64_t>(j) * nx;
    std::int64_t run = gcap;
    for (int i = 0; i < nx; ++i) {
      run = source[off + i] ? 0 : std::min(run + 1, gcap);
      g[off + i] = run;
    }
    run = gcap;
    for (int i = nx - 1; i >= 0; --i) {
      run = source[off + i] ? 0 : std::min(run + 1, gcap);
      g[off + i] = std::min(g[off + i], run);
    }
  }

  if (ny == 1) {
    for (int i = 0; i < nx; ++i) dist2[i] = g[i] * g[i];
    return;
  }

  // pass 2: per column, lower envelope of the parabolas j -> g^2 + (j-j')^2.
  // All quantities are integers below 2^53, so the double arithmetic in the
  // envelope bookkeeping is exact enough to pick the true minimum.
#pragma omp parallel for if (par) schedule(static)
  for (int i = 0; i < nx; ++i) {
    std::vector<double> f(ny), z(ny + 1);
    std::vector<int> v(ny);
    for (int j = 0; j < ny; ++j) {
      std::int64_t gg = g[static_cast<std::int64_t>(j) * nx + i];
      f[j] = static_cast<double>(gg * gg);
    }
    int k = 0;
    v[0] = 0;
    z[0] = -1e30;
    z[1] = 1e30;
    for (int j = 1; j < ny; ++j) {
      double s;
      for (;;) {
        int r = v[k];
        s = (f[j] + static_cast<double>(j) * j - f[r] - static_cast<double>(r) * r) /
            (2.0 * (j - r));
        if (s > z[k]) break;
        --k;
      }
      ++k;
      v[k] = j;
      z[k] = s;
      z[k + 1] = 1e30;
    }
    k = 0;
    for (int j = 0; j < ny; ++j) {
      while (z[k + 1] < j) ++k;
      std::int64_t dj = j - v[k];
      std::int64_t fr = static_cast<std::int64_t>(f[v[k]]);
      dist2[static_cast<std::int64_t>(j) * nx + i] = fr + dj * dj;
    }
  }
}

void advance_generation(PartitionState& st, Exec exec) {
  const int n = st.n_ + 1;
  require(n <= 32, "generation count exceeds the exact-arithmetic range");
  const int dim = st.amb_.dim;
  const int nc = st.nc_;
  const std::int64_t total = st.total_;
  const double h = st.h_;
  const InducingConstants& c = st.c_;
  const double Lam_n = std::pow(static_cast<double>(st.amb_.arity), n);
  const double Ld = c.L * c.delta;
  const double win = 2.0 * Ld;
  const bool par = exec == Exec::Parallel;

  GenerationRecord rec;
  rec.n = n;
  rec.eps_threshold = c.eps * std::pow(c.lambda, n);

  const std::vector<std::int8_t> prev_label = st.label;
  const std::vector<std::int32_t> prev_t = st.t;

  std::int64_t count_A_prev = 0, count_B_prev = 0;
  for (std::int64_t i = 0; i < total; ++i) {
    if (prev_label[i] == PartitionState::kLabelA) ++count_A_prev;
    else if (prev_label[i] == PartitionState::kLabelB) ++count_B_prev;
  }
  rec.leb_A_prev = count_A_prev * st.vol_;
  rec.leb_B_prev = count_B_prev * st.vol_;

  // A^(eps): cells of Y_{n-1} within eps lambda^n of A_{n-1} in leaf distance
  const double tau_cells = rec.eps_threshold / h;
  std::vector<std::uint8_t> aeps(total, 0);
  if (tau_cells > 1.0) {
    std::vector<std::uint8_t> src(total);
    for (std::int64_t i = 0; i < total; ++i)
      src[i] = prev_label[i] == PartitionState::kLabelA;
    std::vector<std::int64_t> d2;
    distance_transform(src, nc, dim == 2 ? nc : 1, d2, exec);
    const double tau2 = tau_cells * tau_cells;
#pragma omp parallel for if (par) schedule(static)
    for (std::int64_t i = 0; i < total; ++i)
      aeps[i] = prev_label[i] != PartitionState::kLabelFinished &&
                static_cast<double>(d2[i]) < tau2;
  } else {
    for (std::int64_t i = 0; i < total; ++i)
      aeps[i] = prev_label[i] == PartitionState::kLabelA;
  }

  std::int64_t aeps_cells = 0, aeps_viol = 0;
#pragma omp parallel for if (par) schedule(static) reduction(+ : aeps_cells, aeps_viol)
  for (std::int64_t i = 0; i < total; ++i) {
    if (!aeps[i]) continue;
    ++aeps_cells;
    if (prev_t[i] >= 2) ++aeps_viol;
  }
  rec.aeps_cells = aeps_cells;
  rec.aeps_t_violations = aeps_viol;

  // sheet membership: the depth-n preimages of the window cube [p-Ld, p+Ld]
  // are indexed by an integer translate per axis
  std::vector<std::int64_t> word(static_cast<std::size_t>(total) * dim, 0);
  std::vector<std::uint8_t> eligible(total, 0);
#pragma omp parallel for if (par) schedule(static)
  for (std::int64_t i = 0; i < total; ++i) {
    if (!aeps[i]) continue;
    Pt y = st.center(i);
    bool ok = true;
    std::int64_t w[2] = {0, 0};
    for (int a = 0; a < dim; ++a) {
      double s = Lam_n * y[a] - (st.amb_.p[a] - Ld);
      double fk = std::floor(s);
      if (s - fk >= win) { ok = false; break; }
      // the sheet's ideal preimage box must sit inside Y
      const double box_lo = (fk + st.amb_.p[a] - Ld) / Lam_n;
      const double ylo = st.amb_.p[a] - c.delta;
      if (box_lo < ylo - 1e-9 || box_lo + win / Lam_n > ylo + 2.0 * c.delta + 1e-9) {
        ok = false;
        break;
      }
      w[a] = static_cast<std::int64_t>(fk);
    }
    if (!ok) continue;
    eligible[i] = 1;
    for (int a = 0; a < dim; ++a) word[i * dim + a] = w[a];
  }

  std::int64_t conflicts = 0;
#pragma omp parallel for if (par) schedule(static) reduction(+ : conflicts)
  for (std::int64_t i = 0; i < total; ++i) {
    if (!eligible[i]) continue;
    const int i0 = static_cast<int>(i % nc);
    const int i1 = static_cast<int>(i / nc);
    for (int a = 0; a < dim; ++a) {
      const int ia = a == 0 ? i0 : i1;
      if (ia + 1 >= nc) continue;
      const std::int64_t jn = a == 0 ? i + 1 : i + nc;
      if (!eligible[jn]) continue;
      for (int b = 0; b < dim; ++b)
        if (word[i * dim + b] != word[jn * dim + b]) { ++conflicts; break; }
    }
  }
  rec.sheet_conflicts = conflicts;

  // group eligible cells by sheet, deterministically
  std::unordered_map<std::uint64_t, std::vector<std::int64_t>> groups;
  for (std::int64_t i = 0; i < total; ++i) {
    if (!eligible[i]) continue;
    std::uint64_t key = static_cast<std::uint64_t>(word[i * dim] + (1ll << 40));
    if (dim == 2)
      key = (key << 22) | static_cast<std::uint64_t>(word[i * dim + 1] + (1ll << 20));
    groups[key].push_back(i);
  }
  std::vector<std::uint64_t> keys;
  keys.reserve(groups.size());
  for (const auto& kv : groups) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());

  struct Accepted {
    std::int64_t K[2];
    std::int64_t i_lo[2], i_hi[2];
    int comp_id;
  };
  std::vector<Accepted> accepted;
  std::vector<std::uint8_t> mark(total, 0);  // scratch for piece extraction
  const double ylo0 = st.amb_.p[0] - c.delta;
  const double ylo1 = dim == 2 ? st.amb_.p[1] - c.delta : 0.0;

  for (std::uint64_t key : keys) {
    const auto& cells = groups[key];
    const std::int64_t K0 = word[cells.front() * dim];
    const std::int64_t K1 = dim == 2 ? word[cells.front() * dim + 1] : 0;

    // cell rectangle of the sheet's ideal preimage box, at least two cells
    // per axis; the in-window test already keeps eligible cells inside it
    bool ok = true;
    std::int64_t lo_i[2] = {0, 0}, hi_i[2] = {0, 0};
    std::int64_t expect = 1;
    for (int a = 0; a < dim && ok; ++a) {
      const double ylo = a == 0 ? ylo0 : ylo1;
      const std::int64_t K = a == 0 ? K0 : K1;
      const double box_lo = (K + st.amb_.p[a] - Ld) / Lam_n;
      const double box_hi = box_lo + win / Lam_n;
      std::int64_t ilo = static_cast<std::int64_t>(
          std::floor((box_lo - ylo) / h + 0.5));
      ilo = std::clamp<std::int64_t>(ilo, 0, nc - 1);
      while (ilo > 0 && ylo + (ilo - 0.5) * h >= box_lo) --ilo;
      while (ilo + 1 < nc && ylo + (ilo + 0.5) * h < box_lo) ++ilo;
      std::int64_t ihi = static_cast<std::int64_t>(
          std::floor((box_hi - ylo) / h - 0.5));
      ihi = std::clamp<std::int64_t>(ihi, 0, nc - 1);
      while (ihi + 1 < nc && ylo + (ihi + 1.5) * h < box_hi) ++ihi;
      while (ihi > 0 && ylo + (ihi + 0.5) * h >= box_hi) --ihi;
      if (ihi - ilo + 1 < 2) { ok = false; break; }
      // the finished core must hold at least one cell center per axis, or
      // the grid cannot materialize the component it certifies
      bool core = false;
      for (std::int64_t i = ilo; i <= ihi && !core; ++i) {
        double u = Lam_n * (ylo + (i + 0.5) * h) - (st.amb_.p[a] - Ld) - K;
        core = std::abs(u - Ld) < c.delta;
      }
      if (!core) { ok = false; break; }
      lo_i[a] = ilo;
      hi_i[a] = ihi;
      expect *= ihi - ilo + 1;
    }
    bool inside = ok;
    if (ok) {
      for (std::int64_t i : cells) {
        const std::int64_t i0 = i % nc;
        const std::int64_t i1 = i / nc;
        if (i0 < lo_i[0] || i0 > hi_i[0] ||
            (dim == 2 && (i1 < lo_i[1] || i1 > hi_i[1]))) {
          inside = false;
          break;
        }
      }
    }

    if (ok && inside && static_cast<std::int64_t>(cells.size()) == expect) {
      Accepted acc;
      acc.K[0] = K0;
      acc.K[1] = K1;
      for (int a = 0; a < 2; ++a) { acc.i_lo[a] = lo_i[a]; acc.i_hi[a] = hi_i[a]; }
      acc.comp_id = static_cast<int>(st.components.size()) +
                    static_cast<int>(accepted.size());
      accepted.push_back(acc);
      continue;
    }

    // holes or resolution failure: count the connected pieces as rejected
    // candidates so ambiguity is flagged, never silently resolved
    for (std::int64_t i : cells) mark[i] = 1;
    std::vector<std::uint8_t> seen(cells.size(), 0);
    std::unordered_map<std::int64_t, std::size_t> pos;
    pos.reserve(cells.size() * 2);
    for (std::size_t k = 0; k < cells.size(); ++k) pos[cells[k]] = k;
    for (std::size_t start = 0; start < cells.size(); ++start) {
      if (seen[start]) continue;
      ++rec.candidates_rejected;
      std::vector<std::int64_t> stack{cells[start]};
      seen[start] = 1;
      while (!stack.empty()) {
        std::int64_t i = stack.back();
        stack.pop_back();
        const int i0 = static_cast<int>(i % nc);
        const int i1 = static_cast<int>(i / nc);
        const std::int64_t nbr[4] = {i0 > 0 ? i - 1 : -1, i0 + 1 < nc ? i + 1 : -1,
                                     dim == 2 && i1 > 0 ? i - nc : -1,
                                     dim == 2 && i1 + 1 < nc ? i + nc : -1};
        for (int d = 0; d < 2 * dim; ++d) {
          std::int64_t j = nbr[d];
          if (j < 0 || !mark[j]) continue;
          auto it = pos.find(j);
          if (it == pos.end() || seen[it->second]) continue;
          seen[it->second] = 1;
          stack.push_back(j);
        }
      }
    }
    for (std::int64_t i : cells) mark[i] = 0;
  }

  // carve each accepted component: finish the core, refresh collars on the
  // annuli, and count the discipline violations
  std::vector<std::uint8_t> touched(total, 0);
  std::int64_t AR = 0, BR = 0, AB = 0, BB_hit = 0;
  for (const Accepted& acc : accepted) {
    ComponentInfo info;
    info.id = acc.comp_id;
    info.birth_n = n;
    info.sheet = {acc.K[0], acc.K[1]};
    const std::int64_t j_lo = dim == 2 ? acc.i_lo[1] : 0;
    const std::int64_t j_hi = dim == 2 ? acc.i_hi[1] : 0;
    for (std::int64_t i1 = j_lo; i1 <= j_hi; ++i1) {
      for (std::int64_t i0 = acc.i_lo[0]; i0 <= acc.i_hi[0]; ++i0) {
        const std::int64_t i = dim == 2 ? i1 * nc + i0 : i0;
        Pt y = st.center(i);
        double dist = 0.0;
        for (int a = 0; a < dim; ++a) {
          double u = Lam_n * y[a] - (st.amb_.p[a] - Ld) - acc.K[a];
          dist = std::max(dist, std::abs(u - Ld));
        }
        const bool was_B = prev_label[i] == PartitionState::kLabelB;
        if (dist < c.delta) {
          if (was_B) { ++BR; ++rec.ulm1_B_violations; }
          else ++AR;
          st.label[i] = PartitionState::kLabelFinished;
          st.t[i] = 0;
          st.collar[i] = -1;
          st.ret[i] = n;
          st.comp[i] = acc.comp_id;
          touched[i] = 1;
          ++info.cells;
          continue;
        }
        if (dist < 2.0 * c.delta) {
          int k = annulus_index_from_dist(dist, c);
          if (k >= 1) {
            if (was_B) {
              ++BB_hit;
              ++rec.ulm1_B_violations;
              ++rec.collar_overlap_violations;
            } else {
              ++AB;
            }
            st.label[i] = PartitionState::kLabelB;
            st.t[i] = k;
            st.collar[i] = acc.comp_id;
            touched[i] = 1;
            continue;
          }
        }
        if (dist < (c.L - 1.0) * c.delta && was_B) ++rec.ulm1_B_violations;
      }
    }
    st.components.push_back(info);
  }
  rec.components_accepted = static_cast<int>(accepted.size());

  // remainder rule: A stays, collars age by one
  std::int64_t AA = 0, BA = 0, BB_dec = 0;
#pragma omp parallel for if (par) schedule(static) reduction(+ : AA, BA, BB_dec)
  for (std::int64_t i = 0; i < total; ++i) {
    if (touched[i] || prev_label[i] == PartitionState::kLabelFinished) continue;
    if (prev_label[i] == PartitionState::kLabelA) {
      ++AA;
      continue;
    }
    const std::int32_t tn = prev_t[i] - 1;
    if (tn <= 0) {
      st.label[i] = PartitionState::kLabelA;
      st.t[i] = 0;
      st.collar[i] = -1;
      ++BA;
    } else {
      st.t[i] = tn;
      ++BB_dec;
    }
  }

  rec.leb_AA = AA * st.vol_;
  rec.leb_AB = AB * st.vol_;
  rec.leb_AR = AR * st.vol_;
  rec.leb_BA = BA * st.vol_;
  rec.leb_BB = (BB_hit + BB_dec) * st.vol_;
  rec.leb_BR = BR * st.vol_;
  rec.leb_A = (AA + BA) * st.vol_;
  rec.leb_B = (AB + BB_hit + BB_dec) * st.vol_;
  rec.leb_R = (AR + BR) * st.vol_;
  rec.leb_R_gt = rec.leb_A + rec.leb_B;

  int t_max = 0;
#pragma omp parallel for if (par) schedule(static) reduction(max : t_max)
  for (std::int64_t i = 0; i < total; ++i)
    t_max = std::max(t_max, static_cast<int>(st.t[i]));
  rec.t_max = t_max;

  st.records.push_back(rec);
  st.n_ = n;
}

InducingResult build_inducing(const AmbientSystem& amb, const InducingConstants& c,
                              int n_max, int q, Exec exec) {
  require(n_max >= 1, "n_max must be at least 1");
  require(n_max <= 32, "n_max exceeds the exact-arithmetic range");
  InducingResult res{PartitionState(amb, c, q), {}};
  PartitionState& st = res.state;
  res.tails.push_back(
      {0, st.cell_count() * st.cell_volume(), st.cell_count() * st.cell_volume(),
       0.0, 0.0, 0});
  for (int n = 1; n <= n_max; ++n) {
    advance_generation(st, exec);
    const GenerationRecord& rec = st.records.back();
    TailRow row;
    row.n = n;
    row.leb_R_gt = rec.leb_R_gt;
    row.leb_A = rec.leb_A;
    row.leb_B = rec.leb_B;
    row.leb_R = rec.leb_R;
    row.finished_cells = std::llround(rec.leb_R / st.cell_volume());
    res.tails.push_back(row);
  }
  return res;
}

CollarCensus collar_census(const PartitionState& st) {
  CollarCensus out;
  std::unordered_map<int, CollarInfo> by_comp;
  bool orphan = false;
  for (std::int64_t i = 0; i < st.cell_count(); ++i) {
    if (st.label[i] != PartitionState::kLabelB) continue;
    ++out.b_cells;
    const int id = st.collar[i];
    if (id < 0) { orphan = true; continue; }
    CollarInfo& ci = by_comp[id];
    ci.comp_id = id;
    ++ci.cells;
    if (st.t[i] == 1) { ++ci.outer_ring_cells; ++out.t1_cells; }
  }
  for (auto& [id, ci] : by_comp) {
    if (id >= 0 && id < static_cast<int>(st.components.size()))
      ci.birth_n = st.components[id].birth_n;
    out.collars.push_back(ci);
  }
  std::sort(out.collars.begin(), out.collars.end(),
            [](const CollarInfo& a, const CollarInfo& b) { return a.comp_id < b.comp_id; });
  std::int64_t ring_sum = 0;
  for (const auto& ci : out.collars) ring_sum += ci.outer_ring_cells;
  out.outer_rings_match = !orphan && ring_sum == out.t1_cells;
  for (const auto& rec : st.records)
    out.disjointness_violations += rec.collar_overlap_violations;
  out.pass = out.outer_rings_match && out.disjointness_violations == 0;
  return out;
}

RatioReport ratio_report(const InducingResult& res, double slack) {
  RatioReport out;
  const InducingConstants& c = res.state.constants();
  out.a1 = c.a1;
  out.a0 = c.a0;
  out.slack = slack;
  out.all_ok = true;
  for (const auto& rec : res.state.records) {
    RatioRow row;
    row.n = rec.n;
    row.a_na = rec.leb_B_prev <= 0.0;
    row.ratio_a = row.a_na ? 0.0 : rec.leb_BA / rec.leb_B_prev;
    row.ratio_b = rec.leb_A_prev > 0.0 ? rec.leb_AB / rec.leb_A_prev : 0.0;
    row.ratio_c = rec.leb_A_prev > 0.0 ? rec.leb_AR / rec.leb_A_prev : 0.0;
    row.b_ok = row.ratio_b <= 0.25 + slack;
    row.c_ok = row.ratio_c <= 0.25 + slack;
    row.facts2_ok = rec.leb_B <= c.a0 * rec.leb_A + 1e-12;
    out.all_ok = out.all_ok && row.b_ok && row.c_ok && row.facts2_ok;
    out.rows.push_back(row);
  }
  return out;
}

TailFit tail_fit(const std::vector<TailRow>& tails, std::int64_t min_cells) {
  std::int64_t nonzero = 0;
  for (const auto& r : tails)
    if (r.leb_R_gt > 0.0) ++nonzero;
  require(nonzero >= 6, "tail table needs at least 6 nonzero entries");

  // fit over the longest contiguous run of generations that still resolve
  // components on the grid
  std::vector<std::uint8_t> elig(tails.size(), 0);
  for (std::size_t i = 0; i < tails.size(); ++i)
    elig[i] = tails[i].n >= 1 && tails[i].finished_cells > min_cells &&
              tails[i].leb_R_gt > 0.0;
  int best_lo = -1, best_len = 0;
  for (std::size_t i = 0; i < tails.size();) {
    if (!elig[i]) { ++i; continue; }
    std::size_t j = i;
    while (j < tails.size() && elig[j]) ++j;
    if (static_cast<int>(j - i) > best_len) {
      best_len = static_cast<int>(j - i);
      best_lo = static_cast<int>(i);
    }
    i = j;
  }
  require(best_len >= 2, "insufficient resolved generations for a tail fit");

  std::vector<double> xs, ys;
  for (int i = best_lo; i < best_lo + best_len; ++i) {
    xs.push_back(tails[i].n);
    ys.push_back(std::log(tails[i].leb_R_gt));
  }
  LineFit fit = fit_line(xs, ys);
  TailFit out;
  out.gamma_hat = std::exp(fit.slope);
  out.intercept = fit.intercept;
  out.r2 = fit.r2;
  out.n_lo = tails[best_lo].n;
  out.n_hi = tails[best_lo + best_len - 1].n;
  for (std::size_t i = 0; i < xs.size(); ++i)
    out.residuals.push_back(ys[i] - (fit.slope * xs[i] + fit.intercept));
  out.exponential = out.gamma_hat < 1.0 - 1e-9;
  return out;
}

TailFit tail_fit(const InducingResult& res, std::int64_t min_cells) {
  return tail_fit(res.tails, min_cells);
}

MarkovReport markov_check(const InducingResult& res, double coverage_min, Exec exec) {
  const PartitionState& st = res.state;
  const int dim = st.dim();
  const int nc = st.nc();
  const std::int64_t total = st.cell_count();
  const double h = st.cell_size();
  const InducingConstants& c = st.constants();
  const bool par = exec == Exec::Parallel;

  MarkovReport out;
  out.all_pass = true;
  std::vector<std::vector<std::int64_t>> cells_of(st.components.size());
  for (std::int64_t i = 0; i < total; ++i)
    if (st.comp[i] >= 0) cells_of[st.comp[i]].push_back(i);

  std::vector<std::uint8_t> covered(total, 0);
  std::vector<std::int64_t> center_cell(total, -1);
  std::vector<std::int64_t> touched;
  for (const ComponentInfo& info : st.components) {
    const auto& cells = cells_of[info.id];
    MarkovVerdict v;
    v.comp_id = info.id;
    v.birth_n = info.birth_n;
    if (cells.empty()) {
      out.verdicts.push_back(v);
      out.all_pass = false;
      continue;
    }
    const double Lam_n = std::pow(static_cast<double>(st.ambient().arity), info.birth_n);

    std::int64_t mn[2] = {total, total}, mx[2] = {-1, -1};
    for (std::int64_t i : cells) {
      for (int a = 0; a < dim; ++a) {
        const std::int64_t ia = a == 0 ? i % nc : i / nc;
        mn[a] = std::min(mn[a], ia);
        mx[a] = std::max(mx[a], ia);
      }
    }
    std::int64_t bbox = mx[0] - mn[0] + 1;
    if (dim == 2) bbox *= mx[1] - mn[1] + 1;
    // a component whose cells fill their bounding box covers a product of
    // per-axis intervals (consecutive cell images overlap once widened), so
    // the count is closed form; only a damaged label map needs the bitmap
    const bool is_rect = bbox == static_cast<std::int64_t>(cells.size());

    bool into = true;
    bool injective = true;
    std::int64_t g0lo = nc, g0hi = -1, g1lo = nc, g1hi = -1;

#pragma omp parallel for if (par && cells.size() > 64) schedule(static) \
    reduction(&& : into) reduction(min : g0lo, g1lo) reduction(max : g0hi, g1hi)
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const std::int64_t i = cells[ci];
      std::int64_t jlo[2] = {0, 0}, jhi[2] = {0, 0};
      for (int a = 0; a < dim; ++a) {
        const int ia = static_cast<int>(a == 0 ? i % nc : i / nc);
        const double ylo = st.ambient().p[a] - c.delta;
        const double cell_lo = ylo + ia * h;
        const double img_lo = Lam_n * cell_lo - info.sheet[a];
        const double img_hi = img_lo + Lam_n * h;
        if (img_lo < st.ambient().p[a] - c.delta0 - 1e-12 ||
            img_hi > st.ambient().p[a] + c.delta0 + 1e-12)
          into = into && false;
        // the grid core misses the true core by at most one cell per side, so
        // widen each image by the image of one cell before testing coverage
        jlo[a] = static_cast<std::int64_t>(
                     std::floor((img_lo - Lam_n * h - ylo) / h)) - 1;
        jhi[a] = static_cast<std::int64_t>(
                     std::floor((img_hi + Lam_n * h - ylo) / h)) + 1;
        jlo[a] = std::max<std::int64_t>(jlo[a], 0);
        jhi[a] = std::min<std::int64_t>(jhi[a], nc - 1);
      }
      if (jlo[0] <= jhi[0]) {
        g0lo = std::min(g0lo, jlo[0]);
        g0hi = std::max(g0hi, jhi[0]);
      }
      if (dim == 2 && jlo[1] <= jhi[1]) {
        g1lo = std::min(g1lo, jlo[1]);
        g1hi = std::max(g1hi, jhi[1]);
      }
      if (is_rect) continue;
      if (jlo[0] > jhi[0] || (dim == 2 && jlo[1] > jhi[1])) continue;
      const std::int64_t j1lo = dim == 2 ? jlo[1] : 0;
      const std::int64_t j1hi = dim == 2 ? jhi[1] : 0;
      for (std::int64_t j1 = j1lo; j1 <= j1hi; ++j1)
        for (std::int64_t j0 = jlo[0]; j0 <= jhi[0]; ++j0)
          covered[dim == 2 ? j1 * nc + j0 : j0] = 1;
    }

    std::int64_t ncov = 0;
    if (g0hi >= g0lo && (dim == 1 || g1hi >= g1lo)) {
      if (is_rect) {
        ncov = (g0hi - g0lo + 1) * (dim == 2 ? g1hi - g1lo + 1 : 1);
      } else {
        const std::int64_t r1lo = dim == 2 ? g1lo : 0;
        const std::int64_t r1hi = dim == 2 ? g1hi : 0;
        for (std::int64_t j1 = r1lo; j1 <= r1hi; ++j1) {
          std::uint8_t* row = covered.data() + (dim == 2 ? j1 * nc : 0);
          for (std::int64_t j0 = g0lo; j0 <= g0hi; ++j0) {
            ncov += row[j0];
            row[j0] = 0;
          }
        }
      }
    }
    v.coverage = static_cast<double>(ncov) / total;
    v.onto = v.coverage >= coverage_min;
    v.into = into;

    touched.clear();
    for (std::int64_t i : cells) {
      Pt y = st.center(i);
      std::int64_t j = 0;
      bool inside = true;
      for (int a = dim - 1; a >= 0; --a) {
        const double img = Lam_n * y[a] - info.sheet[a];
        const double ylo = st.ambient().p[a] - c.delta;
        const std::int64_t ja = static_cast<std::int64_t>(std::floor((img - ylo) / h));
        if (ja < 0 || ja >= nc) { inside = false; break; }
        j = j * nc + ja;
      }
      if (!inside) continue;
      if (center_cell[j] >= 0) {
        const std::int64_t o = center_cell[j];
        bool adjacent = true;
        for (int a = 0; a < dim; ++a) {
          const std::int64_t ia = a == 0 ? i % nc : i / nc;
          const std::int64_t oa = a == 0 ? o % nc : o / nc;
          if (std::llabs(ia - oa) > 1) adjacent = false;
        }
        if (!adjacent) injective = false;
      } else {
        center_cell[j] = i;
        touched.push_back(j);
      }
    }
    for (std::int64_t j : touched) center_cell[j] = -1;
    v.injective = injective;
    out.all_pass = out.all_pass && v.onto && v.into && v.injective;
    out.verdicts.push_back(v);
  }
  return out;
}

KeyfactReport keyfact_report(const InducingResult& res) {
  KeyfactReport out;
  const int N = res.state.constants().N;
  const int n_max = res.state.generation();
  for (int n = 1; n + N <= n_max; ++n) {
    KeyfactRow row;
    row.n = n;
    for (int i = 0; i <= N; ++i) row.leb_window += res.tails[n + i].leb_R;
    row.leb_A_prev = res.state.records[n - 1].leb_A_prev;
    row.ratio = row.leb_A_prev > 0.0 ? row.leb_window / row.leb_A_prev : 0.0;
    out.rows.push_back(row);
  }
  if (!out.rows.empty()) {
    out.c1_hat = out.rows.front().ratio;
    for (const auto& r : out.rows) out.c1_hat = std::min(out.c1_hat, r.ratio);
    out.pass = out.c1_hat > 0.0;
  }
  return out;
}

} // namespace mixlab::inducing
