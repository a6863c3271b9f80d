#include "mixlab/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mixlab::models {

using std::numbers::pi;

// ---------------------------------------------------------------- branches

BranchFamily BranchFamily::affine_grid(int dim, int k) {
  require(dim == 1 || dim == 2, "branch family dimension must be 1 or 2");
  require(k >= 2, "affine grid needs arity >= 2");
  BranchFamily f;
  f.kind_ = Kind::AffineGrid;
  f.dim_ = dim;
  f.k_ = k;
  return f;
}

BranchFamily BranchFamily::gauss() {
  BranchFamily f;
  f.kind_ = Kind::Gauss;
  f.dim_ = 1;
  return f;
}

BranchFamily BranchFamily::custom(int dim, std::vector<BranchSpec> specs) {
  require(dim == 1 || dim == 2, "branch family dimension must be 1 or 2");
  require(!specs.empty(), "custom family needs at least one branch");
  BranchFamily f;
  f.kind_ = Kind::Custom;
  f.dim_ = dim;
  f.specs_ = std::move(specs);
  return f;
}

int BranchFamily::count() const {
  switch (kind_) {
    case Kind::AffineGrid: return dim_ == 1 ? k_ : k_ * k_;
    case Kind::Gauss: return gauss_cap_;
    case Kind::Custom: return static_cast<int>(specs_.size());
  }
  return 0;
}

BranchEval BranchFamily::eval(int id, const Pt& y) const {
  BranchEval e;
  switch (kind_) {
    case Kind::AffineGrid: {
      const double inv = 1.0 / k_;
      if (dim_ == 1) {
        require(id >= 0 && id < k_, "branch id out of range");
        e.point = pt1((y[0] + id) * inv);
        e.deriv = {inv, 1.0};
        e.log_abs_det = -std::log(static_cast<double>(k_));
      } else {
        require(id >= 0 && id < k_ * k_, "branch id out of range");
        const int i0 = id % k_, i1 = id / k_;
        e.point = pt2((y[0] + i0) * inv, (y[1] + i1) * inv);
        e.deriv = {inv, inv};
        e.log_abs_det = -2.0 * std::log(static_cast<double>(k_));
      }
      return e;
    }
    case Kind::Gauss: {
      require(id >= 0, "branch id out of range");
      const double n = static_cast<double>(id + 1);
      const double den = n + y[0];
      e.point = pt1(1.0 / den);
      e.deriv = {-1.0 / (den * den), 1.0};
      e.log_abs_det = -2.0 * std::log(den);
      return e;
    }
    case Kind::Custom: {
      require(id >= 0 && id < static_cast<int>(specs_.size()), "branch id out of range");
      const BranchSpec& s = specs_[static_cast<std::size_t>(id)];
      if (s.kind == BranchSpec::Kind::Affine1D) {
        e.point = pt1(s.a + s.b * y[0]);
        e.deriv = {s.b, 1.0};
        e.log_abs_det = std::log(std::abs(s.b));
      } else if (s.kind == BranchSpec::Kind::Mobius1D) {
        const double den = s.c + s.d * y[0];
        e.point = pt1((s.a + s.b * y[0]) / den);
        const double det = (s.b * s.c - s.a * s.d) / (den * den);
        e.deriv = {det, 1.0};
        e.log_abs_det = std::log(std::abs(det));
      } else {
        e.point = pt2(s.a + s.b * y[0], s.c + s.d * y[1]);
        e.deriv = {s.b, s.d};
        e.log_abs_det = std::log(std::abs(s.b)) + std::log(std::abs(s.d));
      }
      return e;
    }
  }
  return e;
}

BranchEval BranchFamily::eval_word(std::span<const int> word, const Pt& y) const {
  BranchEval acc;
  acc.point = y;
  for (std::size_t j = word.size(); j-- > 0;) {
    const BranchEval step = eval(word[j], acc.point);
    acc.point = step.point;
    acc.deriv[0] *= step.deriv[0];
    acc.deriv[1] *= step.deriv[1];
    acc.log_abs_det += step.log_abs_det;
  }
  return acc;
}

void BranchFamily::range(int id, Pt& lo, Pt& hi) const {
  switch (kind_) {
    case Kind::AffineGrid: {
      const double inv = 1.0 / k_;
      if (dim_ == 1) {
        lo = pt1(id * inv);
        hi = pt1((id + 1) * inv);
      } else {
        const int i0 = id % k_, i1 = id / k_;
        lo = pt2(i0 * inv, i1 * inv);
        hi = pt2((i0 + 1) * inv, (i1 + 1) * inv);
      }
      return;
    }
    case Kind::Gauss: {
      const double n = static_cast<double>(id + 1);
      lo = pt1(1.0 / (n + 1.0));
      hi = pt1(1.0 / n);
      return;
    }
    case Kind::Custom: {
      const BranchEval a = eval(id, dim_ == 1 ? pt1(0.0) : pt2(0.0, 0.0));
      const BranchEval b = eval(id, dim_ == 1 ? pt1(1.0) : pt2(1.0, 1.0));
      for (int d = 0; d < dim_; ++d) {
        lo[d] = std::min(a.point[d], b.point[d]);
        hi[d] = std::max(a.point[d], b.point[d]);
      }
      return;
    }
  }
}

Pt BranchFamily::forward(const Pt& y) const {
  switch (kind_) {
    case Kind::AffineGrid: {
      Pt out;
      for (int d = 0; d < dim_; ++d) {
        double v = y[d] * k_;
        v -= std::floor(v);
        out[d] = v;
      }
      return out;
    }
    case Kind::Gauss: {
      require(y[0] > 0.0, "gauss forward map needs y > 0");
      const double inv = 1.0 / y[0];
      return pt1(inv - std::floor(inv));
    }
    case Kind::Custom: {
      const int id = branch_at(y);
      const BranchSpec& s = specs_[static_cast<std::size_t>(id)];
      if (s.kind == BranchSpec::Kind::Affine1D) return pt1((y[0] - s.a) / s.b);
      if (s.kind == BranchSpec::Kind::Mobius1D)
        return pt1((y[0] * s.c - s.a) / (s.b - y[0] * s.d));
      return pt2((y[0] - s.a) / s.b, (y[1] - s.c) / s.d);
    }
  }
  return y;
}

int BranchFamily::branch_at(const Pt& y) const {
  switch (kind_) {
    case Kind::AffineGrid: {
      int id = 0, stride = 1;
      for (int d = 0; d < dim_; ++d) {
        int i = static_cast<int>(std::floor(y[d] * k_));
        i = std::clamp(i, 0, k_ - 1);
        id += i * stride;
        stride *= k_;
      }
      return id;
    }
    case Kind::Gauss: {
      require(y[0] > 0.0, "gauss branch lookup needs y > 0");
      const int n = static_cast<int>(std::floor(1.0 / y[0]));
      return std::max(n, 1) - 1;
    }
    case Kind::Custom: {
      Pt lo, hi;
      for (int id = 0; id < count(); ++id) {
        range(id, lo, hi);
        bool inside = true;
        for (int d = 0; d < dim_; ++d)
          if (y[d] < lo[d] || y[d] >= hi[d]) inside = false;
        if (inside) return id;
      }
      // fall back to the nearest range; callers treat boundary points as
      // belonging to the lower branch
      int best = 0;
      double best_gap = 1e300;
      for (int id = 0; id < count(); ++id) {
        range(id, lo, hi);
        double gap = 0.0;
        for (int d = 0; d < dim_; ++d)
          gap += std::max({lo[d] - y[d], y[d] - hi[d], 0.0});
        if (gap < best_gap) { best_gap = gap; best = id; }
      }
      return best;
    }
  }
  return 0;
}

double BranchFamily::deriv_sup(int id) const {
  switch (kind_) {
    case Kind::AffineGrid: return 1.0 / k_;
    case Kind::Gauss: {
      const double n = static_cast<double>(id + 1);
      return 1.0 / (n * n);
    }
    case Kind::Custom: {
      const BranchSpec& s = specs_[static_cast<std::size_t>(id)];
      if (s.kind == BranchSpec::Kind::Affine1D) return std::abs(s.b);
      if (s.kind == BranchSpec::Kind::Mobius1D) {
        const double det = std::abs(s.b * s.c - s.a * s.d);
        const double d0 = std::abs(s.c), d1 = std::abs(s.c + s.d);
        return det / std::min(d0 * d0, d1 * d1);
      }
      return std::max(std::abs(s.b), std::abs(s.d));
    }
  }
  return 0.0;
}

// -------------------------------------------------------------------- roof

double RoofFunction::eval(const Pt& y, int dim) const {
  double v = constant;
  for (int d = 0; d < dim; ++d) {
    double p = 1.0;
    for (double c : poly[static_cast<std::size_t>(d)]) {
      p *= y[d];
      v += c * p;
    }
    if (log_coeff[static_cast<std::size_t>(d)] != 0.0)
      v += log_coeff[static_cast<std::size_t>(d)] * std::log(y[d]);
  }
  for (const TrigTerm& t : trig) {
    const double arg = 2.0 * pi * t.freq * y[t.axis];
    v += t.cos_coeff * std::cos(arg) + t.sin_coeff * std::sin(arg);
  }
  return v;
}

double RoofFunction::partial(const Pt& y, int dim, int axis) const {
  require(axis >= 0 && axis < dim, "roof partial: bad axis");
  double v = 0.0;
  double p = 1.0;
  int k = 1;
  for (double c : poly[static_cast<std::size_t>(axis)]) {
    v += c * k * p;
    p *= y[axis];
    ++k;
  }
  if (log_coeff[static_cast<std::size_t>(axis)] != 0.0)
    v += log_coeff[static_cast<std::size_t>(axis)] / y[axis];
  for (const TrigTerm& t : trig) {
    if (t.axis != axis) continue;
    const double w = 2.0 * pi * t.freq;
    const double arg = w * y[axis];
    v += -t.cos_coeff * w * std::sin(arg) + t.sin_coeff * w * std::cos(arg);
  }
  return v;
}

std::array<double, 2> SkewFactor::eval(const Pt& y, const std::array<double, 2>& z) const {
  const double arg = 2.0 * pi * y[0];
  return {rate * z[0] + amp * std::cos(arg), rate * z[1] + amp * std::sin(arg)};
}

namespace {

double roof_extreme(const ModelSystem& m, bool want_min) {
  // Sampled extreme over the closed domain; log singularities at 0 are
  // skipped (they diverge to +inf and never attain a minimum).
  const int n = m.dim == 1 ? 65536 : 512;
  double best = want_min ? 1e300 : -1e300;
  const bool has_log = m.roof.has_log();
  auto consider = [&](const Pt& y) {
    if (has_log && (y[0] <= 0.0 || (m.dim > 1 && y[1] <= 0.0))) return;
    const double v = m.roof.eval(y, m.dim);
    best = want_min ? std::min(best, v) : std::max(best, v);
  };
  if (m.dim == 1) {
    for (int i = 0; i <= n; ++i) consider(pt1(static_cast<double>(i) / n));
  } else {
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j)
        consider(pt2(static_cast<double>(i) / n, static_cast<double>(j) / n));
  }
  return best;
}

} // namespace

double ModelSystem::roof_min() const { return roof_extreme(*this, true); }

double ModelSystem::roof_max() const {
  if (roof.log_coeff[0] < 0.0 || roof.log_coeff[1] < 0.0) return HUGE_VAL;
  return roof_extreme(*this, false);
}

// ---------------------------------------------------------------- catalog

std::vector<std::string> list_models() {
  return {"doubling-quadratic", "doubling-constant", "solenoid-skew", "gauss", "planar-triple"};
}

ModelSystem get_model(const std::string& id) {
  ModelSystem m;
  m.id = id;
  if (id == "doubling-quadratic" || id == "doubling-constant" || id == "solenoid-skew") {
    m.dim = 1;
    m.branches = BranchFamily::affine_grid(1, 2);
    m.rho0 = 0.5;
    m.stored_C1 = 1.0;
    m.roof.constant = 2.0;
    if (id != "doubling-constant") m.roof.poly[0] = {1.0, -1.0};  // 2 + y(1-y)
    if (id == "solenoid-skew") m.skew = SkewFactor{0.25, 0.25, 2};
    m.summary = (id == "doubling-constant")
                    ? "angle doubling with constant roof 2"
                    : (id == "solenoid-skew")
                          ? "angle doubling, quadratic roof, contracting planar fiber"
                          : "angle doubling with roof 2 + y(1-y)";
    return m;
  }
  if (id == "gauss") {
    m.dim = 1;
    m.branches = BranchFamily::gauss();
    m.rho0 = 0.5;
    m.stored_C1 = 4.0;
    m.roof.constant = 2.0;
    m.roof.log_coeff[0] = -1.0;  // 2 - log y
    m.summary = "continued-fraction map, countable branches, roof 2 - log y";
    return m;
  }
  if (id == "planar-triple") {
    m.dim = 2;
    m.branches = BranchFamily::affine_grid(2, 3);
    m.rho0 = 1.0 / 3.0;
    m.stored_C1 = 1.0;
    m.roof.constant = 2.0;
    m.roof.poly[0] = {1.0, -1.0};  // 2 + y1(1-y1)
    m.summary = "coordinatewise tripling on the unit square, quadratic roof";
    return m;
  }
  throw check_error("unknown model id '" + id + "'");
}

// ------------------------------------------------------------- custom load

ModelSystem load_custom_model(const toml::Document& doc) {
  const toml::Table& mt = doc.table("model");
  ModelSystem m;
  m.id = mt.str("id", "custom");
  m.dim = static_cast<int>(mt.num("dim", 1));
  require(m.dim == 1 || m.dim == 2, "custom model: dim must be 1 or 2");
  m.alpha = mt.num("alpha", 1.0);
  require(m.alpha > 0.0 && m.alpha <= 1.0, "custom model: alpha must lie in (0,1]");
  m.summary = mt.str("summary", "custom model");

  auto it = doc.table_arrays.find("branch");
  require(it != doc.table_arrays.end() && !it->second.empty(),
          "custom model: need at least one [[branch]]");
  std::vector<BranchSpec> specs;
  for (const toml::Table& bt : it->second) {
    BranchSpec s;
    const std::string kind = bt.str("kind", "affine");
    if (kind == "affine" && m.dim == 1) {
      s.kind = BranchSpec::Kind::Affine1D;
      s.a = bt.num_required("a");
      s.b = bt.num_required("b");
    } else if (kind == "mobius") {
      require(m.dim == 1, "custom model: mobius branches are 1D");
      s.kind = BranchSpec::Kind::Mobius1D;
      s.a = bt.num_required("a");
      s.b = bt.num_required("b");
      s.c = bt.num_required("c");
      s.d = bt.num_required("d");
      require(std::abs(s.b * s.c - s.a * s.d) > 1e-14, "custom model: degenerate mobius branch");
    } else if (kind == "affine" && m.dim == 2) {
      s.kind = BranchSpec::Kind::Affine2D;
      s.a = bt.num_required("a");
      s.b = bt.num_required("b");
      s.c = bt.num_required("c");
      s.d = bt.num_required("d");
    } else {
      throw check_error("custom model: unknown branch kind '" + kind + "'");
    }
    specs.push_back(s);
  }
  m.branches = BranchFamily::custom(m.dim, specs);

  if (doc.has_table("roof")) {
    const toml::Table& rt = doc.table("roof");
    m.roof.constant = rt.num("constant", 0.0);
    m.roof.poly[0] = rt.nums("poly");
    m.roof.poly[1] = rt.nums("poly2");
    std::vector<double> lg = rt.nums("log");
    if (lg.size() > 0) m.roof.log_coeff[0] = lg[0];
    if (lg.size() > 1) m.roof.log_coeff[1] = lg[1];
  }
  if (auto tt = doc.table_arrays.find("trig"); tt != doc.table_arrays.end()) {
    for (const toml::Table& t : tt->second) {
      TrigTerm term;
      term.axis = static_cast<int>(t.num("axis", 0));
      require(term.axis >= 0 && term.axis < m.dim, "custom model: trig axis out of range");
      term.freq = static_cast<int>(t.num("freq", 1));
      require(term.freq >= 1, "custom model: trig freq must be >= 1");
      term.cos_coeff = t.num("cos", 0.0);
      term.sin_coeff = t.num("sin", 0.0);
      m.roof.trig.push_back(term);
    }
  }

  if (doc.has_table("skew")) {
    const toml::Table& st = doc.table("skew");
    SkewFactor sk;
    sk.rate = st.num("rate", 0.25);
    sk.amp = st.num("amp", 0.25);
    require(sk.rate > 0.0 && sk.rate < 1.0, "custom model: skew rate must lie in (0,1)");
    require(std::abs(sk.amp) + sk.rate <= 1.0 + 1e-12,
            "custom model: skew must map the fiber into itself");
    m.skew = sk;
  }

  // validity: branches map into the domain, contract (at worst after two
  // steps, as for the continued-fraction head branch), and their ranges are
  // pairwise disjoint and tile the domain
  double rho1 = 0.0;
  const int cnt = m.branches.count();
  std::vector<std::pair<double, double>> ranges1d;
  double vol = 0.0;
  for (int id = 0; id < cnt; ++id) {
    Pt lo, hi;
    m.branches.range(id, lo, hi);
    double cell_vol = 1.0;
    for (int d = 0; d < m.dim; ++d) {
      require(lo[d] >= -1e-12 && hi[d] <= 1.0 + 1e-12,
              "custom model: branch range leaves the domain");
      cell_vol *= hi[d] - lo[d];
    }
    vol += cell_vol;
    if (m.dim == 1) ranges1d.emplace_back(lo[0], hi[0]);
    rho1 = std::max(rho1, m.branches.deriv_sup(id));
  }
  require(rho1 <= 1.0 + 1e-12, "custom model: branch derivative exceeds 1");
  double rho2 = 0.0;  // sampled two-step contraction
  for (int i = 0; i < cnt; ++i) {
    for (int j = 0; j < cnt; ++j) {
      const int w[] = {i, j};
      for (int t = 0; t <= 8; ++t) {
        Pt y;
        for (int d = 0; d < m.dim; ++d) y[d] = t / 8.0;
        const BranchEval e = m.branches.eval_word(w, y);
        rho2 = std::max({rho2, std::abs(e.deriv[0]),
                         m.dim > 1 ? std::abs(e.deriv[1]) : 0.0});
      }
    }
  }
  require(rho2 < 1.0 - 1e-9, "custom model: branches must contract within two steps");
  m.rho0 = mt.num("rho0", rho1 < 1.0 ? rho1 : std::sqrt(rho2));
  m.stored_C1 = mt.num("C1", 4.0);
  require(m.stored_C1 * m.rho0 + 1e-12 >= rho1 && m.stored_C1 * m.rho0 * m.rho0 + 1e-12 >= rho2,
          "custom model: stored C1, rho0 do not dominate the sampled derivatives");
  if (m.dim == 1) {
    std::sort(ranges1d.begin(), ranges1d.end());
    for (std::size_t i = 1; i < ranges1d.size(); ++i)
      require(ranges1d[i].first >= ranges1d[i - 1].second - 1e-12,
              "custom model: branch ranges overlap");
  }
  require(std::abs(vol - 1.0) <= 1e-6, "custom model: branch ranges do not tile the domain");
  require(m.roof_min() > 0.0, "custom model: roof must be strictly positive");
  return m;
}

ModelSystem load_custom_model_file(const std::string& path) {
  return load_custom_model(toml::parse_file(path));
}

// -------------------------------------------------------------- operations

BranchEval branch_eval(const ModelSystem& m, std::span<const int> word, const Pt& y) {
  return m.branches.eval_word(word, y);
}

double birkhoff_roof(const ModelSystem& m, std::span<const int> word, const Pt& y) {
  // r_n(h_w(y)) accumulated branchwise: the k-th orbit point of h_w(y) under
  // the forward map is the word with its first k letters stripped.
  double sum = 0.0;
  Pt p = y;
  for (std::size_t j = word.size(); j-- > 0;) {
    p = m.branches.eval(word[j], p).point;
  }
  // p = h_w(y); walk forward through the word
  for (std::size_t k = 0; k < word.size(); ++k) {
    sum += m.roof.eval(p, m.dim);
    p = m.branches.forward(p);
  }
  return sum;
}

std::array<double, 2> birkhoff_roof_gradient(const ModelSystem& m, std::span<const int> word,
                                             const Pt& y) {
  // d/dy sum_{k<n} r(h_{w[k:]}(y)): each suffix word is a branch composition
  // with diagonal derivative, so the chain rule stays coordinatewise.
  std::array<double, 2> g{0.0, 0.0};
  for (std::size_t k = 0; k < word.size(); ++k) {
    const std::span<const int> suffix = word.subspan(k);
    const BranchEval e = m.branches.eval_word(suffix, y);
    for (int d = 0; d < m.dim; ++d)
      g[static_cast<std::size_t>(d)] +=
          m.roof.partial(e.point, m.dim, d) * e.deriv[static_cast<std::size_t>(d)];
  }
  return g;
}

// ------------------------------------------------------------ verification

namespace {

std::vector<int> sample_word(const ModelSystem& m, int len, std::mt19937_64& rng) {
  std::vector<int> w(static_cast<std::size_t>(len));
  if (m.branches.kind() == BranchFamily::Kind::Gauss) {
    // draw branch indices with the natural weight ~ 1/n^2 via n = floor(1/U)
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int& c : w) {
      const double u = std::max(uni(rng), 1.0 / m.branches.count());
      c = std::min(static_cast<int>(std::floor(1.0 / u)), m.branches.count()) - 1;
    }
  } else {
    std::uniform_int_distribution<int> uni(0, m.branches.count() - 1);
    for (int& c : w) c = uni(rng);
  }
  return w;
}

} // namespace

GibbsMarkovReport verify_gibbs_markov(const ModelSystem& m, double eps, int max_word_len,
                                      std::uint64_t seed) {
  require(eps > 0.0 && eps < 1.0, "verify_gibbs_markov: eps must lie in (0,1)");
  require(max_word_len >= 2, "verify_gibbs_markov: need word length >= 2");
  GibbsMarkovReport rep;
  std::mt19937_64 rng = rng_stream(seed, 17);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  const int pairs_per_word = 24;
  const int words_per_len = 64;
  double worst_word_excess = 0.0;
  for (int len = 1; len <= max_word_len; ++len) {
    for (int t = 0; t < words_per_len; ++t) {
      const std::vector<int> w = sample_word(m, len, rng);
      double dmax = 0.0, logdet_lo = 1e300, logdet_hi = -1e300;
      for (int p = 0; p < pairs_per_word; ++p) {
        Pt y;
        for (int d = 0; d < m.dim; ++d) y[d] = uni(rng);
        const BranchEval e = m.branches.eval_word(w, y);
        dmax = std::max({dmax, std::abs(e.deriv[0]),
                         m.dim > 1 ? std::abs(e.deriv[1]) : 0.0});
        logdet_lo = std::min(logdet_lo, e.log_abs_det);
        logdet_hi = std::max(logdet_hi, e.log_abs_det);
      }
      rep.C1_hat = std::max(rep.C1_hat, std::exp(logdet_hi - logdet_lo));
      if (len >= 2)
        rep.rho0_hat = std::max(rep.rho0_hat, std::pow(dmax, 1.0 / len));
      worst_word_excess =
          std::max(worst_word_excess, dmax / (m.stored_C1 * std::pow(m.rho0, len)));
    }
  }
  rep.expansion_ok = worst_word_excess <= 1.0 + 1e-9;
  rep.distortion_ok = rep.C1_hat <= m.stored_C1 + 1e-9;

  // Hoelder seminorm of log|det Dh| per branch, dyadic pair sampling.
  const int probe_branches = std::min(m.branches.count(), 64);
  for (int id = 0; id < probe_branches; ++id) {
    for (int j = 2; j <= 12; ++j) {
      const double sep = std::pow(0.5, j);
      for (int t = 0; t < 8; ++t) {
        Pt y1, y2;
        for (int d = 0; d < m.dim; ++d) y1[d] = uni(rng) * (1.0 - sep);
        y2 = y1;
        y2[0] += sep;
        const double l1 = m.branches.eval(id, y1).log_abs_det;
        const double l2 = m.branches.eval(id, y2).log_abs_det;
        rep.logdet_alpha_hat =
            std::max(rep.logdet_alpha_hat, std::abs(l1 - l2) / std::pow(sep, m.alpha));
      }
    }
  }

  // Condition (iv): sum over branches of e^(eps*sup|r o h|) * sup|det Dh|.
  const int cnt = m.branches.count();
  double series = 0.0;
  for (int id = 0; id < cnt; ++id) {
    Pt lo, hi;
    m.branches.range(id, lo, hi);
    double sup_r = 0.0;
    for (int corner = 0; corner < (m.dim == 1 ? 2 : 4); ++corner) {
      Pt y;
      y[0] = (corner & 1) ? hi[0] : lo[0];
      if (m.dim > 1) y[1] = (corner & 2) ? hi[1] : lo[1];
      // avoid the log singularity at exactly zero
      for (int d = 0; d < m.dim; ++d) y[d] = std::clamp(y[d], 1e-300, 1.0);
      sup_r = std::max(sup_r, std::abs(m.roof.eval(y, m.dim)));
    }
    double sup_det = 1.0;
    if (m.dim == 1) {
      sup_det = m.branches.deriv_sup(id);
    } else {
      const BranchEval e = m.branches.eval(id, pt2(0.5, 0.5));
      sup_det = std::exp(e.log_abs_det);
    }
    series += std::exp(eps * sup_r) * sup_det;
  }
  rep.tail_series = series;
  if (m.branches.countable()) {
    // omitted branches n > cap: e^(eps*(log(n+1)+2)) / n^2 <= e^(2 eps) *
    // (2n)^eps * n^-2, integral comparison bound
    const double n0 = static_cast<double>(cnt);
    rep.tail_series_bound =
        std::exp(2.0 * eps) * std::pow(2.0, eps) * std::pow(n0, eps - 1.0) / (1.0 - eps);
  }
  rep.series_ok = std::isfinite(series);

  // Partition of the domain by branch ranges (sorted 1D sweep; the affine
  // grid tiles exactly by construction).
  if (m.dim == 1) {
    std::vector<std::pair<double, double>> rs;
    for (int id = 0; id < cnt; ++id) {
      Pt lo, hi;
      m.branches.range(id, lo, hi);
      rs.emplace_back(lo[0], hi[0]);
    }
    std::sort(rs.begin(), rs.end());
    double gap = rs.front().first;  // uncovered mass near 0
    for (std::size_t i = 1; i < rs.size(); ++i)
      gap = std::max(gap, rs[i].first - rs[i - 1].second);
    gap = std::max(gap, 1.0 - rs.back().second);
    rep.partition_gap = gap;
    rep.partition_ok = gap <= 1.0 / 4096.0;
  } else {
    double vol = 0.0;
    for (int id = 0; id < cnt; ++id) {
      Pt lo, hi;
      m.branches.range(id, lo, hi);
      vol += (hi[0] - lo[0]) * (hi[1] - lo[1]);
    }
    rep.partition_gap = std::abs(vol - 1.0);
    rep.partition_ok = rep.partition_gap <= 1e-9;
  }

  rep.roof_ok = m.roof_min() > 0.0;
  rep.pass = rep.expansion_ok && rep.distortion_ok && rep.series_ok && rep.partition_ok &&
             rep.roof_ok;
  return rep;
}

SkewContractionReport verify_skew_contraction(const ModelSystem& m, int samples,
                                              std::uint64_t seed) {
  require(m.skew.has_value(), "verify_skew_contraction: model has no skew factor");
  SkewContractionReport rep;
  std::mt19937_64 rng = rng_stream(seed, 23);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_real_distribution<double> uz(-1.0, 1.0);
  const SkewFactor& sk = *m.skew;
  const int max_n = 8;
  for (int t = 0; t < samples; ++t) {
    Pt y = pt1(uni(rng));
    std::array<double, 2> z1{uz(rng), uz(rng)};
    std::array<double, 2> z2{uz(rng), uz(rng)};
    double d0 = std::hypot(z1[0] - z2[0], z1[1] - z2[1]);
    if (d0 < 1e-12) continue;
    for (int n = 1; n <= max_n; ++n) {
      z1 = sk.eval(y, z1);
      z2 = sk.eval(y, z2);
      const double dn = std::hypot(z1[0] - z2[0], z1[1] - z2[1]);
      if (n == 1) rep.gamma0_hat = std::max(rep.gamma0_hat, dn / d0);
      rep.C_hat = std::max(rep.C_hat, dn / (d0 * std::pow(sk.rate, n)));
      y = m.branches.forward(y);
    }
  }
  rep.pass = rep.gamma0_hat <= sk.rate + 1e-12 && rep.C_hat <= 1.0 + 1e-9;
  return rep;
}

} // namespace mixlab::models
