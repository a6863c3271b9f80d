#include "mixlab/grid.hpp"

#include <algorithm>
#include <cmath>

namespace mixlab {

GridFunction::GridFunction(int dim, int n, cplx fill) : dim_(dim), n_(n) {
  require(dim == 1 || dim == 2, "grid dim must be 1 or 2");
  require(n >= 2, "grid needs at least 2 cells per axis");
  std::size_t total = static_cast<std::size_t>(n);
  if (dim == 2) total *= static_cast<std::size_t>(n);
  values_.assign(total, fill);
}

GridFunction GridFunction::sample(int dim, int n,
                                  const std::function<cplx(const Pt&)>& f) {
  GridFunction g(dim, n);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = f(g.point(i));
  return g;
}

Pt GridFunction::point(std::size_t i) const {
  double h = 1.0 / n_;
  if (dim_ == 1) return pt1((static_cast<double>(i) + 0.5) * h);
  std::size_t i1 = i / static_cast<std::size_t>(n_);
  std::size_t i0 = i % static_cast<std::size_t>(n_);
  return pt2((static_cast<double>(i0) + 0.5) * h, (static_cast<double>(i1) + 0.5) * h);
}

namespace {

// Index and weight for clamped linear interpolation along one axis.
inline void axis_weights(double y, int n, int& i_lo, double& w_hi) {
  double t = y * n - 0.5;
  if (t <= 0.0) {
    i_lo = 0;
    w_hi = 0.0;
  } else if (t >= n - 1.0) {
    i_lo = n - 2;
    w_hi = 1.0;
  } else {
    i_lo = static_cast<int>(t);
    w_hi = t - i_lo;
  }
}

} // namespace

cplx GridFunction::interp(const Pt& y) const {
  int i0;
  double w0;
  axis_weights(y[0], n_, i0, w0);
  if (dim_ == 1) {
    return values_[i0] * (1.0 - w0) + values_[i0 + 1] * w0;
  }
  int i1;
  double w1;
  axis_weights(y[1], n_, i1, w1);
  cplx lo = values_[index(i0, i1)] * (1.0 - w0) + values_[index(i0 + 1, i1)] * w0;
  cplx hi = values_[index(i0, i1 + 1)] * (1.0 - w0) + values_[index(i0 + 1, i1 + 1)] * w0;
  return lo * (1.0 - w1) + hi * w1;
}

cplx GridFunction::integral() const {
  double cell = (dim_ == 1) ? 1.0 / n_ : 1.0 / (static_cast<double>(n_) * n_);
  return det_sum(values_) * cell;
}

cplx GridFunction::integral_weighted(const GridFunction& w) const {
  require(w.size() == size() && w.dim() == dim_, "weight grid mismatch");
  std::vector<cplx> prod(size());
  for (std::size_t i = 0; i < size(); ++i) prod[i] = values_[i] * w.values_[i];
  double cell = (dim_ == 1) ? 1.0 / n_ : 1.0 / (static_cast<double>(n_) * n_);
  return det_sum(prod) * cell;
}

double GridFunction::sup_abs() const {
  double s = 0.0;
  for (const cplx& v : values_) s = std::max(s, std::abs(v));
  return s;
}

double GridFunction::l2_weighted(const GridFunction& w) const {
  require(w.size() == size(), "weight grid mismatch");
  std::vector<cplx> prod(size());
  for (std::size_t i = 0; i < size(); ++i)
    prod[i] = std::norm(values_[i]) * w.values_[i];
  double cell = (dim_ == 1) ? 1.0 / n_ : 1.0 / (static_cast<double>(n_) * n_);
  return std::real(det_sum(prod)) * cell;
}

GridFunction& GridFunction::operator*=(const GridFunction& other) {
  require(other.size() == size(), "grid size mismatch");
  for (std::size_t i = 0; i < size(); ++i) values_[i] *= other.values_[i];
  return *this;
}

GridFunction& GridFunction::operator*=(cplx c) {
  for (cplx& v : values_) v *= c;
  return *this;
}

double holder_seminorm(const GridFunction& v, double alpha) {
  int n = v.n();
  double best = 0.0;
  for (int stride = n / 2; stride >= 1; stride /= 2) {
    double d = static_cast<double>(stride) / n;
    double inv = 1.0 / std::pow(d, alpha);
    if (v.dim() == 1) {
      for (int i = 0; i + stride < n; ++i)
        best = std::max(best, std::abs(v[i + stride] - v[i]) * inv);
    } else {
      for (int i1 = 0; i1 < n; ++i1)
        for (int i0 = 0; i0 + stride < n; ++i0)
          best = std::max(best,
                          std::abs(v[v.index(i0 + stride, i1)] - v[v.index(i0, i1)]) * inv);
      for (int i1 = 0; i1 + stride < n; ++i1)
        for (int i0 = 0; i0 < n; ++i0)
          best = std::max(best,
                          std::abs(v[v.index(i0, i1 + stride)] - v[v.index(i0, i1)]) * inv);
    }
  }
  return best;
}

HolderNorms holder_norms(const GridFunction& v, double alpha, double b) {
  HolderNorms out;
  out.sup = v.sup_abs();
  out.alpha_semi = holder_seminorm(v, alpha);
  out.b_norm = std::max(out.sup, out.alpha_semi / (1.0 + std::pow(std::abs(b), alpha)));
  return out;
}

} // namespace mixlab
