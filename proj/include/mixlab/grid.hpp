// Complex-valued functions sampled on a uniform cell-centered grid over
// (0,1)^dim, with multilinear interpolation (clamped at the boundary), the
// midpoint integral (exact for the interpolant), and dyadic-pair Hoelder
// seminorm estimates (lower-bound semantics: refining the pair set can only
// raise the estimate).
#pragma once

#include <functional>

#include "mixlab/common.hpp"

namespace mixlab {

enum class Exec { Serial, Parallel };

class GridFunction {
public:
  GridFunction() = default;
  GridFunction(int dim, int n, cplx fill = cplx{0.0, 0.0});

  static GridFunction sample(int dim, int n, const std::function<cplx(const Pt&)>& f);

  int dim() const { return dim_; }
  int n() const { return n_; }
  std::size_t size() const { return values_.size(); }
  double h() const { return 1.0 / n_; }

  cplx& operator[](std::size_t i) { return values_[i]; }
  cplx operator[](std::size_t i) const { return values_[i]; }
  std::span<const cplx> values() const { return values_; }

  Pt point(std::size_t i) const;
  std::size_t index(int i0, int i1 = 0) const {
    return static_cast<std::size_t>(i1) * static_cast<std::size_t>(n_) +
           static_cast<std::size_t>(i0);
  }

  // Multilinear interpolation of the samples; coordinates outside the first
  // and last cell centers clamp to the boundary value.
  cplx interp(const Pt& y) const;

  // Midpoint quadrature = exact integral of the clamped interpolant.
  cplx integral() const;
  cplx integral_weighted(const GridFunction& w) const;

  double sup_abs() const;
  double l2_weighted(const GridFunction& w) const;  // integral of |v|^2 w

  GridFunction& operator*=(const GridFunction& other);
  GridFunction& operator*=(cplx c);

private:
  int dim_ = 1;
  int n_ = 0;
  std::vector<cplx> values_;
};

// sup over sampled dyadic pairs of |v(x)-v(y)| / d(x,y)^alpha.  Pairs are
// axis-aligned at separations 2^-j, j = 1..log2(n)-1, swept across the grid.
double holder_seminorm(const GridFunction& v, double alpha);

struct HolderNorms {
  double sup = 0.0;
  double alpha_semi = 0.0;
  double b_norm = 0.0;  // max(sup, alpha_semi / (1 + |b|^alpha))
};

HolderNorms holder_norms(const GridFunction& v, double alpha, double b);

} // namespace mixlab
