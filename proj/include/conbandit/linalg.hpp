#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace conbandit {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

// Incremental ridge regression state for LinUCB-style policies:
//   gram = lambda*I + sum x x^T, response = sum r x,
//   estimate solves gram * estimate = response.
// The Cholesky factor is recomputed on every update; d <= 10 throughout, so
// O(d^3) per step is noise and there is no Sherman-Morrison drift.
struct RidgeState {
  int dim = 0;
  double lambda = 1.0;
  double feature_bound = 1.0;  // L
  double param_bound = 1.0;    // S
  Vec gram;                    // d*d row major, both triangles kept bitwise equal
  Vec chol;                    // lower-triangular factor of gram
  Vec response;                // b
  Vec estimate;                // theta_hat
};

namespace detail {

// Lower Cholesky factor of a symmetric matrix. A pivot below 1e-12 * lambda
// is treated as loss of positive definiteness.
inline Vec cholesky(const Vec& a, int d, double lambda) {
  Vec l(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[static_cast<std::size_t>(i) * d + j];
      for (int k = 0; k < j; ++k)
        s -= l[static_cast<std::size_t>(i) * d + k] * l[static_cast<std::size_t>(j) * d + k];
      if (i == j) {
        if (!(s >= 1e-12 * lambda))
          throw std::runtime_error("gram matrix lost positive definiteness");
        l[static_cast<std::size_t>(i) * d + i] = std::sqrt(s);
      } else {
        l[static_cast<std::size_t>(i) * d + j] = s / l[static_cast<std::size_t>(j) * d + j];
      }
    }
  }
  return l;
}

inline void solve_lower(const Vec& l, int d, const Vec& rhs, Vec& y) {
  for (int i = 0; i < d; ++i) {
    double s = rhs[i];
    for (int k = 0; k < i; ++k) s -= l[static_cast<std::size_t>(i) * d + k] * y[k];
    y[i] = s / l[static_cast<std::size_t>(i) * d + i];
  }
}

inline void solve_lower_transpose(const Vec& l, int d, const Vec& rhs, Vec& x) {
  for (int i = d - 1; i >= 0; --i) {
    double s = rhs[i];
    for (int k = i + 1; k < d; ++k) s -= l[static_cast<std::size_t>(k) * d + i] * x[k];
    x[i] = s / l[static_cast<std::size_t>(i) * d + i];
  }
}

}  // namespace detail

inline RidgeState ridge_init(int dim, double lambda, double feature_bound, double param_bound) {
  if (dim < 1) throw std::invalid_argument("ridge dim must be >= 1");
  if (!(feature_bound > 0.0)) throw std::invalid_argument("feature bound L must be positive");
  if (!(param_bound > 0.0)) throw std::invalid_argument("param bound S must be positive");
  if (!(lambda >= std::max(1.0, feature_bound * feature_bound)))
    throw std::invalid_argument("ridge lambda must satisfy lambda >= max(1, L^2)");
  RidgeState s;
  s.dim = dim;
  s.lambda = lambda;
  s.feature_bound = feature_bound;
  s.param_bound = param_bound;
  s.gram.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  s.chol.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) {
    s.gram[static_cast<std::size_t>(i) * dim + i] = lambda;
    s.chol[static_cast<std::size_t>(i) * dim + i] = std::sqrt(lambda);
  }
  s.response.assign(dim, 0.0);
  s.estimate.assign(dim, 0.0);
  return s;
}

inline void ridge_update(RidgeState& s, const Vec& x, double reward) {
  if (static_cast<int>(x.size()) != s.dim)
    throw std::invalid_argument("ridge update feature has wrong dimension");
  if (!(norm2(x) <= s.feature_bound * (1.0 + 1e-9)))
    throw std::invalid_argument("ridge update feature exceeds bound L");
  for (int i = 0; i < s.dim; ++i) {
    for (int j = 0; j <= i; ++j) {
      double v = s.gram[static_cast<std::size_t>(i) * s.dim + j] + x[i] * x[j];
      s.gram[static_cast<std::size_t>(i) * s.dim + j] = v;
      s.gram[static_cast<std::size_t>(j) * s.dim + i] = v;
    }
    s.response[i] += reward * x[i];
  }
  s.chol = detail::cholesky(s.gram, s.dim, s.lambda);
  Vec y(s.dim);
  detail::solve_lower(s.chol, s.dim, s.response, y);
  detail::solve_lower_transpose(s.chol, s.dim, y, s.estimate);
}

// ||x||_{V^-1} = ||L^-1 x||_2 with V = L L^T.
inline double mahalanobis_inverse_norm(const RidgeState& s, const Vec& x) {
  if (static_cast<int>(x.size()) != s.dim)
    throw std::invalid_argument("mahalanobis query has wrong dimension");
  Vec y(s.dim);
  detail::solve_lower(s.chol, s.dim, x, y);
  return norm2(y);
}

}  // namespace conbandit
