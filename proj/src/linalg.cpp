#include "ctrrank/linalg.hpp"

#include <cmath>

#include "ctrrank/errors.hpp"

namespace ctrrank {

double dot(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), "dot: length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(Vec& y, double a, const Vec& x) {
  require(y.size() == x.size(), "axpy: length mismatch");
  for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Mat::Mat(int n, double diag) : n_(n), v_(static_cast<size_t>(n) * n, 0.0) {
  for (int i = 0; i < n; ++i) (*this)(i, i) = diag;
}

void Mat::add_outer(const Vec& w, double scale) {
  require(static_cast<int>(w.size()) == n_, "add_outer: length mismatch");
  if (scale == 0.0) return;
  for (int i = 0; i < n_; ++i) {
    const double wi = scale * w[static_cast<size_t>(i)];
    if (wi == 0.0) continue;
    double* row = &v_[static_cast<size_t>(i) * n_];
    for (int j = 0; j < n_; ++j) row[j] += wi * w[static_cast<size_t>(j)];
  }
}

Vec Mat::mul(const Vec& x) const {
  require(static_cast<int>(x.size()) == n_, "mul: length mismatch");
  Vec y(static_cast<size_t>(n_), 0.0);
  for (int i = 0; i < n_; ++i) y[static_cast<size_t>(i)] = dot_row(i, x);
  return y;
}

double Mat::dot_row(int i, const Vec& x) const {
  const double* row = &v_[static_cast<size_t>(i) * n_];
  double s = 0.0;
  for (int j = 0; j < n_; ++j) s += row[j] * x[static_cast<size_t>(j)];
  return s;
}

Mat identity(int n, double scale) { return Mat(n, scale); }

double frobenius_distance(const Mat& a, const Mat& b) {
  require(a.n() == b.n(), "frobenius_distance: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double diff = a.data()[i] - b.data()[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double frobenius_norm(const Mat& a) {
  double s = 0.0;
  for (double x : a.data()) s += x * x;
  return std::sqrt(s);
}

Cholesky::Cholesky(const Mat& a) : l_(a.n()) {
  const int n = a.n();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
      if (i == j) {
        require(s > 0.0 && std::isfinite(s), "Cholesky: matrix not positive definite");
        l_(i, i) = std::sqrt(s);
      } else {
        l_(i, j) = s / l_(j, j);
      }
    }
  }
}

Vec Cholesky::solve(const Vec& rhs) const {
  const int n = l_.n();
  require(static_cast<int>(rhs.size()) == n, "Cholesky::solve: length mismatch");
  Vec y(rhs);
  for (int i = 0; i < n; ++i) {
    double s = y[static_cast<size_t>(i)];
    for (int k = 0; k < i; ++k) s -= l_(i, k) * y[static_cast<size_t>(k)];
    y[static_cast<size_t>(i)] = s / l_(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[static_cast<size_t>(i)];
    for (int k = i + 1; k < n; ++k) s -= l_(k, i) * y[static_cast<size_t>(k)];
    y[static_cast<size_t>(i)] = s / l_(i, i);
  }
  return y;
}

Mat Cholesky::inverse() const {
  const int n = l_.n();
  Mat inv(n);
  Vec e(static_cast<size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    e[static_cast<size_t>(j)] = 1.0;
    Vec col = solve(e);
    e[static_cast<size_t>(j)] = 0.0;
    for (int i = 0; i < n; ++i) inv(i, j) = col[static_cast<size_t>(i)];
  }
  // symmetrize to kill round-off skew
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      const double m = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = m;
      inv(j, i) = m;
    }
  }
  return inv;
}

Vec spd_solve(const Mat& a, const Vec& rhs) { return Cholesky(a).solve(rhs); }

Mat spd_inverse(const Mat& a) { return Cholesky(a).inverse(); }

bool spd_check(const Mat& a) {
  try {
    Cholesky c(a);
    (void)c;
    return true;
  } catch (const ContractViolation&) {
    return false;
  }
}

}  // namespace ctrrank
