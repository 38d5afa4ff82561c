#pragma once

#include <vector>

namespace ctrrank {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
// y += a * x
void axpy(Vec& y, double a, const Vec& x);
bool all_finite(const Vec& v);

// Dense square matrix, row-major. Sized for the model dimension (d ~ tens),
// so no attempt at blocking or sparsity.
class Mat {
 public:
  Mat() = default;
  explicit Mat(int n, double diag = 0.0);

  int n() const { return n_; }
  double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * n_ + j]; }

  // A += scale * w w^T
  void add_outer(const Vec& w, double scale);
  Vec mul(const Vec& x) const;
  double dot_row(int i, const Vec& x) const;

  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

 private:
  int n_ = 0;
  std::vector<double> v_;
};

Mat identity(int n, double scale = 1.0);
double frobenius_distance(const Mat& a, const Mat& b);
double frobenius_norm(const Mat& a);

// Cholesky factorization of a symmetric positive-definite matrix.
// Construction throws ContractViolation when the matrix is not SPD.
class Cholesky {
 public:
  explicit Cholesky(const Mat& a);
  Vec solve(const Vec& rhs) const;
  Mat inverse() const;

 private:
  Mat l_;
};

Vec spd_solve(const Mat& a, const Vec& rhs);
Mat spd_inverse(const Mat& a);
// true iff the Cholesky factorization succeeds (a is numerically SPD)
bool spd_check(const Mat& a);

}  // namespace ctrrank
