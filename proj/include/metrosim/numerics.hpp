#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace metrosim {

/// Trapezoid rule for f on [a, b] with `points` equidistant nodes (>= 2).
double trapezoid(const std::function<double(double)>& f, double a, double b, std::size_t points);

/// Trapezoid weights for `points` nodes with spacing h.
std::vector<double> trapezoid_weights(std::size_t points, double h);

struct LinearFit {
  double slope;
  double intercept;
  double slope_stderr;
};

/// Ordinary least squares y = slope * x + intercept.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Exponent p of y ~ c * n^p from a log-log least-squares fit.
double fit_power_law_exponent(std::span<const double> n, std::span<const double> y);

/// Linear interpolation of samples y_k = f(t0 + k*dt); clamps outside the range.
double interpolate_uniform(std::span<const double> samples, double t0, double dt, double t);

/// exp(m) by scaling and squaring with a Pade approximant.
Eigen::MatrixXcd matrix_exponential(const Eigen::MatrixXcd& m);

/// Column-major vectorization helpers: vec(A X B) = (B^T kron A) vec(X).
Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);
Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& m);
Eigen::MatrixXcd unvectorize(const Eigen::VectorXcd& v, Eigen::Index dim);

}  // namespace metrosim
