#include "metrosim/numerics.hpp"

#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace metrosim {

std::vector<double> trapezoid_weights(std::size_t points, double h) {
  if (points < 2) throw std::invalid_argument("trapezoid rule needs at least 2 nodes");
  std::vector<double> w(points, h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

double trapezoid(const std::function<double(double)>& f, double a, double b, std::size_t points) {
  const double h = (b - a) / static_cast<double>(points - 1);
  const auto w = trapezoid_weights(points, h);
  double acc = 0.0;
  for (std::size_t k = 0; k < points; ++k) acc += w[k] * f(a + h * static_cast<double>(k));
  return acc;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("line fit needs at least two (x, y) pairs");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("line fit with degenerate abscissae");
  LinearFit fit{sxy / sxx, 0.0, 0.0};
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

double fit_power_law_exponent(std::span<const double> n, std::span<const double> y) {
  std::vector<double> lx(n.size()), ly(y.size());
  for (std::size_t i = 0; i < n.size(); ++i) lx[i] = std::log(n[i]);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) throw std::invalid_argument("power-law fit needs positive ordinates");
    ly[i] = std::log(y[i]);
  }
  return fit_line(lx, ly).slope;
}

double interpolate_uniform(std::span<const double> samples, double t0, double dt, double t) {
  if (samples.empty()) throw std::invalid_argument("interpolation over an empty series");
  const double u = (t - t0) / dt;
  if (u <= 0.0) return samples.front();
  const auto last = static_cast<double>(samples.size() - 1);
  if (u >= last) return samples.back();
  const auto k = static_cast<std::size_t>(u);
  const double frac = u - static_cast<double>(k);
  return (1.0 - frac) * samples[k] + frac * samples[k + 1];
}

Eigen::MatrixXcd matrix_exponential(const Eigen::MatrixXcd& m) { return m.exp(); }

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& m) {
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

Eigen::MatrixXcd unvectorize(const Eigen::VectorXcd& v, Eigen::Index dim) {
  if (v.size() != dim * dim) throw std::invalid_argument("vector length is not dim^2");
  return Eigen::Map<const Eigen::MatrixXcd>(v.data(), dim, dim);
}

}  // namespace metrosim
