#include "coldamp/grid.hpp"

#include <algorithm>
#include <cmath>

#include "coldamp/error.hpp"

namespace coldamp {

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw GridError("linear_grid: need n >= 2 and hi > lo");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = hi;
  return g;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw GridError("log_grid: need n >= 2 and 0 < lo < hi");
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<double> lorentzian_grid(double lo, double hi, double center, double linewidth,
                                    double points_per_linewidth) {
  if (!(hi > lo) || !(linewidth > 0.0) || !(points_per_linewidth > 0.0)) {
    throw GridError("lorentzian_grid: invalid arguments");
  }
  // Step grows with the distance from the center: linewidth / ppl at the peak, a fixed
  // fraction of the offset in the tails, so the shoulders stay resolved out to the band edges.
  const double h = 0.5 * linewidth;
  const double r = 2.0 / points_per_linewidth;
  std::vector<double> g{lo};
  std::vector<double> right, left;
  for (double d = 0.0; center + d < hi; d += r * std::max(d, h)) {
    if (center + d > lo) right.push_back(center + d);
  }
  for (double d = r * h; center - d > lo; d += r * std::max(d, h)) {
    if (center - d < hi) left.push_back(center - d);
  }
  g.insert(g.end(), left.rbegin(), left.rend());
  g.insert(g.end(), right.begin(), right.end());
  g.push_back(hi);
  return g;
}

std::vector<double> merge_grids(const std::vector<double>& a, const std::vector<double>& b, double rel_tol) {
  std::vector<double> all;
  all.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(all));
  std::vector<double> out;
  out.reserve(all.size());
  for (double v : all) {
    if (!out.empty() && std::abs(v - out.back()) <= rel_tol * std::abs(v)) continue;
    out.push_back(v);
  }
  return out;
}

std::vector<double> resonance_grid(double lo, double hi, double center, double linewidth,
                                   std::size_t n_log, double points_per_linewidth) {
  auto g = log_grid(lo, hi, n_log);
  auto dense = lorentzian_grid(lo, hi, center, linewidth, points_per_linewidth);
  return merge_grids(g, dense);
}

std::vector<double> refine(const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(2 * grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) out.push_back(0.5 * (grid[i - 1] + grid[i]));
    out.push_back(grid[i]);
  }
  return out;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw GridError("trapezoid: size mismatch");
  if (x.size() < 2) return 0.0;
  std::vector<double> panels(x.size() - 1);
  for (std::size_t i = 1; i < x.size(); ++i) panels[i - 1] = 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return pairwise_sum(panels);
}

double trapezoid_band(std::span<const double> x, std::span<const double> y, double lo, double hi) {
  if (x.size() != y.size() || x.size() < 2) throw GridError("trapezoid_band: bad input");
  if (!(hi > lo)) throw GridError("trapezoid_band: need lo < hi");
  const double tol = 1e-12 * std::abs(hi);
  if (lo < x.front() - tol || hi > x.back() + tol) throw GridError("trapezoid_band: band outside grid");
  lo = std::max(lo, x.front());
  hi = std::min(hi, x.back());
  auto interp = [&](double t) {
    auto it = std::upper_bound(x.begin(), x.end(), t);
    if (it == x.begin()) return y.front();
    if (it == x.end()) return y.back();
    const std::size_t j = static_cast<std::size_t>(it - x.begin());
    const double f = (t - x[j - 1]) / (x[j] - x[j - 1]);
    return y[j - 1] + f * (y[j] - y[j - 1]);
  };
  std::vector<double> xs{lo}, ys{interp(lo)};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > lo && x[i] < hi) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  xs.push_back(hi);
  ys.push_back(interp(hi));
  return trapezoid(xs, ys);
}

}  // namespace coldamp
