#pragma once

#include <span>
#include <vector>

namespace coldamp {

std::vector<double> linear_grid(double lo, double hi, std::size_t n);
std::vector<double> log_grid(double lo, double hi, std::size_t n);

/// Points clustered around a Lorentzian peak: spacing linewidth / points_per_linewidth across the
/// half-power width, growing in proportion to the offset (relative step 2 / points_per_linewidth) beyond it.
std::vector<double> lorentzian_grid(double lo, double hi, double center, double linewidth,
                                    double points_per_linewidth);

/// Sorted union; points closer than rel_tol (relative) are merged.
std::vector<double> merge_grids(const std::vector<double>& a, const std::vector<double>& b,
                                double rel_tol = 1e-12);

/// Integration grid for a band containing a resonance: log background plus a dense Lorentzian cluster.
std::vector<double> resonance_grid(double lo, double hi, double center, double linewidth,
                                   std::size_t n_log = 2000, double points_per_linewidth = 50.0);

/// Every interval split at its midpoint (density doubled).
std::vector<double> refine(const std::vector<double>& grid);

double pairwise_sum(std::span<const double> v);

/// Trapezoid rule with pairwise summation of the panels.
double trapezoid(std::span<const double> x, std::span<const double> y);

/// Trapezoid over [lo, hi], linearly interpolating the integrand at the band edges.
double trapezoid_band(std::span<const double> x, std::span<const double> y, double lo, double hi);

}  // namespace coldamp
