#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace coldamp {

struct LsqOptions {
  int max_iterations = 200;
  double step_tol = 1e-12;      // relative parameter step
  double cost_tol = 0.0;        // relative cost reduction; 0 leaves convergence to step_tol
  double lambda0 = 1e-3;
  bool scale_covariance = true;  // multiply (J^T J)^{-1} by chi2/dof
  /// Optional feasibility test; infeasible trial steps are rejected like cost increases.
  std::function<bool(const Eigen::VectorXd&)> feasible;
};

struct LsqResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  int dof = 0;
  int iterations = 0;
  Eigen::VectorXd residuals;
};

/// Weighted residual function: fills r (m) and, when J is non-null, the Jacobian (m x p).
using ResidualFn = std::function<void(const Eigen::VectorXd& beta, Eigen::VectorXd& r, Eigen::MatrixXd* J)>;

/// Levenberg-Marquardt with Marquardt diagonal scaling. Throws FitError on failure.
LsqResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& beta0, const LsqOptions& opt = {});

/// Model for orthogonal distance regression with a scalar abscissa and k response components.
struct OdrModel {
  int n_params = 0;
  int n_components = 1;
  /// f (k), df/dbeta (k x p), df/dx (k).
  std::function<void(double x, const Eigen::VectorXd& beta, Eigen::VectorXd& f, Eigen::MatrixXd& jb,
                     Eigen::VectorXd& jx)>
      eval;
};

struct OdrData {
  std::vector<double> x;
  std::vector<double> sigma_x;  // 0 fixes the abscissa
  Eigen::MatrixXd y;            // n x k
  Eigen::MatrixXd sigma_y;      // n x k, > 0
};

struct OdrResult : LsqResult {
  std::vector<double> delta;  // fitted abscissa corrections
};

/// Minimises sum_i |(f(x_i + delta_i) - y_i) / sigma_y|^2 + (delta_i / sigma_x_i)^2 over beta and delta.
/// The delta block is eliminated point by point, so each iteration costs O(n p^2).
OdrResult odr_fit(const OdrModel& model, const OdrData& data, const Eigen::VectorXd& beta0,
                  const LsqOptions& opt = {});

/// Central-difference Jacobian of a residual function.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& beta, double rel_step = 1e-6);

}  // namespace coldamp
