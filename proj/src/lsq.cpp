#include "coldamp/lsq.hpp"

#include <cmath>

#include "coldamp/error.hpp"

namespace coldamp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Conditioning is judged on the unit-diagonal form so parameter units do not matter.
MatrixXd inverse_normal(const MatrixXd& a) {
  const VectorXd d = a.diagonal();
  if (!(d.minCoeff() > 0.0)) throw FitError("singular Jacobian at the solution (a parameter has no effect)");
  const VectorXd s = d.cwiseSqrt().cwiseInverse();
  const MatrixXd c = s.asDiagonal() * a * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c);
  const VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-13 * ev.maxCoeff())) throw FitError("singular Jacobian at the solution");
  const MatrixXd ci = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return s.asDiagonal() * ci * s.asDiagonal();
}

VectorXd damping_diag(const MatrixXd& a) {
  VectorXd d = a.diagonal();
  const double floor = 1e-12 * d.maxCoeff();
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = std::max(d[i], floor > 0 ? floor : 1e-300);
  return d;
}

// Near the minimum the cost change drops below rounding; a step that only loses to rounding is still taken
// so the Gauss-Newton iteration can finish on the gradient.
constexpr double kCostSlack = 64 * 2.220446049250313e-16;

bool small_step(const VectorXd& step, const VectorXd& beta, const VectorXd& d, double tol) {
  const VectorXd s = d.cwiseSqrt();
  return s.cwiseProduct(step).norm() <= tol * (s.cwiseProduct(beta).norm() + tol);
}

}  // namespace

LsqResult levenberg_marquardt(const ResidualFn& fn, const VectorXd& beta0, const LsqOptions& opt) {
  VectorXd beta = beta0;
  VectorXd r;
  MatrixXd J;
  fn(beta, r, &J);
  if (r.size() <= beta.size()) throw FitError("least squares: fewer residuals than parameters");
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) throw FitError("least squares: non-finite residuals at the starting point");
  double lambda = opt.lambda0;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iterations && !converged; ++it) {
    const MatrixXd a = J.transpose() * J;
    const VectorXd g = J.transpose() * r;
    const VectorXd d = damping_diag(a);
    bool accepted = false;
    for (int inner = 0; inner < 40; ++inner) {
      MatrixXd m = a;
      m.diagonal() += lambda * d;
      const VectorXd step = m.ldlt().solve(-g);
      const VectorXd trial = beta + step;
      VectorXd rt;
      bool ok = step.allFinite() && (!opt.feasible || opt.feasible(trial));
      double cost_t = 0.0;
      if (ok) {
        fn(trial, rt, nullptr);
        cost_t = rt.squaredNorm();
        ok = std::isfinite(cost_t) && cost_t <= cost * (1.0 + kCostSlack);
      }
      if (ok) {
        const bool tiny = small_step(step, beta, d, opt.step_tol) || (cost - cost_t) <= opt.cost_tol * cost;
        beta = trial;
        cost = cost_t;
        fn(beta, r, &J);
        lambda = std::max(lambda * 0.2, 1e-15);
        accepted = true;
        converged = tiny;
        break;
      }
      if (small_step(step, beta, d, opt.step_tol)) {
        converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted && !converged) converged = true;  // no decrease possible: stationary to working precision
  }
  if (!converged) throw FitError("least squares: no convergence after " + std::to_string(opt.max_iterations) + " iterations");

  LsqResult res;
  res.beta = beta;
  res.residuals = r;
  res.chi2 = cost;
  res.dof = static_cast<int>(r.size() - beta.size());
  res.iterations = it;
  res.covariance = inverse_normal(J.transpose() * J);
  if (opt.scale_covariance) res.covariance *= res.chi2 / res.dof;
  return res;
}

namespace {

struct OdrLinearisation {
  double cost = 0.0;
  MatrixXd a;        // reduced normal matrix (undamped)
  VectorXd g;        // reduced gradient
  std::vector<MatrixXd> jb;  // weighted df/dbeta per point
  std::vector<VectorXd> jx;  // weighted df/dx per point
  std::vector<VectorXd> r;   // weighted residual per point
  VectorXd stacked;          // weighted residuals for reporting
};

double odr_cost(const OdrModel& model, const OdrData& data, const VectorXd& beta, const std::vector<double>& delta,
                OdrLinearisation* lin) {
  const std::size_t n = data.x.size();
  const int k = model.n_components;
  const int p = model.n_params;
  VectorXd f(k), jx(k);
  MatrixXd jb(k, p);
  double cost = 0.0;
  if (lin) {
    lin->jb.assign(n, MatrixXd());
    lin->jx.assign(n, VectorXd());
    lin->r.assign(n, VectorXd());
    lin->stacked.resize(static_cast<Eigen::Index>(n) * k);
  }
  for (std::size_t i = 0; i < n; ++i) {
    model.eval(data.x[i] + delta[i], beta, f, jb, jx);
    const auto row = static_cast<Eigen::Index>(i);
    const VectorXd w = data.sigma_y.row(row).transpose().cwiseInverse();
    const VectorXd ri = w.cwiseProduct(f - data.y.row(row).transpose());
    cost += ri.squaredNorm();
    if (data.sigma_x[i] > 0.0) cost += (delta[i] / data.sigma_x[i]) * (delta[i] / data.sigma_x[i]);
    if (lin) {
      lin->jb[i] = w.asDiagonal() * jb;
      lin->jx[i] = w.cwiseProduct(jx);
      lin->r[i] = ri;
      lin->stacked.segment(row * k, k) = ri;
    }
  }
  return cost;
}

// Normal equations with the delta block eliminated; lambda damps both blocks.
void reduced_system(const OdrData& data, const OdrLinearisation& lin, const std::vector<double>& delta,
                    double lambda, const VectorXd& dbeta_diag, MatrixXd& a, VectorXd& g) {
  const Eigen::Index p = dbeta_diag.size();
  a = MatrixXd::Zero(p, p);
  g = VectorXd::Zero(p);
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const MatrixXd& J = lin.jb[i];
    a.noalias() += J.transpose() * J;
    g.noalias() += J.transpose() * lin.r[i];
    if (data.sigma_x[i] > 0.0) {
      const double d2 = 1.0 / (data.sigma_x[i] * data.sigma_x[i]);
      const VectorXd& V = lin.jx[i];
      const double s = (V.squaredNorm() + d2) * (1.0 + lambda);
      const VectorXd jv = J.transpose() * V;
      a.noalias() -= jv * jv.transpose() / s;
      g -= jv * (V.dot(lin.r[i]) + d2 * delta[i]) / s;
    }
  }
  a.diagonal() += lambda * dbeta_diag;
}

std::vector<double> delta_step(const OdrData& data, const OdrLinearisation& lin, const std::vector<double>& delta,
                               double lambda, const VectorXd& step) {
  std::vector<double> dd(data.x.size(), 0.0);
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    if (!(data.sigma_x[i] > 0.0)) continue;
    const double d2 = 1.0 / (data.sigma_x[i] * data.sigma_x[i]);
    const VectorXd& V = lin.jx[i];
    const double s = (V.squaredNorm() + d2) * (1.0 + lambda);
    dd[i] = -(V.dot(lin.r[i] + lin.jb[i] * step) + d2 * delta[i]) / s;
  }
  return dd;
}

}  // namespace

OdrResult odr_fit(const OdrModel& model, const OdrData& data, const VectorXd& beta0, const LsqOptions& opt) {
  const std::size_t n = data.x.size();
  const int k = model.n_components;
  if (data.sigma_x.size() != n || static_cast<std::size_t>(data.y.rows()) != n || data.y.cols() != k ||
      data.sigma_y.rows() != data.y.rows() || data.sigma_y.cols() != k) {
    throw FitError("odr: inconsistent data dimensions");
  }
  if (!(data.sigma_y.minCoeff() > 0.0)) throw FitError("odr: response sigmas must be > 0");
  if (static_cast<int>(n) * k <= model.n_params) throw FitError("odr: fewer observations than parameters");

  VectorXd beta = beta0;
  std::vector<double> delta(n, 0.0);
  OdrLinearisation lin;
  double cost = odr_cost(model, data, beta, delta, &lin);
  if (!std::isfinite(cost)) throw FitError("odr: non-finite residuals at the starting point");
  double lambda = opt.lambda0;
  bool converged = false;
  int it = 0;
  MatrixXd a;
  VectorXd g;
  for (; it < opt.max_iterations && !converged; ++it) {
    MatrixXd a0;
    VectorXd g0;
    reduced_system(data, lin, delta, 0.0, VectorXd::Zero(model.n_params), a0, g0);
    const VectorXd d = damping_diag(a0);
    bool accepted = false;
    for (int inner = 0; inner < 40; ++inner) {
      reduced_system(data, lin, delta, lambda, d, a, g);
      const VectorXd step = a.ldlt().solve(-g);
      const auto dd = delta_step(data, lin, delta, lambda, step);
      const VectorXd trial = beta + step;
      std::vector<double> trial_delta(n);
      for (std::size_t i = 0; i < n; ++i) trial_delta[i] = delta[i] + dd[i];
      bool ok = step.allFinite() && (!opt.feasible || opt.feasible(trial));
      double cost_t = 0.0;
      if (ok) {
        cost_t = odr_cost(model, data, trial, trial_delta, nullptr);
        ok = std::isfinite(cost_t) && cost_t <= cost * (1.0 + kCostSlack);
      }
      if (ok) {
        const bool tiny = small_step(step, beta, d, opt.step_tol) || (cost - cost_t) <= opt.cost_tol * cost;
        beta = trial;
        delta = trial_delta;
        cost = odr_cost(model, data, beta, delta, &lin);
        lambda = std::max(lambda * 0.2, 1e-15);
        accepted = true;
        converged = tiny;
        break;
      }
      if (small_step(step, beta, d, opt.step_tol)) {
        converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted && !converged) converged = true;
  }
  if (!converged) throw FitError("odr: no convergence after " + std::to_string(opt.max_iterations) + " iterations");

  MatrixXd a0;
  VectorXd g0;
  reduced_system(data, lin, delta, 0.0, VectorXd::Zero(model.n_params), a0, g0);
  OdrResult res;
  res.beta = beta;
  res.delta = delta;
  res.residuals = lin.stacked;
  res.chi2 = cost;
  res.dof = static_cast<int>(n) * k - model.n_params;
  res.iterations = it;
  res.covariance = inverse_normal(a0);
  if (opt.scale_covariance) res.covariance *= res.chi2 / res.dof;
  return res;
}

MatrixXd numeric_jacobian(const ResidualFn& fn, const VectorXd& beta, double rel_step) {
  VectorXd r0;
  fn(beta, r0, nullptr);
  MatrixXd J(r0.size(), beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double h = rel_step * std::max(std::abs(beta[j]), 1e-8);
    VectorXd bp = beta, bm = beta, rp, rm;
    bp[j] += h;
    bm[j] -= h;
    fn(bp, rp, nullptr);
    fn(bm, rm, nullptr);
    J.col(j) = (rp - rm) / (2.0 * h);
  }
  return J;
}

}  // namespace coldamp
