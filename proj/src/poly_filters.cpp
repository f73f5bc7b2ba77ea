#include "lbcnn/poly_filters.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "lbcnn/error.hpp"

namespace lbcnn {

RecurrenceCoeffs recurrence_coeffs(PolyFamily family, int k) {
  const double kk = static_cast<double>(k);
  switch (family) {
    case PolyFamily::chebyshev: return {k == 0 ? 1.0 : 2.0, 0.0, -1.0};
    case PolyFamily::laguerre: return {-1.0 / (kk + 1.0), (2.0 * kk + 1.0) / (kk + 1.0), -kk / (kk + 1.0)};
    case PolyFamily::hermite: return {std::sqrt(2.0 / (kk + 1.0)), 0.0, -std::sqrt(kk / (kk + 1.0))};
  }
  throw InputError("unknown polynomial family");
}

Interval family_domain(PolyFamily family) {
  return family == PolyFamily::chebyshev ? Interval{-1.0, 1.0} : Interval{0.0, 2.0};
}

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

}  // namespace

double hermite_unnormalized(int k, double lambda) {
  double sum = 0.0;
  for (int l = 0; l <= k / 2; ++l) {
    const double sign = (l % 2 == 0) ? 1.0 : -1.0;
    sum += sign * std::pow(2.0 * lambda, k - 2 * l) / (factorial(l) * factorial(k - 2 * l));
  }
  return factorial(k) * sum;
}

double eval_poly_scalar(PolyFamily family, int k, double lambda) {
  if (k < 0) throw InputError("polynomial order must be nonnegative");
  switch (family) {
    case PolyFamily::chebyshev: {
      constexpr double slack = 1e-10;
      if (!(std::abs(lambda) <= 1.0 + slack)) {
        throw InputError("chebyshev argument " + std::to_string(lambda) + " outside [-1, 1]");
      }
      const double x = std::clamp(lambda, -1.0, 1.0);
      return std::cos(k * std::acos(x));
    }
    case PolyFamily::laguerre: {
      double sum = 0.0;
      for (int l = 0; l <= k; ++l) sum += binomial(k, l) * std::pow(-lambda, l) / factorial(l);
      return sum;
    }
    case PolyFamily::hermite:
      return hermite_unnormalized(k, lambda) / std::sqrt(std::pow(2.0, k) * factorial(k));
  }
  throw InputError("unknown polynomial family");
}

double eval_poly_recurrence(PolyFamily family, int k, double lambda) {
  if (k < 0) throw InputError("polynomial order must be nonnegative");
  double prev = 0.0;
  double cur = 1.0;
  for (int j = 0; j < k; ++j) {
    const RecurrenceCoeffs r = recurrence_coeffs(family, j);
    const double next = r.a * lambda * cur + r.b * cur + r.c * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double eval_series(PolyFamily family, std::span<const double> theta, double lambda) {
  double sum = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) sum += theta[k] * eval_poly_scalar(family, static_cast<int>(k), lambda);
  return sum;
}

std::vector<Eigen::MatrixXd> poly_basis_apply(const NormalizedOperator& op, const Eigen::MatrixXd& F, int K,
                                              bool transpose, Exec exec) {
  if (K < 1) throw InputError("poly_basis_apply: K must be at least 1");
  if (F.rows() != op.size()) throw InputError("poly_basis_apply: signal length does not match operator");

  std::vector<Eigen::MatrixXd> basis;
  basis.reserve(static_cast<std::size_t>(K));
  basis.push_back(F);
  const OperatorView view = op.view();
  for (int k = 0; k + 1 < K; ++k) {
    const RecurrenceCoeffs r = recurrence_coeffs(op.family(), k);
    Eigen::MatrixXd next(F.rows(), F.cols());
    const Eigen::MatrixXd* prev = k > 0 ? &basis[k - 1] : nullptr;
    for (Eigen::Index c = 0; c < F.cols(); ++c) {
      recurrence_step(exec, view, transpose, r.a, r.b, r.c, basis[k].col(c).data(),
                      prev ? prev->col(c).data() : nullptr, next.col(c).data());
    }
    basis.push_back(std::move(next));
  }
  return basis;
}

Eigen::VectorXd filter_apply(const NormalizedOperator& op, const Eigen::VectorXd& f, const FilterCoefficients& coeffs,
                             Exec exec) {
  if (coeffs.family != op.family()) throw InputError("filter_apply: coefficient family does not match operator");
  if (coeffs.theta.empty()) throw InputError("filter_apply: need at least one coefficient");
  if (f.size() != op.size()) throw InputError("filter_apply: signal length does not match operator");

  const OperatorView view = op.view();
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(f.size());
  Eigen::VectorXd cur = f;
  Eigen::VectorXd next(f.size());
  Eigen::VectorXd h = coeffs.theta[0] * cur;
  for (std::size_t k = 0; k + 1 < coeffs.theta.size(); ++k) {
    const RecurrenceCoeffs r = recurrence_coeffs(op.family(), static_cast<int>(k));
    recurrence_step(exec, view, false, r.a, r.b, r.c, cur.data(), k > 0 ? prev.data() : nullptr, next.data());
    h += coeffs.theta[k + 1] * next;
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  return h;
}

Eigen::VectorXd impulse_response(const NormalizedOperator& op, Eigen::Index j, const FilterCoefficients& coeffs,
                                 Exec exec) {
  if (j < 0 || j >= op.size()) throw InputError("impulse_response: vertex " + std::to_string(j) + " out of range");
  Eigen::VectorXd impulse = Eigen::VectorXd::Zero(op.size());
  impulse[j] = 1.0;
  return filter_apply(op, impulse, coeffs, exec);
}

}  // namespace lbcnn
