#include "lbcnn/lb_operator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

namespace lbcnn {

std::string to_string(PolyFamily family) {
  switch (family) {
    case PolyFamily::chebyshev: return "chebyshev";
    case PolyFamily::laguerre: return "laguerre";
    case PolyFamily::hermite: return "hermite";
  }
  return "unknown";
}

PolyFamily parse_family(std::string_view name) {
  if (name == "chebyshev") return PolyFamily::chebyshev;
  if (name == "laguerre") return PolyFamily::laguerre;
  if (name == "hermite") return PolyFamily::hermite;
  throw InputError("unknown polynomial family '" + std::string(name) + "'");
}

std::string to_string(OperatorKind kind) {
  return kind == OperatorKind::laplace_beltrami ? "lb" : "graph";
}

OperatorKind parse_operator_kind(std::string_view name) {
  if (name == "lb" || name == "laplace_beltrami") return OperatorKind::laplace_beltrami;
  if (name == "graph" || name == "graph_laplacian") return OperatorKind::graph_laplacian;
  throw InputError("unknown operator kind '" + std::string(name) + "'");
}

namespace {

// Builds C from per-edge off-diagonal weights (aligned with `edges`); the diagonal
// is the negated off-diagonal row sum, summed in storage order.
SparseMatrix stiffness_from_edge_weights(std::size_t n, const std::vector<Edge>& edges,
                                         const std::vector<double>& weights) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size() * 2 + n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    triplets.emplace_back(edges[e].first, edges[e].second, weights[e]);
    triplets.emplace_back(edges[e].second, edges[e].first, weights[e]);
  }
  for (std::size_t i = 0; i < n; ++i) triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), 0.0);

  SparseMatrix c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  c.setFromTriplets(triplets.begin(), triplets.end());
  c.makeCompressed();

  for (Eigen::Index i = 0; i < c.outerSize(); ++i) {
    double off = 0.0;
    for (SparseMatrix::InnerIterator it(c, i); it; ++it)
      if (it.col() != i) off += it.value();
    c.coeffRef(i, i) = -off;
  }
  return c;
}

std::size_t edge_index(const std::vector<Edge>& edges, int a, int b) {
  const Edge key{std::min(a, b), std::max(a, b)};
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), key) - edges.begin());
}

}  // namespace

StiffnessAndMass assemble_cotan(const TriMesh& mesh) {
  const std::size_t n = mesh.num_vertices();
  const auto& edges = mesh.edges();
  const auto& p = mesh.vertices();
  const double threshold = default_area_threshold(mesh);

  std::vector<double> weights(edges.size(), 0.0);
  Eigen::VectorXd areas = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& t = mesh.faces()[f];
    const double area = mesh.face_area(f);
    if (!(area > threshold)) throw InputError("degenerate face " + std::to_string(f) + " in cotan assembly");

    double cot[3];
    bool obtuse[3];
    for (int c = 0; c < 3; ++c) {
      const Vec3 u = p[t[(c + 1) % 3]] - p[t[c]];
      const Vec3 v = p[t[(c + 2) % 3]] - p[t[c]];
      const double dot = u.dot(v);
      cot[c] = dot / u.cross(v).norm();
      obtuse[c] = dot < 0.0;
    }

    // The corner c is opposite the edge (c+1, c+2).
    for (int c = 0; c < 3; ++c) {
      const int a = t[(c + 1) % 3];
      const int b = t[(c + 2) % 3];
      weights[edge_index(edges, a, b)] += -0.5 * cot[c];
    }

    if (obtuse[0] || obtuse[1] || obtuse[2]) {
      for (int c = 0; c < 3; ++c) areas[t[c]] += obtuse[c] ? 0.5 * area : 0.25 * area;
    } else {
      // Voronoi region of corner c: edges to its two neighbors weighted by the
      // cotangents of the opposite corners.
      for (int c = 0; c < 3; ++c) {
        const int c1 = (c + 1) % 3;
        const int c2 = (c + 2) % 3;
        const double len_c1 = (p[t[c1]] - p[t[c]]).squaredNorm();
        const double len_c2 = (p[t[c2]] - p[t[c]]).squaredNorm();
        areas[t[c]] += (len_c1 * cot[c2] + len_c2 * cot[c1]) / 8.0;
      }
    }
  }

  for (Eigen::Index i = 0; i < areas.size(); ++i) {
    if (!(areas[i] > 0.0)) throw InputError("vertex " + std::to_string(i) + " has no incident area");
  }

  // Snap the weights to a common dyadic grid fine enough that any partial sum of
  // a row stays below 2^53 grid steps. Row sums, including the diagonal, are
  // then exact in every summation order, so C * 1 == 0 holds bit for bit.
  std::vector<double> row_abs(n, 0.0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    row_abs[edges[e].first] += std::abs(weights[e]);
    row_abs[edges[e].second] += std::abs(weights[e]);
  }
  const double widest = row_abs.empty() ? 0.0 : *std::max_element(row_abs.begin(), row_abs.end());
  if (widest > 0.0) {
    int exponent = 0;
    std::frexp(2.0 * widest, &exponent);  // 2 * widest < 2^exponent
    const int shift = exponent - 53;
    for (double& w : weights) w = std::ldexp(std::nearbyint(std::ldexp(w, -shift)), shift);
  }
  return {stiffness_from_edge_weights(n, edges, weights), std::move(areas)};
}

LBOperator assemble_laplace_beltrami(const TriMesh& mesh) {
  StiffnessAndMass cm = assemble_cotan(mesh);
  return LBOperator{OperatorKind::laplace_beltrami, std::move(cm.stiffness), std::move(cm.areas), std::nullopt};
}

LBOperator assemble_graph_laplacian(const TriMesh& mesh) {
  const std::size_t n = mesh.num_vertices();
  std::vector<double> weights(mesh.edges().size(), -1.0);
  return LBOperator{OperatorKind::graph_laplacian, stiffness_from_edge_weights(n, mesh.edges(), weights),
                    Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)), std::nullopt};
}

LBOperator assemble_operator(const TriMesh& mesh, OperatorKind kind) {
  return kind == OperatorKind::laplace_beltrami ? assemble_laplace_beltrami(mesh) : assemble_graph_laplacian(mesh);
}

Eigen::VectorXd stiffness_row_sums(const SparseMatrix& stiffness) {
  Eigen::VectorXd sums(stiffness.rows());
  for (Eigen::Index i = 0; i < stiffness.outerSize(); ++i) {
    double off = 0.0;
    double diag = 0.0;
    for (SparseMatrix::InnerIterator it(stiffness, i); it; ++it) {
      if (it.col() == i) {
        diag += it.value();
      } else {
        off += it.value();
      }
    }
    sums[i] = off + diag;
  }
  return sums;
}

double estimate_lambda_max(LBOperator& op, const PowerIterationOptions& options) {
  const Eigen::Index n = op.size();
  if (n == 0) throw NumericalError("power iteration on an empty operator");
  if ((op.areas.array() <= 0.0).any()) throw NumericalError("power iteration needs strictly positive areas");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (Eigen::Index i = 0; i < n; ++i) x[i] += 1e-3 * unit(rng);

  const Eigen::ArrayXd areas = op.areas.array();
  auto a_norm = [&](const Eigen::VectorXd& v) { return std::sqrt((areas * v.array().square()).sum()); };
  x /= a_norm(x);

  // The residual test certifies |mu - lambda| <= residual but needs the eigenvector
  // to converge, which stalls on clustered top eigenvalues. The Rayleigh quotient
  // itself rises monotonically; over blocks of kBlock steps its increments D_m
  // shrink geometrically, so the remaining error is about D_m * q / (1 - q) with
  // q = D_m / D_{m-1}. Convergence often has a fast phase followed by a slow one,
  // so the estimate is trusted only once q has been steady for three blocks.
  constexpr int kBlock = 25;
  double mu = 0.0;
  double block_start = 0.0;
  double prev_increment = -1.0;
  double prev_q = -1.0;
  int settled = 0;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    const Eigen::VectorXd cx = op.stiffness * x;
    // x is A-normalized, so the Rayleigh quotient is x^T C x.
    mu = x.dot(cx);
    const Eigen::VectorXd y = (cx.array() / areas).matrix();
    const double y_norm = a_norm(y);
    if (y_norm == 0.0) throw PowerIterationError("operator annihilates the iterate; spectrum is zero", 0.0);
    const double residual = a_norm(y - mu * x);
    if (mu > 0.0 && residual <= options.tol * mu) {
      op.lambda_max = mu;
      return mu;
    }
    if (iter % kBlock == 0) {
      const double increment = std::abs(mu - block_start);
      if (iter > 0 && prev_increment >= 0.0) {
        const double q = prev_increment > 0.0 ? increment / prev_increment : 1.0;
        const bool stalled = increment <= 1e-14 * mu;
        const bool steady = prev_q > 0.0 && q > 0.8 * prev_q && q < 1.25 * prev_q;
        const bool extrapolated = steady && q < 1.0 && increment * q / (1.0 - q) <= options.tol * mu;
        settled = (stalled || extrapolated) ? settled + 1 : 0;
        prev_q = q;
        if (settled >= 3) {
          op.lambda_max = mu;
          return mu;
        }
      }
      if (iter > 0) prev_increment = increment;
      block_start = mu;
    }
    x = y / y_norm;
  }
  throw PowerIterationError("power iteration did not converge in " + std::to_string(options.max_iters) +
                                " iterations (last estimate " + std::to_string(mu) + ")",
                            mu);
}

double estimate_lambda_max_within_margin(LBOperator& op, double inflation, const PowerIterationOptions& options) {
  try {
    return estimate_lambda_max(op, options);
  } catch (const PowerIterationError&) {
    const double loose = 0.01 * (inflation - 1.0);
    if (!(loose > options.tol)) throw;
    PowerIterationOptions relaxed = options;
    relaxed.tol = loose;
    return estimate_lambda_max(op, relaxed);
  }
}

NormalizedOperator::NormalizedOperator(LBOperator base, PolyFamily family, double inflation)
    : base_(std::move(base)), family_(family) {
  if (!base_.lambda_max) throw InputError("normalize: lambda_max is not set");
  if (!(*base_.lambda_max > 0.0)) throw InputError("normalize: lambda_max must be positive");
  if (!(inflation >= 1.0)) throw InputError("normalize: inflation factor must be >= 1");
  base_.stiffness.makeCompressed();
  lambda_scale_ = inflation * *base_.lambda_max;
  scale_ = 2.0 / lambda_scale_;
  shift_ = family_ == PolyFamily::chebyshev ? -1.0 : 0.0;
  inv_areas_ = base_.areas.unaryExpr([](double a) { return a > 0.0 ? 1.0 / a : 0.0; });
}

OperatorView NormalizedOperator::view() const {
  return OperatorView{base_.stiffness.rows(), base_.stiffness.outerIndexPtr(), base_.stiffness.innerIndexPtr(),
                      base_.stiffness.valuePtr(), inv_areas_.data(), scale_, shift_};
}

NormalizedOperator normalize(const LBOperator& op, PolyFamily family, double inflation) {
  return NormalizedOperator(op, family, inflation);
}

Eigen::MatrixXd apply(const NormalizedOperator& op, const Eigen::MatrixXd& X, bool transpose, Exec exec) {
  if (X.rows() != op.size()) {
    throw InputError("apply: signal has " + std::to_string(X.rows()) + " rows, operator has " +
                     std::to_string(op.size()));
  }
  Eigen::MatrixXd out(X.rows(), X.cols());
  const OperatorView view = op.view();
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    recurrence_step(exec, view, transpose, 1.0, 0.0, 0.0, X.col(c).data(), nullptr, out.col(c).data());
  }
  return out;
}

void write_triplets(std::ostream& out, const SparseMatrix& m) {
  out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(m, i); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

SparseMatrix read_triplets(std::istream& in) {
  Eigen::Index rows = 0, cols = 0, nnz = 0;
  if (!(in >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) {
    throw InputError("triplet file: malformed header");
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (Eigen::Index k = 0; k < nnz; ++k) {
    Eigen::Index i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) throw InputError("triplet file: malformed entry " + std::to_string(k));
    if (i < 0 || i >= rows || j < 0 || j >= cols) throw InputError("triplet file: index out of range");
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v[i] << '\n';
}

Eigen::VectorXd read_vector(std::istream& in) {
  std::vector<double> values;
  double x = 0.0;
  while (in >> x) values.push_back(x);
  if (!in.eof()) throw InputError("vector file: unparseable value after entry " + std::to_string(values.size()));
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace lbcnn
