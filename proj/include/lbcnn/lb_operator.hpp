#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lbcnn/error.hpp"
#include "lbcnn/family.hpp"
#include "lbcnn/kernels.hpp"
#include "lbcnn/mesh.hpp"

namespace lbcnn {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

enum class OperatorKind { laplace_beltrami, graph_laplacian };

std::string to_string(OperatorKind kind);
/// Accepts "lb" / "laplace_beltrami" and "graph" / "graph_laplacian".
OperatorKind parse_operator_kind(std::string_view name);

/// Cotan stiffness matrix C and lumped vertex areas A.
struct StiffnessAndMass {
  SparseMatrix stiffness;
  Eigen::VectorXd areas;
};

/// Delta = A^-1 C. A zero area marks a padding vertex: its row and column of C
/// must be empty, and Delta acts as zero there.
struct LBOperator {
  OperatorKind kind = OperatorKind::laplace_beltrami;
  SparseMatrix stiffness;
  Eigen::VectorXd areas;
  std::optional<double> lambda_max;

  Eigen::Index size() const { return stiffness.rows(); }
  StiffnessAndMass stiffness_and_mass() const { return {stiffness, areas}; }
};

/// Mixed-area cotan discretization. Throws InputError on a degenerate face.
StiffnessAndMass assemble_cotan(const TriMesh& mesh);
LBOperator assemble_laplace_beltrami(const TriMesh& mesh);
/// Combinatorial Laplacian D - W with unit edge weights and unit areas.
LBOperator assemble_graph_laplacian(const TriMesh& mesh);
LBOperator assemble_operator(const TriMesh& mesh, OperatorKind kind);

/// Row sums of C that add the off-diagonal entries first and the diagonal
/// last; exactly zero for a correctly assembled stiffness matrix.
Eigen::VectorXd stiffness_row_sums(const SparseMatrix& stiffness);

struct PowerIterationOptions {
  double tol = 1e-7;
  int max_iters = 10000;
  unsigned seed = 12345;
};

class PowerIterationError : public NumericalError {
 public:
  PowerIterationError(const std::string& what, double last_estimate)
      : NumericalError(what), last_estimate_(last_estimate) {}
  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

/// Largest eigenvalue of A^-1 C by power iteration with an A-weighted
/// Rayleigh quotient; stops when the relative A-norm residual, or the
/// extrapolated remaining change of the quotient, drops below tol.
/// The result is cached in op.lambda_max.
double estimate_lambda_max(LBOperator& op, const PowerIterationOptions& options = {});

/// Default safety margin applied to lambda_max before normalization.
inline constexpr double kDefaultLambdaInflation = 1.01;

/// Pipeline variant: on non-convergence at options.tol, retries once with tol
/// loosened to 1% of the inflation margin. Power iteration underestimates, so
/// such an estimate still keeps the inflated bound above the true lambda_max.
double estimate_lambda_max_within_margin(LBOperator& op, double inflation = kDefaultLambdaInflation,
                                         const PowerIterationOptions& options = {});

/// Delta~ = scale * Delta + shift * I with scale = 2 / lambda and shift = -1
/// (chebyshev) or 0 (laguerre, hermite), lambda = inflation * lambda_max.
class NormalizedOperator {
 public:
  NormalizedOperator(LBOperator base, PolyFamily family, double inflation = kDefaultLambdaInflation);

  const LBOperator& base() const { return base_; }
  PolyFamily family() const { return family_; }
  /// The normalizing eigenvalue bound (lambda_max times inflation).
  double lambda_scale() const { return lambda_scale_; }
  Eigen::Index size() const { return base_.size(); }

  /// Image of an eigenvalue of Delta under the normalization.
  double map_eigenvalue(double lambda) const { return scale_ * lambda + shift_; }
  double scale() const { return scale_; }
  double shift() const { return shift_; }

  /// Raw CSR view for the kernels; valid while this object is alive and unmodified.
  OperatorView view() const;

 private:
  LBOperator base_;
  PolyFamily family_;
  double lambda_scale_;
  double scale_;
  double shift_;
  Eigen::VectorXd inv_areas_;
};

NormalizedOperator normalize(const LBOperator& op, PolyFamily family, double inflation = kDefaultLambdaInflation);

/// Delta~ X or Delta~^T X, column by column.
Eigen::MatrixXd apply(const NormalizedOperator& op, const Eigen::MatrixXd& X, bool transpose = false,
                      Exec exec = Exec::parallel);

// Sparse-triplet text format: "rows cols nnz" then "i j value" lines.
void write_triplets(std::ostream& out, const SparseMatrix& m);
SparseMatrix read_triplets(std::istream& in);
// Area vectors: one value per line.
void write_vector(std::ostream& out, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(std::istream& in);

}  // namespace lbcnn
