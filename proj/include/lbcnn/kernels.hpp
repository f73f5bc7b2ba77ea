#pragma once

#include <cstddef>

namespace lbcnn {

/// Execution policy for the sparse kernels. `serial` is the reference path;
/// `parallel` splits rows across OpenMP threads and produces bit-identical
/// results because every row is computed by the same instruction sequence.
enum class Exec { serial, parallel };

/// Non-owning CSR view of a normalized operator
///   M = scale * diag(inv_area) * C + shift * I,
/// with C symmetric. The transpose is M^T = scale * C * diag(inv_area) + shift * I.
struct OperatorView {
  std::ptrdiff_t n = 0;
  const int* row_ptr = nullptr;
  const int* cols = nullptr;
  const double* vals = nullptr;
  const double* inv_area = nullptr;
  double scale = 1.0;
  double shift = 0.0;
};

/// Rows below this count run serially even under Exec::parallel.
inline constexpr std::ptrdiff_t kParallelRowThreshold = 4096;

/// out = a * M cur + b * cur + c * prev (M^T when transpose). `prev` may be
/// null, meaning zero. `out` must not alias `cur` or `prev`.
void recurrence_step_serial(const OperatorView& op, bool transpose, double a, double b, double c,
                            const double* cur, const double* prev, double* out);
void recurrence_step_parallel(const OperatorView& op, bool transpose, double a, double b, double c,
                              const double* cur, const double* prev, double* out);

inline void recurrence_step(Exec exec, const OperatorView& op, bool transpose, double a, double b, double c,
                            const double* cur, const double* prev, double* out) {
  if (exec == Exec::parallel) {
    recurrence_step_parallel(op, transpose, a, b, c, cur, prev, out);
  } else {
    recurrence_step_serial(op, transpose, a, b, c, cur, prev, out);
  }
}

}  // namespace lbcnn
