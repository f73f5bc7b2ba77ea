#include "lbcnn/kernels.hpp"

namespace lbcnn {

namespace {

inline double row_value(const OperatorView& op, bool transpose, std::ptrdiff_t i, const double* cur) {
  double acc = 0.0;
  const int begin = op.row_ptr[i];
  const int end = op.row_ptr[i + 1];
  if (transpose) {
    for (int p = begin; p < end; ++p) acc += op.vals[p] * (op.inv_area[op.cols[p]] * cur[op.cols[p]]);
    return op.scale * acc + op.shift * cur[i];
  }
  for (int p = begin; p < end; ++p) acc += op.vals[p] * cur[op.cols[p]];
  return op.scale * (op.inv_area[i] * acc) + op.shift * cur[i];
}

inline double step_value(const OperatorView& op, bool transpose, double a, double b, double c, std::ptrdiff_t i,
                         const double* cur, const double* prev) {
  double v = a * row_value(op, transpose, i, cur);
  if (b != 0.0) v += b * cur[i];
  if (prev != nullptr && c != 0.0) v += c * prev[i];
  return v;
}

}  // namespace

void recurrence_step_serial(const OperatorView& op, bool transpose, double a, double b, double c,
                            const double* cur, const double* prev, double* out) {
  for (std::ptrdiff_t i = 0; i < op.n; ++i) out[i] = step_value(op, transpose, a, b, c, i, cur, prev);
}

void recurrence_step_parallel(const OperatorView& op, bool transpose, double a, double b, double c,
                              const double* cur, const double* prev, double* out) {
  const std::ptrdiff_t n = op.n;
#pragma omp parallel for schedule(static) if (n >= kParallelRowThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = step_value(op, transpose, a, b, c, i, cur, prev);
}

}  // namespace lbcnn
