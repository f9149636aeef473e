#include "geobalance/kernels.hpp"

#include <exception>

#include "geobalance/gossip.hpp"

namespace geobalance::kernels {

namespace {

double delta_entry(const Instance& inst, std::span<const double> loads,
                   std::size_t i, std::size_t j) {
  if (i == j) return 0.0;
  const double gain = marginal_gain(inst, loads, i, j, inst.latency(i, j));
  return gain > 0.0 ? gain : 0.0;
}

double improvement_entry(const Instance& inst, const OriginAssignment& state,
                         std::size_t p, std::size_t q, double tol) {
  if (p == q) return 0.0;
  OriginAssignment copy = state;
  return calc_best_transfer(inst, copy, p, q, tol);
}

}  // namespace

Matrix delta_matrix(const Instance& inst, std::span<const double> loads) {
  const long m = static_cast<long>(inst.size());
  Matrix out = Matrix::square(inst.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < m; ++i) {
    for (long j = 0; j < m; ++j) {
      out(i, j) = delta_entry(inst, loads, i, j);
    }
  }
  return out;
}

Matrix delta_matrix_serial(const Instance& inst, std::span<const double> loads) {
  const std::size_t m = inst.size();
  Matrix out = Matrix::square(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) out(i, j) = delta_entry(inst, loads, i, j);
  }
  return out;
}

Matrix pair_improvements(const Instance& inst, const OriginAssignment& state,
                         double tol) {
  const std::size_t m = inst.size();
  const long pairs = static_cast<long>(m * m);
  Matrix out = Matrix::square(m, 0.0);
  // Exceptions must not escape an OpenMP region; the first one is rethrown.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long idx = 0; idx < pairs; ++idx) {
    const std::size_t p = static_cast<std::size_t>(idx) / m;
    const std::size_t q = static_cast<std::size_t>(idx) % m;
    try {
      out(p, q) = improvement_entry(inst, state, p, q, tol);
    } catch (...) {
#pragma omp critical(geobalance_pair_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Matrix pair_improvements_serial(const Instance& inst,
                                const OriginAssignment& state, double tol) {
  const std::size_t m = inst.size();
  Matrix out = Matrix::square(m, 0.0);
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < m; ++q) {
      out(p, q) = improvement_entry(inst, state, p, q, tol);
    }
  }
  return out;
}

}  // namespace geobalance::kernels
