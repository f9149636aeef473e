#pragma once

#include <span>
#include <vector>

#include "geobalance/matrix.hpp"
#include "geobalance/model.hpp"

// Data-parallel kernels behind the optimality report and the gossip error
// estimator. Each has an OpenMP version and a serial reference; both compute
// every entry independently, so their outputs are bit-identical.
namespace geobalance::kernels {

Matrix delta_matrix(const Instance& inst, std::span<const double> loads);
Matrix delta_matrix_serial(const Instance& inst, std::span<const double> loads);

// impr(p, q) for every ordered pair: improvement of the objective obtained by
// running calc_best_transfer(p, q) on a copy of `state`. Diagonal is zero.
Matrix pair_improvements(const Instance& inst, const OriginAssignment& state,
                         double tol);
Matrix pair_improvements_serial(const Instance& inst,
                                const OriginAssignment& state, double tol);

}  // namespace geobalance::kernels
