#pragma once

#include "mhdsc/common.hpp"

namespace mhdsc {

/// Euclidean projection onto {u : ||u||_1 <= radius} (sort-based, O(n log n)).
Vector project_l1_ball(const Vector& v, double radius);

/// argmin_u 1/2 ||u - v||^2 + lambda ||u||_inf, via v - project_l1_ball(v, lambda).
Vector prox_linf(const Vector& v, double lambda);

/// argmin_u sum_j c_j/2 (u_j - v_j)^2 + lambda ||u||_inf for positive weights c.
///
/// The solution clips v to [-theta, theta] with theta solving
/// sum_j c_j max(|v_j| - theta, 0) = lambda; computed directly (not via the
/// l1 projection) so it doubles as an independent route to prox_linf.
Vector prox_linf_weighted(const Vector& v, const Vector& weights, double lambda);

/// Row-wise prox_linf: the prox of lambda * ||M||_{1,inf}, where
/// ||M||_{1,inf} = sum over rows of the max absolute entry.
Matrix prox_l1inf_rows(const Matrix& m, double lambda);

/// Row-wise prox of ||M||_{1,inf} in the metric that weights the first
/// `split` columns by `left` and the rest by `right`:
/// argmin_U sum (left or right)/2 (U_ij - M_ij)^2 + ||U||_{1,inf}.
Matrix prox_l1inf_rows_blocked(const Matrix& m, Index split, double left, double right);

double l1inf_norm(const Matrix& m);

/// sign(x) max(|x| - lambda, 0) entrywise.
Vector soft_threshold(const Vector& v, double lambda);

/// Rescales every column with norm above one onto the unit sphere.
Matrix project_unit_columns(const Matrix& d);

} // namespace mhdsc
