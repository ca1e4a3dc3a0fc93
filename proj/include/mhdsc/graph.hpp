#pragma once

#include "mhdsc/common.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mhdsc {

/// k nearest neighbours of every sample (columns of a view), self excluded.
struct NeighborGraph
{
    std::vector<std::vector<Index>> neighbor_ids;
    Index k = 0;

    Index size() const { return static_cast<Index>(neighbor_ids.size()); }
};

enum class RegularizerKind { hessian, laplacian, none };

RegularizerKind parse_regularizer_kind(const std::string& name);
std::string to_string(RegularizerKind kind);

/// Symmetric positive semi-definite N x N graph matrix.
struct RegularizerMatrix
{
    Matrix values;
    RegularizerKind kind = RegularizerKind::hessian;

    Index size() const { return values.rows(); }
    /// f^T R f
    double energy(const Vector& f) const { return f.dot(values * f); }
};

struct HessianConfig
{
    Index k = 10;          // neighbours per sample (the sample itself is added to its patch)
    Index m = 2;           // tangent dimension
    double ridge = 1e-6;   // relative to the trace of the local quadratic Gram matrix

    /// Number of non-constant monomials of a second-order model in m variables.
    Index min_neighbors() const { return m * (m + 3) / 2; }
    void validate() const;
};

enum class LaplacianWeighting { binary, heat };

struct LaplacianConfig
{
    Index k = 10;
    LaplacianWeighting weighting = LaplacianWeighting::binary;
    double sigma = 1.0;    // heat kernel width
};

/// Exact kNN under Euclidean distance between columns; ties go to the lower index.
NeighborGraph knn_graph(const Matrix& x, Index k);

/// Second-order fit on one neighbourhood.
struct LocalHessianFit
{
    Matrix tangent_basis;  // ambient x m, orthonormal columns (principal directions)
    Vector center;         // neighbourhood mean
    Matrix coords;         // points x m tangent coordinates
    /// Maps the function values on the neighbourhood to the quadratic coefficients
    /// q_ab (a <= b, row-major over the upper triangle) of
    /// f(t) ~ c + g^T t + sum_{a<=b} q_ab t_a t_b.
    Matrix quadratic_coefficients;
    /// Frobenius-weighted rows: ||energy_operator * f||^2 is the squared Frobenius
    /// norm of the fitted Hessian.
    Matrix energy_operator;
};

/// Fits the local quadratic model on the columns of `points` (ambient x k+1).
/// Throws NumericalError when the patch is rank-deficient beyond the ridge.
LocalHessianFit local_hessian_fit(const Matrix& points, const HessianConfig& cfg);

/// Hessian energy H = sum_i S_i^T B_i^T B_i S_i over all patches {i} + kNN(i).
RegularizerMatrix hessian_energy(const Matrix& x, const HessianConfig& cfg);

/// Graph Laplacian Deg - A of the symmetrised kNN graph.
RegularizerMatrix laplacian(const Matrix& x, const LaplacianConfig& cfg);

/// Convex combination sum_v alpha_v R_v. Weights must lie on the simplex.
RegularizerMatrix combine(std::span<const RegularizerMatrix> regs, const Vector& alpha);

/// Unchecked weighted sum sum_v w_v R_v (any real weights).
Matrix weighted_sum(std::span<const RegularizerMatrix> regs, const Vector& weights);

/// Scales R so its trace is one (no-op for a zero matrix).
void trace_normalize(RegularizerMatrix& r);

/// Embeds an l x l regulariser into the top-left block of an N x N zero matrix.
RegularizerMatrix zero_pad(const RegularizerMatrix& r, Index n);

/// Symmetrises and checks positive semi-definiteness: eigenvalues below
/// -tol * ||R|| raise NumericalError, smaller negative ones are zeroed.
void enforce_psd(Matrix& values, double tol = 1e-8);

/// `SYMN v1 N=<n>` followed by the lower triangle, one row per line.
void write_symmetric(std::ostream& out, const Matrix& m);
Matrix read_symmetric(std::istream& in);

} // namespace mhdsc
