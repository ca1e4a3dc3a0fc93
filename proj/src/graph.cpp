#include "mhdsc/graph.hpp"

#include "mhdsc/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mhdsc {

RegularizerKind parse_regularizer_kind(const std::string& name)
{
    if (name == "hessian") return RegularizerKind::hessian;
    if (name == "laplacian") return RegularizerKind::laplacian;
    if (name == "none") return RegularizerKind::none;
    throw ValidationError("unknown regularizer '" + name + "' (expected hessian, laplacian or none)");
}

std::string to_string(RegularizerKind kind)
{
    switch (kind) {
    case RegularizerKind::hessian: return "hessian";
    case RegularizerKind::laplacian: return "laplacian";
    case RegularizerKind::none: break;
    }
    return "none";
}

void HessianConfig::validate() const
{
    if (m < 1) throw ValidationError("tangent dimension must be at least 1");
    if (k < min_neighbors()) {
        throw ValidationError("Hessian energy with tangent dimension " + std::to_string(m) + " needs k >= " +
                              std::to_string(min_neighbors()) + ", got k = " + std::to_string(k));
    }
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ValidationError("ridge must be a finite nonnegative number");
}

NeighborGraph knn_graph(const Matrix& x, Index k)
{
    const Index n = x.cols();
    if (k < 1) throw ValidationError("neighbour count must be positive");
    if (k >= n) {
        throw ValidationError("neighbour count " + std::to_string(k) + " must be below the sample count " +
                              std::to_string(n));
    }
    NeighborGraph g;
    g.k = k;
    g.neighbor_ids.resize(static_cast<std::size_t>(n));

    std::vector<std::pair<double, Index>> cand(static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            cand[c++] = {(x.col(i) - x.col(j)).squaredNorm(), j};
        }
        // pair ordering compares distance first, then index: the tie rule.
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        auto& ids = g.neighbor_ids[static_cast<std::size_t>(i)];
        ids.resize(static_cast<std::size_t>(k));
        for (Index t = 0; t < k; ++t) ids[static_cast<std::size_t>(t)] = cand[static_cast<std::size_t>(t)].second;
    }
    return g;
}

LocalHessianFit local_hessian_fit(const Matrix& points, const HessianConfig& cfg)
{
    const Index p = points.rows();
    const Index n = points.cols();
    const Index m = cfg.m;
    const Index nq = m * (m + 1) / 2;
    if (p < m) {
        throw ValidationError("tangent dimension " + std::to_string(m) + " exceeds feature dimension " +
                              std::to_string(p));
    }
    if (n < 1 + m + nq) throw NumericalError("neighbourhood has fewer points than the quadratic model terms");

    LocalHessianFit fit;
    fit.center = points.rowwise().mean();
    const Matrix centered = points.colwise() - fit.center;

    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinU);
    fit.tangent_basis = svd.matrixU().leftCols(m);
    fit.coords = centered.transpose() * fit.tangent_basis;

    Matrix affine(n, 1 + m);
    affine.col(0).setOnes();
    affine.rightCols(m) = fit.coords;
    Matrix quad(n, nq);
    for (Index a = 0, c = 0; a < m; ++a)
        for (Index b = a; b < m; ++b, ++c) quad.col(c) = fit.coords.col(a).cwiseProduct(fit.coords.col(b));

    Eigen::ColPivHouseholderQR<Matrix> qr(affine);
    qr.setThreshold(1e-10);
    if (qr.rank() < 1 + m) throw NumericalError("affine part of the local model is rank-deficient");
    const Matrix q_affine = qr.householderQ() * Matrix::Identity(n, 1 + m);

    // Quadratic columns with the affine part projected out, so constant and
    // linear functions map exactly to zero curvature.
    const Matrix quad_resid = quad - q_affine * (q_affine.transpose() * quad);
    Matrix gram = quad_resid.transpose() * quad_resid;
    const double tr = gram.trace();
    const double scale = quad.squaredNorm();
    if (!(tr > 1e-14 * std::max(scale, 1e-300))) {
        throw NumericalError("quadratic part of the local model is degenerate");
    }
    gram.diagonal().array() += cfg.ridge * tr;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("local quadratic normal equations are singular");
    fit.quadratic_coefficients = llt.solve(quad_resid.transpose());

    fit.energy_operator = fit.quadratic_coefficients;
    for (Index a = 0, c = 0; a < m; ++a)
        for (Index b = a; b < m; ++b, ++c) fit.energy_operator.row(c) *= (a == b) ? 2.0 : std::sqrt(2.0);
    return fit;
}

void enforce_psd(Matrix& values, double tol)
{
    values = 0.5 * (values + values.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(values);
    if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition of the regulariser failed");
    const Vector& lambda = eig.eigenvalues();
    const double norm = lambda.cwiseAbs().maxCoeff();
    if (lambda.minCoeff() < -tol * norm) {
        throw NumericalError("regulariser is not positive semi-definite (min eigenvalue " +
                             format_real(lambda.minCoeff()) + ")");
    }
    for (Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) < 0.0) {
            const auto v = eig.eigenvectors().col(i);
            values.noalias() -= lambda(i) * v * v.transpose();
        }
    }
    values = 0.5 * (values + values.transpose()).eval();
}

RegularizerMatrix hessian_energy(const Matrix& x, const HessianConfig& cfg)
{
    cfg.validate();
    const Index n = x.cols();
    if (n <= cfg.k) {
        throw ValidationError("Hessian energy needs more samples (" + std::to_string(n) + ") than neighbours (" +
                              std::to_string(cfg.k) + ")");
    }
    const NeighborGraph g = knn_graph(x, cfg.k);

    RegularizerMatrix h;
    h.kind = RegularizerKind::hessian;
    h.values = Matrix::Zero(n, n);

    std::vector<Index> patch(static_cast<std::size_t>(cfg.k + 1));
    Matrix points(x.rows(), cfg.k + 1);
    for (Index i = 0; i < n; ++i) {
        patch[0] = i;
        const auto& nb = g.neighbor_ids[static_cast<std::size_t>(i)];
        std::copy(nb.begin(), nb.end(), patch.begin() + 1);
        for (Index t = 0; t <= cfg.k; ++t) points.col(t) = x.col(patch[static_cast<std::size_t>(t)]);

        LocalHessianFit fit;
        try {
            fit = local_hessian_fit(points, cfg);
        } catch (const NumericalError& e) {
            throw NumericalError("Hessian energy: neighbourhood of sample " + std::to_string(i) + ": " + e.what());
        }
        const Matrix local = fit.energy_operator.transpose() * fit.energy_operator;
        for (Index a = 0; a <= cfg.k; ++a)
            for (Index b = 0; b <= cfg.k; ++b)
                h.values(patch[static_cast<std::size_t>(a)], patch[static_cast<std::size_t>(b)]) += local(a, b);
    }
    enforce_psd(h.values);
    return h;
}

RegularizerMatrix laplacian(const Matrix& x, const LaplacianConfig& cfg)
{
    if (cfg.weighting == LaplacianWeighting::heat && !(cfg.sigma > 0.0)) {
        throw ValidationError("heat kernel width must be positive");
    }
    const Index n = x.cols();
    const NeighborGraph g = knn_graph(x, cfg.k);
    Matrix adj = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j : g.neighbor_ids[static_cast<std::size_t>(i)]) {
            double w = 1.0;
            if (cfg.weighting == LaplacianWeighting::heat) {
                w = std::exp(-(x.col(i) - x.col(j)).squaredNorm() / (cfg.sigma * cfg.sigma));
            }
            adj(i, j) = w;
            adj(j, i) = w;
        }
    }
    RegularizerMatrix l;
    l.kind = RegularizerKind::laplacian;
    l.values = -adj;
    l.values.diagonal() = adj.rowwise().sum();
    return l;
}

Matrix weighted_sum(std::span<const RegularizerMatrix> regs, const Vector& weights)
{
    if (regs.empty()) throw ValidationError("no regularisers to combine");
    if (static_cast<Index>(regs.size()) != weights.size()) {
        throw ValidationError("regulariser count and weight count differ");
    }
    Matrix out = Matrix::Zero(regs[0].size(), regs[0].size());
    for (std::size_t v = 0; v < regs.size(); ++v) {
        if (regs[v].size() != out.rows()) throw ValidationError("regularisers have different sizes");
        if (weights(static_cast<Index>(v)) != 0.0) out.noalias() += weights(static_cast<Index>(v)) * regs[v].values;
    }
    return out;
}

RegularizerMatrix combine(std::span<const RegularizerMatrix> regs, const Vector& alpha)
{
    if (static_cast<Index>(regs.size()) != alpha.size()) {
        throw ValidationError("regulariser count and weight count differ");
    }
    if ((alpha.array() < 0.0).any() || std::abs(alpha.sum() - 1.0) > 1e-10) {
        throw ValidationError("view weights must be nonnegative and sum to one");
    }
    RegularizerMatrix out;
    out.kind = regs.empty() ? RegularizerKind::hessian : regs[0].kind;
    out.values = weighted_sum(regs, alpha);
    return out;
}

void trace_normalize(RegularizerMatrix& r)
{
    const double tr = r.values.trace();
    if (tr > 0.0) r.values /= tr;
}

RegularizerMatrix zero_pad(const RegularizerMatrix& r, Index n)
{
    if (r.size() > n) throw ValidationError("cannot pad a regulariser to a smaller size");
    RegularizerMatrix out;
    out.kind = r.kind;
    out.values = Matrix::Zero(n, n);
    out.values.topLeftCorner(r.size(), r.size()) = r.values;
    return out;
}

void write_symmetric(std::ostream& out, const Matrix& m)
{
    if (m.rows() != m.cols()) throw ValidationError("SYMN dump needs a square matrix");
    out << "SYMN v1 N=" << m.rows() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j <= i; ++j) {
            if (j > 0) out << ' ';
            out << format_real(m(i, j));
        }
        out << '\n';
    }
}

Matrix read_symmetric(std::istream& in)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError("missing SYMN header", line_no);
    std::istringstream hs(line);
    std::string magic, version, ntok;
    hs >> magic >> version >> ntok;
    if (magic != "SYMN" || version != "v1") throw ParseError("malformed header: expected 'SYMN v1 N=<n>'", line_no);
    const auto n = static_cast<Index>(detail::parse_int_field(ntok, "N", line_no));
    Matrix m(n, n);
    Vector row(n);
    for (Index i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw ParseError("unexpected end of file", line_no + 1);
        ++line_no;
        detail::parse_row(line, line_no, i + 1, row.data(), 1);
        for (Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = row(j);
    }
    return m;
}

} // namespace mhdsc
