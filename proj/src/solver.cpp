#include "mhdsc/solver.hpp"

#include "mhdsc/prox.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <type_traits>

namespace mhdsc {

namespace {

constexpr double kLipschitzFloor = 1e-300;
constexpr double kDescentSlack = 1e-8;

double relative_change(double previous, double current)
{
    return std::abs(current - previous) / std::max(std::abs(previous), std::numeric_limits<double>::min());
}

bool increased(double previous, double current)
{
    return current > previous + kDescentSlack * std::max(std::abs(previous), 1e-12);
}

// Deterministic, generic start vector for the power iteration. The all-ones
// vector spans the null space of every graph regulariser, so it cannot be used.
Vector power_start(Index n)
{
    Vector v(n);
    std::uint64_t state = 0x9e3779b97f4a7c15ULL;
    for (Index i = 0; i < n; ++i) {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        v(i) = 0.5 + static_cast<double>(z >> 11) * 0x1.0p-53;
    }
    return v.normalized();
}

void check_finite(const Matrix& m, const char* what)
{
    if (!m.allFinite()) {
        throw NumericalError(std::string(what) + " diverged (non-finite iterate); the Lipschitz estimate is too small");
    }
}

} // namespace

// ---------------------------------------------------------------------------

void Hyperparams::validate() const
{
    if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0) || !(gamma3 >= 0.0)) {
        throw ValidationError("gamma1, gamma2 and gamma3 must be nonnegative");
    }
    if (!(r > 1.0) || !std::isfinite(r)) throw ValidationError("r must be a finite number above 1");
    if (atoms < 1) throw ValidationError("atom count must be at least 1");
    if (inner_max_iters < 0 || outer_max_iters < 0) throw ValidationError("iteration caps must be nonnegative");
    if (!(inner_tol > 0.0) || !(outer_tol > 0.0)) throw ValidationError("tolerances must be positive");
    if (regularizer == RegularizerKind::hessian) hessian_config().validate();
    if (regularizer == RegularizerKind::laplacian) {
        if (neighbors < 1) throw ValidationError("neighbour count must be positive");
        if (laplacian_weighting == LaplacianWeighting::heat && !(heat_sigma > 0.0)) {
            throw ValidationError("heat kernel width must be positive");
        }
    }
}

std::map<std::string, std::string> to_key_values(const Hyperparams& hp)
{
    auto real = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
    };
    return {
        {"gamma1", real(hp.gamma1)},
        {"gamma2", real(hp.gamma2)},
        {"gamma3", real(hp.gamma3)},
        {"r", real(hp.r)},
        {"atoms", std::to_string(hp.atoms)},
        {"inner_max_iters", std::to_string(hp.inner_max_iters)},
        {"outer_max_iters", std::to_string(hp.outer_max_iters)},
        {"inner_tol", real(hp.inner_tol)},
        {"outer_tol", real(hp.outer_tol)},
        {"regularizer", to_string(hp.regularizer)},
        {"neighbors", std::to_string(hp.neighbors)},
        {"tangent_dim", std::to_string(hp.tangent_dim)},
        {"hessian_ridge", real(hp.hessian_ridge)},
        {"laplacian_weighting", hp.laplacian_weighting == LaplacianWeighting::heat ? "heat" : "binary"},
        {"heat_sigma", real(hp.heat_sigma)},
        {"label_view_regularizer", hp.label_view_regularizer ? "1" : "0"},
        {"trace_normalize", hp.trace_normalize ? "1" : "0"},
    };
}

Hyperparams hyperparams_from_key_values(const std::map<std::string, std::string>& kv)
{
    Hyperparams hp;
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto real = [&](const char* key, double& out) {
        if (auto s = get(key)) {
            char* end = nullptr;
            out = std::strtod(s->c_str(), &end);
            if (s->empty() || *end != '\0') throw FormatError(std::string("bad value for ") + key);
        }
    };
    auto integer = [&](const char* key, auto& out) {
        if (auto s = get(key)) {
            char* end = nullptr;
            const long long v = std::strtoll(s->c_str(), &end, 10);
            if (s->empty() || *end != '\0') throw FormatError(std::string("bad value for ") + key);
            out = static_cast<std::remove_reference_t<decltype(out)>>(v);
        }
    };
    real("gamma1", hp.gamma1);
    real("gamma2", hp.gamma2);
    real("gamma3", hp.gamma3);
    real("r", hp.r);
    integer("atoms", hp.atoms);
    integer("inner_max_iters", hp.inner_max_iters);
    integer("outer_max_iters", hp.outer_max_iters);
    real("inner_tol", hp.inner_tol);
    real("outer_tol", hp.outer_tol);
    if (auto s = get("regularizer")) hp.regularizer = parse_regularizer_kind(*s);
    integer("neighbors", hp.neighbors);
    integer("tangent_dim", hp.tangent_dim);
    real("hessian_ridge", hp.hessian_ridge);
    if (auto s = get("laplacian_weighting")) {
        hp.laplacian_weighting = *s == "heat" ? LaplacianWeighting::heat : LaplacianWeighting::binary;
    }
    real("heat_sigma", hp.heat_sigma);
    if (auto s = get("label_view_regularizer")) hp.label_view_regularizer = *s == "1";
    if (auto s = get("trace_normalize")) hp.trace_normalize = *s == "1";
    return hp;
}

void ModelState::validate() const
{
    if (dictionaries.size() < 2) throw ValidationError("model needs at least one feature view and the label view");
    for (const auto& d : dictionaries) {
        if (d.cols() != codes.rows()) throw ValidationError("dictionary atom count differs from code rows");
        for (Index j = 0; j < d.cols(); ++j) {
            if (d.col(j).norm() > 1.0 + 1e-10) throw ValidationError("dictionary column norm exceeds one");
        }
    }
    if (labelled_count < 1 || labelled_count > codes.cols()) throw ValidationError("labelled count out of range");
    if (alpha.size() > 0 && ((alpha.array() < 0.0).any() || std::abs(alpha.sum() - 1.0) > 1e-10)) {
        throw ValidationError("view weights are off the simplex");
    }
}

// ---------------------------------------------------------------------------

double fista_tau_next(double tau)
{
    if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in (0, 1]");
    const double t = 1.0 / tau;
    return 2.0 / (1.0 + std::sqrt(1.0 + 4.0 * t * t));
}

double spectral_norm(const Matrix& m, double rel_tol, int max_iters)
{
    if (m.size() == 0) throw ValidationError("spectral norm of an empty matrix");
    Vector v = power_start(m.cols());
    double sigma = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        const Vector u = m * v;
        const double next = u.norm();
        Vector w = m.transpose() * u;
        const double wn = w.norm();
        if (wn == 0.0) return next;
        v = w / wn;
        if (it > 0 && std::abs(next - sigma) <= rel_tol * next) return next;
        sigma = next;
    }
    throw NumericalError("power iteration did not converge after " + std::to_string(max_iters) +
                         " iterations (last estimate " + std::to_string(sigma) + ")");
}

// ---------------------------------------------------------------------------

std::vector<RegularizerMatrix> build_regularizers(const MultiviewDataset& data, const Hyperparams& hp)
{
    std::vector<RegularizerMatrix> regs;
    if (hp.regularizer == RegularizerKind::none) return regs;
    auto build = [&](const Matrix& x, Index k) {
        if (hp.regularizer == RegularizerKind::hessian) {
            HessianConfig cfg = hp.hessian_config();
            cfg.k = k;
            return hessian_energy(x, cfg);
        }
        LaplacianConfig cfg = hp.laplacian_config();
        cfg.k = k;
        return laplacian(x, cfg);
    };
    for (const auto& v : data.views) regs.push_back(build(v.values, hp.neighbors));
    if (hp.label_view_regularizer) {
        const Index l = data.labelled_count;
        const Index k = std::min(hp.neighbors, l - 1);
        regs.push_back(zero_pad(build(data.labels, k), data.total_count));
    }
    if (hp.trace_normalize) {
        for (auto& r : regs) trace_normalize(r);
    }
    return regs;
}

Matrix effective_regularizer(std::span<const RegularizerMatrix> regs, const Vector& alpha, double r)
{
    return weighted_sum(regs, alpha.array().pow(r).matrix());
}

Vector view_energies(const Matrix& codes, std::span<const RegularizerMatrix> regs)
{
    Vector e(static_cast<Index>(regs.size()));
    for (std::size_t v = 0; v < regs.size(); ++v) {
        if (regs[v].size() != codes.cols()) throw ValidationError("regulariser size differs from the sample count");
        e(static_cast<Index>(v)) = (codes * regs[v].values).cwiseProduct(codes).sum();
    }
    return e;
}

namespace {

void check_shapes(const ModelState& state, const MultiviewDataset& data)
{
    if (state.num_views() != data.num_views()) throw ValidationError("model and data have different view counts");
    if (state.codes.cols() != data.total_count) throw ValidationError("code columns differ from the sample count");
    if (state.labelled_count != data.labelled_count) throw ValidationError("model and data disagree on l");
    for (Index v = 0; v < data.num_views(); ++v) {
        if (state.dictionaries[static_cast<std::size_t>(v)].rows() != data.views[static_cast<std::size_t>(v)].values.rows()) {
            throw ValidationError("dictionary " + std::to_string(v) + " has the wrong feature dimension");
        }
    }
    if (state.label_dictionary().rows() != data.num_classes()) {
        throw ValidationError("label dictionary has the wrong class count");
    }
}

struct ReconTerms
{
    double labelled_features = 0.0;   // sum over feature views, labelled block (unweighted)
    double labelled_labels = 0.0;
    double unlabelled = 0.0;
};

ReconTerms reconstruction(const ModelState& state, const MultiviewDataset& data)
{
    check_shapes(state, data);
    const Index l = data.labelled_count;
    const Index u = data.unlabelled_count();
    ReconTerms t;
    for (Index v = 0; v < data.num_views(); ++v) {
        const Matrix& x = data.views[static_cast<std::size_t>(v)].values;
        const Matrix& d = state.dictionaries[static_cast<std::size_t>(v)];
        t.labelled_features += (x.leftCols(l) - d * state.codes.leftCols(l)).squaredNorm();
        if (u > 0) t.unlabelled += (x.rightCols(u) - d * state.codes.rightCols(u)).squaredNorm();
    }
    t.labelled_labels = (data.labels - state.label_dictionary() * state.codes.leftCols(l)).squaredNorm();
    return t;
}

} // namespace

ObjectiveBreakdown objective(const ModelState& state, const MultiviewDataset& data,
                             std::span<const RegularizerMatrix> regs)
{
    const Hyperparams& hp = state.hyper;
    const ReconTerms t = reconstruction(state, data);
    const auto l = static_cast<double>(data.labelled_count);
    const auto u = static_cast<double>(data.unlabelled_count());

    ObjectiveBreakdown ob;
    ob.recon_labelled = (t.labelled_features + t.labelled_labels) / (2.0 * l);
    ob.recon_unlabelled = u > 0 ? t.unlabelled / (2.0 * u) : 0.0;
    ob.sparsity_W = hp.gamma1 * l1inf_norm(state.codes);
    double dnorm = 0.0;
    for (const auto& d : state.dictionaries) dnorm += l1inf_norm(d.transpose());
    ob.sparsity_D = hp.gamma2 * dnorm;
    if (!regs.empty() && hp.gamma3 > 0.0) {
        if (state.alpha.size() != static_cast<Index>(regs.size())) {
            throw ValidationError("view weight count differs from the regulariser count");
        }
        const Vector e = view_energies(state.codes, regs);
        ob.manifold = hp.gamma3 * state.alpha.array().pow(hp.r).matrix().dot(e);
    }
    ob.total = ob.recon_labelled + ob.recon_unlabelled + ob.sparsity_W + ob.sparsity_D + ob.manifold;
    return ob;
}

double feature_reconstruction(const ModelState& state, const MultiviewDataset& data)
{
    const ReconTerms t = reconstruction(state, data);
    const auto l = static_cast<double>(data.labelled_count);
    const auto u = static_cast<double>(data.unlabelled_count());
    return t.labelled_features / (2.0 * l) + (u > 0 ? t.unlabelled / (2.0 * u) : 0.0);
}

// ---------------------------------------------------------------------------
// Code subproblem

CodeSubproblem::CodeSubproblem(const ModelState& state, const MultiviewDataset& data, Matrix regularizer,
                               const Hyperparams& hp)
    : h_(std::move(regularizer)), l_(data.labelled_count), n_(data.total_count), gamma1_(hp.gamma1),
      gamma3_(hp.gamma3)
{
    check_shapes(state, data);
    const Index na = state.atoms();
    const Index u = n_ - l_;
    if (gamma3_ > 0.0 && h_.size() > 0 && (h_.rows() != n_ || h_.cols() != n_)) {
        throw ValidationError("regulariser must be N x N");
    }

    p_feat_ = 0;
    for (const auto& v : data.views) p_feat_ += v.values.rows();
    const Index pc = data.num_classes();

    d_all_.resize(p_feat_ + pc, na);
    x_l_.resize(p_feat_ + pc, l_);
    x_u_.resize(p_feat_, u);
    Index row = 0;
    for (Index v = 0; v < data.num_views(); ++v) {
        const Matrix& x = data.views[static_cast<std::size_t>(v)].values;
        const Index p = x.rows();
        d_all_.middleRows(row, p) = state.dictionaries[static_cast<std::size_t>(v)];
        x_l_.middleRows(row, p) = x.leftCols(l_);
        x_u_.middleRows(row, p) = x.rightCols(u);
        row += p;
    }
    d_all_.bottomRows(pc) = state.label_dictionary();
    x_l_.bottomRows(pc) = data.labels;

    gram_l_ = d_all_.transpose() * d_all_;
    cross_l_ = d_all_.transpose() * x_l_;
    const auto d1 = d_all_.topRows(p_feat_);
    gram_u_ = d1.transpose() * d1;
    cross_u_ = d1.transpose() * x_u_;

    l1_ = spectral_norm(gram_l_) / static_cast<double>(l_);
    l2_ = u > 0 ? spectral_norm(gram_u_) / static_cast<double>(u) : 0.0;
    l3_ = (gamma3_ > 0.0 && h_.size() > 0) ? 2.0 * gamma3_ * spectral_norm(h_) : 0.0;
}

double CodeSubproblem::smooth(const Matrix& w) const
{
    const Index u = n_ - l_;
    double f = (x_l_ - d_all_ * w.leftCols(l_)).squaredNorm() / (2.0 * static_cast<double>(l_));
    if (u > 0) {
        f += (x_u_ - d_all_.topRows(p_feat_) * w.rightCols(u)).squaredNorm() / (2.0 * static_cast<double>(u));
    }
    if (l3_ > 0.0) f += gamma3_ * (w * h_).cwiseProduct(w).sum();
    return f;
}

Matrix CodeSubproblem::gradient(const Matrix& w) const
{
    const Index u = n_ - l_;
    Matrix g(w.rows(), w.cols());
    g.leftCols(l_) = (gram_l_ * w.leftCols(l_) - cross_l_) / static_cast<double>(l_);
    if (u > 0) g.rightCols(u) = (gram_u_ * w.rightCols(u) - cross_u_) / static_cast<double>(u);
    if (l3_ > 0.0) g.noalias() += (2.0 * gamma3_) * (w * h_);
    return g;
}

double CodeSubproblem::value(const Matrix& w) const { return smooth(w) + gamma1_ * l1inf_norm(w); }

CodeUpdate update_codes(const ModelState& state, const MultiviewDataset& data, const Matrix& regularizer,
                        const Hyperparams& hp)
{
    const CodeSubproblem prob(state, data, regularizer, hp);
    const Index l = prob.labelled();
    const double lip_l = std::max(prob.lipschitz_labelled() + prob.lipschitz_manifold(), kLipschitzFloor);
    const double lip_u = std::max(prob.lipschitz_unlabelled() + prob.lipschitz_manifold(), kLipschitzFloor);

    CodeUpdate out;
    Matrix w = state.codes;          // W^(k)
    Matrix agg = state.codes;        // aggregate iterate, returned
    double f_agg = prob.value(agg);
    out.trace.push_back(f_agg);
    double tau = 1.0;

    for (int k = 0; k < hp.inner_max_iters; ++k) {
        const Matrix z = tau * w + (1.0 - tau) * agg;
        const Matrix grad = prob.gradient(z);
        const double step_l = tau * lip_l;
        const double step_u = tau * lip_u;

        Matrix target = w;
        target.leftCols(l) -= grad.leftCols(l) / step_l;
        target.rightCols(w.cols() - l) -= grad.rightCols(w.cols() - l) / step_u;
        if (prob.gamma1() > 0.0) {
            w = prox_l1inf_rows_blocked(target, l, step_l / prob.gamma1(), step_u / prob.gamma1());
        } else {
            w = std::move(target);
        }
        check_finite(w, "code update");

        Matrix candidate = tau * w + (1.0 - tau) * agg;
        const double f_candidate = prob.value(candidate);
        const double change = relative_change(f_agg, f_candidate);
        // Monotone safeguard: keep the previous aggregate if the step went uphill.
        if (f_candidate <= f_agg) {
            agg = std::move(candidate);
            f_agg = f_candidate;
        }
        out.trace.push_back(f_agg);
        out.iterations = k + 1;
        tau = fista_tau_next(tau);
        if (change < hp.inner_tol) break;
    }
    out.codes = std::move(agg);
    return out;
}

// ---------------------------------------------------------------------------
// Dictionary subproblem

double dictionary_view_objective(const Matrix& dictionary, const ModelState& state, const MultiviewDataset& data,
                                 Index v, double gamma2)
{
    const Index l = data.labelled_count;
    const Index u = data.unlabelled_count();
    const bool label_view = v == data.num_views();
    const Matrix& xl = label_view ? data.labels : data.views[static_cast<std::size_t>(v)].values;
    double f = ((label_view ? xl : Matrix(xl.leftCols(l))) - dictionary * state.codes.leftCols(l)).squaredNorm() /
               (2.0 * static_cast<double>(l));
    if (!label_view && u > 0) {
        f += (xl.rightCols(u) - dictionary * state.codes.rightCols(u)).squaredNorm() / (2.0 * static_cast<double>(u));
    }
    return f + gamma2 * l1inf_norm(dictionary.transpose());
}

namespace {

// Rows of B are atoms: the unit-norm constraint is a row projection.
Matrix project_unit_rows(const Matrix& b) { return project_unit_columns(b.transpose()).transpose(); }

BlockUpdate update_one_dictionary(Matrix& d, const ModelState& state, const MultiviewDataset& data, Index v,
                                  const Hyperparams& hp)
{
    const Index l = data.labelled_count;
    const Index u = data.unlabelled_count();
    const bool label_view = v == data.num_views();
    const Matrix& x = label_view ? data.labels : data.views[static_cast<std::size_t>(v)].values;
    const auto wl = state.codes.leftCols(l);
    const auto wu = state.codes.rightCols(u);

    const Matrix gram_l = wl * wl.transpose();
    const Matrix cross_l = wl * x.leftCols(l).transpose();
    Matrix gram_u, cross_u;
    double lip = spectral_norm(gram_l) / static_cast<double>(l);
    const bool use_u = !label_view && u > 0;
    if (use_u) {
        gram_u = wu * wu.transpose();
        cross_u = wu * x.rightCols(u).transpose();
        lip += spectral_norm(gram_u) / static_cast<double>(u);
    }
    lip = std::max(lip, kLipschitzFloor);

    auto grad = [&](const Matrix& b) {
        Matrix g = (gram_l * b - cross_l) / static_cast<double>(l);
        if (use_u) g.noalias() += (gram_u * b - cross_u) / static_cast<double>(u);
        return g;
    };
    auto value = [&](const Matrix& b) { return dictionary_view_objective(b.transpose(), state, data, v, hp.gamma2); };

    BlockUpdate out;
    Matrix b = project_unit_rows(d.transpose());
    Matrix agg = b;
    double f_agg = value(agg);
    out.trace.push_back(f_agg);
    double tau = 1.0;
    for (int k = 0; k < hp.inner_max_iters; ++k) {
        const Matrix z = tau * b + (1.0 - tau) * agg;
        const double step = tau * lip;
        Matrix target = b - grad(z) / step;
        b = project_unit_rows(hp.gamma2 > 0.0 ? prox_l1inf_rows(target, hp.gamma2 / step) : target);
        check_finite(b, "dictionary update");

        Matrix candidate = tau * b + (1.0 - tau) * agg;
        const double f_candidate = value(candidate);
        const double change = relative_change(f_agg, f_candidate);
        if (f_candidate <= f_agg) {
            agg = std::move(candidate);
            f_agg = f_candidate;
        }
        out.trace.push_back(f_agg);
        out.iterations = k + 1;
        tau = fista_tau_next(tau);
        if (change < hp.inner_tol) break;
    }
    d = agg.transpose();
    return out;
}

} // namespace

DictionaryUpdate update_dictionary(const ModelState& state, const MultiviewDataset& data, const Hyperparams& hp)
{
    check_shapes(state, data);
    DictionaryUpdate out;
    out.dictionaries = state.dictionaries;
    for (Index v = 0; v <= data.num_views(); ++v) {
        out.per_view.push_back(update_one_dictionary(out.dictionaries[static_cast<std::size_t>(v)], state, data, v, hp));
    }
    return out;
}

// ---------------------------------------------------------------------------
// View weights

Vector alpha_from_energies(const Vector& energies, double r)
{
    if (!(r > 1.0)) throw ValidationError("r must exceed 1");
    if (energies.size() == 0) return energies;
    // alpha_v proportional to (1/e_v)^(1/(r-1)), computed in log space.
    Vector logw(energies.size());
    for (Index v = 0; v < energies.size(); ++v) logw(v) = -std::log(std::max(energies(v), 1e-12)) / (r - 1.0);
    const double top = logw.maxCoeff();
    Vector alpha = (logw.array() - top).exp().matrix();
    return alpha / alpha.sum();
}

Vector update_alpha(const Matrix& codes, std::span<const RegularizerMatrix> regs, double r)
{
    return alpha_from_energies(view_energies(codes, regs), r);
}

// ---------------------------------------------------------------------------

ModelState initialize(const MultiviewDataset& data, const Hyperparams& hp, std::size_t n_regs, std::uint64_t seed)
{
    data.validate();
    hp.validate();
    std::mt19937_64 rng(seed);
    const Index n = data.total_count;
    const Index na = hp.atoms;

    std::vector<Index> picks(static_cast<std::size_t>(na));
    if (na <= n) {
        std::vector<Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Index{0});
        for (Index i = 0; i < na; ++i) {
            std::uniform_int_distribution<Index> pick(i, n - 1);
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
        }
        std::copy(idx.begin(), idx.begin() + na, picks.begin());
    } else {
        std::uniform_int_distribution<Index> pick(0, n - 1);
        for (auto& p : picks) p = pick(rng);
    }

    ModelState s;
    s.hyper = hp;
    s.labelled_count = data.labelled_count;
    for (const auto& v : data.views) {
        Matrix d(v.values.rows(), na);
        for (Index a = 0; a < na; ++a) d.col(a) = v.values.col(picks[static_cast<std::size_t>(a)]);
        for (Index a = 0; a < na; ++a) {
            const double nrm = d.col(a).norm();
            if (nrm > 0.0) d.col(a) /= nrm;
        }
        s.dictionaries.push_back(std::move(d));
    }
    // Label atoms come from the same samples when they are labelled, else zero.
    Matrix dl = Matrix::Zero(data.num_classes(), na);
    for (Index a = 0; a < na; ++a) {
        const Index j = picks[static_cast<std::size_t>(a)];
        if (j < data.labelled_count) {
            dl.col(a) = data.labels.col(j);
            const double nrm = dl.col(a).norm();
            if (nrm > 0.0) dl.col(a) /= nrm;
        }
    }
    s.dictionaries.push_back(std::move(dl));
    s.codes = Matrix::Zero(na, n);
    const std::size_t m = n_regs > 0 ? n_regs : static_cast<std::size_t>(data.num_views() + 1);
    s.alpha = Vector::Constant(static_cast<Index>(m), 1.0 / static_cast<double>(m));
    return s;
}

FitResult fit(const MultiviewDataset& data, const Hyperparams& hp, std::uint64_t seed)
{
    data.validate();
    hp.validate();
    return fit(data, hp, seed, build_regularizers(data, hp));
}

FitResult fit(const MultiviewDataset& data, const Hyperparams& hp, std::uint64_t seed,
              std::vector<RegularizerMatrix> regs)
{
    data.validate();
    hp.validate();
    FitResult res;
    res.regularizers = std::move(regs);
    const bool manifold = !res.regularizers.empty() && hp.regularizer != RegularizerKind::none;
    Hyperparams effective = hp;
    if (!manifold) effective.gamma3 = 0.0;

    res.state = initialize(data, effective, res.regularizers.size(), seed);
    ObjectiveBreakdown current = objective(res.state, data, res.regularizers);
    res.trace.push_back(current);

    auto checked = [&](const char* block) {
        const ObjectiveBreakdown next = objective(res.state, data, res.regularizers);
        if (!std::isfinite(next.total)) throw NumericalError(std::string(block) + " produced a non-finite objective");
        if (increased(current.total, next.total)) {
            throw NumericalError(std::string(block) + " increased the objective from " + std::to_string(current.total) +
                                 " to " + std::to_string(next.total));
        }
        return next;
    };

    for (int it = 0; it < effective.outer_max_iters; ++it) {
        const double before = current.total;
        const Matrix h = manifold && effective.gamma3 > 0.0
                             ? effective_regularizer(res.regularizers, res.state.alpha, effective.r)
                             : Matrix();
        res.state.codes = update_codes(res.state, data, h, effective).codes;
        current = checked("code update");

        res.state.dictionaries = update_dictionary(res.state, data, effective).dictionaries;
        current = checked("dictionary update");

        if (manifold) {
            res.state.alpha = update_alpha(res.state.codes, res.regularizers, effective.r);
            current = checked("view-weight update");
        }
        res.trace.push_back(current);
        if (relative_change(before, current.total) < effective.outer_tol) break;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Model file: "MHDSC1", u64 counts, f64 payload, key=value text block.

namespace {

constexpr char kMagic[] = "MHDSC";
constexpr char kVersion = '1';
constexpr std::size_t kMetaPrefixLen = 5;  // "meta."

static_assert(std::endian::native == std::endian::little, "model I/O assumes a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

void put_matrix(std::ostream& out, const Matrix& m)
{
    // Row-major order on disk.
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) {
            const double x = m(i, j);
            out.write(reinterpret_cast<const char*>(&x), sizeof x);
        }
}

void get_bytes(std::istream& in, char* dst, std::size_t n, const char* what)
{
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError(std::string("model file truncated in ") + what);
}

std::uint64_t get_u64(std::istream& in, const char* what)
{
    std::uint64_t v = 0;
    get_bytes(in, reinterpret_cast<char*>(&v), sizeof v, what);
    return v;
}

Index get_count(std::istream& in, const char* what)
{
    const std::uint64_t v = get_u64(in, what);
    if (v > (std::uint64_t{1} << 32)) throw FormatError(std::string("implausible ") + what + " in model file");
    return static_cast<Index>(v);
}

Matrix get_matrix(std::istream& in, Index rows, Index cols, const char* what)
{
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) {
            double x = 0.0;
            get_bytes(in, reinterpret_cast<char*>(&x), sizeof x, what);
            m(i, j) = x;
        }
    return m;
}

} // namespace

void write_model(const ModelState& state, std::ostream& out)
{
    state.validate();
    out.write(kMagic, sizeof(kMagic) - 1);
    out.put(kVersion);
    const Index v = state.num_views();
    put_u64(out, static_cast<std::uint64_t>(v));
    for (Index i = 0; i < v; ++i) put_u64(out, static_cast<std::uint64_t>(state.dictionaries[static_cast<std::size_t>(i)].rows()));
    put_u64(out, static_cast<std::uint64_t>(state.label_dictionary().rows()));
    put_u64(out, static_cast<std::uint64_t>(state.atoms()));
    put_u64(out, static_cast<std::uint64_t>(state.codes.cols()));
    put_u64(out, static_cast<std::uint64_t>(state.labelled_count));
    put_u64(out, static_cast<std::uint64_t>(state.alpha.size()));
    for (const auto& d : state.dictionaries) put_matrix(out, d);
    put_matrix(out, state.codes);
    put_matrix(out, state.alpha.transpose());

    std::string text;
    for (const auto& [k, val] : to_key_values(state.hyper)) text += k + "=" + val + "\n";
    for (const auto& [k, val] : state.metadata) {
        if (k.find_first_of("=\n") != std::string::npos || val.find('\n') != std::string::npos) {
            throw ValidationError("metadata keys may not contain '=' or newlines");
        }
        text += "meta." + k + "=" + val + "\n";
    }
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("failed to write model");
}

ModelState read_model(std::istream& in)
{
    char magic[sizeof(kMagic)] = {};
    in.read(magic, sizeof(magic));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
        std::memcmp(magic, kMagic, sizeof(kMagic) - 1) != 0) {
        throw FormatError("not a model file (bad magic bytes)");
    }
    const char version = magic[sizeof(kMagic) - 1];
    if (version < '1' || version > '9') throw FormatError("not a model file (bad magic bytes)");
    if (version != kVersion) {
        throw FormatError(std::string("unsupported model format version ") + version + " (this build reads version " +
                          kVersion + ")");
    }

    const Index v = get_count(in, "view count");
    if (v < 1) throw FormatError("model file has no feature views");
    std::vector<Index> dims(static_cast<std::size_t>(v));
    for (auto& p : dims) p = get_count(in, "view dimension");
    const Index pc = get_count(in, "class count");
    const Index na = get_count(in, "atom count");
    const Index n = get_count(in, "sample count");
    const Index l = get_count(in, "labelled count");
    const Index n_alpha = get_count(in, "weight count");

    ModelState s;
    for (Index p : dims) s.dictionaries.push_back(get_matrix(in, p, na, "dictionaries"));
    s.dictionaries.push_back(get_matrix(in, pc, na, "label dictionary"));
    s.codes = get_matrix(in, na, n, "codes");
    s.alpha = get_matrix(in, 1, n_alpha, "view weights").transpose();
    s.labelled_count = l;

    const std::uint64_t len = get_u64(in, "parameter block");
    if (len > (std::uint64_t{1} << 24)) throw FormatError("implausible parameter block length");
    std::string text(static_cast<std::size_t>(len), '\0');
    get_bytes(in, text.data(), text.size(), "parameter block");
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after model data");

    std::map<std::string, std::string> kv;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("malformed parameter line '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        if (key.rfind("meta.", 0) == 0) {
            s.metadata[key.substr(kMetaPrefixLen)] = std::move(val);
        } else {
            kv[std::move(key)] = std::move(val);
        }
    }
    try {
        s.hyper = hyperparams_from_key_values(kv);
        s.validate();
    } catch (const ValidationError& e) {
        throw FormatError(std::string("inconsistent model file: ") + e.what());
    }
    return s;
}

void save_model(const ModelState& state, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_model(state, out);
}

ModelState load_model(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_model(in);
}

} // namespace mhdsc
