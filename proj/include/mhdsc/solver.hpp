#pragma once

#include "mhdsc/common.hpp"
#include "mhdsc/dataset.hpp"
#include "mhdsc/graph.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mhdsc {

struct Hyperparams
{
    double gamma1 = 1e-3;      // ||W||_{1,inf}
    double gamma2 = 1e-3;      // sum_v ||D_v^T||_{1,inf}
    double gamma3 = 1e-1;      // manifold term
    double r = 5.0;            // view-weight exponent, r > 1
    Index atoms = 10;          // N_d

    int inner_max_iters = 500;
    int outer_max_iters = 100;
    double inner_tol = 1e-6;   // relative objective change
    double outer_tol = 1e-5;

    RegularizerKind regularizer = RegularizerKind::hessian;
    Index neighbors = 10;
    Index tangent_dim = 2;
    double hessian_ridge = 1e-6;
    LaplacianWeighting laplacian_weighting = LaplacianWeighting::binary;
    double heat_sigma = 1.0;
    bool label_view_regularizer = false;  // add a regulariser built on Y (zero-padded to N)
    bool trace_normalize = false;         // scale every H_v to unit trace

    void validate() const;
    HessianConfig hessian_config() const { return {neighbors, tangent_dim, hessian_ridge}; }
    LaplacianConfig laplacian_config() const { return {neighbors, laplacian_weighting, heat_sigma}; }
};

std::map<std::string, std::string> to_key_values(const Hyperparams& hp);
Hyperparams hyperparams_from_key_values(const std::map<std::string, std::string>& kv);

/// Learned model.
///
/// `dictionaries` holds the V feature-view dictionaries (P_v x N_d) followed by
/// the label-view dictionary (P_c x N_d). `codes` is N_d x N with the labelled
/// block first. `alpha` has one weight per regulariser in use (V, or V+1 when
/// the label view is regularised).
struct ModelState
{
    std::vector<Matrix> dictionaries;
    Matrix codes;
    Index labelled_count = 0;
    Vector alpha;
    Hyperparams hyper;
    std::map<std::string, std::string> metadata;  // free-form run settings, stored with the model

    Index num_views() const { return static_cast<Index>(dictionaries.size()) - 1; }
    Index atoms() const { return codes.rows(); }
    const Matrix& label_dictionary() const { return dictionaries.back(); }
    auto codes_labelled() const { return codes.leftCols(labelled_count); }
    auto codes_unlabelled() const { return codes.rightCols(codes.cols() - labelled_count); }

    void validate() const;
};

struct ObjectiveBreakdown
{
    double recon_labelled = 0.0;
    double recon_unlabelled = 0.0;
    double sparsity_W = 0.0;
    double sparsity_D = 0.0;
    double manifold = 0.0;
    double total = 0.0;
};

/// tau' from (1/tau')^2 - 1/tau' = (1/tau)^2, i.e. t' = (1 + sqrt(1 + 4 t^2)) / 2 with t = 1/tau.
double fista_tau_next(double tau);

/// Largest singular value by power iteration on M^T M.
double spectral_norm(const Matrix& m, double rel_tol = 1e-8, int max_iters = 10000);

/// Per-view regularisers for the configured kind (empty for RegularizerKind::none).
std::vector<RegularizerMatrix> build_regularizers(const MultiviewDataset& data, const Hyperparams& hp);

/// sum_v alpha_v^r R_v: the multiview regulariser the alternating scheme minimises.
Matrix effective_regularizer(std::span<const RegularizerMatrix> regs, const Vector& alpha, double r);

/// e_v = tr(W R_v W^T).
Vector view_energies(const Matrix& codes, std::span<const RegularizerMatrix> regs);

/// Full objective. Reconstruction sums run over V+1 views for the labelled
/// block and V views for the unlabelled block; the manifold term is
/// gamma3 * sum_v alpha_v^r tr(W R_v W^T).
ObjectiveBreakdown objective(const ModelState& state, const MultiviewDataset& data,
                             std::span<const RegularizerMatrix> regs);

/// Squared reconstruction error of the feature views only, with the same
/// 1/(2l) and 1/(2(N-l)) weights as the objective.
double feature_reconstruction(const ModelState& state, const MultiviewDataset& data);

/// The code subproblem min_W f(W) + gamma1 ||W||_{1,inf} with D and alpha fixed.
class CodeSubproblem
{
public:
    CodeSubproblem(const ModelState& state, const MultiviewDataset& data, Matrix regularizer,
                   const Hyperparams& hp);

    double smooth(const Matrix& w) const;
    Matrix gradient(const Matrix& w) const;
    double value(const Matrix& w) const;

    double lipschitz_labelled() const { return l1_; }    // sigma_max(D^T D) / l
    double lipschitz_unlabelled() const { return l2_; }  // sigma_max(D1^T D1) / (N - l)
    double lipschitz_manifold() const { return l3_; }    // 2 gamma3 sigma_max(H)

    Index labelled() const { return l_; }
    Index samples() const { return n_; }
    double gamma1() const { return gamma1_; }

private:
    Matrix d_all_;   // all V+1 dictionaries stacked vertically
    Matrix x_l_;     // labelled block of all V+1 views, stacked
    Matrix x_u_;     // unlabelled block of the V feature views, stacked
    Index p_feat_ = 0;
    Matrix h_;
    Matrix gram_l_, cross_l_, gram_u_, cross_u_;
    Index l_ = 0, n_ = 0;
    double gamma1_ = 0.0, gamma3_ = 0.0;
    double l1_ = 0.0, l2_ = 0.0, l3_ = 0.0;
};

struct BlockUpdate
{
    int iterations = 0;
    std::vector<double> trace;  // subproblem objective, starting at the warm start
};

struct CodeUpdate : BlockUpdate
{
    Matrix codes;
};

/// Accelerated proximal scheme on the code subproblem, warm-started from
/// state.codes. `regularizer` is the combined N x N matrix (effective_regularizer).
CodeUpdate update_codes(const ModelState& state, const MultiviewDataset& data, const Matrix& regularizer,
                        const Hyperparams& hp);

struct DictionaryUpdate
{
    std::vector<Matrix> dictionaries;
    std::vector<BlockUpdate> per_view;  // V feature views then the label view
};

/// Per-view accelerated projected-proximal scheme on the dictionary subproblem.
DictionaryUpdate update_dictionary(const ModelState& state, const MultiviewDataset& data, const Hyperparams& hp);

/// Objective of the dictionary subproblem for one view (v == V is the label view).
double dictionary_view_objective(const Matrix& dictionary, const ModelState& state, const MultiviewDataset& data,
                                 Index v, double gamma2);

/// Closed-form minimiser of sum_v alpha_v^r e_v on the simplex, e_v clamped at 1e-12.
Vector alpha_from_energies(const Vector& energies, double r);
Vector update_alpha(const Matrix& codes, std::span<const RegularizerMatrix> regs, double r);

/// D from randomly chosen, normalised data columns; W = 0; alpha uniform.
ModelState initialize(const MultiviewDataset& data, const Hyperparams& hp, std::size_t n_regs, std::uint64_t seed);

struct FitResult
{
    ModelState state;
    std::vector<ObjectiveBreakdown> trace;  // trace[0] is the initialisation
    std::vector<RegularizerMatrix> regularizers;
};

/// Alternating minimisation: codes, then dictionaries, then view weights, until
/// the relative change of the objective drops below hp.outer_tol. Throws
/// NumericalError if any block increases the objective beyond 1e-8 relative.
FitResult fit(const MultiviewDataset& data, const Hyperparams& hp, std::uint64_t seed);

/// Same, with regularisers supplied by the caller.
FitResult fit(const MultiviewDataset& data, const Hyperparams& hp, std::uint64_t seed,
              std::vector<RegularizerMatrix> regs);

void save_model(const ModelState& state, const std::string& path);
ModelState load_model(const std::string& path);
void write_model(const ModelState& state, std::ostream& out);
ModelState read_model(std::istream& in);

} // namespace mhdsc
