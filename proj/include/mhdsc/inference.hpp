#pragma once

#include "mhdsc/common.hpp"
#include "mhdsc/dataset.hpp"
#include "mhdsc/solver.hpp"

#include <vector>

namespace mhdsc {

struct EncodeConfig
{
    double gamma1_infer = 1e-3;  // l1 weight; same default as the training gamma1
    int max_iters = 20000;
    double tol = 1e-12;          // relative change of the iterate

    void validate() const;
};

/// Lasso encoder min_w 1/2 sum_v ||x_v - D_v w||^2 + gamma1_infer ||w||_1 for a
/// fixed set of feature-view dictionaries. Precomputes D1^T D1 and its
/// spectral norm once so batches share them.
class Encoder
{
public:
    Encoder(std::vector<Matrix> dictionaries, EncodeConfig cfg);

    /// One sample given as its V view vectors.
    Vector encode(const std::vector<Vector>& views) const;
    /// Same, for the views already stacked into one vector of length sum_v P_v.
    Vector encode_stacked(const Vector& x) const;
    /// Every column of every view (each P_v x n); returns N_d x n.
    Matrix encode_batch(const std::vector<Matrix>& views) const;

    double objective(const Vector& x, const Vector& w) const;
    double step_lipschitz() const { return lipschitz_; }
    Index atoms() const { return d1_.cols(); }
    Index stacked_dim() const { return d1_.rows(); }
    const EncodeConfig& config() const { return cfg_; }

private:
    Matrix stack(const std::vector<Matrix>& views) const;

    std::vector<Index> dims_;
    Matrix d1_;
    Matrix gram_;
    double lipschitz_ = 0.0;
    EncodeConfig cfg_;
};

/// Convenience wrapper around Encoder for a single sample.
Vector encode(const std::vector<Vector>& views, const std::vector<Matrix>& dictionaries, const EncodeConfig& cfg);

/// Codes for every sample of `data` against the model's feature-view dictionaries.
Matrix encode_dataset(const ModelState& model, const MultiviewDataset& data, const EncodeConfig& cfg);

/// Raw class scores D_label w (no thresholding).
Vector predict_labels(const Vector& w, const Matrix& label_dictionary);
/// Column-wise predict_labels for a code matrix.
Matrix predict_scores(const Matrix& codes, const Matrix& label_dictionary);

/// A = argmin ||Y - A W_L||_F^2 + ridge ||A||_F^2 by the normal equations.
Matrix train_ls_head(const Matrix& codes_labelled, const Matrix& labels, double ridge = 1e-8);

} // namespace mhdsc
