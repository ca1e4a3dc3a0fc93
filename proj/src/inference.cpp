#include "mhdsc/inference.hpp"

#include "mhdsc/prox.hpp"

#include <cmath>

namespace mhdsc {

void EncodeConfig::validate() const
{
    if (!(gamma1_infer >= 0.0) || !std::isfinite(gamma1_infer)) {
        throw ValidationError("gamma1_infer must be a finite nonnegative number");
    }
    if (max_iters < 1) throw ValidationError("encode iteration cap must be positive");
    if (!(tol > 0.0)) throw ValidationError("encode tolerance must be positive");
}

Encoder::Encoder(std::vector<Matrix> dictionaries, EncodeConfig cfg) : cfg_(cfg)
{
    cfg_.validate();
    if (dictionaries.empty()) throw ValidationError("encoder needs at least one dictionary");
    const Index na = dictionaries[0].cols();
    Index rows = 0;
    for (const auto& d : dictionaries) {
        if (d.cols() != na) throw ValidationError("dictionaries have different atom counts");
        dims_.push_back(d.rows());
        rows += d.rows();
    }
    d1_.resize(rows, na);
    Index r = 0;
    for (const auto& d : dictionaries) {
        d1_.middleRows(r, d.rows()) = d;
        r += d.rows();
    }
    gram_ = d1_.transpose() * d1_;
    lipschitz_ = spectral_norm(gram_);
}

double Encoder::objective(const Vector& x, const Vector& w) const
{
    return 0.5 * (x - d1_ * w).squaredNorm() + cfg_.gamma1_infer * w.lpNorm<1>();
}

Vector Encoder::encode_stacked(const Vector& x) const
{
    if (x.size() != d1_.rows()) {
        throw ValidationError("sample has " + std::to_string(x.size()) + " stacked features, dictionaries expect " +
                              std::to_string(d1_.rows()));
    }
    const Index na = d1_.cols();
    if (lipschitz_ == 0.0) return Vector::Zero(na);  // zero dictionary: w = 0 is optimal

    const Vector b = d1_.transpose() * x;
    const double step = 1.0 / lipschitz_;
    const double thresh = cfg_.gamma1_infer * step;

    Vector w = Vector::Zero(na);
    Vector y = w;
    double t = 1.0;
    for (int it = 0; it < cfg_.max_iters; ++it) {
        const Vector grad = gram_ * y - b;
        Vector next = soft_threshold(y - step * grad, thresh);
        if (!next.allFinite()) throw NumericalError("encode diverged (non-finite iterate)");

        // Gradient-based adaptive restart: drop momentum when it points uphill.
        if ((y - next).dot(next - w) > 0.0) {
            t = 1.0;
            y = next;
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = next + ((t - 1.0) / t_next) * (next - w);
            t = t_next;
        }
        const double change = (next - w).norm();
        w = std::move(next);
        if (change <= cfg_.tol * std::max(1.0, w.norm())) break;
    }
    return w;
}

Vector Encoder::encode(const std::vector<Vector>& views) const
{
    if (views.size() != dims_.size()) throw ValidationError("sample has the wrong number of views");
    Vector x(d1_.rows());
    Index r = 0;
    for (std::size_t v = 0; v < views.size(); ++v) {
        if (views[v].size() != dims_[v]) throw ValidationError("view " + std::to_string(v) + " has the wrong dimension");
        x.segment(r, dims_[v]) = views[v];
        r += dims_[v];
    }
    return encode_stacked(x);
}

Matrix Encoder::stack(const std::vector<Matrix>& views) const
{
    if (views.size() != dims_.size()) throw ValidationError("data has the wrong number of views");
    const Index n = views[0].cols();
    Matrix x(d1_.rows(), n);
    Index r = 0;
    for (std::size_t v = 0; v < views.size(); ++v) {
        if (views[v].rows() != dims_[v]) throw ValidationError("view " + std::to_string(v) + " has the wrong dimension");
        if (views[v].cols() != n) throw ValidationError("views have different sample counts");
        x.middleRows(r, dims_[v]) = views[v];
        r += dims_[v];
    }
    return x;
}

Matrix Encoder::encode_batch(const std::vector<Matrix>& views) const
{
    const Matrix x = stack(views);
    Matrix w(d1_.cols(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) w.col(j) = encode_stacked(x.col(j));
    return w;
}

Vector encode(const std::vector<Vector>& views, const std::vector<Matrix>& dictionaries, const EncodeConfig& cfg)
{
    return Encoder(dictionaries, cfg).encode(views);
}

Matrix encode_dataset(const ModelState& model, const MultiviewDataset& data, const EncodeConfig& cfg)
{
    if (data.num_views() != model.num_views()) {
        throw ValidationError("model has " + std::to_string(model.num_views()) + " views, data has " +
                              std::to_string(data.num_views()));
    }
    std::vector<Matrix> dicts(model.dictionaries.begin(), model.dictionaries.end() - 1);
    std::vector<Matrix> views;
    for (const auto& v : data.views) views.push_back(v.values);
    return Encoder(std::move(dicts), cfg).encode_batch(views);
}

Vector predict_labels(const Vector& w, const Matrix& label_dictionary)
{
    if (w.size() != label_dictionary.cols()) throw ValidationError("code length differs from the atom count");
    return label_dictionary * w;
}

Matrix predict_scores(const Matrix& codes, const Matrix& label_dictionary)
{
    if (codes.rows() != label_dictionary.cols()) throw ValidationError("code length differs from the atom count");
    return label_dictionary * codes;
}

Matrix train_ls_head(const Matrix& codes_labelled, const Matrix& labels, double ridge)
{
    if (!(ridge >= 0.0)) throw ValidationError("ridge must be nonnegative");
    if (codes_labelled.cols() != labels.cols()) throw ValidationError("codes and labels have different sample counts");
    const Index na = codes_labelled.rows();
    Matrix gram = codes_labelled * codes_labelled.transpose();
    gram.diagonal().array() += ridge;
    const Matrix rhs = codes_labelled * labels.transpose();

    Eigen::FullPivLU<Matrix> lu(gram);
    if (lu.rank() < na) {
        throw NumericalError("least-squares head: normal equations are singular (rank " + std::to_string(lu.rank()) +
                             " of " + std::to_string(na) + "); use a positive ridge");
    }
    return lu.solve(rhs).transpose();
}

} // namespace mhdsc
