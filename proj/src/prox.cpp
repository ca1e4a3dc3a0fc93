#include "mhdsc/prox.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace mhdsc {

Vector project_l1_ball(const Vector& v, double radius)
{
    if (!(radius > 0.0)) throw ValidationError("l1 ball radius must be positive");
    if (v.lpNorm<1>() <= radius) return v;

    std::vector<double> mu(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) mu[static_cast<std::size_t>(i)] = std::abs(v(i));
    std::sort(mu.begin(), mu.end(), std::greater<>());

    double cumsum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
        cumsum += mu[j];
        const double t = (cumsum - radius) / static_cast<double>(j + 1);
        if (mu[j] - t > 0.0) theta = t;
    }
    Vector u(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v(i)) - theta;
        u(i) = a > 0.0 ? std::copysign(a, v(i)) : 0.0;
    }
    return u;
}

Vector prox_linf(const Vector& v, double lambda)
{
    if (lambda < 0.0) throw ValidationError("prox weight must be nonnegative");
    if (lambda == 0.0) return v;
    if (v.lpNorm<1>() <= lambda) return Vector::Zero(v.size());
    return v - project_l1_ball(v, lambda);
}

Vector prox_linf_weighted(const Vector& v, const Vector& weights, double lambda)
{
    if (lambda < 0.0) throw ValidationError("prox weight must be nonnegative");
    if (weights.size() != v.size()) throw ValidationError("prox metric has the wrong length");
    if (lambda == 0.0 || v.size() == 0) return v;
    if (v.cwiseAbs().dot(weights) <= lambda) return Vector::Zero(v.size());

    std::vector<Index> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(v(a)) > std::abs(v(b)); });

    // phi(theta) = sum_j c_j max(|v_j| - theta, 0) is piecewise linear and
    // decreasing; find the piece where it crosses lambda.
    double s = 0.0, c = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < order.size(); ++j) {
        const Index i = order[j];
        s += weights(i) * std::abs(v(i));
        c += weights(i);
        const double next = j + 1 < order.size() ? std::abs(v(order[j + 1])) : 0.0;
        if (s - c * next >= lambda) {
            theta = (s - lambda) / c;
            break;
        }
    }
    Vector u(v.size());
    for (Index i = 0; i < v.size(); ++i) u(i) = std::clamp(v(i), -theta, theta);
    return u;
}

Matrix prox_l1inf_rows(const Matrix& m, double lambda)
{
    if (lambda < 0.0) throw ValidationError("prox weight must be nonnegative");
    Matrix out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) out.row(i) = prox_linf(m.row(i).transpose(), lambda).transpose();
    return out;
}

Matrix prox_l1inf_rows_blocked(const Matrix& m, Index split, double left, double right)
{
    if (split < 0 || split > m.cols()) throw ValidationError("block split out of range");
    if (!(left > 0.0) || (split < m.cols() && !(right > 0.0))) {
        throw ValidationError("prox metric weights must be positive");
    }
    Vector weights(m.cols());
    weights.head(split).setConstant(left);
    weights.tail(m.cols() - split).setConstant(right);
    Matrix out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) out.row(i) = prox_linf_weighted(m.row(i).transpose(), weights, 1.0).transpose();
    return out;
}

double l1inf_norm(const Matrix& m)
{
    if (m.cols() == 0) return 0.0;
    return m.cwiseAbs().rowwise().maxCoeff().sum();
}

Vector soft_threshold(const Vector& v, double lambda)
{
    if (lambda < 0.0) throw ValidationError("threshold must be nonnegative");
    Vector u(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v(i)) - lambda;
        u(i) = a > 0.0 ? std::copysign(a, v(i)) : 0.0;
    }
    return u;
}

Matrix project_unit_columns(const Matrix& d)
{
    Matrix out = d;
    for (Index j = 0; j < out.cols(); ++j) {
        const double n = out.col(j).norm();
        if (n > 1.0) out.col(j) /= n;
    }
    return out;
}

} // namespace mhdsc
