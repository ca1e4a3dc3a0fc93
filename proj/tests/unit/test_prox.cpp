#include "mhdsc/prox.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mhdsc;

namespace {

Vector vec(std::initializer_list<double> xs)
{
    Vector v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

Vector random_vector(std::mt19937_64& rng, Index n, double scale)
{
    std::normal_distribution<double> n01;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = scale * n01(rng);
    return v;
}

double linf_objective(const Vector& u, const Vector& v, double lambda)
{
    return 0.5 * (u - v).squaredNorm() + lambda * u.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("project_l1_ball examples")
{
    CHECK(project_l1_ball(vec({0.5, 0.2}), 1.0) == vec({0.5, 0.2}));
    CHECK(project_l1_ball(vec({2.0, 0.0}), 1.0) == vec({1.0, 0.0}));
    const Vector p = project_l1_ball(vec({1.0, 1.0}), 1.0);
    CHECK(p(0) == doctest::Approx(0.5));
    CHECK(p(1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(project_l1_ball(vec({1.0}), 0.0), ValidationError);
    CHECK_THROWS_AS(project_l1_ball(vec({1.0}), -1.0), ValidationError);
}

TEST_CASE("project_l1_ball satisfies the projection KKT conditions")
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const Vector v = random_vector(rng, 1 + trial % 7, 2.0);
        const double radius = 0.1 + 0.02 * trial;
        const Vector u = project_l1_ball(v, radius);
        CHECK(u.lpNorm<1>() <= radius + 1e-10);
        if (v.lpNorm<1>() <= radius) {
            CHECK(u == v);
            continue;
        }
        // u = sign(v) max(|v| - theta, 0) for one theta >= 0 shared by all coordinates.
        double theta = -1.0;
        for (Index i = 0; i < v.size(); ++i)
            if (u(i) != 0.0) theta = std::abs(v(i)) - std::abs(u(i));
        REQUIRE(theta >= 0.0);
        for (Index i = 0; i < v.size(); ++i) {
            if (u(i) != 0.0) {
                CHECK(std::abs(v(i)) - std::abs(u(i)) == doctest::Approx(theta).epsilon(1e-9));
                CHECK(u(i) * v(i) > 0.0);
            } else {
                CHECK(std::abs(v(i)) <= theta + 1e-12);
            }
        }
        CHECK(u.lpNorm<1>() == doctest::Approx(radius).epsilon(1e-12));
    }
}

TEST_CASE("prox_linf examples")
{
    const Vector v = vec({3.0, -1.0, 0.5});
    CHECK(prox_linf(v, 0.0) == v);
    CHECK(prox_linf(vec({0.2, -0.3}), 0.5) == Vector::Zero(2));
    const Vector p = prox_linf(vec({3.0, 1.0}), 1.0);
    CHECK(p(0) == doctest::Approx(2.0));
    CHECK(p(1) == doctest::Approx(1.0));
    CHECK_THROWS_AS(prox_linf(v, -1.0), ValidationError);
}

TEST_CASE("prox_linf agrees with a 1-D grid oracle")
{
    // For v = (3, 1), lambda = 1 the minimiser is (s, 1) with s = 2: scan s.
    const auto f = [](double s) { return linf_objective(vec({s, 1.0}), vec({3.0, 1.0}), 1.0); };
    CHECK(oracle::grid_argmin_1d(f, 0.0, 4.0, 400001) == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("Moreau identity and the weighted route")
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const Vector v = random_vector(rng, 1 + trial % 6, 1.5);
        const double lambda = 0.05 + 0.01 * trial;
        const Vector p = prox_linf(v, lambda);
        const Vector q = project_l1_ball(v, lambda);
        CHECK((p + q - v).cwiseAbs().maxCoeff() <= 1e-12);
        const Vector w = prox_linf_weighted(v, Vector::Ones(v.size()), lambda);
        CHECK((p - w).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("weighted l-inf prox beats random search on its objective")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector v = random_vector(rng, 3, 1.0);
        const Vector c = random_vector(rng, 3, 1.0).cwiseAbs() + Vector::Constant(3, 0.2);
        const double lambda = 0.3;
        const auto obj = [&](const Vector& u) {
            return 0.5 * (u - v).cwiseProduct(u - v).dot(c) + lambda * u.cwiseAbs().maxCoeff();
        };
        const Vector u = prox_linf_weighted(v, c, lambda);
        CHECK(obj(u) <= oracle::random_search(obj, v, 2.0, 100000, 10 + trial) + 1e-6);
    }
    CHECK_THROWS_AS(prox_linf_weighted(vec({1.0}), vec({1.0, 1.0}), 1.0), ValidationError);
}

TEST_CASE("prox_l1inf_rows")
{
    Matrix m(2, 2);
    m << 3, 1, 0, 0;
    Matrix expect(2, 2);
    expect << 2, 1, 0, 0;
    CHECK((prox_l1inf_rows(m, 1.0) - expect).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(prox_l1inf_rows(m, 0.0) == m);
    const Matrix row = m.topRows(1);
    CHECK(prox_l1inf_rows(row, 0.7).row(0).transpose() == prox_linf(row.row(0).transpose(), 0.7));

    // Commutes with row permutations.
    std::mt19937_64 rng(4);
    Matrix a(5, 4);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = std::normal_distribution<double>()(rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 3, 0, 4, 1, 2;
    CHECK(prox_l1inf_rows(perm * a, 0.4) == perm * prox_l1inf_rows(a, 0.4));
}

TEST_CASE("blocked l1-inf prox minimises its metric objective")
{
    std::mt19937_64 rng(5);
    Matrix m(1, 3);
    for (int trial = 0; trial < 10; ++trial) {
        for (Index j = 0; j < 3; ++j) m(0, j) = std::normal_distribution<double>()(rng);
        const double left = 2.0, right = 5.0;
        const auto obj = [&](const Vector& u) {
            double s = 0.5 * left * (u(0) - m(0, 0)) * (u(0) - m(0, 0));
            s += 0.5 * right * ((u(1) - m(0, 1)) * (u(1) - m(0, 1)) + (u(2) - m(0, 2)) * (u(2) - m(0, 2)));
            return s + u.cwiseAbs().maxCoeff();
        };
        const Vector u = prox_l1inf_rows_blocked(m, 1, left, right).row(0).transpose();
        CHECK(obj(u) <= oracle::random_search(obj, m.row(0).transpose(), 2.0, 100000, 20 + trial) + 1e-6);
    }
    CHECK_THROWS_AS(prox_l1inf_rows_blocked(m, 4, 1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(prox_l1inf_rows_blocked(m, 1, 0.0, 1.0), ValidationError);
}

TEST_CASE("soft_threshold")
{
    CHECK(soft_threshold(vec({2.0, -0.5}), 1.0) == vec({1.0, 0.0}));
    const Vector v = vec({0.3, -2.0, 1e-3});
    CHECK(soft_threshold(v, 0.0) == v);
    std::mt19937_64 rng(6);
    const Vector r = random_vector(rng, 6, 1.0);
    const Vector s = soft_threshold(r, 0.3);
    for (Index i = 0; i < r.size(); ++i) {
        const auto f = [&](double u) { return 0.5 * (u - r(i)) * (u - r(i)) + 0.3 * std::abs(u); };
        CHECK(s(i) == doctest::Approx(oracle::grid_argmin_1d(f, -4.0, 4.0, 800001)).epsilon(1e-5).scale(1.0));
    }
    CHECK_THROWS_AS(soft_threshold(v, -0.1), ValidationError);
}

TEST_CASE("nonexpansiveness")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector a = random_vector(rng, 4, 1.0), b = random_vector(rng, 4, 1.0);
        const double d = (a - b).norm();
        CHECK((prox_linf(a, 0.5) - prox_linf(b, 0.5)).norm() <= d + 1e-12);
        CHECK((project_l1_ball(a, 0.5) - project_l1_ball(b, 0.5)).norm() <= d + 1e-12);
        CHECK((soft_threshold(a, 0.5) - soft_threshold(b, 0.5)).norm() <= d + 1e-12);
    }
}

TEST_CASE("project_unit_columns and l1inf_norm")
{
    Matrix d(2, 3);
    d << 3, 0.1, 0, 4, 0.1, 0;
    const Matrix p = project_unit_columns(d);
    CHECK(p(0, 0) == doctest::Approx(0.6));
    CHECK(p(1, 0) == doctest::Approx(0.8));
    CHECK(p.col(1) == d.col(1));
    CHECK(p.col(2).norm() == 0.0);

    Matrix m(2, 3);
    m << 1, -4, 2, 0, 0, -0.5;
    CHECK(l1inf_norm(m) == 4.5);
}
