#include "corrph/aph_builder.hpp"
#include "corrph/phase_type.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace corrph;

namespace {

// Random acyclic upper triangular representation, not necessarily exponential.
PhaseType random_acyclic(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.2, 3.0);
    Matrix D = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        D(i, i) = -u(rng) * 2.0;
        double left = -D(i, i) * (i + 1 < n ? 0.7 : 0.0);
        for (int j = i + 1; j < n; ++j) {
            const double share = j + 1 < n ? left * 0.5 : left;
            D(i, j) = share;
            left -= share;
        }
    }
    return PhaseType(oracle::random_probability(n, rng), D);
}

Matrix erlang_matrix(int k, double rate) {
    Matrix D = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        D(i, i) = -rate;
        if (i + 1 < k) D(i, i + 1) = rate;
    }
    return D;
}

Vector unit(int n, int i) {
    Vector e = Vector::Zero(n);
    e(i) = 1.0;
    return e;
}

}  // namespace

TEST_CASE("exponential descriptors") {
    const PhaseType x = PhaseType::exponential(2.0);
    const Descriptors d = descriptors(x);
    CHECK(d.M(0, 0) == doctest::Approx(0.5));
    CHECK(d.psi(0) == doctest::Approx(1.0));
    REQUIRE(d.a[0].has_value());
    CHECK(*d.a[0] == doctest::Approx(0.5));
    CHECK(d.phi(0) == doctest::Approx(1.0));
}

TEST_CASE("constructor rejects invalid sub-generators") {
    const Vector pi = Vector::Constant(2, 0.5);
    Matrix D(2, 2);
    D << -1, 0.5, 0, -1;
    CHECK_NOTHROW(PhaseType(pi, D));

    Matrix positive_diag = D;
    positive_diag(1, 1) = 1.0;
    CHECK_THROWS_AS(PhaseType(pi, positive_diag), InvalidModel);

    Matrix negative_off = D;
    negative_off(0, 1) = -0.1;
    CHECK_THROWS_AS(PhaseType(pi, negative_off), InvalidModel);

    Matrix positive_row = D;
    positive_row(0, 1) = 1.5;
    CHECK_THROWS_AS(PhaseType(pi, positive_row), InvalidModel);

    Matrix trapped(2, 2);  // {0, 1} communicate but never exit: singular
    trapped << -1, 1, 1, -1;
    CHECK_THROWS_AS(PhaseType(pi, trapped), InvalidModel);

    CHECK_THROWS_AS(PhaseType(Vector::Constant(2, 0.6), D), InvalidModel);
    CHECK_THROWS_AS(PhaseType(Vector::Constant(3, 1.0 / 3), D), InvalidModel);
}

TEST_CASE("descriptors match quadrature on random representations") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 4; ++trial) {
        const PhaseType x = random_acyclic(2 + trial % 3, rng);
        const Descriptors d = descriptors(x);
        Vector psi, a;
        oracle::exit_descriptors(x, psi, a);
        const Vector m = oracle::remaining_means(x);
        for (int i = 0; i < x.order(); ++i) {
            CHECK(d.m(i) == doctest::Approx(m(i)).epsilon(1e-8));
            CHECK(d.psi(i) == doctest::Approx(psi(i)).epsilon(1e-8));
            if (psi(i) > 1e-12) {
                REQUIRE(d.a[i].has_value());
                CHECK(*d.a[i] == doctest::Approx(a(i)).epsilon(1e-7));
            }
        }
        CHECK(d.psi.sum() == doctest::Approx(1.0));
    }
}

TEST_CASE("cyclic representation uses LU and agrees with quadrature") {
    Matrix D(3, 3);
    D << -3, 1, 1, 0.5, -2, 0.5, 1, 0, -2;
    const PhaseType x(Vector::Constant(3, 1.0 / 3), D);
    CHECK_FALSE(x.is_acyclic());
    CHECK_FALSE(topological_order(D).has_value());
    const Descriptors d = descriptors(x);
    const Vector m = oracle::remaining_means(x);
    for (int i = 0; i < 3; ++i) CHECK(d.m(i) == doctest::Approx(m(i)).epsilon(1e-7));
    CHECK(moments(x, 2)[1] == doctest::Approx(oracle::moment(x, 2)).epsilon(1e-7));
}

TEST_CASE("triangular and LU solves agree") {
    std::mt19937_64 rng(11);
    for (int n = 1; n <= 8; ++n) {
        const PhaseType x = random_acyclic(n, rng);
        const Matrix tri = inverse_generator(x.D(), SolveMethod::triangular);
        const Matrix lu = inverse_generator(x.D(), SolveMethod::lu);
        CHECK((tri - lu).cwiseAbs().maxCoeff() < 1e-12 * lu.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("conditional exit time is undefined where the exit probability vanishes") {
    Matrix D(2, 2);
    D << -1, 1, 0, -2;
    const Descriptors d = descriptors(PhaseType(unit(2, 0), D));
    CHECK(d.psi(0) == doctest::Approx(0.0));
    CHECK_FALSE(d.a[0].has_value());
    CHECK(d.a_or_zero()(0) == 0.0);
    REQUIRE(d.a[1].has_value());
    CHECK(*d.a[1] == doctest::Approx(1.5));
}

TEST_CASE("moments") {
    const auto e = moments(PhaseType::exponential(2.0), 4);
    CHECK(e[0] == doctest::Approx(0.5));
    CHECK(e[1] == doctest::Approx(0.5));
    CHECK(e[2] == doctest::Approx(0.75));
    CHECK(e[3] == doctest::Approx(1.5));

    const PhaseType erlang(unit(2, 0), erlang_matrix(2, 2.0));
    CHECK(mean(erlang) == doctest::Approx(1.0));
    CHECK(moments(erlang, 2)[1] == doctest::Approx(1.5));
    CHECK(variance(erlang) == doctest::Approx(0.5));
}

TEST_CASE("exponentiality check") {
    CHECK(is_exponential(optimal_positive_chain(3).phd, 1.0).passed);
    CHECK(is_exponential(blni_chain(5).phd, 1.0).passed);
    CHECK(is_exponential(scale(optimal_positive_chain(4).phd, 3.0), 3.0).passed);
    const ExponentialCheck erlang = is_exponential(PhaseType(unit(2, 0), erlang_matrix(2, 2.0)), 1.0);
    CHECK_FALSE(erlang.passed);
    // E(X^k)/k! = (k+1)/2^k, farthest from one at k = 2n = 4
    CHECK(erlang.max_moment_deviation == doctest::Approx(0.6875));
    CHECK_FALSE(is_exponential(PhaseType::exponential(1.0), 2.0).passed);
    CHECK_THROWS_AS(is_exponential(PhaseType::exponential(1.0), 0.0), InvalidModel);
}

TEST_CASE("canonical classification") {
    const PhaseType first = optimal_positive_chain(4).phd;
    const CanonicalForm f = classify(first);
    CHECK(f.tag == CanonicalTag::first);
    for (std::size_t i = 1; i < f.rates.size(); ++i) CHECK(f.rates[i] >= f.rates[i - 1]);

    const CanonicalForm s = classify(reverse_transform(first));
    CHECK(s.tag == CanonicalTag::second);
    for (std::size_t i = 1; i < s.rates.size(); ++i) CHECK(s.rates[i] <= s.rates[i - 1]);

    Matrix D(2, 2);
    D << -2, 1, 0, -1;  // decreasing rates with a spread initial vector
    CHECK(classify(PhaseType(Vector::Constant(2, 0.5), D)).tag == CanonicalTag::none);
}

TEST_CASE("Laplace transform product formulas agree with the resolvent") {
    const PhaseType first = optimal_positive_chain(5).phd;
    const PhaseType second = reverse_transform(first);
    for (double s : {0.0, 0.3, 1.0, 4.5}) {
        CHECK(laplace(first, s) == doctest::Approx(laplace_resolvent(first, s)).epsilon(1e-12));
        CHECK(laplace(second, s) == doctest::Approx(laplace_resolvent(second, s)).epsilon(1e-12));
        CHECK(laplace(first, s) == doctest::Approx(1.0 / (1.0 + s)).epsilon(1e-12));
    }
    Matrix D(2, 2);
    D << -2, 1, 0, -1;
    CHECK_THROWS_AS(laplace(PhaseType(Vector::Constant(2, 0.5), D), 1.0), InvalidModel);
}

TEST_CASE("scaling divides the mean") {
    const PhaseType x = scale(optimal_positive_chain(3).phd, 4.0);
    CHECK(mean(x) == doctest::Approx(0.25));
    CHECK_THROWS_AS(scale(x, -1.0), InvalidModel);
}

TEST_CASE("sequential composition: rho agrees with the second moment of the sum") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const PhaseType X = random_acyclic(1 + trial % 4, rng);
        const PhaseType Y = random_acyclic(1 + (trial / 4) % 3, rng);
        // Psi must carry psi_X onto pi_Y: row-normalize a random coupling
        const Vector psi = descriptors(X).psi;
        Matrix Psi = oracle::random_coupling(psi, Y.pi(), rng);
        for (int i = 0; i < X.order(); ++i) Psi.row(i) /= psi(i);
        const Composition c = seq_compose(X, Y, Psi);
        CHECK(c.phd.order() == X.order() + Y.order());
        const double ex = mean(X), ey = mean(Y);
        const double vx = variance(X), vy = variance(Y);
        const double s2 = moments(c.phd, 2)[1];
        const double exy = (s2 - moments(X, 2)[1] - moments(Y, 2)[1]) / 2.0;
        CHECK(c.rho == doctest::Approx((exy - ex * ey) / std::sqrt(vx * vy)).epsilon(1e-9));
        CHECK(mean(c.phd) == doctest::Approx(ex + ey));
    }
}

TEST_CASE("sequential composition of exponentials is Erlang") {
    const Composition c = seq_compose(PhaseType::exponential(2.0), PhaseType::exponential(2.0), Matrix::Ones(1, 1));
    CHECK(c.phd.D().isApprox(erlang_matrix(2, 2.0)));
    CHECK(c.rho == doctest::Approx(0.0));
    CHECK_THROWS_AS(seq_compose(PhaseType::exponential(1.0), PhaseType::exponential(1.0), Matrix::Constant(1, 1, 0.5)),
                    Infeasible);
}

TEST_CASE("parallel composition: the maximum of independent variables") {
    std::mt19937_64 rng(5);
    const PhaseType X = random_acyclic(3, rng), Y = random_acyclic(2, rng);
    const Matrix independent = X.pi() * Y.pi().transpose();
    const Composition c = par_compose(X, Y, independent);
    CHECK(c.phd.order() == 3 * 2 + 3 + 2);
    CHECK(c.rho == doctest::Approx(0.0).epsilon(1e-12));
    // E max = int 1 - F_X F_Y, F from quadrature of each marginal separately
    const double T = 400.0;
    const int steps = 200000;
    const double h = T / steps;
    const Matrix sx = (X.D() * h).exp(), sy = (Y.D() * h).exp();
    Eigen::RowVectorXd vx = X.pi().transpose(), vy = Y.pi().transpose();
    double integral = 0.0;
    for (int k = 0; k <= steps; ++k) {
        const double w = (k == 0 || k == steps) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        integral += w * (1.0 - (1.0 - vx.sum()) * (1.0 - vy.sum()));
        vx = vx * sx;
        vy = vy * sy;
    }
    CHECK(mean(c.phd) == doctest::Approx(integral * h / 3.0).epsilon(1e-8));
}

TEST_CASE("parallel self-coupling of the 2-phase optimal chain") {
    const PhaseType X = optimal_positive_chain(2).phd;
    const Matrix diag = Matrix(X.pi().asDiagonal());
    CHECK(par_compose(X, X, diag).rho == doctest::Approx(0.25));
    Matrix anti = Matrix::Zero(2, 2);
    anti(0, 1) = anti(1, 0) = 0.5;
    CHECK(par_compose(X, X, anti).rho == doctest::Approx(-0.25));
    CHECK_THROWS_AS(par_compose(X, X, Matrix::Constant(2, 2, 0.3)), Infeasible);
}
