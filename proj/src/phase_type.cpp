#include "corrph/phase_type.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <deque>

namespace corrph {

namespace {

double diagonal_scale(const Matrix& D) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < D.rows(); ++i) s = std::max(s, std::abs(D(i, i)));
    return s > 0.0 ? s : 1.0;
}

// States from which some exit state is reachable along positive rates.
bool all_states_drain(const Matrix& D, const Vector& d) {
    const auto n = D.rows();
    std::vector<char> drains(n, 0);
    std::deque<Eigen::Index> queue;
    for (Eigen::Index i = 0; i < n; ++i)
        if (d(i) > 0.0) {
            drains[i] = 1;
            queue.push_back(i);
        }
    while (!queue.empty()) {
        const auto j = queue.front();
        queue.pop_front();
        for (Eigen::Index i = 0; i < n; ++i)
            if (!drains[i] && i != j && D(i, j) > 0.0) {
                drains[i] = 1;
                queue.push_back(i);
            }
    }
    return std::all_of(drains.begin(), drains.end(), [](char c) { return c != 0; });
}

Vector clean_exit_rates(const Matrix& D) {
    Vector d = -D.rowwise().sum();
    const double floor = 1e-13 * diagonal_scale(D);
    for (Eigen::Index i = 0; i < d.size(); ++i)
        if (std::abs(d(i)) <= floor) d(i) = 0.0;
    return d;
}

}  // namespace

PhaseType::PhaseType(Vector pi, Matrix D, double tol) : pi_(std::move(pi)), D_(std::move(D)) {
    const auto n = pi_.size();
    if (n == 0) throw InvalidModel("phase-type representation must have at least one phase");
    if (D_.rows() != n || D_.cols() != n)
        throw InvalidModel("sub-generator dimension does not match initial vector");
    if (!pi_.allFinite() || !D_.allFinite()) throw InvalidModel("non-finite entry in representation");
    if (pi_.minCoeff() < -tol) throw InvalidModel("initial vector has a negative entry");
    if (std::abs(pi_.sum() - 1.0) > tol) throw InvalidModel("initial vector does not sum to one");
    const double scale = diagonal_scale(D_);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(D_(i, i) < 0.0)) throw InvalidModel("not a valid sub-generator: non-negative diagonal entry");
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && D_(i, j) < -tol * scale)
                throw InvalidModel("not a valid sub-generator: negative off-diagonal entry");
        if (D_.row(i).sum() > tol * scale)
            throw InvalidModel("not a valid sub-generator: positive row sum");
    }
    if (!all_states_drain(D_, exit_rates())) throw InvalidModel("not a valid sub-generator: singular matrix");
}

PhaseType PhaseType::exponential(double rate) {
    if (!(rate > 0.0)) throw InvalidModel("exponential rate must be positive");
    return PhaseType(Vector::Ones(1), Matrix::Constant(1, 1, -rate));
}

Vector PhaseType::exit_rates() const { return clean_exit_rates(D_); }

bool PhaseType::is_acyclic() const { return topological_order(D_).has_value(); }

Vector Descriptors::a_or_zero() const {
    Vector out(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) out(static_cast<Eigen::Index>(i)) = a[i].value_or(0.0);
    return out;
}

std::optional<std::vector<int>> topological_order(const Matrix& D) {
    const int n = static_cast<int>(D.rows());
    std::vector<int> indegree(n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && D(i, j) > 0.0) ++indegree[j];
    std::deque<int> ready;
    for (int i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push_back(i);
    std::vector<int> order;
    order.reserve(n);
    while (!ready.empty()) {
        const int i = ready.front();
        ready.pop_front();
        order.push_back(i);
        for (int j = 0; j < n; ++j)
            if (i != j && D(i, j) > 0.0 && --indegree[j] == 0) ready.push_back(j);
    }
    if (static_cast<int>(order.size()) != n) return std::nullopt;
    return order;
}

Matrix inverse_generator(const Matrix& D, SolveMethod method) {
    const auto n = D.rows();
    std::optional<std::vector<int>> order;
    if (method != SolveMethod::lu) order = topological_order(D);
    if (method == SolveMethod::triangular && !order)
        throw InvalidModel("triangular solve requested for a cyclic sub-generator");

    if (order) {
        Matrix A(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) A(r, c) = -D((*order)[r], (*order)[c]);
        const Matrix Ainv = A.triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
        Matrix M(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) M((*order)[r], (*order)[c]) = Ainv(r, c);
        return M;
    }
    Eigen::PartialPivLU<Matrix> lu(-D);
    if (!(std::abs(lu.determinant()) > 0.0)) throw InvalidModel("not a valid sub-generator: singular matrix");
    return lu.inverse();
}

Descriptors descriptors(const PhaseType& phd, SolveMethod method) {
    Descriptors out;
    const auto n = phd.order();
    out.M = inverse_generator(phd.D(), method);
    out.m = out.M.rowwise().sum();
    out.d = phd.exit_rates();
    out.B = out.M * out.d.asDiagonal();
    out.psi = (phd.pi().transpose() * out.B).transpose();
    const Vector piM = (phd.pi().transpose() * out.M).transpose();
    const Vector weighted = (piM.transpose() * out.B).transpose();  // pi M B(:, i)
    out.a.assign(static_cast<std::size_t>(n), std::nullopt);
    for (Eigen::Index i = 0; i < n; ++i)
        if (out.psi(i) > 0.0) out.a[static_cast<std::size_t>(i)] = weighted(i) / out.psi(i);
    // phi (D + d pi) = 0 is solved by pi M / E(X) since pi M d = 1.
    out.phi = piM / piM.sum();
    return out;
}

std::vector<double> moments(const PhaseType& phd, int count) {
    const Matrix M = inverse_generator(phd.D());
    std::vector<double> out;
    Vector w = Vector::Ones(phd.order());
    double factorial = 1.0;
    for (int k = 1; k <= count; ++k) {
        w = M * w;
        factorial *= k;
        out.push_back(factorial * phd.pi().dot(w));
    }
    return out;
}

double mean(const PhaseType& phd) { return moments(phd, 1)[0]; }

double variance(const PhaseType& phd) {
    const auto mo = moments(phd, 2);
    return mo[1] - mo[0] * mo[0];
}

CanonicalForm classify(const PhaseType& phd, double tol) {
    const int n = phd.order();
    const Matrix& D = phd.D();
    CanonicalForm out;
    const double scale = diagonal_scale(D);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (j != i && j != i + 1 && std::abs(D(i, j)) > tol * scale) return out;

    std::vector<double> rates(n), sub(n > 0 ? n - 1 : 0);
    for (int i = 0; i < n; ++i) rates[i] = -D(i, i);
    for (int i = 0; i + 1 < n; ++i) sub[i] = D(i, i + 1);

    bool first = true;
    for (int i = 0; i + 1 < n && first; ++i) {
        if (std::abs(sub[i] - rates[i]) > tol * rates[i]) first = false;
        if (rates[i] > rates[i + 1] * (1.0 + tol)) first = false;
    }
    if (first) {
        out.tag = CanonicalTag::first;
        out.rates = rates;
        return out;
    }

    bool second = std::abs(phd.pi()(0) - 1.0) <= tol;
    for (int i = 0; i + 1 < n && second; ++i) {
        if (rates[i] * (1.0 + tol) < rates[i + 1]) second = false;
        if (sub[i] < -tol * scale || sub[i] > rates[i] * (1.0 + tol)) second = false;
    }
    if (second) {
        out.tag = CanonicalTag::second;
        out.rates = rates;
        out.sub_rates = sub;
    }
    return out;
}

double laplace(const PhaseType& phd, double s) {
    if (s < 0.0) throw InvalidModel("Laplace argument must be non-negative");
    const CanonicalForm form = classify(phd);
    const int n = phd.order();
    const auto& mu = form.rates;
    if (form.tag == CanonicalTag::first) {
        double total = 0.0;
        double tail = 1.0;  // prod_{j=i}^{n} mu_j / (mu_j + s)
        for (int i = n - 1; i >= 0; --i) {
            tail *= mu[i] / (mu[i] + s);
            total += phd.pi()(i) * tail;
        }
        return total;
    }
    if (form.tag == CanonicalTag::second) {
        double total = 0.0;
        double reach = 1.0;  // prod_{j<i} mu_{j,j+1} / mu_j
        double lt = 1.0;     // prod_{k<=i} mu_k / (mu_k + s)
        for (int i = 0; i < n; ++i) {
            const double onward = i + 1 < n ? form.sub_rates[i] : 0.0;
            lt *= mu[i] / (mu[i] + s);
            total += (1.0 - onward / mu[i]) * reach * lt;
            reach *= onward / mu[i];
        }
        return total;
    }
    throw InvalidModel("representation is not in a canonical form; use laplace_resolvent");
}

double laplace_resolvent(const PhaseType& phd, double s) {
    if (s < 0.0) throw InvalidModel("Laplace argument must be non-negative");
    const auto n = phd.order();
    const Matrix A = s * Matrix::Identity(n, n) - phd.D();
    const Vector x = A.partialPivLu().solve(phd.exit_rates());
    return phd.pi().dot(x);
}

ExponentialCheck is_exponential(const PhaseType& phd, double lambda, double tol) {
    if (!(lambda > 0.0)) throw InvalidModel("exponential rate must be positive");
    ExponentialCheck out;
    const auto n = phd.order();

    // e^{lambda t} S(t) = pi exp((D + lambda I) t) 1 must stay at one.
    const Matrix shifted = phd.D() + lambda * Matrix::Identity(n, n);
    constexpr int grid_points = 24;
    const double t0 = 0.01 / lambda, t1 = 20.0 / lambda;
    const double ratio = std::pow(t1 / t0, 1.0 / (grid_points - 1));
    double t = t0;
    for (int k = 0; k < grid_points; ++k, t *= ratio) {
        const Matrix E = (shifted * t).exp();
        const double value = phd.pi().dot(E.rowwise().sum());
        out.max_survival_deviation = std::max(out.max_survival_deviation, std::abs(value - 1.0));
    }

    // lambda^k pi M^k 1 must equal one for k = 1..2n.
    const Matrix M = inverse_generator(phd.D());
    Vector w = Vector::Ones(n);
    for (int k = 1; k <= 2 * n; ++k) {
        w = lambda * (M * w);
        out.max_moment_deviation = std::max(out.max_moment_deviation, std::abs(phd.pi().dot(w) - 1.0));
    }
    out.max_deviation = std::max(out.max_survival_deviation, out.max_moment_deviation);
    out.passed = out.max_deviation <= tol;
    return out;
}

PhaseType scale(const PhaseType& phd, double lambda) {
    if (!(lambda > 0.0)) throw InvalidModel("scaling rate must be positive");
    return PhaseType(phd.pi(), lambda * phd.D());
}

double seq_rho(const Descriptors& dx, const PhaseType& X, const Descriptors& dy, const PhaseType& Y,
               const Matrix& Psi) {
    const Vector follow = Psi * dy.m;  // E(Y | X left from state i)
    double exy = 0.0;
    for (Eigen::Index i = 0; i < dx.psi.size(); ++i)
        if (dx.a[static_cast<std::size_t>(i)]) exy += dx.psi(i) * *dx.a[static_cast<std::size_t>(i)] * follow(i);
    const double ex = X.pi().dot(dx.m), ey = Y.pi().dot(dy.m);
    return (exy - ex * ey) / std::sqrt(variance(X) * variance(Y));
}

Composition seq_compose(const PhaseType& X, const PhaseType& Y, const Matrix& Psi, double tol) {
    const auto nx = X.order(), ny = Y.order();
    if (Psi.rows() != nx || Psi.cols() != ny) throw Infeasible("transfer matrix has the wrong shape");
    if (Psi.minCoeff() < -tol) throw Infeasible("transfer matrix has a negative entry");
    for (Eigen::Index i = 0; i < nx; ++i)
        if (std::abs(Psi.row(i).sum() - 1.0) > tol) throw Infeasible("transfer matrix rows must sum to one");
    const Descriptors dx = descriptors(X), dy = descriptors(Y);
    const Vector entry = (dx.psi.transpose() * Psi).transpose();
    if ((entry - Y.pi()).cwiseAbs().maxCoeff() > tol)
        throw Infeasible("transfer matrix violates psi_X Psi = pi_Y");

    Matrix D = Matrix::Zero(nx + ny, nx + ny);
    D.topLeftCorner(nx, nx) = X.D();
    D.topRightCorner(nx, ny) = dx.d.asDiagonal() * Psi;
    D.bottomRightCorner(ny, ny) = Y.D();
    Vector pi = Vector::Zero(nx + ny);
    pi.head(nx) = X.pi();
    return Composition{PhaseType(pi, D, tol), seq_rho(dx, X, dy, Y, Psi)};
}

double par_rho(const Descriptors& dx, const PhaseType& X, const Descriptors& dy, const PhaseType& Y,
               const Matrix& pi_XY) {
    const double exy = dx.m.dot(pi_XY * dy.m);
    const double ex = X.pi().dot(dx.m), ey = Y.pi().dot(dy.m);
    return (exy - ex * ey) / std::sqrt(variance(X) * variance(Y));
}

Composition par_compose(const PhaseType& X, const PhaseType& Y, const Matrix& pi_XY, double tol) {
    const Eigen::Index nx = X.order(), ny = Y.order();
    if (pi_XY.rows() != nx || pi_XY.cols() != ny) throw Infeasible("joint initial matrix has the wrong shape");
    if (pi_XY.minCoeff() < -tol) throw Infeasible("joint initial matrix has a negative entry");
    if ((pi_XY.rowwise().sum() - X.pi()).cwiseAbs().maxCoeff() > tol ||
        (pi_XY.colwise().sum().transpose() - Y.pi()).cwiseAbs().maxCoeff() > tol)
        throw Infeasible("joint initial matrix violates the marginals");
    const Eigen::Index nn = nx * ny, total = nn + nx + ny;
    if (total > 1'000'000) throw InvalidModel("parallel composition exceeds 10^6 states");

    const Vector dx = X.exit_rates(), dy = Y.exit_rates();
    Matrix D = Matrix::Zero(total, total);
    // Kronecker sum D_X (+) D_Y on the joint block, state (i, j) at i * ny + j.
    for (Eigen::Index i = 0; i < nx; ++i)
        for (Eigen::Index j = 0; j < ny; ++j) {
            const Eigen::Index r = i * ny + j;
            for (Eigen::Index k = 0; k < nx; ++k) D(r, k * ny + j) += X.D()(i, k);
            for (Eigen::Index l = 0; l < ny; ++l) D(r, i * ny + l) += Y.D()(j, l);
            D(r, nn + j) = dx(i);       // X done, Y continues in j
            D(r, nn + ny + i) = dy(j);  // Y done, X continues in i
        }
    D.block(nn, nn, ny, ny) = Y.D();
    D.block(nn + ny, nn + ny, nx, nx) = X.D();

    Vector pi = Vector::Zero(total);
    for (Eigen::Index i = 0; i < nx; ++i)
        for (Eigen::Index j = 0; j < ny; ++j) pi(i * ny + j) = pi_XY(i, j);
    const Descriptors ddx = descriptors(X), ddy = descriptors(Y);
    return Composition{PhaseType(pi, D, tol), par_rho(ddx, X, ddy, Y, pi_XY)};
}

}  // namespace corrph
