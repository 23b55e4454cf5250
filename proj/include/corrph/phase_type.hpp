#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace corrph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input does not describe a valid model (bad sub-generator, bad marginals, ...).
class InvalidModel : public Error {
public:
    using Error::Error;
};

/// A requested target (correlation, utilization, marginal) cannot be met.
class Infeasible : public Error {
public:
    using Error::Error;
};

inline constexpr double default_tolerance = 1e-9;

/// Initial vector plus sub-generator of an absorbing CTMC.
///
/// The constructor checks the structural invariants: pi is a probability
/// vector, D has a negative diagonal, non-negative off-diagonal entries and
/// non-positive row sums, and from every state some state with a positive
/// exit rate is reachable (equivalently, D is non-singular).
class PhaseType {
public:
    PhaseType(Vector pi, Matrix D, double tol = default_tolerance);

    static PhaseType exponential(double rate);

    int order() const { return static_cast<int>(pi_.size()); }
    const Vector& pi() const { return pi_; }
    const Matrix& D() const { return D_; }

    /// d = -D 1
    Vector exit_rates() const;

    /// True when the off-diagonal support of D has no cycle.
    bool is_acyclic() const;

private:
    Vector pi_;
    Matrix D_;
};

enum class SolveMethod { automatic, triangular, lu };

/// Derived vectors that all the correlation formulas read.
struct Descriptors {
    Matrix M;    // -D^{-1}
    Vector m;    // M 1, conditional means given the entry state
    Vector d;    // exit rates
    Matrix B;    // M diag(d)
    Vector psi;  // pi B, exit-state probabilities
    // Conditional absorption time given the exit state; empty where psi == 0.
    std::vector<std::optional<double>> a;
    Vector phi;  // stationary vector of D + d pi

    /// a with undefined entries replaced by zero.
    Vector a_or_zero() const;
};

/// Topological order of the states of an acyclic D (every transition goes
/// from an earlier to a later state), or nullopt when D has a cycle.
std::optional<std::vector<int>> topological_order(const Matrix& D);

/// -D^{-1}, by back-substitution along a topological order or by LU.
Matrix inverse_generator(const Matrix& D, SolveMethod method = SolveMethod::automatic);

Descriptors descriptors(const PhaseType& phd, SolveMethod method = SolveMethod::automatic);

/// k! pi M^k 1 for k = 1..count.
std::vector<double> moments(const PhaseType& phd, int count);

double mean(const PhaseType& phd);
double variance(const PhaseType& phd);

enum class CanonicalTag { first, second, none };

struct CanonicalForm {
    CanonicalTag tag = CanonicalTag::none;
    std::vector<double> rates;      // mu_1 .. mu_n
    std::vector<double> sub_rates;  // mu_{i,i+1}, second form only
};

/// Recognizes the bidiagonal first (general pi, single exit, nondecreasing
/// rates) and second (pi = e_1, nonincreasing rates) canonical forms. An
/// order-1 representation is reported as first canonical.
CanonicalForm classify(const PhaseType& phd, double tol = default_tolerance);

/// Product-form Laplace transform of a canonical representation. Throws
/// InvalidModel for non-canonical input; use laplace_resolvent instead.
double laplace(const PhaseType& phd, double s);

/// pi (sI - D)^{-1} d for any representation.
double laplace_resolvent(const PhaseType& phd, double s);

struct ExponentialCheck {
    bool passed = false;
    double max_deviation = 0.0;  // largest relative deviation, survival or moments
    double max_survival_deviation = 0.0;
    double max_moment_deviation = 0.0;
};

/// Compares survival function and moments 1..2n against Exp(lambda).
/// The survival grid has 24 geometric points on [0.01/lambda, 20/lambda].
ExponentialCheck is_exponential(const PhaseType& phd, double lambda, double tol = default_tolerance);

/// (pi, lambda D); the mean becomes E(X)/lambda.
PhaseType scale(const PhaseType& phd, double lambda);

struct Composition {
    PhaseType phd;
    double rho;
};

/// Sequential composition: X, then Y entered through the transfer matrix Psi
/// from the exit state of X. Psi is n_X x n_Y, row stochastic, psi_X Psi = pi_Y.
Composition seq_compose(const PhaseType& X, const PhaseType& Y, const Matrix& Psi,
                        double tol = default_tolerance);

/// Coefficient of correlation of the sequential composition, without building it.
double seq_rho(const Descriptors& dx, const PhaseType& X, const Descriptors& dy, const PhaseType& Y,
               const Matrix& Psi);

/// Parallel composition started from the joint initial matrix pi_XY
/// (n_X x n_Y, row sums pi_X, column sums pi_Y). Absorbs at max(X, Y).
Composition par_compose(const PhaseType& X, const PhaseType& Y, const Matrix& pi_XY,
                        double tol = default_tolerance);

double par_rho(const Descriptors& dx, const PhaseType& X, const Descriptors& dy, const PhaseType& Y,
               const Matrix& pi_XY);

}  // namespace corrph
