#pragma once

#include "corrph/phase_type.hpp"

#include <optional>

namespace corrph {

enum class Sense { minimize, maximize };

/// Transportation problem with product cost c(i, j) = row_value(i) * col_value(j).
///
/// row_sd / col_sd are the standard deviations of the two coupled random
/// variables; when absent the marginals are taken to be exponential, whose
/// standard deviation equals the mean (row_mass . row_value).
struct TransportProblem {
    Vector row_mass;
    Vector col_mass;
    Vector row_value;
    Vector col_value;
    Sense sense = Sense::maximize;
    std::optional<double> row_sd;
    std::optional<double> col_sd;
};

struct Coupling {
    Matrix flow;
    double objective = 0.0;  // sum F(i,j) row_value(i) col_value(j)
    double rho = 0.0;
};

/// Rows pi_X with values m_X, columns pi_Y with values m_Y.
TransportProblem parallel_problem(const PhaseType& X, const PhaseType& Y, Sense sense);

/// Rows psi_X with values a_X, columns pi_Y with values m_Y; a flow F gives
/// the transfer matrix Psi(i, :) = F(i, :) / psi_X(i).
TransportProblem sequential_problem(const PhaseType& X, const PhaseType& Y, Sense sense);

/// Coefficient of correlation realized by a flow.
double realized_rho(const TransportProblem& problem, const Matrix& flow);

/// Optimal basic flow by the transportation simplex (MODI potentials,
/// Dantzig pricing with a Bland fallback on degenerate stalls). The returned
/// flow is checked for non-negative reduced costs before it is handed back.
Coupling solve_transport(const TransportProblem& problem);

/// Closed-form optimum for product costs: both sides sorted by value
/// (columns reversed for minimization) and filled north-west corner first.
Coupling monotone_coupling(const TransportProblem& problem);

/// Convex combination of an extreme coupling with the independent one
/// that realizes rho_target.
Coupling target_coupling(const TransportProblem& problem, const Coupling& extreme, double rho_target);

/// Row-normalizes a flow into a transfer matrix; rows without exit mass get pi_Y.
Matrix to_transfer_matrix(const Matrix& flow, const Vector& psi_X, const Vector& pi_Y);

}  // namespace corrph
