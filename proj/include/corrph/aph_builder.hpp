#pragma once

#include "corrph/phase_type.hpp"

#include <span>
#include <vector>

namespace corrph {

/// Parameters of a chain grown one appended phase at a time.
///
/// step_p[k] / step_q[k] are the parameters of the step that grows the
/// chain from k+1 to k+2 phases. rho_plus / rho_minus hold the bound of
/// the family the chain was built for (NaN where not applicable).
struct ChainSpec {
    int n = 1;
    std::vector<double> rates;
    std::vector<double> step_p;
    std::vector<double> step_q;
    double rho_plus = 0.0;
    double rho_minus = 0.0;
};

struct Chain {
    PhaseType phd;
    ChainSpec spec;
};

enum class ChainFamily { optimal, blni };

/// pi(i) = (1/mu_i) prod_{j>i} (1 - 1/mu_j); requires mu_1 = 1 and mu_j >= 1.
PhaseType first_canonical_from_rates(std::span<const double> rates, bool require_sorted = false,
                                     double tol = default_tolerance);

/// Grows an Exp(1) representation by one phase: pi' = ((1-p) pi, p), new
/// column (1-q) d, new rate (1 - q + p q) / p.
PhaseType append_phase(const PhaseType& phd, double p, double q);

/// Prepends a phase: pi' = (p, (1-p) pi), first row (-mu, (mu-1) pi).
/// p = 1 with mu >= |D(1,1)| yields the second canonical form.
PhaseType prepend_phase(const PhaseType& phd, double p, double mu);

/// rho+ of the optimal positive chain by its recurrence.
double rho_plus_optimal(int n);
/// 1 - H_n / n
double rho_plus_blni(int n);
/// 1 - sum 1/i^2
double rho_minus_blni(int n);

Chain optimal_positive_chain(int n);

/// First canonical chain with mu_i = i and uniform initial vector.
Chain blni_chain(int n);

Chain build_chain(ChainFamily family, int n);

/// Smallest order whose bound reaches rho_target. Positive targets use
/// family's rho+, negative targets need the BlNi family (rho-).
int min_phases_for_rho(double rho_target, ChainFamily family);
/// Optimal chain for positive targets, BlNi chain for negative ones.
int min_phases_for_rho(double rho_target);
ChainFamily default_family(double rho_target);

/// Time reversal through the restart-stationary vector phi followed by an
/// index reversal, so an upper triangular input stays upper triangular.
/// m' = a, psi' = pi, a' = m (index reversed).
PhaseType reverse_transform(const PhaseType& phd, double tol = default_tolerance);

/// sum pi(i) m(i)^2 - 1 of the first canonical chain with the given rates.
double chain_rho_plus(std::span<const double> rates);

/// d rho / d mu_i^{-1} of chain_rho_plus, analytic.
Vector rho_gradient(std::span<const double> rates);
Vector rho_gradient_finite_difference(std::span<const double> rates, double step = 1e-6);
/// Analytic gradient of a first canonical chain (throws on other input).
Vector gradient_check(const PhaseType& chain);

struct NegativeStep {
    double p = 0.0;
    double q = 0.0;
    double rho = 0.0;
};

/// rho- of the parallel self-coupling after append_phase(phd, p, q).
double negative_step_rho(const PhaseType& phd, double p, double q);

/// Coarse grid of grid x grid points over (p, q), then box refinement.
NegativeStep negative_step_search(const PhaseType& phd, int grid = 41);

struct ThreePhaseNegative {
    PhaseType phd;
    double rho = 0.0;
    double mu2 = 0.0;
    double mu3 = 0.0;
};

/// rho- of the 3-phase first canonical chain with pi(1) = pi(3) as a function of mu_3.
double three_phase_negative_rho(double mu3);
/// mu_2 solving (1 - 1/mu_2)(1 - 1/mu_3) = 1/mu_3.
double three_phase_mu2(double mu3);
ThreePhaseNegative negative3_special();

}  // namespace corrph
