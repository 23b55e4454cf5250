#pragma once

#include "corrph/phase_type.hpp"

#include <cstddef>
#include <vector>

namespace corrph {

/// Mixture of exponentials with strictly increasing rates.
class HyperExp {
public:
    HyperExp(Vector pi, Vector rates, double tol = default_tolerance);

    int order() const { return static_cast<int>(pi_.size()); }
    const Vector& pi() const { return pi_; }
    const Vector& rates() const { return rates_; }

    /// i! sum pi(j) / mu_j^i
    double moment(int i) const;
    double mean() const { return moment(1); }
    double variance() const;

    /// (pi, -diag(rates))
    PhaseType phase_type() const;

private:
    Vector pi_, rates_;
};

/// (1/2) (sigma^2 - E(T)^2) / sigma^2
double hyperexp_rho_max(const HyperExp& h);

struct ExpandedHyperExp {
    PhaseType phd;
    std::vector<int> allocation;
    std::vector<int> offset;  // first state of each phase's block
    double rho = 0.0;         // rho+ (closed form) or rho- (LP), depending on the sign
};

/// Replaces phase i by an Exp(mu_i) chain of order allocation[i]: the optimal
/// positive chain for positive = true, the BlNi chain otherwise.
ExpandedHyperExp expand_hyperexp(const HyperExp& h, const std::vector<int>& allocation, bool positive = true);

/// rho+ of the positively expanded hyperexponential from the chain bounds alone.
double expanded_rho_plus(const HyperExp& h, const std::vector<int>& allocation);

/// (sum pi(j) m(j)^2 - E(T)^2) / sigma^2 on a representation: the diagonal
/// self-coupling of the parallel composition.
double diagonal_coupling_rho(const PhaseType& phd);

/// Adds phases one at a time to the block with the largest gain until
/// expanded_rho_plus reaches rho_target.
std::vector<int> greedy_allocate(const HyperExp& h, double rho_target);

/// A multiset of k chain paths (sorted 0-based path indices) with its probability.
struct ErlangPath {
    std::vector<int> paths;
    double prob = 0.0;
};

/// Paths of a first canonical chain: path j enters at state j and runs to the end.
/// Multisets are listed in lexicographic order.
std::vector<ErlangPath> erlang_paths(int k, const Vector& chain_pi);

/// C(n + k - 1, k)
std::size_t erlang_path_count(int k, int n);

/// Erlang-k with mean 1 from a normalized first canonical chain (rates are
/// multiplied by k). Common suffixes of the sorted phase sequences share
/// states; entry states follow the lexicographic path order and a single
/// exit state comes last.
PhaseType erlang_expand_in(int k, const PhaseType& chain);

/// Single entry, one exit state per path: time reversal of erlang_expand_in.
PhaseType erlang_expand_out(int k, const PhaseType& chain);

/// Every path kept separate, stage sub-paths concatenated in path order.
/// Throws InvalidModel above max_states.
PhaseType erlang_expand_full(int k, const PhaseType& chain, std::size_t max_states = 100000);

}  // namespace corrph
