#pragma once

#include "corrph/coupling.hpp"
#include "corrph/phase_type.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace corrph {

/// Every path of a canonical chain as its own branch of states.
///
/// Path i (0-based) has i+1 phases; paths are stored one after the other
/// in order of increasing length. entry[i] / exit[i] are state indices.
struct PathExpansion {
    PhaseType phd;
    std::vector<int> entry;
    std::vector<int> exit;
    Vector path_prob;
};

/// Markovian arrival process (D0, D1).
class Map {
public:
    /// The embedded stationary vector is derived from P = -D0^{-1} D1. When P
    /// has several closed classes the classes are weighted by their
    /// absorption probability from `start` (uniform if empty) and a warning
    /// is recorded.
    Map(Matrix D0, Matrix D1, const Vector& start = Vector(), double tol = 1e-10);

    const Matrix& D0() const { return D0_; }
    const Matrix& D1() const { return D1_; }
    const Matrix& P() const { return P_; }
    int order() const { return static_cast<int>(D0_.rows()); }
    /// pi P = pi
    const Vector& embedded() const { return embedded_; }
    /// Stationary vector of D0 + D1.
    const Vector& stationary() const { return stationary_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Marginal distribution (embedded, D0).
    PhaseType marginal() const;

private:
    Matrix D0_, D1_, P_;
    Vector embedded_, stationary_;
    std::vector<std::string> warnings_;
};

PathExpansion path_expand(const PhaseType& canonical);

/// Transportation problem over the expansion: rows (psi', a'), columns (pi', m').
TransportProblem map_problem(const PathExpansion& expansion, Sense sense);

/// D1(i, j) = d(i) nu(i, j) / psi'(i). nu row sums equal psi', column sums pi'.
Map build_map(const PathExpansion& expansion, const Matrix& nu, double tol = 1e-10);

/// Lag-k coefficient of autocorrelation of the stationary interval sequence.
double autocorrelation(const Map& map, int lag = 1);

struct AutocorrBounds {
    double rho_min = 0.0;
    double rho_max = 0.0;
    Coupling nu_min;
    Coupling nu_max;
};

AutocorrBounds autocorr_bounds(const PathExpansion& expansion);

/// Autocorrelation bounds of a raw representation used directly as D0.
AutocorrBounds autocorr_bounds(const PhaseType& phd);

/// Inter-event times of a stationary MAP run, started from the embedded vector.
std::vector<double> simulate_intervals(const Map& map, std::size_t count, std::uint64_t seed);

struct SampleCorrelation {
    double value = 0.0;
    double standard_error = 0.0;  // from batch means
};

/// Lag-k sample correlation with a batch-means standard error.
SampleCorrelation lag_correlation(const std::vector<double>& series, int lag = 1, int batches = 50);

struct Order2Scan {
    std::size_t samples = 0;
    double max_abs_bound = 0.0;
};

/// Random order-2 acyclic Exp(1) representations (appended and prepended
/// families); their autocorrelation bounds must all vanish.
Order2Scan order2_impossibility_scan(std::size_t num_samples, std::uint64_t seed);

}  // namespace corrph
