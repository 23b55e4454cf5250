#include "corrph/aph_builder.hpp"

#include "corrph/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace corrph {

namespace {

class KahanSum {
public:
    void add(double x) {
        const double y = x - carry_;
        const double t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

constexpr double target_slack = 1e-12;

// Closed-form pi and m of a first canonical chain; no validation, so the
// rates may leave the exponential family (used for derivatives).
void chain_vectors(std::span<const double> rates, std::vector<double>& pi, std::vector<double>& m) {
    const std::size_t n = rates.size();
    pi.assign(n, 0.0);
    m.assign(n, 0.0);
    double tail_product = 1.0, tail_sum = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        pi[k] = tail_product / rates[k];
        tail_product *= 1.0 - 1.0 / rates[k];
        tail_sum += 1.0 / rates[k];
        m[k] = tail_sum;
    }
}

}  // namespace

PhaseType first_canonical_from_rates(std::span<const double> rates, bool require_sorted, double tol) {
    const int n = static_cast<int>(rates.size());
    if (n == 0) throw InvalidModel("rate list is empty");
    if (std::abs(rates[0] - 1.0) > tol) throw InvalidModel("first rate of a normalized exponential chain must be 1");
    for (int i = 0; i < n; ++i) {
        if (rates[i] < 1.0 - tol) throw InvalidModel("rates below 1 force a negative initial probability");
        if (require_sorted && i > 0 && rates[i] < rates[i - 1] * (1.0 - tol))
            throw InvalidModel("rates of the first canonical form must be nondecreasing");
    }
    Vector pi(n);
    Matrix D = Matrix::Zero(n, n);
    double tail = 1.0;
    for (int i = n - 1; i >= 0; --i) {
        pi(i) = tail / rates[i];
        tail *= 1.0 - 1.0 / rates[i];
        D(i, i) = -rates[i];
        if (i + 1 < n) D(i, i + 1) = rates[i];
    }
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    return PhaseType(pi, D, tol);
}

PhaseType append_phase(const PhaseType& phd, double p, double q) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidModel("append_phase needs p in (0, 1)");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidModel("append_phase needs q in [0, 1]");
    const int n = phd.order();
    const double mu = (1.0 - q + p * q) / p;
    Vector pi(n + 1);
    pi.head(n) = (1.0 - p) * phd.pi();
    pi(n) = p;
    Matrix D = Matrix::Zero(n + 1, n + 1);
    D.topLeftCorner(n, n) = phd.D();
    D.col(n).head(n) = (1.0 - q) * phd.exit_rates();
    D(n, n) = -mu;
    return PhaseType(pi, D);
}

PhaseType prepend_phase(const PhaseType& phd, double p, double mu) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidModel("prepend_phase needs p in [0, 1]");
    if (!(mu >= 1.0)) throw InvalidModel("prepend_phase needs mu >= 1");
    const int n = phd.order();
    Vector pi(n + 1);
    pi(0) = p;
    pi.tail(n) = (1.0 - p) * phd.pi();
    Matrix D = Matrix::Zero(n + 1, n + 1);
    D(0, 0) = -mu;
    D.row(0).tail(n) = (mu - 1.0) * phd.pi().transpose();
    D.bottomRightCorner(n, n) = phd.D();
    return PhaseType(pi, D);
}

double rho_plus_optimal(int n) {
    if (n < 1) throw InvalidModel("order must be at least 1");
    double rho = 0.0;
    for (int k = 1; k < n; ++k) rho += 0.25 * (1.0 - rho) * (1.0 - rho);
    return rho;
}

double rho_plus_blni(int n) {
    if (n < 1) throw InvalidModel("order must be at least 1");
    KahanSum h;
    for (int i = 1; i <= n; ++i) h.add(1.0 / i);
    return 1.0 - h.value() / n;
}

double rho_minus_blni(int n) {
    if (n < 1) throw InvalidModel("order must be at least 1");
    KahanSum s;
    for (int i = n; i >= 1; --i) s.add(1.0 / (static_cast<double>(i) * i));
    return 1.0 - s.value();
}

Chain optimal_positive_chain(int n) {
    if (n < 1) throw InvalidModel("order must be at least 1");
    PhaseType phd = PhaseType::exponential(1.0);
    ChainSpec spec;
    spec.rates = {1.0};
    double rho = 0.0;
    for (int k = 1; k < n; ++k) {
        const double p = 0.5 * (1.0 - rho);
        phd = append_phase(phd, p, 0.0);
        spec.step_p.push_back(p);
        spec.step_q.push_back(0.0);
        spec.rates.push_back(1.0 / p);
        rho = (1.0 - p) * (rho + p);
    }
    spec.n = n;
    spec.rho_plus = rho;
    spec.rho_minus = std::numeric_limits<double>::quiet_NaN();
    return Chain{std::move(phd), std::move(spec)};
}

Chain blni_chain(int n) {
    if (n < 1) throw InvalidModel("order must be at least 1");
    ChainSpec spec;
    spec.n = n;
    for (int i = 1; i <= n; ++i) spec.rates.push_back(i);
    for (int k = 1; k < n; ++k) {
        spec.step_p.push_back(1.0 / (k + 1));
        spec.step_q.push_back(0.0);
    }
    spec.rho_plus = rho_plus_blni(n);
    spec.rho_minus = rho_minus_blni(n);
    PhaseType phd = first_canonical_from_rates(spec.rates, true);
    return Chain{std::move(phd), std::move(spec)};
}

Chain build_chain(ChainFamily family, int n) {
    return family == ChainFamily::optimal ? optimal_positive_chain(n) : blni_chain(n);
}

ChainFamily default_family(double rho_target) {
    return rho_target < 0.0 ? ChainFamily::blni : ChainFamily::optimal;
}

namespace {

// Dense representations beyond this order are out of reach anyway.
constexpr int max_chain_order = 100000;

void check_order(int n) {
    if (n > max_chain_order) throw Infeasible("target needs more than 100000 phases");
}

}  // namespace

int min_phases_for_rho(double rho_target, ChainFamily family) {
    if (!std::isfinite(rho_target) || rho_target >= 1.0)
        throw Infeasible("target correlation must lie below 1");
    if (rho_target >= 0.0) {
        if (family == ChainFamily::optimal) {
            double rho = 0.0;
            int n = 1;
            while (rho < rho_target - target_slack) {
                rho += 0.25 * (1.0 - rho) * (1.0 - rho);
                check_order(++n);
            }
            return n;
        }
        KahanSum h;
        h.add(1.0);
        int n = 1;
        while (1.0 - h.value() / n < rho_target - target_slack) {
            check_order(++n);
            h.add(1.0 / n);
        }
        return n;
    }
    const double limit = 1.0 - std::numbers::pi * std::numbers::pi / 6.0;
    if (rho_target <= limit) throw Infeasible("target correlation below the bivariate exponential minimum 1 - pi^2/6");
    if (family != ChainFamily::blni) throw Infeasible("negative targets are served by the BlNi chain");
    KahanSum s;
    s.add(1.0);
    int n = 1;
    while (1.0 - s.value() > rho_target + target_slack) {
        check_order(++n);
        s.add(1.0 / (static_cast<double>(n) * n));
    }
    return n;
}

int min_phases_for_rho(double rho_target) { return min_phases_for_rho(rho_target, default_family(rho_target)); }

PhaseType reverse_transform(const PhaseType& phd, double tol) {
    const int n = phd.order();
    const Descriptors desc = descriptors(phd);
    if (desc.phi.minCoeff() <= tol) throw InvalidModel("reverse_transform needs phi > 0; drop unused phases first");
    Matrix D(n, n);
    Vector pi(n);
    const Vector psi = desc.psi.cwiseMax(0.0) / desc.psi.cwiseMax(0.0).sum();
    for (int i = 0; i < n; ++i) {
        const int ri = n - 1 - i;
        pi(ri) = psi(i);
        for (int j = 0; j < n; ++j) {
            const int rj = n - 1 - j;
            D(ri, rj) = i == j ? phd.D()(i, i) : phd.D()(j, i) * desc.phi(j) / desc.phi(i);
        }
    }
    return PhaseType(pi, D, tol);
}

double chain_rho_plus(std::span<const double> rates) {
    std::vector<double> pi, m;
    chain_vectors(rates, pi, m);
    KahanSum s;
    for (std::size_t i = 0; i < pi.size(); ++i) s.add(pi[i] * m[i] * m[i]);
    return s.value() - 1.0;
}

Vector rho_gradient(std::span<const double> rates) {
    const std::size_t n = rates.size();
    std::vector<double> pi, m;
    chain_vectors(rates, pi, m);
    Vector g(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = rates[i];
        double value = pi[i] * (mu * m[i] + 2.0) * m[i];
        for (std::size_t j = 0; j < i; ++j) {
            // d pi(j) / d mu_i^{-1} = -pi(j) mu_i / (mu_i - 1), written without the division
            double dpi = -1.0 / rates[j];
            for (std::size_t k = j + 1; k < n; ++k)
                if (k != i) dpi *= 1.0 - 1.0 / rates[k];
            value += 2.0 * pi[j] * m[j] + dpi * m[j] * m[j];
        }
        g(static_cast<Eigen::Index>(i)) = value;
    }
    return g;
}

Vector rho_gradient_finite_difference(std::span<const double> rates, double step) {
    const std::size_t n = rates.size();
    Vector g(static_cast<Eigen::Index>(n));
    std::vector<double> shifted(rates.begin(), rates.end());
    for (std::size_t i = 0; i < n; ++i) {
        const double x = 1.0 / rates[i];
        shifted[i] = 1.0 / (x + step);
        const double up = chain_rho_plus(shifted);
        shifted[i] = 1.0 / (x - step);
        const double down = chain_rho_plus(shifted);
        shifted[i] = rates[i];
        g(static_cast<Eigen::Index>(i)) = (up - down) / (2.0 * step);
    }
    return g;
}

Vector gradient_check(const PhaseType& chain) {
    const CanonicalForm form = classify(chain);
    if (form.tag != CanonicalTag::first) throw InvalidModel("gradient_check expects a first canonical chain");
    return rho_gradient(form.rates);
}

double negative_step_rho(const PhaseType& phd, double p, double q) {
    const PhaseType grown = append_phase(phd, p, q);
    return monotone_coupling(parallel_problem(grown, grown, Sense::minimize)).rho;
}

NegativeStep negative_step_search(const PhaseType& phd, int grid) {
    grid = std::max(grid, 3);
    constexpr double p_lo = 1e-6, p_hi = 1.0 - 1e-6;
    NegativeStep best{0.5, 0.0, std::numeric_limits<double>::infinity()};
    auto consider = [&](double p, double q) {
        const double rho = negative_step_rho(phd, p, q);
        if (rho < best.rho) best = NegativeStep{p, q, rho};
    };
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j)
            consider(p_lo + (p_hi - p_lo) * i / (grid - 1), static_cast<double>(j) / (grid - 1));

    double hp = (p_hi - p_lo) / (grid - 1), hq = 1.0 / (grid - 1);
    for (int round = 0; round < 60; ++round) {
        const NegativeStep centre = best;
        for (int i = -2; i <= 2; ++i)
            for (int j = -2; j <= 2; ++j) {
                const double p = std::clamp(centre.p + 0.5 * i * hp, p_lo, p_hi);
                const double q = std::clamp(centre.q + 0.5 * j * hq, 0.0, 1.0);
                consider(p, q);
            }
        hp *= 0.5;
        hq *= 0.5;
    }
    return best;
}

double three_phase_mu2(double mu3) { return (mu3 - 1.0) / (mu3 - 2.0); }

double three_phase_negative_rho(double mu3) {
    const std::vector<double> rates{1.0, three_phase_mu2(mu3), mu3};
    const PhaseType phd = first_canonical_from_rates(rates);
    return monotone_coupling(parallel_problem(phd, phd, Sense::minimize)).rho;
}

ThreePhaseNegative negative3_special() {
    // Golden-section search; the objective is unimodal on this bracket.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 2.62, hi = 6.0;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = three_phase_negative_rho(x1), f2 = three_phase_negative_rho(x2);
    while (hi - lo > 1e-10) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = three_phase_negative_rho(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = three_phase_negative_rho(x2);
        }
    }
    const double mu3 = 0.5 * (lo + hi);
    const double mu2 = three_phase_mu2(mu3);
    const std::vector<double> rates{1.0, mu2, mu3};
    PhaseType phd = first_canonical_from_rates(rates, true);
    return ThreePhaseNegative{std::move(phd), three_phase_negative_rho(mu3), mu2, mu3};
}

}  // namespace corrph
