#include "corrph/beyond_exp.hpp"

#include "corrph/aph_builder.hpp"
#include "corrph/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace corrph {

HyperExp::HyperExp(Vector pi, Vector rates, double tol) : pi_(std::move(pi)), rates_(std::move(rates)) {
    if (pi_.size() == 0 || pi_.size() != rates_.size()) throw InvalidModel("hyperexponential needs matching pi and rates");
    if (pi_.minCoeff() < -tol || std::abs(pi_.sum() - 1.0) > tol) throw InvalidModel("pi must be a probability vector");
    for (Eigen::Index i = 0; i < rates_.size(); ++i) {
        if (!(rates_(i) > 0.0)) throw InvalidModel("rates must be positive");
        if (i > 0 && !(rates_(i) > rates_(i - 1))) throw InvalidModel("rates must be strictly increasing");
    }
}

double HyperExp::moment(int i) const {
    double factorial = 1.0;
    for (int k = 2; k <= i; ++k) factorial *= k;
    return factorial * (pi_.array() / rates_.array().pow(i)).sum();
}

double HyperExp::variance() const {
    const double m1 = moment(1);
    return moment(2) - m1 * m1;
}

PhaseType HyperExp::phase_type() const { return PhaseType(pi_, Matrix((-rates_).asDiagonal())); }

double hyperexp_rho_max(const HyperExp& h) {
    const double var = h.variance(), m1 = h.mean();
    return 0.5 * (var - m1 * m1) / var;
}

double expanded_rho_plus(const HyperExp& h, const std::vector<int>& allocation) {
    if (static_cast<int>(allocation.size()) != h.order()) throw InvalidModel("allocation size must equal the number of phases");
    double weighted = 0.0;
    for (int i = 0; i < h.order(); ++i) {
        if (allocation[i] < 1) throw InvalidModel("each phase needs at least one state");
        const double mu = h.rates()(i);
        weighted += h.pi()(i) * rho_plus_optimal(allocation[i]) / (mu * mu);
    }
    const double m1 = h.mean();
    return (weighted + 0.5 * h.moment(2) - m1 * m1) / h.variance();
}

double diagonal_coupling_rho(const PhaseType& phd) {
    const Descriptors d = descriptors(phd);
    const double m1 = phd.pi().dot(d.m);
    return (phd.pi().dot(d.m.cwiseProduct(d.m)) - m1 * m1) / variance(phd);
}

ExpandedHyperExp expand_hyperexp(const HyperExp& h, const std::vector<int>& allocation, bool positive) {
    if (static_cast<int>(allocation.size()) != h.order()) throw InvalidModel("allocation size must equal the number of phases");
    int total = 0;
    for (int n_i : allocation) {
        if (n_i < 1) throw InvalidModel("each phase needs at least one state");
        total += n_i;
    }
    Vector pi = Vector::Zero(total);
    Matrix D = Matrix::Zero(total, total);
    std::vector<int> offset;
    int at = 0;
    for (int i = 0; i < h.order(); ++i) {
        const Chain chain = positive ? optimal_positive_chain(allocation[i]) : blni_chain(allocation[i]);
        const PhaseType block = scale(chain.phd, h.rates()(i));
        const int n_i = allocation[i];
        pi.segment(at, n_i) = h.pi()(i) * block.pi();
        D.block(at, at, n_i, n_i) = block.D();
        offset.push_back(at);
        at += n_i;
    }
    ExpandedHyperExp out{PhaseType(pi, D), allocation, std::move(offset), 0.0};
    if (positive) {
        out.rho = expanded_rho_plus(h, allocation);
    } else {
        out.rho = solve_transport(parallel_problem(out.phd, out.phd, Sense::minimize)).rho;
    }
    return out;
}

std::vector<int> greedy_allocate(const HyperExp& h, double rho_target) {
    if (!(rho_target < 1.0)) throw Infeasible("correlation target must be below 1");
    constexpr double slack = 1e-12;
    std::vector<int> allocation(h.order(), 1);
    std::vector<double> bound(h.order(), 0.0);  // rho+ of each block's current order
    while (expanded_rho_plus(h, allocation) < rho_target - slack) {
        int best = 0;
        double best_gain = -1.0;
        for (int i = 0; i < h.order(); ++i) {
            const double mu = h.rates()(i);
            const double gain = h.pi()(i) * (rho_plus_optimal(allocation[i] + 1) - bound[i]) / (mu * mu);
            if (gain > best_gain) {
                best_gain = gain;
                best = i;
            }
        }
        ++allocation[best];
        bound[best] = rho_plus_optimal(allocation[best]);
    }
    return allocation;
}

namespace {

struct FirstChain {
    Vector pi;
    std::vector<double> rates;
};

FirstChain first_canonical_chain(const PhaseType& chain) {
    const CanonicalForm form = classify(chain);
    if (form.tag != CanonicalTag::first) throw InvalidModel("Erlang expansion needs a first canonical chain");
    return {chain.pi(), form.rates};
}

void enumerate(int k, int n, int lowest, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(prefix.size()) == k) {
        out.push_back(prefix);
        return;
    }
    for (int j = lowest; j < n; ++j) {
        prefix.push_back(j);
        enumerate(k, n, j, prefix, out);
        prefix.pop_back();
    }
}

// Phase indices of the path multiset, sorted ascending.
std::vector<int> sorted_phases(const std::vector<int>& paths, int n) {
    std::vector<int> phases;
    for (int j : paths)
        for (int s = j; s < n; ++s) phases.push_back(s);
    std::sort(phases.begin(), phases.end());
    return phases;
}

// Lexicographic with the end of a sequence ranked after every index, so a
// sorted sequence precedes its own suffixes.
struct SuffixOrder {
    bool operator()(const std::vector<int>& x, const std::vector<int>& y) const {
        const std::size_t common = std::min(x.size(), y.size());
        for (std::size_t t = 0; t < common; ++t)
            if (x[t] != y[t]) return x[t] < y[t];
        return x.size() > y.size();
    }
};

}  // namespace

std::size_t erlang_path_count(int k, int n) {
    // C(n + k - 1, k) by the multiplicative formula, exact in integers.
    std::size_t c = 1;
    for (int i = 1; i <= k; ++i) c = c * static_cast<std::size_t>(n - 1 + i) / static_cast<std::size_t>(i);
    return c;
}

std::vector<ErlangPath> erlang_paths(int k, const Vector& chain_pi) {
    if (k < 1 || chain_pi.size() < 1) throw InvalidModel("Erlang expansion needs k >= 1 and a non-empty chain");
    const int n = static_cast<int>(chain_pi.size());
    std::vector<std::vector<int>> sets;
    std::vector<int> prefix;
    enumerate(k, n, 0, prefix, sets);
    std::vector<ErlangPath> out;
    out.reserve(sets.size());
    for (auto& s : sets) {
        // k! / prod c_j! prod pi_j^c_j, accumulated one factor at a time
        double prob = 1.0;
        int run = 0;
        for (int t = 0; t < k; ++t) {
            run = (t > 0 && s[t] == s[t - 1]) ? run + 1 : 1;
            prob *= static_cast<double>(t + 1) / run * chain_pi(s[t]);
        }
        out.push_back({std::move(s), prob});
    }
    return out;
}

PhaseType erlang_expand_in(int k, const PhaseType& chain) {
    const FirstChain c = first_canonical_chain(chain);
    const int n = static_cast<int>(c.rates.size());
    const std::vector<ErlangPath> paths = erlang_paths(k, c.pi);

    std::map<std::vector<int>, int, SuffixOrder> states;
    std::vector<std::vector<int>> heads;
    for (const auto& p : paths) {
        std::vector<int> seq = sorted_phases(p.paths, n);
        heads.push_back(seq);
        while (!seq.empty()) {
            states.emplace(seq, 0);
            seq.erase(seq.begin());
        }
    }
    int index = 0;
    for (auto& [seq, id] : states) id = index++;

    Vector pi = Vector::Zero(index);
    Matrix D = Matrix::Zero(index, index);
    for (std::size_t p = 0; p < paths.size(); ++p) pi(states.at(heads[p])) += paths[p].prob;
    for (const auto& [seq, id] : states) {
        const double rate = k * c.rates[seq.front()];
        D(id, id) = -rate;
        if (seq.size() > 1) D(id, states.at(std::vector<int>(seq.begin() + 1, seq.end()))) = rate;
    }
    return PhaseType(pi, D);
}

PhaseType erlang_expand_out(int k, const PhaseType& chain) { return reverse_transform(erlang_expand_in(k, chain)); }

PhaseType erlang_expand_full(int k, const PhaseType& chain, std::size_t max_states) {
    const FirstChain c = first_canonical_chain(chain);
    const int n = static_cast<int>(c.rates.size());
    const std::vector<ErlangPath> paths = erlang_paths(k, c.pi);
    std::size_t total = 0;
    for (const auto& p : paths)
        for (int j : p.paths) total += static_cast<std::size_t>(n - j);
    if (total > max_states) throw InvalidModel("full Erlang expansion exceeds the state limit");

    const auto size = static_cast<Eigen::Index>(total);
    Vector pi = Vector::Zero(size);
    Matrix D = Matrix::Zero(size, size);
    Eigen::Index at = 0;
    for (const auto& p : paths) {
        pi(at) = p.prob;
        std::vector<int> phases;
        for (int j : p.paths)
            for (int s = j; s < n; ++s) phases.push_back(s);
        for (std::size_t t = 0; t < phases.size(); ++t, ++at) {
            const double rate = k * c.rates[phases[t]];
            D(at, at) = -rate;
            if (t + 1 < phases.size()) D(at, at + 1) = rate;
        }
    }
    return PhaseType(pi, D);
}

}  // namespace corrph
