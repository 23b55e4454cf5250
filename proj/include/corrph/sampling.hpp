#pragma once

#include "corrph/phase_type.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace corrph {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
    // 53 random bits in (0, 1)
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double exponential_draw(Rng& rng, double rate) { return -std::log(uniform01(rng)) / rate; }

/// Inverse-CDF draw from a finite distribution.
class DiscreteSampler {
public:
    DiscreteSampler() = default;
    explicit DiscreteSampler(std::span<const double> weights) {
        cdf_.reserve(weights.size());
        double total = 0.0;
        for (double w : weights) cdf_.push_back(total += std::max(w, 0.0));
        for (double& c : cdf_) c /= total;
    }
    explicit DiscreteSampler(const Vector& weights)
        : DiscreteSampler(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size()))) {}

    int operator()(Rng& rng) const {
        const double u = uniform01(rng);
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf_.begin(), std::ssize(cdf_) - 1));
    }

private:
    std::vector<double> cdf_;
};

/// Phase-by-phase simulation of an absorbing CTMC, so the exit state is observed.
class PhaseTypeSampler {
public:
    struct Draw {
        double time = 0.0;
        int exit_state = -1;
        double head_time = 0.0;  // time spent in states below `split`
    };

    explicit PhaseTypeSampler(const PhaseType& phd) : initial_(phd.pi()) {
        const auto n = phd.order();
        const Vector d = phd.exit_rates();
        rate_.resize(n);
        jump_.resize(n);
        for (int i = 0; i < n; ++i) {
            rate_[i] = -phd.D()(i, i);
            std::vector<double> w(static_cast<std::size_t>(n) + 1, 0.0);
            for (int j = 0; j < n; ++j)
                if (j != i) w[j] = std::max(phd.D()(i, j), 0.0);
            w[n] = d(i);
            jump_[i] = DiscreteSampler(w);
        }
    }

    int order() const { return static_cast<int>(rate_.size()); }

    Draw run(int state, Rng& rng, int split = -1) const {
        Draw out;
        const int n = order();
        while (true) {
            const double hold = exponential_draw(rng, rate_[state]);
            out.time += hold;
            if (state < split) out.head_time += hold;
            const int next = jump_[state](rng);
            if (next == n) {
                out.exit_state = state;
                return out;
            }
            state = next;
        }
    }

    Draw sample(Rng& rng, int split = -1) const { return run(initial_(rng), rng, split); }

private:
    DiscreteSampler initial_;
    std::vector<double> rate_;
    std::vector<DiscreteSampler> jump_;
};

}  // namespace corrph
