#include "corrph/map.hpp"

#include "corrph/aph_builder.hpp"
#include "corrph/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace corrph {

namespace {

// Strongly connected components (Tarjan) of the graph with edge i -> j when
// adjacency(i, j) > threshold, i != j.
std::vector<int> components(const Matrix& adjacency, double threshold, int& count) {
    const int n = static_cast<int>(adjacency.rows());
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1), stack;
    std::vector<char> on_stack(n, 0);
    int next_index = 0;
    count = 0;
    std::function<void(int)> visit = [&](int v) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = 1;
        for (int w = 0; w < n; ++w) {
            if (w == v || !(adjacency(v, w) > threshold)) continue;
            if (index[w] < 0) {
                visit(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            int w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = 0;
                comp[w] = count;
            } while (w != v);
            ++count;
        }
    };
    for (int v = 0; v < n; ++v)
        if (index[v] < 0) visit(v);
    return comp;
}

Vector class_stationary(const Matrix& P, const std::vector<int>& states) {
    const auto k = static_cast<Eigen::Index>(states.size());
    Matrix A(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c) A(r, c) = P(states[c], states[r]) - (r == c ? 1.0 : 0.0);
    A.row(k - 1).setOnes();
    Vector rhs = Vector::Zero(k);
    rhs(k - 1) = 1.0;
    return A.partialPivLu().solve(rhs);
}

}  // namespace

Map::Map(Matrix D0, Matrix D1, const Vector& start, double tol) : D0_(std::move(D0)), D1_(std::move(D1)) {
    const auto n = D0_.rows();
    if (D0_.cols() != n || D1_.rows() != n || D1_.cols() != n) throw InvalidModel("MAP matrices must be square and equal in size");
    const PhaseType check(Vector::Constant(n, 1.0 / static_cast<double>(n)), D0_);
    double scale = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(D0_(i, i)));
    if (D1_.minCoeff() < -tol * scale) throw InvalidModel("D1 has a negative entry");
    if ((D0_ + D1_).rowwise().sum().cwiseAbs().maxCoeff() > tol * scale)
        throw InvalidModel("rows of D0 + D1 must sum to zero");

    const Matrix M = inverse_generator(D0_);
    P_ = M * D1_;

    int generator_classes = 0;
    components(D0_ + D1_, 0.0, generator_classes);
    if (generator_classes > 1) warnings_.emplace_back("D0 + D1 is reducible");

    int count = 0;
    const std::vector<int> comp = components(P_, 1e-14, count);
    std::vector<char> closed(count, 1);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (comp[i] != comp[j] && P_(i, j) > 1e-14) closed[comp[i]] = 0;

    std::vector<std::vector<int>> classes;
    std::vector<int> transient;
    std::vector<int> class_of(count, -1);
    for (int c = 0; c < count; ++c)
        if (closed[c]) {
            class_of[c] = static_cast<int>(classes.size());
            classes.emplace_back();
        }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (class_of[comp[i]] >= 0)
            classes[class_of[comp[i]]].push_back(static_cast<int>(i));
        else
            transient.push_back(static_cast<int>(i));
    }

    Vector start_vec = start.size() == n ? start : Vector::Constant(n, 1.0 / static_cast<double>(n));
    if (classes.size() > 1) warnings_.emplace_back("embedded chain has several recurrent classes; weighting by the start vector");

    // Mass eventually absorbed in each closed class from start_vec.
    std::vector<double> weight(classes.size(), 0.0);
    for (std::size_t c = 0; c < classes.size(); ++c)
        for (int i : classes[c]) weight[c] += start_vec(i);
    if (!transient.empty() && classes.size() > 1) {
        const auto t = static_cast<Eigen::Index>(transient.size());
        Matrix A = Matrix::Identity(t, t);
        for (Eigen::Index r = 0; r < t; ++r)
            for (Eigen::Index c = 0; c < t; ++c) A(r, c) -= P_(transient[r], transient[c]);
        Vector x(t);
        for (Eigen::Index r = 0; r < t; ++r) x(r) = start_vec(transient[r]);
        const Vector visits = A.transpose().partialPivLu().solve(x);  // x (I - P_TT)^{-1}
        for (std::size_t c = 0; c < classes.size(); ++c)
            for (Eigen::Index r = 0; r < t; ++r)
                for (int j : classes[c]) weight[c] += visits(r) * P_(transient[r], j);
    } else if (classes.size() == 1) {
        weight[0] = 1.0;
    }

    embedded_ = Vector::Zero(n);
    double total = 0.0;
    for (double w : weight) total += w;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const Vector s = class_stationary(P_, classes[c]);
        for (std::size_t k = 0; k < classes[c].size(); ++k)
            embedded_(classes[c][k]) += weight[c] / total * s(static_cast<Eigen::Index>(k));
    }
    embedded_ = embedded_.cwiseMax(0.0);
    embedded_ /= embedded_.sum();
    const Vector piM = (embedded_.transpose() * M).transpose();
    stationary_ = piM / piM.sum();
}

PhaseType Map::marginal() const { return PhaseType(embedded_, D0_); }

PathExpansion path_expand(const PhaseType& canonical) {
    const CanonicalForm form = classify(canonical);
    if (form.tag == CanonicalTag::none) throw InvalidModel("path expansion needs a canonical representation");
    const int n = canonical.order();
    const int total = n * (n + 1) / 2;
    const auto& mu = form.rates;

    PathExpansion out{PhaseType::exponential(1.0), {}, {}, Vector(n)};
    Vector pi = Vector::Zero(total);
    Matrix D = Matrix::Zero(total, total);
    double reach = 1.0;
    int offset = 0;
    for (int path = 0; path < n; ++path) {
        const int length = path + 1;
        // First form: path runs states n-length .. n-1; second form: 0 .. length-1.
        const int first_phase = form.tag == CanonicalTag::first ? n - length : 0;
        double prob;
        if (form.tag == CanonicalTag::first) {
            prob = canonical.pi()(n - length);
        } else {
            const int last = length - 1;
            const double onward = last + 1 < n ? form.sub_rates[last] : 0.0;
            prob = (1.0 - onward / mu[last]) * reach;
            reach *= onward / mu[last];
        }
        out.path_prob(path) = prob;
        pi(offset) = prob;
        for (int k = 0; k < length; ++k) {
            const int state = offset + k;
            const double rate = mu[first_phase + k];
            D(state, state) = -rate;
            if (k + 1 < length) D(state, state + 1) = rate;
        }
        out.entry.push_back(offset);
        out.exit.push_back(offset + length - 1);
        offset += length;
    }
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    out.phd = PhaseType(pi, D);
    return out;
}

TransportProblem map_problem(const PathExpansion& expansion, Sense sense) {
    const Descriptors d = descriptors(expansion.phd);
    const double sd = std::sqrt(variance(expansion.phd));
    return TransportProblem{d.psi, expansion.phd.pi(), d.a_or_zero(), d.m, sense, sd, sd};
}

Map build_map(const PathExpansion& expansion, const Matrix& nu, double tol) {
    const PhaseType& phd = expansion.phd;
    const auto n = phd.order();
    if (nu.rows() != n || nu.cols() != n) throw Infeasible("coupling nu has the wrong shape");
    const Descriptors d = descriptors(phd);
    if (nu.minCoeff() < -tol) throw Infeasible("coupling nu has a negative entry");
    if ((nu.rowwise().sum() - d.psi).cwiseAbs().maxCoeff() > 1e-9 ||
        (nu.colwise().sum().transpose() - phd.pi()).cwiseAbs().maxCoeff() > 1e-9)
        throw Infeasible("coupling nu violates the exit/entry marginals");
    Matrix D1 = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (d.psi(i) > 1e-15)
            D1.row(i) = d.d(i) * nu.row(i).cwiseMax(0.0) / nu.row(i).cwiseMax(0.0).sum();
        else if (nu.row(i).sum() > 1e-12)
            throw Infeasible("coupling nu puts mass on a state that is never left");
    }
    // Rows with psi > 0 but no exit rate cannot occur: psi(i) > 0 implies d(i) > 0.
    return Map(phd.D(), D1, phd.pi(), tol);
}

double autocorrelation(const Map& map, int lag) {
    if (lag < 1) throw InvalidModel("lag must be at least 1");
    const Matrix M = inverse_generator(map.D0());
    const Vector m = M.rowwise().sum();
    Eigen::RowVectorXd r = map.embedded().transpose() * M;
    const double mean_value = r.sum();
    const double second = 2.0 * r.dot(m);
    for (int k = 0; k < lag; ++k) r = r * map.P();
    const double cross = r.dot(m);
    const double var = second - mean_value * mean_value;
    return (cross - mean_value * mean_value) / var;
}

AutocorrBounds autocorr_bounds(const PathExpansion& expansion) {
    AutocorrBounds out;
    out.nu_min = solve_transport(map_problem(expansion, Sense::minimize));
    out.nu_max = solve_transport(map_problem(expansion, Sense::maximize));
    out.rho_min = out.nu_min.rho;
    out.rho_max = out.nu_max.rho;
    return out;
}

AutocorrBounds autocorr_bounds(const PhaseType& phd) {
    AutocorrBounds out;
    const Descriptors d = descriptors(phd);
    const double sd = std::sqrt(variance(phd));
    TransportProblem problem{d.psi, phd.pi(), d.a_or_zero(), d.m, Sense::minimize, sd, sd};
    out.nu_min = solve_transport(problem);
    problem.sense = Sense::maximize;
    out.nu_max = solve_transport(problem);
    out.rho_min = out.nu_min.rho;
    out.rho_max = out.nu_max.rho;
    return out;
}

std::vector<double> simulate_intervals(const Map& map, std::size_t count, std::uint64_t seed) {
    const int n = map.order();
    std::vector<double> rate(n);
    std::vector<DiscreteSampler> jump(n);
    for (int i = 0; i < n; ++i) {
        rate[i] = -map.D0()(i, i);
        std::vector<double> w(2 * static_cast<std::size_t>(n), 0.0);
        for (int j = 0; j < n; ++j) {
            if (j != i) w[j] = std::max(map.D0()(i, j), 0.0);
            w[n + j] = std::max(map.D1()(i, j), 0.0);
        }
        jump[i] = DiscreteSampler(w);
    }
    Rng rng(seed);
    int state = DiscreteSampler(map.embedded())(rng);
    std::vector<double> out;
    out.reserve(count);
    double elapsed = 0.0;
    while (out.size() < count) {
        elapsed += exponential_draw(rng, rate[state]);
        const int next = jump[state](rng);
        if (next >= n) {
            out.push_back(elapsed);
            elapsed = 0.0;
            state = next - n;
        } else {
            state = next;
        }
    }
    return out;
}

namespace {

double pearson(const std::vector<double>& x, std::size_t begin, std::size_t end, int lag) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    const double count = static_cast<double>(end - begin);
    for (std::size_t t = begin; t < end; ++t) {
        const double a = x[t], b = x[t + static_cast<std::size_t>(lag)];
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    const double cov = sxy / count - (sx / count) * (sy / count);
    const double vx = sxx / count - (sx / count) * (sx / count);
    const double vy = syy / count - (sy / count) * (sy / count);
    return cov / std::sqrt(vx * vy);
}

}  // namespace

SampleCorrelation lag_correlation(const std::vector<double>& series, int lag, int batches) {
    if (lag < 1 || series.size() <= static_cast<std::size_t>(lag) * 2 + static_cast<std::size_t>(batches))
        throw InvalidModel("series too short for the requested lag");
    const std::size_t pairs = series.size() - static_cast<std::size_t>(lag);
    SampleCorrelation out;
    out.value = pearson(series, 0, pairs, lag);
    const std::size_t size = pairs / static_cast<std::size_t>(batches);
    double s = 0, ss = 0;
    for (int b = 0; b < batches; ++b) {
        const double r = pearson(series, b * size, (b + 1) * size, lag);
        s += r;
        ss += r * r;
    }
    const double mb = s / batches;
    const double var = (ss - batches * mb * mb) / (batches - 1);
    out.standard_error = std::sqrt(std::max(var, 0.0) / batches);
    return out;
}

Order2Scan order2_impossibility_scan(std::size_t num_samples, std::uint64_t seed) {
    Rng rng(seed);
    const PhaseType unit = PhaseType::exponential(1.0);
    Order2Scan out;
    for (std::size_t s = 0; s < num_samples; ++s) {
        PhaseType phd = s % 2 == 0 ? append_phase(unit, std::clamp(uniform01(rng), 1e-12, 1.0 - 1e-12), uniform01(rng))
                                   : prepend_phase(unit, uniform01(rng), 1.0 + 10.0 * uniform01(rng));
        const AutocorrBounds b = autocorr_bounds(phd);
        out.max_abs_bound = std::max({out.max_abs_bound, std::abs(b.rho_min), std::abs(b.rho_max)});
        ++out.samples;
    }
    return out;
}

}  // namespace corrph
