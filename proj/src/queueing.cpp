#include "corrph/queueing.hpp"

#include "corrph/coupling.hpp"
#include "corrph/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace corrph {

double t_quantile_975(int dof) {
    static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                       2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                       2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    if (dof < 1) return std::numeric_limits<double>::infinity();
    if (dof <= 30) return table[dof - 1];
    // interpolation in 1/dof between 30 and the normal limit
    return 1.960 + (2.042 - 1.960) * 30.0 / dof;
}

namespace {

struct BatchSeries {
    std::vector<double> values;

    double mean() const { return std::accumulate(values.begin(), values.end(), 0.0) / values.size(); }
    double standard_error() const {
        const double m = mean();
        double ss = 0.0;
        for (double v : values) ss += (v - m) * (v - m);
        return std::sqrt(ss / (values.size() - 1) / values.size());
    }
};

double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

SimStats analyse_fcfs(const std::vector<double>& interarrival, const std::vector<double>& service,
                      std::size_t warmup, const std::vector<double>& pair_a, const std::vector<double>& pair_b,
                      int batches) {
    const std::size_t n = interarrival.size();
    if (service.size() != n) throw InvalidModel("interarrival and service series differ in length");
    if (batches < 2 || n <= warmup + 2 * static_cast<std::size_t>(batches))
        throw InvalidModel("run too short for batch means");

    std::vector<double> arrive(n), depart(n);
    double clock = 0.0, free_at = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        clock += interarrival[i];
        arrive[i] = clock;
        free_at = std::max(free_at, clock) + service[i];
        depart[i] = free_at;
    }

    // the arrival after the last observed customer closes the window
    const std::size_t size = (n - 1 - warmup) / static_cast<std::size_t>(batches);
    auto start = [&](int b) { return warmup + static_cast<std::size_t>(b) * size; };
    const std::size_t stop = start(batches);  // customers [warmup, stop) are observed
    const double t0 = arrive[warmup];
    const double t1 = arrive[stop];

    // Sweep arrivals and departures (both sorted under FCFS), integrating N(t).
    std::vector<double> area(batches, 0.0), hist;
    std::size_t i = 0, j = 0;
    long population = 0;
    double previous = 0.0;
    while (i < n || j < n) {
        const bool arrival = i < n && (j >= n || arrive[i] <= depart[j]);
        const double t = arrival ? arrive[i] : depart[j];
        const double lo = std::max(previous, t0), hi = std::min(t, t1);
        if (hi > lo && i > warmup) {
            const int b = std::min(static_cast<int>((i - 1 - warmup) / size), batches - 1);
            area[b] += population * (hi - lo);
            if (hist.size() <= static_cast<std::size_t>(population)) hist.resize(population + 1, 0.0);
            hist[population] += hi - lo;
        }
        if (t >= t1) break;
        previous = t;
        if (arrival) {
            ++population;
            ++i;
        } else {
            --population;
            ++j;
        }
    }

    const bool paired = !pair_a.empty() && pair_a.size() == n && pair_b.size() == n;
    BatchSeries L, W, lambda, inter, serv, rho;
    double area_total = 0.0, sojourn_total = 0.0, inter_total = 0.0, serv_total = 0.0;
    for (int b = 0; b < batches; ++b) {
        const std::size_t lo = start(b), hi = start(b + 1);
        const double span = arrive[hi] - arrive[lo];
        double wsum = 0.0, isum = 0.0, ssum = 0.0;
        for (std::size_t c = lo; c < hi; ++c) {
            wsum += depart[c] - arrive[c];
            isum += interarrival[c];
            ssum += service[c];
        }
        const double count = static_cast<double>(hi - lo);
        L.values.push_back(area[b] / span);
        W.values.push_back(wsum / count);
        lambda.values.push_back(count / span);
        inter.values.push_back(isum / count);
        serv.values.push_back(ssum / count);
        area_total += area[b];
        sojourn_total += wsum;
        inter_total += isum;
        serv_total += ssum;
        if (paired)
            rho.values.push_back(pearson(std::span(pair_a).subspan(lo, hi - lo), std::span(pair_b).subspan(lo, hi - lo)));
    }

    const double t = t_quantile_975(batches - 1);
    const double customers = static_cast<double>(stop - warmup);
    SimStats out;
    out.L = area_total / (t1 - t0);
    out.W = sojourn_total / customers;
    out.ci_L = t * L.standard_error();
    out.ci_W = t * W.standard_error();
    out.lambda_hat = customers / (t1 - t0);
    out.ci_lambda = t * lambda.standard_error();
    out.mean_interarrival = inter_total / customers;
    out.se_interarrival = inter.standard_error();
    out.mean_service = serv_total / customers;
    out.se_service = serv.standard_error();
    if (paired) {
        out.realized_rho = pearson(std::span(pair_a).subspan(warmup, stop - warmup),
                                   std::span(pair_b).subspan(warmup, stop - warmup));
        out.se_rho = rho.standard_error();
    } else {
        out.realized_rho = std::numeric_limits<double>::quiet_NaN();
        out.se_rho = std::numeric_limits<double>::quiet_NaN();
    }
    const double observed = std::accumulate(hist.begin(), hist.end(), 0.0);
    for (double& h : hist) h /= observed;
    out.queue_length = std::move(hist);
    out.served = stop - warmup;
    return out;
}

CorrelatedMM1Model build_correlated_mm1(double lambda_A, double lambda_S, double rho) {
    if (!(lambda_A > 0.0) || !(lambda_S > 0.0)) throw InvalidModel("rates must be positive");
    if (!(lambda_A < lambda_S)) throw InvalidModel("utilization must be below 1");
    CorrelatedMM1Model model;
    model.lambda_A = lambda_A;
    model.lambda_S = lambda_S;
    model.rho = rho;
    if (rho == 0.0) {
        model.arrival = PhaseType::exponential(lambda_A);
        model.service = PhaseType::exponential(lambda_S);
        model.class_map = {0};
        model.beta = {Vector::Ones(1)};
        return model;
    }
    model.family = default_family(rho);
    model.n = min_phases_for_rho(rho, model.family);
    const Chain chain = build_chain(model.family, model.n);
    model.service = scale(chain.phd, lambda_S);
    model.arrival = scale(reverse_transform(chain.phd), lambda_A);

    // Rank exit states by a and entry states by m; pair equal ranks
    // (comonotone) or opposite ranks (antitone).
    const Descriptors da = descriptors(model.arrival), ds = descriptors(model.service);
    const Vector a = da.a_or_zero();
    const int n = model.n;
    std::vector<int> by_a(n), by_m(n);
    std::iota(by_a.begin(), by_a.end(), 0);
    std::iota(by_m.begin(), by_m.end(), 0);
    std::stable_sort(by_a.begin(), by_a.end(), [&](int x, int y) { return a(x) < a(y); });
    std::stable_sort(by_m.begin(), by_m.end(), [&](int x, int y) { return ds.m(x) < ds.m(y); });
    if (rho < 0.0) std::reverse(by_m.begin(), by_m.end());
    model.class_map.assign(n, 0);
    for (int r = 0; r < n; ++r) {
        model.class_map[by_a[r]] = by_m[r];
        if (std::abs(da.psi(by_a[r]) - model.service.pi()(by_m[r])) > 1e-9)
            throw Error("exit and entry masses differ; the class map is not a coupling");
    }

    const double extreme = rho > 0.0 ? chain.spec.rho_plus : chain.spec.rho_minus;
    const double w = std::min(rho / extreme, 1.0);
    for (int k = 0; k < n; ++k) {
        Vector beta = (1.0 - w) * model.service.pi();
        beta(model.class_map[k]) += w;
        model.beta.push_back(beta);
    }
    return model;
}

SimStats simulate_correlated_mm1(const CorrelatedMM1Model& model, std::size_t num_customers, std::uint64_t seed,
                                 std::size_t warmup) {
    if (warmup == static_cast<std::size_t>(-1)) warmup = num_customers / 10;
    const PhaseTypeSampler arrival(model.arrival), service(model.service);
    std::vector<DiscreteSampler> entry;
    for (const Vector& b : model.beta) entry.emplace_back(b);

    Rng rng(seed);
    std::vector<double> inter(num_customers), serv(num_customers);
    for (std::size_t c = 0; c < num_customers; ++c) {
        const auto a = arrival.sample(rng);
        inter[c] = a.time;
        serv[c] = service.run(entry[a.exit_state](rng), rng).time;
    }
    return analyse_fcfs(inter, serv, warmup, inter, serv);
}

CorrelatedTaskService correlated_task_service(double lambda_S, double rho) {
    if (!(lambda_S > 0.0)) throw InvalidModel("service rate must be positive");
    CorrelatedTaskService out;
    out.lambda_S = lambda_S;
    out.rho = rho;
    if (rho == 0.0) {
        out.first = out.second = PhaseType::exponential(2.0 * lambda_S);
        out.Psi = Matrix::Ones(1, 1);
    } else {
        const ChainFamily family = default_family(rho);
        out.n = min_phases_for_rho(rho, family);
        const Chain chain = build_chain(family, out.n);
        out.first = scale(reverse_transform(chain.phd), 2.0 * lambda_S);
        out.second = scale(chain.phd, 2.0 * lambda_S);
        const TransportProblem problem =
            sequential_problem(out.first, out.second, rho > 0.0 ? Sense::maximize : Sense::minimize);
        const Coupling coupling = target_coupling(problem, monotone_coupling(problem), rho);
        out.Psi = to_transfer_matrix(coupling.flow, problem.row_mass, problem.col_mass);
    }
    out.phd = seq_compose(out.first, out.second, out.Psi).phd;
    const auto mom = moments(out.phd, 2);
    out.mean = mom[0];
    out.second_moment = mom[1];
    return out;
}

PKResult mg1_pk(double lambda_A, double service_mean, double service_second_moment) {
    PKResult r;
    r.utilization = lambda_A * service_mean;
    if (!(r.utilization < 1.0)) throw InvalidModel("utilization must be below 1");
    r.Wq = lambda_A * service_second_moment / (2.0 * (1.0 - r.utilization));
    r.W = r.Wq + service_mean;
    r.L = r.utilization + lambda_A * r.Wq;
    return r;
}

PKResult mg1_pk(double lambda_A, const CorrelatedTaskService& service) {
    return mg1_pk(lambda_A, service.mean, service.second_moment);
}

SimStats simulate_mph1(double lambda_A, const PhaseType& service, std::size_t num_customers, std::uint64_t seed,
                       int split, std::size_t warmup) {
    if (!(lambda_A > 0.0)) throw InvalidModel("arrival rate must be positive");
    if (warmup == static_cast<std::size_t>(-1)) warmup = num_customers / 10;
    const PhaseTypeSampler sampler(service);
    Rng rng(seed);
    std::vector<double> inter(num_customers), serv(num_customers), head, tail;
    if (split >= 0) {
        head.resize(num_customers);
        tail.resize(num_customers);
    }
    for (std::size_t c = 0; c < num_customers; ++c) {
        inter[c] = exponential_draw(rng, lambda_A);
        const auto d = sampler.sample(rng, split);
        serv[c] = d.time;
        if (split >= 0) {
            head[c] = d.head_time;
            tail[c] = d.time - d.head_time;
        }
    }
    return analyse_fcfs(inter, serv, warmup, head, tail);
}

namespace {

template <class Run>
ReplicationSummary replicate(int replications, std::uint64_t seed, Run run) {
    if (replications < 1) throw InvalidModel("need at least one replication");
    ReplicationSummary out;
    out.runs.resize(replications);
    std::vector<std::thread> workers;
    for (int r = 0; r < replications; ++r)
        workers.emplace_back([&, r] { out.runs[r] = run(seed + static_cast<std::uint64_t>(r)); });
    for (auto& w : workers) w.join();

    BatchSeries L;
    double W = 0.0, rho = 0.0;
    for (const SimStats& s : out.runs) {
        L.values.push_back(s.L);
        W += s.W;
        rho += s.realized_rho;
    }
    out.L = L.mean();
    out.ci_L = replications == 1 ? out.runs[0].ci_L : t_quantile_975(replications - 1) * L.standard_error();
    out.W = W / replications;
    out.realized_rho = rho / replications;
    return out;
}

}  // namespace

ReplicationSummary replicate_correlated_mm1(const CorrelatedMM1Model& model, std::size_t num_customers,
                                            std::uint64_t seed, int replications) {
    return replicate(replications, seed,
                     [&](std::uint64_t s) { return simulate_correlated_mm1(model, num_customers, s); });
}

ReplicationSummary replicate_mph1(double lambda_A, const PhaseType& service, std::size_t num_customers,
                                  std::uint64_t seed, int replications, int split) {
    return replicate(replications, seed,
                     [&](std::uint64_t s) { return simulate_mph1(lambda_A, service, num_customers, s, split); });
}

}  // namespace corrph
