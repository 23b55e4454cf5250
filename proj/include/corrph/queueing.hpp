#pragma once

#include "corrph/aph_builder.hpp"
#include "corrph/phase_type.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace corrph {

/// M/M/1 queue whose inter-arrival time and the following service time are
/// correlated through customer classes.
struct CorrelatedMM1Model {
    double lambda_A = 1.0;
    double lambda_S = 1.0;
    double rho = 0.0;
    int n = 1;
    ChainFamily family = ChainFamily::optimal;
    PhaseType arrival = PhaseType::exponential(1.0);  // second canonical, mean 1/lambda_A
    PhaseType service = PhaseType::exponential(1.0);  // first canonical, mean 1/lambda_S
    std::vector<int> class_map;  // arrival exit state k -> service entry state
    std::vector<Vector> beta;    // service initial vector of class k
};

CorrelatedMM1Model build_correlated_mm1(double lambda_A, double lambda_S, double rho);

struct SimStats {
    double L = 0.0;  // time-average population
    double W = 0.0;  // mean sojourn time
    double ci_L = 0.0;  // 95% half-widths, batch means
    double ci_W = 0.0;
    double lambda_hat = 0.0;  // observed arrival rate
    double ci_lambda = 0.0;
    double mean_interarrival = 0.0;
    double se_interarrival = 0.0;
    double mean_service = 0.0;
    double se_service = 0.0;
    double realized_rho = 0.0;  // correlation of the coupled pair (NaN if none)
    double se_rho = 0.0;
    std::vector<double> queue_length;  // time fraction with N customers, N = 0, 1, ...
    std::size_t served = 0;
};

/// Batch-means analysis of a FCFS single-server run: customer i arrives
/// interarrival[i] after customer i-1 and needs service[i]. pair_a / pair_b
/// (optional, same length) are correlated per customer.
SimStats analyse_fcfs(const std::vector<double>& interarrival, const std::vector<double>& service,
                      std::size_t warmup, const std::vector<double>& pair_a = {},
                      const std::vector<double>& pair_b = {}, int batches = 20);

/// Arrivals are simulated phase by phase; the exit phase k selects the
/// service initial vector beta[k]. warmup defaults to 10% of the run.
SimStats simulate_correlated_mm1(const CorrelatedMM1Model& model, std::size_t num_customers,
                                 std::uint64_t seed, std::size_t warmup = static_cast<std::size_t>(-1));

/// Customer pair = two tasks processed back to back.
struct CorrelatedTaskService {
    double lambda_S = 1.0;
    double rho = 0.0;
    int n = 1;
    PhaseType first = PhaseType::exponential(2.0);   // second canonical, mean 0.5 / lambda_S
    PhaseType second = PhaseType::exponential(2.0);  // first canonical, mean 0.5 / lambda_S
    Matrix Psi;                                      // transfer matrix between the tasks
    PhaseType phd = PhaseType::exponential(1.0);     // sequential composition
    double mean = 0.0;
    double second_moment = 0.0;
};

CorrelatedTaskService correlated_task_service(double lambda_S, double rho);

struct PKResult {
    double utilization = 0.0;
    double Wq = 0.0;
    double W = 0.0;
    double L = 0.0;
};

/// Pollaczek-Khinchine mean values of the M/G/1 queue.
PKResult mg1_pk(double lambda_A, double service_mean, double service_second_moment);
PKResult mg1_pk(double lambda_A, const CorrelatedTaskService& service);

/// M/PH/1 run. When split >= 0, realized_rho correlates the time spent in
/// states below split with the rest of the service.
SimStats simulate_mph1(double lambda_A, const PhaseType& service, std::size_t num_customers,
                       std::uint64_t seed, int split = -1, std::size_t warmup = static_cast<std::size_t>(-1));

struct ReplicationSummary {
    std::vector<SimStats> runs;  // in replication order
    double L = 0.0;
    double ci_L = 0.0;  // across replications; the batch CI for a single run
    double W = 0.0;
    double realized_rho = 0.0;
};

/// Independent runs seeded seed + r, executed on parallel threads.
ReplicationSummary replicate_correlated_mm1(const CorrelatedMM1Model& model, std::size_t num_customers,
                                            std::uint64_t seed, int replications);
ReplicationSummary replicate_mph1(double lambda_A, const PhaseType& service, std::size_t num_customers,
                                  std::uint64_t seed, int replications, int split = -1);

/// 0.975 quantile of Student's t.
double t_quantile_975(int dof);

}  // namespace corrph
