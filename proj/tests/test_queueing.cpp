#include "corrph/queueing.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace corrph;

namespace {

bool little_holds(const SimStats& s, double lambda) {
    // L = lambda W with both sides uncertain
    const double gap = std::abs(s.L - lambda * s.W);
    return gap <= s.ci_L + lambda * s.ci_W + s.W * s.ci_lambda;
}

}  // namespace

TEST_CASE("t quantiles") {
    CHECK(t_quantile_975(1) == doctest::Approx(12.706));
    CHECK(t_quantile_975(19) == doctest::Approx(2.093));
    CHECK(t_quantile_975(1000) < 1.97);
    CHECK(t_quantile_975(1000) > 1.96);
}

TEST_CASE("FCFS analysis on a hand-worked trace") {
    // arrivals at 1, 2, ... with service 0.5: one customer present half the time
    std::vector<double> inter(400, 1.0), serv(400, 0.5);
    SimStats s = analyse_fcfs(inter, serv, 0, {}, {}, 20);
    CHECK(s.L == doctest::Approx(0.5));
    CHECK(s.W == doctest::Approx(0.5));
    CHECK(s.lambda_hat == doctest::Approx(1.0));
    REQUIRE(s.queue_length.size() == 2);
    CHECK(s.queue_length[0] == doctest::Approx(0.5));
    CHECK(std::isnan(s.realized_rho));
    CHECK(s.served == 380);  // 20 batches of (400 - 1) / 20 customers

    // pairs of simultaneous arrivals (gap 0 then 2) with unit service:
    // the second waits 1, N is 2 for one unit and 1 for one unit every 2
    std::vector<double> bursty, unit(400, 1.0);
    for (int i = 0; i < 200; ++i) {
        bursty.push_back(i == 0 ? 0.0 : 2.0);
        bursty.push_back(0.0);
    }
    s = analyse_fcfs(bursty, unit, 0, {}, {}, 20);
    CHECK(s.W == doctest::Approx(1.5));
    CHECK(s.L == doctest::Approx(1.5).epsilon(1e-2));
    CHECK(s.queue_length.at(2) == doctest::Approx(0.5).epsilon(1e-2));
    CHECK_THROWS_AS(analyse_fcfs(inter, std::vector<double>(3, 1.0), 0), InvalidModel);
    CHECK_THROWS_AS(analyse_fcfs(inter, serv, 390), InvalidModel);
}

TEST_CASE("correlated M/M/1 construction") {
    const CorrelatedMM1Model plain = build_correlated_mm1(0.8, 1.0, 0.0);
    CHECK(plain.n == 1);
    CHECK(plain.arrival.D()(0, 0) == doctest::Approx(-0.8));

    const CorrelatedMM1Model pos = build_correlated_mm1(0.8, 1.0, 0.25);
    CHECK(pos.n == 2);
    CHECK(classify(pos.arrival).tag == CanonicalTag::second);
    CHECK(-pos.arrival.D()(0, 0) == doctest::Approx(1.6));
    CHECK(-pos.arrival.D()(1, 1) == doctest::Approx(0.8));
    CHECK(-pos.service.D()(0, 0) == doctest::Approx(1.0));
    CHECK(-pos.service.D()(1, 1) == doctest::Approx(2.0));
    // the slow exit (largest a) feeds the long service entry
    const Descriptors da = descriptors(pos.arrival);
    const int slow = *da.a[0] > *da.a[1] ? 0 : 1;
    CHECK(pos.beta[slow](0) == doctest::Approx(1.0));

    const CorrelatedMM1Model neg = build_correlated_mm1(0.8, 1.0, -0.25);
    CHECK(neg.n == 2);
    CHECK(neg.family == ChainFamily::blni);
    CHECK(neg.beta[slow](1) == doctest::Approx(1.0));

    for (double rho : {0.1, 0.3, -0.2, 0.6}) {
        const CorrelatedMM1Model m = build_correlated_mm1(0.5, 1.0, rho);
        const Descriptors d = descriptors(m.arrival);
        Vector mixed = Vector::Zero(m.n);
        for (int k = 0; k < m.n; ++k) {
            CHECK(m.beta[k].minCoeff() >= 0.0);
            CHECK(m.beta[k].sum() == doctest::Approx(1.0));
            mixed += d.psi(k) * m.beta[k];
        }
        CHECK((mixed - m.service.pi()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(is_exponential(m.service, 1.0).passed);
        CHECK(is_exponential(m.arrival, 0.5).passed);
    }
    CHECK_THROWS_AS(build_correlated_mm1(1.0, 1.0, 0.0), InvalidModel);
    CHECK_THROWS_AS(build_correlated_mm1(0.5, 1.0, -0.7), Infeasible);
}

TEST_CASE("correlated M/M/1 simulation") {
    const double lambda = 0.8;
    double previous = 1e9;
    for (double rho : {-0.25, 0.0, 0.25}) {
        const CorrelatedMM1Model model = build_correlated_mm1(lambda, 1.0, rho);
        const SimStats s = simulate_correlated_mm1(model, 300000, 7);
        CHECK(little_holds(s, lambda));
        CHECK(std::abs(s.mean_interarrival - 1.0 / lambda) < 3.0 * s.se_interarrival);
        CHECK(std::abs(s.mean_service - 1.0) < 3.0 * s.se_service);
        CHECK(std::abs(s.realized_rho - rho) < 3.0 * s.se_rho);
        CHECK(s.L < previous);
        previous = s.L;
        if (rho == 0.0) {
            CHECK(std::abs(s.L - 4.0) < s.ci_L * 1.5);
            // geometric queue length distribution
            for (int k = 0; k < 5; ++k) CHECK(s.queue_length[k] == doctest::Approx(0.2 * std::pow(0.8, k)).epsilon(0.05));
        }
    }
}

TEST_CASE("task-pair service moments") {
    for (double rho : {0.0, 0.25, -0.25, 0.5, -0.3}) {
        const CorrelatedTaskService t = correlated_task_service(1.0, rho);
        CHECK(t.mean == doctest::Approx(1.0));
        CHECK(std::abs(t.second_moment - (1.5 + 0.5 * rho)) < 1e-9);
        CHECK(t.Psi.rowwise().sum().isApprox(Vector::Ones(t.Psi.rows())));
        CHECK(is_exponential(t.first, 2.0).passed);
        CHECK(is_exponential(t.second, 2.0).passed);
    }
    const CorrelatedTaskService two = correlated_task_service(2.0, 0.25);
    CHECK(two.mean == doctest::Approx(0.5));
    CHECK(two.second_moment == doctest::Approx(1.625 / 4.0));
    CHECK_THROWS_AS(correlated_task_service(1.0, 0.9999999999), Infeasible);
}

TEST_CASE("Pollaczek-Khinchine values") {
    CHECK(mg1_pk(0.8, correlated_task_service(1.0, 0.0)).L == doctest::Approx(3.2));
    CHECK(mg1_pk(0.8, correlated_task_service(1.0, 0.25)).L == doctest::Approx(3.4));
    CHECK(mg1_pk(0.8, correlated_task_service(1.0, -0.25)).L == doctest::Approx(3.0));
    const PKResult mm1 = mg1_pk(0.8, 1.0, 2.0);
    CHECK(mm1.L == doctest::Approx(4.0));
    CHECK(mm1.W == doctest::Approx(5.0));
    CHECK(mg1_pk(1e-9, 1.0, 2.0).L < 1e-8);
    CHECK_THROWS_AS(mg1_pk(1.0, 1.0, 2.0), InvalidModel);
}

TEST_CASE("M/PH/1 simulation of the task-pair queue") {
    for (double rho : {0.0, 0.25}) {
        const CorrelatedTaskService t = correlated_task_service(1.0, rho);
        const SimStats s = simulate_mph1(0.8, t.phd, 300000, 11, t.first.order());
        const double L = mg1_pk(0.8, t).L;
        CHECK(std::abs(s.L - L) < 1.5 * s.ci_L);
        CHECK(little_holds(s, 0.8));
        CHECK(std::abs(s.realized_rho - rho) < 3.0 * s.se_rho);
    }
}

TEST_CASE("replications are deterministic and independent of scheduling") {
    const CorrelatedMM1Model model = build_correlated_mm1(0.5, 1.0, 0.25);
    const ReplicationSummary a = replicate_correlated_mm1(model, 20000, 3, 4);
    const ReplicationSummary b = replicate_correlated_mm1(model, 20000, 3, 4);
    REQUIRE(a.runs.size() == 4);
    CHECK(a.L == b.L);
    for (int r = 0; r < 4; ++r) {
        CHECK(a.runs[r].L == simulate_correlated_mm1(model, 20000, 3 + r).L);
    }
    CHECK(a.runs[0].L != a.runs[1].L);
    CHECK(a.ci_L > 0.0);
    const ReplicationSummary one = replicate_mph1(0.5, PhaseType::exponential(1.0), 20000, 3, 1);
    CHECK(one.ci_L == one.runs[0].ci_L);
    CHECK_THROWS_AS(replicate_mph1(0.5, PhaseType::exponential(1.0), 20000, 3, 0), InvalidModel);
}
