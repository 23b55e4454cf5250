#include "corrph/cli.hpp"

#include "corrph/aph_builder.hpp"
#include "corrph/beyond_exp.hpp"
#include "corrph/coupling.hpp"
#include "corrph/map.hpp"
#include "corrph/model_io.hpp"
#include "corrph/queueing.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>

namespace corrph {

namespace {

using nlohmann::json;

class UsageError : public Error {
public:
    using Error::Error;
};

std::string format(const char* spec, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, x);
    return buf;
}

struct Options {
    std::string out_file;
    double tol = default_tolerance;
    std::uint64_t seed = 42;

    // build
    std::string family;
    std::optional<int> n;
    std::optional<double> rho;
    std::string sign;
    std::string form = "first";

    // bounds / couple / map / validate
    std::string file;
    std::string second;
    std::string mode = "parallel";
    std::string extreme = "max";
    int lag = 1;
    double lambda = 1.0;

    // expand
    std::string type;
    std::vector<double> pi, rates;
    std::vector<int> alloc;
    std::optional<double> target;
    int k = 2;

    // queue
    std::string model = "mm1corr";
    std::vector<double> rhos{0.0};
    std::vector<double> utils{0.8};
    std::size_t customers = 100000;
    int reps = 1;
    std::string method = "sim";
};

class Output {
public:
    Output(std::ostream& out, const std::string& path) : out_(out), path_(path) {}
    void write(const std::string& text) {
        if (path_.empty()) {
            out_ << text;
            return;
        }
        std::ofstream file(path_);
        if (!file) throw FormatError("cannot write '" + path_ + "'");
        file << text;
    }

private:
    std::ostream& out_;
    std::string path_;
};

PhaseType load_phase_type(const std::string& path) {
    ModelFile model = read_model_file(path);
    if (model.kind() != "phase_type") throw FormatError("'" + path + "' does not hold a phase_type model");
    return std::get<PhaseType>(model.payload);
}

double signed_target(const Options& o) {
    const double r = *o.rho;
    if (o.sign == "+") return std::abs(r);
    if (o.sign == "-") return -std::abs(r);
    return r;
}

ChainFamily parse_family(const std::string& name) {
    if (name == "optimal") return ChainFamily::optimal;
    if (name == "blni") return ChainFamily::blni;
    throw UsageError("unknown family '" + name + "'");
}

json chain_extra(const ChainSpec& spec, const std::string& family) {
    json extra = {{"family", family}, {"n", spec.n}};
    if (std::isfinite(spec.rho_plus)) extra["rho_plus"] = spec.rho_plus;
    if (std::isfinite(spec.rho_minus)) extra["rho_minus"] = spec.rho_minus;
    return extra;
}

int cmd_build(const Options& o, Output& output) {
    if (o.family == "negative3") {
        const ThreePhaseNegative t = negative3_special();
        ModelFile model{o.form == "second" ? reverse_transform(t.phd) : t.phd,
                        {{"family", "negative3"}, {"n", 3}, {"rho_minus", t.rho}, {"mu2", t.mu2}, {"mu3", t.mu3}}};
        output.write(dump_model(model));
        return exit_code::ok;
    }
    int n;
    ChainFamily family;
    if (o.n) {
        n = *o.n;
        if (n < 1) throw UsageError("--n must be at least 1");
        family = o.family.empty() ? ChainFamily::optimal : parse_family(o.family);
    } else if (o.rho) {
        const double target = signed_target(o);
        family = o.family.empty() ? default_family(target) : parse_family(o.family);
        n = min_phases_for_rho(target, family);
    } else {
        throw UsageError("build needs --n or --rho");
    }
    if (o.form != "first" && o.form != "second") throw UsageError("--form must be first or second");
    const Chain chain = build_chain(family, n);
    const std::string name = family == ChainFamily::optimal ? "optimal" : "blni";
    ModelFile model{o.form == "second" ? reverse_transform(chain.phd, o.tol) : chain.phd, chain_extra(chain.spec, name)};
    model.extra["form"] = o.form;
    output.write(dump_model(model));
    return exit_code::ok;
}

TransportProblem problem_for(const Options& o, const PhaseType& X, const PhaseType& Y, Sense sense) {
    if (o.mode == "parallel") return parallel_problem(X, Y, sense);
    if (o.mode == "sequential") return sequential_problem(X, Y, sense);
    throw UsageError("--mode must be parallel, sequential or map");
}

int cmd_bounds(const Options& o, Output& output) {
    const PhaseType X = load_phase_type(o.file);
    double lo, hi;
    if (o.mode == "map") {
        const AutocorrBounds b = classify(X, o.tol).tag == CanonicalTag::none ? autocorr_bounds(X)
                                                                               : autocorr_bounds(path_expand(X));
        lo = b.rho_min;
        hi = b.rho_max;
    } else {
        const PhaseType Y = o.second.empty() ? X : load_phase_type(o.second);
        lo = solve_transport(problem_for(o, X, Y, Sense::minimize)).rho;
        hi = solve_transport(problem_for(o, X, Y, Sense::maximize)).rho;
    }
    output.write("(" + format("%.10g", lo) + ", " + format("%.10g", hi) + ")\n");
    return exit_code::ok;
}

Coupling targeted(const TransportProblem& max_problem, const TransportProblem& min_problem,
                  const std::optional<double>& rho, const std::string& extreme_name) {
    if (rho) {
        const TransportProblem& p = *rho >= 0.0 ? max_problem : min_problem;
        return target_coupling(p, solve_transport(p), *rho);
    }
    if (extreme_name == "max") return solve_transport(max_problem);
    if (extreme_name == "min") return solve_transport(min_problem);
    throw UsageError("--extreme must be max or min");
}

int cmd_couple(const Options& o, Output& output) {
    const PhaseType X = load_phase_type(o.file);
    const PhaseType Y = o.second.empty() ? X : load_phase_type(o.second);
    const TransportProblem pmax = problem_for(o, X, Y, Sense::maximize);
    const TransportProblem pmin = problem_for(o, X, Y, Sense::minimize);
    const Coupling c = targeted(pmax, pmin, o.rho, o.extreme);
    ModelFile model{CouplingRecord{o.mode, c.flow, c.rho, c.objective}};
    if (o.mode == "sequential") {
        const Matrix Psi = to_transfer_matrix(c.flow, pmax.row_mass, pmax.col_mass);
        json rows = json::array();
        for (Eigen::Index i = 0; i < Psi.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < Psi.cols(); ++j) row.push_back(Psi(i, j));
            rows.push_back(row);
        }
        model.extra["transfer"] = rows;
    }
    output.write(dump_model(model));
    return exit_code::ok;
}

int cmd_map(const Options& o, Output& output) {
    const PhaseType X = load_phase_type(o.file);
    const PathExpansion expansion = path_expand(X);
    const TransportProblem pmax = map_problem(expansion, Sense::maximize);
    const TransportProblem pmin = map_problem(expansion, Sense::minimize);
    const Coupling nu = targeted(pmax, pmin, o.rho, o.extreme);
    const Map map = build_map(expansion, nu.flow);
    const AutocorrBounds bounds = autocorr_bounds(expansion);
    ModelFile model{map,
                    {{"autocorrelation", autocorrelation(map, o.lag)},
                     {"lag", o.lag},
                     {"bounds", {bounds.rho_min, bounds.rho_max}},
                     {"marginal_exponential", is_exponential(map.marginal(), 1.0 / mean(map.marginal()), o.tol).passed}}};
    output.write(dump_model(model));
    return exit_code::ok;
}

int cmd_expand(const Options& o, Output& output) {
    if (o.type == "hyperexp") {
        if (o.pi.empty() || o.pi.size() != o.rates.size()) throw UsageError("--pi and --rates must have equal length");
        const HyperExp h(Eigen::Map<const Vector>(o.pi.data(), static_cast<Eigen::Index>(o.pi.size())),
                         Eigen::Map<const Vector>(o.rates.data(), static_cast<Eigen::Index>(o.rates.size())), o.tol);
        const bool positive = o.sign != "-";
        std::vector<int> alloc = o.alloc;
        if (alloc.empty()) {
            if (!o.target) throw UsageError("expand hyperexp needs --alloc or --target");
            if (!positive) throw UsageError("--target allocates for positive correlation only; give --alloc");
            alloc = greedy_allocate(h, *o.target);
        }
        const ExpandedHyperExp e = expand_hyperexp(h, alloc, positive);
        ModelFile model{e.phd,
                        {{"type", "hyperexp"},
                         {"allocation", e.allocation},
                         {positive ? "rho_plus" : "rho_minus", e.rho},
                         {"rho_plus_unexpanded", hyperexp_rho_max(h)}}};
        output.write(dump_model(model));
        return exit_code::ok;
    }
    if (o.type == "erlang") {
        if (o.k < 1) throw UsageError("--k must be at least 1");
        const PhaseType chain = o.file.empty() ? optimal_positive_chain(o.n.value_or(2)).phd : load_phase_type(o.file);
        PhaseType phd = PhaseType::exponential(1.0);
        if (o.form == "in" || o.form == "first")
            phd = erlang_expand_in(o.k, chain);
        else if (o.form == "out" || o.form == "second")
            phd = erlang_expand_out(o.k, chain);
        else if (o.form == "full")
            phd = erlang_expand_full(o.k, chain);
        else
            throw UsageError("--form must be in, out or full");
        ModelFile model{phd,
                        {{"type", "erlang"},
                         {"k", o.k},
                         {"form", o.form == "first" ? "in" : o.form},
                         {"paths", erlang_path_count(o.k, chain.order())}}};
        output.write(dump_model(model));
        return exit_code::ok;
    }
    throw UsageError("--type must be hyperexp or erlang");
}

int cmd_queue(const Options& o, Output& output) {
    if (o.model != "mm1corr" && o.model != "taskpair") throw UsageError("--model must be mm1corr or taskpair");
    if (o.method != "sim" && o.method != "pk") throw UsageError("--method must be sim or pk");
    if (o.method == "pk" && o.model != "taskpair") throw UsageError("--method pk applies to --model taskpair");
    std::string csv = "rho,util,L,W,ci_L,realized_rho\n";
    auto g = [](double x) { return format("%.6g", x); };
    for (double rho : o.rhos) {
        for (double util : o.utils) {
            double L, W, ci, realized;
            if (o.model == "mm1corr") {
                const CorrelatedMM1Model m = build_correlated_mm1(util, 1.0, rho);
                const ReplicationSummary s = replicate_correlated_mm1(m, o.customers, o.seed, o.reps);
                L = s.L, W = s.W, ci = s.ci_L, realized = s.realized_rho;
            } else {
                const CorrelatedTaskService service = correlated_task_service(1.0, rho);
                if (o.method == "pk") {
                    const PKResult r = mg1_pk(util, service);
                    L = r.L, W = r.W, ci = 0.0;
                    realized = seq_compose(service.first, service.second, service.Psi).rho;
                } else {
                    if (!(util * service.mean < 1.0)) throw InvalidModel("utilization must be below 1");
                    const ReplicationSummary s =
                        replicate_mph1(util, service.phd, o.customers, o.seed, o.reps, service.first.order());
                    L = s.L, W = s.W, ci = s.ci_L, realized = s.realized_rho;
                }
            }
            csv += g(rho) + "," + g(util) + "," + g(L) + "," + g(W) + "," + g(ci) + "," + g(realized) + "\n";
        }
    }
    output.write(csv);
    return exit_code::ok;
}

int cmd_validate(const Options& o, Output& output) {
    const ModelFile model = read_model_file(o.file);
    std::string report = "kind: " + model.kind() + "\n";
    bool passed = true;
    auto check = [&](const PhaseType& phd, const std::string& label) {
        const ExponentialCheck c = is_exponential(phd, o.lambda, o.tol);
        report += label + "order: " + std::to_string(phd.order()) + "\n";
        report += label + "mean: " + format("%.10g", mean(phd)) + "\n";
        report += label + "max survival deviation: " + format("%.3e", c.max_survival_deviation) + "\n";
        report += label + "max moment deviation: " + format("%.3e", c.max_moment_deviation) + "\n";
        report += label + "exponential(" + format("%g", o.lambda) + "): " + (c.passed ? "yes" : "no") + "\n";
        passed = passed && c.passed;
    };
    if (const auto* phd = std::get_if<PhaseType>(&model.payload)) {
        check(*phd, "");
    } else if (const auto* map = std::get_if<Map>(&model.payload)) {
        check(map->marginal(), "marginal ");
        report += "autocorrelation(1): " + format("%.10g", autocorrelation(*map, 1)) + "\n";
        for (const auto& w : map->warnings()) report += "warning: " + w + "\n";
    } else {
        const auto& c = std::get<CouplingRecord>(model.payload);
        const bool nonnegative = c.flow.minCoeff() >= -o.tol;
        const bool unit_mass = std::abs(c.flow.sum() - 1.0) <= o.tol;
        report += std::string("non-negative: ") + (nonnegative ? "yes" : "no") + "\n";
        report += std::string("unit mass: ") + (unit_mass ? "yes" : "no") + "\n";
        passed = nonnegative && unit_mass;
    }
    report += std::string("result: ") + (passed ? "PASS" : "FAIL") + "\n";
    output.write(report);
    return passed ? exit_code::ok : exit_code::validation_failed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Correlated exponential phase-type representations", "corrph"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--out", o.out_file, "write the result to FILE instead of stdout");
    app.add_option("--tol", o.tol, "numeric tolerance")->capture_default_str();
    app.add_option("--seed", o.seed, "random seed")->capture_default_str();

    auto* build = app.add_subcommand("build", "build a phase-type representation of Exp(1)");
    build->add_option("--family", o.family, "optimal, blni or negative3");
    build->add_option("--n", o.n, "number of phases");
    build->add_option("--rho", o.rho, "target coefficient of correlation");
    build->add_option("--sign", o.sign, "+ or -, applied to |rho|")->check(CLI::IsMember({"+", "-"}));
    build->add_option("--form", o.form, "first or second canonical form")->capture_default_str();

    auto* bounds = app.add_subcommand("bounds", "correlation bounds of a representation");
    bounds->add_option("--file", o.file, "phase_type model")->required();
    bounds->add_option("--second", o.second, "second phase_type model (default: the same)");
    bounds->add_option("--mode", o.mode, "parallel, sequential or map")->capture_default_str();

    auto* couple = app.add_subcommand("couple", "extreme or targeted coupling");
    couple->add_option("--file", o.file, "phase_type model")->required();
    couple->add_option("--second", o.second, "second phase_type model (default: the same)");
    couple->add_option("--mode", o.mode, "parallel or sequential")->capture_default_str();
    couple->add_option("--rho", o.rho, "target coefficient of correlation");
    couple->add_option("--extreme", o.extreme, "max or min when no target is given")->capture_default_str();

    auto* map = app.add_subcommand("map", "MAP with the given marginal and lag-1 autocorrelation");
    map->add_option("--file", o.file, "canonical phase_type model")->required();
    map->add_option("--rho", o.rho, "target autocorrelation");
    map->add_option("--extreme", o.extreme, "max or min when no target is given")->capture_default_str();
    map->add_option("--lag", o.lag, "lag reported in the output")->capture_default_str();

    auto* expand = app.add_subcommand("expand", "hyperexponential or Erlang expansion");
    expand->add_option("--type", o.type, "hyperexp or erlang")->required();
    expand->add_option("--pi", o.pi, "hyperexponential probabilities")->delimiter(',');
    expand->add_option("--rates", o.rates, "hyperexponential rates, increasing")->delimiter(',');
    expand->add_option("--alloc", o.alloc, "phases per hyperexponential phase")->delimiter(',');
    expand->add_option("--target", o.target, "greedy allocation up to this rho+");
    expand->add_option("--sign", o.sign, "+ (optimal chains) or - (BlNi chains)")->check(CLI::IsMember({"+", "-"}));
    expand->add_option("--k", o.k, "Erlang stages")->capture_default_str();
    expand->add_option("--n", o.n, "order of the optimal chain per stage (default 2)");
    expand->add_option("--file", o.file, "first canonical chain per stage");
    expand->add_option("--form", o.form, "in, out or full");

    auto* queue = app.add_subcommand("queue", "queue experiments, CSV output");
    queue->add_option("--model", o.model, "mm1corr or taskpair")->capture_default_str();
    queue->add_option("--rho", o.rhos, "correlation values")->delimiter(',');
    queue->add_option("--util", o.utils, "utilizations")->delimiter(',');
    queue->add_option("--customers", o.customers, "customers per replication")->capture_default_str();
    queue->add_option("--reps", o.reps, "replications")->capture_default_str();
    queue->add_option("--method", o.method, "sim or pk (taskpair only)")->capture_default_str();

    auto* validate = app.add_subcommand("validate", "check a model file");
    validate->add_option("--file", o.file, "model file")->required();
    validate->add_option("--lambda", o.lambda, "expected exponential rate")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? exit_code::ok : exit_code::usage;
    }

    // `expand --form` defaults to in; `build --form` to first.
    if (expand->parsed() && o.form == "first") o.form = "in";

    Output output(out, o.out_file);
    try {
        if (build->parsed()) return cmd_build(o, output);
        if (bounds->parsed()) return cmd_bounds(o, output);
        if (couple->parsed()) return cmd_couple(o, output);
        if (map->parsed()) return cmd_map(o, output);
        if (expand->parsed()) return cmd_expand(o, output);
        if (queue->parsed()) return cmd_queue(o, output);
        if (validate->parsed()) return cmd_validate(o, output);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::usage;
    } catch (const Infeasible& e) {
        err << "infeasible: " << e.what() << "\n";
        return exit_code::infeasible;
    } catch (const Error& e) {
        err << "invalid model: " << e.what() << "\n";
        return exit_code::bad_model;
    }
    return exit_code::usage;
}

}  // namespace corrph
