#include "corrph/cli.hpp"
#include "corrph/model_io.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace corrph;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("corrph_cli_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

struct Example {
    std::string command;  // arguments after "corrph"
    std::string expected;
    int exit_code = 0;
};

// "$ corrph ..." lines of the console blocks, each followed by its output
// and an optional "[exit N]" line.
std::vector<Example> readme_examples(const std::string& path) {
    std::ifstream in(path);
    std::vector<Example> out;
    std::string line;
    bool inside = false;
    while (std::getline(in, line)) {
        if (line.rfind("```", 0) == 0) {
            inside = !inside && line == "```console";
            continue;
        }
        if (!inside) continue;
        if (line.rfind("$ corrph", 0) == 0) {
            out.push_back({line.substr(std::string("$ corrph").size()), "", 0});
        } else if (!out.empty() && line.rfind("[exit ", 0) == 0) {
            out.back().exit_code = std::stoi(line.substr(6));
        } else if (!out.empty()) {
            out.back().expected += line + "\n";
        }
    }
    return out;
}

Result run_binary(const std::string& args, const fs::path& dir) {
    const std::string command = "cd '" + dir.string() + "' && '" CORRPH_CLI_PATH "'" + args + " 2>&1";
    FILE* pipe = ::popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    std::array<char, 4096> buffer;
    std::size_t got;
    while ((got = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0) out.append(buffer.data(), got);
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, ""};
}

}  // namespace

TEST_CASE("build writes a phase-type document") {
    TempDir dir;
    const Result r = run({"--out", dir.file("c.json"), "build", "--sign", "+", "--rho", "0.8"});
    CHECK(r.code == exit_code::ok);
    const ModelFile m = read_model_file(dir.file("c.json"));
    CHECK(std::get<PhaseType>(m.payload).order() == 16);

    const Result blni = run({"build", "--rho", "0.8", "--family", "blni"});
    CHECK(parse_model(blni.out).extra.empty());
    CHECK(nlohmann::json::parse(blni.out).at("order") == 18);

    const Result neg = run({"build", "--family", "negative3"});
    REQUIRE(neg.code == exit_code::ok);
    CHECK(nlohmann::json::parse(neg.out).at("rho_minus").get<double>() == doctest::Approx(-0.3615386).epsilon(1e-6));

    const Result second = run({"build", "--n", "3", "--form", "second"});
    CHECK(classify(std::get<PhaseType>(parse_model(second.out).payload)).tag == CanonicalTag::second);
}

TEST_CASE("bounds and couplings") {
    TempDir dir;
    REQUIRE(run({"--out", dir.file("c.json"), "build", "--n", "2"}).code == 0);
    CHECK(run({"bounds", "--file", dir.file("c.json"), "--mode", "parallel"}).out == "(-0.25, 0.25)\n");
    CHECK(run({"bounds", "--file", dir.file("c.json"), "--mode", "map"}).out == "(-0.25, 0.25)\n");

    const Result max = run({"couple", "--file", dir.file("c.json"), "--mode", "parallel", "--extreme", "max"});
    REQUIRE(max.code == 0);
    const auto c = std::get<CouplingRecord>(parse_model(max.out).payload);
    CHECK(c.rho == doctest::Approx(0.25));
    CHECK(c.flow.sum() == doctest::Approx(1.0));

    REQUIRE(run({"--out", dir.file("s.json"), "build", "--n", "2", "--form", "second"}).code == 0);
    const Result seq = run({"couple", "--file", dir.file("s.json"), "--second", dir.file("c.json"), "--mode",
                            "sequential", "--rho", "0.1"});
    REQUIRE(seq.code == 0);
    const auto doc = nlohmann::json::parse(seq.out);
    CHECK(doc.at("rho").get<double>() == doctest::Approx(0.1));
    CHECK(doc.contains("transfer"));

    CHECK(run({"couple", "--file", dir.file("c.json"), "--mode", "parallel", "--rho", "0.5"}).code ==
          exit_code::infeasible);
}

TEST_CASE("map and expand") {
    TempDir dir;
    REQUIRE(run({"--out", dir.file("c.json"), "build", "--n", "3"}).code == 0);
    const Result m = run({"map", "--file", dir.file("c.json"), "--rho", "0.25"});
    REQUIRE(m.code == 0);
    const auto doc = nlohmann::json::parse(m.out);
    CHECK(doc.at("autocorrelation").get<double>() == doctest::Approx(0.25));
    CHECK(doc.at("marginal_exponential") == true);
    CHECK(std::get<Map>(parse_model(m.out).payload).order() == 6);
    CHECK(run({"map", "--file", dir.file("c.json"), "--rho", "0.5"}).code == exit_code::infeasible);

    const Result h = run({"expand", "--type", "hyperexp", "--pi", "0.5,0.5", "--rates", "0.6666666666666666,2",
                          "--alloc", "2,2"});
    REQUIRE(h.code == 0);
    CHECK(nlohmann::json::parse(h.out).at("rho_plus").get<double>() == doctest::Approx(0.375));
    const Result g = run({"expand", "--type", "hyperexp", "--pi", "0.5,0.5", "--rates", "0.6666666666666666,2",
                          "--target", "0.6"});
    REQUIRE(g.code == 0);
    CHECK(nlohmann::json::parse(g.out).at("rho_plus").get<double>() >= 0.6);

    REQUIRE(run({"--out", dir.file("c2.json"), "build", "--n", "2"}).code == 0);
    for (const char* form : {"in", "out", "full"}) {
        const Result e = run({"expand", "--type", "erlang", "--k", "2", "--file", dir.file("c2.json"), "--form", form});
        REQUIRE(e.code == 0);
        const auto order = std::get<PhaseType>(parse_model(e.out).payload).order();
        CHECK(order == (std::string(form) == "full" ? 9 : 4));
    }
}

TEST_CASE("queue CSV") {
    const Result r = run({"queue", "--model", "mm1corr", "--rho", "0,0.25", "--util", "0.5", "--customers", "20000"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string header, row;
    std::getline(lines, header);
    CHECK(header == "rho,util,L,W,ci_L,realized_rho");
    int rows = 0;
    while (std::getline(lines, row)) ++rows;
    CHECK(rows == 2);
    // fixed seed, fixed output
    CHECK(run({"queue", "--model", "mm1corr", "--rho", "0,0.25", "--util", "0.5", "--customers", "20000"}).out == r.out);
    CHECK(run({"queue", "--model", "mm1corr", "--rho", "0", "--util", "1.2"}).code == exit_code::bad_model);
}

TEST_CASE("validation and error codes") {
    TempDir dir;
    REQUIRE(run({"--out", dir.file("e.json"), "build", "--n", "1"}).code == 0);
    const Result ok = run({"validate", "--file", dir.file("e.json"), "--lambda", "1"});
    CHECK(ok.code == exit_code::ok);
    CHECK(ok.out.find("result: PASS") != std::string::npos);
    CHECK(run({"validate", "--file", dir.file("e.json"), "--lambda", "3"}).code == exit_code::validation_failed);

    {
        std::ofstream bad(dir.file("bad.json"));
        bad << "{ \"kind\": ";
    }
    CHECK(run({"validate", "--file", dir.file("bad.json")}).code == exit_code::bad_model);
    CHECK(run({"validate", "--file", dir.file("missing.json")}).code == exit_code::bad_model);
    CHECK(run({"frobnicate"}).code == exit_code::usage);
    CHECK(run({"build", "--bogus"}).code == exit_code::usage);
    CHECK(run({}).code == exit_code::usage);
    CHECK(run({"build", "--rho", "1.5"}).code == exit_code::infeasible);
    CHECK(run({"--help"}).code == exit_code::ok);
}

TEST_CASE("README examples reproduce their printed output") {
    const auto examples = readme_examples(CORRPH_README_PATH);
    REQUIRE(examples.size() >= 5);
    TempDir dir;
    for (const Example& e : examples) {
        INFO("corrph" << e.command);
        const Result r = run_binary(e.command, dir.path);
        CHECK(r.code == e.exit_code);
        CHECK(r.out == e.expected);
    }
}
