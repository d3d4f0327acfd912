#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mvr/csv.hpp"
#include "mvr/harness.hpp"
#include "mvr/model.hpp"

using namespace mvr;
namespace fs = std::filesystem;

namespace {

harness::ExperimentConfig parse(const std::string& text) {
    std::istringstream is(text);
    return harness::parse_config(is, "test.ini");
}

const std::string base_config = R"(
[model]
q = 10
y_min = 0.1
y_max = 1.0
full_model = analytic

[discretization]
elements = 10
p = 2

[rb]
n_max = 6
training = 120
seed = 7
n_eval = 5

[mc]
a = 1.96
seed = 11
replications = 10
schedule = 100, 400

[mvr]
levels = 1:2
test_set = 150
dims = 5

[output]
dir = .
)";

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("mvr_harness_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream out;
    out << is.rdbuf();
    return out.str();
}

harness::RunOptions opts_in(const TempDir& dir) {
    harness::RunOptions o;
    o.out_dir = dir.path.string();
    o.deterministic = true;
    return o;
}

}  // namespace

TEST_CASE("config parsing fills every block") {
    const auto cfg = parse(base_config);
    CHECK(cfg.model.q == 10);
    CHECK(cfg.model.y_min == doctest::Approx(0.1));
    CHECK(cfg.model.full_model == "analytic");
    CHECK(cfg.discretization.elements == 10);
    CHECK(cfg.discretization.p == 2);
    CHECK(cfg.rb.n_max == 6);
    CHECK(cfg.rb.seed == 7);
    CHECK(cfg.rb.n_eval == 5);
    CHECK(cfg.mc.replications == 10);
    CHECK(cfg.mc.schedule == std::vector<std::size_t>{100, 400});
    CHECK(cfg.mvr.l_min == 1);
    CHECK(cfg.mvr.l_max == 2);
    CHECK(cfg.mvr.dims == std::vector<int>{5});
    CHECK(cfg.output.dir == ".");
}

TEST_CASE("config errors carry file and line information") {
    const auto fails_with = [](const std::string& text, const std::string& needle) {
        try {
            parse(text);
            FAIL("expected ConfigError");
        } catch (const harness::ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    fails_with("[model]\nbogus = 3\n", "test.ini:2");
    fails_with("[model]\nbogus = 3\n", "unknown key model.bogus");
    fails_with("[nope]\n", "unknown block");
    fails_with("q = 10\n", "outside of any block");
    fails_with("[model]\nq = ten\n", "expected a number");
    fails_with("[model]\nq = 2.5\n", "expected an integer");

    CHECK_THROWS_AS(parse("[mc]\neps_tol = 0\n"), harness::ConfigError);
    CHECK_THROWS_AS(parse("[mvr]\ndims = 3, 5\n"), harness::ConfigError);
    CHECK_THROWS_AS(parse("[model]\nfield = lognormal\n"), harness::ConfigError);
    CHECK_THROWS_AS(parse("[rb]\nn_eval = 20\n"), harness::ConfigError);
}

TEST_CASE("csv tables round-trip exactly") {
    csv::Table t;
    t.name = "demo";
    t.columns = {"x", "y", "z"};
    t.rows = {{1.0, -2.5e-300, 3.3333333333333333},
              {0.0, 9.87654321e12, -1.0 / 3.0},
              {5e-324, 1.7976931348623157e308, std::acos(-1.0)}};
    std::ostringstream os;
    csv::write(os, t);
    std::istringstream is(os.str());
    const auto back = csv::read(is);
    CHECK(back.name == "demo");
    CHECK(back.columns == t.columns);
    REQUIRE(back.rows.size() == t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            CHECK(back.rows[r][c] == t.rows[r][c]);

    std::ostringstream os2;
    csv::write(os2, back);
    CHECK(os2.str() == os.str());  // re-emission is byte-identical

    std::istringstream bad("not,a,schema\n");
    CHECK_THROWS(csv::read(bad));
}

TEST_CASE("oracle emits closed-form moments and refuses non-benchmark setups") {
    TempDir dir("oracle");
    const auto cfg = parse(base_config);
    harness::cmd_oracle(cfg, opts_in(dir));
    const auto moments = csv::read_file((dir.path / "oracle_moments.csv").string());
    const auto exact = analytic_moments_1d(ParameterDomain::uniform_box(10, 0.1, 1.0));
    CHECK(moments.rows[0][0] == doctest::Approx(exact.mean).epsilon(1e-14));
    CHECK(moments.rows[0][1] == doctest::Approx(exact.variance).epsilon(1e-14));

    const auto probes = csv::read_file((dir.path / "oracle_probes.csv").string());
    CHECK(probes.columns.size() == 12);  // probe + 10 components + s
    CHECK(probes.rows[0].back() == doctest::Approx(1.0 / 3.0).epsilon(1e-14));  // y = (1,...,1)

    auto off = cfg;
    off.model.rho = 1.0;
    CHECK_THROWS_AS(harness::cmd_oracle(off, opts_in(dir)), harness::ConfigError);
}

TEST_CASE("build-rb writes a deterministic model and a convergence table") {
    TempDir dir("build");
    const auto cfg = parse(base_config);
    harness::cmd_build_rb(cfg, opts_in(dir));
    const auto first = slurp(dir.path / "rb_model.txt");
    CHECK(!first.empty());
    harness::cmd_build_rb(cfg, opts_in(dir));
    CHECK(slurp(dir.path / "rb_model.txt") == first);  // same seed, same bytes

    const auto table = csv::read_file((dir.path / "greedy_table.csv").string());
    REQUIRE(table.rows.size() == 6);
    CHECK(table.rows.back()[4] < table.rows.front()[4]);  // avg error shrinks with N
    for (const auto& row : table.rows) CHECK(row[1] >= row[3] * 0.999);  // bound >= max err
}

TEST_CASE("run emits replication rows whose summary is the exact column mean") {
    TempDir dir("run");
    const auto cfg = parse(base_config);
    harness::cmd_run(cfg, "mc-hdg", opts_in(dir));

    const auto rows = csv::read_file((dir.path / "run_mc-hdg.csv").string());
    const auto summary = csv::read_file((dir.path / "run_mc-hdg_summary.csv").string());
    REQUIRE(rows.rows.size() == 20);  // 2 schedule points x 10 replications
    REQUIRE(summary.rows.size() == 2);
    for (std::size_t si = 0; si < summary.rows.size(); ++si) {
        const double m = summary.rows[si][0];
        for (std::size_t c = 0; c < rows.columns.size(); ++c) {
            double sum = 0.0;
            int n = 0;
            for (const auto& row : rows.rows)
                if (row[0] == m) {
                    sum += row[c];
                    ++n;
                }
            CHECK(summary.rows[si][c] == doctest::Approx(sum / n).epsilon(1e-12));
        }
    }

    const auto first = slurp(dir.path / "run_mc-hdg.csv");
    harness::cmd_run(cfg, "mc-hdg", opts_in(dir));
    CHECK(slurp(dir.path / "run_mc-hdg.csv") == first);  // deterministic bytes

    auto threaded = opts_in(dir);
    threaded.threads = 3;
    harness::cmd_run(cfg, "mc-hdg", threaded);
    CHECK(slurp(dir.path / "run_mc-hdg.csv") == first);  // order independent of threads

    CHECK_THROWS_AS(harness::cmd_run(cfg, "mc-sobol", opts_in(dir)), harness::ConfigError);
}

TEST_CASE("rb-based runs require the offline model and certify their error") {
    TempDir dir("rbrun");
    const auto cfg = parse(base_config);
    CHECK_THROWS_AS(harness::cmd_run(cfg, "mc-rb", opts_in(dir)), harness::ConfigError);

    harness::cmd_build_rb(cfg, opts_in(dir));
    harness::cmd_run(cfg, "mc-rb", opts_in(dir));
    const auto rb_rows = csv::read_file((dir.path / "run_mc-rb.csv").string());
    for (const auto& row : rb_rows.rows) {
        CHECK(row[5] >= row[4]);  // bound_total covers the true error
        CHECK(row[6] == 0.0);     // no full solves
    }

    harness::cmd_run(cfg, "mvr", opts_in(dir));
    const auto mvr_rows = csv::read_file((dir.path / "run_mvr.csv").string());
    for (const auto& row : mvr_rows.rows)
        CHECK(row[6] == doctest::Approx(row[0] / 10.0).epsilon(0.01));  // M/10 full solves
}

TEST_CASE("select degenerates to one level when surrogates cost as much as the full model") {
    TempDir dir("select");
    auto cfg = parse(base_config);
    cfg.mvr.t_h_override = 1.0;
    cfg.mvr.t_n_override.assign(std::size_t(cfg.rb.n_max), 1.0);
    harness::cmd_build_rb(cfg, opts_in(dir));
    harness::cmd_select(cfg, opts_in(dir));
    const auto table = csv::read_file((dir.path / "select_table.csv").string());
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0][0] == 1.0);
    CHECK(table.rows[0][4] == double(cfg.rb.n_max));  // L=1 keeps the richest surrogate

    const auto first = slurp(dir.path / "select_table.csv");
    harness::cmd_select(cfg, opts_in(dir));
    CHECK(slurp(dir.path / "select_table.csv") == first);
}

TEST_CASE("zero-variance degenerate domain yields exact error-free rows") {
    TempDir dir("degen");
    auto cfg = parse(base_config);
    cfg.model.y_min = cfg.model.y_max = 1.0;
    cfg.mc.schedule = {50};
    cfg.mc.replications = 3;
    harness::cmd_run(cfg, "mc-hdg", opts_in(dir));
    const auto rows = csv::read_file((dir.path / "run_mc-hdg.csv").string());
    for (const auto& row : rows.rows) {
        CHECK(row[3] == 0.0);                                    // half width
        CHECK(row[4] == doctest::Approx(0.0).epsilon(1e-14));    // true error
    }
}
