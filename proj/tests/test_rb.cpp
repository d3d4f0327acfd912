#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <vector>

#include "mvr/hdg.hpp"
#include "mvr/model.hpp"
#include "mvr/rb.hpp"
#include "mvr/rng.hpp"

using namespace mvr;
using Complexd = std::complex<double>;

namespace {

hdg::AffineSystem<double> make_bench(int q_count, int nelem, int p) {
    return hdg::assemble_affine<double>(
        hdg::Mesh1D::uniform(nelem), hdg::DiscreteSpaces{p},
        RandomFieldExpansion::benchmark_piecewise(q_count),
        ParameterDomain::uniform_box(q_count, 0.1, 1.0), 0.0,
        hdg::BoundaryCondition<double>::dirichlet(0.0),
        hdg::BoundaryCondition<double>::robin(0.0, 0.0), [](double) { return 1.0; }, 1.0);
}

struct Bench {
    hdg::AffineSystem<double> sys;
    std::vector<ParameterVector> training;
    rb::GreedyResult<double> built;
};

const Bench& bench10() {
    static Bench b = [] {
        Bench out;
        out.sys = make_bench(10, 10, 2);
        SampleStream stream(2024);
        out.training =
            draw_samples(stream, ParameterDomain::uniform_box(10, 0.1, 1.0), 1000);
        rb::GreedyOptions opt;
        opt.N_max = 10;
        opt.compliant = true;
        out.built = rb::greedy_build(out.sys, out.training, opt);
        return out;
    }();
    return b;
}

// oracle: dual norm of the residual by a direct W-solve in the full space
double direct_dual_norm(const hdg::AffineSystem<double>& sys, const rb::RBModel<double>& model,
                        int N, const ParameterVector& y, rb::ResidualKind kind) {
    const auto sol = rb::online_solve(model, N, y);
    Eigen::VectorXd r;
    if (kind == rb::ResidualKind::Primal) {
        r = sys.rhs_at(y) -
            Eigen::MatrixXd(sys.at(y)) * rb::lift_solution(model, N, sol.u);
    } else {
        const int ndu = int(sol.phi.size());
        const Eigen::VectorXd phi_full = model.dual.basis.leftCols(ndu) * sol.phi;
        r = -sys.ell - Eigen::MatrixXd(sys.at(y)).transpose() * phi_full;
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sys.W);
    const Eigen::VectorXd e = ldlt.solve(r);
    return std::sqrt(r.dot(e));
}

double full_output(const hdg::AffineSystem<double>& sys, const ParameterVector& y) {
    const auto sol = hdg::solve_full(sys, y);
    return hdg::evaluate_output(sys, sol);
}

}  // namespace

TEST_CASE("greedy reaches N=10 and the bound collapses there") {
    const auto& b = bench10();
    const auto& model = b.built.model;
    REQUIRE(model.N == 10);
    double worst = 0.0;
    for (const auto& y : b.training)
        worst = std::max(worst, rb::output_bound(model, 10, y)->delta_s);
    CHECK(worst < 1e-8);
}

TEST_CASE("greedy selection is deterministic") {
    const auto& b = bench10();
    rb::GreedyOptions opt;
    opt.N_max = 10;
    opt.compliant = true;
    const auto again = rb::greedy_build(b.sys, b.training, opt);
    REQUIRE(again.selected.size() == b.built.selected.size());
    for (std::size_t i = 0; i < again.selected.size(); ++i)
        CHECK(again.selected[i] == b.built.selected[i]);
}

TEST_CASE("basis is W-orthonormal") {
    const auto& b = bench10();
    const auto& Z = b.built.model.primal.basis;
    const Eigen::MatrixXd gram = Z.transpose() * Eigen::MatrixXd(b.sys.W) * Z;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
    CHECK((gram - id).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("single-parameter manifold is spanned by one snapshot") {
    auto sys = make_bench(1, 5, 2);
    SampleStream stream(3);
    const auto training = draw_samples(stream, ParameterDomain::uniform_box(1, 0.1, 1.0), 20);
    rb::GreedyOptions opt;
    opt.N_max = 1;
    opt.compliant = true;
    const auto built = rb::greedy_build(sys, training, opt);
    REQUIRE(built.model.N == 1);
    for (const auto& y : training) {
        const auto bound = rb::output_bound(built.model, 1, y);
        REQUIRE(bound.has_value());
        CHECK(bound->delta_pr < 1e-10);
        // brute-force cross-check against the full solve
        const auto sol = rb::online_solve(built.model, 1, y);
        const Eigen::VectorXd lifted = rb::lift_solution(built.model, 1, sol.u);
        const Eigen::VectorXd full = hdg::solve_full(sys, y).combined(sys.layout);
        CHECK((lifted - full).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("linearly dependent snapshots are skipped") {
    auto sys = make_bench(1, 5, 2);
    std::vector<ParameterVector> training;
    for (int i = 0; i < 5; ++i) training.push_back(ParameterVector::Constant(1, 0.5));
    rb::GreedyOptions opt;
    opt.N_max = 3;
    opt.compliant = true;
    const auto built = rb::greedy_build(sys, training, opt);
    CHECK(built.model.N == 1);  // manifold is one-dimensional, rest are dependent
}

TEST_CASE("online_solve reproduces the full solution at full N") {
    const auto& b = bench10();
    SampleStream stream(7);
    const auto domain = ParameterDomain::uniform_box(10, 0.1, 1.0);
    for (int t = 0; t < 10; ++t) {
        const auto y = draw_one(stream, domain);
        const auto sol = rb::online_solve(b.built.model, 10, y);
        const Eigen::VectorXd lifted = rb::lift_solution(b.built.model, 10, sol.u);
        const Eigen::VectorXd full = hdg::solve_full(b.sys, y).combined(b.sys.layout);
        const Eigen::VectorXd diff = lifted - full;
        const double err_w = std::sqrt(diff.dot(b.sys.W * diff));
        CHECK(err_w < 1e-9);
    }
    CHECK_THROWS_AS(rb::online_solve(b.built.model, 0, ParameterVector::Ones(10)),
                    std::invalid_argument);
    CHECK_THROWS_AS(rb::online_solve(b.built.model, 11, ParameterVector::Ones(10)),
                    std::invalid_argument);
}

TEST_CASE("online output matches the full output at N=10") {
    const auto& b = bench10();
    SampleStream stream(8);
    const auto domain = ParameterDomain::uniform_box(10, 0.1, 1.0);
    for (int t = 0; t < 100; ++t) {
        const auto y = draw_one(stream, domain);
        CHECK(std::abs(rb::online_output(b.built.model, 10, y) - full_output(b.sys, y)) <
              1e-8);
    }
}

TEST_CASE("dual correction vanishes when the primal is exact") {
    const auto& b = bench10();
    ParameterVector y = ParameterVector::Constant(10, 0.4);
    const auto sol = rb::online_solve(b.built.model, 10, y);
    const double l_part = b.built.model.l_pr.transpose() * sol.u;
    const double with_corr = rb::online_output(b.built.model, 10, y);
    CHECK(std::abs(with_corr - l_part) < 1e-13);
}

TEST_CASE("output error at N=9 sits at the documented level") {
    const auto& b = bench10();
    SampleStream stream(9);
    const auto domain = ParameterDomain::uniform_box(10, 0.1, 1.0);
    double err_sum = 0.0, bound_sum = 0.0;
    const int m = 1000;
    for (int t = 0; t < m; ++t) {
        const auto y = draw_one(stream, domain);
        err_sum += std::abs(rb::online_output(b.built.model, 9, y) - full_output(b.sys, y));
        bound_sum += rb::output_bound(b.built.model, 9, y)->delta_s;
    }
    const double avg_err = err_sum / m, avg_bound = bound_sum / m;
    CHECK(avg_err > 3e-4);
    CHECK(avg_err < 3e-2);
    // bound effectivity: one to two orders above the true error
    CHECK(avg_bound / avg_err > 2.0);
    CHECK(avg_bound / avg_err < 5000.0);
}

TEST_CASE("true output error collapses by 1e4 between N=9 and N=10") {
    const auto& b = bench10();
    SampleStream stream(10);
    const auto domain = ParameterDomain::uniform_box(10, 0.1, 1.0);
    double max9 = 0.0, max10 = 0.0;
    for (int t = 0; t < 200; ++t) {
        const auto y = draw_one(stream, domain);
        const double s_h = full_output(b.sys, y);
        max9 = std::max(max9, std::abs(rb::online_output(b.built.model, 9, y) - s_h));
        max10 = std::max(max10, std::abs(rb::online_output(b.built.model, 10, y) - s_h));
    }
    CHECK(max9 > 1e4 * max10);
}

TEST_CASE("residual dual norm matches the direct Riesz solve") {
    const auto& b = bench10();
    SampleStream stream(11);
    const auto domain = ParameterDomain::uniform_box(10, 0.1, 1.0);
    for (int t = 0; t < 10; ++t) {
        const auto y = draw_one(stream, domain);
        for (const auto kind : {rb::ResidualKind::Primal, rb::ResidualKind::Dual}) {
            const double fast = rb::residual_dual_norm(b.built.model, 5, y, kind);
            const double slow = direct_dual_norm(b.sys, b.built.model, 5, y, kind);
            CHECK(std::abs(fast - slow) / slow < 1e-8);
        }
    }
}

TEST_CASE("scaling b and ell doubles the residual norms at fixed basis") {
    const auto& b = bench10();
    auto sys2 = b.sys;
    sys2.b *= 2.0;
    sys2.ell *= 2.0;
    auto model2 = b.built.model;
    const rb::RieszSolver riesz(sys2.W);
    rb::detail::update_reduced(model2, sys2, riesz);
    ParameterVector y = ParameterVector::Constant(10, 0.7);
    y[3] = 0.2;
    for (const auto kind : {rb::ResidualKind::Primal, rb::ResidualKind::Dual}) {
        const double base = rb::residual_dual_norm(b.built.model, 4, y, kind);
        const double scaled = rb::residual_dual_norm(model2, 4, y, kind);
        CHECK(scaled == doctest::Approx(2.0 * base).epsilon(1e-12));
    }
}

TEST_CASE("stability lower bound") {
    const auto& b = bench10();
    const auto& model = b.built.model;
    REQUIRE(model.beta_ref.has_value());
    const double beta_ref = *model.beta_ref;
    CHECK(beta_ref > 0.0);
    CHECK(*rb::stability_lower_bound(model, ParameterVector::Ones(10)) ==
          doctest::Approx(beta_ref).epsilon(1e-14));
    CHECK(*rb::stability_lower_bound(model, ParameterVector::Constant(10, 0.1)) ==
          doctest::Approx(0.1 * beta_ref).epsilon(1e-14));

    const Eigen::MatrixXd w = Eigen::MatrixXd(b.sys.W);
    SampleStream stream(12);
    const auto domain = ParameterDomain::uniform_box(10, 0.1, 1.0);
    for (int t = 0; t < 20; ++t) {
        const auto y = draw_one(stream, domain);
        const Eigen::MatrixXd a = Eigen::MatrixXd(b.sys.at(y));
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
            0.5 * (a + a.transpose()), w);
        const double beta_true = es.eigenvalues().minCoeff();
        CHECK(*rb::stability_lower_bound(model, y) <= beta_true * (1.0 + 1e-12));
    }
    ParameterVector bad = ParameterVector::Ones(10);
    bad[2] = -0.5;
    CHECK_THROWS_AS(rb::stability_lower_bound(model, bad), std::domain_error);
}

TEST_CASE("output bound is rigorous over random (N, y) pairs") {
    const auto& b = bench10();
    SampleStream stream(13);
    const auto domain = ParameterDomain::uniform_box(10, 0.1, 1.0);
    int violations = 0;
    for (int t = 0; t < 1000; ++t) {
        const int N = 1 + int(stream.next_double() * 9.0);  // 1..9
        const auto y = draw_one(stream, domain);
        const auto bound = rb::output_bound(b.built.model, N, y);
        REQUIRE(bound.has_value());
        CHECK(bound->delta_s >= 0.0);
        CHECK(bound->delta_s ==
              doctest::Approx(bound->beta * bound->delta_pr * bound->delta_du).epsilon(1e-12));
        const double true_err = std::abs(bound->s_N - full_output(b.sys, y));
        if (true_err > bound->delta_s) ++violations;
    }
    CHECK(violations == 0);

    // at the exact N the bound and the true error are both round-off sized
    const auto y = ParameterVector::Constant(10, 0.55);
    const auto exact = rb::output_bound(b.built.model, 10, y);
    CHECK(exact->delta_s < 1e-13);
    CHECK(std::abs(exact->s_N - full_output(b.sys, y)) < 1e-13);
}

TEST_CASE("model serialization round-trips") {
    const auto& b = bench10();
    const std::string path = "rb_model_roundtrip.txt";
    rb::save_model(b.built.model, path);
    const auto loaded = rb::load_model<double>(path);
    CHECK(loaded.N == b.built.model.N);
    CHECK(loaded.Q == b.built.model.Q);
    CHECK(loaded.compliant == b.built.model.compliant);
    SampleStream stream(14);
    const auto domain = ParameterDomain::uniform_box(10, 0.1, 1.0);
    for (int t = 0; t < 5; ++t) {
        const auto y = draw_one(stream, domain);
        for (int N : {3, 7, 10}) {
            CHECK(rb::online_output(loaded, N, y) ==
                  doctest::Approx(rb::online_output(b.built.model, N, y)).epsilon(1e-12));
            CHECK(rb::output_bound(loaded, N, y)->delta_s ==
                  doctest::Approx(rb::output_bound(b.built.model, N, y)->delta_s)
                      .epsilon(1e-9));
        }
    }
    // the format is plain text
    std::ifstream in(path);
    std::string magic;
    in >> magic;
    CHECK(magic == "rbmodel");
    in.close();
    std::remove(path.c_str());
}

TEST_CASE("noncoercive complex path builds from residual indicators") {
    // parametrized Helmholtz-type family: two-subdomain coefficient field with
    // a complex reaction term and an impedance condition
    const Complexd rho(-9.0, 1.0);
    auto sys = hdg::assemble_affine<Complexd>(
        hdg::Mesh1D::uniform(8), hdg::DiscreteSpaces{2},
        RandomFieldExpansion::benchmark_piecewise(2),
        ParameterDomain::uniform_box(2, 0.5, 2.0), rho,
        hdg::BoundaryCondition<Complexd>::dirichlet(Complexd(0.0)),
        hdg::BoundaryCondition<Complexd>::robin(Complexd(0.0, 3.0), Complexd(1.0)),
        [](double) { return Complexd(1.0); }, 1.0);

    SampleStream stream(15);
    const auto domain = ParameterDomain::uniform_box(2, 0.5, 2.0);
    const auto training = draw_samples(stream, domain, 80);
    rb::GreedyOptions opt;
    opt.N_max = 8;
    opt.compliant = false;
    opt.coercive = false;
    const auto built = rb::greedy_build(sys, training, opt);
    REQUIRE(built.model.N >= 4);

    CHECK(!rb::stability_lower_bound(built.model, training[0]).has_value());
    CHECK(!rb::output_bound(built.model, built.model.N, training[0]).has_value());

    // error decays with N and the top level is accurate
    double worst_top = 0.0, worst_small = 0.0;
    for (int t = 0; t < 20; ++t) {
        const auto y = draw_one(stream, domain);
        const auto sol = hdg::solve_full(sys, y);
        const Complexd s_h = hdg::evaluate_output(sys, sol);
        worst_top = std::max(worst_top,
                             std::abs(rb::online_output(built.model, built.model.N, y) - s_h));
        worst_small =
            std::max(worst_small, std::abs(rb::online_output(built.model, 2, y) - s_h));
    }
    CHECK(worst_top < 1e-6);
    CHECK(worst_top < worst_small);

    // complex residual norms still match the direct Riesz computation
    const auto y = training[5];
    const auto sol = rb::online_solve(built.model, 3, y);
    const auto lifted = rb::lift_solution(built.model, 3, sol.u);
    hdg::VectorX<Complexd> r =
        sys.rhs_at(y) - hdg::MatrixX<Complexd>(sys.at(y)) * lifted;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sys.W);
    Eigen::VectorXd er = ldlt.solve(Eigen::VectorXd(r.real()));
    Eigen::VectorXd ei = ldlt.solve(Eigen::VectorXd(r.imag()));
    const double slow = std::sqrt(r.real().dot(er) + r.imag().dot(ei));
    const double fast = rb::residual_dual_norm(built.model, 3, y, rb::ResidualKind::Primal);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-8));
}
