#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvr/hdg.hpp"
#include "mvr/model.hpp"

namespace mvr::rb {

using hdg::MatrixX;
using hdg::VectorX;

// Solves W e = r for the Riesz representer; W is real SPD, right-hand sides
// may be complex.
class RieszSolver {
public:
    explicit RieszSolver(const Eigen::SparseMatrix<double>& w) {
        ldlt_.compute(w);
        if (ldlt_.info() != Eigen::Success)
            throw std::runtime_error("RieszSolver: W factorization failed");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& r) const { return ldlt_.solve(r); }

    VectorX<std::complex<double>> solve(const VectorX<std::complex<double>>& r) const {
        VectorX<std::complex<double>> e(r.size());
        e.real() = ldlt_.solve(Eigen::VectorXd(r.real()));
        e.imag() = ldlt_.solve(Eigen::VectorXd(r.imag()));
        return e;
    }

private:
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

template <typename Scalar>
struct RBSpace {
    MatrixX<Scalar> basis;                   // n x N, W-orthonormal columns
    std::vector<ParameterVector> snapshots;  // greedily selected parameters

    int size() const { return int(basis.cols()); }
};

struct OutputBound {
    double s_N = 0.0;  // real part of the RB output
    double delta_pr = 0.0;
    double delta_du = 0.0;
    double delta_s = 0.0;
    double beta = 0.0;
};

// Parameter-independent reduced quantities. Immutable after greedy_build;
// online queries are safe to run concurrently.
template <typename Scalar>
struct RBModel {
    int Q = 0;
    int N = 0;
    bool compliant = false;

    RBSpace<Scalar> primal;
    RBSpace<Scalar> dual;  // equals primal when compliant

    // reduced operators, one block per affine term q = 0..Q
    std::vector<MatrixX<Scalar>> A_pr, A_du, A_cross;
    // reduced right-hand sides per affine term (term 0 carries b itself)
    std::vector<VectorX<Scalar>> b_pr, b_du;
    VectorX<Scalar> l_pr, l_du;

    // Riesz data for the residual dual norms. Generator order: primal ->
    // [b + shift_0, shift_1..shift_Q, then per basis vector n the blocks
    // A_q zeta_n for q = 0..Q]; dual -> [ell, then A_q^T zeta_n^du]. The
    // n-major layout makes every level-N subset a contiguous prefix. R_pr and
    // R_du are upper-triangular factors of the generator Gram matrices in the
    // W' inner product (from a W-orthonormalization of the Riesz
    // representers), so ||r||_W' = ||R c||_2 without the cancellation a direct
    // c^H G c evaluation suffers near exactness.
    MatrixX<Scalar> R_pr, R_du;

    // stability data; empty in noncoercive mode
    std::optional<double> beta_ref;  // beta_h at the reference parameter
    ParameterVector y_ref;

    mutable std::atomic<long> clamp_warnings{0};

    Eigen::VectorXd theta(const ParameterVector& y) const {
        Eigen::VectorXd t(Q + 1);
        t[0] = 1.0;
        t.tail(Q) = y;
        return t;
    }

    int dual_size() const { return compliant ? N : dual.size(); }

    RBModel() = default;
    RBModel(const RBModel& o)
        : Q(o.Q), N(o.N), compliant(o.compliant), primal(o.primal), dual(o.dual),
          A_pr(o.A_pr), A_du(o.A_du), A_cross(o.A_cross), b_pr(o.b_pr), b_du(o.b_du),
          l_pr(o.l_pr), l_du(o.l_du), R_pr(o.R_pr), R_du(o.R_du), beta_ref(o.beta_ref),
          y_ref(o.y_ref), clamp_warnings(o.clamp_warnings.load()) {}
    RBModel& operator=(const RBModel& o) {
        if (this != &o) {
            RBModel tmp(o);
            *this = std::move(tmp);
        }
        return *this;
    }
    RBModel(RBModel&& o) noexcept
        : Q(o.Q), N(o.N), compliant(o.compliant), primal(std::move(o.primal)),
          dual(std::move(o.dual)), A_pr(std::move(o.A_pr)), A_du(std::move(o.A_du)),
          A_cross(std::move(o.A_cross)), b_pr(std::move(o.b_pr)), b_du(std::move(o.b_du)),
          l_pr(std::move(o.l_pr)), l_du(std::move(o.l_du)), R_pr(std::move(o.R_pr)),
          R_du(std::move(o.R_du)), beta_ref(o.beta_ref), y_ref(std::move(o.y_ref)),
          clamp_warnings(o.clamp_warnings.load()) {}
    RBModel& operator=(RBModel&& o) noexcept {
        Q = o.Q;
        N = o.N;
        compliant = o.compliant;
        primal = std::move(o.primal);
        dual = std::move(o.dual);
        A_pr = std::move(o.A_pr);
        A_du = std::move(o.A_du);
        A_cross = std::move(o.A_cross);
        b_pr = std::move(o.b_pr);
        b_du = std::move(o.b_du);
        l_pr = std::move(o.l_pr);
        l_du = std::move(o.l_du);
        R_pr = std::move(o.R_pr);
        R_du = std::move(o.R_du);
        beta_ref = o.beta_ref;
        y_ref = std::move(o.y_ref);
        clamp_warnings = o.clamp_warnings.load();
        return *this;
    }
};

enum class ResidualKind { Primal, Dual };

struct GreedyOptions {
    int N_max = 10;
    bool compliant = false;
    bool coercive = true;        // enables the min-theta stability lower bound
    double drop_tol = 1e-10;     // relative W-norm below which a snapshot is discarded
    double stop_tol = 0.0;       // stop early once the max indicator falls below this
};

template <typename Scalar>
struct GreedyResult {
    RBModel<Scalar> model;
    std::vector<double> max_indicator;  // per accepted basis vector, before adding it
    std::vector<int> selected;          // training-set indices in selection order
};

namespace detail {

template <typename Scalar>
VectorX<Scalar> apply_w(const Eigen::SparseMatrix<double>& w, const VectorX<Scalar>& v) {
    if constexpr (std::is_same_v<Scalar, double>) {
        return w * v;
    } else {
        VectorX<Scalar> r(v.size());
        r.real() = w * Eigen::VectorXd(v.real());
        r.imag() = w * Eigen::VectorXd(v.imag());
        return r;
    }
}

template <typename Scalar>
double w_norm(const Eigen::SparseMatrix<double>& w, const VectorX<Scalar>& v) {
    const Scalar sq = (v.adjoint() * apply_w(w, v))(0);
    return std::sqrt(std::abs(std::real(std::complex<double>(sq))));
}

// W-inner products of v against the columns of z
template <typename Scalar>
VectorX<Scalar> w_dots(const Eigen::SparseMatrix<double>& w, const MatrixX<Scalar>& z,
                       const VectorX<Scalar>& v) {
    return z.adjoint() * apply_w(w, v);
}

}  // namespace detail

template <typename Scalar>
double stability_reference(const hdg::AffineSystem<Scalar>& sys) {
    // smallest generalized eigenvalue of (A(y_ref), W) at y_ref = (1,...,1)
    const ParameterVector y_ref = ParameterVector::Ones(sys.Q);
    const MatrixX<Scalar> dense = MatrixX<Scalar>(sys.at(y_ref));
    Eigen::MatrixXd a;
    if constexpr (std::is_same_v<Scalar, double>) {
        a = dense;
    } else {
        a = dense.real();
    }
    a = 0.5 * (a + a.transpose()).eval();
    const Eigen::MatrixXd w = Eigen::MatrixXd(sys.W);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, w);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("stability_reference: eigensolver failed");
    return es.eigenvalues().minCoeff();
}

// beta_tilde(y) = min_q (theta_q(y) / theta_q(y_ref)) * beta_h(y_ref)
template <typename Scalar>
std::optional<double> stability_lower_bound(const RBModel<Scalar>& model,
                                            const ParameterVector& y) {
    if (!model.beta_ref) return std::nullopt;
    const Eigen::VectorXd t = model.theta(y);
    Eigen::VectorXd t_ref(model.Q + 1);
    t_ref[0] = 1.0;
    t_ref.tail(model.Q) = model.y_ref;
    double ratio = std::numeric_limits<double>::infinity();
    for (int q = 0; q <= model.Q; ++q) {
        if (!(t[q] > 0.0) || !(t_ref[q] > 0.0))
            throw std::domain_error("stability_lower_bound: needs positive theta coefficients");
        ratio = std::min(ratio, t[q] / t_ref[q]);
    }
    return ratio * *model.beta_ref;
}

template <typename Scalar>
struct ReducedSolution {
    VectorX<Scalar> u;    // primal reduced coefficients, size N
    VectorX<Scalar> phi;  // dual reduced coefficients, size dual N
};

template <typename Scalar>
ReducedSolution<Scalar> online_solve(const RBModel<Scalar>& model, int N,
                                     const ParameterVector& y) {
    if (N < 1 || N > model.N) throw std::invalid_argument("online_solve: N out of range");
    const Eigen::VectorXd t = model.theta(y);
    const int Ndu = std::min(N, model.dual_size());

    MatrixX<Scalar> a = MatrixX<Scalar>::Zero(N, N);
    VectorX<Scalar> rhs = VectorX<Scalar>::Zero(N);
    MatrixX<Scalar> a_du = MatrixX<Scalar>::Zero(Ndu, Ndu);
    for (int q = 0; q <= model.Q; ++q) {
        a += Scalar(t[q]) * model.A_pr[std::size_t(q)].topLeftCorner(N, N);
        rhs += Scalar(t[q]) * model.b_pr[std::size_t(q)].head(N);
        a_du += Scalar(t[q]) * model.A_du[std::size_t(q)].topLeftCorner(Ndu, Ndu);
    }

    const auto check = [&](const Eigen::PartialPivLU<MatrixX<Scalar>>& lu, const char* which) {
        const double mn = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
        const double mx = lu.matrixLU().diagonal().cwiseAbs().maxCoeff();
        if (!(mn > 1e-14 * std::max(mx, 1.0))) {
            std::ostringstream msg;
            msg << "online_solve: singular " << which << " reduced matrix at N=" << N << ", y=[";
            for (int q = 0; q < y.size(); ++q) msg << (q ? "," : "") << y[q];
            msg << "]";
            throw std::runtime_error(msg.str());
        }
    };

    ReducedSolution<Scalar> sol;
    Eigen::PartialPivLU<MatrixX<Scalar>> lu(a);
    check(lu, "primal");
    sol.u = lu.solve(rhs);

    Eigen::PartialPivLU<MatrixX<Scalar>> lu_du(a_du.transpose().eval());
    check(lu_du, "dual");
    sol.phi = lu_du.solve((-model.l_du.head(Ndu)).eval());
    return sol;
}

template <typename Scalar>
Scalar online_output(const RBModel<Scalar>& model, int N, const ParameterVector& y) {
    const auto sol = online_solve(model, N, y);
    const Eigen::VectorXd t = model.theta(y);
    const int Ndu = int(sol.phi.size());
    Scalar s = (model.l_pr.head(N).transpose() * sol.u)(0);
    // dual correction a(u_N, phi_N) - b(phi_N); zero when the primal is exact
    VectorX<Scalar> res = VectorX<Scalar>::Zero(Ndu);
    for (int q = 0; q <= model.Q; ++q)
        res += Scalar(t[q]) * (model.A_cross[std::size_t(q)].topLeftCorner(Ndu, N) * sol.u -
                               model.b_du[std::size_t(q)].head(Ndu));
    s += (sol.phi.transpose() * res)(0);
    return s;
}

// Dual norm of the primal or dual residual via the Riesz Gram expansion.
// Round-off can push the quadratic form slightly negative near exactness; the
// value is floored at machine precision relative to the term magnitudes so
// the certified bounds stay valid, and true negatives bump a warning counter.
template <typename Scalar>
double residual_dual_norm(const RBModel<Scalar>& model, int N, const ParameterVector& y,
                          ResidualKind kind, const ReducedSolution<Scalar>* presolved = nullptr) {
    ReducedSolution<Scalar> local;
    if (!presolved) {
        local = online_solve(model, N, y);
        presolved = &local;
    }
    const Eigen::VectorXd t = model.theta(y);
    const int Q = model.Q;

    VectorX<Scalar> c;
    const MatrixX<Scalar>* R = nullptr;
    if (kind == ResidualKind::Primal) {
        const int m = (Q + 1) * (N + 1);
        c = VectorX<Scalar>::Zero(m);
        for (int q = 0; q <= Q; ++q) c[q] = Scalar(t[q]);
        for (int n = 0; n < N; ++n)
            for (int q = 0; q <= Q; ++q)
                c[(Q + 1) * (1 + n) + q] = -Scalar(t[q]) * presolved->u[n];
        R = &model.R_pr;
    } else {
        const int Ndu = int(presolved->phi.size());
        const int m = 1 + (Q + 1) * Ndu;
        c = VectorX<Scalar>::Zero(m);
        c[0] = Scalar(-1);
        for (int n = 0; n < Ndu; ++n)
            for (int q = 0; q <= Q; ++q)
                c[1 + (Q + 1) * n + q] = -Scalar(t[q]) * presolved->phi[n];
        R = &model.R_du;
    }

    const int m = int(c.size());
    const double norm = (R->topLeftCorner(m, m) * c).norm();
    // ||R c||_2 is nonnegative by construction; the defensive clamp guards a
    // future evaluation path that could go negative through round-off
    if (!(norm >= 0.0)) {
        model.clamp_warnings.fetch_add(1, std::memory_order_relaxed);
        return 0.0;
    }
    return norm;
}

template <typename Scalar>
std::optional<OutputBound> output_bound(const RBModel<Scalar>& model, int N,
                                        const ParameterVector& y) {
    const auto beta = stability_lower_bound(model, y);
    if (!beta) return std::nullopt;
    const auto sol = online_solve(model, N, y);
    OutputBound b;
    b.beta = *beta;
    b.delta_pr = residual_dual_norm(model, N, y, ResidualKind::Primal, &sol) / *beta;
    b.delta_du = residual_dual_norm(model, N, y, ResidualKind::Dual, &sol) / *beta;
    b.delta_s = *beta * b.delta_pr * b.delta_du;
    const Eigen::VectorXd t = model.theta(y);
    Scalar s = (model.l_pr.head(N).transpose() * sol.u)(0);
    const int Ndu = int(sol.phi.size());
    VectorX<Scalar> res = VectorX<Scalar>::Zero(Ndu);
    for (int q = 0; q <= model.Q; ++q)
        res += Scalar(t[q]) * (model.A_cross[std::size_t(q)].topLeftCorner(Ndu, N) * sol.u -
                               model.b_du[std::size_t(q)].head(Ndu));
    s += (sol.phi.transpose() * res)(0);
    b.s_N = std::real(std::complex<double>(s));
    return b;
}

namespace detail {

// Rebuilds the reduced blocks and Riesz Gram matrices from the current bases.
template <typename Scalar>
void update_reduced(RBModel<Scalar>& model, const hdg::AffineSystem<Scalar>& sys,
                    const RieszSolver& riesz) {
    const int Q = sys.Q;
    const int N = model.primal.size();
    const int Ndu = model.compliant ? N : model.dual.size();
    const MatrixX<Scalar>& Z = model.primal.basis;
    const MatrixX<Scalar>& Zdu = model.compliant ? model.primal.basis : model.dual.basis;
    model.N = N;

    model.A_pr.assign(std::size_t(Q) + 1, MatrixX<Scalar>());
    model.A_du.assign(std::size_t(Q) + 1, MatrixX<Scalar>());
    model.A_cross.assign(std::size_t(Q) + 1, MatrixX<Scalar>());
    model.b_pr.assign(std::size_t(Q) + 1, VectorX<Scalar>());
    model.b_du.assign(std::size_t(Q) + 1, VectorX<Scalar>());
    for (int q = 0; q <= Q; ++q) {
        const auto& A = sys.A[std::size_t(q)];
        model.A_pr[std::size_t(q)] = Z.transpose() * (A * Z);
        model.A_du[std::size_t(q)] = Zdu.transpose() * (A * Zdu);
        model.A_cross[std::size_t(q)] = Zdu.transpose() * (A * Z);
        VectorX<Scalar> rhs_term = sys.dirichlet_shift[std::size_t(q)];
        if (q == 0) rhs_term += sys.b;
        model.b_pr[std::size_t(q)] = Z.transpose() * rhs_term;
        model.b_du[std::size_t(q)] = Zdu.transpose() * rhs_term;
    }
    model.l_pr = Z.transpose() * sys.ell;
    model.l_du = Zdu.transpose() * sys.ell;

    // primal residual generators: rhs terms, then A_q zeta_n (n-major)
    std::vector<VectorX<Scalar>> gen_pr;
    gen_pr.reserve(std::size_t((Q + 1) * (N + 1)));
    {
        VectorX<Scalar> g0 = sys.b + sys.dirichlet_shift[0];
        gen_pr.push_back(std::move(g0));
        for (int q = 1; q <= Q; ++q) gen_pr.push_back(sys.dirichlet_shift[std::size_t(q)]);
        for (int n = 0; n < N; ++n)
            for (int q = 0; q <= Q; ++q)
                gen_pr.push_back(sys.A[std::size_t(q)] * Z.col(n));
    }
    std::vector<VectorX<Scalar>> gen_du;
    gen_du.reserve(std::size_t(1 + (Q + 1) * Ndu));
    gen_du.push_back(sys.ell);
    for (int n = 0; n < Ndu; ++n)
        for (int q = 0; q <= Q; ++q)
            gen_du.push_back(sys.A[std::size_t(q)].transpose() * Zdu.col(n));

    // W-orthonormalize the Riesz representers in generator order (modified
    // Gram-Schmidt with a re-orthogonalization pass). The triangular factor R
    // satisfies rep_i = sum_k q_k R(k, i); since generators are processed in
    // order, the factor of any generator prefix is the top-left block of R.
    const auto riesz_factor = [&](const std::vector<VectorX<Scalar>>& gen) {
        const int m = int(gen.size());
        MatrixX<Scalar> r = MatrixX<Scalar>::Zero(m, m);
        std::vector<VectorX<Scalar>> frame;
        frame.reserve(gen.size());
        for (int i = 0; i < m; ++i) {
            VectorX<Scalar> v = riesz.solve(gen[std::size_t(i)]);
            const double norm0 = w_norm(sys.W, v);
            for (int pass = 0; pass < 2; ++pass)
                for (int k = 0; k < i; ++k) {
                    if (frame[std::size_t(k)].size() == 0) continue;
                    const Scalar d = (frame[std::size_t(k)].adjoint() *
                                      apply_w(sys.W, v))(0);
                    r(k, i) += d;
                    v -= d * frame[std::size_t(k)];
                }
            const double norm1 = w_norm(sys.W, v);
            r(i, i) = Scalar(norm1);
            if (norm1 > 1e-14 * std::max(norm0, 1e-300))
                frame.push_back(v / Scalar(norm1));
            else
                frame.push_back(VectorX<Scalar>());  // numerically dependent direction
        }
        return r;
    };
    model.R_pr = riesz_factor(gen_pr);
    model.R_du = riesz_factor(gen_du);
}

// W-orthonormalization with one re-orthogonalization pass; returns false when
// the vector is linearly dependent at the drop tolerance.
template <typename Scalar>
bool append_orthonormal(MatrixX<Scalar>& basis, const Eigen::SparseMatrix<double>& w,
                        VectorX<Scalar> v, double drop_tol) {
    const double norm0 = w_norm(w, v);
    if (!(norm0 > 0.0)) return false;
    for (int pass = 0; pass < 2; ++pass) {
        if (basis.cols() == 0) break;
        const VectorX<Scalar> coeff = w_dots(w, basis, v);
        v -= basis * coeff;
    }
    const double norm1 = w_norm(w, v);
    if (norm1 < drop_tol * norm0) return false;
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = v / Scalar(norm1);
    return true;
}

}  // namespace detail

// Offline greedy construction over a finite training set.
template <typename Scalar>
GreedyResult<Scalar> greedy_build(const hdg::AffineSystem<Scalar>& sys,
                                  const std::vector<ParameterVector>& training,
                                  const GreedyOptions& opt) {
    if (int(training.size()) < opt.N_max)
        throw std::invalid_argument("greedy_build: training set smaller than N_max");

    GreedyResult<Scalar> result;
    RBModel<Scalar>& model = result.model;
    model.Q = sys.Q;
    model.compliant = opt.compliant;
    model.y_ref = ParameterVector::Ones(sys.Q);
    if (opt.coercive) model.beta_ref = stability_reference(sys);

    const int n_full = sys.layout.n_total();
    model.primal.basis.resize(n_full, 0);
    model.dual.basis.resize(n_full, 0);

    const RieszSolver riesz(sys.W);
    const hdg::CondensedSolver<Scalar> solver(sys);
    detail::update_reduced(model, sys, riesz);

    // dual full solve (only needed when non-compliant): A(y)^T phi = -ell
    const auto solve_dual = [&](const ParameterVector& y) {
        Eigen::SparseMatrix<Scalar> at = sys.at(y).transpose();
        Eigen::SparseLU<Eigen::SparseMatrix<Scalar>> lu;
        lu.compute(at);
        if (lu.info() != Eigen::Success)
            throw hdg::SingularSystemError("greedy_build: dual solve failed");
        return VectorX<Scalar>(lu.solve((-sys.ell).eval()));
    };

    std::vector<bool> used(training.size(), false);

    // greedy indicator: certified output bound when available, otherwise the
    // primal residual dual norm
    const auto indicator = [&](const ParameterVector& y) {
        if (model.N == 0) {
            ReducedSolution<Scalar> empty;
            empty.u.resize(0);
            empty.phi.resize(0);
            const double r = residual_dual_norm(model, 0, y, ResidualKind::Primal, &empty);
            const auto beta = stability_lower_bound(model, y);
            return beta ? r / *beta : r;
        }
        if (model.beta_ref) return output_bound(model, model.N, y)->delta_s;
        return residual_dual_norm(model, model.N, y, ResidualKind::Primal);
    };

    while (model.primal.size() < opt.N_max) {
        int best = -1;
        double best_val = -1.0;
        for (std::size_t i = 0; i < training.size(); ++i) {
            if (used[i]) continue;
            const double v = indicator(training[i]);
            if (v > best_val) {
                best_val = v;
                best = int(i);
            }
        }
        if (best < 0) break;                                        // training exhausted
        if (model.N > 0 && best_val < opt.stop_tol) break;          // converged
        used[std::size_t(best)] = true;
        const ParameterVector& y = training[std::size_t(best)];

        const VectorX<Scalar> snapshot = solver.solve(y).combined(sys.layout);
        if (!detail::append_orthonormal(model.primal.basis, sys.W, snapshot, opt.drop_tol))
            continue;  // linearly dependent snapshot: try the next maximizer
        model.primal.snapshots.push_back(y);
        if (!opt.compliant) {
            if (detail::append_orthonormal(model.dual.basis, sys.W, solve_dual(y),
                                           opt.drop_tol))
                model.dual.snapshots.push_back(y);
        }
        detail::update_reduced(model, sys, riesz);
        result.max_indicator.push_back(best_val);
        result.selected.push_back(best);
    }
    if (model.compliant) model.dual = model.primal;
    return result;
}

// lifted RB solution in the full combined space
template <typename Scalar>
VectorX<Scalar> lift_solution(const RBModel<Scalar>& model, int N, const VectorX<Scalar>& u) {
    return model.primal.basis.leftCols(N) * u;
}

// ---------------------------------------------------------------------------
// Text serialization: a dimensions header followed by labelled row-major
// blocks in decimal with 17 significant digits.
// ---------------------------------------------------------------------------

namespace detail {

template <typename Scalar>
void write_block(std::ostream& out, const std::string& name, const MatrixX<Scalar>& m) {
    out << "block " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const std::complex<double> v(m(i, j));
            out << (j ? " " : "") << v.real() << " " << v.imag();
        }
        out << "\n";
    }
}

template <typename Scalar>
MatrixX<Scalar> read_block(std::istream& in, const std::string& expect) {
    std::string tag, name;
    Eigen::Index rows = 0, cols = 0;
    in >> tag >> name >> rows >> cols;
    if (tag != "block" || name != expect)
        throw std::runtime_error("rb model file: expected block " + expect + ", got " + name);
    MatrixX<Scalar> m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            double re = 0, im = 0;
            in >> re >> im;
            if constexpr (std::is_same_v<Scalar, double>)
                m(i, j) = re;
            else
                m(i, j) = Scalar(re, im);
        }
    if (!in) throw std::runtime_error("rb model file: truncated block " + expect);
    return m;
}

}  // namespace detail

template <typename Scalar>
void save_model(const RBModel<Scalar>& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out.precision(17);
    out << "rbmodel 1\n";
    out << model.Q << " " << model.N << " " << int(model.compliant) << " "
        << int(model.beta_ref.has_value()) << " " << model.dual.size() << " "
        << (model.beta_ref ? *model.beta_ref : 0.0) << "\n";
    detail::write_block<double>(out, "y_ref", model.y_ref);
    detail::write_block(out, "Z", model.primal.basis);
    detail::write_block(out, "Zdu", model.dual.basis);
    for (int q = 0; q <= model.Q; ++q) {
        const auto qs = std::to_string(q);
        detail::write_block(out, "Apr" + qs, model.A_pr[std::size_t(q)]);
        detail::write_block(out, "Adu" + qs, model.A_du[std::size_t(q)]);
        detail::write_block(out, "Across" + qs, model.A_cross[std::size_t(q)]);
        detail::write_block<Scalar>(out, "bpr" + qs, model.b_pr[std::size_t(q)]);
        detail::write_block<Scalar>(out, "bdu" + qs, model.b_du[std::size_t(q)]);
    }
    detail::write_block<Scalar>(out, "lpr", model.l_pr);
    detail::write_block<Scalar>(out, "ldu", model.l_du);
    detail::write_block(out, "Rpr", model.R_pr);
    detail::write_block(out, "Rdu", model.R_du);
    MatrixX<double> snaps(model.Q, Eigen::Index(model.primal.snapshots.size()));
    for (std::size_t i = 0; i < model.primal.snapshots.size(); ++i)
        snaps.col(Eigen::Index(i)) = model.primal.snapshots[i];
    detail::write_block<double>(out, "snapshots", snaps);
    if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

template <typename Scalar>
RBModel<Scalar> load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "rbmodel" || version != 1)
        throw std::runtime_error("load_model: unrecognized format in " + path);
    RBModel<Scalar> model;
    int compliant = 0, has_beta = 0, ndu = 0;
    double beta = 0.0;
    in >> model.Q >> model.N >> compliant >> has_beta >> ndu >> beta;
    model.compliant = compliant != 0;
    if (has_beta) model.beta_ref = beta;
    model.y_ref = detail::read_block<double>(in, "y_ref");
    model.primal.basis = detail::read_block<Scalar>(in, "Z");
    model.dual.basis = detail::read_block<Scalar>(in, "Zdu");
    model.A_pr.resize(std::size_t(model.Q) + 1);
    model.A_du.resize(std::size_t(model.Q) + 1);
    model.A_cross.resize(std::size_t(model.Q) + 1);
    model.b_pr.resize(std::size_t(model.Q) + 1);
    model.b_du.resize(std::size_t(model.Q) + 1);
    for (int q = 0; q <= model.Q; ++q) {
        const auto qs = std::to_string(q);
        model.A_pr[std::size_t(q)] = detail::read_block<Scalar>(in, "Apr" + qs);
        model.A_du[std::size_t(q)] = detail::read_block<Scalar>(in, "Adu" + qs);
        model.A_cross[std::size_t(q)] = detail::read_block<Scalar>(in, "Across" + qs);
        model.b_pr[std::size_t(q)] = detail::read_block<Scalar>(in, "bpr" + qs);
        model.b_du[std::size_t(q)] = detail::read_block<Scalar>(in, "bdu" + qs);
    }
    model.l_pr = detail::read_block<Scalar>(in, "lpr");
    model.l_du = detail::read_block<Scalar>(in, "ldu");
    model.R_pr = detail::read_block<Scalar>(in, "Rpr");
    model.R_du = detail::read_block<Scalar>(in, "Rdu");
    const MatrixX<double> snaps = detail::read_block<double>(in, "snapshots");
    for (Eigen::Index i = 0; i < snaps.cols(); ++i)
        model.primal.snapshots.push_back(snaps.col(i));
    return model;
}

}  // namespace mvr::rb
