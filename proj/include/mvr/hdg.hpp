#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mvr/model.hpp"
#include "mvr/quadrature.hpp"

namespace mvr::hdg {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct Mesh1D {
    std::vector<double> nodes;  // strictly increasing, first 0, last 1

    static Mesh1D uniform(int n_elements) {
        if (n_elements < 1) throw std::invalid_argument("Mesh1D: need >= 1 element");
        Mesh1D m;
        m.nodes.resize(std::size_t(n_elements) + 1);
        for (int i = 0; i <= n_elements; ++i)
            m.nodes[std::size_t(i)] = double(i) / n_elements;
        return m;
    }

    int num_elements() const { return int(nodes.size()) - 1; }
    int num_faces() const { return int(nodes.size()); }
    double h(int e) const { return nodes[std::size_t(e) + 1] - nodes[std::size_t(e)]; }
    double midpoint(int e) const {
        return 0.5 * (nodes[std::size_t(e)] + nodes[std::size_t(e) + 1]);
    }

    void validate() const {
        if (nodes.size() < 2 || nodes.front() != 0.0 || nodes.back() != 1.0)
            throw std::invalid_argument("Mesh1D: nodes must span [0, 1]");
        for (std::size_t i = 1; i < nodes.size(); ++i)
            if (!(nodes[i] > nodes[i - 1]))
                throw std::invalid_argument("Mesh1D: nodes must be strictly increasing");
    }
};

struct DiscreteSpaces {
    int p = 1;  // polynomial degree of u_h, q_h and the traces
};

enum class BoundaryKind { Dirichlet, Robin };

// Robin: kappa q . n + nu u = g. Neumann is Robin with nu = 0.
template <typename Scalar>
struct BoundaryCondition {
    BoundaryKind kind = BoundaryKind::Robin;
    Scalar nu = Scalar(0);
    Scalar g = Scalar(0);

    static BoundaryCondition dirichlet(Scalar value = Scalar(0)) {
        BoundaryCondition bc;
        bc.kind = BoundaryKind::Dirichlet;
        bc.g = value;
        return bc;
    }
    static BoundaryCondition robin(Scalar nu, Scalar g = Scalar(0)) {
        BoundaryCondition bc;
        bc.kind = BoundaryKind::Robin;
        bc.nu = nu;
        bc.g = g;
        return bc;
    }
};

// Combined space W_h^p x M_h^p. Vectors are ordered element-local u dofs
// first (p+1 Legendre modes per element), then the trace unknowns; faces
// carrying a Dirichlet condition do not enter the trace space.
struct DofLayout {
    int nelem = 0;
    int p = 0;
    int n_u = 0;
    int n_tr = 0;
    std::vector<int> trace_dof;  // per mesh node; -1 for constrained faces

    int n_total() const { return n_u + n_tr; }
    int u_dof(int e, int mode) const { return e * (p + 1) + mode; }
    int trace_index(int node) const { return trace_dof[std::size_t(node)]; }
};

// Element-local blocks of one affine term, ordered (u modes, left trace,
// right trace); kept alongside the global matrices for static condensation.
template <typename Scalar>
struct ElementBlocks {
    // one (p+3) x (p+3) local matrix per element
    std::vector<MatrixX<Scalar>> local;
};

template <typename Scalar>
struct AffineSystem {
    int Q = 0;
    Mesh1D mesh;
    DiscreteSpaces spaces;
    DofLayout layout;
    double tau = 1.0;

    std::vector<Eigen::SparseMatrix<Scalar>> A;  // Q+1 terms, A[0] holds (kappa_bar, rho, nu)
    VectorX<Scalar> b;
    VectorX<Scalar> ell;
    Eigen::SparseMatrix<double> W;  // (., .)_W Gram matrix, coefficients (1,1,1)

    std::vector<ElementBlocks<Scalar>> blocks;      // per affine term
    std::vector<VectorX<Scalar>> dirichlet_shift;   // per term, rhs shift from constrained traces

    std::array<BoundaryCondition<Scalar>, 2> bcs;

    // theta coefficients of the affine expansion at y: theta_0 = 1, theta_q = y_q
    Eigen::VectorXd theta(const ParameterVector& y) const {
        Eigen::VectorXd t(Q + 1);
        t[0] = 1.0;
        t.tail(Q) = y;
        return t;
    }

    Eigen::SparseMatrix<Scalar> at(const ParameterVector& y) const {
        Eigen::SparseMatrix<Scalar> m = A[0];
        for (int q = 0; q < Q; ++q) m += Scalar(y[q]) * A[std::size_t(q) + 1];
        return m;
    }

    VectorX<Scalar> rhs_at(const ParameterVector& y) const {
        VectorX<Scalar> r = b;
        const auto t = theta(y);
        for (int q = 0; q <= Q; ++q) r += Scalar(t[q]) * dirichlet_shift[std::size_t(q)];
        return r;
    }
};

namespace detail {

// Reference-element matrices in the Legendre modal basis.
struct ReferenceOps {
    Eigen::MatrixXd mass_ref;  // int P_i P_j dxi     (x h/2 on an element)
    Eigen::MatrixXd conv;      // int P_j P_i' dxi    (h-independent)
    Eigen::VectorXd eL, eR;    // endpoint values P_i(-1), P_i(1)

    explicit ReferenceOps(int p) {
        const int n = p + 1;
        mass_ref = Eigen::MatrixXd::Zero(n, n);
        conv = Eigen::MatrixXd::Zero(n, n);
        eL.resize(n);
        eR.resize(n);
        const auto rule = gauss_legendre(std::size_t(p) + 2);
        std::vector<double> v(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
        for (std::size_t k = 0; k < rule.points.size(); ++k) {
            legendre_values(p, rule.points[k], v.data());
            legendre_derivatives(p, rule.points[k], d.data());
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    mass_ref(i, j) += rule.weights[k] * v[std::size_t(i)] * v[std::size_t(j)];
                    conv(i, j) += rule.weights[k] * v[std::size_t(j)] * d[std::size_t(i)];
                }
        }
        legendre_values(p, -1.0, v.data());
        for (int i = 0; i < n; ++i) eL[i] = v[std::size_t(i)];
        legendre_values(p, 1.0, v.data());
        for (int i = 0; i < n; ++i) eR[i] = v[std::size_t(i)];
    }
};

// Local a_h block of one element for element-constant kappa, constant rho and
// tau; ordering (u_0..u_p, eta_L, eta_R). Boundary nu terms are added by the
// caller on boundary faces only.
template <typename Scalar>
MatrixX<Scalar> local_block(const ReferenceOps& ops, double h, Scalar kappa, Scalar rho,
                            double tau) {
    const int n = int(ops.eL.size());
    const int iL = n, iR = n + 1;

    // gradient map: q = Minv (-C v - eL etaL + eR etaR), with M = (h/2) mass_ref
    Eigen::MatrixXd gmap(n, n + 2);
    gmap.leftCols(n) = -ops.conv;
    gmap.col(iL) = -ops.eL;
    gmap.col(iR) = ops.eR;
    const Eigen::MatrixXd mass = (h / 2.0) * ops.mass_ref;
    gmap = mass.ldlt().solve(gmap).eval();

    // flux traces as row maps over (v, etaL, etaR)
    Eigen::RowVectorXd gR = ops.eR.transpose() * gmap;  // q(x_R)
    Eigen::RowVectorXd gL = ops.eL.transpose() * gmap;  // q(x_L)
    Eigen::RowVectorXd vR = Eigen::RowVectorXd::Zero(n + 2);
    Eigen::RowVectorXd vL = Eigen::RowVectorXd::Zero(n + 2);
    vR.head(n) = ops.eR.transpose();
    vL.head(n) = ops.eL.transpose();
    Eigen::RowVectorXd tR = Eigen::RowVectorXd::Unit(n + 2, iR);
    Eigen::RowVectorXd tL = Eigen::RowVectorXd::Unit(n + 2, iL);

    // kappa (q . n - tau (u - uhat)) at each endpoint, outward normal +1 / -1
    Eigen::RowVectorXd fluxR = gR - tau * (vR - tR);
    Eigen::RowVectorXd fluxL = -gL - tau * (vL - tL);

    // kappa-part: (kappa q, grad w) - <flux, w> + <flux, mu>
    Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(n + 2, n + 2);
    diff.topRows(n) = ops.conv * gmap - (ops.eR * fluxR + ops.eL * fluxL);
    diff.row(iR) = fluxR;
    diff.row(iL) = fluxL;

    Eigen::MatrixXd mass_ext = Eigen::MatrixXd::Zero(n + 2, n + 2);
    mass_ext.topLeftCorner(n, n) = mass;

    return kappa * diff.template cast<Scalar>() + rho * mass_ext.template cast<Scalar>();
}

}  // namespace detail

inline DofLayout make_layout(const Mesh1D& mesh, const DiscreteSpaces& spaces,
                             BoundaryKind left, BoundaryKind right) {
    DofLayout layout;
    layout.nelem = mesh.num_elements();
    layout.p = spaces.p;
    layout.n_u = layout.nelem * (spaces.p + 1);
    layout.trace_dof.assign(std::size_t(mesh.num_faces()), -1);
    int next = 0;
    for (int i = 0; i < mesh.num_faces(); ++i) {
        const bool constrained = (i == 0 && left == BoundaryKind::Dirichlet) ||
                                 (i == mesh.num_faces() - 1 && right == BoundaryKind::Dirichlet);
        if (!constrained) layout.trace_dof[std::size_t(i)] = next++;
    }
    layout.n_tr = next;
    return layout;
}

// Assembles the affine operator family A(y) = A_0 + sum_q y_q A_q together
// with b, the mean-value output functional ell, and the W Gram matrix.
// kappa must be element-wise constant (modes are sampled at element midpoints).
template <typename Scalar>
AffineSystem<Scalar> assemble_affine(const Mesh1D& mesh, const DiscreteSpaces& spaces,
                                     const RandomFieldExpansion& field,
                                     const ParameterDomain& domain, Scalar rho,
                                     const BoundaryCondition<Scalar>& left,
                                     const BoundaryCondition<Scalar>& right,
                                     const std::function<Scalar(double)>& f, double tau) {
    mesh.validate();
    if (!(tau > 0.0)) throw std::invalid_argument("assemble_affine: tau must be positive");

    std::vector<double> midpoints(std::size_t(mesh.num_elements()));
    for (int e = 0; e < mesh.num_elements(); ++e) midpoints[std::size_t(e)] = mesh.midpoint(e);
    if (!field.positive_on(domain, midpoints))
        throw std::invalid_argument("assemble_affine: field violates positivity on the domain");

    AffineSystem<Scalar> sys;
    sys.Q = field.num_modes();
    sys.mesh = mesh;
    sys.spaces = spaces;
    sys.tau = tau;
    sys.bcs = {left, right};
    sys.layout = make_layout(mesh, spaces, left.kind, right.kind);

    const detail::ReferenceOps ops(spaces.p);
    const int n = spaces.p + 1;
    const int nelem = mesh.num_elements();
    const int n_total = sys.layout.n_total();
    const int last_node = mesh.num_faces() - 1;

    sys.A.resize(std::size_t(sys.Q) + 1);
    sys.blocks.resize(std::size_t(sys.Q) + 1);
    sys.dirichlet_shift.assign(std::size_t(sys.Q) + 1,
                               VectorX<Scalar>::Zero(n_total));
    sys.b = VectorX<Scalar>::Zero(n_total);
    sys.ell = VectorX<Scalar>::Zero(n_total);

    const auto scatter = [&](int term, int q_index, Scalar kappa_e, Scalar rho_term,
                             std::vector<Eigen::Triplet<Scalar>>& trip, int e) {
        auto block = detail::local_block<Scalar>(ops, mesh.h(e), kappa_e, rho_term, tau);
        // boundary nu lives in the affine term 0 only
        if (term == 0) {
            if (e == 0 && left.kind == BoundaryKind::Robin) block(n, n) += left.nu;
            if (e == nelem - 1 && right.kind == BoundaryKind::Robin)
                block(n + 1, n + 1) += right.nu;
        }
        (void)q_index;
        sys.blocks[std::size_t(term)].local.push_back(block);

        // global indices of the local ordering; -1 marks a constrained trace
        std::array<int, 2> tr = {sys.layout.trace_index(e), sys.layout.trace_index(e + 1)};
        std::array<Scalar, 2> tr_value = {Scalar(0), Scalar(0)};
        if (tr[0] < 0) tr_value[0] = left.g;
        if (tr[1] < 0) tr_value[1] = right.g;
        std::vector<int> gidx(std::size_t(n) + 2);
        for (int i = 0; i < n; ++i) gidx[std::size_t(i)] = sys.layout.u_dof(e, i);
        gidx[std::size_t(n)] = tr[0] < 0 ? -1 : sys.layout.n_u + tr[0];
        gidx[std::size_t(n) + 1] = tr[1] < 0 ? -1 : sys.layout.n_u + tr[1];

        for (int i = 0; i < n + 2; ++i) {
            if (gidx[std::size_t(i)] < 0) continue;
            for (int j = 0; j < n + 2; ++j) {
                if (gidx[std::size_t(j)] < 0) {
                    // known Dirichlet trace value moves to the rhs
                    const Scalar v = j == n ? tr_value[0] : tr_value[1];
                    if (v != Scalar(0))
                        sys.dirichlet_shift[std::size_t(term)][gidx[std::size_t(i)]] -=
                            block(i, j) * v;
                    continue;
                }
                if (block(i, j) != Scalar(0))
                    trip.emplace_back(gidx[std::size_t(i)], gidx[std::size_t(j)], block(i, j));
            }
        }
    };

    for (int term = 0; term <= sys.Q; ++term) {
        std::vector<Eigen::Triplet<Scalar>> trip;
        trip.reserve(std::size_t(nelem) * std::size_t(n + 2) * std::size_t(n + 2));
        sys.blocks[std::size_t(term)].local.reserve(std::size_t(nelem));
        for (int e = 0; e < nelem; ++e) {
            const double x = midpoints[std::size_t(e)];
            const Scalar kappa_e =
                term == 0 ? Scalar(field.mean(x)) : Scalar(field.modes[std::size_t(term) - 1](x));
            const Scalar rho_term = term == 0 ? rho : Scalar(0);
            scatter(term, term - 1, kappa_e, rho_term, trip, e);
        }
        Eigen::SparseMatrix<Scalar> m(n_total, n_total);
        m.setFromTriplets(trip.begin(), trip.end());
        sys.A[std::size_t(term)] = std::move(m);
    }

    // rhs (f, w) + <g, mu> and the mean-value output ell(u) = int u
    const auto rule = gauss_legendre(std::size_t(spaces.p) + 2);
    std::vector<double> pv(static_cast<std::size_t>(n));
    for (int e = 0; e < nelem; ++e) {
        const double h = mesh.h(e);
        for (std::size_t k = 0; k < rule.points.size(); ++k) {
            const double x = mesh.nodes[std::size_t(e)] + 0.5 * h * (rule.points[k] + 1.0);
            legendre_values(spaces.p, rule.points[k], pv.data());
            const Scalar fv = f(x);
            for (int i = 0; i < n; ++i)
                sys.b[sys.layout.u_dof(e, i)] +=
                    Scalar(0.5 * h * rule.weights[k] * pv[std::size_t(i)]) * fv;
        }
        sys.ell[sys.layout.u_dof(e, 0)] = Scalar(h);  // int of mode 0; higher modes integrate to 0
    }
    if (left.kind == BoundaryKind::Robin && sys.layout.trace_index(0) >= 0)
        sys.b[sys.layout.n_u + sys.layout.trace_index(0)] += left.g;
    if (right.kind == BoundaryKind::Robin && sys.layout.trace_index(last_node) >= 0)
        sys.b[sys.layout.n_u + sys.layout.trace_index(last_node)] += right.g;

    // W: same form with (kappa, rho, nu) = (1, 1, 1); real symmetric positive definite
    {
        std::vector<Eigen::Triplet<double>> trip;
        for (int e = 0; e < nelem; ++e) {
            auto block = detail::local_block<double>(ops, mesh.h(e), 1.0, 1.0, tau);
            if (e == 0 && left.kind == BoundaryKind::Robin) block(n, n) += 1.0;
            if (e == nelem - 1 && right.kind == BoundaryKind::Robin) block(n + 1, n + 1) += 1.0;
            std::vector<int> gidx(std::size_t(n) + 2);
            for (int i = 0; i < n; ++i) gidx[std::size_t(i)] = sys.layout.u_dof(e, i);
            const int trL = sys.layout.trace_index(e), trR = sys.layout.trace_index(e + 1);
            gidx[std::size_t(n)] = trL < 0 ? -1 : sys.layout.n_u + trL;
            gidx[std::size_t(n) + 1] = trR < 0 ? -1 : sys.layout.n_u + trR;
            for (int i = 0; i < n + 2; ++i)
                for (int j = 0; j < n + 2; ++j)
                    if (gidx[std::size_t(i)] >= 0 && gidx[std::size_t(j)] >= 0)
                        trip.emplace_back(gidx[std::size_t(i)], gidx[std::size_t(j)],
                                          block(i, j));
        }
        Eigen::SparseMatrix<double> w(n_total, n_total);
        w.setFromTriplets(trip.begin(), trip.end());
        // symmetrize away assembly round-off
        Eigen::SparseMatrix<double> wt = w.transpose();
        sys.W = 0.5 * (w + wt);
    }
    return sys;
}

template <typename Scalar>
struct FieldSolution {
    MatrixX<Scalar> u;             // (p+1) x nelem element-local coefficients
    VectorX<Scalar> trace_values;  // per mesh node, Dirichlet faces filled with their data

    // combined dof vector matching the AffineSystem layout
    VectorX<Scalar> combined(const DofLayout& layout) const {
        VectorX<Scalar> v(layout.n_total());
        for (int e = 0; e < layout.nelem; ++e)
            for (int i = 0; i <= layout.p; ++i) v[layout.u_dof(e, i)] = u(i, e);
        for (std::size_t node = 0; node < layout.trace_dof.size(); ++node)
            if (layout.trace_dof[node] >= 0)
                v[layout.n_u + layout.trace_dof[node]] = trace_values[Eigen::Index(node)];
        return v;
    }
};

struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Static condensation: element-local elimination of u followed by the global
// trace solve. The trace system of a 1D mesh is tridiagonal; a dense partial
// pivoting LU is used on it.
template <typename Scalar>
class CondensedSolver {
public:
    explicit CondensedSolver(const AffineSystem<Scalar>& sys) : sys_(&sys) {}

    FieldSolution<Scalar> solve(const ParameterVector& y) const {
        const auto& sys = *sys_;
        const auto& layout = sys.layout;
        const int n = layout.p + 1;
        const Eigen::VectorXd th = sys.theta(y);
        const VectorX<Scalar> rhs = sys.rhs_at(y);

        MatrixX<Scalar> trace_mat = MatrixX<Scalar>::Zero(layout.n_tr, layout.n_tr);
        VectorX<Scalar> trace_rhs = VectorX<Scalar>::Zero(layout.n_tr);
        for (int t = 0; t < layout.n_tr; ++t)
            trace_rhs[t] = rhs[layout.n_u + t];

        struct ElemFactor {
            Eigen::PartialPivLU<MatrixX<Scalar>> lu;
            MatrixX<Scalar> a_ul;  // n x 2
            VectorX<Scalar> f_u;   // n
        };
        std::vector<ElemFactor> factors(std::size_t(layout.nelem));

        for (int e = 0; e < layout.nelem; ++e) {
            MatrixX<Scalar> block = MatrixX<Scalar>::Zero(n + 2, n + 2);
            for (int q = 0; q <= sys.Q; ++q)
                block += Scalar(th[q]) * sys.blocks[std::size_t(q)].local[std::size_t(e)];

            const std::array<int, 2> tr = {layout.trace_index(e), layout.trace_index(e + 1)};
            auto& f = factors[std::size_t(e)];
            f.a_ul = block.topRightCorner(n, 2);
            f.f_u = rhs.segment(layout.u_dof(e, 0), n);
            f.lu.compute(block.topLeftCorner(n, n));
            const double e_min = f.lu.matrixLU().diagonal().cwiseAbs().minCoeff();
            const double e_max = f.lu.matrixLU().diagonal().cwiseAbs().maxCoeff();
            if (!(e_min > 1e-14 * std::max(e_max, 1.0)))
                throw SingularSystemError("solve_full: singular element block at this parameter");

            const MatrixX<Scalar> inv_f = f.lu.solve(f.f_u);
            const MatrixX<Scalar> inv_ul = f.lu.solve(f.a_ul);
            const MatrixX<Scalar> a_lu = block.bottomLeftCorner(2, n);
            const MatrixX<Scalar> schur = block.bottomRightCorner(2, 2) - a_lu * inv_ul;
            const VectorX<Scalar> srhs = a_lu * inv_f;
            for (int i = 0; i < 2; ++i) {
                if (tr[std::size_t(i)] < 0) continue;
                trace_rhs[tr[std::size_t(i)]] -= srhs[i];
                for (int j = 0; j < 2; ++j)
                    if (tr[std::size_t(j)] >= 0)
                        trace_mat(tr[std::size_t(i)], tr[std::size_t(j)]) += schur(i, j);
            }
        }

        Eigen::PartialPivLU<MatrixX<Scalar>> trace_lu(trace_mat);
        const double diag_min = trace_lu.matrixLU().diagonal().cwiseAbs().minCoeff();
        const double diag_max = trace_lu.matrixLU().diagonal().cwiseAbs().maxCoeff();
        if (!(diag_min > 1e-14 * std::max(diag_max, 1.0)))
            throw SingularSystemError("solve_full: singular trace system at this parameter");
        const VectorX<Scalar> traces = trace_lu.solve(trace_rhs);

        FieldSolution<Scalar> sol;
        sol.u.resize(n, layout.nelem);
        sol.trace_values.resize(Eigen::Index(layout.trace_dof.size()));
        for (std::size_t node = 0; node < layout.trace_dof.size(); ++node) {
            const int t = layout.trace_dof[node];
            if (t >= 0)
                sol.trace_values[Eigen::Index(node)] = traces[t];
            else
                sol.trace_values[Eigen::Index(node)] =
                    node == 0 ? sys.bcs[0].g : sys.bcs[1].g;
        }
        for (int e = 0; e < layout.nelem; ++e) {
            const auto& f = factors[std::size_t(e)];
            // constrained faces are already folded into the rhs shift, so they
            // enter the back substitution with a zero multiplier
            VectorX<Scalar> lam(2);
            lam[0] = layout.trace_index(e) < 0 ? Scalar(0) : sol.trace_values[e];
            lam[1] = layout.trace_index(e + 1) < 0 ? Scalar(0) : sol.trace_values[e + 1];
            sol.u.col(e) = f.lu.solve((f.f_u - f.a_ul * lam).eval());
        }
        return sol;
    }

private:
    const AffineSystem<Scalar>* sys_;
};

template <typename Scalar>
FieldSolution<Scalar> solve_full(const AffineSystem<Scalar>& sys, const ParameterVector& y) {
    return CondensedSolver<Scalar>(sys).solve(y);
}

// Monolithic solve of A(y) on the combined space; reference path for tests.
template <typename Scalar>
VectorX<Scalar> solve_monolithic(const AffineSystem<Scalar>& sys, const ParameterVector& y) {
    const MatrixX<Scalar> a = MatrixX<Scalar>(sys.at(y));
    Eigen::PartialPivLU<MatrixX<Scalar>> lu(a);
    return lu.solve(sys.rhs_at(y));
}

template <typename Scalar>
Scalar evaluate_output(const AffineSystem<Scalar>& sys, const FieldSolution<Scalar>& sol) {
    return sys.ell.transpose() * sol.combined(sys.layout);
}

// q = l(u) + m(uhat) on one element, solving the local mass-matrix system.
template <typename Scalar>
VectorX<Scalar> lift(const DiscreteSpaces& spaces, double h, const VectorX<Scalar>& u_local,
                     Scalar uhat_left, Scalar uhat_right) {
    const detail::ReferenceOps ops(spaces.p);
    const MatrixX<Scalar> mass = ((h / 2.0) * ops.mass_ref).template cast<Scalar>();
    VectorX<Scalar> rhs = -(ops.conv.template cast<Scalar>() * u_local);
    rhs += ops.eR.template cast<Scalar>() * uhat_right -
           ops.eL.template cast<Scalar>() * uhat_left;
    return mass.partialPivLu().solve(rhs);
}

// Debug dump of the affine family in sparse triplet text form.
template <typename Scalar>
void dump_triplets(const AffineSystem<Scalar>& sys, const std::string& path) {
    std::ofstream out(path);
    out.precision(17);
    out << "# affine system dump: n=" << sys.layout.n_total() << " Q=" << sys.Q << "\n";
    const auto write_matrix = [&](const Eigen::SparseMatrix<Scalar>& m, const std::string& name) {
        out << "matrix " << name << " " << m.rows() << " " << m.cols() << " " << m.nonZeros()
            << "\n";
        for (int k = 0; k < m.outerSize(); ++k)
            for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(m, k); it; ++it) {
                if constexpr (std::is_same_v<Scalar, std::complex<double>>)
                    out << it.row() << " " << it.col() << " " << it.value().real() << " "
                        << it.value().imag() << "\n";
                else
                    out << it.row() << " " << it.col() << " " << it.value() << " 0\n";
            }
    };
    for (int q = 0; q <= sys.Q; ++q) write_matrix(sys.A[std::size_t(q)], "A" + std::to_string(q));
    write_matrix(sys.W.template cast<Scalar>(), "W");
    const auto write_vec = [&](const VectorX<Scalar>& v, const std::string& name) {
        out << "vector " << name << " " << v.size() << "\n";
        for (int i = 0; i < v.size(); ++i) {
            if constexpr (std::is_same_v<Scalar, std::complex<double>>)
                out << i << " " << v[i].real() << " " << v[i].imag() << "\n";
            else
                out << i << " " << v[i] << " 0\n";
        }
    };
    write_vec(sys.b, "b");
    write_vec(sys.ell, "ell");
}

}  // namespace mvr::hdg
