#pragma once

// Two-sided BPX preconditioner on the dyadic Dirichlet-Neumann grid built
// from explicit block cores.
//
// Prolongation of level ell into level L (normalized hats):
//   P_{ell,L} = A ⋈ U^{⋈ell} ⋈ (2^{-1/2} X)^{⋈(L-ell)} ⋈ P
// C_L, Q_{L,alpha} and Lambda_{L,alpha} are upper block-bidiagonal chains in
// which the off-diagonal block marks the level where U hands over to X.

#include "qttsp/fem_assembly.hpp"

#include <array>

namespace qttsp {

struct BpxBlocks {
    TtCore A, U, X, P;     // prolongation blocks
    TtCore Ab, Ub, Xb, Pb; // A•A, U•Uᵀ, X•Xᵀ, P•P
    TtCore Ibar;           // rank identity, mode 1x1
    std::array<TtCore, 2> T, Y, N; // derivative-state (alpha = 1) and Legendre-state (alpha = 0) refinement
    std::array<TtCore, 2> W, Z, K; // T•Ibar, Y•Xᵀ, N•P
};

namespace detail {

inline Mat col(std::initializer_list<double> v)
{
    Mat m(Eigen::Index(v.size()), 1);
    Eigen::Index i = 0;
    for (double t : v) m(i++, 0) = t;
    return m;
}

inline Mat scalar(double s) { return Mat::Constant(1, 1, s); }

inline BpxBlocks make_blocks()
{
    BpxBlocks b;
    Mat I = Mat::Identity(2, 2), J = Mat::Zero(2, 2), Z2 = Mat::Zero(2, 2);
    J(0, 1) = 1;
    b.A = TtCore::from_blocks({{scalar(1), scalar(0)}});
    b.U = TtCore::from_blocks({{I, J.transpose()}, {Z2, J}});
    b.X = TtCore::from_blocks({{col({0.5, 1.0}), col({0.0, 0.5})}, {col({0.5, 0.0}), col({1.0, 0.5})}});
    b.P = TtCore::from_blocks({{scalar(1)}, {scalar(0)}});
    b.Ab = mode_core_product(b.A, b.A);
    b.Ub = mode_core_product(b.U, core_transpose(b.U));
    b.Xb = mode_core_product(b.X, core_transpose(b.X));
    b.Pb = mode_core_product(b.P, b.P);
    b.Ibar = TtCore::from_blocks({{scalar(1), scalar(0)}, {scalar(0), scalar(1)}});

    // alpha = 1: element differences u_e - u_{e-1}, constant under refinement
    b.T[1] = TtCore::from_blocks({{scalar(1)}, {scalar(-1)}});
    b.Y[1] = TtCore::from_blocks({{col({0.5, 0.5})}});
    b.N[1] = TtCore::from_blocks({{scalar(1)}});
    // alpha = 0: (sum, difference) of the element end values, refined as
    // mean -> mean, half-difference -> (-/+ 1/2 mean, 1/2 half-difference)
    b.T[0] = TtCore::from_blocks({{scalar(1), scalar(1)}, {scalar(1), scalar(-1)}});
    b.Y[0] = TtCore::from_blocks({{col({1.0, 1.0}), col({0.0, 0.0})}, {col({-0.5, 0.5}), col({0.5, 0.5})}});
    b.N[0] = TtCore::from_blocks({{col({0.5, 0.0})}, {col({0.0, 0.5})}});

    for (int a = 0; a < 2; ++a) {
        b.W[a] = mode_core_product(b.T[a], b.Ibar);
        b.Z[a] = mode_core_product(b.Y[a], core_transpose(b.X));
        b.K[a] = mode_core_product(b.N[a], b.P);
    }
    return b;
}

// [[D00, D01], [0, D11]] with D00 of rank p0 x q0 and D11 of rank p1 x q1
inline TtCore upper_block(const TtCore& d00, const TtCore& d01, const TtCore& d11)
{
    const int p0 = d00.rank_left(), q0 = d00.rank_right(), p1 = d11.rank_left(), q1 = d11.rank_right();
    const int m = d00.mode_rows(), n = d00.mode_cols();
    TtCore c(p0 + p1, m, n, q0 + q1);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i) {
            for (int b = 0; b < q0; ++b)
                for (int a = 0; a < p0; ++a) c(a, i, j, b) = d00(a, i, j, b);
            for (int b = 0; b < q1; ++b)
                for (int a = 0; a < p0; ++a) c(a, i, j, q0 + b) = d01(a, i, j, b);
            for (int b = 0; b < q1; ++b)
                for (int a = 0; a < p1; ++a) c(p0 + a, i, j, q0 + b) = d11(a, i, j, b);
        }
    return c;
}

inline TtCore row_block(const TtCore& l, const TtCore& r)
{
    TtCore c(1, l.mode_rows(), l.mode_cols(), l.rank_right() + r.rank_right());
    for (std::size_t t = 0; t < l.size(); ++t) c.data()[t] = l.data()[t];
    for (std::size_t t = 0; t < r.size(); ++t) c.data()[l.size() + t] = r.data()[t];
    return c;
}

inline TtCore col_block_lower(int p0, const TtCore& lo)
{
    TtCore c(p0 + lo.rank_left(), lo.mode_rows(), lo.mode_cols(), 1);
    for (int j = 0; j < lo.mode_cols(); ++j)
        for (int i = 0; i < lo.mode_rows(); ++i)
            for (int a = 0; a < lo.rank_left(); ++a) c(p0 + a, i, j, 0) = lo(a, i, j, 0);
    return c;
}

// boundary cores folded into the first and last of the L mode cores
inline std::vector<TtCore> fold_ends(const TtCore& first, std::vector<TtCore> mid, const TtCore& last)
{
    mid.front() = strong_kronecker(first, mid.front());
    mid.back() = strong_kronecker(mid.back(), last);
    return mid;
}

} // namespace detail

inline const BpxBlocks& bpx_blocks()
{
    static const BpxBlocks b = detail::make_blocks();
    return b;
}

inline double mu(int ell, double delta)
{
    if (ell < 0) throw std::invalid_argument("mu: level must be nonnegative");
    if (!(delta > 0)) throw std::invalid_argument("mu: delta must be positive");
    return std::min(std::ldexp(1.0, -ell) / delta, 1.0);
}

// C_L = sum_ell mu_ell P_{ell,L} P_{ell,L}^T, bond ranks 8
inline TtMatrix build_C(int L, double delta)
{
    if (L < 1) throw std::invalid_argument("build_C: L must be positive");
    const BpxBlocks& b = bpx_blocks();
    std::vector<TtCore> mid;
    for (int ell = 1; ell <= L; ++ell)
        mid.push_back(detail::upper_block(b.Ub, b.Ub.scaled(mu(ell, delta)), b.Xb.scaled(0.5)));
    TtCore first = detail::row_block(b.Ab, b.Ab.scaled(mu(0, delta)));
    TtCore last = detail::col_block_lower(b.Ub.rank_right(), b.Pb);
    return TtMatrix(detail::fold_ends(first, std::move(mid), last));
}

// Q_{L,alpha} = M_{L,alpha} C_L with
//   M_{L,1} = 2^{3L/2} D                (element differences)
//   M_{L,0} = 2^{L/2} (mean, half-difference) per element, extra trailing mode of size 2
// alpha = 1 bonds are 6, alpha = 0 bonds are 8 (the last core of alpha = 0 has mode 4 x 2).
inline TtOperator build_Q(int L, double delta, int alpha)
{
    if (L < 1) throw std::invalid_argument("build_Q: L must be positive");
    if (alpha != 0 && alpha != 1) throw std::invalid_argument("build_Q: alpha must be 0 or 1");
    const BpxBlocks& b = bpx_blocks();
    const TtCore& W = b.W[alpha];
    std::vector<TtCore> mid;
    for (int ell = 1; ell <= L; ++ell) {
        const double s = mu(ell, delta) * std::pow(2.0, alpha * ell + 0.5);
        mid.push_back(detail::upper_block(b.Ub.scaled(std::sqrt(2.0)), strong_kronecker(b.Ub, W).scaled(s),
                                          b.Z[alpha].scaled(std::pow(2.0, alpha - 0.5))));
    }
    TtCore first = detail::row_block(b.Ab, strong_kronecker(b.Ab, W).scaled(mu(0, delta)));
    TtCore last = detail::col_block_lower(b.Ub.rank_right(), b.K[alpha]);
    return TtOperator(detail::fold_ends(first, std::move(mid), last));
}

// Lambda_{L,alpha} as L + 2 cores: boundary scalar, L diagonal mode cores, trailing core.
//   alpha = 1: [2^{-L}] ⋈ (delta^{2/L}/2 I)^{⋈L} ⋈ [1]
//   alpha = 0: [c 2^{-L}] ⋈ (I/2)^{⋈L} ⋈ diag(1, 1/3)
inline TtOperator build_Lambda(int L, double delta, int alpha, double cbar = 1.0)
{
    if (L < 1) throw std::invalid_argument("build_Lambda: L must be positive");
    std::vector<TtCore> c;
    if (alpha == 1) {
        c.push_back(TtCore::from_block(detail::scalar(std::ldexp(1.0, -L))));
        const double s = std::pow(delta, 2.0 / L) / 2;
        for (int k = 0; k < L; ++k) c.push_back(TtCore::from_block(s * Mat::Identity(2, 2)));
        c.push_back(TtCore::from_block(detail::scalar(1.0)));
    }
    else if (alpha == 0) {
        c.push_back(TtCore::from_block(detail::scalar(cbar * std::ldexp(1.0, -L))));
        for (int k = 0; k < L; ++k) c.push_back(TtCore::from_block(0.5 * Mat::Identity(2, 2)));
        Mat w = Mat::Zero(2, 2);
        w(0, 0) = 1;
        w(1, 1) = 1.0 / 3;
        c.push_back(TtCore::from_block(w));
    }
    else
        throw std::invalid_argument("build_Lambda: alpha must be 0 or 1");
    return TtOperator(std::move(c));
}

// L + 2 core chain folded to L cores
inline TtOperator fold_boundary_cores(const TtOperator& x)
{
    std::vector<TtCore> mid(x.cores().begin() + 1, x.cores().end() - 1);
    return TtOperator(detail::fold_ends(x.cores().front(), std::move(mid), x.cores().back()));
}

enum class BRoute { explicit_cores, sandwich_product };

struct PrecondSet {
    TtMatrix C;
    TtOperator Q0, Q1;     // Q0 carries a trailing Legendre mode
    TtOperator Lam0, Lam1; // L + 2 cores each
    TtMatrix B;
    std::vector<double> mu;
    int max_rank_B = 0;
};

// Ã_L = d^2 S + c M on the dyadic Dirichlet-Neumann grid
inline TtMatrix dn_operator(int L, double delta, double cbar)
{
    return tt_round(axpy(delta * delta, assemble_stiffness(L, Bc::dirichlet_neumann),
                         scale(assemble_mass(L, Bc::dirichlet_neumann), cbar)),
                    kAssemblyEps);
}

inline TtMatrix sandwich(const TtOperator& Q, const TtOperator& Lam_folded, double eps)
{
    TtOperator LQ = operator_product(Lam_folded, Q);
    return tt_round(chain_cast<Shape::matrix>(operator_product(transpose(Q), LQ)), eps);
}

inline PrecondSet build_B(int L, double delta, double cbar, BRoute route)
{
    if (L < 1) throw std::invalid_argument("build_B: L must be positive");
    PrecondSet s;
    s.C = build_C(L, delta);
    s.Q0 = build_Q(L, delta, 0);
    s.Q1 = build_Q(L, delta, 1);
    s.Lam0 = build_Lambda(L, delta, 0, cbar);
    s.Lam1 = build_Lambda(L, delta, 1, cbar);
    for (int ell = 0; ell <= L; ++ell) s.mu.push_back(mu(ell, delta));
    if (route == BRoute::explicit_cores) {
        TtMatrix b0 = sandwich(s.Q0, fold_boundary_cores(s.Lam0), kAssemblyEps);
        TtMatrix b1 = sandwich(s.Q1, fold_boundary_cores(s.Lam1), kAssemblyEps);
        s.B = tt_round(axpy(1.0, b0, b1), kAssemblyEps);
    }
    else {
        TtMatrix AC = matmat(dn_operator(L, delta, cbar), s.C, kAssemblyEps);
        s.B = matmat(s.C, AC, kAssemblyEps);
    }
    s.max_rank_B = s.B.max_rank();
    return s;
}

struct RouteCheck {
    double relative_difference = 0;
    double tolerance = 0;
    bool ok = false;
};

// The sandwich route multiplies through Ã, whose stiffness part has norm ~ 2^L
// while B = CÃC stays O(1); roundoff in that product grows like eps 4^L.
// Agreement is required to 1e-9 or to that roundoff level, whichever is larger.
inline double route_tolerance(int L, double tol = 1e-9) { return std::max(tol, 1e-18 * std::ldexp(1.0, 2 * L)); }

inline RouteCheck compare_routes(const TtMatrix& a, const TtMatrix& b, int L, double tol)
{
    RouteCheck r;
    r.relative_difference = norm(axpy(-1.0, a, b)) / norm(b);
    r.tolerance = route_tolerance(L, tol);
    r.ok = r.relative_difference <= r.tolerance;
    return r;
}

// Frobenius distance between the two assembly routes, in TT arithmetic
inline RouteCheck check_routes(int L, double delta, double cbar, double tol = 1e-9)
{
    return compare_routes(build_B(L, delta, cbar, BRoute::explicit_cores).B,
                          build_B(L, delta, cbar, BRoute::sandwich_product).B, L, tol);
}

// Explicit-route B, cross-checked against the sandwich route; throws on disagreement.
inline PrecondSet build_B_checked(int L, double delta, double cbar, double tol = 1e-9)
{
    PrecondSet s = build_B(L, delta, cbar, BRoute::explicit_cores);
    const RouteCheck r = compare_routes(s.B, build_B(L, delta, cbar, BRoute::sandwich_product).B, L, tol);
    if (!r.ok)
        throw std::runtime_error("build_B: assembly routes disagree (relative difference " +
                                 std::to_string(r.relative_difference) + ")");
    return s;
}

// nodal values of the level-ell normalized hats on the level-L dyadic grid
inline Mat prolongation_dense(int ell, int L)
{
    if (ell < 0 || ell > L) throw std::invalid_argument("prolongation_dense: need 0 <= ell <= L");
    if (L > std::min(12, dense_cap())) throw std::length_error("prolongation_dense: level above dense cap");
    const int n = 1 << L, nc = 1 << ell;
    Mat P = Mat::Zero(n, nc);
    const double scale = std::pow(2.0, 0.5 * (ell - L));
    for (int j = 1; j <= nc; ++j)
        for (int i = 1; i <= n; ++i) {
            const double x = std::ldexp(double(i), -L), c = std::ldexp(double(j), -ell), w = std::ldexp(1.0, -ell);
            P(i - 1, j - 1) = scale * std::max(0.0, 1 - std::abs(x - c) / w);
        }
    return P;
}

} // namespace qttsp
