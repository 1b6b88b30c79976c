#pragma once

// Two-site DMRG for SPD TT systems, the Sherman-Morrison correction and the
// Dirichlet-Dirichlet pipeline on top of the Dirichlet-Neumann preconditioner.

#include "qttsp/bpx_precond.hpp"

#include <chrono>
#include <functional>
#include <random>

namespace qttsp {

enum class LocalSolver { direct_dense, iterative, automatic };

struct SolverConfig {
    double eps_tol = 1e-10;
    int max_sweeps = 50;
    int rank_cap = 200;
    LocalSolver local_solver = LocalSolver::automatic;
    std::uint64_t seed = 0;
    int dense_limit = 1024; // automatic: dense local solve up to this many unknowns

    void validate() const
    {
        if (!(eps_tol >= 1e-14 && eps_tol <= 1e-2)) throw std::invalid_argument("SolverConfig: eps_tol outside [1e-14, 1e-2]");
        if (max_sweeps < 1) throw std::invalid_argument("SolverConfig: max_sweeps must be positive");
        if (rank_cap < 1) throw std::invalid_argument("SolverConfig: rank_cap must be positive");
    }
};

struct SolveReport {
    bool converged = false;
    int sweeps = 0;
    std::vector<double> residual_history; // relative residual after each full sweep
    double final_relative_residual = 0;
    RankProfile rank_profile;
    long long n_dof = 0;
    double wall_time = 0; // seconds
    std::string diagnostic;
};

class RankCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ||Ax - b||_F / ||b||_F in TT arithmetic
inline double relative_residual(const TtMatrix& A, const TtVector& x, const TtVector& b)
{
    const double nb = norm(b);
    const double nr = norm(axpy(-1.0, apply(A, x), b));
    return nb > 0 ? nr / nb : nr;
}

namespace detail {

// interface tensors: phi(a, alpha, a') at a + r (alpha + R a')
struct Interface {
    int r = 1, R = 1;
    Vec v = Vec::Ones(1);
    using Slice = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;
    Slice slice(int alpha) const { return Slice(v.data() + std::size_t(r) * alpha, r, r, Eigen::OuterStride<>(Eigen::Index(r) * R)); }
};

// Rank-vector interface for the right-hand side: psi(a, rho), r x R
using RhsInterface = Mat;

inline Interface left_update(const Interface& phi, const TtCore& X, const TtCore& A)
{
    const int p = X.rank_left(), q = X.rank_right(), R = A.rank_left(), R2 = A.rank_right();
    const Mat Xr = X.right(); // p x (2q), column i + 2b
    Mat T2 = Mat::Zero(2 * p, Eigen::Index(R2) * q);
    for (int al = 0; al < R; ++al) {
        const Mat T1 = phi.slice(al) * Xr;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int g = 0; g < R2; ++g) {
                    const double a = A(al, i, j, g);
                    if (a == 0) continue;
                    for (int b = 0; b < q; ++b)
                        T2.block(Eigen::Index(p) * i, g + Eigen::Index(R2) * b, p, 1) += a * T1.col(j + 2 * b);
                }
    }
    Interface out;
    out.r = q;
    out.R = R2;
    Mat res = X.left().transpose() * T2; // q x (R2 q)
    out.v = Eigen::Map<const Vec>(res.data(), res.size());
    return out;
}

inline Interface right_update(const Interface& phi, const TtCore& X, const TtCore& A)
{
    const int p = X.rank_left(), q = X.rank_right(), R = A.rank_left(), R2 = A.rank_right();
    std::array<Mat, 2> Xs;
    for (int i = 0; i < 2; ++i) {
        Xs[i].resize(p, q);
        for (int b = 0; b < q; ++b)
            for (int a = 0; a < p; ++a) Xs[i](a, b) = X(a, i, 0, b);
    }
    // T2[i][alpha](a', b)
    std::vector<Mat> T2(std::size_t(2 * R), Mat::Zero(p, q));
    for (int be = 0; be < R2; ++be)
        for (int j = 0; j < 2; ++j) {
            const Mat Z = Xs[j] * phi.slice(be).transpose();
            for (int al = 0; al < R; ++al)
                for (int i = 0; i < 2; ++i) {
                    const double a = A(al, i, j, be);
                    if (a != 0) T2[std::size_t(i * R + al)] += a * Z;
                }
        }
    Interface out;
    out.r = p;
    out.R = R;
    out.v = Vec::Zero(Eigen::Index(p) * p * R);
    for (int al = 0; al < R; ++al) {
        Eigen::Map<Mat, 0, Eigen::OuterStride<>> s(out.v.data() + std::size_t(p) * al, p, p, Eigen::OuterStride<>(Eigen::Index(p) * R));
        for (int i = 0; i < 2; ++i) s += Xs[i] * T2[std::size_t(i * R + al)].transpose();
    }
    return out;
}

inline RhsInterface rhs_left_update(const RhsInterface& psi, const TtCore& X, const TtCore& B)
{
    Mat out = Mat::Zero(X.rank_right(), B.rank_right());
    for (int i = 0; i < 2; ++i) out += X.slice(i, 0).transpose() * psi * B.slice(i, 0);
    return out;
}

inline RhsInterface rhs_right_update(const RhsInterface& psi, const TtCore& X, const TtCore& B)
{
    Mat out = Mat::Zero(X.rank_left(), B.rank_left());
    for (int i = 0; i < 2; ++i) out += X.slice(i, 0) * psi * B.slice(i, 0).transpose();
    return out;
}

// Local operator of the pair (k, k+1) on vectors w(a, i, b) at a + p (i + 4 b):
//   G = sum_beta PR_beta ⊗ Mb_beta,  Mb_beta = sum_alpha AA(alpha, :, :, beta) ⊗ PL_alpha
struct LocalOp {
    int p = 1, q = 1;
    std::vector<Mat> Mb, PR;

    Eigen::Index size() const { return Eigen::Index(4) * p * q; }

    Vec apply(const Vec& w) const
    {
        Eigen::Map<const Mat> W(w.data(), 4 * p, q);
        Mat Y = Mat::Zero(4 * p, q);
        for (std::size_t be = 0; be < Mb.size(); ++be) Y.noalias() += Mb[be] * (W * PR[be].transpose());
        return Eigen::Map<const Vec>(Y.data(), Y.size());
    }

    Mat dense() const
    {
        const Eigen::Index n = size(), m = 4 * p;
        Mat G = Mat::Zero(n, n);
        for (std::size_t be = 0; be < Mb.size(); ++be)
            for (int b2 = 0; b2 < q; ++b2)
                for (int b = 0; b < q; ++b) {
                    const double s = PR[be](b, b2);
                    if (s != 0) G.block(m * b, m * b2, m, m) += s * Mb[be];
                }
        return G;
    }

    Vec diagonal() const
    {
        Vec d = Vec::Zero(size());
        const Eigen::Index m = 4 * p;
        for (std::size_t be = 0; be < Mb.size(); ++be)
            for (int b = 0; b < q; ++b) d.segment(m * b, m) += PR[be](b, b) * Mb[be].diagonal();
        return d;
    }
};

inline LocalOp make_local_op(const Interface& L, const TtCore& AA, const Interface& Rt)
{
    LocalOp op;
    op.p = L.r;
    op.q = Rt.r;
    const int R = AA.rank_left(), R2 = AA.rank_right();
    for (int be = 0; be < R2; ++be) {
        Mat M = Mat::Zero(4 * op.p, 4 * op.p);
        for (int al = 0; al < R; ++al) {
            const Mat blk = AA.block(al, be);
            if (blk.isZero(0)) continue;
            const Mat PL = L.slice(al);
            for (int j = 0; j < 4; ++j)
                for (int i = 0; i < 4; ++i)
                    if (blk(i, j) != 0) M.block(Eigen::Index(op.p) * i, Eigen::Index(op.p) * j, op.p, op.p) += blk(i, j) * PL;
        }
        op.Mb.push_back(std::move(M));
        op.PR.push_back(Rt.slice(be));
    }
    return op;
}

inline Vec local_rhs(const RhsInterface& psiL, const TtCore& BB, const RhsInterface& psiR)
{
    const Eigen::Index p = psiL.rows(), q = psiR.rows();
    Vec f(4 * p * q);
    for (int i = 0; i < 4; ++i) {
        const Mat F = psiL * BB.slice(i, 0) * psiR.transpose();
        for (Eigen::Index b = 0; b < q; ++b) f.segment(p * (i + 4 * b), p) = F.col(b);
    }
    return f;
}

// Jacobi-preconditioned BiCGSTAB warm-started at x. The assembled operator is
// symmetric only up to its rounding error, which relative to the smallest
// eigenvalues of the preconditioned system is not negligible at deep levels,
// so the local solvers do not rely on symmetry.
inline Vec local_bicgstab(const LocalOp& op, const Vec& f, Vec x, double tol)
{
    const Vec d = op.diagonal();
    Vec dinv = d;
    for (Eigen::Index i = 0; i < d.size(); ++i) dinv(i) = d(i) != 0 ? 1 / d(i) : 1.0;
    Vec r = f - op.apply(x);
    const Vec r0 = r;
    Vec p = Vec::Zero(r.size()), v = Vec::Zero(r.size());
    double rho = 1, alpha = 1, omega = 1;
    const int max_it = int(std::min<Eigen::Index>(20000, 20 * op.size() + 100));
    for (int it = 0; it < max_it && r.norm() > tol; ++it) {
        const double rho2 = r0.dot(r);
        if (rho2 == 0) break;
        p = r + (rho2 / rho) * (alpha / omega) * (p - omega * v);
        rho = rho2;
        const Vec ph = dinv.cwiseProduct(p);
        v = op.apply(ph);
        alpha = rho / r0.dot(v);
        const Vec s = r - alpha * v;
        const Vec sh = dinv.cwiseProduct(s);
        const Vec t = op.apply(sh);
        const double tt = t.dot(t);
        omega = tt > 0 ? t.dot(s) / tt : 0;
        x += alpha * ph + omega * sh;
        r = s - omega * t;
        if (omega == 0) break;
    }
    return x;
}

inline Vec local_direct(const Mat& G, const Vec& f)
{
    return Eigen::PartialPivLU<Mat>(G).solve(f);
}

// pair (a, i1 i2, b) -> matrix (a + p i1, i2 + 2 b)
inline Mat pair_matrix(const Vec& w, int p, int q)
{
    Mat M(2 * p, 2 * q);
    for (int b = 0; b < q; ++b)
        for (int i1 = 0; i1 < 2; ++i1)
            for (int i2 = 0; i2 < 2; ++i2)
                for (int a = 0; a < p; ++a) M(a + p * i1, i2 + 2 * b) = w(a + Eigen::Index(p) * (2 * i1 + i2 + 4 * b));
    return M;
}

inline Vec pair_vector(const Mat& M, int p, int q)
{
    Vec w(Eigen::Index(4) * p * q);
    for (int b = 0; b < q; ++b)
        for (int i1 = 0; i1 < 2; ++i1)
            for (int i2 = 0; i2 < 2; ++i2)
                for (int a = 0; a < p; ++a) w(a + Eigen::Index(p) * (2 * i1 + i2 + 4 * b)) = M(a + p * i1, i2 + 2 * b);
    return w;
}

inline Vec merged_pair(const TtCore& X0, const TtCore& X1)
{
    const TtCore W = strong_kronecker(X0, X1); // (p, 4, 1, q), mode i1*2 + i2
    return Eigen::Map<const Vec>(W.data(), Eigen::Index(W.size()));
}

} // namespace detail

// Two-site DMRG for A x = b with A symmetric positive definite.
inline std::pair<TtVector, SolveReport> dmrg_solve(const TtMatrix& A, const TtVector& b, const SolverConfig& cfg)
{
    using namespace detail;
    cfg.validate();
    require_same_level(A.level(), b.level(), "dmrg_solve");
    const auto t0 = std::chrono::steady_clock::now();
    const int L = b.level();
    SolveReport rep;
    auto finish = [&](TtVector x, double res) {
        rep.final_relative_residual = res;
        rep.rank_profile = x.profile();
        rep.n_dof = x.n_parameters();
        rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return std::make_pair(std::move(x), rep);
    };
    const double nb = norm(b);
    if (nb == 0) {
        rep.converged = true;
        rep.residual_history.push_back(0);
        return finish(zero_like(b), 0);
    }
    if (L == 1) {
        const Mat G = to_dense(A);
        const Vec f = dequantize(b);
        TtVector x = quantize(local_direct(G, f), 0);
        const double res = relative_residual(A, x, b);
        rep.converged = res <= cfg.eps_tol;
        rep.sweeps = 1;
        rep.residual_history.push_back(res);
        return finish(std::move(x), res);
    }

    // initial guess: rank-2 part of b plus a small seeded rank-2 component
    TtVector x0 = tt_round(b, 0.0, 2);
    {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> nd;
        std::vector<TtCore> rc;
        for (int k = 0; k < L; ++k) {
            TtCore c(k == 0 ? 1 : 2, 2, 1, k == L - 1 ? 1 : 2);
            for (std::size_t t = 0; t < c.size(); ++t) c.data()[t] = nd(rng);
            rc.push_back(std::move(c));
        }
        TtVector r(std::move(rc));
        x0 = axpy(1e-3 * norm(x0) / norm(r), r, x0);
    }
    std::vector<TtCore> X = right_orthogonalize(x0).cores();

    std::vector<Interface> PL(std::size_t(L + 1)), PR(std::size_t(L + 1));
    std::vector<RhsInterface> QL(std::size_t(L + 1), Mat::Ones(1, 1)), QR(std::size_t(L + 1), Mat::Ones(1, 1));
    for (int k = L - 1; k >= 2; --k) {
        PR[k] = right_update(PR[k + 1], X[k], A.core(k));
        QR[k] = rhs_right_update(QR[k + 1], X[k], b.core(k));
    }

    const double tol_loc = 0.5 * cfg.eps_tol * nb / std::sqrt(double(L - 1));
    auto use_dense = [&](Eigen::Index n) {
        return cfg.local_solver == LocalSolver::direct_dense ||
               (cfg.local_solver == LocalSolver::automatic && n <= cfg.dense_limit);
    };

    // solve on (k, k+1), split so that the orthogonal factor sits on the side we leave
    auto step = [&](int k, bool left_to_right) {
        const TtCore AA = strong_kronecker(A.core(k), A.core(k + 1));
        const TtCore BB = strong_kronecker(b.core(k), b.core(k + 1));
        const LocalOp op = make_local_op(PL[k], AA, PR[k + 2]);
        const Vec f = local_rhs(QL[k], BB, QR[k + 2]);
        const int p = op.p, q = op.q;
        Vec w;
        Mat G;
        const bool dense = use_dense(op.size());
        if (dense) {
            G = op.dense();
            w = local_direct(G, f);
        }
        else
            w = local_bicgstab(op, f, merged_pair(X[k], X[k + 1]), 0.1 * tol_loc);
        auto residual_of = [&](const Vec& v) { return dense ? (G * v - f).norm() : (op.apply(v) - f).norm(); };

        const Mat Mw = pair_matrix(w, p, q);
        const ThinSvd svd = thin_svd(Mw);
        const int full = int(svd.s.size());
        auto truncated = [&](int r) {
            return Mat(svd.U.leftCols(r) * svd.s.head(r).asDiagonal() * svd.V.leftCols(r).transpose());
        };
        // smallest rank whose local residual meets the tolerance; the plain
        // Frobenius rule at eps_tol when even the full pair does not
        int r;
        if (residual_of(w) <= tol_loc) {
            int lo = 1, hi = full;
            while (lo < hi) {
                const int mid = (lo + hi) / 2;
                if (residual_of(pair_vector(truncated(mid), p, q)) <= tol_loc)
                    hi = mid;
                else
                    lo = mid + 1;
            }
            r = lo;
        }
        else
            r = truncation_rank(svd.s, cfg.eps_tol * svd.s.norm(), full, Mw.rows(), Mw.cols());
        // drop directions at roundoff level in any case
        r = std::min(r, truncation_rank(svd.s, 0.0, full, Mw.rows(), Mw.cols()));
        if (r > cfg.rank_cap)
            throw RankCapExceeded("dmrg_solve: bond " + std::to_string(k + 1) + " needs rank " + std::to_string(r) +
                                  " above rank_cap " + std::to_string(cfg.rank_cap));
        const Mat U = svd.U.leftCols(r), V = svd.V.leftCols(r);
        const Vec s = svd.s.head(r);
        if (left_to_right) {
            X[k] = core_from_left(U, p, 2, 1);
            X[k + 1] = core_from_right(Mat(s.asDiagonal() * V.transpose()), 2, 1, q);
            PL[k + 1] = left_update(PL[k], X[k], A.core(k));
            QL[k + 1] = rhs_left_update(QL[k], X[k], b.core(k));
        }
        else {
            X[k] = core_from_left(Mat(U * s.asDiagonal()), p, 2, 1);
            X[k + 1] = core_from_right(Mat(V.transpose()), 2, 1, q);
            PR[k + 1] = right_update(PR[k + 2], X[k + 1], A.core(k + 1));
            QR[k + 1] = rhs_right_update(QR[k + 2], X[k + 1], b.core(k + 1));
        }
    };

    double res = 0;
    int stagnant = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        for (int k = 0; k <= L - 2; ++k) step(k, true);
        for (int k = L - 2; k >= 0; --k) step(k, false);
        rep.sweeps = sweep;
        res = relative_residual(A, TtVector(X), b);
        rep.residual_history.push_back(res);
        if (res <= cfg.eps_tol) {
            rep.converged = true;
            break;
        }
        // no progress over several sweeps: stop and report
        if (res < 0.9 * best) {
            best = res;
            stagnant = 0;
        }
        else if (++stagnant >= 4) {
            rep.diagnostic = "residual stagnated";
            break;
        }
    }
    if (!rep.converged && rep.diagnostic.empty()) rep.diagnostic = "max_sweeps reached";
    return finish(TtVector(X), res);
}

struct ShermanMorrisonResult {
    TtVector x;
    SolveReport first, second; // B x1 = y and B x2 = u
};

using TtSolver = std::function<std::pair<TtVector, SolveReport>(const TtVector&)>;

// (B + u vᵀ) x3 = y from two solves with B
inline ShermanMorrisonResult sherman_morrison_solve(const TtSolver& solve, const TtVector& u, const TtVector& v,
                                                    const TtVector& y, double eps)
{
    ShermanMorrisonResult out;
    auto [x1, r1] = solve(y);
    out.first = r1;
    if (norm(u) == 0 || norm(v) == 0) {
        out.x = x1;
        out.second.converged = true;
        return out;
    }
    auto [x2, r2] = solve(u);
    out.second = r2;
    const double den = 1 + dot(v, x2);
    if (std::abs(den) < 1e-12 * norm(v) * norm(x2))
        throw std::domain_error("sherman_morrison_solve: singular rank-one update");
    out.x = tt_round(axpy(-dot(v, x1) / den, x2, x1), eps);
    return out;
}

struct ScaleMap {
    double delta_eff = 0, c_eff = 0, gamma = 0;
    double h_dn = 0, h_dd = 0;
};

struct DnTransfer {
    ProblemSpec dn;       // parameters of the index-aligned Dirichlet-Neumann operator
    TtVector load;        // lifted Dirichlet-Dirichlet load, reused as right-hand side
    TtVector u_corr, v_corr;
    ScaleMap map;
    std::vector<double> lift;
};

// A_DD = Ã(delta_eff, c_eff) + gamma e_n e_nᵀ, index by index
inline DnTransfer dd_to_dn_transfer(const ProblemSpec& p)
{
    p.validate();
    if (p.bc != Bc::dirichlet_dirichlet) throw std::invalid_argument("dd_to_dn_transfer: problem must be Dirichlet-Dirichlet");
    DnTransfer t;
    t.map.h_dn = std::ldexp(1.0, -p.L);
    t.map.h_dd = 1.0 / (std::ldexp(1.0, p.L) + 1);
    t.map.delta_eff = p.delta * std::sqrt(t.map.h_dn / t.map.h_dd);
    t.map.c_eff = p.cbar * t.map.h_dd / t.map.h_dn;
    t.map.gamma = t.map.delta_eff * t.map.delta_eff / t.map.h_dn + t.map.c_eff * t.map.h_dn / 3;
    t.dn = p;
    t.dn.delta = t.map.delta_eff;
    t.dn.cbar = t.map.c_eff;
    t.dn.bc = Bc::dirichlet_neumann;
    t.dn.alpha0 = t.dn.alpha1 = 0;
    t.dn.rhs = {};
    const FemOperators op = assemble_system(p);
    t.load = op.f;
    t.lift = op.lift;
    const std::uint64_t n = (std::uint64_t(1) << p.L) - 1;
    t.v_corr = qtt_unit(p.L, n);
    t.u_corr = scale(t.v_corr, t.map.gamma);
    return t;
}

struct PerturbedSolution {
    TtVector u;                       // nodal values on the problem's grid, lifting included
    SolveReport report;               // merged over all inner solves
    std::vector<SolveReport> stages;  // inner DMRG solves in order
    ScaleMap map;
    int max_rank_B = 0;
};

namespace detail {

inline SolveReport merge_reports(const std::vector<SolveReport>& stages, const TtVector& u, double seconds)
{
    SolveReport r;
    r.converged = !stages.empty();
    for (std::size_t k = 0; k < stages.size(); ++k) {
        const SolveReport& s = stages[k];
        r.converged = r.converged && s.converged;
        r.sweeps += s.sweeps;
        r.residual_history.insert(r.residual_history.end(), s.residual_history.begin(), s.residual_history.end());
        r.final_relative_residual = std::max(r.final_relative_residual, s.final_relative_residual);
        if (!s.diagnostic.empty())
            r.diagnostic += (r.diagnostic.empty() ? "" : "; ") + ("solve " + std::to_string(k + 1) + ": ") + s.diagnostic;
    }
    r.rank_profile = u.profile();
    r.n_dof = u.n_parameters();
    r.wall_time = seconds;
    return r;
}

} // namespace detail

// End-to-end solve: lift, transfer to the dyadic Dirichlet-Neumann operator,
// optionally precondition with B = CÃC, Sherman-Morrison for the last-node
// correction, undo the preconditioner and the lifting.
inline PerturbedSolution solve_perturbed(const ProblemSpec& p, const SolverConfig& cfg, bool precondition)
{
    p.validate();
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    PerturbedSolution out;
    // Intermediate vectors are dominated by the lifting, which is far larger
    // than the layer; rounding them at eps_tol would swamp it. Only the final
    // solution is rounded at eps_tol.
    const double eps = std::min(cfg.eps_tol, kAssemblyEps);

    TtVector rhs, ucorr, vcorr;
    std::vector<double> lift;
    double d_eff = p.delta, c_eff = p.cbar;
    if (p.bc == Bc::dirichlet_dirichlet) {
        DnTransfer t = dd_to_dn_transfer(p);
        rhs = t.load;
        ucorr = t.u_corr;
        vcorr = t.v_corr;
        lift = t.lift;
        out.map = t.map;
        d_eff = t.map.delta_eff;
        c_eff = t.map.c_eff;
    }
    else {
        const FemOperators op = assemble_system(p);
        rhs = op.f;
        ucorr = vcorr = qtt_zeros(p.L);
        lift = op.lift;
        out.map = {p.delta, p.cbar, 0, std::ldexp(1.0, -p.L), std::ldexp(1.0, -p.L)};
    }

    TtVector v;
    if (precondition) {
        const PrecondSet ps = build_B(p.L, d_eff, c_eff, BRoute::explicit_cores);
        out.max_rank_B = ps.max_rank_B;
        TtSolver solve = [&](const TtVector& y) { return dmrg_solve(ps.B, y, cfg); };
        const TtVector y = matvec(ps.C, rhs, eps);
        const TtVector uu = matvec(ps.C, ucorr, eps), vv = matvec(ps.C, vcorr, eps);
        ShermanMorrisonResult sm = sherman_morrison_solve(solve, uu, vv, y, eps);
        out.stages.push_back(sm.first);
        if (norm(uu) > 0) out.stages.push_back(sm.second);
        v = matvec(ps.C, sm.x, eps);
    }
    else {
        // the corrected operator is the original one, so solve it as is
        TtMatrix A = dn_operator(p.L, d_eff, c_eff);
        if (norm(ucorr) > 0)
            A = tt_round(axpy(out.map.gamma, qtt_unit_matrix(p.L, (std::uint64_t(1) << p.L) - 1, (std::uint64_t(1) << p.L) - 1), A),
                         kAssemblyEps);
        auto [x, r] = dmrg_solve(A, rhs, cfg);
        out.stages.push_back(r);
        v = x;
    }
    const TtVector g = qtt_polynomial(lift, grid_for(p.L, p.bc));
    out.u = tt_round(axpy(1.0, g, v), cfg.eps_tol);
    out.report = detail::merge_reports(out.stages, out.u,
                                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return out;
}

} // namespace qttsp
