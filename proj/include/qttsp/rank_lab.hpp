#pragma once

#include "qttsp/fem_assembly.hpp"
#include "qttsp/fit.hpp"
#include "qttsp/quadrature.hpp"

#include <array>
#include <ostream>
#include <random>

namespace qttsp {

inline constexpr int kMaxHpDegree = 40;

// Piecewise polynomial on the three-element layer mesh 0 < xi1 < xi2 < 1.
// Per element, coef = (left vertex value, right vertex value, bubbles 2..p)
// in the integrated Legendre basis.
struct HpSolution {
    int p = 1;
    std::array<double, 4> xi{0, 0.25, 0.75, 1};
    std::array<Vec, 3> coef;
    double delta = 0.1, lambda = 1, cbar = 1;
    double alpha0 = 0, alpha1 = 1;

    int element_of(double x) const { return x < xi[1] ? 0 : (x < xi[2] ? 1 : 2); }

    // value and x-derivative
    std::pair<double, double> eval(double x) const
    {
        const int e = element_of(x);
        const double H = xi[e + 1] - xi[e];
        const double t = 2 * (x - xi[e]) / H - 1;
        const Vec& c = coef[e];
        double v = c(0) * (1 - t) / 2 + c(1) * (1 + t) / 2, dt = (c(1) - c(0)) / 2;
        double pm2 = 1, pm1 = t; // P_{k-2}, P_{k-1}
        for (int k = 2; k <= p; ++k) {
            const double pk = ((2 * k - 1) * t * pm1 - (k - 1) * pm2) / k;
            v += c(k) * (pk - pm2) / (2 * k - 1);
            dt += c(k) * pm1;
            pm2 = pm1;
            pm1 = pk;
        }
        return {v, dt * 2 / H};
    }
    double operator()(double x) const { return eval(x).first; }
    double lifting(double x) const { return alpha0 + (alpha1 - alpha0) * x; }
};

namespace detail {

// reference-element stiffness and mass of the integrated Legendre basis on [-1, 1]
inline std::pair<Mat, Mat> hp_reference_matrices(int p)
{
    const GaussRule& g = gauss_legendre(p + 2);
    Mat K = Mat::Zero(p + 1, p + 1), M = Mat::Zero(p + 1, p + 1);
    Vec phi(p + 1), dphi(p + 1);
    for (std::size_t q = 0; q < g.x.size(); ++q) {
        const double t = 2 * g.x[q] - 1, w = 2 * g.w[q];
        phi(0) = (1 - t) / 2;
        phi(1) = (1 + t) / 2;
        dphi(0) = -0.5;
        dphi(1) = 0.5;
        double pm2 = 1, pm1 = t;
        for (int k = 2; k <= p; ++k) {
            const double pk = ((2 * k - 1) * t * pm1 - (k - 1) * pm2) / k;
            phi(k) = (pk - pm2) / (2 * k - 1);
            dphi(k) = pm1;
            pm2 = pm1;
            pm1 = pk;
        }
        K += w * dphi * dphi.transpose();
        M += w * phi * phi.transpose();
    }
    return {K, M};
}

} // namespace detail

// Galerkin solution of -delta^2 u'' + cbar u = 0, u(0) = a0, u(1) = a1 in the
// degree-p space on the mesh {0, xi1, 1 - xi1, 1}, xi1 = min(0.25, lambda p delta).
inline HpSolution hp_solve(double delta, int p, double lambda = 1.0, double cbar = 1.0, double a0 = 0.0, double a1 = 1.0)
{
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("hp_solve: delta must lie in (0,1)");
    if (p < 1 || p > kMaxHpDegree) throw std::invalid_argument("hp_solve: degree outside [1, 40]");
    if (!(lambda > 0) || !(cbar > 0)) throw std::invalid_argument("hp_solve: lambda and cbar must be positive");
    HpSolution u;
    u.p = p;
    u.delta = delta;
    u.lambda = lambda;
    u.cbar = cbar;
    u.alpha0 = a0;
    u.alpha1 = a1;
    const double x1 = std::min(0.25, lambda * p * delta);
    u.xi = {0.0, x1, 1.0 - x1, 1.0};

    // global numbering: 0 = xi1, 1 = xi2, then p-1 bubbles per element; -1/-2 = boundary
    const int nb = p - 1, n = 2 + 3 * nb;
    auto gidx = [&](int e, int k) {
        if (k == 0) return e == 0 ? -1 : e - 1;
        if (k == 1) return e == 2 ? -2 : e;
        return 2 + e * nb + (k - 2);
    };
    const auto [Kr, Mr] = detail::hp_reference_matrices(p);
    Mat A = Mat::Zero(n, n);
    Vec rhs = Vec::Zero(n);
    for (int e = 0; e < 3; ++e) {
        const double H = u.xi[e + 1] - u.xi[e];
        const Mat Ae = (delta * delta * 2 / H) * Kr + (cbar * H / 2) * Mr;
        for (int i = 0; i <= p; ++i) {
            const int gi = gidx(e, i);
            if (gi < 0) continue;
            for (int j = 0; j <= p; ++j) {
                const int gj = gidx(e, j);
                if (gj >= 0)
                    A(gi, gj) += Ae(i, j);
                else
                    rhs(gi) -= Ae(i, j) * (gj == -1 ? a0 : a1);
            }
        }
    }
    // symmetric diagonal scaling before factorization
    const Vec s = A.diagonal().cwiseSqrt().cwiseInverse();
    const Mat As = s.asDiagonal() * A * s.asDiagonal();
    Eigen::LLT<Mat> llt(As);
    if (llt.info() != Eigen::Success) throw std::runtime_error("hp_solve: Galerkin matrix not positive definite");
    const Vec x = s.asDiagonal() * llt.solve(s.asDiagonal() * rhs);

    for (int e = 0; e < 3; ++e) {
        u.coef[e] = Vec::Zero(p + 1);
        for (int k = 0; k <= p; ++k) {
            const int gk = gidx(e, k);
            u.coef[e](k) = gk >= 0 ? x(gk) : (gk == -1 ? a0 : a1);
        }
    }
    return u;
}

// ||u_exact - u||_delta with ||v||_delta^2 = delta^2 ||v'||^2 + ||v||^2
inline double hp_energy_error(const HpSolution& u)
{
    const auto terms = exact_solution_terms(u.delta, u.cbar, u.alpha0, u.alpha1);
    double s = 0;
    for (int e = 0; e < 3; ++e) {
        const double a = u.xi[e], b = u.xi[e + 1];
        if (b <= a) continue;
        s += graded_integral(
            [&](double x) {
                double v = 0, dv = 0;
                for (const auto& t : terms) v += t(x), dv += t.derivative(x);
                // stay inside element e at its right end
                const double xe = std::min(x, std::nextafter(b, a));
                const auto [w, dw] = u.eval(xe);
                return u.delta * u.delta * (dv - dw) * (dv - dw) + (v - w) * (v - w);
            },
            a, b);
    }
    return std::sqrt(s);
}

// ||u - g||_delta of the homogeneous part
inline double hp_energy_norm_homogeneous(const HpSolution& u)
{
    double s = 0;
    for (int e = 0; e < 3; ++e) {
        const double a = u.xi[e], b = u.xi[e + 1];
        if (b <= a) continue;
        s += graded_integral(
            [&](double x) {
                const auto [w, dw] = u.eval(std::min(x, std::nextafter(b, a)));
                const double v = w - u.lifting(x), dv = dw - (u.alpha1 - u.alpha0);
                return u.delta * u.delta * dv * dv + v * v;
            },
            a, b);
    }
    return std::sqrt(s);
}

namespace detail {

// moments v_i = ∫ (u - g) phi_i for the interior hats of the DD grid
inline Vec p1_moments(const HpSolution& u, int L)
{
    const std::uint64_t n = std::uint64_t(1) << L;
    const double h = 1.0 / double(n + 1);
    // degree p times linear hat
    const GaussRule& g = gauss_legendre(u.p / 2 + 2);
    Vec m = Vec::Zero(Eigen::Index(n));
    for (std::uint64_t k = 0; k <= n; ++k) {
        const double xl = double(k) * h, xr = double(k + 1) * h;
        // split the cell at hp breakpoints
        std::array<double, 4> cuts{xl, xr, xr, xr};
        int nc = 1;
        for (int e = 1; e <= 2; ++e)
            if (u.xi[e] > xl && u.xi[e] < xr) cuts[nc++] = u.xi[e];
        cuts[nc] = xr;
        std::sort(cuts.begin(), cuts.begin() + nc + 1);
        double left = 0, right = 0;
        for (int c = 0; c < nc; ++c) {
            const double a = cuts[c], len = cuts[c + 1] - a;
            if (len <= 0) continue;
            const double mid = a + len / 2;
            const int e = u.element_of(mid);
            for (std::size_t q = 0; q < g.x.size(); ++q) {
                const double x = a + len * g.x[q];
                const double xe = std::clamp(x, u.xi[e], std::nextafter(u.xi[e + 1], u.xi[e]));
                const double f = (u.eval(xe).first - u.lifting(x)) * len * g.w[q];
                const double s = (x - xl) / h;
                left += f * (1 - s);
                right += f * s;
            }
        }
        if (k >= 1) m(Eigen::Index(k - 1)) += left;
        if (k < n) m(Eigen::Index(k)) += right;
    }
    return m;
}

// solves (h/6) tridiag(1, 4, 1) w = v
inline Vec solve_p1_mass(const Vec& v, double h)
{
    const Eigen::Index n = v.size();
    Vec c(n), d(n);
    const double a = h / 6, b = 4 * h / 6;
    c(0) = a / b;
    d(0) = v(0) / b;
    for (Eigen::Index i = 1; i < n; ++i) {
        const double m = b - a * c(i - 1);
        c(i) = a / m;
        d(i) = (v(i) - a * d(i - 1)) / m;
    }
    Vec w(n);
    w(n - 1) = d(n - 1);
    for (Eigen::Index i = n - 2; i >= 0; --i) w(i) = d(i) - c(i) * w(i + 1);
    return w;
}

} // namespace detail

// Nodal values on the DD interior grid of Π_L(u - g) + I_L g, where Π_L is the
// L2 projection onto P1 functions vanishing at both ends and g the affine lifting.
inline Vec l2_project_nodal(const HpSolution& u, int L)
{
    if (L < 1 || L > dense_cap()) throw std::invalid_argument("l2_project_to_p1: level outside [1, dense cap]");
    const std::uint64_t n = std::uint64_t(1) << L;
    const double h = 1.0 / double(n + 1);
    Vec w = detail::solve_p1_mass(detail::p1_moments(u, L), h);
    for (std::uint64_t i = 0; i < n; ++i) w(Eigen::Index(i)) += u.lifting(double(i + 1) * h);
    return w;
}

inline TtVector l2_project_to_p1(const HpSolution& u, int L) { return quantize(l2_project_nodal(u, L), 1e-13); }

inline RankProfile measure_ranks(const TtVector& x, double eps) { return tt_round(x, eps).profile(); }

// Samples a piecewise polynomial with random coefficients on the integer grid
// 0..2^L-1; piece m covers [breaks[m], breaks[m+1]), the last piece includes its end.
inline RankProfile piecewise_poly_rank_check(const std::vector<std::uint64_t>& breaks, const std::vector<int>& degrees,
                                             int L, std::uint64_t seed = 0)
{
    const std::uint64_t n = std::uint64_t(1) << L;
    if (breaks.size() != degrees.size() + 1 || degrees.empty())
        throw std::invalid_argument("piecewise_poly_rank_check: need M+1 breakpoints for M degrees");
    for (std::size_t m = 0; m < breaks.size(); ++m)
        if (breaks[m] >= n || (m > 0 && breaks[m] < breaks[m - 1]))
            throw std::invalid_argument("piecewise_poly_rank_check: breakpoints must be sorted in [0, 2^L-1]");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Vec v = Vec::Zero(Eigen::Index(n));
    for (std::size_t m = 0; m < degrees.size(); ++m) {
        std::vector<double> c(std::size_t(degrees[m] + 1));
        for (double& x : c) x = N(rng);
        const std::uint64_t end = m + 1 == degrees.size() ? breaks[m + 1] + 1 : breaks[m + 1];
        for (std::uint64_t i = breaks[m]; i < end; ++i) v(Eigen::Index(i)) = detail::poly_eval(c, double(i) / double(n));
    }
    return quantize(v, 1e-13).profile();
}

// QTT ranks of the inverse P1 mass matrix
inline RankProfile mass_inverse_ranks(int L, double eps, Bc bc = Bc::dirichlet_dirichlet)
{
    if (L < 1 || 2 * L > dense_cap()) throw std::invalid_argument("mass_inverse_ranks: level above dense cap");
    const Mat M = to_dense(assemble_mass(L, bc));
    return quantize_matrix(M.inverse(), eps).profile();
}

struct HpDecay {
    double b = 0, C = 0, r2 = 0; // error ≈ C exp(-b p)
    std::vector<double> errors;
};

inline HpDecay hp_decay(double delta, int p_lo, int p_hi, double lambda = 1.0)
{
    std::vector<double> ps, logs;
    HpDecay d;
    for (int p = p_lo; p <= p_hi; ++p) {
        const double e = hp_energy_error(hp_solve(delta, p, lambda));
        d.errors.push_back(e);
        ps.push_back(p);
        logs.push_back(std::log(e));
    }
    const LinearFit f = linear_fit(ps, logs);
    d.b = -f.slope;
    d.C = std::exp(f.intercept);
    d.r2 = f.r2;
    return d;
}

struct RankStudyRow {
    int p = 0;
    double delta = 0;
    int L = 0;
    double eps = 0;
    int max_rank = 0;
    long long n_parameters = 0;
    double hp_energy_error = 0;
};

inline std::vector<RankStudyRow> rank_study(int p_lo, int p_hi, double delta, int L, double eps, double lambda = 1.0)
{
    if (p_lo < 1 || p_hi < p_lo) throw std::invalid_argument("rank_study: empty degree range");
    std::vector<RankStudyRow> rows;
    for (int p = p_lo; p <= p_hi; ++p) {
        const HpSolution u = hp_solve(delta, p, lambda);
        const RankProfile r = measure_ranks(l2_project_to_p1(u, L), eps);
        rows.push_back({p, delta, L, eps, r.max_rank, r.n_parameters, hp_energy_error(u)});
    }
    return rows;
}

// least-squares fit of max rank against p
inline LinearFit rank_growth_fit(const std::vector<RankStudyRow>& rows)
{
    std::vector<double> x, y;
    for (const auto& r : rows) x.push_back(r.p), y.push_back(r.max_rank);
    return linear_fit(x, y);
}

inline void write_rank_csv(const std::vector<RankStudyRow>& rows, std::ostream& os)
{
    os << "p,delta,L,eps,max_rank,n_parameters,hp_energy_error\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.p << ',' << r.delta << ',' << r.L << ',' << r.eps << ',' << r.max_rank << ',' << r.n_parameters << ','
           << r.hp_energy_error << '\n';
}

} // namespace qttsp
