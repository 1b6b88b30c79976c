#pragma once

// P1 finite elements in QTT format: stiffness, mass, load, lifting and the
// delta-norm.

#include "qttsp/qtt_build.hpp"
#include "qttsp/quadrature.hpp"

#include <optional>

namespace qttsp {

enum class Bc { dirichlet_dirichlet, dirichlet_neumann };

inline constexpr double kAssemblyEps = 1e-14;

inline GridSpec grid_for(int L, Bc bc)
{
    return {L, bc == Bc::dirichlet_dirichlet ? GridKind::interior_dirichlet : GridKind::dyadic_neumann};
}

// f(x) = sum_k poly[k] x^k + sum_m exps[m](x)
struct RhsDescriptor {
    std::vector<double> poly;
    std::vector<ExpTerm> exps;

    bool is_zero() const
    {
        return std::all_of(poly.begin(), poly.end(), [](double c) { return c == 0; }) &&
               std::all_of(exps.begin(), exps.end(), [](const ExpTerm& e) { return e.coef == 0; });
    }
};

struct ProblemSpec {
    double delta = 0.1;
    double cbar = 1.0;
    RhsDescriptor rhs;
    double alpha0 = 0.0, alpha1 = 1.0;
    int L = 4;
    Bc bc = Bc::dirichlet_dirichlet;

    void validate() const
    {
        if (!(delta > 0 && delta < 1)) throw std::invalid_argument("ProblemSpec: delta must lie in (0,1)");
        if (!(cbar > 0) || !std::isfinite(cbar)) throw std::invalid_argument("ProblemSpec: cbar must be positive");
        if (L < 1 || L > 62) throw std::invalid_argument("ProblemSpec: level out of range");
    }
};

// -d^2 u'' + u = 0, u(0) = 0, u(1) = 1
inline ProblemSpec model_problem(double delta, int L)
{
    ProblemSpec p;
    p.delta = delta;
    p.L = L;
    return p;
}

struct FemOperators {
    TtMatrix S, M, A;
    TtVector f;
    GridSpec grid;
    std::vector<double> lift; // polynomial g with u = v + g
};

// (D d)_i = d_i - d_{i-1}
inline TtMatrix difference_operator(int L)
{
    return tt_round(axpy(-1.0, transpose(qtt_shift(L)), qtt_identity(L)), kAssemblyEps);
}

inline TtMatrix averaging_operator(int L)
{
    return tt_round(scale(axpy(1.0, transpose(qtt_shift(L)), qtt_identity(L)), 0.5), kAssemblyEps);
}

inline TtMatrix assemble_stiffness(int L, Bc bc)
{
    if (L < 1) throw std::invalid_argument("assemble_stiffness: L must be positive");
    const GridSpec g = grid_for(L, bc);
    const TtMatrix J = qtt_shift(L);
    TtMatrix T = axpy(-1.0, J, axpy(-1.0, transpose(J), scale(qtt_identity(L), 2.0)));
    const std::uint64_t n = g.size() - 1;
    if (bc == Bc::dirichlet_neumann) T = axpy(-1.0, qtt_unit_matrix(L, n, n), T);
    return tt_round(scale(T, 1.0 / g.h()), kAssemblyEps);
}

inline TtMatrix assemble_mass(int L, Bc bc)
{
    if (L < 1) throw std::invalid_argument("assemble_mass: L must be positive");
    const GridSpec g = grid_for(L, bc);
    const TtMatrix J = qtt_shift(L);
    TtMatrix T = axpy(1.0, J, axpy(1.0, transpose(J), scale(qtt_identity(L), 4.0)));
    const std::uint64_t n = g.size() - 1;
    if (bc == Bc::dirichlet_neumann) T = axpy(-2.0, qtt_unit_matrix(L, n, n), T);
    return tt_round(scale(T, g.h() / 6.0), kAssemblyEps);
}

namespace detail {

inline double factorial(int m)
{
    double f = 1;
    for (int i = 2; i <= m; ++i) f *= i;
    return f;
}

inline std::vector<double> poly_derivative(const std::vector<double>& c)
{
    std::vector<double> d;
    for (std::size_t k = 1; k < c.size(); ++k) d.push_back(double(k) * c[k]);
    return d;
}

inline double poly_eval(const std::vector<double>& c, double x)
{
    double v = 0;
    for (std::size_t k = c.size(); k-- > 0;) v = v * x + c[k];
    return v;
}

// log of int_{-1}^{1} (1 - |t|) e^{z t} dt = 2 (cosh z - 1) / z^2
inline double log_hat_kernel(double z)
{
    const double a = std::abs(z);
    if (a < 1e-3) return std::log1p(z * z / 12 + z * z * z * z / 360);
    return a + 2 * std::log(-std::expm1(-a)) - 2 * std::log(a);
}

// int_{-1}^{0} (1 + t) e^{z t} dt = (e^{-z} - 1 + z) / z^2
inline double half_hat_kernel(double z)
{
    if (std::abs(z) < 1e-3) return 0.5 - z / 6 + z * z / 24 - z * z * z / 120;
    return (std::expm1(-z) + z) / (z * z);
}

// load of a polynomial against hats: h * q(x_i), q = sum_{m even} 2 h^m p^{(m)} / (m+2)!
inline TtVector polynomial_load(const std::vector<double>& p, const GridSpec& g, bool half_last)
{
    const double h = g.h();
    std::vector<double> q(std::max<std::size_t>(p.size(), 1), 0.0);
    std::vector<double> der = p;
    double last_exact = 0;
    for (int m = 0; !der.empty(); ++m) {
        const double w = std::pow(h, m) / factorial(m + 2);
        if (m % 2 == 0)
            for (std::size_t k = 0; k < der.size(); ++k) q[k] += 2 * w * der[k];
        last_exact += std::pow(-1.0, m) * w * poly_eval(der, 1.0);
        der = poly_derivative(der);
    }
    TtVector v = scale(qtt_polynomial(q, g), h);
    if (half_last) {
        const double corr = h * (last_exact - poly_eval(q, 1.0));
        v = axpy(corr, qtt_unit(g.L, g.size() - 1), v);
    }
    return v;
}

inline TtVector exponential_load(const ExpTerm& t, const GridSpec& g, bool half_last)
{
    const double h = g.h(), z = t.rate * h;
    if (t.coef == 0) return qtt_zeros(g.L);
    if (half_last && t.rate * (1 + h - t.ref) > 700)
        throw std::invalid_argument("exponential load: growth rate too large on the Neumann grid");
    // h e^{r(x_i - ref)} K(z), with the kernel folded into the reference point
    TtVector v = t.rate == 0 ? qtt_exp_term(t.coef * h, 0.0, 0.0, g)
                             : qtt_exp_term(t.coef * h, t.rate, t.ref - log_hat_kernel(z) / t.rate, g);
    if (half_last) {
        const double full = h * t.coef * std::exp(t.rate * (1 - t.ref) + log_hat_kernel(z));
        const double half = h * t.coef * std::exp(t.rate * (1 - t.ref)) * half_hat_kernel(z);
        v = axpy(half - full, qtt_unit(g.L, g.size() - 1), v);
    }
    return v;
}

} // namespace detail

// Load vector of rhs on the grid of (L, bc), exact for polynomial/exponential data.
inline TtVector assemble_load(const RhsDescriptor& rhs, int L, Bc bc)
{
    const GridSpec g = grid_for(L, bc);
    const bool half = bc == Bc::dirichlet_neumann;
    TtVector f = rhs.poly.empty() ? qtt_zeros(L) : detail::polynomial_load(rhs.poly, g, half);
    for (const auto& e : rhs.exps) f = axpy(1.0, detail::exponential_load(e, g, half), f);
    return tt_round(f, kAssemblyEps);
}

inline FemOperators assemble_system(const ProblemSpec& p)
{
    p.validate();
    FemOperators op;
    op.grid = grid_for(p.L, p.bc);
    op.S = assemble_stiffness(p.L, p.bc);
    op.M = assemble_mass(p.L, p.bc);
    op.A = tt_round(axpy(p.delta * p.delta, op.S, scale(op.M, p.cbar)), kAssemblyEps);

    // lifting g: affine through both boundary values (DD) or the constant alpha0 (DN)
    op.lift = {p.alpha0, p.bc == Bc::dirichlet_dirichlet ? p.alpha1 - p.alpha0 : 0.0};
    RhsDescriptor eff = p.rhs;
    if (eff.poly.size() < 2) eff.poly.resize(2, 0.0);
    for (int k = 0; k < 2; ++k) eff.poly[k] -= p.cbar * op.lift[k];
    op.f = assemble_load(eff, p.L, p.bc);
    if (p.bc == Bc::dirichlet_neumann && p.alpha1 != 0)
        op.f = tt_round(axpy(p.delta * p.delta * p.alpha1, qtt_unit(p.L, op.grid.size() - 1), op.f), kAssemblyEps);
    return op;
}

// ||d||_delta of the P1 function with nodal values d (zero Dirichlet value at
// x = 0, and at x = 1 for DD), evaluated element-wise as
//   d^2/h |D d|^2 + h (|avg d|^2 + |D d|^2 / 12)
// which avoids the cancellation in d^T S d.
inline double energy_norm(const TtVector& d, double delta, int L, Bc bc)
{
    if (d.level() != L) throw std::invalid_argument("energy_norm: level mismatch");
    const GridSpec g = grid_for(L, bc);
    const double h = g.h();
    const double dd = norm(apply(difference_operator(L), d));
    const double av = norm(apply(averaging_operator(L), d));
    double stiff = dd * dd, mass = av * av + dd * dd / 12;
    if (bc == Bc::dirichlet_dirichlet) {
        const double last = entry(d, g.size() - 1);
        stiff += last * last;
        mass += last * last / 3;
    }
    return std::sqrt(delta * delta * stiff / h + h * mass);
}

// exact solution of the registered problem class (f = 0, constant c, DD)
inline std::optional<std::vector<ExpTerm>> registered_exact_solution(const ProblemSpec& p)
{
    if (p.bc != Bc::dirichlet_dirichlet || !p.rhs.is_zero()) return std::nullopt;
    return exact_solution_terms(p.delta, p.cbar, p.alpha0, p.alpha1);
}

// ||I_L u - u_qtt||_delta, the nodal surrogate
inline double nodal_error(const TtVector& u_qtt, const ProblemSpec& p)
{
    auto terms = registered_exact_solution(p);
    if (!terms) throw std::invalid_argument("nodal_error: no exact solution registered for this problem");
    const GridSpec g = grid_for(p.L, p.bc);
    return energy_norm(axpy(-1.0, u_qtt, qtt_exp_sum(*terms, g)), p.delta, p.L, p.bc);
}

namespace detail {

// interpolation error of e^{w s} on [0, 1], w <= 0: e^{ws} - 1 - s (e^w - 1)
inline double interp_defect(double s, double w)
{
    if (std::abs(w) < 0.5) {
        double v = 0, wm = w, sm = s, fact = 1;
        for (int m = 2; m < 30; ++m) {
            wm *= w;
            sm *= s;
            fact *= m;
            v += wm * (sm - s) / fact;
        }
        return v;
    }
    return std::expm1(w * s) - s * std::expm1(w);
}

inline double interp_defect_ds(double s, double w)
{
    if (std::abs(w) < 0.5) {
        double v = 0, wm = w, sm1 = 1, fact = 1;
        for (int m = 2; m < 30; ++m) {
            wm *= w;
            sm1 *= s;
            fact *= m;
            v += wm * (m * sm1 - 1) / fact;
        }
        return v;
    }
    return w * std::exp(w * s) - std::expm1(w);
}

// sum_{k=0}^{K-1} exp(e0 + e1 k)
inline double geometric_sum(double e0, double e1, double K)
{
    if (e1 == 0) return K * std::exp(e0);
    if (e1 < 0) return std::exp(e0) * std::expm1(e1 * K) / std::expm1(e1);
    return std::exp(e0 + e1 * (K - 1)) * std::expm1(-e1 * K) / std::expm1(-e1);
}

} // namespace detail

// ||u_delta - u_qtt||_delta with u_delta the analytic solution, split as
//   |u - Iu|^2 + 2 (u - Iu, z) + |z|^2,  z = Iu - u_qtt,
// where the middle term only sees the L2 part (u - Iu vanishes at nodes).
inline double discrete_error(const TtVector& u_qtt, const ProblemSpec& p)
{
    auto terms = registered_exact_solution(p);
    if (!terms) throw std::invalid_argument("discrete_error: no exact solution registered for this problem");
    const GridSpec g = grid_for(p.L, p.bc);
    const double h = g.h(), d2 = p.delta * p.delta;
    const double K = std::ldexp(1.0, p.L) + 1; // elements

    struct Local {
        double w, c, r, ref;
        bool flip; // defect decays from the right end of the element
        double e0; // log|sigma(k)| = e0 + r h k
    };
    std::vector<Local> loc;
    for (const auto& t : *terms) {
        Local l{-std::abs(t.rate) * h, t.coef, t.rate, t.ref, t.rate > 0, 0};
        l.e0 = std::log(std::abs(t.coef)) + t.rate * ((l.flip ? 1 : 0) * h - t.ref);
        loc.push_back(l);
    }
    auto shape = [](const Local& l, double t) { return detail::interp_defect(l.flip ? 1 - t : t, l.w); };
    auto dshape = [](const Local& l, double t) {
        return l.flip ? -detail::interp_defect_ds(1 - t, l.w) : detail::interp_defect_ds(t, l.w);
    };

    double interp = 0;
    for (const auto& a : loc)
        for (const auto& b : loc) {
            const double mass = graded_integral([&](double t) { return shape(a, t) * shape(b, t); }, 0, 1);
            const double stiff = graded_integral([&](double t) { return dshape(a, t) * dshape(b, t); }, 0, 1);
            const double sgn = (a.c < 0) != (b.c < 0) ? -1.0 : 1.0;
            interp += sgn * detail::geometric_sum(a.e0 + b.e0, (a.r + b.r) * h, K) * (h * mass + d2 / h * stiff);
        }

    // r_j = int (u - Iu) phi_j as a sum of rank-1 exponentials in j
    TtVector rvec = qtt_zeros(p.L);
    for (const auto& l : loc) {
        const double on_t = graded_integral([&](double t) { return shape(l, t) * t; }, 0, 1);
        const double on_1mt = graded_integral([&](double t) { return shape(l, t) * (1 - t); }, 0, 1);
        const double e = l.flip ? 1 : 0;
        // sigma(j) and sigma(j+1) written as exponentials in x_{j+1}
        rvec = axpy(1.0, qtt_exp_term(h * l.c * on_t, l.r, l.ref - (e - 1) * h, g), rvec);
        rvec = axpy(1.0, qtt_exp_term(h * l.c * on_1mt, l.r, l.ref - e * h, g), rvec);
    }
    const TtVector z = axpy(-1.0, u_qtt, qtt_exp_sum(*terms, g));
    const double zn = energy_norm(z, p.delta, p.L, p.bc);
    const double e2 = interp + 2 * dot(z, rvec) + zn * zn;
    // a negative sum means the split cancelled below its own rounding error
    if (e2 < 0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(e2);
}

} // namespace qttsp
