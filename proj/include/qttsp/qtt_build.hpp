#pragma once

// Exact low-rank QTT constructors: exponentials, polynomials, the model
// solution, identity and shift.

#include "qttsp/tt_core.hpp"

#include <array>

namespace qttsp {

enum class GridKind { interior_dirichlet, dyadic_neumann };

struct GridSpec {
    int L = 1;
    GridKind kind = GridKind::interior_dirichlet;

    std::uint64_t size() const { return std::uint64_t(1) << L; }
    double h() const
    {
        return kind == GridKind::interior_dirichlet ? 1.0 / (std::ldexp(1.0, L) + 1.0) : std::ldexp(1.0, -L);
    }
    // 0-based index i -> x_{i+1}
    double node(std::uint64_t i) const { return double(i + 1) * h(); }
    // 1 - x_i = gap + h * (n - 1 - i)
    double right_gap() const { return kind == GridKind::interior_dirichlet ? h() : 0.0; }
};

// Weight of bit k (0 = most significant) in the integer index.
inline double bit_weight(int L, int k) { return std::ldexp(1.0, L - 1 - k); }

inline TtVector qtt_zeros(int L) { return TtVector(std::vector<TtCore>(L, TtCore(1, 2, 1, 1))); }

// v_i = sign * exp(c0 + sum_k w[k][i_k]); cores balanced in the log domain.
inline TtVector qtt_exp_bits(double sign, double c0, const std::vector<std::array<double, 2>>& w)
{
    const int L = int(w.size());
    double total = c0;
    std::vector<double> peak(L);
    for (int k = 0; k < L; ++k) {
        peak[k] = std::max(w[k][0], w[k][1]);
        total += peak[k];
    }
    const double share = total / L;
    std::vector<TtCore> cores;
    for (int k = 0; k < L; ++k) {
        TtCore c(1, 2, 1, 1);
        for (int d = 0; d < 2; ++d) c(0, d, 0, 0) = std::exp(w[k][d] - peak[k] + share);
        cores.push_back(std::move(c));
    }
    cores[0] = cores[0].scaled(sign);
    return TtVector(std::move(cores));
}

// coef * exp(rate * (x_i - ref)) on the grid, rank 1
inline TtVector qtt_exp_term(double coef, double rate, double ref, const GridSpec& g)
{
    if (coef == 0) return qtt_zeros(g.L);
    std::vector<std::array<double, 2>> w(g.L);
    const double h = g.h();
    for (int k = 0; k < g.L; ++k) w[k] = {0.0, rate * h * bit_weight(g.L, k)};
    return qtt_exp_bits(coef < 0 ? -1.0 : 1.0, std::log(std::abs(coef)) + rate * (g.node(0) - ref), w);
}

inline TtVector qtt_exponential(double alpha, const GridSpec& g) { return qtt_exp_term(1.0, -alpha, 0.0, g); }

inline TtVector qtt_ones(int L) { return qtt_exponential(0.0, GridSpec{L, GridKind::dyadic_neumann}); }

inline double binomial(int n, int k)
{
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// sum_k coeffs[k] x_i^k via the binomial recurrence in the accumulated offset
inline TtVector qtt_polynomial(const std::vector<double>& coeffs, const GridSpec& g)
{
    if (coeffs.empty()) throw std::invalid_argument("qtt_polynomial: empty coefficient list");
    const int P = int(coeffs.size()) - 1, L = g.L;
    const double x0 = g.node(0), h = g.h();
    // Taylor coefficients at x0
    std::vector<double> s(P + 1, 0.0);
    for (int m = 0; m <= P; ++m)
        for (int n = m; n <= P; ++n) s[m] += coeffs[n] * binomial(n, m) * std::pow(x0, n - m);
    auto pw = [](double d, int e) { return e == 0 ? 1.0 : std::pow(d, e); };
    std::vector<TtCore> cores;
    if (L == 1) {
        TtCore c(1, 2, 1, 1);
        for (int i = 0; i < 2; ++i)
            for (int m = 0; m <= P; ++m) c(0, i, 0, 0) += s[m] * pw(h * i, m);
        return TtVector({c});
    }
    for (int k = 0; k < L; ++k) {
        const double d = h * bit_weight(L, k);
        const bool first = k == 0, last = k == L - 1;
        TtCore c(first ? 1 : P + 1, 2, 1, last ? 1 : P + 1);
        for (int i = 0; i < 2; ++i) {
            if (first)
                for (int m = 0; m <= P; ++m) c(0, i, 0, m) = pw(d * i, m);
            else if (last)
                for (int l = 0; l <= P; ++l) {
                    double v = 0;
                    for (int m = l; m <= P; ++m) v += binomial(m, l) * pw(d * i, m - l) * s[m];
                    c(l, i, 0, 0) = v;
                }
            else
                for (int l = 0; l <= P; ++l)
                    for (int m = l; m <= P; ++m) c(l, i, 0, m) = binomial(m, l) * pw(d * i, m - l);
        }
        cores.push_back(std::move(c));
    }
    return TtVector(std::move(cores));
}

// coef * exp(rate * (x - ref)); callers keep rate * (x - ref) <= 0 on [0, 1]
struct ExpTerm {
    double coef = 0, rate = 0, ref = 0;
    double operator()(double x) const { return coef * std::exp(rate * (x - ref)); }
    double derivative(double x) const { return coef * rate * std::exp(rate * (x - ref)); }
};

// Homogeneous solution of -d^2 u'' + c u = 0 with u(0) = a0, u(1) = a1,
// written with nonpositive exponents only.
inline std::vector<ExpTerm> exact_solution_terms(double delta, double cbar, double a0, double a1)
{
    const double k = std::sqrt(cbar) / delta;
    const double den = -std::expm1(-2 * k);
    std::vector<ExpTerm> t;
    if (a1 != 0) {
        t.push_back({a1 / den, k, 1.0});
        t.push_back({-a1 / den, -k, -1.0});
    }
    if (a0 != 0) {
        t.push_back({a0 / den, -k, 0.0});
        t.push_back({-a0 / den, k, 2.0});
    }
    return t;
}

inline TtVector qtt_exp_sum(const std::vector<ExpTerm>& terms, const GridSpec& g)
{
    if (terms.empty()) return qtt_zeros(g.L);
    TtVector acc = qtt_exp_term(terms[0].coef, terms[0].rate, terms[0].ref, g);
    for (std::size_t t = 1; t < terms.size(); ++t)
        acc = axpy(1.0, qtt_exp_term(terms[t].coef, terms[t].rate, terms[t].ref, g), acc);
    return acc;
}

inline TtVector qtt_exact_solution(double delta, const GridSpec& g)
{
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("qtt_exact_solution: delta must lie in (0,1)");
    return qtt_exp_sum(exact_solution_terms(delta, 1.0, 0.0, 1.0), g);
}

inline TtMatrix qtt_identity(int L)
{
    if (L < 1) throw std::invalid_argument("qtt_identity: L must be positive");
    return TtMatrix(std::vector<TtCore>(L, TtCore::from_block(Mat::Identity(2, 2))));
}

// (J)_{i,i+1} = 1; carry chain of the binary increment
inline TtMatrix qtt_shift(int L)
{
    if (L < 1) throw std::invalid_argument("qtt_shift: L must be positive");
    Mat I = Mat::Identity(2, 2), J = Mat::Zero(2, 2), Z = Mat::Zero(2, 2);
    J(0, 1) = 1;
    Mat Jt = J.transpose();
    if (L == 1) return TtMatrix({TtCore::from_block(J)});
    std::vector<TtCore> c;
    c.push_back(TtCore::from_blocks({{I, J}}));
    for (int k = 1; k < L - 1; ++k) c.push_back(TtCore::from_blocks({{I, J}, {Z, Jt}}));
    c.push_back(TtCore::from_blocks({{J}, {Jt}}));
    return TtMatrix(std::move(c));
}

inline TtVector qtt_unit(int L, std::uint64_t idx)
{
    std::vector<TtCore> c;
    for (int b : bits_of(idx, L)) {
        TtCore k(1, 2, 1, 1);
        k(0, b, 0, 0) = 1;
        c.push_back(std::move(k));
    }
    return TtVector(std::move(c));
}

// e_i e_j^T
inline TtMatrix qtt_unit_matrix(int L, std::uint64_t i, std::uint64_t j)
{
    std::vector<TtCore> c;
    auto bi = bits_of(i, L), bj = bits_of(j, L);
    for (int k = 0; k < L; ++k) {
        TtCore t(1, 2, 2, 1);
        t(0, bi[k], bj[k], 0) = 1;
        c.push_back(std::move(t));
    }
    return TtMatrix(std::move(c));
}

} // namespace qttsp
