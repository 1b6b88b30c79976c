#pragma once

#include "qttsp/tt_core.hpp"

#include <random>

namespace qttsp::testing {

inline TtCore random_core(std::mt19937_64& rng, int p, int m, int n, int q)
{
    std::normal_distribution<double> N(0.0, 1.0);
    TtCore c(p, m, n, q);
    for (std::size_t t = 0; t < c.size(); ++t) c.data()[t] = N(rng);
    return c;
}

template <Shape S>
TtChain<S> random_chain(std::mt19937_64& rng, int L, int r, int m, int n)
{
    std::vector<TtCore> c;
    for (int k = 0; k < L; ++k) c.push_back(random_core(rng, k == 0 ? 1 : r, m, n, k == L - 1 ? 1 : r));
    return TtChain<S>(std::move(c));
}

inline TtVector random_vector(std::mt19937_64& rng, int L, int r) { return random_chain<Shape::vector>(rng, L, r, 2, 1); }
inline TtMatrix random_matrix(std::mt19937_64& rng, int L, int r) { return random_chain<Shape::matrix>(rng, L, r, 2, 2); }

inline double rel_err(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

} // namespace qttsp::testing
