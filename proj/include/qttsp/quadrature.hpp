#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace qttsp {

struct GaussRule {
    std::vector<double> x, w; // on [0, 1]
};

// Gauss-Legendre rule on [0, 1]; nodes from Golub-Welsch polished by Newton.
inline const GaussRule& gauss_legendre(int n)
{
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussRule r;
    for (int i = 0; i < n; ++i) {
        double t = es.eigenvalues()(i);
        double dp = 1;
        for (int it2 = 0; it2 < 3; ++it2) {
            double p0 = 1, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p1 = t, p0 = 1;
            dp = n * (t * p1 - p0) / (t * t - 1);
            t -= p1 / dp;
        }
        r.x.push_back(0.5 * (t + 1));
        r.w.push_back(1.0 / ((1 - t * t) * dp * dp));
    }
    return cache.emplace(n, std::move(r)).first->second;
}

// integrate f over [a, b] with composite Gauss on pieces graded towards both ends
template <class F>
double graded_integral(F&& f, double a, double b, int levels = 60, int npts = 16)
{
    const GaussRule& g = gauss_legendre(npts);
    std::vector<double> br{0.0};
    for (int j = levels; j >= 1; --j) br.push_back(std::ldexp(0.5, -j));
    br.push_back(0.5);
    for (int j = 1; j <= levels; ++j) br.push_back(1.0 - std::ldexp(0.5, -j));
    br.push_back(1.0);
    double s = 0;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
        const double lo = a + (b - a) * br[k], len = (b - a) * (br[k + 1] - br[k]);
        if (len <= 0) continue;
        for (std::size_t q = 0; q < g.x.size(); ++q) s += len * g.w[q] * f(lo + len * g.x[q]);
    }
    return s;
}

} // namespace qttsp
