#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace qttsp {

struct LinearFit {
    double slope = 0, intercept = 0;
    double r2 = 0; // 1 for a perfect fit; 1 as well when y is constant and matched exactly
    std::size_t n = 0;
};

// ordinary least squares y ≈ intercept + slope·x
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size()) throw std::invalid_argument("linear_fit: size mismatch");
    if (x.size() < 2) throw std::invalid_argument("linear_fit: need at least two points");
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) throw std::invalid_argument("linear_fit: abscissae are all equal");
    LinearFit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - f.intercept - f.slope * x[i];
        sse += e * e;
    }
    f.r2 = syy > 0 ? 1 - sse / syy : (sse == 0 ? 1.0 : 0.0);
    return f;
}

} // namespace qttsp
