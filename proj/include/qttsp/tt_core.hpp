#pragma once

// Tensor-train cores, chains and the arithmetic kernel.
//
// Core layout: entry (a, i, j, b) lives at a + p*(i + m*(j + n*b)), so the
// left unfolding (p*m*n x q) and the right unfolding (p x m*n*q) are both
// plain column-major views of the same buffer.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qttsp {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Dense materialization cap (log2 of the number of entries).
inline int dense_cap()
{
    if (const char* s = std::getenv("QTT_DENSE_CAP")) {
        char* end = nullptr;
        long v = std::strtol(s, &end, 10);
        if (end != s && v > 0 && v < 40) return static_cast<int>(v);
    }
    return 22;
}

class TtCore {
public:
    TtCore() = default;
    TtCore(int p, int m, int n, int q)
        : p_(p), m_(m), n_(n), q_(q), data_(std::size_t(p) * m * n * q, 0.0)
    {
        if (p <= 0 || m <= 0 || n <= 0 || q <= 0)
            throw std::invalid_argument("TtCore: dimensions must be positive");
    }
    TtCore(int p, int m, int n, int q, std::vector<double> entries) : TtCore(p, m, n, q)
    {
        if (entries.size() != data_.size())
            throw std::invalid_argument("TtCore: entry count does not match dimensions");
        for (double v : entries)
            if (!std::isfinite(v)) throw std::invalid_argument("TtCore: non-finite entry");
        data_ = std::move(entries);
    }

    // 1x1-rank core holding a single m x n block
    static TtCore from_block(const Mat& blk)
    {
        TtCore c(1, int(blk.rows()), int(blk.cols()), 1);
        for (int j = 0; j < blk.cols(); ++j)
            for (int i = 0; i < blk.rows(); ++i) c(0, i, j, 0) = blk(i, j);
        return c;
    }

    // rank p x q core assembled from blocks[a][b], all of equal mode size
    static TtCore from_blocks(const std::vector<std::vector<Mat>>& blocks)
    {
        const int p = int(blocks.size());
        const int q = int(blocks.at(0).size());
        const int m = int(blocks[0][0].rows()), n = int(blocks[0][0].cols());
        TtCore c(p, m, n, q);
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < q; ++b) {
                const Mat& B = blocks[a].at(b);
                if (B.rows() != m || B.cols() != n)
                    throw std::invalid_argument("TtCore::from_blocks: inconsistent block size");
                for (int j = 0; j < n; ++j)
                    for (int i = 0; i < m; ++i) c(a, i, j, b) = B(i, j);
            }
        return c;
    }

    int rank_left() const { return p_; }
    int rank_right() const { return q_; }
    int mode_rows() const { return m_; }
    int mode_cols() const { return n_; }
    std::size_t size() const { return data_.size(); }

    double operator()(int a, int i, int j, int b) const { return data_[index(a, i, j, b)]; }
    double& operator()(int a, int i, int j, int b) { return data_[index(a, i, j, b)]; }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }
    const std::vector<double>& entries() const { return data_; }

    Eigen::Map<const Mat> left() const { return {data_.data(), Eigen::Index(p_) * m_ * n_, q_}; }
    Eigen::Map<Mat> left() { return {data_.data(), Eigen::Index(p_) * m_ * n_, q_}; }
    Eigen::Map<const Mat> right() const { return {data_.data(), p_, Eigen::Index(m_) * n_ * q_}; }
    Eigen::Map<Mat> right() { return {data_.data(), p_, Eigen::Index(m_) * n_ * q_}; }

    Mat slice(int i, int j) const
    {
        Mat s(p_, q_);
        for (int b = 0; b < q_; ++b)
            for (int a = 0; a < p_; ++a) s(a, b) = (*this)(a, i, j, b);
        return s;
    }
    Mat block(int a, int b) const
    {
        Mat s(m_, n_);
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < m_; ++i) s(i, j) = (*this)(a, i, j, b);
        return s;
    }

    TtCore scaled(double s) const
    {
        TtCore c = *this;
        for (double& v : c.data_) v *= s;
        return c;
    }

    double frobenius() const { return left().norm(); }

    bool all_finite() const
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    std::size_t index(int a, int i, int j, int b) const
    {
        return std::size_t(a) + std::size_t(p_) * (i + std::size_t(m_) * (j + std::size_t(n_) * b));
    }

    int p_ = 0, m_ = 0, n_ = 0, q_ = 0;
    std::vector<double> data_;
};

struct RankProfile {
    std::vector<int> bonds;
    int max_rank = 1;
    long long n_parameters = 0;
};

enum class Shape { vector, matrix, general };

template <Shape S>
class TtChain {
public:
    TtChain() = default;
    explicit TtChain(std::vector<TtCore> cores) : cores_(std::move(cores)) { validate(); }

    int level() const { return int(cores_.size()); }
    const TtCore& core(int k) const { return cores_.at(std::size_t(k)); }
    const std::vector<TtCore>& cores() const { return cores_; }

    std::vector<int> bonds() const
    {
        std::vector<int> b;
        for (int k = 0; k + 1 < level(); ++k) b.push_back(cores_[k].rank_right());
        return b;
    }
    int max_rank() const
    {
        auto b = bonds();
        return b.empty() ? 1 : *std::max_element(b.begin(), b.end());
    }
    long long n_parameters() const
    {
        long long n = 0;
        for (const auto& c : cores_) n += (long long)c.size();
        return n;
    }
    RankProfile profile() const { return {bonds(), max_rank(), n_parameters()}; }

    // product of row (resp. column) mode sizes
    std::uint64_t rows() const
    {
        std::uint64_t r = 1;
        for (const auto& c : cores_) r *= std::uint64_t(c.mode_rows());
        return r;
    }
    std::uint64_t cols() const
    {
        std::uint64_t r = 1;
        for (const auto& c : cores_) r *= std::uint64_t(c.mode_cols());
        return r;
    }

private:
    void validate() const
    {
        if (cores_.empty()) throw std::invalid_argument("TtChain: empty core list");
        if (cores_.front().rank_left() != 1 || cores_.back().rank_right() != 1)
            throw std::invalid_argument("TtChain: boundary ranks must be 1");
        for (std::size_t k = 0; k < cores_.size(); ++k) {
            const auto& c = cores_[k];
            if (k + 1 < cores_.size() && c.rank_right() != cores_[k + 1].rank_left())
                throw std::invalid_argument("TtChain: rank mismatch between cores " + std::to_string(k) +
                                            " and " + std::to_string(k + 1));
            if constexpr (S == Shape::vector) {
                if (c.mode_rows() != 2 || c.mode_cols() != 1)
                    throw std::invalid_argument("TtVector: cores must have mode 2x1");
            }
            else if constexpr (S == Shape::matrix) {
                if (c.mode_rows() != 2 || c.mode_cols() != 2)
                    throw std::invalid_argument("TtMatrix: cores must have mode 2x2");
            }
        }
    }

    std::vector<TtCore> cores_;
};

using TtVector = TtChain<Shape::vector>;
using TtMatrix = TtChain<Shape::matrix>;
using TtOperator = TtChain<Shape::general>;

template <Shape T, Shape S>
TtChain<T> chain_cast(const TtChain<S>& x)
{
    return TtChain<T>(x.cores());
}

namespace detail {

inline void require_same_level(int a, int b, const char* op)
{
    if (a != b) throw std::invalid_argument(std::string(op) + ": level mismatch");
}

// Number of leading singular values kept so that the discarded tail has
// Frobenius norm below thr. Equality within 1e-15 keeps the value.
// Values below the SVD noise level of an (rows x cols) unfolding are always
// dropped, so that eps = 0 still removes numerically null directions.
inline int truncation_rank(const Vec& s, double thr, int max_rank, Eigen::Index rows, Eigen::Index cols)
{
    const int n = int(s.size());
    if (n == 0) return 1;
    const double noise = 4 * std::numeric_limits<double>::epsilon() *
                         std::sqrt(double(std::max(rows, cols))) * s(0);
    thr = std::max(thr, noise);
    int r = n;
    double tail = 0;
    const double lim = thr * (1.0 - 1e-15);
    while (r > 1) {
        double t = tail + s(r - 1) * s(r - 1);
        if (std::sqrt(t) < lim) {
            tail = t;
            --r;
        }
        else
            break;
    }
    return std::max(1, std::min(r, max_rank));
}

struct ThinSvd {
    Mat U;
    Vec s;
    Mat V;
};

// Eigen 3.4.0 BDCSVD occasionally returns inaccurate factors (deflation issue);
// the result is checked and recomputed with one-sided Jacobi when off.
inline ThinSvd thin_svd(const Mat& M)
{
    ThinSvd r;
    {
        Eigen::BDCSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        r = {svd.matrixU(), svd.singularValues(), svd.matrixV()};
    }
    const double scale = std::max(M.norm(), std::numeric_limits<double>::min());
    const Eigen::Index k = r.s.size();
    const double tol = 64 * std::numeric_limits<double>::epsilon() * std::sqrt(double(std::max(M.rows(), M.cols())));
    const bool ok = r.s.allFinite() && r.U.allFinite() && r.V.allFinite() &&
                    (M * r.V - r.U * r.s.asDiagonal()).norm() <= tol * scale &&
                    (r.U.transpose() * r.U - Mat::Identity(k, k)).norm() <= tol * std::sqrt(double(k)) &&
                    (r.V.transpose() * r.V - Mat::Identity(k, k)).norm() <= tol * std::sqrt(double(k));
    if (!ok) {
        Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        r = {svd.matrixU(), svd.singularValues(), svd.matrixV()};
    }
    return r;
}

// thin QR of a column-major matrix: returns (Q, R) with Q of k = min(rows, cols) columns
inline std::pair<Mat, Mat> thin_qr(const Mat& M)
{
    const Eigen::Index k = std::min(M.rows(), M.cols());
    Eigen::HouseholderQR<Mat> qr(M);
    Mat Q = qr.householderQ() * Mat::Identity(M.rows(), k);
    Mat R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
    return {std::move(Q), std::move(R)};
}

// new core = R * core along the left rank (R is r_new x p)
inline TtCore absorb_left(const Mat& R, const TtCore& c)
{
    TtCore out(int(R.rows()), c.mode_rows(), c.mode_cols(), c.rank_right());
    out.right() = R * c.right();
    return out;
}

// new core = core * R along the right rank (R is q x r_new)
inline TtCore absorb_right(const TtCore& c, const Mat& R)
{
    TtCore out(c.rank_left(), c.mode_rows(), c.mode_cols(), int(R.cols()));
    out.left() = c.left() * R;
    return out;
}

inline TtCore core_from_left(const Mat& M, int p, int m, int n)
{
    TtCore c(p, m, n, int(M.cols()));
    c.left() = M;
    return c;
}

inline TtCore core_from_right(const Mat& M, int m, int n, int q)
{
    TtCore c(int(M.rows()), m, n, q);
    c.right() = M;
    return c;
}

} // namespace detail

// ---------------------------------------------------------------------------
// core products

inline TtCore strong_kronecker(const TtCore& U, const TtCore& V)
{
    if (U.rank_right() != V.rank_left())
        throw std::invalid_argument("strong_kronecker: rank mismatch");
    const int p = U.rank_left(), r = U.rank_right(), q = V.rank_right();
    const int m1 = U.mode_rows(), n1 = U.mode_cols(), m2 = V.mode_rows(), n2 = V.mode_cols();
    TtCore W(p, m1 * m2, n1 * n2, q);
    for (int j1 = 0; j1 < n1; ++j1)
        for (int i1 = 0; i1 < m1; ++i1) {
            Mat u = U.slice(i1, j1);
            for (int j2 = 0; j2 < n2; ++j2)
                for (int i2 = 0; i2 < m2; ++i2) {
                    Mat w = u * V.slice(i2, j2);
                    const int i = i1 * m2 + i2, j = j1 * n2 + j2;
                    for (int b = 0; b < q; ++b)
                        for (int a = 0; a < p; ++a) W(a, i, j, b) = w(a, b);
                }
        }
    (void)r;
    return W;
}

inline TtCore mode_core_product(const TtCore& A, const TtCore& B)
{
    if (A.mode_cols() != B.mode_rows())
        throw std::invalid_argument("mode_core_product: mode mismatch");
    const int p = A.rank_left(), pp = A.rank_right(), r = B.rank_left(), rr = B.rank_right();
    const int m = A.mode_rows(), k = A.mode_cols(), n = B.mode_cols();
    TtCore C(p * r, m, n, pp * rr);
    for (int a2 = 0; a2 < pp; ++a2)
        for (int b2 = 0; b2 < rr; ++b2)
            for (int a = 0; a < p; ++a)
                for (int b = 0; b < r; ++b)
                    for (int j = 0; j < n; ++j)
                        for (int i = 0; i < m; ++i) {
                            double s = 0;
                            for (int t = 0; t < k; ++t) s += A(a, i, t, a2) * B(b, t, j, b2);
                            C(a * r + b, i, j, a2 * rr + b2) = s;
                        }
    return C;
}

inline TtCore core_transpose(const TtCore& A)
{
    TtCore T(A.rank_left(), A.mode_cols(), A.mode_rows(), A.rank_right());
    for (int b = 0; b < A.rank_right(); ++b)
        for (int j = 0; j < A.mode_cols(); ++j)
            for (int i = 0; i < A.mode_rows(); ++i)
                for (int a = 0; a < A.rank_left(); ++a) T(a, j, i, b) = A(a, i, j, b);
    return T;
}

// ---------------------------------------------------------------------------
// orthogonalization, norm, rounding

template <Shape S>
TtChain<S> left_orthogonalize(const TtChain<S>& x)
{
    std::vector<TtCore> c = x.cores();
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
        auto [Q, R] = detail::thin_qr(Mat(c[k].left()));
        c[k] = detail::core_from_left(Q, c[k].rank_left(), c[k].mode_rows(), c[k].mode_cols());
        c[k + 1] = detail::absorb_left(R, c[k + 1]);
    }
    return TtChain<S>(std::move(c));
}

template <Shape S>
TtChain<S> right_orthogonalize(const TtChain<S>& x)
{
    std::vector<TtCore> c = x.cores();
    for (std::size_t k = c.size() - 1; k > 0; --k) {
        auto [Q, R] = detail::thin_qr(Mat(c[k].right().transpose()));
        c[k] = detail::core_from_right(Q.transpose(), c[k].mode_rows(), c[k].mode_cols(), c[k].rank_right());
        c[k - 1] = detail::absorb_right(c[k - 1], R.transpose());
    }
    return TtChain<S>(std::move(c));
}

template <Shape S>
double norm(const TtChain<S>& x)
{
    // carry only the triangular factor through the chain
    Mat R = Mat::Identity(1, 1);
    for (const auto& c : x.cores()) {
        TtCore t = detail::absorb_left(R, c);
        R = detail::thin_qr(Mat(t.left())).second;
    }
    return R.norm();
}

template <Shape S>
TtChain<S> zero_like(const TtChain<S>& x)
{
    std::vector<TtCore> c;
    for (const auto& k : x.cores()) c.emplace_back(1, k.mode_rows(), k.mode_cols(), 1);
    return TtChain<S>(std::move(c));
}

// Truncated re-orthogonalization: ||result - x||_F <= eps ||x||_F.
template <Shape S>
TtChain<S> tt_round(const TtChain<S>& x, double eps, int max_rank = std::numeric_limits<int>::max())
{
    if (eps < 0) throw std::invalid_argument("tt_round: eps must be nonnegative");
    const int L = x.level();
    TtChain<S> y = left_orthogonalize(x);
    const double nrm = y.core(L - 1).frobenius();
    if (nrm == 0) return zero_like(x);
    if (L == 1) return y;
    // roundoff floor so that eps = 0 still removes numerically null directions
    const double thr = eps * nrm / std::sqrt(double(L - 1));
    std::vector<TtCore> c = y.cores();
    for (int k = L - 1; k > 0; --k) {
        Mat Mt = c[k].right().transpose();
        const detail::ThinSvd svd = detail::thin_svd(Mt);
        const Vec& s = svd.s;
        const int r = detail::truncation_rank(s, thr, max_rank, Mt.rows(), Mt.cols());
        Mat Ut = svd.U.leftCols(r).transpose();
        Mat VS = svd.V.leftCols(r) * s.head(r).asDiagonal();
        c[k] = detail::core_from_right(Ut, c[k].mode_rows(), c[k].mode_cols(), c[k].rank_right());
        c[k - 1] = detail::absorb_right(c[k - 1], VS);
    }
    return TtChain<S>(std::move(c));
}

// ---------------------------------------------------------------------------
// linear algebra

template <Shape S>
TtChain<S> scale(const TtChain<S>& x, double s)
{
    std::vector<TtCore> c = x.cores();
    c[0] = c[0].scaled(s);
    return TtChain<S>(std::move(c));
}

template <Shape S>
TtChain<S> axpy(double a, const TtChain<S>& x, const TtChain<S>& y)
{
    detail::require_same_level(x.level(), y.level(), "axpy");
    const int L = x.level();
    std::vector<TtCore> c;
    c.reserve(L);
    for (int k = 0; k < L; ++k) {
        const TtCore& X = x.core(k);
        const TtCore& Y = y.core(k);
        if (X.mode_rows() != Y.mode_rows() || X.mode_cols() != Y.mode_cols())
            throw std::invalid_argument("axpy: mode mismatch");
        const int m = X.mode_rows(), n = X.mode_cols();
        const double sx = (k == 0) ? a : 1.0;
        if (L == 1) {
            TtCore Z(1, m, n, 1);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < m; ++i) Z(0, i, j, 0) = a * X(0, i, j, 0) + Y(0, i, j, 0);
            c.push_back(std::move(Z));
            break;
        }
        const bool first = k == 0, last = k == L - 1;
        const int px = X.rank_left(), qx = X.rank_right(), py = Y.rank_left(), qy = Y.rank_right();
        TtCore Z(first ? 1 : px + py, m, n, last ? 1 : qx + qy);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i) {
                for (int b = 0; b < qx; ++b)
                    for (int al = 0; al < px; ++al) Z(al, i, j, b) = sx * X(al, i, j, b);
                for (int b = 0; b < qy; ++b)
                    for (int al = 0; al < py; ++al)
                        Z(first ? al : px + al, i, j, last ? b : qx + b) = Y(al, i, j, b);
            }
        c.push_back(std::move(Z));
    }
    return TtChain<S>(std::move(c));
}

template <Shape S>
double dot(const TtChain<S>& x, const TtChain<S>& y)
{
    detail::require_same_level(x.level(), y.level(), "dot");
    Mat Phi = Mat::Ones(1, 1);
    for (int k = 0; k < x.level(); ++k) {
        const TtCore& X = x.core(k);
        const TtCore& Y = y.core(k);
        if (X.mode_rows() != Y.mode_rows() || X.mode_cols() != Y.mode_cols())
            throw std::invalid_argument("dot: mode mismatch");
        // T(b, (i,j), b') via Phi^T * X-right then contraction with Y
        Mat next = Mat::Zero(X.rank_right(), Y.rank_right());
        for (int j = 0; j < X.mode_cols(); ++j)
            for (int i = 0; i < X.mode_rows(); ++i) next += X.slice(i, j).transpose() * Phi * Y.slice(i, j);
        Phi = std::move(next);
    }
    return Phi(0, 0);
}

// exact operator application; result ranks are products
template <Shape SA, Shape SX>
TtChain<SX> apply(const TtChain<SA>& A, const TtChain<SX>& x)
{
    detail::require_same_level(A.level(), x.level(), "matvec");
    std::vector<TtCore> c;
    for (int k = 0; k < A.level(); ++k) c.push_back(mode_core_product(A.core(k), x.core(k)));
    return TtChain<SX>(std::move(c));
}

inline TtVector matvec(const TtMatrix& A, const TtVector& x, double eps)
{
    TtVector y = apply(A, x);
    return eps > 0 ? tt_round(y, eps) : y;
}

template <Shape S1, Shape S2>
TtOperator operator_product(const TtChain<S1>& A, const TtChain<S2>& B)
{
    detail::require_same_level(A.level(), B.level(), "matmat");
    std::vector<TtCore> c;
    for (int k = 0; k < A.level(); ++k) c.push_back(mode_core_product(A.core(k), B.core(k)));
    return TtOperator(std::move(c));
}

inline TtMatrix matmat(const TtMatrix& A, const TtMatrix& B, double eps)
{
    TtMatrix C = chain_cast<Shape::matrix>(operator_product(A, B));
    return eps > 0 ? tt_round(C, eps) : C;
}

template <Shape S>
TtChain<S> transpose(const TtChain<S>& A)
{
    std::vector<TtCore> c;
    for (const auto& k : A.cores()) c.push_back(core_transpose(k));
    return TtChain<S>(std::move(c));
}

// ---------------------------------------------------------------------------
// entry access and dense conversion

// value at multi-index: rows[k], cols[k] are the mode indices of core k
template <Shape S>
double entry(const TtChain<S>& x, const std::vector<int>& rows, const std::vector<int>& cols)
{
    Mat v = Mat::Ones(1, 1);
    for (int k = 0; k < x.level(); ++k) v = v * x.core(k).slice(rows[k], cols[k]);
    return v(0, 0);
}

inline std::vector<int> bits_of(std::uint64_t idx, int L)
{
    std::vector<int> b(L);
    for (int k = 0; k < L; ++k) b[k] = int((idx >> (L - 1 - k)) & 1u);
    return b;
}

inline double entry(const TtVector& x, std::uint64_t i)
{
    return entry(x, bits_of(i, x.level()), std::vector<int>(x.level(), 0));
}

inline double entry(const TtMatrix& A, std::uint64_t i, std::uint64_t j)
{
    return entry(A, bits_of(i, A.level()), bits_of(j, A.level()));
}

// Full contraction to a single (rows x cols) block.
template <Shape S>
Mat to_dense(const TtChain<S>& x)
{
    const double bits = std::log2(double(x.rows())) + std::log2(double(x.cols()));
    if (bits > dense_cap() + 1e-9)
        throw std::length_error("to_dense: size exceeds dense materialization cap (QTT_DENSE_CAP)");
    TtCore acc = x.core(0);
    for (int k = 1; k < x.level(); ++k) acc = strong_kronecker(acc, x.core(k));
    return acc.block(0, 0);
}

inline Vec dequantize(const TtVector& x)
{
    if (x.level() > dense_cap())
        throw std::length_error("dequantize: level exceeds dense materialization cap (QTT_DENSE_CAP)");
    return to_dense(x).col(0);
}

namespace detail {

// TT-SVD of a big-endian digit tensor with L digits of size `mode`
inline std::vector<TtCore> tt_svd(const double* v, int L, int mode, double eps)
{
    std::uint64_t total = 1;
    for (int k = 0; k < L; ++k) total *= std::uint64_t(mode);
    Eigen::Map<const Vec> vv(v, Eigen::Index(total));
    const double nrm = vv.norm();
    std::vector<TtCore> cores;
    if (nrm == 0) {
        for (int k = 0; k < L; ++k) cores.emplace_back(1, mode, 1, 1);
        return cores;
    }
    if (L == 1) {
        TtCore c(1, mode, 1, 1);
        for (int i = 0; i < mode; ++i) c(0, i, 0, 0) = v[i];
        return cores = {c};
    }
    const double thr = eps * nrm / std::sqrt(double(L - 1));
    std::uint64_t rest = total / mode;
    Mat cur = Eigen::Map<const Mat>(v, Eigen::Index(rest), mode).transpose();
    int r = 1;
    for (int k = 0; k < L - 1; ++k) {
        const ThinSvd svd = thin_svd(cur);
        const Vec& s = svd.s;
        const int rk = truncation_rank(s, thr, std::numeric_limits<int>::max(), cur.rows(), cur.cols());
        cores.push_back(core_from_left(svd.U.leftCols(rk), r, mode, 1));
        Mat sv = s.head(rk).asDiagonal() * svd.V.leftCols(rk).transpose();
        r = rk;
        const std::uint64_t nrest = rest / mode;
        Mat next(Eigen::Index(r) * mode, Eigen::Index(nrest));
        for (std::uint64_t c2 = 0; c2 < nrest; ++c2)
            for (int d = 0; d < mode; ++d)
                for (int b = 0; b < r; ++b) next(b + r * d, Eigen::Index(c2)) = sv(b, Eigen::Index(d * nrest + c2));
        cur = std::move(next);
        rest = nrest;
    }
    cores.push_back(core_from_left(cur, r, mode, 1));
    return cores;
}

inline int exact_log2(std::uint64_t n, const char* op)
{
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument(std::string(op) + ": length is not a power of two");
    int L = 0;
    while ((std::uint64_t(1) << L) < n) ++L;
    return L;
}

} // namespace detail

inline TtVector quantize(const Vec& v, double eps)
{
    if (eps < 0) throw std::invalid_argument("quantize: eps must be nonnegative");
    const int L = detail::exact_log2(std::uint64_t(v.size()), "quantize");
    if (L == 0) throw std::invalid_argument("quantize: length must be at least 2");
    return TtVector(detail::tt_svd(v.data(), L, 2, eps));
}

inline TtVector quantize(const std::vector<double>& v, double eps)
{
    return quantize(Vec(Eigen::Map<const Vec>(v.data(), Eigen::Index(v.size()))), eps);
}

inline TtMatrix quantize_matrix(const Mat& A, double eps)
{
    if (A.rows() != A.cols()) throw std::invalid_argument("quantize_matrix: matrix must be square");
    const int L = detail::exact_log2(std::uint64_t(A.rows()), "quantize_matrix");
    if (L == 0) throw std::invalid_argument("quantize_matrix: size must be at least 2");
    // interleave row and column bits: digit k = i_k + 2 j_k
    const std::uint64_t n = std::uint64_t(A.rows());
    std::vector<double> t(n * n);
    for (std::uint64_t i = 0; i < n; ++i)
        for (std::uint64_t j = 0; j < n; ++j) {
            std::uint64_t idx = 0;
            for (int k = 0; k < L; ++k) {
                const int s = L - 1 - k;
                idx = idx * 4 + ((i >> s) & 1u) + 2 * ((j >> s) & 1u);
            }
            t[idx] = A(Eigen::Index(i), Eigen::Index(j));
        }
    auto cores = detail::tt_svd(t.data(), L, 4, eps);
    std::vector<TtCore> mc;
    for (auto& c : cores) mc.emplace_back(c.rank_left(), 2, 2, c.rank_right(), c.entries());
    return TtMatrix(std::move(mc));
}

} // namespace qttsp
