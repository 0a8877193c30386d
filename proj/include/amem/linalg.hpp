#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "amem/rng.hpp"

namespace amem {

struct Vec {
    std::vector<double> data;

    Vec() = default;
    explicit Vec(std::size_t n, double fill = 0.0) : data(n, fill) {}
    Vec(std::initializer_list<double> init) : data(init) {}

    std::size_t dim() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double norm2() const {
        double s = 0.0;
        for (double v : data) s += v * v;
        return std::sqrt(s);
    }

    bool is_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline double dot(const Vec& a, const Vec& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a.data[i] * b.data[i];
    return s;
}

inline Vec operator+(const Vec& a, const Vec& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("vec add: dimension mismatch");
    Vec r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec operator-(const Vec& a, const Vec& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("vec sub: dimension mismatch");
    Vec r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec operator*(double c, const Vec& a) {
    Vec r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = c * a[i];
    return r;
}

inline double distance(const Vec& a, const Vec& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Dense row-major matrix of 64-bit reals.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    bool is_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double frobenius() const {
        double s = 0.0;
        for (double v : data) s += v * v;
        return std::sqrt(s);
    }

    // max over rows of the absolute row sum (operator infinity norm)
    double max_row_sum() const {
        double m = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            const double* p = row(r);
            for (std::size_t c = 0; c < cols; ++c) s += std::fabs(p[c]);
            m = std::max(m, s);
        }
        return m;
    }
};

// Standard product with a fixed accumulation order (row-by-row, left-to-right)
// so repeated runs are bit-identical.
inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: dimension mismatch");
    Mat out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
            out.at(i, j) = s;
        }
    }
    return out;
}

inline Vec matvec(const Mat& a, const Vec& x) {
    if (a.cols != x.dim()) throw std::invalid_argument("matvec: dimension mismatch");
    Vec y(a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        const double* p = a.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) s += p[k] * x.data[k];
        y[i] = s;
    }
    return y;
}

inline Mat transpose(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = 0; c < a.cols; ++c) t.at(c, r) = a.at(r, c);
    return t;
}

// a x y^T rank-1 update helper
inline Mat outer(const Vec& x, const Vec& y) {
    Mat m(x.dim(), y.dim());
    for (std::size_t r = 0; r < x.dim(); ++r)
        for (std::size_t c = 0; c < y.dim(); ++c) m.at(r, c) = x[r] * y[c];
    return m;
}

// All eigenvalues of a real square matrix via Householder reduction to upper
// Hessenberg form followed by Francis double-shift QR (EISPACK hqr lineage,
// eigenvalues only). Throws on non-convergence after the sweep budget.
inline std::vector<std::complex<double>> full_eigenvalues(const Mat& m) {
    if (m.rows != m.cols) throw std::invalid_argument("full_eigenvalues: matrix not square");
    if (m.rows > 1024) throw std::invalid_argument("full_eigenvalues: dim > 1024");
    const std::size_t nn = m.rows;
    if (nn == 0) return {};
    if (nn == 1) return {std::complex<double>(m.at(0, 0), 0.0)};

    Mat H = m;
    const std::size_t low = 0, high = nn - 1;
    std::vector<double> ort(nn, 0.0);

    // Householder reduction to Hessenberg form
    for (std::size_t mm = low + 1; mm + 1 <= high; ++mm) {
        double scale = 0.0;
        for (std::size_t i = mm; i <= high; ++i) scale += std::fabs(H.at(i, mm - 1));
        if (scale == 0.0) continue;
        double h = 0.0;
        for (std::size_t i = high + 1; i-- > mm;) {
            ort[i] = H.at(i, mm - 1) / scale;
            h += ort[i] * ort[i];
        }
        double g = std::sqrt(h);
        if (ort[mm] > 0) g = -g;
        h -= ort[mm] * g;
        ort[mm] -= g;
        for (std::size_t j = mm; j < nn; ++j) {
            double f = 0.0;
            for (std::size_t i = high + 1; i-- > mm;) f += ort[i] * H.at(i, j);
            f /= h;
            for (std::size_t i = mm; i <= high; ++i) H.at(i, j) -= f * ort[i];
        }
        for (std::size_t i = 0; i <= high; ++i) {
            double f = 0.0;
            for (std::size_t j = high + 1; j-- > mm;) f += ort[j] * H.at(i, j);
            f /= h;
            for (std::size_t j = mm; j <= high; ++j) H.at(i, j) -= f * ort[j];
        }
        H.at(mm, mm - 1) = scale * g;
    }
    for (std::size_t i = 2; i < nn; ++i)
        for (std::size_t j = 0; j + 2 <= i; ++j) H.at(i, j) = 0.0;

    std::vector<double> dre(nn, 0.0), dim(nn, 0.0);
    const double eps = std::ldexp(1.0, -52);
    double exshift = 0.0;
    double p = 0, q = 0, r = 0, s = 0, z = 0, w = 0, x = 0, y = 0;

    double norm = 0.0;
    for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = (i > 0 ? i - 1 : 0); j < nn; ++j) norm += std::fabs(H.at(i, j));

    long n = static_cast<long>(high);
    long budget = 30 * static_cast<long>(nn) + 300;
    int iter = 0;
    auto Hat = [&H](long i, long j) -> double& {
        return H.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    };

    while (n >= static_cast<long>(low)) {
        long l = n;
        while (l > static_cast<long>(low)) {
            s = std::fabs(Hat(l - 1, l - 1)) + std::fabs(Hat(l, l));
            if (s == 0.0) s = norm;
            if (std::fabs(Hat(l, l - 1)) <= eps * s) break;
            --l;
        }

        if (l == n) {
            // one real root found
            Hat(n, n) += exshift;
            dre[n] = Hat(n, n);
            dim[n] = 0.0;
            --n;
            iter = 0;
        } else if (l == n - 1) {
            // two roots (real pair or complex conjugates)
            w = Hat(n, n - 1) * Hat(n - 1, n);
            p = (Hat(n - 1, n - 1) - Hat(n, n)) / 2.0;
            q = p * p + w;
            z = std::sqrt(std::fabs(q));
            Hat(n, n) += exshift;
            Hat(n - 1, n - 1) += exshift;
            x = Hat(n, n);
            if (q >= 0) {
                z = (p >= 0) ? p + z : p - z;
                dre[n - 1] = x + z;
                dre[n] = dre[n - 1];
                if (z != 0.0) dre[n] = x - w / z;
                dim[n - 1] = 0.0;
                dim[n] = 0.0;
            } else {
                dre[n - 1] = x + p;
                dre[n] = x + p;
                dim[n - 1] = z;
                dim[n] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // form shift
            x = Hat(n, n);
            y = 0.0;
            w = 0.0;
            if (l < n) {
                y = Hat(n - 1, n - 1);
                w = Hat(n, n - 1) * Hat(n - 1, n);
            }
            if (iter == 10 || iter == 20) {
                // exceptional shift
                exshift += x;
                for (long i = static_cast<long>(low); i <= n; ++i) Hat(i, i) -= x;
                s = std::fabs(Hat(n, n - 1)) + std::fabs(Hat(n - 1, n - 2));
                x = y = 0.75 * s;
                w = -0.4375 * s * s;
            }
            ++iter;
            if (--budget < 0) throw std::runtime_error("full_eigenvalues: QR failed to converge within sweep budget");

            // two consecutive small sub-diagonal elements
            long mfind = n - 2;
            while (mfind >= l) {
                z = Hat(mfind, mfind);
                r = x - z;
                s = y - z;
                p = (r * s - w) / Hat(mfind + 1, mfind) + Hat(mfind, mfind + 1);
                q = Hat(mfind + 1, mfind + 1) - z - r - s;
                r = Hat(mfind + 2, mfind + 1);
                s = std::fabs(p) + std::fabs(q) + std::fabs(r);
                p /= s;
                q /= s;
                r /= s;
                if (mfind == l) break;
                if (std::fabs(Hat(mfind, mfind - 1)) * (std::fabs(q) + std::fabs(r)) <
                    eps * (std::fabs(p) * (std::fabs(Hat(mfind - 1, mfind - 1)) + std::fabs(z) +
                                           std::fabs(Hat(mfind + 1, mfind + 1)))))
                    break;
                --mfind;
            }
            for (long i = mfind + 2; i <= n; ++i) {
                Hat(i, i - 2) = 0.0;
                if (i > mfind + 2) Hat(i, i - 3) = 0.0;
            }

            // double QR step on rows l..n, columns mfind..n
            for (long k = mfind; k <= n - 1; ++k) {
                bool notlast = (k != n - 1);
                if (k != mfind) {
                    p = Hat(k, k - 1);
                    q = Hat(k + 1, k - 1);
                    r = notlast ? Hat(k + 2, k - 1) : 0.0;
                    x = std::fabs(p) + std::fabs(q) + std::fabs(r);
                    if (x == 0.0) continue;
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = std::sqrt(p * p + q * q + r * r);
                if (p < 0) s = -s;
                if (s == 0.0) continue;
                if (k != mfind)
                    Hat(k, k - 1) = -s * x;
                else if (l != mfind)
                    Hat(k, k - 1) = -Hat(k, k - 1);
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;
                for (long j = k; j <= n; ++j) {
                    p = Hat(k, j) + q * Hat(k + 1, j);
                    if (notlast) {
                        p += r * Hat(k + 2, j);
                        Hat(k + 2, j) -= p * z;
                    }
                    Hat(k, j) -= p * x;
                    Hat(k + 1, j) -= p * y;
                }
                long imax = std::min(n, k + 3);
                for (long i = l; i <= imax; ++i) {
                    p = x * Hat(i, k) + y * Hat(i, k + 1);
                    if (notlast) {
                        p += z * Hat(i, k + 2);
                        Hat(i, k + 2) -= p * r;
                    }
                    Hat(i, k) -= p;
                    Hat(i, k + 1) -= p * q;
                }
            }
        }
    }

    std::vector<std::complex<double>> eig(nn);
    for (std::size_t i = 0; i < nn; ++i) eig[i] = {dre[i], dim[i]};
    std::sort(eig.begin(), eig.end(), [](const auto& a, const auto& b) {
        double ma = std::abs(a), mb = std::abs(b);
        if (ma != mb) return ma > mb;
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return eig;
}

struct SpectrumReport {
    double rho = 0.0;        // dominant eigenvalue modulus estimate
    std::string method;      // "power", "power+qr", or "qr"
    double residual = 0.0;   // |power - qr| when both were computed
    bool converged = true;   // false marks a low-confidence power-only estimate
    std::size_t iters = 0;
};

namespace detail {
// Cross-check against full QR eigenvalues at this size and below.
inline constexpr std::size_t kQrCrossCheckDim = 128;
inline constexpr std::uint64_t kPowerSeed = 0x9D0CA1B5EED11ULL;
} // namespace detail

// Spectral radius of a (generally nonsymmetric) square matrix. Power
// iteration with an s-step growth-rate estimate, which stays well defined
// when the dominant eigenvalues are a complex-conjugate pair. For small
// matrices the QR eigensolver runs as an independent cross-check.
inline SpectrumReport spectral_radius(const Mat& j, double tol = 1e-8, std::size_t max_iter = 5000) {
    if (j.rows != j.cols) throw std::invalid_argument("spectral_radius: matrix not square");
    if (!(tol > 0)) throw std::invalid_argument("spectral_radius: tol must be positive");
    const std::size_t n = j.rows;
    SpectrumReport rep;
    if (n == 0) {
        rep.method = "power";
        return rep;
    }

    Rng rng(detail::kPowerSeed);
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal();
    double nv = v.norm2();
    for (std::size_t i = 0; i < n; ++i) v[i] /= nv;

    const std::size_t window = 16;
    std::vector<double> log_growth;
    log_growth.reserve(max_iter);
    double est = 0.0, prev_est = -1.0;
    std::size_t stable = 0;
    bool converged = false;
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        Vec w = matvec(j, v);
        double g = w.norm2();
        if (g == 0.0) {
            // v landed in the kernel of J^k; spectrum estimate is 0
            est = 0.0;
            converged = true;
            break;
        }
        log_growth.push_back(std::log(g));
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / g;
        if (log_growth.size() >= window) {
            double acc = 0.0;
            for (std::size_t k = log_growth.size() - window; k < log_growth.size(); ++k)
                acc += log_growth[k];
            est = std::exp(acc / static_cast<double>(window));
            if (prev_est >= 0.0 && std::fabs(est - prev_est) < tol * std::max(1.0, est)) {
                if (++stable >= window) {
                    converged = true;
                    ++it;
                    break;
                }
            } else {
                stable = 0;
            }
            prev_est = est;
        }
    }
    rep.rho = est;
    rep.iters = it;
    rep.converged = converged;
    rep.method = "power";

    if (n <= detail::kQrCrossCheckDim) {
        auto eig = full_eigenvalues(j);
        double rho_qr = eig.empty() ? 0.0 : std::abs(eig.front());
        if (!converged) {
            rep.rho = rho_qr;
            rep.residual = std::fabs(est - rho_qr);
            rep.method = "qr";
            rep.converged = true;
        } else {
            rep.residual = std::fabs(rep.rho - rho_qr);
            rep.method = "power+qr";
            // prefer the direct eigensolver when the two routes disagree
            // beyond the power-iteration tolerance
            if (rep.residual > 1e-6 * std::max(1.0, rho_qr)) {
                rep.rho = rho_qr;
                rep.method = "qr";
            }
        }
    }

    // Gershgorin-type bound: rho(J) cannot exceed the max absolute row sum
    double bound = j.max_row_sum();
    if (rep.rho > bound * (1.0 + 1e-8) + 1e-12)
        throw std::logic_error("spectral_radius: estimate exceeds row-sum bound");
    return rep;
}

} // namespace amem
