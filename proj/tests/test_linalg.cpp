#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <vector>

#include "amem/linalg.hpp"
#include "amem/rng.hpp"

using namespace amem;

namespace {

Mat random_mat(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    for (double& v : m.data) v = rng.uniform(-scale, scale);
    return m;
}

// independent oracle: plain triple loop, same accumulation order as the contract
Mat matmul_oracle(const Mat& a, const Mat& b) {
    Mat out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
            out.at(i, j) = s;
        }
    return out;
}

// independent oracle: determinant via LU with partial pivoting
double det_lu(Mat a) {
    const std::size_t n = a.rows;
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a.at(r, col)) > std::fabs(a.at(piv, col))) piv = r;
        if (a.at(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a.at(piv, c), a.at(col, c));
            det = -det;
        }
        det *= a.at(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a.at(r, col) / a.at(col, col);
            for (std::size_t c = col; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
        }
    }
    return det;
}

// independent oracle: characteristic polynomial by Faddeev-LeVerrier, roots
// by Durand-Kerner iteration (no QR involved)
std::vector<std::complex<double>> eig_charpoly_oracle(const Mat& a) {
    const std::size_t n = a.rows;
    // c[0] = 1 leading coefficient; p(x) = sum c[k] x^{n-k}
    std::vector<double> c(n + 1, 0.0);
    c[0] = 1.0;
    Mat m = Mat::identity(n);
    for (std::size_t k = 1; k <= n; ++k) {
        m = matmul(a, m);
        double tr = 0.0;
        for (std::size_t i = 0; i < n; ++i) tr += m.at(i, i);
        c[k] = -tr / static_cast<double>(k);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) += c[k];
    }
    std::vector<std::complex<double>> roots(n);
    std::complex<double> seed(0.4, 0.9);
    std::complex<double> p(1.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        p *= seed;
        roots[i] = p;
    }
    for (int iter = 0; iter < 500; ++iter) {
        double move = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::complex<double> val(c[0], 0.0);
            for (std::size_t k = 1; k <= n; ++k) val = val * roots[i] + c[k];
            std::complex<double> denom(1.0, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) denom *= roots[i] - roots[j];
            std::complex<double> delta = val / denom;
            roots[i] -= delta;
            move = std::max(move, std::abs(delta));
        }
        if (move < 1e-14) break;
    }
    return roots;
}

} // namespace

TEST_CASE("matmul identity and hand-checked product") {
    Rng rng(7);
    Mat m = random_mat(3, 3, rng);
    Mat r = matmul(Mat::identity(3), m);
    for (std::size_t i = 0; i < 9; ++i) REQUIRE(r.data[i] == m.data[i]);

    Mat a(2, 2);
    a.data = {1, 2, 3, 4};
    Mat b(2, 1);
    b.data = {1, 1};
    Mat p = matmul(a, b);
    REQUIRE(p.at(0, 0) == 3.0);
    REQUIRE(p.at(1, 0) == 7.0);
}

TEST_CASE("matmul equals naive oracle to 0 ulp") {
    Rng rng(11);
    Mat a = random_mat(5, 5, rng);
    Mat b = random_mat(5, 5, rng);
    Mat got = matmul(a, b);
    Mat want = matmul_oracle(a, b);
    for (std::size_t i = 0; i < got.data.size(); ++i) REQUIRE(got.data[i] == want.data[i]);
}

TEST_CASE("matmul rejects dimension mismatch") {
    Mat a(2, 3), b(2, 2);
    REQUIRE_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul associativity on random triples") {
    Rng rng(13);
    for (int t = 0; t < 20; ++t) {
        Mat a = random_mat(4, 6, rng);
        Mat b = random_mat(6, 3, rng);
        Mat c = random_mat(3, 5, rng);
        Mat left = matmul(matmul(a, b), c);
        Mat right = matmul(a, matmul(b, c));
        double scale = left.frobenius();
        for (std::size_t i = 0; i < left.data.size(); ++i)
            REQUIRE(std::fabs(left.data[i] - right.data[i]) < 1e-10 * std::max(1.0, scale));
    }
}

TEST_CASE("spectral radius of diagonal matrix") {
    Mat d(2, 2);
    d.at(0, 0) = 0.5;
    d.at(1, 1) = -0.9;
    auto rep = spectral_radius(d, 1e-10);
    REQUIRE(std::fabs(rep.rho - 0.9) < 1e-8);
}

TEST_CASE("spectral radius of rank-1 matrix is |c|") {
    Rng rng(17);
    for (double c : {2.5, -0.263, 0.0}) {
        Vec x(6);
        for (std::size_t i = 0; i < 6; ++i) x[i] = rng.normal();
        double nx = x.norm2();
        for (std::size_t i = 0; i < 6; ++i) x[i] /= nx;
        Mat j = outer(x, x);
        for (double& v : j.data) v *= c;
        auto rep = spectral_radius(j);
        REQUIRE(std::fabs(rep.rho - std::fabs(c)) < 1e-8);
    }
}

TEST_CASE("rank-1 matrix has exactly one nonzero eigenvalue equal to c") {
    Rng rng(19);
    Vec x(5);
    for (std::size_t i = 0; i < 5; ++i) x[i] = rng.normal();
    double nx = x.norm2();
    for (std::size_t i = 0; i < 5; ++i) x[i] /= nx;
    const double c = -1.7;
    Mat j = outer(x, x);
    for (double& v : j.data) v *= c;
    auto eig = full_eigenvalues(j);
    REQUIRE(std::fabs(eig[0].real() - c) < 1e-10);
    REQUIRE(std::fabs(eig[0].imag()) < 1e-10);
    for (std::size_t i = 1; i < eig.size(); ++i) REQUIRE(std::abs(eig[i]) < 1e-10);
}

TEST_CASE("spectral radius matches characteristic-polynomial oracle on random 8x8") {
    Rng rng(23);
    for (int t = 0; t < 10; ++t) {
        Mat m = random_mat(8, 8, rng);
        auto roots = eig_charpoly_oracle(m);
        double want = 0.0;
        for (auto& z : roots) want = std::max(want, std::abs(z));
        auto rep = spectral_radius(m, 1e-12, 20000);
        REQUIRE(std::fabs(rep.rho - want) < 1e-8 * std::max(1.0, want));
    }
}

TEST_CASE("spectral radius rejects bad input") {
    Mat m(3, 2);
    REQUIRE_THROWS_AS(spectral_radius(m), std::invalid_argument);
    Mat sq(2, 2);
    REQUIRE_THROWS_AS(spectral_radius(sq, 0.0), std::invalid_argument);
}

TEST_CASE("full eigenvalues of a 90 degree rotation are +-i") {
    Mat r(2, 2);
    r.at(0, 1) = -1.0;
    r.at(1, 0) = 1.0;
    auto eig = full_eigenvalues(r);
    REQUIRE(std::fabs(eig[0].real()) < 1e-12);
    REQUIRE(std::fabs(std::fabs(eig[0].imag()) - 1.0) < 1e-12);
    REQUIRE(std::fabs(eig[0].imag() + eig[1].imag()) < 1e-12);
}

TEST_CASE("full eigenvalues of upper-triangular matrix are the diagonal") {
    Mat u(4, 4);
    double diag[4] = {3.0, -1.5, 0.25, 2.0};
    Rng rng(29);
    for (std::size_t i = 0; i < 4; ++i) {
        u.at(i, i) = diag[i];
        for (std::size_t j = i + 1; j < 4; ++j) u.at(i, j) = rng.uniform(-2, 2);
    }
    auto eig = full_eigenvalues(u);
    std::vector<double> got;
    for (auto& z : eig) {
        REQUIRE(std::fabs(z.imag()) < 1e-10);
        got.push_back(z.real());
    }
    std::sort(got.begin(), got.end());
    std::vector<double> want(diag, diag + 4);
    std::sort(want.begin(), want.end());
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(std::fabs(got[i] - want[i]) < 1e-10);
}

TEST_CASE("product of eigenvalues equals LU determinant") {
    Rng rng(31);
    for (int t = 0; t < 10; ++t) {
        Mat m = random_mat(6, 6, rng);
        auto eig = full_eigenvalues(m);
        std::complex<double> prod(1.0, 0.0);
        for (auto& z : eig) prod *= z;
        double want = det_lu(m);
        REQUIRE(std::fabs(prod.real() - want) < 1e-8 * std::max(1.0, std::fabs(want)));
        REQUIRE(std::fabs(prod.imag()) < 1e-8);
    }
}

TEST_CASE("power iteration handles dominant complex pair via growth rate") {
    // companion-style matrix with eigenvalues 0.95 e^{+-i theta} and 0.3
    Mat m(3, 3);
    double rho = 0.95, theta = 0.7;
    m.at(0, 0) = rho * std::cos(theta);
    m.at(0, 1) = -rho * std::sin(theta);
    m.at(1, 0) = rho * std::sin(theta);
    m.at(1, 1) = rho * std::cos(theta);
    m.at(2, 2) = 0.3;
    auto rep = spectral_radius(m, 1e-10, 10000);
    REQUIRE(std::fabs(rep.rho - 0.95) < 1e-7);
}

TEST_CASE("spectral radius report carries method and residual") {
    Rng rng(37);
    Mat m = random_mat(10, 10, rng, 0.4);
    auto rep = spectral_radius(m);
    REQUIRE((rep.method == "power+qr" || rep.method == "qr"));
    REQUIRE(rep.residual < 1e-6 * std::max(1.0, rep.rho) + 1e-9);
}
