#include <catch2/catch_amalgamated.hpp>

#include "amem/net.hpp"
#include "amem/optim.hpp"
#include "support.hpp"

using namespace amem;
using namespace testsup;

namespace {

// straightforward re-evaluation with the plain linalg routines
Vec forward_oracle(const Net& net, const Vec& z) {
    Vec h = z;
    for (std::size_t i = 0; i < net.depth(); ++i) {
        h = matvec(net.weights[i], h);
        if (i + 1 < net.depth())
            for (std::size_t r = 0; r < h.dim(); ++r) h[r] = net.nonlin.phi(h[r]);
    }
    return h;
}

} // namespace

TEST_CASE("identity network reproduces its input") {
    Net net = Net::zeros({3, 3, 3}, Nonlin::make(NonlinKind::identity));
    net.weights[0] = Mat::identity(3);
    net.weights[1] = Mat::identity(3);
    Vec z{0.3, -1.2, 2.0};
    Vec out = apply(net, z);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(out[i] == z[i]);
}

TEST_CASE("rank-1 one-hidden net evaluates to x (u^T phi(v)) at x") {
    Rng rng(41);
    const std::size_t k0 = 5, k = 3;
    Vec x = random_unit(k0, rng);
    Vec u = random_vec(k, rng), v = random_vec(k, rng);
    auto scheme = InitScheme::rank1(x, u, v);
    Net net = init_net({k0, k, k0}, scheme, Nonlin::make(NonlinKind::sigmoid));
    Vec out = apply(net, x);
    double coeff = 0.0;
    for (std::size_t i = 0; i < k; ++i) coeff += u[i] * net.nonlin.phi(v[i]);
    for (std::size_t i = 0; i < k0; ++i)
        REQUIRE(std::fabs(out[i] - coeff * x[i]) < 1e-12 * std::max(1.0, std::fabs(coeff)));
}

TEST_CASE("forward matches independent recomputation to 0 ulp") {
    Rng rng(43);
    Net net = random_net({4, 7, 6, 4}, Nonlin::make(NonlinKind::swish), rng);
    for (int t = 0; t < 5; ++t) {
        Vec z = random_vec(4, rng);
        Vec got = apply(net, z);
        Vec want = forward_oracle(net, z);
        for (std::size_t i = 0; i < 4; ++i) REQUIRE(got[i] == want[i]);
    }
}

TEST_CASE("forward is deterministic and validates dimensions") {
    Rng rng(47);
    Net net = random_net({4, 8, 4}, Nonlin::make(NonlinKind::cosid), rng);
    Vec z = random_vec(4, rng);
    Vec a = apply(net, z);
    Vec b = apply(net, z);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(a[i] == b[i]);
    Vec bad(5);
    REQUIRE_THROWS_AS(apply(net, bad), std::invalid_argument);
}

TEST_CASE("forward reports the layer of a non-finite activation") {
    Net net = Net::zeros({2, 2, 2}, Nonlin::make(NonlinKind::exp2));
    net.weights[0].at(0, 0) = 500.0; // e^{2*500} overflows
    net.weights[1] = Mat::identity(2);
    Vec z{1.0, 0.0};
    try {
        apply(net, z);
        FAIL("expected overflow");
    } catch (const std::runtime_error& e) {
        REQUIRE(std::string(e.what()).find("layer 0") != std::string::npos);
    }
}

TEST_CASE("zero-residual batch gives zero gradients") {
    Net net = Net::zeros({3, 3, 3}, Nonlin::make(NonlinKind::identity));
    net.weights[0] = Mat::identity(3);
    net.weights[1] = Mat::identity(3);
    Rng rng(53);
    std::vector<std::pair<Vec, Vec>> batch;
    for (int i = 0; i < 4; ++i) {
        Vec x = random_vec(3, rng);
        batch.emplace_back(x, x);
    }
    LossGrads lg = loss_grads(net, batch);
    REQUIRE(lg.loss == 0.0);
    for (const Mat& g : lg.grads)
        for (double v : g.data) REQUIRE(v == 0.0);
}

TEST_CASE("one-hidden gradients match the closed-form update expressions") {
    Rng rng(59);
    const std::size_t k0 = 4, k = 3;
    Vec x = random_unit(k0, rng);
    Vec u = random_vec(k, rng), v = random_vec(k, rng);
    Net net = init_net({k0, k, k0}, InitScheme::rank1(x, u, v), Nonlin::make(NonlinKind::sigmoid));
    const Mat& B = net.weights[0]; // inner
    const Mat& A = net.weights[1]; // outer

    LossGrads lg = loss_grads(net, {{x, x}});

    // independent expressions: grad_A = (f - x) phi(Bx)^T,
    // grad_B = diag(phi'(Bx)) A^T (f - x) x^T
    Vec bx = matvec(B, x);
    Vec phib(bx.dim()), dphib(bx.dim());
    for (std::size_t i = 0; i < bx.dim(); ++i) {
        phib[i] = net.nonlin.phi(bx[i]);
        dphib[i] = net.nonlin.dphi(bx[i]);
    }
    Vec f = matvec(A, phib);
    Vec resid = f - x;
    Mat gA = outer(resid, phib);
    Vec atr = matvec(transpose(A), resid);
    Vec scaled(atr.dim());
    for (std::size_t i = 0; i < atr.dim(); ++i) scaled[i] = dphib[i] * atr[i];
    Mat gB = outer(scaled, x);

    for (std::size_t i = 0; i < gA.data.size(); ++i)
        REQUIRE(std::fabs(lg.grads[1].data[i] - gA.data[i]) < 1e-12);
    for (std::size_t i = 0; i < gB.data.size(); ++i)
        REQUIRE(std::fabs(lg.grads[0].data[i] - gB.data[i]) < 1e-12);
}

TEST_CASE("loss gradients match finite differences on random nets") {
    Rng rng(61);
    for (int t = 0; t < 6; ++t) {
        Net net = random_net({3, 6, 5, 3}, Nonlin::make(NonlinKind::sigmoid), rng);
        std::vector<std::pair<Vec, Vec>> batch;
        for (int i = 0; i < 3; ++i)
            batch.emplace_back(random_vec(3, rng), random_vec(3, rng));
        LossGrads lg = loss_grads(net, batch);
        auto fd = grads_fd(net, batch);
        for (std::size_t l = 0; l < fd.size(); ++l)
            REQUIRE(max_rel_err(lg.grads[l], fd[l]) < 1e-6);
    }
}

TEST_CASE("loss_grads rejects an empty batch") {
    Rng rng(67);
    Net net = random_net({2, 3, 2}, Nonlin::make(NonlinKind::relu), rng);
    REQUIRE_THROWS_AS(loss_grads(net, {}), std::invalid_argument);
}

TEST_CASE("jacobian with identity nonlinearity is the weight product") {
    Rng rng(71);
    Net net = random_net({3, 5, 3}, Nonlin::make(NonlinKind::identity), rng);
    Mat j = jacobian(net, random_vec(3, rng));
    Mat want = matmul(net.weights[1], net.weights[0]);
    for (std::size_t i = 0; i < j.data.size(); ++i)
        REQUIRE(std::fabs(j.data[i] - want.data[i]) < 1e-14);
}

TEST_CASE("jacobian of a rank-1 net at x matches x a^T(phi'(b) o b) x^T") {
    Rng rng(73);
    const std::size_t k0 = 4, k = 2;
    Vec x = random_unit(k0, rng);
    Vec u = random_vec(k, rng), v = random_vec(k, rng);
    Net net = init_net({k0, k, k0}, InitScheme::rank1(x, u, v), Nonlin::make(NonlinKind::sigmoid));
    Mat j = jacobian(net, x);
    double coeff = 0.0;
    for (std::size_t i = 0; i < k; ++i) coeff += u[i] * net.nonlin.dphi(v[i]) * v[i];
    Mat want = outer(x, x);
    for (double& w : want.data) w *= coeff;
    for (std::size_t i = 0; i < j.data.size(); ++i)
        REQUIRE(std::fabs(j.data[i] - want.data[i]) < 1e-11);
}

TEST_CASE("jacobian matches finite differences on random smooth nets") {
    Rng rng(79);
    NonlinKind kinds[] = {NonlinKind::sigmoid, NonlinKind::swish, NonlinKind::cosid,
                          NonlinKind::sinusoid};
    for (int t = 0; t < 12; ++t) {
        Net net = random_net({4, 8, 6, 4}, Nonlin::make(kinds[t % 4]), rng);
        Vec z = random_vec(4, rng);
        Mat j = jacobian(net, z);
        Mat fd = jacobian_fd(net, z);
        REQUIRE(max_rel_err(j, fd) < 1e-6);
    }
}

TEST_CASE("relu jacobian flags a pre-activation exactly at the kink") {
    Net net = Net::zeros({2, 2, 2}, Nonlin::make(NonlinKind::relu));
    net.weights[0] = Mat::identity(2);
    net.weights[1] = Mat::identity(2);
    bool kink = false;
    jacobian(net, Vec{0.0, 1.0}, &kink);
    REQUIRE(kink);
    kink = false;
    jacobian(net, Vec{0.5, 1.0}, &kink);
    REQUIRE_FALSE(kink);
}
