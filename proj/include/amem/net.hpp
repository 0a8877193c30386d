#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "amem/linalg.hpp"
#include "amem/nonlin.hpp"

namespace amem {

// Fully connected encoder f(z) = W_d phi(W_{d-1} ... phi(W_1 z) ...), no bias
// terms. dims = k_0..k_d with k_d = k_0; weights[i] maps layer i to i+1 and
// has shape dims[i+1] x dims[i].
struct Net {
    std::vector<std::size_t> dims;
    std::vector<Mat> weights;
    Nonlin nonlin;

    std::size_t depth() const { return weights.size(); }
    std::size_t input_dim() const { return dims.empty() ? 0 : dims.front(); }

    void validate() const {
        if (dims.size() < 2) throw std::invalid_argument("net: need at least one layer");
        if (dims.front() != dims.back())
            throw std::invalid_argument("net: output dim must equal input dim");
        if (weights.size() + 1 != dims.size())
            throw std::invalid_argument("net: weights/dims size mismatch");
        for (std::size_t i = 0; i < weights.size(); ++i)
            if (weights[i].rows != dims[i + 1] || weights[i].cols != dims[i])
                throw std::invalid_argument("net: weight " + std::to_string(i) + " has wrong shape");
    }

    static Net zeros(std::vector<std::size_t> dims_, Nonlin nl) {
        Net n;
        n.dims = std::move(dims_);
        n.nonlin = nl;
        for (std::size_t i = 0; i + 1 < n.dims.size(); ++i)
            n.weights.emplace_back(n.dims[i + 1], n.dims[i]);
        n.validate();
        return n;
    }
};

namespace kernels {

// y = W x. Rows advance in blocks of four independent accumulator chains;
// within each row the accumulation stays left-to-right, so results match the
// naive loop bit for bit while hiding FMA latency.
inline void matvec_into(const Mat& w, const double* x, double* y) {
    const std::size_t rows = w.rows, cols = w.cols;
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
        const double* p0 = w.row(r);
        const double* p1 = w.row(r + 1);
        const double* p2 = w.row(r + 2);
        const double* p3 = w.row(r + 3);
        double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            double xc = x[c];
            s0 += p0[c] * xc;
            s1 += p1[c] * xc;
            s2 += p2[c] * xc;
            s3 += p3[c] * xc;
        }
        y[r] = s0;
        y[r + 1] = s1;
        y[r + 2] = s2;
        y[r + 3] = s3;
    }
    for (; r < rows; ++r) {
        const double* p = w.row(r);
        double s = 0;
        for (std::size_t c = 0; c < cols; ++c) s += p[c] * x[c];
        y[r] = s;
    }
}

// y += W^T d, as a fixed-order sweep of scaled rows
inline void matvec_transpose_accum(const Mat& w, const double* d, double* y) {
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double dr = d[r];
        const double* p = w.row(r);
        for (std::size_t c = 0; c < w.cols; ++c) y[c] += dr * p[c];
    }
}

// G += d h^T
inline void outer_accum(Mat& g, const double* d, const double* h) {
    for (std::size_t r = 0; r < g.rows; ++r) {
        const double dr = d[r];
        double* p = g.row(r);
        for (std::size_t c = 0; c < g.cols; ++c) p[c] += dr * h[c];
    }
}

// out = A * B with a vectorizable k-outer accumulation; deterministic order
inline Mat matmul_fast(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul_fast: dimension mismatch");
    Mat out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* orow = out.row(i);
        const double* arow = a.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

} // namespace kernels

// Forward pass with retained pre-activations (what backward and the input
// Jacobian need).
struct ForwardTrace {
    std::vector<Vec> preact; // hidden pre-activations W_i h_{i-1}, one per hidden layer
    std::vector<Vec> hidden; // phi(preact)
    Vec output;
};

inline ForwardTrace forward(const Net& net, const Vec& z) {
    if (z.dim() != net.input_dim()) throw std::invalid_argument("forward: input dim mismatch");
    ForwardTrace t;
    const std::size_t d = net.depth();
    t.preact.reserve(d - 1);
    t.hidden.reserve(d - 1);
    const Vec* cur = &z;
    for (std::size_t i = 0; i + 1 < d; ++i) {
        Vec pre(net.weights[i].rows);
        kernels::matvec_into(net.weights[i], cur->data.data(), pre.data.data());
        if (!pre.is_finite())
            throw std::runtime_error("forward: non-finite activation at layer " + std::to_string(i));
        Vec act(pre.dim());
        for (std::size_t r = 0; r < pre.dim(); ++r) act[r] = net.nonlin.phi(pre[r]);
        if (!act.is_finite())
            throw std::runtime_error("forward: non-finite activation at layer " + std::to_string(i));
        t.preact.push_back(std::move(pre));
        t.hidden.push_back(std::move(act));
        cur = &t.hidden.back();
    }
    t.output = Vec(net.weights[d - 1].rows);
    kernels::matvec_into(net.weights[d - 1], cur->data.data(), t.output.data.data());
    if (!t.output.is_finite())
        throw std::runtime_error("forward: non-finite activation at layer " + std::to_string(d - 1));
    return t;
}

inline Vec apply(const Net& net, const Vec& z) { return forward(net, z).output; }

struct LossGrads {
    std::vector<Mat> grads; // same shapes as net.weights
    double loss = 0.0;
};

// Gradients of 1/2 sum_i ||target_i - f(input_i)||^2 w.r.t. every weight
// matrix, by reverse accumulation. Loss is summed over the batch, not
// averaged, matching the update equations the closed-form analysis uses.
inline LossGrads loss_grads(const Net& net, const std::vector<std::pair<Vec, Vec>>& batch) {
    if (batch.empty()) throw std::invalid_argument("loss_grads: empty batch");
    LossGrads out;
    out.grads.reserve(net.depth());
    for (const Mat& w : net.weights) out.grads.emplace_back(w.rows, w.cols);

    const std::size_t d = net.depth();
    for (const auto& [input, target] : batch) {
        if (target.dim() != net.dims.back())
            throw std::invalid_argument("loss_grads: target dim mismatch");
        ForwardTrace t = forward(net, input);
        Vec delta(t.output.dim());
        for (std::size_t i = 0; i < delta.dim(); ++i) {
            double r = t.output[i] - target[i];
            delta[i] = r;
            out.loss += 0.5 * r * r;
        }
        for (std::size_t layer = d; layer-- > 0;) {
            const double* src = layer == 0 ? input.data.data() : t.hidden[layer - 1].data.data();
            kernels::outer_accum(out.grads[layer], delta.data.data(), src);
            if (layer == 0) break;
            Vec back(net.weights[layer].cols, 0.0);
            kernels::matvec_transpose_accum(net.weights[layer], delta.data.data(), back.data.data());
            const Vec& pre = t.preact[layer - 1];
            for (std::size_t r = 0; r < back.dim(); ++r) back[r] *= net.nonlin.dphi(pre[r]);
            delta = std::move(back);
        }
    }
    return out;
}

// Exact input Jacobian k0 x k0: W_d diag(phi'(z_{d-1})) ... diag(phi'(z_1)) W_1
// from the retained pre-activations. kink_hit reports a relu/leaky pre-activation
// of exactly 0, where the subgradient convention (left value) was used.
inline Mat jacobian(const Net& net, const Vec& z, bool* kink_hit = nullptr) {
    ForwardTrace t = forward(net, z);
    if (kink_hit) *kink_hit = false;
    Mat acc = net.weights[0];
    for (std::size_t layer = 1; layer < net.depth(); ++layer) {
        const Vec& pre = t.preact[layer - 1];
        for (std::size_t r = 0; r < acc.rows; ++r) {
            if (kink_hit && !net.nonlin.smooth() && pre[r] == 0.0) *kink_hit = true;
            const double dp = net.nonlin.dphi(pre[r]);
            double* row = acc.row(r);
            for (std::size_t c = 0; c < acc.cols; ++c) row[c] *= dp;
        }
        acc = kernels::matmul_fast(net.weights[layer], acc);
    }
    return acc;
}

} // namespace amem
