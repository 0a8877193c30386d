#pragma once

// shared helpers for the test suites: random nets, finite-difference oracles,
// small dataset builders

#include <cmath>
#include <utility>
#include <vector>

#include "amem/net.hpp"
#include "amem/optim.hpp"
#include "amem/rng.hpp"

namespace testsup {

using namespace amem;

inline Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
    return v;
}

inline Vec random_unit(std::size_t n, Rng& rng) {
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal();
    double nn = v.norm2();
    for (std::size_t i = 0; i < n; ++i) v[i] /= nn;
    return v;
}

inline Net random_net(const std::vector<std::size_t>& dims, Nonlin nl, Rng& rng,
                      double scale = 0.5) {
    Net net = Net::zeros(dims, nl);
    for (Mat& w : net.weights)
        for (double& v : w.data) v = rng.uniform(-scale, scale);
    return net;
}

// central finite differences of f at z, column per input coordinate
inline Mat jacobian_fd(const Net& net, const Vec& z, double h = 1e-6) {
    const std::size_t n = z.dim();
    Mat j(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        Vec zp = z, zm = z;
        zp[c] += h;
        zm[c] -= h;
        Vec fp = apply(net, zp);
        Vec fm = apply(net, zm);
        for (std::size_t r = 0; r < n; ++r) j.at(r, c) = (fp[r] - fm[r]) / (2.0 * h);
    }
    return j;
}

inline double batch_loss(const Net& net, const std::vector<std::pair<Vec, Vec>>& batch) {
    double loss = 0.0;
    for (const auto& [in, target] : batch) {
        Vec out = apply(net, in);
        for (std::size_t i = 0; i < out.dim(); ++i) {
            double r = out[i] - target[i];
            loss += 0.5 * r * r;
        }
    }
    return loss;
}

// central finite differences of the scalar loss w.r.t. every weight entry
inline std::vector<Mat> grads_fd(Net net, const std::vector<std::pair<Vec, Vec>>& batch,
                                 double h = 1e-6) {
    std::vector<Mat> out;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        Mat g(net.weights[l].rows, net.weights[l].cols);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            double saved = net.weights[l].data[i];
            net.weights[l].data[i] = saved + h;
            double lp = batch_loss(net, batch);
            net.weights[l].data[i] = saved - h;
            double lm = batch_loss(net, batch);
            net.weights[l].data[i] = saved;
            g.data[i] = (lp - lm) / (2.0 * h);
        }
        out.push_back(std::move(g));
    }
    return out;
}

// max |a-b| over entries, relative to the largest entry magnitude
inline double max_rel_err(const Mat& a, const Mat& b) {
    double scale = 0.0;
    for (double v : a.data) scale = std::max(scale, std::fabs(v));
    for (double v : b.data) scale = std::max(scale, std::fabs(v));
    double err = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        err = std::max(err, std::fabs(a.data[i] - b.data[i]));
    return err / std::max(1.0, scale);
}

inline std::vector<Vec> ring_points(std::size_t n, double radius = 0.8) {
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < n; ++i) {
        double th = 2.0 * 3.14159265358979323846 * static_cast<double>(i) / static_cast<double>(n);
        Vec p(2);
        p[0] = radius * std::cos(th);
        p[1] = radius * std::sin(th);
        pts.push_back(std::move(p));
    }
    return pts;
}

} // namespace testsup
