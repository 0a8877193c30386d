#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "amem/net.hpp"
#include "amem/rng.hpp"

namespace amem {

// Training objective: a partition of the example indices into ordered cycles.
// Autoencoding is the special case of all-singleton cycles; a sequence target
// of x^(i) inside a cycle is its successor x^((i mod n)+1).
struct Objective {
    enum class Kind { autoencode, sequence, multi_sequence };
    Kind kind = Kind::autoencode;
    std::vector<std::vector<std::size_t>> cycles;

    static Objective autoencode(std::size_t n) {
        Objective o;
        o.kind = Kind::autoencode;
        for (std::size_t i = 0; i < n; ++i) o.cycles.push_back({i});
        return o;
    }

    static Objective sequence(std::size_t n) {
        Objective o;
        o.kind = Kind::sequence;
        std::vector<std::size_t> c(n);
        for (std::size_t i = 0; i < n; ++i) c[i] = i;
        o.cycles.push_back(std::move(c));
        return o;
    }

    static Objective multi_sequence(std::vector<std::vector<std::size_t>> cycles) {
        Objective o;
        o.kind = Kind::multi_sequence;
        o.cycles = std::move(cycles);
        return o;
    }

    // successor map over all n examples; throws unless the cycles partition 0..n-1
    std::vector<std::size_t> target_index(std::size_t n) const {
        std::vector<std::size_t> succ(n, n);
        std::size_t seen = 0;
        for (const auto& cyc : cycles) {
            for (std::size_t j = 0; j < cyc.size(); ++j) {
                std::size_t i = cyc[j];
                if (i >= n || succ[i] != n)
                    throw std::invalid_argument("objective: cycles must partition example indices");
                succ[i] = cyc[(j + 1) % cyc.size()];
                ++seen;
            }
        }
        if (seen != n) throw std::invalid_argument("objective: cycles must cover all examples");
        return succ;
    }

    std::vector<std::pair<Vec, Vec>> make_batch(const std::vector<Vec>& examples) const {
        auto succ = target_index(examples.size());
        std::vector<std::pair<Vec, Vec>> batch;
        batch.reserve(examples.size());
        for (std::size_t i = 0; i < examples.size(); ++i)
            batch.emplace_back(examples[i], examples[succ[i]]);
        return batch;
    }
};

struct InitScheme {
    enum class Kind { uniform, rank1, rank1_equal, deep_rank1_equal, span_rank1 };
    Kind kind = Kind::uniform;

    double a = 0.1; // uniform half-width

    // rank-1 family: anchor example(s), unit norm required
    Vec x;                  // input-side anchor
    Vec x_out;              // output-side anchor; empty means same as x
    Vec u0, v0;             // rank1 coefficient vectors (outer / inner)
    double u0_scalar = 1.0; // rank1_equal / deep chain scalars
    double v0_scalar = 1.0;
    double a0 = 1.0, b0 = 1.0;
    std::vector<double> w0; // deep interior scalars, one per interior layer

    std::vector<Vec> xs, a0s, b0s; // span_rank1

    static InitScheme uniform(double half_width) {
        InitScheme s;
        s.kind = Kind::uniform;
        s.a = half_width;
        return s;
    }
    static InitScheme rank1(Vec x, Vec u0, Vec v0) {
        InitScheme s;
        s.kind = Kind::rank1;
        s.x = std::move(x);
        s.u0 = std::move(u0);
        s.v0 = std::move(v0);
        return s;
    }
    static InitScheme rank1_equal(Vec x, double u0, double v0) {
        InitScheme s;
        s.kind = Kind::rank1_equal;
        s.x = std::move(x);
        s.u0_scalar = u0;
        s.v0_scalar = v0;
        return s;
    }
    static InitScheme deep_rank1_equal(Vec x, double a0, double b0, std::vector<double> w0) {
        InitScheme s;
        s.kind = Kind::deep_rank1_equal;
        s.x = std::move(x);
        s.a0 = a0;
        s.b0 = b0;
        s.w0 = std::move(w0);
        return s;
    }
    static InitScheme span_rank1(std::vector<Vec> xs, std::vector<Vec> a0s, std::vector<Vec> b0s) {
        InitScheme s;
        s.kind = Kind::span_rank1;
        s.xs = std::move(xs);
        s.a0s = std::move(a0s);
        s.b0s = std::move(b0s);
        return s;
    }
};

namespace detail {
inline void require_unit(const Vec& x, const char* what) {
    if (std::fabs(x.norm2() - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(what) + ": anchor must have unit norm");
}
} // namespace detail

// Deterministic weight construction for a given seed.
inline Net init_net(const std::vector<std::size_t>& dims, const InitScheme& scheme, Nonlin nonlin,
                    std::uint64_t seed = 0) {
    Net net = Net::zeros(dims, nonlin);
    const std::size_t d = net.depth();
    switch (scheme.kind) {
    case InitScheme::Kind::uniform: {
        Rng rng(derive_seed(seed, 0xA11));
        for (Mat& w : net.weights)
            for (double& v : w.data) v = rng.uniform(-scheme.a, scheme.a);
        break;
    }
    case InitScheme::Kind::rank1:
    case InitScheme::Kind::rank1_equal: {
        if (d != 2) throw std::invalid_argument("init: rank1 schemes require one hidden layer");
        const Vec& xin = scheme.x;
        const Vec& xout = scheme.x_out.dim() ? scheme.x_out : scheme.x;
        detail::require_unit(xin, "init rank1");
        detail::require_unit(xout, "init rank1");
        if (xin.dim() != dims[0] || xout.dim() != dims[0])
            throw std::invalid_argument("init: anchor dim mismatch");
        const std::size_t k = dims[1];
        Vec u0 = scheme.u0, v0 = scheme.v0;
        if (scheme.kind == InitScheme::Kind::rank1_equal) {
            u0 = Vec(k, scheme.u0_scalar);
            v0 = Vec(k, scheme.v0_scalar);
        }
        if (u0.dim() != k || v0.dim() != k)
            throw std::invalid_argument("init: rank1 coefficient dim mismatch");
        // inner W = v0 x^T, outer W = x u0^T
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < dims[0]; ++c) net.weights[0].at(r, c) = v0[r] * xin[c];
        for (std::size_t r = 0; r < dims[0]; ++r)
            for (std::size_t c = 0; c < k; ++c) net.weights[1].at(r, c) = xout[r] * u0[c];
        break;
    }
    case InitScheme::Kind::deep_rank1_equal: {
        if (d < 2) throw std::invalid_argument("init: deep scheme requires >= 1 hidden layer");
        if (scheme.w0.size() != d - 2)
            throw std::invalid_argument("init: need one interior scalar per interior layer");
        detail::require_unit(scheme.x, "init deep_rank1_equal");
        if (scheme.x.dim() != dims[0]) throw std::invalid_argument("init: anchor dim mismatch");
        for (std::size_t r = 0; r < dims[1]; ++r)
            for (std::size_t c = 0; c < dims[0]; ++c)
                net.weights[0].at(r, c) = scheme.b0 * scheme.x[c];
        for (std::size_t i = 1; i + 1 < d; ++i)
            for (double& v : net.weights[i].data) v = scheme.w0[i - 1];
        for (std::size_t r = 0; r < dims[0]; ++r)
            for (std::size_t c = 0; c < dims[d - 1]; ++c)
                net.weights[d - 1].at(r, c) = scheme.x[r] * scheme.a0;
        break;
    }
    case InitScheme::Kind::span_rank1: {
        if (d != 2) throw std::invalid_argument("init: span_rank1 requires one hidden layer");
        if (scheme.xs.empty() || scheme.xs.size() != scheme.a0s.size() ||
            scheme.xs.size() != scheme.b0s.size())
            throw std::invalid_argument("init: span_rank1 needs matching example/coefficient lists");
        const std::size_t k = dims[1];
        for (std::size_t e = 0; e < scheme.xs.size(); ++e) {
            const Vec& xe = scheme.xs[e];
            if (xe.dim() != dims[0] || scheme.a0s[e].dim() != k || scheme.b0s[e].dim() != k)
                throw std::invalid_argument("init: span_rank1 dim mismatch");
            for (std::size_t r = 0; r < k; ++r)
                for (std::size_t c = 0; c < dims[0]; ++c)
                    net.weights[0].at(r, c) += scheme.b0s[e][r] * xe[c];
            for (std::size_t r = 0; r < dims[0]; ++r)
                for (std::size_t c = 0; c < k; ++c)
                    net.weights[1].at(r, c) += xe[r] * scheme.a0s[e][c];
        }
        break;
    }
    }
    return net;
}

struct TrainCfg {
    enum class Opt { gd, gd_momentum, gd_momentum_wd, rmsprop, adam };
    Opt opt = Opt::adam;
    double lr = 1e-4;
    double momentum = 0.009; // gd_momentum / gd_momentum_wd
    double weight_decay = 0.0001;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8; // adam / rmsprop
    std::uint64_t seed = 0;
    double loss_threshold = 1e-8;
    std::size_t max_epochs = 1000000;
    std::size_t trace_every = 1000;

    static Opt parse_opt(const std::string& s) {
        if (s == "gd") return Opt::gd;
        if (s == "gd_momentum") return Opt::gd_momentum;
        if (s == "gd_momentum_wd") return Opt::gd_momentum_wd;
        if (s == "rmsprop") return Opt::rmsprop;
        if (s == "adam") return Opt::adam;
        throw std::invalid_argument("unknown optimizer: " + s);
    }
    static std::string opt_name(Opt o) {
        switch (o) {
        case Opt::gd: return "gd";
        case Opt::gd_momentum: return "gd_momentum";
        case Opt::gd_momentum_wd: return "gd_momentum_wd";
        case Opt::rmsprop: return "rmsprop";
        case Opt::adam: return "adam";
        }
        return "?";
    }
};

struct OptState {
    std::vector<Mat> m1; // momentum buffer / first moment
    std::vector<Mat> m2; // second moment
    std::size_t t = 0;

    void ensure_shapes(const Net& net, TrainCfg::Opt opt) {
        bool need1 = opt != TrainCfg::Opt::gd;
        bool need2 = opt == TrainCfg::Opt::rmsprop || opt == TrainCfg::Opt::adam;
        if (need1 && m1.empty())
            for (const Mat& w : net.weights) m1.emplace_back(w.rows, w.cols);
        if (need2 && m2.empty())
            for (const Mat& w : net.weights) m2.emplace_back(w.rows, w.cols);
    }
};

namespace detail {

inline void apply_update(Net& net, const std::vector<Mat>& grads, const TrainCfg& cfg,
                         OptState& state) {
    state.ensure_shapes(net, cfg.opt);
    switch (cfg.opt) {
    case TrainCfg::Opt::gd:
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            double* w = net.weights[l].data.data();
            const double* g = grads[l].data.data();
            for (std::size_t i = 0; i < grads[l].data.size(); ++i) w[i] -= cfg.lr * g[i];
        }
        break;
    case TrainCfg::Opt::gd_momentum:
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            double* w = net.weights[l].data.data();
            double* buf = state.m1[l].data.data();
            const double* g = grads[l].data.data();
            for (std::size_t i = 0; i < grads[l].data.size(); ++i) {
                buf[i] = cfg.momentum * buf[i] + g[i];
                w[i] -= cfg.lr * buf[i];
            }
        }
        break;
    case TrainCfg::Opt::gd_momentum_wd:
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            double* w = net.weights[l].data.data();
            double* buf = state.m1[l].data.data();
            const double* g = grads[l].data.data();
            for (std::size_t i = 0; i < grads[l].data.size(); ++i) {
                double gi = g[i] + cfg.weight_decay * w[i];
                buf[i] = cfg.momentum * buf[i] + gi;
                w[i] -= cfg.lr * buf[i];
            }
        }
        break;
    case TrainCfg::Opt::rmsprop:
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            double* w = net.weights[l].data.data();
            double* v = state.m2[l].data.data();
            const double* g = grads[l].data.data();
            for (std::size_t i = 0; i < grads[l].data.size(); ++i) {
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                w[i] -= cfg.lr * g[i] / (std::sqrt(v[i]) + cfg.eps);
            }
        }
        break;
    case TrainCfg::Opt::adam: {
        ++state.t;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            double* w = net.weights[l].data.data();
            double* m = state.m1[l].data.data();
            double* v = state.m2[l].data.data();
            const double* g = grads[l].data.data();
            for (std::size_t i = 0; i < grads[l].data.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                double mh = m[i] / c1;
                double vh = v[i] / c2;
                w[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
            }
        }
        break;
    }
    }
}

} // namespace detail

// One full-batch update. Returns the loss evaluated before the update.
inline double step(Net& net, const Objective& objective, const std::vector<Vec>& examples,
                   const TrainCfg& cfg, OptState& state) {
    auto batch = objective.make_batch(examples);
    LossGrads lg = loss_grads(net, batch);
    if (!std::isfinite(lg.loss)) throw std::runtime_error("step: non-finite loss");
    detail::apply_update(net, lg.grads, cfg, state);
    return lg.loss;
}

struct TrainResult {
    double final_loss = std::numeric_limits<double>::infinity();
    std::size_t epochs = 0;
    bool converged = false;
    bool diverged = false;
    std::size_t last_good_epoch = 0;
    std::vector<std::pair<std::size_t, double>> loss_trace; // (epoch, loss) samples
};

// Full-batch training until the loss falls to the threshold or the epoch cap.
// Optional snapshot sink receives the net at every trace point (used by the
// invariant checks).
inline TrainResult train(Net& net, const Objective& objective, const std::vector<Vec>& examples,
                         const TrainCfg& cfg,
                         const std::function<void(std::size_t, const Net&)>& snapshot = nullptr) {
    if (examples.empty()) throw std::invalid_argument("train: empty dataset");
    auto batch = objective.make_batch(examples);
    TrainResult res;
    OptState state;
    double last_good = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch <= cfg.max_epochs; ++epoch) {
        LossGrads lg;
        try {
            lg = loss_grads(net, batch);
        } catch (const std::runtime_error&) {
            res.diverged = true;
            res.final_loss = last_good;
            res.epochs = epoch;
            return res;
        }
        bool trace_point = (epoch % cfg.trace_every == 0);
        if (trace_point) {
            res.loss_trace.emplace_back(epoch, lg.loss);
            if (snapshot) snapshot(epoch, net);
        }
        if (!std::isfinite(lg.loss)) {
            res.diverged = true;
            res.final_loss = last_good;
            res.epochs = epoch;
            return res;
        }
        last_good = lg.loss;
        res.last_good_epoch = epoch;
        if (lg.loss <= cfg.loss_threshold) {
            res.final_loss = lg.loss;
            res.epochs = epoch;
            res.converged = true;
            if (!trace_point) {
                res.loss_trace.emplace_back(epoch, lg.loss);
                if (snapshot) snapshot(epoch, net);
            }
            return res;
        }
        if (epoch == cfg.max_epochs) {
            res.final_loss = lg.loss;
            res.epochs = epoch;
            return res;
        }
        detail::apply_update(net, lg.grads, cfg, state);
    }
    return res; // unreachable
}

// Per-snapshot residuals of the training invariants for a structured init.
struct InvariantReport {
    double max_outer_rank1 = 0.0;    // ||W_out - x (x^T W_out)||_F
    double max_inner_rank1 = 0.0;    // ||W_in - (W_in x) x^T||_F
    double max_row_spread = 0.0;     // equal-row deviation of u and v
    double max_interior = 0.0;       // deep interior distance from w * all-ones
    double max_span_residual = 0.0;  // ||(I - P_span) f(z)|| over random probes
    std::size_t snapshots = 0;
};

namespace detail {

inline double rank1_residual_cols(const Mat& w, const Vec& x) {
    // columns along x: ||W - x (x^T W)||_F
    double s = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) {
        double proj = 0.0;
        for (std::size_t r = 0; r < w.rows; ++r) proj += x[r] * w.at(r, c);
        for (std::size_t r = 0; r < w.rows; ++r) {
            double d = w.at(r, c) - x[r] * proj;
            s += d * d;
        }
    }
    return std::sqrt(s);
}

inline double rank1_residual_rows(const Mat& w, const Vec& x) {
    // rows along x^T: ||W - (W x) x^T||_F
    double s = 0.0;
    for (std::size_t r = 0; r < w.rows; ++r) {
        double proj = 0.0;
        for (std::size_t c = 0; c < w.cols; ++c) proj += w.at(r, c) * x[c];
        for (std::size_t c = 0; c < w.cols; ++c) {
            double d = w.at(r, c) - proj * x[c];
            s += d * d;
        }
    }
    return std::sqrt(s);
}

// orthonormal basis of span{xs} by modified Gram-Schmidt
inline std::vector<Vec> orthonormal_basis(const std::vector<Vec>& xs) {
    std::vector<Vec> basis;
    for (const Vec& x : xs) {
        Vec v = x;
        for (const Vec& b : basis) {
            double p = dot(v, b);
            for (std::size_t i = 0; i < v.dim(); ++i) v[i] -= p * b[i];
        }
        double n = v.norm2();
        if (n > 1e-12) {
            for (std::size_t i = 0; i < v.dim(); ++i) v[i] /= n;
            basis.push_back(std::move(v));
        }
    }
    return basis;
}

inline double off_span_norm(const Vec& y, const std::vector<Vec>& basis) {
    Vec r = y;
    for (const Vec& b : basis) {
        double p = dot(r, b);
        for (std::size_t i = 0; i < r.dim(); ++i) r[i] -= p * b[i];
    }
    return r.norm2();
}

} // namespace detail

inline InvariantReport check_invariants(const std::vector<Net>& trajectory,
                                        const InitScheme& scheme,
                                        std::uint64_t probe_seed = 12345) {
    InvariantReport rep;
    rep.snapshots = trajectory.size();
    if (trajectory.empty()) return rep;

    for (const Net& net : trajectory) {
        const std::size_t d = net.depth();
        switch (scheme.kind) {
        case InitScheme::Kind::rank1:
        case InitScheme::Kind::rank1_equal: {
            const Vec& xin = scheme.x;
            const Vec& xout = scheme.x_out.dim() ? scheme.x_out : scheme.x;
            rep.max_inner_rank1 =
                std::max(rep.max_inner_rank1, detail::rank1_residual_rows(net.weights[0], xin));
            rep.max_outer_rank1 =
                std::max(rep.max_outer_rank1, detail::rank1_residual_cols(net.weights[1], xout));
            if (scheme.kind == InitScheme::Kind::rank1_equal) {
                // v_i = row i of inner projected on x; u_j = column j of outer on x
                const Mat& win = net.weights[0];
                const Mat& wout = net.weights[1];
                double v1 = 0.0, u1 = 0.0;
                for (std::size_t r = 0; r < win.rows; ++r) {
                    double vr = 0.0;
                    for (std::size_t c = 0; c < win.cols; ++c) vr += win.at(r, c) * xin[c];
                    if (r == 0)
                        v1 = vr;
                    else
                        rep.max_row_spread = std::max(rep.max_row_spread, std::fabs(vr - v1));
                }
                for (std::size_t c = 0; c < wout.cols; ++c) {
                    double uc = 0.0;
                    for (std::size_t r = 0; r < wout.rows; ++r) uc += wout.at(r, c) * xout[r];
                    if (c == 0)
                        u1 = uc;
                    else
                        rep.max_row_spread = std::max(rep.max_row_spread, std::fabs(uc - u1));
                }
            }
            break;
        }
        case InitScheme::Kind::deep_rank1_equal: {
            rep.max_inner_rank1 =
                std::max(rep.max_inner_rank1, detail::rank1_residual_rows(net.weights[0], scheme.x));
            rep.max_outer_rank1 = std::max(rep.max_outer_rank1,
                                           detail::rank1_residual_cols(net.weights[d - 1], scheme.x));
            for (std::size_t i = 1; i + 1 < d; ++i) {
                const Mat& w = net.weights[i];
                double mean = 0.0;
                for (double v : w.data) mean += v;
                mean /= static_cast<double>(w.data.size());
                double s = 0.0;
                for (double v : w.data) s += (v - mean) * (v - mean);
                rep.max_interior = std::max(rep.max_interior, std::sqrt(s));
            }
            break;
        }
        case InitScheme::Kind::span_rank1: {
            auto basis = detail::orthonormal_basis(scheme.xs);
            Rng rng(probe_seed);
            for (int p = 0; p < 10; ++p) {
                Vec z(net.input_dim());
                for (std::size_t i = 0; i < z.dim(); ++i) z[i] = rng.normal();
                Vec y = apply(net, z);
                rep.max_span_residual =
                    std::max(rep.max_span_residual, detail::off_span_norm(y, basis));
            }
            break;
        }
        case InitScheme::Kind::uniform:
            // nothing structural to preserve
            break;
        }
    }
    return rep;
}

} // namespace amem
