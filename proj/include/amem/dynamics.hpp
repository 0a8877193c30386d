#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "amem/data.hpp"
#include "amem/linalg.hpp"
#include "amem/net.hpp"
#include "amem/parallel.hpp"

namespace amem {

struct IterOptions {
    double conv_tol = 1e-8;    // ||f^{k+1}(x) - f^k(x)|| termination
    double recover_tol = 1e-7; // ||limit - x^(i)|| classification
    std::size_t max_iter = 10000;
    std::size_t history_window = 512; // cycle-detection memory
};

struct IterResult {
    enum class Outcome { converged_to, spurious, cycle_detected, max_iter, diverged };
    Outcome outcome = Outcome::max_iter;
    std::size_t index = 0;  // training index for converged_to
    std::size_t period = 0; // cycle_detected
    std::size_t iters = 0;
    double step_norm = 0.0;
    Vec limit; // final iterate (cluster representative for spurious)

    bool recovered(std::size_t want) const {
        return outcome == Outcome::converged_to && index == want;
    }
};

// Iterate the learned map from x0 and classify the limit against the
// training set. A revisit of an earlier iterate at lag p >= 2 within conv_tol
// is reported as a cycle of period p.
inline IterResult iterate(const Net& net, const Vec& x0, const std::vector<Vec>& train_set,
                          const IterOptions& opts = {}) {
    IterResult res;
    Vec cur = x0;
    std::deque<Vec> history;
    for (std::size_t k = 1; k <= opts.max_iter; ++k) {
        Vec next;
        try {
            next = apply(net, cur);
        } catch (const std::runtime_error&) {
            res.outcome = IterResult::Outcome::diverged;
            res.iters = k;
            res.limit = cur;
            return res;
        }
        res.step_norm = distance(next, cur);
        res.iters = k;
        if (res.step_norm < opts.conv_tol) {
            // fixed point reached; classify
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < train_set.size(); ++i) {
                double d = distance(next, train_set[i]);
                if (d < best) {
                    best = d;
                    best_i = i;
                }
            }
            res.limit = std::move(next);
            if (best < opts.recover_tol) {
                res.outcome = IterResult::Outcome::converged_to;
                res.index = best_i;
            } else {
                res.outcome = IterResult::Outcome::spurious;
            }
            return res;
        }
        // cycle detection against bounded history (lag 2 and beyond)
        for (std::size_t lag = 2; lag <= history.size() + 1; ++lag) {
            const Vec& past = lag == 1 ? cur : history[lag - 2];
            if (distance(next, past) < opts.conv_tol) {
                res.outcome = IterResult::Outcome::cycle_detected;
                res.period = lag;
                res.limit = std::move(next);
                return res;
            }
        }
        history.push_front(cur);
        if (history.size() > opts.history_window) history.pop_back();
        cur = std::move(next);
    }
    res.outcome = IterResult::Outcome::max_iter;
    res.limit = cur;
    return res;
}

enum class Verdict { attractor, not_attractor, inconclusive, not_fixed_point };

inline std::string verdict_name(Verdict v) {
    switch (v) {
    case Verdict::attractor: return "attractor";
    case Verdict::not_attractor: return "not_attractor";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::not_fixed_point: return "not_fixed_point";
    }
    return "?";
}

struct AttractorReport {
    SpectrumReport spectrum;
    Verdict verdict = Verdict::inconclusive;
    double fixed_point_error = 0.0;
};

struct VerifyOptions {
    double fixed_point_tol = 1e-6;
    double margin = 1e-6; // attractor iff rho < 1 - margin, not iff rho > 1 + margin
    double spectral_tol = 1e-8;
    std::size_t spectral_max_iter = 5000;
};

// Prop-1 check: a fixed point is an attractor when the Jacobian spectral
// radius is strictly below 1.
inline AttractorReport verify_attractor(const Net& net, const Vec& x,
                                        const VerifyOptions& opts = {}) {
    AttractorReport rep;
    Vec fx = apply(net, x);
    rep.fixed_point_error = distance(fx, x);
    if (rep.fixed_point_error >= opts.fixed_point_tol) {
        rep.verdict = Verdict::not_fixed_point;
        return rep;
    }
    Mat j = jacobian(net, x);
    rep.spectrum = spectral_radius(j, opts.spectral_tol, opts.spectral_max_iter);
    if (rep.spectrum.rho < 1.0 - opts.margin)
        rep.verdict = Verdict::attractor;
    else if (rep.spectrum.rho > 1.0 + opts.margin)
        rep.verdict = Verdict::not_attractor;
    else
        rep.verdict = Verdict::inconclusive;
    return rep;
}

struct CycleReport {
    SpectrumReport spectrum;
    Verdict verdict = Verdict::inconclusive; // attractor == stable cycle
    double worst_map_error = 0.0;
    std::size_t worst_pair = 0;
    Mat composed_jacobian;
};

// Prop-2 check on a cycle x^(1) -> x^(2) -> ... -> x^(n) -> x^(1). Accepts one
// map applied around the cycle or one map per step (composition order
// J(f_n at x^(n)) ... J(f_1 at x^(1))).
inline CycleReport verify_limit_cycle(const std::vector<const Net*>& step_nets,
                                      const std::vector<Vec>& sequence,
                                      const VerifyOptions& opts = {}) {
    if (sequence.empty()) throw std::invalid_argument("verify_limit_cycle: empty sequence");
    if (step_nets.size() != sequence.size())
        throw std::invalid_argument("verify_limit_cycle: need one map per step");
    const std::size_t n = sequence.size();
    CycleReport rep;
    for (std::size_t i = 0; i < n; ++i) {
        Vec fx = apply(*step_nets[i], sequence[i]);
        double err = distance(fx, sequence[(i + 1) % n]);
        if (err > rep.worst_map_error) {
            rep.worst_map_error = err;
            rep.worst_pair = i;
        }
    }
    if (rep.worst_map_error >= opts.fixed_point_tol)
        throw std::runtime_error(
            "verify_limit_cycle: map does not send step " + std::to_string(rep.worst_pair) +
            " to its successor (error " + std::to_string(rep.worst_map_error) + ")");

    Mat prod = jacobian(*step_nets[0], sequence[0]);
    for (std::size_t i = 1; i < n; ++i)
        prod = kernels::matmul_fast(jacobian(*step_nets[i], sequence[i]), prod);
    rep.composed_jacobian = prod;
    rep.spectrum = spectral_radius(prod, opts.spectral_tol, opts.spectral_max_iter);
    if (rep.spectrum.rho < 1.0 - opts.margin)
        rep.verdict = Verdict::attractor;
    else if (rep.spectrum.rho > 1.0 + opts.margin)
        rep.verdict = Verdict::not_attractor;
    else
        rep.verdict = Verdict::inconclusive;
    return rep;
}

inline CycleReport verify_limit_cycle(const Net& net, const std::vector<Vec>& sequence,
                                      const VerifyOptions& opts = {}) {
    std::vector<const Net*> steps(sequence.size(), &net);
    return verify_limit_cycle(steps, sequence, opts);
}

struct BasinMap {
    double xmin = -2, xmax = 2, ymin = -2, ymax = 2;
    std::size_t resolution = 100;
    std::vector<int> labels;        // row-major, training index or -1
    std::vector<std::size_t> iters; // per-cell iteration count
    std::vector<std::pair<Vec, Vec>> vector_field; // (point, f(point) - point)

    int label_at(std::size_t row, std::size_t col) const { return labels[row * resolution + col]; }
    Vec cell_center(std::size_t row, std::size_t col) const {
        Vec p(2);
        p[0] = xmin + (static_cast<double>(col) + 0.5) * (xmax - xmin) / double(resolution);
        p[1] = ymin + (static_cast<double>(row) + 0.5) * (ymax - ymin) / double(resolution);
        return p;
    }
};

// Tessellate the plane by iterate-limit. Cells whose iteration does not reach
// a recognized training example are labeled -1. Grid cells run concurrently;
// every cell writes only its own slot.
inline BasinMap basin_map(const Net& net, const std::vector<Vec>& train_set, double xmin,
                          double xmax, double ymin, double ymax, std::size_t resolution = 100,
                          const IterOptions& iter_opts = {}) {
    if (net.input_dim() != 2) throw std::invalid_argument("basin_map: requires a 2-d encoder");
    BasinMap bm;
    bm.xmin = xmin;
    bm.xmax = xmax;
    bm.ymin = ymin;
    bm.ymax = ymax;
    bm.resolution = resolution;
    bm.labels.assign(resolution * resolution, -1);
    bm.iters.assign(resolution * resolution, 0);

    parallel_for(resolution * resolution, [&](std::size_t cell) {
        std::size_t row = cell / resolution, col = cell % resolution;
        IterResult r = iterate(net, bm.cell_center(row, col), train_set, iter_opts);
        bm.iters[cell] = r.iters;
        bm.labels[cell] =
            r.outcome == IterResult::Outcome::converged_to ? static_cast<int>(r.index) : -1;
    });

    std::size_t stride = resolution / 20;
    if (stride == 0) stride = 1;
    for (std::size_t row = stride / 2; row < resolution; row += stride)
        for (std::size_t col = stride / 2; col < resolution; col += stride) {
            Vec p = bm.cell_center(row, col);
            Vec fp = apply(net, p);
            bm.vector_field.emplace_back(p, fp - p);
        }
    return bm;
}

struct SpuriousCluster {
    Vec representative;
    std::size_t hits = 0;
};

struct SpuriousReport {
    std::vector<SpuriousCluster> clusters;
    std::size_t probes = 0;
    std::size_t recovered = 0;   // reached a training example
    std::size_t unconverged = 0; // max_iter / diverged / cycling
};

// Iterate from every probe and cluster the non-training limits (merge radius
// 1e-5, above conv_tol and far below inter-example distances).
inline SpuriousReport spurious_search(const Net& net, const std::vector<Vec>& probe_pool,
                                      const std::vector<Vec>& train_set,
                                      const IterOptions& iter_opts = {},
                                      double merge_tol = 1e-5) {
    if (probe_pool.empty()) throw std::invalid_argument("spurious_search: empty probe pool");
    SpuriousReport rep;
    rep.probes = probe_pool.size();
    std::vector<IterResult> results(probe_pool.size());
    parallel_for(probe_pool.size(), [&](std::size_t i) {
        results[i] = iterate(net, probe_pool[i], train_set, iter_opts);
    });
    for (const IterResult& r : results) {
        if (r.outcome == IterResult::Outcome::converged_to) {
            ++rep.recovered;
        } else if (r.outcome == IterResult::Outcome::spurious) {
            bool merged = false;
            for (SpuriousCluster& c : rep.clusters) {
                if (distance(c.representative, r.limit) < merge_tol) {
                    ++c.hits;
                    merged = true;
                    break;
                }
            }
            if (!merged) rep.clusters.push_back({r.limit, 1});
        } else {
            ++rep.unconverged;
        }
    }
    return rep;
}

struct RecoveryDetail {
    std::size_t trial = 0;
    std::size_t example = 0;
    bool recovered = false;      // iteration reached the original example
    bool nn_correct = false;     // 1-NN of the corrupted input is the original
    int iter_label = -1;         // training index reached, -1 otherwise
    std::size_t nn_label = 0;    // nearest training example of corrupted input
};

struct RecoveryReport {
    double rate = 0.0;
    double nn_rate = 0.0;   // 1-NN baseline on the same corrupted inputs
    double agreement = 0.0; // iterate limit equals the 1-NN prediction
    std::vector<RecoveryDetail> details;
};

// Corrupt every example `trials` times with per-(trial, example) derived
// seeds, iterate, and count recoveries of the original; the 1-NN baseline is
// reported alongside.
inline RecoveryReport recovery_rate(const Net& net, const Dataset& data,
                                    const CorruptionSpec& corruption, std::size_t trials,
                                    const IterOptions& iter_opts = {}) {
    if (trials == 0) throw std::invalid_argument("recovery_rate: trials must be >= 1");
    const std::size_t n = data.n();
    RecoveryReport rep;
    rep.details.resize(trials * n);
    const ImageShape* shape = data.shape.valid() ? &data.shape : nullptr;

    parallel_for(trials * n, [&](std::size_t job) {
        std::size_t t = job / n, i = job % n;
        CorruptionSpec spec = corruption.with_seed(derive_seed(corruption.seed, job + 1));
        Vec noisy = corrupt(data.examples[i], spec, shape);
        RecoveryDetail& d = rep.details[job];
        d.trial = t;
        d.example = i;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            double dist = distance(noisy, data.examples[j]);
            if (dist < best) {
                best = dist;
                d.nn_label = j;
            }
        }
        d.nn_correct = d.nn_label == i;
        IterResult r = iterate(net, noisy, data.examples, iter_opts);
        d.iter_label = r.outcome == IterResult::Outcome::converged_to ? int(r.index) : -1;
        d.recovered = r.recovered(i);
    });

    std::size_t rec = 0, nn = 0, agree = 0;
    for (const RecoveryDetail& d : rep.details) {
        rec += d.recovered;
        nn += d.nn_correct;
        agree += d.iter_label >= 0 && static_cast<std::size_t>(d.iter_label) == d.nn_label;
    }
    const double total = static_cast<double>(trials * n);
    rep.rate = double(rec) / total;
    rep.nn_rate = double(nn) / total;
    rep.agreement = double(agree) / total;
    return rep;
}

} // namespace amem
