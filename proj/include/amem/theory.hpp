#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "amem/net.hpp"
#include "amem/nonlin.hpp"
#include "amem/optim.hpp"

namespace amem {

// Gradient-flow limit of the structured training problems, as scalars. For a
// one-hidden-layer net all rows share (u, v); for the deep chain the scalars
// are b1, w2..w_{d-1}, a1 in layer order.
struct TheorySol {
    double u = 0.0;
    double v = 0.0;
    std::vector<double> chain;       // deep chain incl. b1 and a1; empty for one-hidden
    std::vector<std::size_t> widths; // k, or k1..k_{d-1}
    double lambda1 = 0.0;
    double quad_error = 0.0;
    double root_residual = 0.0;     // |u phi(v) - 1/k|
    double interp_residual = 0.0;   // |u k phi(v) - 1|
    double energy_residual = 0.0;   // energy relation along the solution
    double relation_residual = 0.0; // deep: worst chained integral relation
    std::string nonlin_name;
};

namespace quad {

// adaptive Simpson with absolute tolerance; throws when the integrand stops
// being finite (phi' singular inside the path)
inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                          double fm, double fb, double whole, double tol, int depth,
                          double& err_accum) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    if (!std::isfinite(flm) || !std::isfinite(frm))
        throw std::runtime_error("quadrature: singular integrand (phi' vanishes inside path)");
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double diff = left + right - whole;
    if (depth <= 0 || std::fabs(diff) <= 15.0 * tol) {
        err_accum += std::fabs(diff) / 15.0;
        return left + right + diff / 15.0;
    }
    return simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1, err_accum) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1, err_accum);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12, double* err_out = nullptr) {
    if (a == b) {
        if (err_out) *err_out = 0.0;
        return 0.0;
    }
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
        throw std::runtime_error("quadrature: singular integrand (phi' vanishes inside path)");
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double err = 0.0;
    double res = simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48, err);
    if (err_out) *err_out = err;
    return res;
}

} // namespace quad

namespace ode {

struct Ode45Options {
    double rtol = 1e-10;
    double atol = 1e-13;
    double h0 = 1e-4;
    double t_end = 1e6;
    std::size_t max_steps = 5'000'000;
};

// Dormand-Prince 5(4) with step control. stop(t, y) ends integration once it
// returns true; observe (optional) sees every accepted step.
inline void ode45(const std::function<void(const std::vector<double>&, std::vector<double>&)>& rhs,
                  std::vector<double>& y, const Ode45Options& opt,
                  const std::function<bool(double, const std::vector<double>&)>& stop,
                  const std::function<void(double, const std::vector<double>&)>& observe = nullptr) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);
    double t = 0.0, h = opt.h0;
    if (observe) observe(t, y);
    if (stop(t, y)) return;
    for (std::size_t step = 0; step < opt.max_steps; ++step) {
        if (t >= opt.t_end) return;
        if (h < 1e-15 * std::max(1.0, std::fabs(t)))
            throw std::runtime_error("ode45: step size underflow (stiffness failure)");
        rhs(y, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        rhs(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(tmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        rhs(tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs(ynew, k7);

        double errnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double err = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                              e7 * k7[i]);
            double scale = opt.atol + opt.rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
            double q = err / scale;
            errnorm += q * q;
        }
        errnorm = std::sqrt(errnorm / static_cast<double>(n));
        if (!std::isfinite(errnorm)) throw std::runtime_error("ode45: non-finite state");

        if (errnorm <= 1.0) {
            t += h;
            y = ynew;
            if (observe) observe(t, y);
            if (stop(t, y)) return;
        }
        double fac = errnorm > 0 ? 0.9 * std::pow(errnorm, -0.2) : 5.0;
        fac = std::min(5.0, std::max(0.2, fac));
        h *= fac;
        if (t + h > opt.t_end) h = opt.t_end - t;
    }
    throw std::runtime_error("ode45: step budget exhausted");
}

} // namespace ode

// --- one-hidden-layer closed form (energy relation + interpolation root) ---

// u(v)^2 = u0^2 + 2 int_{v0}^{v} phi/phi', root of g(v) = u(v) phi(v) - 1/k.
// The search walks v away from v0 in the direction the gradient flow moves,
// brackets the first sign change of g, then bisects and Newton-polishes.
inline TheorySol solve_one_hidden(Nonlin nonlin, std::size_t k, double u0, double v0) {
    if (k == 0) throw std::invalid_argument("solve_one_hidden: k must be positive");
    auto phi = [&](double z) { return nonlin.phi(z); };
    auto dphi = [&](double z) { return nonlin.dphi(z); };
    std::function<double(double)> ratio = [&](double z) {
        double d = dphi(z);
        if (d == 0.0) return std::numeric_limits<double>::infinity();
        return phi(z) / d;
    };
    if (dphi(v0) == 0.0)
        throw std::runtime_error("solve_one_hidden: phi' vanishes at the initial point");

    TheorySol sol;
    sol.widths = {k};
    sol.nonlin_name = nonlin.name();
    const double kd = static_cast<double>(k);
    const double sign_u = u0 < 0 ? -1.0 : 1.0;

    double r0 = 1.0 - kd * u0 * phi(v0);
    if (std::fabs(r0) < 1e-15) {
        sol.u = u0;
        sol.v = v0;
        sol.lambda1 = dphi(v0) * v0 / phi(v0);
        sol.interp_residual = std::fabs(u0 * kd * phi(v0) - 1.0);
        sol.root_residual = std::fabs(u0 * phi(v0) - 1.0 / kd);
        return sol;
    }
    double dir = dphi(v0) * u0 * r0;
    // u0 == 0: u moves first with sign(r0 phi(v0)), then v follows
    if (dir == 0.0) dir = dphi(v0) * phi(v0);
    if (dir == 0.0) dir = r0;
    dir = dir > 0 ? 1.0 : -1.0;

    // march outward accumulating the energy integral
    double quad_err_total = 0.0;
    auto u_of = [&](double integral) {
        double uu2 = u0 * u0 + 2.0 * integral;
        return uu2; // caller checks sign
    };
    auto g_from = [&](double v, double integral) {
        double uu2 = u_of(integral);
        if (uu2 < 0) return std::numeric_limits<double>::quiet_NaN();
        return sign_u * std::sqrt(uu2) * phi(v) - 1.0 / kd;
    };

    double v_prev = v0, i_prev = 0.0;
    double g_prev = g_from(v0, 0.0);
    double dv = 1e-3;
    double v_lo = 0, v_hi = 0, i_lo = 0, g_lo = 0, g_hi = 0;
    bool bracketed = false;
    while (std::fabs(v_prev - v0) < 50.0) {
        double v_next = v_prev + dir * dv;
        double seg_err = 0.0;
        double seg = quad::adaptive_simpson(ratio, v_prev, v_next, 1e-12, &seg_err);
        quad_err_total += seg_err;
        double i_next = i_prev + seg;
        double g_next = g_from(v_next, i_next);
        if (std::isnan(g_next)) {
            // u^2 went negative somewhere in (v_prev, v_next]; a root may
            // still sit before the u = 0 boundary, so shrink the step and
            // creep up to it instead of overshooting
            if (dv < 1e-12) break; // u hits 0 at v_prev itself: flow stops
            dv *= 0.5;
            continue;
        }
        if (g_prev == 0.0 || (g_prev < 0) != (g_next < 0)) {
            v_lo = v_prev;
            v_hi = v_next;
            i_lo = i_prev;
            g_lo = g_prev;
            g_hi = g_next;
            bracketed = true;
            break;
        }
        v_prev = v_next;
        i_prev = i_next;
        g_prev = g_next;
        dv = std::min(dv * 1.5, 0.25);
    }
    if (!bracketed)
        throw std::runtime_error("solve_one_hidden: no interpolating root of u(v) phi(v) = 1/k on the scanned range [" +
                                 std::to_string(v0) + ", " + std::to_string(v_prev) + "]");

    // bisection to high precision, integral maintained incrementally from v_lo
    (void)g_hi;
    double a = v_lo, b = v_hi, ia = i_lo, ga = g_lo;
    for (int it = 0; it < 200 && std::fabs(b - a) > 1e-14 * std::max(1.0, std::fabs(a)); ++it) {
        double m = 0.5 * (a + b);
        double im = ia + quad::adaptive_simpson(ratio, a, m, 1e-13);
        double gm = g_from(m, im);
        if (std::isnan(gm)) { b = m; continue; }
        if (gm == 0.0) { a = b = m; ia = im; ga = gm; break; }
        if ((ga < 0) == (gm < 0)) {
            a = m;
            ia = im;
            ga = gm;
        } else {
            b = m;
        }
    }
    double v_star = 0.5 * (a + b);
    double i_star = ia + quad::adaptive_simpson(ratio, a, v_star, 1e-13);
    double total_integral = i_star; // from v0 along the marched path
    // assemble: full integral = i_prev-part + ... (ia already measured from v0)
    double uu2 = u0 * u0 + 2.0 * total_integral;
    if (uu2 < 0) uu2 = 0;
    double u_star = sign_u * std::sqrt(uu2);

    // Newton polish on g(v) with u'(v) = (phi/phi')/u
    for (int it = 0; it < 8; ++it) {
        double gv = u_star * phi(v_star) - 1.0 / kd;
        double du = u_star != 0.0 ? ratio(v_star) / u_star : 0.0;
        double gprime = du * phi(v_star) + u_star * dphi(v_star);
        if (gprime == 0.0 || !std::isfinite(gprime)) break;
        double step = gv / gprime;
        double v_new = v_star - step;
        double delta_i = quad::adaptive_simpson(ratio, v_star, v_new, 1e-14);
        total_integral += delta_i;
        double uu = u0 * u0 + 2.0 * total_integral;
        if (uu < 0) break;
        v_star = v_new;
        u_star = sign_u * std::sqrt(uu);
        if (std::fabs(step) < 1e-15 * std::max(1.0, std::fabs(v_star))) break;
    }

    sol.u = u_star;
    sol.v = v_star;
    sol.quad_error = quad_err_total;
    sol.root_residual = std::fabs(u_star * phi(v_star) - 1.0 / kd);
    sol.interp_residual = std::fabs(u_star * kd * phi(v_star) - 1.0);
    sol.energy_residual =
        std::fabs((u_star * u_star - u0 * u0) / 2.0 - total_integral);
    if (sol.root_residual > 1e-12 * std::max(1.0, 1.0 / kd))
        throw std::runtime_error("solve_one_hidden: root polish failed to reach residual 1e-12");
    sol.lambda1 = dphi(v_star) * v_star / phi(v_star);
    return sol;
}

// --- reduced gradient-flow ODE for the one-hidden problem ---

struct ReducedTrajectory {
    std::vector<double> t;
    std::vector<double> a; // outer scalar u(t)
    std::vector<double> b; // inner scalar v(t)
    double final_loss = 0.0;
};

// da/dt = (1 - k a phi(b)) phi(b),  db/dt = phi'(b) a (1 - k a phi(b)),
// integrated until the reduced loss (1 - k a phi(b))^2 / 2 falls below
// loss_tol (or t_end).
// loss_tol must stay well above rtol^2: each accepted step carries
// O(rtol)-scale local error and the interpolation manifold consists of fixed
// points, so the residual cannot fall much below the integrator tolerance.
inline ReducedTrajectory integrate_reduced_ode(Nonlin nonlin, std::size_t k, double u0, double v0,
                                               double loss_tol = 1e-18, double t_end = 1e6) {
    const double kd = static_cast<double>(k);
    auto loss = [&](const std::vector<double>& y) {
        double r = 1.0 - kd * y[0] * nonlin.phi(y[1]);
        return 0.5 * r * r;
    };
    ReducedTrajectory traj;
    std::vector<double> y = {u0, v0};
    ode::Ode45Options opt;
    opt.t_end = t_end;
    ode::ode45(
        [&](const std::vector<double>& s, std::vector<double>& dy) {
            double pb = nonlin.phi(s[1]);
            double r = 1.0 - kd * s[0] * pb;
            dy[0] = r * pb;
            dy[1] = nonlin.dphi(s[1]) * s[0] * r;
        },
        y, opt, [&](double, const std::vector<double>& s) { return loss(s) < loss_tol; },
        [&](double t, const std::vector<double>& s) {
            traj.t.push_back(t);
            traj.a.push_back(s[0]);
            traj.b.push_back(s[1]);
        });
    traj.final_loss = loss(y);
    return traj;
}

// --- deep chain gradient flow ---

namespace detail {

struct DeepRhs {
    Nonlin nonlin;
    std::vector<std::size_t> widths; // k1..k_{d-1}
    std::size_t d;                   // number of weight layers

    // state y = [b1, w2..w_{d-1}, a1]; aux integrals appended by caller
    void eval(const std::vector<double>& y, std::vector<double>& dy) const {
        const double b1 = y[0];
        const double a1 = y[d - 1];
        std::vector<double> m(d); // m[1..d-1]; m[i] is the pre-activation scalar of layer i
        m[1] = b1;
        for (std::size_t i = 2; i <= d - 1; ++i)
            m[i] = y[i - 1] * static_cast<double>(widths[i - 2]) * nonlin.phi(m[i - 1]);
        const double kd_last = static_cast<double>(widths[d - 2]);
        const double r = 1.0 - a1 * kd_last * nonlin.phi(m[d - 1]);

        std::vector<double> c(d, 0.0); // c[i] backprop scalar at hidden layer i
        c[d - 1] = -r * a1 * nonlin.dphi(m[d - 1]);
        for (std::size_t i = d - 1; i-- > 2;)
            c[i] = nonlin.dphi(m[i]) * y[i] * static_cast<double>(widths[i]) * c[i + 1];

        // a1 drift
        dy[d - 1] = r * nonlin.phi(m[d - 1]);
        // interior drifts
        for (std::size_t i = 2; i <= d - 1; ++i) dy[i - 1] = -c[i] * nonlin.phi(m[i - 1]);
        // b1 drift
        if (d == 2)
            dy[0] = nonlin.dphi(b1) * a1 * r;
        else
            dy[0] = -nonlin.dphi(b1) * y[1] * static_cast<double>(widths[1]) * c[2];
    }

    std::vector<double> preacts(const std::vector<double>& y) const {
        std::vector<double> m(d);
        m[1] = y[0];
        for (std::size_t i = 2; i <= d - 1; ++i)
            m[i] = y[i - 1] * static_cast<double>(widths[i - 2]) * nonlin.phi(m[i - 1]);
        return m;
    }

    double residual(const std::vector<double>& y) const {
        auto m = preacts(y);
        return 1.0 - y[d - 1] * static_cast<double>(widths[d - 2]) * nonlin.phi(m[d - 1]);
    }
};

} // namespace detail

// Deep-network gradient flow over the scalar chain. The chained integral
// relations are accumulated alongside the state and verified a posteriori;
// lambda1 comes from the closed-form product at the interpolating limit.
inline TheorySol solve_deep(Nonlin nonlin, const std::vector<std::size_t>& widths, double b1_0,
                            const std::vector<double>& w0, double a1_0, double loss_tol = 1e-18) {
    const std::size_t d = widths.size() + 1;
    if (d < 2) throw std::invalid_argument("solve_deep: need at least one hidden layer");
    if (w0.size() != d - 2)
        throw std::invalid_argument("solve_deep: need one init scalar per interior layer");

    detail::DeepRhs rhs{nonlin, widths, d};

    // state: d chain scalars followed by d-1 relation integrals
    std::vector<double> y(d + (d - 1), 0.0);
    y[0] = b1_0;
    for (std::size_t i = 0; i < w0.size(); ++i) y[1 + i] = w0[i];
    y[d - 1] = a1_0;
    std::vector<double> y0_chain(y.begin(), y.begin() + static_cast<long>(d));

    ode::Ode45Options opt;
    opt.rtol = 1e-11;
    opt.atol = 1e-14;
    opt.t_end = 1e6;
    auto full_rhs = [&](const std::vector<double>& s, std::vector<double>& dy) {
        std::vector<double> chain(s.begin(), s.begin() + static_cast<long>(d));
        std::vector<double> dchain(d);
        rhs.eval(chain, dchain);
        for (std::size_t i = 0; i < d; ++i) dy[i] = dchain[i];
        // relation integrands: var_j' * phi(m_{j-1})/phi'(m_{j-1}) / (phi(m_{j-2}) kappa_j)
        auto m = rhs.preacts(chain);
        for (std::size_t j = 2; j <= d; ++j) {
            double num = nonlin.phi(m[j - 1]);
            double den = nonlin.dphi(m[j - 1]);
            double prev = j >= 3 ? nonlin.phi(m[j - 2]) : 1.0;
            double kappa = j <= d - 1 ? static_cast<double>(widths[j - 1]) : 1.0;
            double rate = dchain[j - 2]; // var_{j-1} is y[j-2]
            dy[d + (j - 2)] = (num / den) * rate / (prev * kappa);
        }
    };
    auto stop = [&](double, const std::vector<double>& s) {
        std::vector<double> chain(s.begin(), s.begin() + static_cast<long>(d));
        double r = rhs.residual(chain);
        return 0.5 * r * r < loss_tol;
    };
    ode::ode45(full_rhs, y, opt, stop);

    TheorySol sol;
    sol.widths = widths;
    sol.nonlin_name = nonlin.name();
    sol.chain.assign(y.begin(), y.begin() + static_cast<long>(d));

    // verify the chained integral relations
    for (std::size_t j = 2; j <= d; ++j) {
        double varj = sol.chain[j - 1];
        double varj0 = y0_chain[j - 1];
        double lhs = 0.5 * (varj * varj - varj0 * varj0);
        double res = std::fabs(lhs - y[d + (j - 2)]);
        sol.relation_residual = std::max(sol.relation_residual, res);
    }
    if (sol.relation_residual > 1e-4)
        throw std::runtime_error("solve_deep: integral-relation verification failed (flow did not converge)");

    auto m = rhs.preacts(sol.chain);
    double r = rhs.residual(sol.chain);
    sol.interp_residual = std::fabs(r);
    if (sol.interp_residual > 1e-6)
        throw std::runtime_error("solve_deep: flow did not reach the interpolating limit");
    // lambda1 = [prod_{i=2}^{d-1} phi'(m_i) w_i k_{i-1}] phi'(b1) b1 / phi(m_{d-1})
    double lam = nonlin.dphi(sol.chain[0]) * sol.chain[0];
    for (std::size_t i = 2; i <= d - 1; ++i)
        lam *= nonlin.dphi(m[i]) * sol.chain[i - 1] * static_cast<double>(widths[i - 2]);
    lam /= nonlin.phi(m[d - 1]);
    sol.lambda1 = lam;
    // report the effective (u, v) pair for the degenerate depth-2 case
    if (d == 2) {
        sol.v = sol.chain[0];
        sol.u = sol.chain[1];
        sol.root_residual = std::fabs(sol.u * nonlin.phi(sol.v) - 1.0 / static_cast<double>(widths[0]));
        sol.energy_residual = sol.relation_residual;
    }
    return sol;
}

// Predicted spectral radius of the composed sequence map: the product of the
// per-step eigenvalue factors phi'(v) v / phi(v).
inline double sequence_spectrum(const std::vector<TheorySol>& steps) {
    double prod = 1.0;
    for (const TheorySol& s : steps) prod *= s.lambda1;
    return prod;
}

// Interpolating net that is provably not an attractor: pick b with
// |phi'(b) b / phi(b)| > 1, set a = 1/(k phi(b)); then f(x) = x and the
// Jacobian at x has spectral radius |phi'(b) b / phi(b)| > 1.
inline Net construct_non_attractor(Nonlin nonlin, const Vec& x, std::size_t k) {
    if (std::fabs(x.norm2() - 1.0) > 1e-9)
        throw std::invalid_argument("construct_non_attractor: x must have unit norm");
    double best_z = 0.0, best_score = -1.0;
    bool found = false;
    for (double z = -10.0; z <= 10.0; z += 1e-3) {
        double pz = nonlin.phi(z);
        double dz = nonlin.dphi(z);
        if (!std::isfinite(pz) || !std::isfinite(dz) || std::fabs(pz) < 1e-12) continue;
        double ratio = std::fabs(dz * z / pz);
        if (ratio <= 1.0 + 1e-9) continue;
        double score = -std::fabs(ratio - 2.0); // prefer a modest expansion factor
        if (!found || score > best_score) {
            best_score = score;
            best_z = z;
            found = true;
        }
    }
    if (!found)
        throw std::runtime_error("construct_non_attractor: no interval with |phi'(z) z / phi(z)| > 1 in [-10, 10] for " +
                                 nonlin.name());
    double b = best_z;
    double a = 1.0 / (static_cast<double>(k) * nonlin.phi(b));
    InitScheme scheme = InitScheme::rank1_equal(x, a, b);
    return init_net({x.dim(), k, x.dim()}, scheme, nonlin);
}

} // namespace amem
