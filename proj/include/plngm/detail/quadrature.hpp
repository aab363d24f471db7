#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace plngm::detail {

template <std::size_t K>
struct QuadratureResult {
    std::array<double, K> value{};
    std::array<double, K> error{};
    std::array<double, K> l1{};
    int intervals = 0;
    bool converged = false;
};

template <std::size_t K>
struct Panel {
    double a, b;
    std::array<double, K> value, error, l1;
    double priority;  // largest error-to-tolerance ratio across components
    bool operator<(const Panel& o) const { return priority < o.priority; }
};

/// One 7/15-point Gauss-Kronrod evaluation of a vector-valued integrand on [a, b].
template <std::size_t K, class F>
Panel<K> gk15_panel(F& f, double a, double b) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    const auto& x = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = G::weights();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);

    Panel<K> out{a, b, {}, {}, {}, 0.0};
    std::array<double, K> gauss{};
    const auto f0 = f(mid);
    for (std::size_t k = 0; k < K; ++k) {
        out.value[k] = f0[k] * wk[0];
        out.l1[k] = std::abs(f0[k]) * wk[0];
        gauss[k] = f0[k] * wg[0];
    }
    for (std::size_t i = 1; i < x.size(); ++i) {
        const auto fp = f(mid + half * x[i]);
        const auto fm = f(mid - half * x[i]);
        for (std::size_t k = 0; k < K; ++k) {
            out.value[k] += (fp[k] + fm[k]) * wk[i];
            out.l1[k] += (std::abs(fp[k]) + std::abs(fm[k])) * wk[i];
            if (i % 2 == 0) gauss[k] += (fp[k] + fm[k]) * wg[i / 2];
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        out.value[k] *= half;
        out.l1[k] *= half;
        gauss[k] *= half;
        out.error[k] = std::max(std::abs(out.value[k] - gauss[k]), 4e-16 * std::abs(out.value[k]));
    }
    return out;
}

/**
 * Globally adaptive Gauss-Kronrod integration of K integrands at once over
 * the consecutive panels [breaks[0], breaks[1]], ... . Terminates when the
 * summed error of every component is at most rel_tol times that component's
 * L1 norm, or when max_intervals is exhausted (converged = false).
 */
template <std::size_t K, class F>
QuadratureResult<K> integrate_adaptive(F&& f, const std::vector<double>& breaks, double rel_tol,
                                       int max_intervals = 4000) {
    QuadratureResult<K> res;
    std::priority_queue<Panel<K>> heap;
    std::array<double, K> value{}, error{}, l1{};

    auto push = [&](Panel<K> panel) {
        for (std::size_t k = 0; k < K; ++k) {
            value[k] += panel.value[k];
            error[k] += panel.error[k];
            l1[k] += panel.l1[k];
        }
        double pr = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            pr = std::max(pr, panel.error[k] / (l1[k] > 0.0 ? l1[k] : 1.0));
        }
        panel.priority = pr;
        heap.push(std::move(panel));
        ++res.intervals;
    };
    auto done = [&] {
        for (std::size_t k = 0; k < K; ++k) {
            if (error[k] > rel_tol * l1[k]) return false;
        }
        return true;
    };
    auto reprioritize = [&] {
        // Priorities depend on global L1 norms, so rebuild after they change.
        std::vector<Panel<K>> all;
        all.reserve(heap.size());
        while (!heap.empty()) {
            all.push_back(heap.top());
            heap.pop();
        }
        for (auto& panel : all) {
            double pr = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double scale = l1[k] > 0.0 ? l1[k] : 1.0;
                pr = std::max(pr, panel.error[k] / scale);
            }
            panel.priority = pr;
            heap.push(std::move(panel));
        }
    };

    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i + 1] > breaks[i]) push(gk15_panel<K>(f, breaks[i], breaks[i + 1]));
    }
    reprioritize();

    int since_rebuild = 0;
    while (!done()) {
        if (res.intervals >= max_intervals || heap.empty()) {
            res.value = value;
            res.error = error;
            res.l1 = l1;
            return res;
        }
        Panel<K> worst = heap.top();
        heap.pop();
        for (std::size_t k = 0; k < K; ++k) {
            value[k] -= worst.value[k];
            error[k] -= worst.error[k];
            l1[k] -= worst.l1[k];
        }
        --res.intervals;
        const double mid = 0.5 * (worst.a + worst.b);
        push(gk15_panel<K>(f, worst.a, mid));
        push(gk15_panel<K>(f, mid, worst.b));
        if (++since_rebuild >= 16) {
            reprioritize();
            since_rebuild = 0;
        }
    }
    // Recompute sums from the panels to shed accumulated rounding from the running updates.
    value = {};
    error = {};
    l1 = {};
    while (!heap.empty()) {
        const auto& panel = heap.top();
        for (std::size_t k = 0; k < K; ++k) {
            value[k] += panel.value[k];
            error[k] += panel.error[k];
            l1[k] += panel.l1[k];
        }
        heap.pop();
    }
    res.value = value;
    res.error = error;
    res.l1 = l1;
    res.converged = true;
    return res;
}

} // namespace plngm::detail
