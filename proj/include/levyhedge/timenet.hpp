#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "levyhedge/errors.hpp"

namespace levyhedge {

// Deterministic rebalancing times; knots[0] = 0, knots.back() = T.
//
// `ttm` carries T - t_i computed without cancellation: for strongly adapted
// nets (small theta, large n) the last knots are closer to T than one ulp, so
// t_i alone cannot represent the net and the mesh functional must be taken
// from ttm. knots[i] == T - ttm[i] up to rounding and may repeat near T.
struct TimeNet {
    std::vector<double> knots;
    std::vector<double> ttm; // strictly decreasing, ttm[0] = T, ttm.back() = 0
    std::optional<double> theta_tag;

    double maturity() const { return ttm.front(); }
    std::size_t intervals() const { return knots.size() - 1; }
};

// t_i = T (1 - (1 - i/n)^{1/theta}); theta = 1 gives the uniform net.
inline TimeNet adapted_time_net(std::size_t n, double theta, double T) {
    if (n < 1) throw PreconditionViolated("time net needs n >= 1");
    if (!(theta > 0.0 && theta <= 1.0))
        throw PreconditionViolated("theta must lie in (0, 1]");
    if (!(T > 0.0)) throw PreconditionViolated("maturity must be positive");
    TimeNet net;
    net.theta_tag = theta;
    net.knots.reserve(n + 1);
    net.ttm.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double frac = 1.0 - double(i) / double(n); // exact at i = 0, n
        const double s = theta == 1.0 ? frac : std::pow(frac, 1.0 / theta);
        net.ttm.push_back(T * s);
        net.knots.push_back(i == 0 ? 0.0 : T - T * s);
    }
    net.ttm.back() = 0.0;
    net.knots.back() = T;
    return net;
}

inline TimeNet uniform_time_net(std::size_t n, double T) {
    return adapted_time_net(n, 1.0, T);
}

// Net from explicit knots (strictly increasing, starting at 0).
inline TimeNet explicit_time_net(std::vector<double> knots) {
    if (knots.size() < 2 || knots.front() != 0.0)
        throw PreconditionViolated("net needs knots {0, ..., T}");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i] > knots[i - 1]))
            throw PreconditionViolated("net knots must be strictly increasing");
    TimeNet net;
    const double T = knots.back();
    for (double t : knots) net.ttm.push_back(T - t);
    net.ttm.back() = 0.0;
    net.knots = std::move(knots);
    return net;
}

// ||tau||_theta = max_i (t_i - t_{i-1}) / (T - t_{i-1})^{1-theta}.
inline double mesh_size(const TimeNet& net, double theta) {
    if (net.ttm.size() < 2) throw PreconditionViolated("net needs >= 2 knots");
    double m = 0.0;
    for (std::size_t i = 1; i < net.ttm.size(); ++i) {
        const double dt = net.ttm[i - 1] - net.ttm[i];
        if (dt <= 0.0) continue;
        m = std::max(m, dt / std::pow(net.ttm[i - 1], 1.0 - theta));
    }
    return m;
}

} // namespace levyhedge
