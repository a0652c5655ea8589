#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "levyhedge/errors.hpp"
#include "levyhedge/rng.hpp"

namespace levyhedge {

enum class PayoffKind { Call, Put, PowerCall, Binary, Linear, Constant, Custom };

// European payoff g applied to the terminal price, with its declared
// regularity: Holder exponent eta and (optionally) Sobolev integrability q.
struct Payoff {
    PayoffKind kind = PayoffKind::Call;
    double strike = 1.0;
    double power = 1.0;    // PowerCall exponent
    double constant = 0.0; // Constant level
    std::function<double(double)> fn; // Custom
    double holder_eta = 1.0;
    std::optional<double> sobolev_q;

    double operator()(double y) const {
        switch (kind) {
            case PayoffKind::Call: return std::max(y - strike, 0.0);
            case PayoffKind::Put: return std::max(strike - y, 0.0);
            case PayoffKind::PowerCall:
                return std::pow(std::max(y - strike, 0.0), power);
            case PayoffKind::Binary: return y >= strike ? 1.0 : 0.0;
            case PayoffKind::Linear: return y;
            case PayoffKind::Constant: return constant;
            case PayoffKind::Custom: return fn(y);
        }
        return 0.0;
    }

    std::string name() const {
        switch (kind) {
            case PayoffKind::Call: return "call";
            case PayoffKind::Put: return "put";
            case PayoffKind::PowerCall: return "power_call";
            case PayoffKind::Binary: return "binary";
            case PayoffKind::Linear: return "linear";
            case PayoffKind::Constant: return "constant";
            case PayoffKind::Custom: return "custom";
        }
        return "?";
    }
};

inline Payoff call_payoff(double strike) {
    Payoff p;
    p.kind = PayoffKind::Call;
    p.strike = strike;
    p.holder_eta = 1.0;
    return p;
}

inline Payoff put_payoff(double strike) {
    Payoff p;
    p.kind = PayoffKind::Put;
    p.strike = strike;
    p.holder_eta = 1.0;
    return p;
}

inline Payoff power_call_payoff(double strike, double eta) {
    if (eta <= 0.0 || eta > 1.0)
        throw PreconditionViolated("power-call exponent must lie in (0,1]");
    Payoff p;
    p.kind = PayoffKind::PowerCall;
    p.strike = strike;
    p.power = eta;
    p.holder_eta = eta;
    return p;
}

inline Payoff binary_payoff(double strike) {
    Payoff p;
    p.kind = PayoffKind::Binary;
    p.strike = strike;
    p.holder_eta = 0.0;
    return p;
}

inline Payoff linear_payoff() {
    Payoff p;
    p.kind = PayoffKind::Linear;
    p.holder_eta = 1.0;
    return p;
}

inline Payoff constant_payoff(double c) {
    Payoff p;
    p.kind = PayoffKind::Constant;
    p.constant = c;
    p.holder_eta = 1.0;
    return p;
}

inline Payoff custom_payoff(std::function<double(double)> fn, double holder_eta,
                            std::optional<double> sobolev_q = std::nullopt) {
    Payoff p;
    p.kind = PayoffKind::Custom;
    p.fn = std::move(fn);
    p.holder_eta = holder_eta;
    p.sobolev_q = sobolev_q;
    return p;
}

// Spot check |g(x) - g(y)| <= c |x - y|^eta on random pairs in (0, span).
inline bool holder_spot_check(const Payoff& g, double c, int pairs = 200,
                              double span = 5.0, std::uint64_t seed = 11) {
    PathRng rng(seed);
    for (int i = 0; i < pairs; ++i) {
        const double x = span * rng.uniform(), y = span * rng.uniform();
        if (x == y) continue;
        const double lhs = std::abs(g(x) - g(y));
        if (lhs > c * std::pow(std::abs(x - y), g.holder_eta) + 1e-12) return false;
    }
    return true;
}

} // namespace levyhedge
