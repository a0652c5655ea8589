#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "levyhedge/errors.hpp"
#include "levyhedge/market.hpp"
#include "levyhedge/payoff.hpp"

namespace levyhedge {

// Minimal TOML subset: [section] headers, key = value with string, bool,
// number, or flat numeric/string arrays; # comments. Enough for experiment
// files while keeping parse errors precise (line numbers in every message).
class Toml {
public:
    using Value = std::variant<std::string, double, bool, std::vector<double>,
                               std::vector<std::string>>;

    static Toml parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    static Toml parse(const std::string& text, const std::string& origin = "<string>") {
        Toml t;
        t.raw_ = text;
        std::istringstream in(text);
        std::string line, section;
        int ln = 0;
        while (std::getline(in, line)) {
            ++ln;
            const std::string s = strip(strip_comment(line));
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(ln) +
                                      ": unterminated section header");
                section = strip(s.substr(1, s.size() - 2));
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(ln) +
                                  ": expected key = value");
            const std::string key = strip(s.substr(0, eq));
            const std::string val = strip(s.substr(eq + 1));
            if (key.empty() || val.empty())
                throw ConfigError(origin + ":" + std::to_string(ln) +
                                  ": empty key or value");
            t.values_[section.empty() ? key : section + "." + key] =
                parse_value(val, origin, ln);
        }
        return t;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    template <typename T>
    std::optional<T> find(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        if (const T* v = std::get_if<T>(&it->second)) return *v;
        // Ints parse as doubles; allow narrow retrieval paths via double.
        throw ConfigError("config key '" + key + "' has the wrong type");
    }

    template <typename T>
    T get(const std::string& key) const {
        auto v = find<T>(key);
        if (!v) throw ConfigError("missing config key '" + key + "'");
        return *v;
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) const {
        auto v = find<T>(key);
        return v ? *v : fallback;
    }

    double number(const std::string& key) const { return get<double>(key); }
    double number_or(const std::string& key, double fb) const {
        return get_or<double>(key, fb);
    }
    std::string str_or(const std::string& key, std::string fb) const {
        return get_or<std::string>(key, std::move(fb));
    }

    const std::string& raw_text() const { return raw_; }
    const std::map<std::string, Value>& values() const { return values_; }

private:
    static std::string strip_comment(const std::string& s) {
        bool in_str = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') in_str = !in_str;
            if (s[i] == '#' && !in_str) return s.substr(0, i);
        }
        return s;
    }
    static std::string strip(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace((unsigned char)s[a])) ++a;
        while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
        return s.substr(a, b - a);
    }
    static Value parse_value(const std::string& v, const std::string& origin, int ln) {
        auto fail = [&](const std::string& msg) -> ConfigError {
            return ConfigError(origin + ":" + std::to_string(ln) + ": " + msg);
        };
        if (v.front() == '"') {
            if (v.size() < 2 || v.back() != '"') throw fail("unterminated string");
            return v.substr(1, v.size() - 2);
        }
        if (v == "true") return true;
        if (v == "false") return false;
        if (v.front() == '[') {
            if (v.back() != ']') throw fail("unterminated array");
            std::vector<double> nums;
            std::vector<std::string> strs;
            std::string body = v.substr(1, v.size() - 2);
            std::istringstream in(body);
            std::string item;
            while (std::getline(in, item, ',')) {
                const std::string e = strip(item);
                if (e.empty()) continue;
                if (e.front() == '"') {
                    if (e.size() < 2 || e.back() != '"')
                        throw fail("unterminated string in array");
                    strs.push_back(e.substr(1, e.size() - 2));
                } else {
                    nums.push_back(parse_number(e, fail));
                }
            }
            if (!strs.empty() && !nums.empty())
                throw fail("mixed array element types");
            if (!strs.empty()) return strs;
            return nums;
        }
        return parse_number(v, fail);
    }
    template <typename F>
    static double parse_number(const std::string& v, F&& fail) {
        std::size_t pos = 0;
        double d = 0.0;
        try {
            d = std::stod(v, &pos);
        } catch (const std::exception&) {
            throw fail("not a number: '" + v + "'");
        }
        if (pos != v.size()) throw fail("trailing characters after number: '" + v + "'");
        return d;
    }

    std::string raw_;
    std::map<std::string, Value> values_;
};

// FNV-1a over the raw config text; embedded in every output header.
inline std::uint64_t config_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash_hex(const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  (unsigned long long)config_hash(text));
    return buf;
}

// ---- typed experiment configuration -------------------------------------

struct ModelSpec {
    std::string family; // bs | merton | kou | cgmy | nig | atoms
    double sigma = 0.0;
    double gamma = 0.0;
    std::optional<double> gamma_s; // alternative drift spec: target gamma_S
    std::vector<double> params;    // family parameters, see build
};

struct ExperimentConfig {
    ModelSpec model;
    Payoff payoff;
    double maturity = 1.0;
    double s0 = 1.0;
    std::vector<std::size_t> n_values;
    std::size_t paths_per_n = 1000;
    std::optional<double> theta_override;
    std::optional<double> r_override;
    std::optional<double> kappa_override;
    bool epsilon_fixed = false;
    double epsilon_value = 0.1; // when fixed
    double eta_weight = 1.0;
    std::uint64_t seed = 1;
    std::size_t grid_size = std::size_t(1) << 14;
    std::size_t table_t_cells = 192;
    std::size_t table_y_cells = 384;
    std::size_t mc_paths = 20000;
    // strategy surface grids
    std::vector<double> t_grid, y_grid;
    // representation check
    double rep_threshold = 0.0;
    std::vector<std::size_t> rep_levels{1 << 12, 1 << 13, 1 << 14};
    std::size_t rep_paths = 4000;
    std::string synthetic_errors; // replay file for rate regression, optional
    std::string hash;
};

inline LevyTriplet build_triplet(const ModelSpec& m,
                                 const QuadratureOptions& qopts = {}) {
    MeasurePtr nu;
    const auto& p = m.params;
    auto need = [&](std::size_t n, const char* what) {
        if (p.size() != n)
            throw ConfigError(std::string("model family '") + m.family +
                              "' needs parameters " + what);
    };
    if (m.family == "bs" || m.family == "none" || m.family.empty()) {
        need(0, "(none)");
        nu = zero_measure();
    } else if (m.family == "merton") {
        need(3, "[lambda, mu_j, sigma_j]");
        nu = merton_measure(p[0], p[1], p[2]);
    } else if (m.family == "kou") {
        need(4, "[lambda, p, eta_plus, eta_minus]");
        nu = kou_measure(p[0], p[1], p[2], p[3]);
    } else if (m.family == "cgmy") {
        need(4, "[C, G, M, Y]");
        nu = cgmy_measure(p[0], p[1], p[2], p[3]);
    } else if (m.family == "nig") {
        need(3, "[alpha, beta, delta]");
        nu = nig_measure(p[0], p[1], p[2]);
    } else if (m.family == "atoms") {
        if (p.empty() || p.size() % 2 != 0)
            throw ConfigError("atoms family needs [x1, i1, x2, i2, ...]");
        std::vector<JumpAtom> atoms;
        for (std::size_t i = 0; i < p.size(); i += 2)
            atoms.push_back({p[i], p[i + 1]});
        nu = compound_poisson(atoms);
    } else {
        throw ConfigError("unknown model family '" + m.family + "'");
    }
    double gamma = m.gamma;
    if (m.gamma_s) {
        // gamma_S = gamma + sigma^2/2 + K(1): solve for gamma.
        gamma = *m.gamma_s - 0.5 * m.sigma * m.sigma -
                compensated_exp_real(*nu, 1.0, qopts);
    }
    return make_triplet(gamma, m.sigma, nu);
}

inline Payoff build_payoff(const std::string& kind, double strike, double eta,
                           double level) {
    if (kind == "call") return call_payoff(strike);
    if (kind == "put") return put_payoff(strike);
    if (kind == "binary") return binary_payoff(strike);
    if (kind == "power_call") return power_call_payoff(strike, eta);
    if (kind == "linear") return linear_payoff();
    if (kind == "constant") return constant_payoff(level);
    throw ConfigError("unknown payoff kind '" + kind + "'");
}

inline ExperimentConfig load_experiment(const Toml& t) {
    ExperimentConfig c;
    c.hash = config_hash_hex(t.raw_text());

    c.model.family = t.str_or("model.family", "bs");
    c.model.sigma = t.number_or("model.sigma", 0.0);
    c.model.gamma = t.number_or("model.gamma", 0.0);
    if (t.has("model.gamma_s")) {
        if (t.has("model.gamma"))
            throw ConfigError("specify model.gamma or model.gamma_s, not both");
        c.model.gamma_s = t.number("model.gamma_s");
    }
    c.model.params = t.get_or<std::vector<double>>("model.params", {});
    {
        const std::vector<std::string> known{"bs",   "none", "",    "merton",
                                             "kou",  "cgmy", "nig", "atoms"};
        if (std::find(known.begin(), known.end(), c.model.family) == known.end())
            throw ConfigError("unknown model family '" + c.model.family + "'");
    }

    c.payoff = build_payoff(t.str_or("payoff.kind", "call"),
                            t.number_or("payoff.strike", 1.0),
                            t.number_or("payoff.eta", 1.0),
                            t.number_or("payoff.level", 0.0));

    c.maturity = t.number_or("experiment.maturity", 1.0);
    c.s0 = t.number_or("experiment.s0", 1.0);
    for (double n : t.get_or<std::vector<double>>("experiment.n_values", {})) {
        if (n < 1.0 || n != std::floor(n))
            throw ConfigError("experiment.n_values must be positive integers");
        if (!c.n_values.empty() && std::size_t(n) <= c.n_values.back())
            throw ConfigError("experiment.n_values must be strictly increasing");
        c.n_values.push_back(std::size_t(n));
    }
    c.paths_per_n = std::size_t(t.number_or("experiment.paths_per_n", 1000));
    if (t.has("experiment.theta")) c.theta_override = t.number("experiment.theta");
    if (t.has("experiment.r")) c.r_override = t.number("experiment.r");
    if (t.has("experiment.kappa")) {
        const double k = t.number("experiment.kappa");
        if (!(k >= 0.0 && k < 0.5))
            throw ConfigError("experiment.kappa must lie in [0, 1/2)");
        c.kappa_override = k;
    }
    const std::string rule = t.str_or("experiment.epsilon_rule", "power");
    if (rule == "fixed") {
        c.epsilon_fixed = true;
        c.epsilon_value = t.number("experiment.epsilon");
    } else if (rule != "power") {
        throw ConfigError("experiment.epsilon_rule must be 'power' or 'fixed'");
    }
    c.eta_weight = t.number_or("experiment.eta_weight", 1.0);
    c.seed = std::uint64_t(t.number_or("experiment.seed", 1.0));
    c.grid_size = std::size_t(t.number_or("experiment.grid_size", double(c.grid_size)));
    c.table_t_cells =
        std::size_t(t.number_or("experiment.table_t_cells", double(c.table_t_cells)));
    c.table_y_cells =
        std::size_t(t.number_or("experiment.table_y_cells", double(c.table_y_cells)));
    c.mc_paths = std::size_t(t.number_or("experiment.mc_paths", double(c.mc_paths)));
    c.synthetic_errors = t.str_or("experiment.synthetic_errors", "");

    c.t_grid = t.get_or<std::vector<double>>("strategy.t_grid", {});
    c.y_grid = t.get_or<std::vector<double>>("strategy.y_grid", {});

    c.rep_threshold = t.number_or("repcheck.threshold", 0.0);
    if (t.has("repcheck.levels")) {
        c.rep_levels.clear();
        for (double l : t.get<std::vector<double>>("repcheck.levels"))
            c.rep_levels.push_back(std::size_t(l));
    }
    c.rep_paths = std::size_t(t.number_or("repcheck.paths", double(c.rep_paths)));
    return c;
}

inline std::string default_config_text() {
    return R"([model]
family = "merton"        # bs | merton | kou | cgmy | nig | atoms
sigma = 0.2
gamma_s = -0.02          # or: gamma = ... (drift directly)
params = [0.3, -0.1, 0.15]

[payoff]
kind = "call"            # call | put | binary | power_call | linear | constant
strike = 1.0
# eta = 0.5              # power_call exponent
# level = 0.0            # constant payoff level

[experiment]
maturity = 1.0
s0 = 1.0
n_values = [8, 16, 32, 64, 128, 256]
paths_per_n = 4000
# theta = 1.0            # time-net exponent override (else rate-table row)
# r = 1.0                # rate parameter override
# kappa = 0.0            # threshold exponent override (else (1-theta)/2)
epsilon_rule = "power"   # power: eps = n^{-1/(2r)}; fixed: use epsilon
# epsilon = 0.1
eta_weight = 1.0
seed = 1
grid_size = 16384
table_t_cells = 192
table_y_cells = 384
mc_paths = 20000
# synthetic_errors = ""  # replay file: lines "n error" (rate command only)

[strategy]
t_grid = [0.0, 0.25, 0.5, 0.75, 0.9]
y_grid = [0.8, 0.9, 1.0, 1.1, 1.2]

[repcheck]
threshold = 0.0
levels = [4096, 8192, 16384]
paths = 4000
)";
}

} // namespace levyhedge
