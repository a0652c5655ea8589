#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "levyhedge/config.hpp"
#include "levyhedge/pipeline.hpp"
#include "levyhedge/serialize.hpp"

using namespace levyhedge;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    auto d = fs::temp_directory_path() / (std::string("levyhedge_test_") + tag);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kTinyConfig = R"(
[model]
family = "merton"
sigma = 0.2
gamma_s = -0.02
params = [0.3, -0.1, 0.15]
[payoff]
kind = "call"
strike = 1.0
[experiment]
maturity = 1.0
n_values = [8, 16, 32, 64]
paths_per_n = 1000
seed = 7
grid_size = 1024
)";

} // namespace

TEST_CASE("TOML subset parsing") {
    auto t = Toml::parse(R"(
# header comment
title = "abc # not a comment"
flag = true
count = 12
[sec]
x = -1.5e-2   # trailing comment
names = ["a", "b"]
nums = [1, 2, 3]
)");
    CHECK(t.get<std::string>("title") == "abc # not a comment");
    CHECK(t.get<bool>("flag"));
    CHECK(t.number("count") == 12.0);
    CHECK_THAT(t.number("sec.x"), Catch::Matchers::WithinAbs(-0.015, 1e-18));
    CHECK(t.get<std::vector<std::string>>("sec.names") ==
          std::vector<std::string>{"a", "b"});
    CHECK(t.get<std::vector<double>>("sec.nums") ==
          std::vector<double>{1.0, 2.0, 3.0});
    CHECK(t.has("sec.x"));
    CHECK_FALSE(t.has("sec.missing"));
    CHECK(t.number_or("sec.missing", 9.0) == 9.0);
}

TEST_CASE("malformed TOML reports the offending line") {
    try {
        Toml::parse("a = 1\nb == 2\n", "bad.toml");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("bad.toml") != std::string::npos);
        CHECK(what.find("2") != std::string::npos);
    }
    CHECK_THROWS_AS(Toml::parse("x = \"unterminated\n"), ConfigError);
    CHECK_THROWS_AS(Toml::parse("[sec\nx = 1\n"), ConfigError);
}

TEST_CASE("config hash is stable and content-sensitive") {
    const std::string a = kTinyConfig;
    CHECK(config_hash_hex(a) == config_hash_hex(std::string(kTinyConfig)));
    CHECK(config_hash_hex(a).size() == 16);
    CHECK(config_hash_hex(a) != config_hash_hex(a + "\n# extra\n"));
}

TEST_CASE("default config text round-trips through the loader") {
    auto t = Toml::parse(default_config_text());
    auto c = load_experiment(t);
    CHECK(c.maturity > 0.0);
    CHECK_FALSE(c.n_values.empty());
}

TEST_CASE("experiment validation") {
    auto load_with = [](const std::string& patch) {
        return load_experiment(Toml::parse(std::string(kTinyConfig) + patch));
    };
    CHECK_THROWS_AS(load_with("kappa = 0.5\n"), ConfigError);
    CHECK_THROWS_AS(load_with("epsilon_rule = \"weird\"\n"), ConfigError);
    CHECK_THROWS_AS(
        load_experiment(Toml::parse(R"(
[model]
family = "merton"
sigma = 0.2
gamma = 0.0
gamma_s = -0.02
params = [0.3, -0.1, 0.15]
[payoff]
kind = "call"
strike = 1.0
[experiment]
maturity = 1.0
n_values = [8, 16]
)")),
        ConfigError); // gamma and gamma_s are mutually exclusive
    CHECK_THROWS_AS(
        load_experiment(Toml::parse(R"(
[model]
family = "merton"
sigma = 0.2
gamma_s = -0.02
params = [0.3, -0.1, 0.15]
[payoff]
kind = "call"
strike = 1.0
[experiment]
maturity = 1.0
n_values = [16, 8]
)")),
        ConfigError); // n values must increase
    CHECK_THROWS_AS(load_experiment(Toml::parse("[model]\nfamily = \"sabr\"\n")),
                    ConfigError);
}

TEST_CASE("model construction honors the requested price drift") {
    auto c = load_experiment(Toml::parse(kTinyConfig));
    auto t = build_triplet(c.model);
    CHECK_THAT(market_coefficients(t).gamma_s,
               Catch::Matchers::WithinAbs(-0.02, 1e-12));
}

TEST_CASE("CSV writer emits the output contract") {
    auto dir = temp_dir("csv");
    const auto path = dir / "out.csv";
    {
        CsvWriter w(path, "deadbeefdeadbeef", {"a", "b"});
        w.row({1.0, 0.5});
        w.row({-2.0, 1e-17});
    }
    const std::string text = slurp(path);
    CHECK(text.find("# levyhedge ") == 0);
    CHECK(text.find("config=deadbeefdeadbeef") != std::string::npos);
    CHECK(text.find("a,b\n") != std::string::npos);
    CHECK(text.find("1,0.5\n") != std::string::npos);
    CHECK(text.find("\r") == std::string::npos); // LF endings only
    CsvWriter w2(dir / "w.csv", "x", {"a", "b"});
    CHECK_THROWS_AS(w2.row({1.0}), PreconditionViolated);
}

TEST_CASE("JSON writer puts provenance first and keeps key order") {
    auto dir = temp_dir("json");
    Json body;
    body["zeta"] = 1;
    body["alpha"] = 2;
    write_json(dir / "o.json", body, "cafe");
    const std::string text = slurp(dir / "o.json");
    const auto pv = text.find("\"version\"");
    const auto pc = text.find("\"config\"");
    const auto pz = text.find("\"zeta\"");
    const auto pa = text.find("\"alpha\"");
    REQUIRE(pv != std::string::npos);
    CHECK(pv < pc);
    CHECK(pc < pz);
    CHECK(pz < pa); // insertion order preserved, not alphabetized
}

TEST_CASE("synthetic error replay reproduces exact power laws") {
    auto dir = temp_dir("replay");
    const auto file = dir / "errors.txt";
    {
        std::ofstream out(file);
        out << std::setprecision(17);
        for (double n : {8.0, 16.0, 32.0, 64.0, 128.0})
            for (int i = 0; i < 4; ++i) out << n << " " << std::pow(n, -0.5) << "\n";
    }
    auto c = load_experiment(Toml::parse(std::string(kTinyConfig) +
                                         "r = 1.0\nsynthetic_errors = \"" +
                                         file.string() + "\"\n"));
    auto out = run_rates(c);
    CHECK(out.synthetic);
    CHECK(out.params.source == "replay");
    CHECK_THAT(out.corrected.slope, Catch::Matchers::WithinAbs(-0.5, 1e-9));
    CHECK(out.corrected.verdict == Verdict::Consistent);
}

TEST_CASE("rate experiments reject configurations that cannot regress") {
    auto c = load_experiment(Toml::parse(kTinyConfig));
    c.n_values = {8, 16};
    CHECK_THROWS_AS(run_rates(c), ConfigError);
    c = load_experiment(Toml::parse(kTinyConfig));
    c.paths_per_n = 10;
    CHECK_THROWS_AS(run_rates(c), ConfigError);
}

TEST_CASE("pipeline results are deterministic for a fixed config") {
    auto c = load_experiment(Toml::parse(kTinyConfig));
    c.n_values = {4, 8, 16, 32};
    c.paths_per_n = 1000;
    c.table_t_cells = 48;
    c.table_y_cells = 96;
    auto a = run_rates(c);
    auto b = run_rates(c, 4); // thread count must not change results
    REQUIRE(a.per_n.size() == b.per_n.size());
    for (std::size_t i = 0; i < a.per_n.size(); ++i) {
        CHECK(a.per_n[i].l2_corr.value == b.per_n[i].l2_corr.value);
        CHECK(a.per_n[i].l2_rm.value == b.per_n[i].l2_rm.value);
    }
    CHECK(a.corrected.slope == b.corrected.slope);
}

#ifdef LEVYHEDGE_CLI
TEST_CASE("command-line interface contract") {
    const std::string cli = LEVYHEDGE_CLI;
    auto dir = temp_dir("cli");
    const auto cfg = dir / "cfg.toml";
    {
        std::ofstream out(cfg);
        out << kTinyConfig;
        out << "[strategy]\nt_grid = [0.0, 0.5]\ny_grid = [0.9, 1.0, 1.1]\n";
    }
    auto run = [&](const std::string& args) {
        const int rc = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
        return WEXITSTATUS(rc);
    };
    SECTION("print-defaults succeeds") { CHECK(run("--print-defaults") == 0); }
    SECTION("usage and config errors exit 1") {
        CHECK(run("coeffs") == 1); // --config is required
        CHECK(run("coeffs --config /nonexistent.toml") == 1);
        const auto bad = dir / "bad.toml";
        std::ofstream(bad) << "a == b\n";
        CHECK(run("coeffs --config " + bad.string()) == 1);
    }
    SECTION("coeffs writes deterministic provenance-stamped JSON") {
        const auto o1 = dir / "o1";
        const auto o2 = dir / "o2";
        fs::create_directories(o1);
        fs::create_directories(o2);
        REQUIRE(run("coeffs --config " + cfg.string() + " --out " + o1.string()) == 0);
        REQUIRE(run("coeffs --config " + cfg.string() + " --out " + o2.string()) == 0);
        const std::string j1 = slurp(o1 / "coeffs.json");
        CHECK(j1 == slurp(o2 / "coeffs.json")); // byte identical
        CHECK(j1.find("\"version\"") != std::string::npos);
        CHECK(j1.find("gamma_s") != std::string::npos);
    }
    SECTION("strategy emits the CSV header and grid") {
        const auto o = dir / "ost";
        fs::create_directories(o);
        REQUIRE(run("strategy --config " + cfg.string() + " --out " + o.string()) ==
                0);
        const std::string csv = slurp(o / "strategy.csv");
        CHECK(csv.find("# levyhedge ") == 0);
        CHECK(csv.find("t,y,theta") != std::string::npos);
    }
    SECTION("rate verdict drives the exit code") {
        const auto good = dir / "good.txt";
        const auto bad = dir / "bad.txt";
        {
            std::ofstream g(good), b(bad);
            g << std::setprecision(17);
            b << std::setprecision(17);
            for (double n : {8.0, 16.0, 32.0, 64.0})
                for (int i = 0; i < 4; ++i) {
                    g << n << " " << std::pow(n, -0.5) << "\n";
                    b << n << " " << std::pow(n, -1.0 / 3.0) << "\n";
                }
        }
        auto cfg_for = [&](const fs::path& f, const char* name) {
            const auto p = dir / name;
            std::ofstream out(p);
            out << kTinyConfig << "r = 1.0\nsynthetic_errors = \"" << f.string()
                << "\"\n";
            return p;
        };
        const auto og = dir / "rg";
        const auto ob = dir / "rb";
        fs::create_directories(og);
        fs::create_directories(ob);
        CHECK(run("rates --config " + cfg_for(good, "cg.toml").string() + " --out " +
                  og.string()) == 0);
        CHECK(run("rates --config " + cfg_for(bad, "cb.toml").string() + " --out " +
                  ob.string()) == 2);
        CHECK(fs::exists(og / "rates.json"));
        CHECK(fs::exists(og / "rates.dat"));
        CHECK(fs::exists(og / "rates.gp"));
    }
    SECTION("seed environment override changes simulated output") {
        const auto o1 = dir / "s1";
        const auto o2 = dir / "s2";
        fs::create_directories(o1);
        fs::create_directories(o2);
        const auto scfg = dir / "sim.toml";
        {
            std::ofstream out(scfg);
            out << kTinyConfig << "table_t_cells = 48\ntable_y_cells = 96\n";
        }
        REQUIRE(run("simulate --config " + scfg.string() + " --out " + o1.string()) ==
                0);
        const int rc = std::system(("LEVYHEDGE_SEED=99 " + cli + " simulate --config " +
                                    scfg.string() + " --out " + o2.string() +
                                    " > /dev/null 2>&1")
                                       .c_str());
        REQUIRE(WEXITSTATUS(rc) == 0);
        CHECK(slurp(o1 / "hedge_runs.csv") != slurp(o2 / "hedge_runs.csv"));
    }
}
#endif
