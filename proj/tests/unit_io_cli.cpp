#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>
#include <xtreat/xtreat.hpp>

using namespace xtreat;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

const fs::path& scratch_root() {
    static const fs::path root = [] {
        const fs::path p = fs::temp_directory_path() / "xtreat_cli_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = scratch_root() / name;
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + XTREAT_CLI_PATH + "\" " + args + " > \"" +
                            log.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Dataset read_str(const std::string& text) {
    std::istringstream in(text);
    return read_dataset_csv(in);
}

// simulated input on disk for the CLI runs (treatment, covariate, outcome)
fs::path dgp1_csv(const fs::path& dir, std::size_t n, std::uint64_t seed) {
    SeededRng rng(seed, 0);
    const Dataset ds = dgp_sample(make_dgp1(), n, rng);
    const fs::path p = dir / "input.csv";
    write_dataset_csv_file(p.string(), ds);
    return p;
}

}  // namespace

TEST_CASE("doubles survive the text round trip", "[io]") {
    const std::vector<double> vals = {0.1,    1.0 / 3.0, 1e-300, 1e300,  -2.5e-17,
                                      0.999,  123456789.123, 0.0, -0.0,  5.623413251903491};
    for (double v : vals) {
        const std::string s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(42.0) == "42");
}

TEST_CASE("dataset CSV schema variants", "[io]") {
    SECTION("columns in any order") {
        const Dataset ds = read_str("y,x1,t\n1.5,0.2,0.3\n2.5,0.4,0.6\n");
        REQUIRE(ds.n() == 2);
        CHECK(ds.r == 1);
        CHECK(ds.obs[0].t == 0.3);
        CHECK(ds.obs[0].x[0] == 0.2);
        CHECK(ds.obs[0].y == 1.5);
        CHECK_FALSE(ds.has_weights());
    }

    SECTION("weight column") {
        const Dataset ds = read_str("t,y,weight\n0.1,5,2\n0.9,6,1\n");
        REQUIRE(ds.has_weights());
        CHECK(*ds.obs[0].weight == 2.0);
        CHECK(*ds.obs[1].weight == 1.0);
    }

    SECTION("comments, blank lines, CRLF") {
        const Dataset ds =
            read_str("# produced elsewhere\n\nt,y\r\n0.1,1\r\n# interleaved note\n0.2,2\r\n");
        REQUIRE(ds.n() == 2);
        CHECK(ds.obs[1].t == 0.2);
        CHECK(ds.obs[1].y == 2.0);
    }

    SECTION("two covariates") {
        const Dataset ds = read_str("x2,t,x1,y\n9,0.5,7,1\n8,0.6,6,2\n");
        CHECK(ds.r == 2);
        CHECK(ds.obs[0].x[0] == 7.0);
        CHECK(ds.obs[0].x[1] == 9.0);
    }
}

TEST_CASE("dataset CSV round trip is bitwise", "[io]") {
    SeededRng rng(606, 0);
    Dataset ds;
    ds.r = 2;
    for (int i = 0; i < 40; ++i) {
        Observation o;
        o.t = rng.uniform();
        o.x = {rng.normal(), std::pow(rng.uniform(), -0.7)};
        o.y = std::pow(rng.uniform(), -0.25) * 1e-3;
        o.weight = rng.uniform(0.5, 2.0);
        ds.obs.push_back(o);
    }
    std::ostringstream out;
    write_dataset_csv(out, ds);
    const std::string text = out.str();
    CHECK(text.rfind("t,x1,x2,y,weight\n", 0) == 0);

    const Dataset back = read_str(text);
    REQUIRE(back.n() == ds.n());
    CHECK(back.r == 2);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        CHECK(back.obs[i].t == ds.obs[i].t);
        CHECK(back.obs[i].x[0] == ds.obs[i].x[0]);
        CHECK(back.obs[i].x[1] == ds.obs[i].x[1]);
        CHECK(back.obs[i].y == ds.obs[i].y);
        CHECK(*back.obs[i].weight == *ds.obs[i].weight);
    }
}

TEST_CASE("dataset CSV reader rejects malformed input", "[io]") {
    CHECK_THROWS_WITH(read_str(""), ContainsSubstring("no header row"));
    CHECK_THROWS_WITH(read_str("# only comments\n"), ContainsSubstring("no header row"));
    CHECK_THROWS_WITH(read_str("t,y\n"), ContainsSubstring("no data rows"));
    CHECK_THROWS_WITH(read_str("t,y,foo\n0.1,1,2\n"), ContainsSubstring("unknown column 'foo'"));
    CHECK_THROWS_WITH(read_str("t,y,x0\n0.1,1,2\n"), ContainsSubstring("unknown column 'x0'"));
    CHECK_THROWS_WITH(read_str("t,y,xa\n0.1,1,2\n"), ContainsSubstring("unknown column 'xa'"));
    CHECK_THROWS_WITH(read_str("t,t,y\n0.1,0.2,1\n"), ContainsSubstring("duplicate column 't'"));
    CHECK_THROWS_WITH(read_str("t,x1\n0.1,1\n"), ContainsSubstring("missing required column 'y'"));
    CHECK_THROWS_WITH(read_str("y,x1\n1,1\n"), ContainsSubstring("missing required column 't'"));
    CHECK_THROWS_WITH(read_str("t,y,x2\n0.1,1,2\n"), ContainsSubstring("without gaps"));

    CHECK_THROWS_WITH(read_str("t,y\n0.1,1,9\n"),
                      ContainsSubstring("line 2: expected 2 fields, got 3"));
    CHECK_THROWS_WITH(read_str("t,y\n0.1,abc\n"),
                      ContainsSubstring("line 2: non-numeric value 'abc' in column 'y'"));
    CHECK_THROWS_WITH(read_str("t,y\n0.1,\n"), ContainsSubstring("empty value in column 'y'"));
    CHECK_THROWS_WITH(read_str("t,y\n0.1,1e999\n"), ContainsSubstring("non-numeric"));
    CHECK_THROWS_WITH(read_str("t,y\n0.1,nan\n"), ContainsSubstring("non-finite"));

    // dataset validation runs on the parsed rows
    CHECK_THROWS_WITH(read_str("t,y,weight\n0.1,1,0\n"),
                      ContainsSubstring("weight must be positive"));

    CHECK_THROWS_WITH(read_dataset_csv_file("/nonexistent/path.csv"),
                      ContainsSubstring("cannot open"));
}

TEST_CASE("parameter block and table rendering", "[io]") {
    Params params;
    params.add("alpha", 0.5);
    params.add("n", static_cast<std::size_t>(42));
    params.add("tuned", true);
    params.add("label", "run");

    Table table;
    table.columns = {"a", "b", "k"};
    auto& row = table.add_row();
    row.push_back(0.5);
    row.push_back("x");
    row.push_back(7);

    std::ostringstream os;
    write_table_csv(os, params, table);
    CHECK(os.str() ==
          "# alpha = 0.5\n# n = 42\n# tuned = true\n# label = run\na,b,k\n0.5,x,7\n");

    Table bad;
    bad.columns = {"a", "b"};
    bad.add_row().push_back(1.0);
    std::ostringstream sink;
    CHECK_THROWS_AS(write_table_csv(sink, params, bad), std::logic_error);
    CHECK_THROWS_AS(write_table_json(sink, params, bad), std::logic_error);
}

TEST_CASE("table JSON document structure round trips", "[io]") {
    Params params;
    params.add("h", 0.1);
    params.add("k_n", 60);

    Table table;
    table.columns = {"q", "method"};
    auto& r1 = table.add_row();
    r1.push_back(5.623413251903491);
    r1.push_back("hill");
    auto& r2 = table.add_row();
    r2.push_back(1.0 / 3.0);
    r2.push_back("pickands");

    std::ostringstream os;
    write_table_json(os, params, table);
    const json doc = json::parse(os.str());

    CHECK(doc["params"]["h"] == "0.10000000000000001");
    CHECK(doc["params"]["k_n"] == "60");
    REQUIRE(doc["rows"].size() == 2);
    CHECK(doc["rows"][0]["q"].get<double>() == 5.623413251903491);
    CHECK(doc["rows"][0]["method"] == "hill");
    CHECK(doc["rows"][1]["q"].get<double>() == 1.0 / 3.0);
}

TEST_CASE("CLI estimate matches the library bitwise", "[cli][mc]") {
    const fs::path dir = scratch_dir("estimate");
    const fs::path input = dgp1_csv(dir, 600, 4001);
    const int rc = run_cli("estimate --input \"" + input.string() +
                               "\" --output-dir \"" + dir.string() +
                               "\" --weights oracle --bandwidth 0.2 --k 60"
                               " --t-grid 0.3,0.5 --alpha 0.99,0.999 --format both",
                           dir / "log.txt");
    REQUIRE(rc == 0);
    REQUIRE(fs::exists(dir / "estimate.csv"));
    REQUIRE(fs::exists(dir / "estimate.json"));

    const json doc = json::parse(slurp(dir / "estimate.json"));
    CHECK(doc["params"]["kernel"] == "epanechnikov");
    CHECK(doc["params"]["h"] == "0.20000000000000001");
    CHECK(doc["params"]["k_n"] == "60");
    REQUIRE(doc["rows"].size() == 4);

    // replicate the run through the library
    const Dataset raw = read_dataset_csv_file(input.string());
    std::vector<double> w(raw.n());
    for (std::size_t i = 0; i < raw.n(); ++i)
        w[i] = oracle_weights(raw.obs[i].t, raw.obs[i].x[0]);
    const auto [ds, map] = rescale_treatment(raw);
    const KernelSpec kern = make_kernel(KernelShape::Epanechnikov);

    std::size_t row_idx = 0;
    for (double t : {0.3, 0.5}) {
        const LocalSurvival local(ds, w, kern, t, 0.2);
        const TailFit fit = fit_tail_local(local, 60, GammaMethod::Hill, 8);
        for (double a : {0.99, 0.999}) {
            const json& row = doc["rows"][row_idx++];
            CHECK(row["t"].get<double>() == t);
            CHECK(row["alpha"].get<double>() == a);
            CHECK(row["q_extreme"].get<double>() == extreme_quantile(fit, a));
            CHECK(row["q_naive"].get<double>() == local.quantile(a));
            CHECK(row["gamma_hat"].get<double>() == fit.gamma_hat);
            CHECK(row["tail_mean"].get<double>() == tail_mean(fit, a));
            CHECK(row["q_intermediate"].get<double>() == fit.q_intermediate);
        }
    }

    // the CSV rendering agrees with the JSON one
    const std::string csv = slurp(dir / "estimate.csv");
    std::istringstream lines(csv);
    std::string line;
    std::vector<std::vector<std::string>> data;
    while (std::getline(lines, line)) {
        if (line.empty() || line.front() == '#' || line.rfind("t,", 0) == 0) continue;
        std::vector<std::string> tok;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) tok.push_back(cell);
        data.push_back(tok);
    }
    REQUIRE(data.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        const double q_csv = std::strtod(data[i][3].c_str(), nullptr);
        CHECK(q_csv == doc["rows"][i]["q_extreme"].get<double>());
    }
}

TEST_CASE("CLI estimate rejects bad inputs", "[cli]") {
    const fs::path dir = scratch_dir("estimate_err");
    const fs::path input = dgp1_csv(dir, 64, 4002);

    CHECK(run_cli("estimate --input /nonexistent.csv --output-dir \"" + dir.string() + "\"",
                  dir / "log1.txt") == 1);
    CHECK_THAT(slurp(dir / "log1.txt"), ContainsSubstring("error:"));

    CHECK(run_cli("estimate --input \"" + input.string() + "\" --kernel box",
                  dir / "log2.txt") != 0);

    CHECK(run_cli("estimate --input \"" + input.string() +
                      "\" --alpha 1.5 --bandwidth 0.3 --k 10",
                  dir / "log3.txt") == 1);
    CHECK_THAT(slurp(dir / "log3.txt"), ContainsSubstring("alpha values must lie in (0,1)"));

    // column weights were requested but the file carries none
    CHECK(run_cli("estimate --input \"" + input.string() +
                      "\" --weights column --bandwidth 0.3 --k 10",
                  dir / "log4.txt") == 1);
    CHECK_THAT(slurp(dir / "log4.txt"), ContainsSubstring("error:"));
}

TEST_CASE("CLI estimate tunes when not overridden", "[cli][mc]") {
    const fs::path dir = scratch_dir("estimate_tuned");
    const fs::path input = dgp1_csv(dir, 600, 4003);
    const int rc = run_cli("estimate --input \"" + input.string() + "\" --output-dir \"" +
                               dir.string() + "\" --weights oracle --format json",
                           dir / "log.txt");
    REQUIRE(rc == 0);
    const json doc = json::parse(slurp(dir / "estimate.json"));
    CHECK(std::stod(doc["params"]["h"].get<std::string>()) > 0.0);
    CHECK(std::stoi(doc["params"]["k_n"].get<std::string>()) >= 8);
    CHECK(doc["rows"].size() == 9);  // default grid, one alpha
}

TEST_CASE("CLI effects baseline level pins the band center at one", "[cli][mc]") {
    const fs::path dir = scratch_dir("effects");
    const fs::path input = dgp1_csv(dir, 600, 4004);
    const int rc = run_cli("effects --input \"" + input.string() + "\" --output-dir \"" +
                               dir.string() +
                               "\" --weights oracle --bandwidth 0.25 --k 60"
                               " --t-grid 0.0,0.5 --alpha 0.999 --baseline-t 0.0"
                               " --confidence 0.95 --oracle dgp1 --format json",
                           dir / "log.txt");
    REQUIRE(rc == 0);
    for (const char* stem : {"effects_eqte", "effects_eate", "effects_eate_unadjusted",
                             "plot_eqte", "plot_eate", "plot_eate_unadjusted"}) {
        CHECK(fs::exists(dir / (std::string(stem) + ".json")));
    }

    const json eqte = json::parse(slurp(dir / "effects_eqte.json"));
    REQUIRE(eqte["rows"].size() == 2 * 21);  // two grid levels, 21 rho points
    std::size_t baseline_rows = 0, usable_rows = 0;
    for (const auto& row : eqte["rows"]) {
        const double center = row["center"].get<double>();
        const double lower = row["lower"].get<double>();
        const double upper = row["upper"].get<double>();
        CHECK(lower <= center);
        CHECK(center <= upper);
        if (row["t"].get<double>() == 0.0) {
            ++baseline_rows;
            CHECK(center == 1.0);  // identical fits: the ratio is exactly one
        }
        if (row["usable"] == "yes") {
            ++usable_rows;
            CHECK(lower < upper);
        } else {
            CHECK(lower == center);
            CHECK(upper == center);
        }
        CHECK(row["oracle"].get<double>() > 0.0);
    }
    CHECK(baseline_rows == 21);
    CHECK(usable_rows > 0);

    const json plot = json::parse(slurp(dir / "plot_eqte.json"));
    CHECK(plot["rows"].size() == 21);
    CHECK(plot["params"]["plot_alpha"] == "0.999");
}

TEST_CASE("CLI simulate is byte-reproducible", "[cli][mc]") {
    const fs::path a = scratch_dir("sim_a");
    const fs::path b = scratch_dir("sim_b");
    const std::string common =
        "simulate --dgp dgp1 --n 250 --reps 3 --seed 777 --bandwidth 0.2 --k 25"
        " --t-grid 0.3,0.7 --alpha 0.99 --format csv --output-dir ";
    REQUIRE(run_cli(common + "\"" + a.string() + "\"", a / "log.txt") == 0);
    REQUIRE(run_cli(common + "\"" + b.string() + "\"", b / "log.txt") == 0);
    const std::string fa = slurp(a / "simulate_estimates.csv");
    CHECK(fa == slurp(b / "simulate_estimates.csv"));
    CHECK(fa.find("# dgp = dgp1") != std::string::npos);
    CHECK(fa.find("# failed_reps = 0") != std::string::npos);
}

TEST_CASE("CLI coverage emits a bounded table", "[cli][mc]") {
    const fs::path dir = scratch_dir("coverage");
    const int rc = run_cli(
        "coverage --dgp dgp1 --n 250 --reps 5 --seed 99 --bandwidth 0.2 --k 40"
        " --t-grid 0.5 --alpha 0.9 --confidence 0.95 --format json --output-dir \"" +
            dir.string() + "\"",
        dir / "log.txt");
    REQUIRE(rc == 0);
    const json doc = json::parse(slurp(dir / "coverage.json"));
    REQUIRE(doc["rows"].size() == 1);
    const json& row = doc["rows"][0];
    for (const char* col : {"eqte_coverage", "eate_coverage", "eate_unadjusted_coverage"}) {
        const double c = row[col].get<double>();
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }
    const int used = std::stoi(doc["params"]["reps_used"].get<std::string>());
    const int failed = std::stoi(doc["params"]["failures"].get<std::string>());
    CHECK(used + failed == 5);
    CHECK(doc["params"]["baseline_t"] == "0");
}

TEST_CASE("CLI diagnose flags heavy tails", "[cli][mc]") {
    const fs::path dir = scratch_dir("diagnose");
    SeededRng rng(4005, 0);
    std::vector<double> ts(2000), ys(2000);
    for (std::size_t i = 0; i < ys.size(); ++i) {
        ts[i] = rng.uniform();
        ys[i] = std::pow(rng.uniform(), -0.3);
    }
    const fs::path input = dir / "pareto.csv";
    write_dataset_csv_file(input.string(), make_dataset(ts, ys));

    const int rc = run_cli("diagnose --input \"" + input.string() + "\" --output-dir \"" +
                               dir.string() + "\" --format json",
                           dir / "log.txt");
    REQUIRE(rc == 0);
    for (const char* stem : {"diagnose_boxcox", "diagnose_qq", "diagnose_qq_transformed"}) {
        CHECK(fs::exists(dir / (std::string(stem) + ".json")));
    }
    const json qq = json::parse(slurp(dir / "diagnose_qq.json"));
    CHECK(std::stod(qq["params"]["correlation"].get<std::string>()) > 0.99);
    CHECK(qq["rows"].size() == 2000 / 8);

    const json bc = json::parse(slurp(dir / "diagnose_boxcox.json"));
    CHECK(bc["rows"].size() == 2000);
    CHECK(std::stod(bc["params"]["normal_correlation"].get<std::string>()) > 0.0);
}
