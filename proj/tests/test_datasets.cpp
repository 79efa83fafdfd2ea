#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "codl/datasets.hpp"

using namespace codl;

namespace {

double logistic_exact(double r, double K, double P0, double t) {
    const double e = std::exp(r * t);
    return K * P0 * e / (K + P0 * (e - 1.0));
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("experiment table matches the published splits") {
    struct Row {
        Dataset ds;
        const char* id;
        int train_n;
        double train_end;
        int test_n;
        double test_end;
    };
    // 7 splits per dataset; every span starts at 0
    const Row want[] = {
        {Dataset::Wpg, "1.0", 200, 300, 200, 300}, {Dataset::Wpg, "2.0", 200, 300, 200, 400},
        {Dataset::Wpg, "2.1", 100, 300, 200, 400}, {Dataset::Wpg, "2.2", 300, 300, 200, 400},
        {Dataset::Wpg, "3.0", 200, 300, 300, 300}, {Dataset::Wpg, "3.1", 100, 300, 300, 300},
        {Dataset::Wpg, "3.2", 300, 300, 300, 300}, {Dataset::Cr, "1.0", 100, 100, 100, 100},
        {Dataset::Cr, "2.0", 100, 100, 100, 200},  {Dataset::Cr, "2.1", 50, 100, 100, 200},
        {Dataset::Cr, "2.2", 150, 100, 100, 200},  {Dataset::Cr, "3.0", 100, 100, 200, 100},
        {Dataset::Cr, "3.1", 50, 100, 200, 100},   {Dataset::Cr, "3.2", 150, 100, 200, 100},
    };
    CHECK(experiment_table().size() == 14);
    for (const Row& w : want) {
        const ExperimentSpec& e = find_experiment(w.ds, w.id);
        CHECK(e.train.n_points == w.train_n);
        CHECK(e.train.t_begin == 0.0);
        CHECK(e.train.t_end == w.train_end);
        CHECK(e.test.n_points == w.test_n);
        CHECK(e.test.t_begin == 0.0);
        CHECK(e.test.t_end == w.test_end);
    }
    CHECK_THROWS_AS(find_experiment(Dataset::Wpg, "4.0"), ConfigError);
}

TEST_CASE("grids are equally spaced with endpoints included") {
    GridSpec gs{100, 0.0, 300.0};
    auto g = gs.grid();
    REQUIRE(g.size() == 100);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 300.0);
    for (size_t i = 1; i < g.size(); ++i)
        CHECK(g[i] - g[i - 1] == doctest::Approx(300.0 / 99.0).epsilon(1e-14));
}

TEST_CASE("wpg generation") {
    DataBundle b = generate_wpg(find_experiment(Dataset::Wpg, "2.0"));
    CHECK(b.train.n_points() == 200);
    CHECK(b.test.n_points() == 200);
    CHECK(b.train.names == std::vector<std::string>{"P"});

    // published initial condition
    CHECK(b.train.row(0)[0] == 2.518629);
    CHECK(b.test.row(0)[0] == 2.518629);

    // logistic growth: monotone increasing and bounded by the capacity
    double prev = 0.0;
    for (int i = 0; i < b.test.n_points(); ++i) {
        const double p = b.test.row(i)[0];
        CHECK(p > prev);
        CHECK(p <= 12.0 + 1e-9);
        prev = p;
    }

    // closed-form oracle across the whole train grid
    double worst = 0.0;
    for (int i = 0; i < b.train.n_points(); ++i)
        worst = std::max(worst, std::fabs(b.train.row(i)[0] -
                                          logistic_exact(0.026, 12.0, 2.518629, b.train.times[i])));
    CHECK(worst < 1e-6);
}

TEST_CASE("cr generation") {
    DataBundle b = generate_cr(find_experiment(Dataset::Cr, "1.0"));
    CHECK(b.train.n_points() == 100);
    CHECK(b.train.names == std::vector<std::string>{"mA", "mB", "mC", "mD"});

    auto r0 = b.train.row(0);
    CHECK(std::vector<double>(r0.begin(), r0.end()) == std::vector<double>{1, 1, 0, 0});

    // hand-evaluated first Euler step: h = 100/99
    const double h = 100.0 / 99.0;
    CHECK(b.train.row(1)[0] == doctest::Approx(1.0 - 0.1 * h).epsilon(1e-15));
    CHECK(b.train.row(1)[0] == doctest::Approx(0.89899).epsilon(1e-5));
    CHECK(b.train.row(1)[3] == 0.0);

    // m_C stays nonnegative, m_D never decreases
    double lastD = -1.0;
    for (int i = 0; i < b.train.n_points(); ++i) {
        CHECK(b.train.row(i)[2] >= 0.0);
        CHECK(b.train.row(i)[3] >= lastD);
        lastD = b.train.row(i)[3];
    }

    // the equations do not conserve mass; the generator reports the drift
    CHECK(b.mass_drift_train > 0.0);
    CHECK(std::isfinite(b.mass_drift_train));
    CHECK(b.mass_drift_test > 0.0);
}

TEST_CASE("generation is deterministic") {
    DataBundle a = generate(find_experiment(Dataset::Cr, "2.1"));
    DataBundle b = generate(find_experiment(Dataset::Cr, "2.1"));
    auto av = a.train.states.data();
    auto bv = b.train.states.data();
    CHECK(std::vector<double>(av.begin(), av.end()) == std::vector<double>(bv.begin(), bv.end()));

    DataBundle c = generate(find_experiment(Dataset::Wpg, "1.0"));
    DataBundle d = generate(find_experiment(Dataset::Wpg, "1.0"));
    auto cv = c.test.states.data();
    auto dv = d.test.states.data();
    CHECK(std::vector<double>(cv.begin(), cv.end()) == std::vector<double>(dv.begin(), dv.end()));
}

TEST_CASE("csv round-trip and headers") {
    DataBundle wpg = generate_wpg(find_experiment(Dataset::Wpg, "1.0"));
    const std::string path = temp_path("codl_wpg.csv");
    write_csv(wpg.train, path);
    {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "t,P");
    }
    TimeSeries back = read_csv(path);
    CHECK(back.times == wpg.train.times);
    auto a = back.states.data();
    auto b = wpg.train.states.data();
    CHECK(std::vector<double>(a.begin(), a.end()) == std::vector<double>(b.begin(), b.end()));

    DataBundle cr = generate_cr(find_experiment(Dataset::Cr, "1.0"));
    write_csv(cr.train, path);
    {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "t,mA,mB,mC,mD");
    }
    std::filesystem::remove(path);
}

TEST_CASE("csv parse errors carry line numbers") {
    const std::string path = temp_path("codl_bad.csv");
    {
        std::ofstream out(path);
        out << "t,P\n0,1\n1,notanumber\n";
    }
    try {
        read_csv(path);
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    {
        std::ofstream out(path, std::ios::trunc);
        out << "t,P\n0,1\n1\n";
    }
    try {
        read_csv(path);
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    {
        std::ofstream out(path, std::ios::trunc);
        out << "time,P\n0,1\n";
    }
    CHECK_THROWS_AS(read_csv(path), ParseError);
    std::filesystem::remove(path);
}
