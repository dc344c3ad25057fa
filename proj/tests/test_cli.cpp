#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "layercake/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    double num(std::size_t r, const std::string& col) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == col) return std::stod(rows.at(r).at(i));
        throw std::runtime_error("no column " + col);
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

Table read_csv(const fs::path& p) {
    std::ifstream in(p);
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) t.header = split(line);
        else t.rows.push_back(split(line));
    }
    return t;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("layercake_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const json& j, const std::string& name = "run.json") {
        const fs::path p = dir_ / name;
        std::ofstream(p) << j.dump(2);
        return p;
    }

    int run(const std::string& cmd, const fs::path& cfg, const fs::path& out, const std::string& extra = "") {
        const std::string line = std::string(LAYERCAKE_CLI) + " " + cmd + " " + cfg.string() + " -o " + out.string() +
                                 " " + extra + " > " + (dir_ / "log.txt").string() + " 2>&1";
        const int st = std::system(line.c_str());
#ifdef WEXITSTATUS
        return WEXITSTATUS(st);
#else
        return st;
#endif
    }

    fs::path dir_;
};

json homogeneous_medium(const std::string& id, double G, double rho) {
    return {{"id", id}, {"background", {{"G", G}, {"rho", rho}}}, {"shapes", json::array()}};
}

json base_config() {
    return {{"media", json::array({homogeneous_medium("u", 1.0, 1.0)})},
            {"cake", {{"G0", 1.0}, {"rho0", 1.0}, {"omega", 2.0}, {"theta", 0.0},
                      {"strips", json::array({json{{"medium", "u"}, {"width", 1.0}}})}}},
            {"solver", {{"N", 2}, {"M", 1}, {"h", 0.1}, {"order", 2}}}};
}

}  // namespace

TEST_F(Cli, ScatterEmptyCake) {
    json cfg = base_config();
    cfg["output"] = {{"field_grid", {5, 3}}, {"poynting", true}};
    const fs::path out = dir_ / "out";
    ASSERT_EQ(run("scatter", write_config(cfg), out), 0) << slurp(dir_ / "log.txt");
    const Table s = read_csv(out / "summary.csv");
    ASSERT_EQ(s.rows.size(), 1u);
    EXPECT_NEAR(s.num(0, "T"), 1.0, 1e-8);
    EXPECT_NEAR(s.num(0, "R"), 0.0, 1e-8);
    EXPECT_EQ(read_csv(out / "rt.csv").rows.size(), 3u);
    EXPECT_EQ(read_csv(out / "field.csv").rows.size(), 15u);
    EXPECT_TRUE(fs::exists(out / "poynting.csv"));
    EXPECT_TRUE(fs::exists(out / "interfaces.csv"));
}

TEST_F(Cli, ScatterSlabMatchesOracle) {
    json cfg = base_config();
    cfg["media"] = json::array({homogeneous_medium("slab", 2.0, 1.0)});
    cfg["cake"]["strips"][0]["medium"] = "slab";
    cfg["solver"] = {{"N", 1}, {"M", 0}, {"h", 0.05}};
    const fs::path out = dir_ / "out";
    ASSERT_EQ(run("scatter", write_config(cfg), out), 0) << slurp(dir_ / "log.txt");
    const Table rt = read_csv(out / "rt.csv");
    layercake::oracle::HomoStack hs;
    hs.omega = 2.0;
    hs.layers.push_back({2.0, 1.0, 1.0});
    const auto o = layercake::oracle::layered_1d_rt(hs);
    EXPECT_NEAR(std::hypot(rt.num(0, "re_t"), rt.num(0, "im_t")), std::abs(o.t), 1e-6);
    EXPECT_NEAR(std::hypot(rt.num(0, "re_r"), rt.num(0, "im_r")), std::abs(o.r), 1e-6);
}

TEST_F(Cli, SpectrumHomogeneous) {
    json cfg = base_config();
    cfg["cake"]["k2"] = 1.0;
    cfg["solver"]["N"] = 3;
    const fs::path out = dir_ / "out";
    ASSERT_EQ(run("spectrum", write_config(cfg), out), 0) << slurp(dir_ / "log.txt");
    const Table sum = read_csv(out / "spectrum_summary.csv");
    ASSERT_EQ(sum.rows.size(), 1u);
    EXPECT_EQ(sum.num(0, "real_count"), 2.0);
    EXPECT_LE(sum.num(0, "pairing_defect"), 1e-6);
    EXPECT_NEAR(sum.num(0, "injectivity_bound"), std::numbers::pi, 1e-12);
    const Table sp = read_csv(out / "spectrum_u.csv");
    ASSERT_EQ(sp.rows.size(), 6u);
    const auto o = layercake::oracle::homogeneous_spectrum(1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3);
    for (int n = 0; n < 3; ++n) {
        EXPECT_NEAR(sp.num(3 + n, "re_kappa"), o.right[n].kappa.real(), 2e-3);
        EXPECT_NEAR(sp.num(3 + n, "im_kappa"), o.right[n].kappa.imag(), 2e-3);
    }
    EXPECT_TRUE(fs::exists(out / "strip_u.csv"));
}

TEST_F(Cli, AutoNReportsSelection) {
    json cfg = base_config();
    cfg["cake"]["k2"] = 1.0;
    cfg["solver"] = {{"N", "auto"}, {"eps", 1e-2}, {"w_min", 1.0}, {"h", 0.1}};
    const fs::path out = dir_ / "out";
    ASSERT_EQ(run("spectrum", write_config(cfg), out), 0) << slurp(dir_ / "log.txt");
    EXPECT_EQ(read_csv(out / "spectrum_summary.csv").num(0, "N"), 2.0);
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
    json cfg = base_config();
    cfg["cake"]["strips"][0]["medium"] = "missing";
    const fs::path out = dir_ / "out";
    EXPECT_EQ(run("scatter", write_config(cfg), out), 2);
    ASSERT_TRUE(fs::exists(out / "error.json"));
    const json err = json::parse(slurp(out / "error.json"));
    EXPECT_EQ(err["kind"], "config");

    std::ofstream(dir_ / "broken.json") << "{ not json";
    EXPECT_EQ(run("scatter", dir_ / "broken.json", dir_ / "out2"), 2);
    EXPECT_NE(run("scatter", dir_ / "absent.json", dir_ / "out3"), 0);
}

TEST_F(Cli, OptimizeTrivialSpaceMatchesScatter) {
    json cfg = base_config();
    cfg["media"] = json::array({homogeneous_medium("a", 2.0, 1.0), homogeneous_medium("b", 1.0, 3.0)});
    cfg["cake"]["strips"] =
        json::array({json{{"medium", "a"}, {"width", 1.0}}, json{{"medium", "b"}, {"width", 1.0}}});
    cfg["design"] = {{"media", json::array({"a", "b"})},
                     {"J", 2},
                     {"permutations", "fixed"},
                     {"fixed", json::array({json::array({"a", "b"})})}};
    const fs::path cf = write_config(cfg);
    ASSERT_EQ(run("scatter", cf, dir_ / "s"), 0) << slurp(dir_ / "log.txt");
    ASSERT_EQ(run("optimize", cf, dir_ / "o"), 0) << slurp(dir_ / "log.txt");
    const Table ranked = read_csv(dir_ / "o" / "ranked.csv");
    ASSERT_EQ(ranked.rows.size(), 1u);
    const Table summary = read_csv(dir_ / "s" / "summary.csv");
    EXPECT_NEAR(ranked.num(0, "T"), summary.num(0, "T"), 1e-12);
    EXPECT_NEAR(ranked.num(0, "R"), summary.num(0, "R"), 1e-12);
    EXPECT_TRUE(fs::exists(dir_ / "o" / "best_config.json"));
    EXPECT_TRUE(fs::exists(dir_ / "o" / "sweep_stats.csv"));
}

TEST_F(Cli, OptimizeIsReproducible) {
    json cfg = base_config();
    cfg["media"] = json::array({homogeneous_medium("a", 2.0, 1.0), homogeneous_medium("b", 1.0, 3.0),
                                homogeneous_medium("c", 0.5, 0.5)});
    cfg["cake"]["strips"] = json::array({json{{"medium", "a"}, {"width", 1.0}}, json{{"medium", "b"}, {"width", 1.0}},
                                         json{{"medium", "c"}, {"width", 1.0}}});
    cfg["design"] = {{"media", json::array({"a", "b", "c"})}, {"J", 3}, {"permutations", "without_repetition"}};
    const fs::path cf = write_config(cfg);
    ASSERT_EQ(run("optimize", cf, dir_ / "o1", "-j 2"), 0) << slurp(dir_ / "log.txt");
    ASSERT_EQ(run("optimize", cf, dir_ / "o2", "-j 1"), 0) << slurp(dir_ / "log.txt");
    EXPECT_EQ(read_csv(dir_ / "o1" / "ranked.csv").rows.size(), 6u);
    EXPECT_EQ(slurp(dir_ / "o1" / "ranked.csv"), slurp(dir_ / "o2" / "ranked.csv"));

    // the emitted best configuration runs as a plain scatter job
    ASSERT_EQ(run("scatter", dir_ / "o1" / "best_config.json", dir_ / "b"), 0) << slurp(dir_ / "log.txt");
    EXPECT_NEAR(read_csv(dir_ / "b" / "summary.csv").num(0, "T"), read_csv(dir_ / "o1" / "ranked.csv").num(0, "T"),
                1e-12);
}
