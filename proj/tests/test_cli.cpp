#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

std::string cli() { return NMS_CLI_PATH; }

std::string q(const std::string& s) { return "\"" + s + "\""; }

int run(const std::string& args) {
    const int rc = std::system((cli() + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct TmpDir {
    fs::path dir;
    TmpDir() : dir(fs::temp_directory_path() / "nms_cli_test") {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~TmpDir() { fs::remove_all(dir); }
    std::string operator/(const char* name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

long count_lines(const std::string& path) {
    const std::string text = slurp(path);
    long n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("gen writes datasets; steps 0 gives header plus one IC row") {
    TmpDir tmp;
    const std::string out = tmp / "d.csv";
    CHECK(run("gen --system dno1 --steps 0 --t-train 0.3 --t-val 0.4 --t-test 0.5 --out " +
              q(out)) == 0);
    // Metadata comment, header, one IC row.
    CHECK(count_lines(out) == 3);
    const std::string text = slurp(out);
    CHECK(text.find("traj,t,x0,x1,x2") != std::string::npos);
}

TEST_CASE("gen validation failures exit 1") {
    TmpDir tmp;
    CHECK(run("gen --system bogus --out " + q(tmp / "x.csv")) == 1);
    CHECK(run("gen --system dno1 --dt -1 --out " + q(tmp / "x.csv")) == 1);
    CHECK(run("gen --system dno1 --ic 1,2 --t-train 0.3 --t-val 0.4 --t-test 0.5 --out " +
              q(tmp / "x.csv")) == 1);
}

TEST_CASE("train / check / rollout / eval pipeline") {
    TmpDir tmp;
    const std::string data = tmp / "d.csv";
    const std::string ckpt = tmp / "m.json";
    REQUIRE(run("gen --system dno1 --dt 0.01 --steps 60 --t-train 0.4 --t-val 0.5 "
                "--t-test 0.6 --out " + q(data)) == 0);
    REQUIRE(run("train --data " + q(data) +
                " --steps 30 --solver rk4 --dt 0.01 --rollout 2 --max-offset 5"
                " --observe 1,1,0 --seed 3 --out " + q(ckpt) +
                " --loss-out " + q(tmp / "loss.csv")) == 0);
    CHECK(count_lines(tmp / "loss.csv") == 31);  // header + one row per step

    // Fresh structured model passes the audit.
    CHECK(run("check --model " + q(ckpt) + " --states 50") == 0);

    const std::string roll = tmp / "r.csv";
    CHECK(run("rollout --model " + q(ckpt) + " --ic 1,0,0 --t-end 0.5 --points 6 --out " +
              q(roll)) == 0);
    CHECK(count_lines(roll) == 7);

    CHECK(run("eval --model " + q(ckpt) + " --data " + q(data) + " --out " +
              q(tmp / "report.json") + " --csv-dir " + q(tmp / "csv")) == 0);
    CHECK(fs::exists(tmp / "report.json"));
    CHECK(fs::exists(tmp.dir / "csv" / "coord_x0.csv"));
    CHECK(fs::exists(tmp.dir / "csv" / "thermo.csv"));

    // eval against the exact generating system scores (numerically) zero.
    CHECK(run("eval --system dno1 --data " + q(data) +
              " --solver rk4 --dt 0.01 --out " + q(tmp / "exact.json")) == 0);
    const std::string text = slurp(tmp / "exact.json");
    const size_t pos = text.find("\n  \"mse\": ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(text.substr(pos + 10)) < 1e-24);
}

TEST_CASE("checkpoint rollouts are reproducible across loads") {
    TmpDir tmp;
    const std::string data = tmp / "d.csv";
    const std::string ckpt = tmp / "m.json";
    REQUIRE(run("gen --system dno1 --dt 0.01 --steps 40 --t-train 0.3 --t-val 0.35 "
                "--t-test 0.4 --out " + q(data)) == 0);
    REQUIRE(run("train --data " + q(data) +
                " --steps 10 --solver rk4 --dt 0.01 --rollout 2 --max-offset 5 --out " +
                q(ckpt)) == 0);
    const std::string r1 = tmp / "r1.csv", r2 = tmp / "r2.csv";
    const std::string args = " --ic 0.5,0.1,0 --t-end 0.5 --points 11 --out ";
    REQUIRE(run("rollout --model " + q(ckpt) + args + q(r1)) == 0);
    REQUIRE(run("rollout --model " + q(ckpt) + args + q(r2)) == 0);
    CHECK(slurp(r1) == slurp(r2));
    CHECK(!slurp(r1).empty());
}

TEST_CASE("config file supplies defaults and flags override it") {
    TmpDir tmp;
    const std::string data = tmp / "d.csv";
    REQUIRE(run("gen --system dno1 --dt 0.01 --steps 40 --t-train 0.3 --t-val 0.35 "
                "--t-test 0.4 --out " + q(data)) == 0);

    const std::string config = tmp / "run.toml";
    {
        std::ofstream out(config);
        out << "# training configuration\n"
            << "train.steps = 5\n"
            << "train.rollout = 2\n"
            << "train.max_offset = 5\n"
            << "solver.method = \"rk4\"\n"
            << "solver.dt = 0.01\n";
    }
    const std::string ckpt = tmp / "m.json";
    CHECK(run("train --data " + q(data) + " --config " + q(config) +
              " --loss-out " + q(tmp / "l1.csv") + " --out " + q(ckpt)) == 0);
    CHECK(count_lines(tmp / "l1.csv") == 6);  // header + 5 steps from config

    // A flag beats the config value.
    CHECK(run("train --data " + q(data) + " --config " + q(config) + " --steps 3" +
              " --loss-out " + q(tmp / "l2.csv") + " --out " + q(ckpt)) == 0);
    CHECK(count_lines(tmp / "l2.csv") == 4);

    // Unknown keys are rejected.
    {
        std::ofstream out(config, std::ios::app);
        out << "train.stepz = 9\n";
    }
    CHECK(run("train --data " + q(data) + " --config " + q(config) + " --out " +
              q(ckpt)) == 1);
}

TEST_CASE("missing files and solver failures use distinct exit codes") {
    TmpDir tmp;
    CHECK(run("train --data " + q(tmp / "missing.csv") + " --out " + q(tmp / "m.json")) ==
          1);
    CHECK(run("check --model " + q(tmp / "missing.json")) == 1);
    CHECK(run("eval --data " + q(tmp / "missing.csv") + " --system dno1") == 1);

    // A rollout pushed far beyond the stiffness budget exits 2.
    const std::string data = tmp / "d.csv";
    const std::string ckpt = tmp / "m.json";
    REQUIRE(run("gen --system dno1 --dt 0.01 --steps 30 --t-train 0.2 --t-val 0.25 "
                "--t-test 0.3 --out " + q(data)) == 0);
    REQUIRE(run("train --data " + q(data) +
                " --steps 0 --solver rk4 --dt 0.01 --rollout 2 --max-offset 5 --out " +
                q(ckpt)) == 0);
    CHECK(run("rollout --model " + q(ckpt) +
              " --ic 1,0,0 --t-end 50 --points 11 --max-steps 3 --out " +
              q(tmp / "r.csv")) == 2);
}

TEST_CASE("scaling table to stdout and file") {
    TmpDir tmp;
    const std::string out = tmp / "scaling.csv";
    CHECK(run("scaling --n 4,8 --trials 3 --out " + q(out)) == 0);
    const std::string text = slurp(out);
    CHECK(text.rfind("n,nms,gnode,gfinn,rhs_wall_us\n", 0) == 0);
    CHECK(text.find("\n4,19,") != std::string::npos);
    CHECK(run("scaling --n 4,notanumber --trials 3") == 1);
}
