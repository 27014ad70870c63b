#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(ASSISTCTL_PATH) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    Result r;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string scene(const char* name) { return test::scene_path(name); }

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("sa_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_CASE("validate") {
    const Result ok = run("validate " + scene("default.json"));
    CHECK(ok.code == 0);
    CHECK(ok.out.rfind("ok " + test::engine("default.json")->scene_hash(), 0) == 0);

    const fs::path dir = scratch("validate");
    std::ofstream(dir / "bad.json") << R"({"workspace": {"dims": 2}, "goals": []})";
    CHECK(run("validate " + (dir / "bad.json").string()).code == 2);
    std::ofstream(dir / "broken.json") << "{";
    CHECK(run("validate " + (dir / "broken.json").string()).code == 2);
    CHECK(run("validate " + (dir / "missing.json").string()).code == 2);
    fs::remove_all(dir);
}

TEST_CASE("run writes identical logs for identical arguments") {
    const fs::path dir = scratch("run");
    const std::string args = "run " + scene("default.json") + " --goal block --method blend --seed 9 --out ";
    REQUIRE(run(args + (dir / "a.jsonl").string()).code == 0);
    REQUIRE(run(args + (dir / "b.jsonl").string()).code == 0);
    const std::string a = slurp(dir / "a.jsonl");
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir / "b.jsonl"));
    const auto outcome = nlohmann::json::parse(a.substr(a.rfind('\n', a.size() - 2) + 1));
    CHECK(outcome.at("type") == "outcome");
    CHECK(outcome.at("captured") == true);
    CHECK(outcome.at("goal") == "block");

    const Result to_stdout = run("run " + scene("default.json") + " --goal block --method blend --seed 9");
    CHECK(to_stdout.out == a);
    fs::remove_all(dir);
}

TEST_CASE("run rejects bad arguments") {
    CHECK(run("run " + scene("default.json") + " --goal teapot").code == 2);
    CHECK(run("run " + scene("default.json") + " --goal glass --method autopilot").code == 2);
    CHECK(run("run " + scene("default.json")).code == 2);
    CHECK(run("frobnicate").code == 2);
}

TEST_CASE("experiment writes logs and summaries") {
    const fs::path dir = scratch("experiment");
    const Result r = run("experiment " + scene("separated.json") + " --trials 2 --seed 4 --max-steps 300 --out-dir " +
                         dir.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("policy vs blend") != std::string::npos);
    std::size_t logs = 0;
    for (const auto& entry : fs::directory_iterator(dir / "logs")) logs += entry.path().extension() == ".jsonl" ? 1 : 0;
    CHECK(logs == 18);
    CHECK(fs::exists(dir / "logs" / "trial-00005-direct.jsonl"));

    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("trials").size() == 6);
    CHECK(summary.at("methods").size() == 3);
    CHECK(summary.at("pairs").size() == 3);
    CHECK(lines(slurp(dir / "summary.csv")) == 1 + 18);

    const fs::path again = scratch("experiment_again");
    REQUIRE(run("experiment " + scene("separated.json") + " --trials 2 --seed 4 --max-steps 300 --threads 1 --out-dir " +
                again.string())
                .code == 0);
    CHECK(slurp(again / "summary.csv") == slurp(dir / "summary.csv"));
    CHECK(slurp(again / "logs" / "trial-00003-policy.jsonl") == slurp(dir / "logs" / "trial-00003-policy.jsonl"));

    const Result bars = run("plotdata " + (dir / "summary.json").string() + " --kind bars");
    CHECK(bars.code == 0);
    CHECK(lines(bars.out) == 4);
    CHECK(bars.out.rfind("method,trials,captured,mean_steps", 0) == 0);
    fs::remove_all(dir);
    fs::remove_all(again);
}

TEST_CASE("plotdata series") {
    const fs::path dir = scratch("plot");
    const fs::path log = dir / "t.jsonl";
    REQUIRE(run("run " + scene("default.json") + " --goal glass --seed 2 --out " + log.string()).code == 0);
    const std::size_t frames = lines(slurp(log)) - 2;

    const Result perdim = run("plotdata " + log.string() + " --kind perdim");
    REQUIRE(perdim.code == 0);
    CHECK(lines(perdim.out) == frames + 1);
    CHECK(perdim.out.rfind("step,t,x0,x1,u0,u1,a0,a1,assist0,assist1,dot\n", 0) == 0);

    const Result dots = run("plotdata " + log.string() + " --kind dots");
    REQUIRE(dots.code == 0);
    CHECK(lines(dots.out) == frames + 1);

    // dot column equals u · (a − D(u)) recomputed from the log.
    std::istringstream log_in(slurp(log));
    std::istringstream csv(dots.out);
    std::string header;
    std::getline(csv, header);
    std::string text;
    std::getline(log_in, text);
    for (std::string row; std::getline(csv, row);) {
        std::getline(log_in, text);
        const auto f = nlohmann::json::parse(text);
        const double u0 = f["u"][0];
        const double u1 = f["u"][1];
        const double norm = std::hypot(u0, u1);
        const double scale = norm * 0.5 > 0.5 ? 0.5 / norm : 0.5;
        const double expected = u0 * (f["a"][0].get<double>() - scale * u0) + u1 * (f["a"][1].get<double>() - scale * u1);
        std::istringstream cells(row);
        std::string step, t, dot;
        std::getline(cells, step, ',');
        std::getline(cells, t, ',');
        std::getline(cells, dot, ',');
        CHECK(std::stod(dot) == doctest::Approx(expected).epsilon(1e-12));
    }

    std::ofstream(dir / "empty.jsonl")
        << R"({"type":"header","format":1,"scene_hash":"x","goals":["a"],"method":"policy","goal":"a","seed":0,)"
        << R"("user":"zero","dt":0.05,"v_max":0.5,"dims":2,"max_steps":0})" << "\n"
        << R"({"type":"outcome","captured":false,"goal":"","target":-1,"steps":0,"time":0,"total_input":0,"total_assist_deviation":0})"
        << "\n";
    const Result empty = run("plotdata " + (dir / "empty.jsonl").string() + " --kind dots");
    CHECK(empty.code == 0);
    CHECK(empty.out == "step,t,dot,input_norm,assist_norm\n");

    std::ofstream(dir / "cut.jsonl") << slurp(log).substr(0, slurp(log).size() / 2);
    CHECK(run("plotdata " + (dir / "cut.jsonl").string()).code == 2);

    const fs::path out = dir / "dots.csv";
    REQUIRE(run("plotdata " + log.string() + " --kind dots --out " + out.string()).code == 0);
    CHECK(slurp(out) == dots.out);
    fs::remove_all(dir);
}

TEST_CASE("serve fails cleanly on a busy port and an invalid scene") {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(::listen(fd, 1) == 0);
    socklen_t len = sizeof addr;
    REQUIRE(::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
    const int port = ntohs(addr.sin_port);
    CHECK(run("serve --scene " + scene("single_goal.json") + " --port " + std::to_string(port)).code == 3);
    ::close(fd);

    const fs::path dir = scratch("serve");
    std::ofstream(dir / "bad.json") << R"({"goals": 3})";
    CHECK(run("serve --scene " + (dir / "bad.json").string() + " --port 0").code == 2);
    fs::remove_all(dir);
}
