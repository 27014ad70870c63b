// assistctl: validate scenes, run trials and experiments, emit plot data,
// serve live sessions.
//
// Exit codes: 0 ok, 2 validation or usage error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sa/scene_config.hpp"
#include "sa/server.hpp"
#include "sa/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_runtime = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

sa::Method method_arg(const std::string& name) {
    const auto m = sa::parse_method(name);
    if (!m) throw UsageError("unknown method '" + name + "' (expected policy, blend or direct)");
    return *m;
}

std::vector<sa::Method> methods_arg(const std::string& list) {
    std::vector<sa::Method> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(method_arg(item));
    }
    if (out.empty()) throw UsageError("--methods must name at least one method");
    return out;
}

std::size_t goal_arg(const sa::Scene& scene, const std::string& name) {
    const int g = scene.find_goal(name);
    if (g < 0) {
        std::string known;
        for (const auto& goal : scene.goals) known += (known.empty() ? "" : ", ") + goal.name;
        throw UsageError("unknown goal '" + name + "' (scene has: " + known + ")");
    }
    return static_cast<std::size_t>(g);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --- validate -------------------------------------------------------------

int cmd_validate(const std::string& scene_path) {
    const sa::SceneConfig cfg = sa::load_scene_config(scene_path);
    std::cout << "ok " << sa::scene_hash(cfg) << " (" << cfg.scene.goals.size() << " goals, " << cfg.scene.dims()
              << "-D)\n";
    return exit_ok;
}

// --- run ------------------------------------------------------------------

struct RunArgs {
    std::string scene;
    std::string method = "policy";
    std::string goal;
    std::uint64_t seed = 0;
    int max_steps = 2000;
    double temperature = 1.0;
    std::string out;
};

int cmd_run(const RunArgs& a) {
    const sa::SceneConfig cfg = sa::load_scene_config(a.scene);
    const sa::Method method = method_arg(a.method);
    const std::size_t goal = goal_arg(cfg.scene, a.goal);
    if (a.max_steps < 1) throw UsageError("--max-steps must be >= 1");
    if (!(a.temperature > 0.0)) throw UsageError("--temperature must be > 0");
    const auto engine = sa::Engine::build(cfg);
    const sa::TrialLog log = sa::run_trial(*engine, {method, goal, a.seed, a.max_steps}, a.temperature);
    const std::string text = sa::trial_log_to_string(log);
    if (a.out.empty() || a.out == "-") {
        std::cout << text;
    } else {
        write_atomic(a.out, text);
    }
    std::cerr << (log.outcome.captured ? "captured " + log.outcome.goal : std::string("timeout")) << " after "
              << log.metrics.steps << " steps, total_input " << fmt(log.metrics.total_input) << "\n";
    return exit_ok;
}

// --- experiment -------------------------------------------------------------

struct ExperimentArgs {
    std::string scene;
    std::string methods = "policy,blend,direct";
    int trials = 40;
    std::uint64_t seed = 0;
    int max_steps = 2000;
    double temperature = 1.0;
    unsigned threads = 0;
    std::string out_dir = "experiment";
    bool no_logs = false;
};

int cmd_experiment(const ExperimentArgs& a) {
    const sa::SceneConfig cfg = sa::load_scene_config(a.scene);
    sa::ExperimentOptions opts;
    opts.methods = methods_arg(a.methods);
    if (a.trials < 0) throw UsageError("--trials must be >= 0");
    if (a.max_steps < 1) throw UsageError("--max-steps must be >= 1");
    if (!(a.temperature > 0.0)) throw UsageError("--temperature must be > 0");
    opts.trials_per_cell = a.trials;
    opts.base_seed = a.seed;
    opts.max_steps = a.max_steps;
    opts.temperature = a.temperature;
    opts.threads = a.threads;

    const auto engine = sa::Engine::build(cfg);
    const sa::ExperimentResult r = sa::run_experiment(*engine, opts);
    const fs::path dir(a.out_dir);
    if (!a.no_logs) {
        const std::size_t nm = opts.methods.size();
        for (std::size_t i = 0; i < r.logs.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "trial-%05zu-%s.jsonl", i / nm, sa::to_string(opts.methods[i % nm]).c_str());
            write_atomic(dir / "logs" / name, sa::trial_log_to_string(r.logs[i]));
        }
    }
    write_atomic(dir / "summary.json", sa::to_json(r.summary).dump(2) + "\n");
    write_atomic(dir / "summary.csv", sa::summary_csv(r.summary));

    for (const auto& st : r.summary.stats) {
        std::cout << sa::to_string(st.method) << ": steps " << fmt(st.mean_steps) << " ± " << fmt(st.se_steps)
                  << ", total_input " << fmt(st.mean_input) << " ± " << fmt(st.se_input) << ", captured "
                  << st.captured << "/" << st.trials << "\n";
    }
    for (const auto& p : r.summary.pairs) {
        std::cout << sa::to_string(p.first) << " vs " << sa::to_string(p.second) << ": " << p.first_fewer_steps
                  << " fewer steps, " << p.second_fewer_steps << " more, " << p.ties << " ties\n";
    }
    return exit_ok;
}

// --- plotdata ---------------------------------------------------------------

std::string plot_perdim(const sa::TrialLog& log) {
    std::ostringstream os;
    const int n = log.dims;
    os << "step,t";
    for (const char* col : {"x", "u", "a", "assist"}) {
        for (int i = 0; i < n; ++i) os << ',' << col << i;
    }
    os << ",dot\n";
    for (const auto& f : log.frames) {
        const sa::Vec teleop = sa::clamp_norm(f.u * log.v_max, log.v_max);
        const sa::Vec assist = f.a - teleop;
        os << f.step << ',' << fmt(f.t);
        for (const sa::Vec* v : {&f.x, &f.u, &f.a, &assist}) {
            for (int i = 0; i < n; ++i) os << ',' << fmt((*v)[i]);
        }
        os << ',' << fmt(f.u.dot(assist)) << '\n';
    }
    return os.str();
}

std::string plot_dots(const sa::TrialLog& log) {
    std::ostringstream os;
    os << "step,t,dot,input_norm,assist_norm\n";
    for (const auto& f : log.frames) {
        const sa::Vec assist = f.a - sa::clamp_norm(f.u * log.v_max, log.v_max);
        os << f.step << ',' << fmt(f.t) << ',' << fmt(f.u.dot(assist)) << ',' << fmt(f.u.norm()) << ','
           << fmt(assist.norm()) << '\n';
    }
    return os.str();
}

std::string plot_bars(const json& summary) {
    std::ostringstream os;
    os << "method,trials,captured,mean_steps,se_steps,mean_time,se_time,mean_total_input,se_total_input\n";
    if (!summary.is_object() || !summary.contains("methods") || !summary.contains("trials")) {
        throw UsageError("bars expects an experiment summary.json");
    }
    for (const auto& m : summary.at("methods")) {
        os << m.at("method").get<std::string>() << ',' << m.at("trials").get<int>() << ','
           << m.at("captured").get<int>() << ',' << fmt(m.at("mean_steps").get<double>()) << ','
           << fmt(m.at("se_steps").get<double>());
        std::vector<double> times;
        for (const auto& t : summary.at("trials")) {
            times.push_back(t.at("methods").at(m.at("method").get<std::string>()).at("time").get<double>());
        }
        double mean = 0.0;
        for (double v : times) mean += v;
        mean = times.empty() ? 0.0 : mean / static_cast<double>(times.size());
        double se = 0.0;
        if (times.size() > 1) {
            double ss = 0.0;
            for (double v : times) ss += (v - mean) * (v - mean);
            se = std::sqrt(ss / static_cast<double>(times.size() - 1)) / std::sqrt(static_cast<double>(times.size()));
        }
        os << ',' << fmt(mean) << ',' << fmt(se) << ',' << fmt(m.at("mean_total_input").get<double>()) << ','
           << fmt(m.at("se_total_input").get<double>()) << '\n';
    }
    return os.str();
}

int cmd_plotdata(const std::string& input, const std::string& kind, const std::string& out) {
    std::string csv;
    if (kind == "bars") {
        json summary;
        try {
            summary = json::parse(read_file(input));
        } catch (const json::parse_error& e) {
            throw UsageError(input + ": not valid JSON: " + e.what());
        }
        try {
            csv = plot_bars(summary);
        } catch (const json::exception& e) {
            throw UsageError(input + ": malformed summary: " + e.what());
        }
    } else {
        std::ifstream in(input);
        if (!in) throw UsageError("cannot open " + input);
        const sa::TrialLog log = sa::read_trial_log(in);
        csv = kind == "perdim" ? plot_perdim(log) : plot_dots(log);
    }
    if (out.empty() || out == "-") {
        std::cout << csv;
    } else {
        write_atomic(out, csv);
    }
    return exit_ok;
}

// --- serve ------------------------------------------------------------------

int cmd_serve(const std::string& scene, const std::string& address, int port, const std::string& ui_dir) {
    const sa::SceneConfig cfg = sa::load_scene_config(scene);
    if (port < 0 || port > 65535) throw UsageError("--port must lie in [0, 65535]");
    const auto engine = sa::Engine::build(cfg);
    sa::ServerOptions opts;
    opts.address = address;
    opts.port = static_cast<unsigned short>(port);
    if (!ui_dir.empty()) opts.ui_dir = ui_dir;
    sa::Server server(engine, opts);
    std::cout << "serving " << scene << " on http://" << address << ":" << server.port() << "/" << std::endl;
    server.run();
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shared-autonomy engine: goal prediction and assistance"};
    app.require_subcommand(1);

    std::string validate_scene;
    auto* validate = app.add_subcommand("validate", "Parse and check a scene file");
    validate->add_option("scene", validate_scene, "Scene JSON")->required();

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run one simulated trial and write its log");
    run->add_option("scene", run_args.scene, "Scene JSON")->required();
    run->add_option("--method", run_args.method, "policy | blend | direct")->capture_default_str();
    run->add_option("--goal", run_args.goal, "True goal name")->required();
    run->add_option("--seed", run_args.seed, "Random seed")->capture_default_str();
    run->add_option("--max-steps", run_args.max_steps, "Step limit")->capture_default_str();
    run->add_option("--temperature", run_args.temperature, "Simulated user beta")->capture_default_str();
    run->add_option("--out", run_args.out, "Output log (JSON lines); stdout when omitted");

    ExperimentArgs exp_args;
    auto* exp = app.add_subcommand("experiment", "Paired seeded trials across methods");
    exp->add_option("scene", exp_args.scene, "Scene JSON")->required();
    exp->add_option("--methods", exp_args.methods, "Comma-separated methods")->capture_default_str();
    exp->add_option("--trials", exp_args.trials, "Trials per goal")->capture_default_str();
    exp->add_option("--seed", exp_args.seed, "Base seed")->capture_default_str();
    exp->add_option("--max-steps", exp_args.max_steps, "Step limit per trial")->capture_default_str();
    exp->add_option("--temperature", exp_args.temperature, "Simulated user beta")->capture_default_str();
    exp->add_option("--threads", exp_args.threads, "Worker threads (0: all cores)")->capture_default_str();
    exp->add_option("--out-dir", exp_args.out_dir, "Output directory")->capture_default_str();
    exp->add_flag("--no-logs", exp_args.no_logs, "Skip per-trial logs");

    std::string plot_input;
    std::string plot_kind = "perdim";
    std::string plot_out;
    auto* plot = app.add_subcommand("plotdata", "CSV series from a trial log or experiment summary");
    plot->add_option("input", plot_input, "Trial log (perdim, dots) or summary.json (bars)")->required();
    plot->add_option("--kind", plot_kind, "perdim | dots | bars")
        ->check(CLI::IsMember({"perdim", "dots", "bars"}))
        ->capture_default_str();
    plot->add_option("--out", plot_out, "Output CSV; stdout when omitted");

    std::string serve_scene;
    std::string serve_address = "127.0.0.1";
    int serve_port = 8080;
    std::string serve_ui;
    auto* serve = app.add_subcommand("serve", "Run the live session server");
    serve->add_option("--scene", serve_scene, "Scene JSON")->required();
    serve->add_option("--port", serve_port, "TCP port (0: any free port)")->capture_default_str();
    serve->add_option("--address", serve_address, "Listen address")->capture_default_str();
    serve->add_option("--ui-dir", serve_ui, "Directory of built UI assets served at /");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }

    try {
        if (*validate) return cmd_validate(validate_scene);
        if (*run) return cmd_run(run_args);
        if (*exp) return cmd_experiment(exp_args);
        if (*plot) return cmd_plotdata(plot_input, plot_kind, plot_out);
        if (*serve) return cmd_serve(serve_scene, serve_address, serve_port, serve_ui);
    } catch (const sa::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return exit_validation;
    } catch (const sa::LogParseError& e) {
        std::cerr << "invalid trial log: " << e.what() << "\n";
        return exit_validation;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_runtime;
    }
    return exit_ok;
}
