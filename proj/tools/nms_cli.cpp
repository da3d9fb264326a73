// Command-line front end over the C API: dataset generation, training,
// evaluation, rollouts, structural audits, and scaling tables.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nms/nms.h"

namespace {

// Exit codes: 1 for validation/config/file problems, 2 for solver failures.
int exit_code(nms_status st) { return st == NMS_ERR_SOLVER ? 2 : 1; }

[[noreturn]] void fail(nms_status st) {
    std::fprintf(stderr, "error: %s\n", nms_last_error());
    std::exit(exit_code(st));
}

void check_ok(nms_status st) {
    if (st != NMS_OK) fail(st);
}

[[noreturn]] void usage_error(const std::string& msg) {
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    std::exit(1);
}

// ----------------------------------------------------------------- config

// Minimal TOML subset: flat dotted keys, `key = value` per line, `#`
// comments, double-quoted strings, numbers, true/false.  No tables.
std::map<std::string, std::string> parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) usage_error("cannot open config file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const size_t b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const size_t e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        if (line.front() == '[')
            usage_error(path + ":" + std::to_string(lineno) +
                        ": tables are not supported; use flat dotted keys");
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            usage_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = strip(line.substr(0, eq));
        std::string val = strip(line.substr(eq + 1));
        if (key.empty() || val.empty())
            usage_error(path + ":" + std::to_string(lineno) + ": empty key or value");
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
            val = val.substr(1, val.size() - 2);
        if (kv.count(key))
            usage_error(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = val;
    }
    return kv;
}

struct ConfigReader {
    std::map<std::string, std::string> kv;
    std::set<std::string> known;

    explicit ConfigReader(const std::string& path) {
        if (!path.empty()) kv = parse_config(path);
    }
    ~ConfigReader() = default;

    void finish() const {
        for (const auto& [key, value] : kv)
            if (!known.count(key)) usage_error("unknown config key '" + key + "'");
    }

    // `use` false still registers the key as known (a flag overrode it).
    template <class T>
    void get(const std::string& key, T& out, bool use = true) {
        known.insert(key);
        auto it = kv.find(key);
        if (it == kv.end() || !use) return;
        std::istringstream ss(it->second);
        T v{};
        if (!(ss >> v) || !ss.eof())
            usage_error("config key '" + key + "': bad value '" + it->second + "'");
        out = v;
    }
    void get(const std::string& key, std::string& out, bool use = true) {
        known.insert(key);
        auto it = kv.find(key);
        if (it != kv.end() && use) out = it->second;
    }
    void get(const std::string& key, bool& out, bool use = true) {
        known.insert(key);
        auto it = kv.find(key);
        if (it == kv.end() || !use) return;
        if (it->second == "true") out = true;
        else if (it->second == "false") out = false;
        else usage_error("config key '" + key + "': expected true or false");
    }
};

std::vector<double> parse_doubles(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            usage_error(std::string("bad ") + what + " value '" + cell + "'");
        }
    }
    if (out.empty()) usage_error(std::string("empty ") + what + " list");
    return out;
}

// ------------------------------------------------------------ shared opts

struct SolverFlags {
    std::string method = "dopri5";
    double dt = 1e-3, rtol = 1e-7, atol = 1e-9;
    long max_steps = 1000000;

    void add(CLI::App* cmd) {
        cmd->add_option("--solver", method, "Integrator: dopri5 or rk4");
        cmd->add_option("--dt", dt, "Fixed step size (rk4)");
        cmd->add_option("--rtol", rtol, "Relative tolerance (dopri5)");
        cmd->add_option("--atol", atol, "Absolute tolerance (dopri5)");
        cmd->add_option("--max-steps", max_steps, "Step budget per rollout");
    }
    void from_config(ConfigReader& cfg) {
        cfg.get("solver.method", method);
        cfg.get("solver.dt", dt);
        cfg.get("solver.rtol", rtol);
        cfg.get("solver.atol", atol);
        cfg.get("solver.max_steps", max_steps);
    }
    nms_solver_options build() const {
        if (method != "dopri5" && method != "rk4")
            usage_error("--solver must be dopri5 or rk4");
        nms_solver_options opt;
        nms_solver_options_init(&opt);
        opt.use_rk4 = method == "rk4" ? 1 : 0;
        opt.dt = dt;
        opt.rtol = rtol;
        opt.atol = atol;
        opt.max_steps = max_steps;
        return opt;
    }
};

struct SplitFlags {
    std::string kind = "temporal";
    double t_train = 20.0, t_val = 30.0, t_test = 100.0;
    double train_frac = 0.8, val_frac = 0.1;

    void add(CLI::App* cmd) {
        cmd->add_option("--split", kind, "Split kind: temporal or trajectory");
        cmd->add_option("--t-train", t_train, "Training-window end time");
        cmd->add_option("--t-val", t_val, "Validation-window end time");
        cmd->add_option("--t-test", t_test, "Test-window end time");
        cmd->add_option("--train-frac", train_frac, "Training trajectory fraction");
        cmd->add_option("--val-frac", val_frac, "Validation trajectory fraction");
    }
    nms_split_options build() const {
        if (kind != "temporal" && kind != "trajectory")
            usage_error("--split must be temporal or trajectory");
        nms_split_options opt;
        nms_split_options_init(&opt);
        opt.by_trajectory = kind == "trajectory" ? 1 : 0;
        opt.t_train = t_train;
        opt.t_val = t_val;
        opt.t_test = t_test;
        opt.train_frac = train_frac;
        opt.val_frac = val_frac;
        return opt;
    }
};

// ------------------------------------------------------------ subcommands

int cmd_gen(const std::string& system, int rod_points, double dt, long steps,
            uint64_t seed, const SplitFlags& split, const std::vector<std::string>& ics,
            int n_ic, const std::string& out) {
    std::vector<double> flat;
    int dim = 0;
    for (const std::string& ic : ics) {
        std::vector<double> row = parse_doubles(ic, "--ic");
        if (dim == 0) dim = int(row.size());
        if (int(row.size()) != dim) usage_error("--ic rows have mixed lengths");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    nms_split_options sp = split.build();
    nms_dataset* data = nullptr;
    check_ok(nms_dataset_generate(system.c_str(), rod_points,
                                  flat.empty() ? nullptr : flat.data(),
                                  flat.empty() ? n_ic : int(ics.size()), dim, dt, steps,
                                  &sp, seed, &data));
    check_ok(nms_dataset_save(data, out.c_str()));
    std::printf("wrote %ld snapshots (dim %d) to %s\n", nms_dataset_rows(data),
                nms_dataset_dim(data), out.c_str());
    nms_dataset_free(data);
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              std::string model_kind, int r, int r_inner, bool hamiltonian,
              int hidden_width, int hidden_depth, std::string mode,
              const std::string& observe, long steps, int batch, int rollout,
              int max_offset, double lr, uint64_t seed, long val_cadence,
              std::string loss, SolverFlags solver, bool verbose,
              const std::string& out, const std::string& loss_out,
              const CLI::App* cmd) {
    // Config file supplies defaults; explicit flags win.
    ConfigReader cfg(config_path);
    if (!config_path.empty()) {
        auto keep = [cmd](const char* flag) { return cmd->count(flag) == 0; };
        cfg.get("model.kind", model_kind, keep("--model"));
        cfg.get("model.r", r, keep("--r"));
        cfg.get("model.r_inner", r_inner, keep("--r-inner"));
        cfg.get("model.hamiltonian", hamiltonian, keep("--hamiltonian"));
        cfg.get("model.hidden_width", hidden_width, keep("--hidden-width"));
        cfg.get("model.hidden_depth", hidden_depth, keep("--hidden-depth"));
        cfg.get("train.mode", mode, keep("--mode"));
        cfg.get("train.steps", steps, keep("--steps"));
        cfg.get("train.batch", batch, keep("--batch"));
        cfg.get("train.rollout", rollout, keep("--rollout"));
        cfg.get("train.max_offset", max_offset, keep("--max-offset"));
        cfg.get("train.lr", lr, keep("--lr"));
        cfg.get("train.seed", seed, keep("--seed"));
        cfg.get("train.val_cadence", val_cadence, keep("--val-cadence"));
        cfg.get("train.loss", loss, keep("--loss"));
        cfg.get("solver.method", solver.method, keep("--solver"));
        cfg.get("solver.dt", solver.dt, keep("--dt"));
        cfg.get("solver.rtol", solver.rtol, keep("--rtol"));
        cfg.get("solver.atol", solver.atol, keep("--atol"));
        cfg.get("solver.max_steps", solver.max_steps, keep("--max-steps"));
        cfg.finish();
    }
    if (mode != "windowed" && mode != "origin")
        usage_error("--mode must be windowed or origin");
    if (loss != "mse" && loss != "mae") usage_error("--loss must be mse or mae");
    if (model_kind != "nms" && model_kind != "node")
        usage_error("--model must be nms or node");

    nms_dataset* data = nullptr;
    check_ok(nms_dataset_load(data_path.c_str(), &data));
    const int n = nms_dataset_dim(data);

    if (!observe.empty()) {
        std::vector<double> vals = parse_doubles(observe, "--observe");
        if (int(vals.size()) != n) usage_error("--observe mask length must match dim");
        std::vector<uint8_t> mask;
        for (double v : vals) mask.push_back(v != 0.0 ? 1 : 0);
        check_ok(nms_dataset_set_observed(data, mask.data(), n));
    }
    check_ok(nms_dataset_fill_unobserved(data));

    nms_model* model = nullptr;
    if (model_kind == "nms") {
        nms_model_options mopt;
        nms_model_options_init(&mopt);
        mopt.n = n;
        mopt.r = r;
        mopt.r_inner = r_inner;
        mopt.hamiltonian = hamiltonian ? 1 : 0;
        mopt.hidden_width = hidden_width;
        mopt.hidden_depth = hidden_depth;
        check_ok(nms_model_create(&mopt, seed, &model));
    } else {
        check_ok(nms_model_create_node(n, hidden_width, hidden_depth, seed, &model));
    }

    nms_train_options topt;
    nms_train_options_init(&topt);
    topt.origin_mode = mode == "origin" ? 1 : 0;
    topt.n_steps = steps;
    topt.batch = batch;
    topt.rollout = rollout;
    topt.max_offset = max_offset;
    topt.lr = lr;
    topt.seed = seed;
    topt.val_cadence = val_cadence;
    topt.use_mae = loss == "mae" ? 1 : 0;
    topt.verbose = verbose ? 1 : 0;
    topt.solver = solver.build();

    double best_val = 0.0;
    check_ok(nms_train_run(model, data, &topt,
                           loss_out.empty() ? nullptr : loss_out.c_str(), &best_val));
    check_ok(nms_model_save(model, out.c_str()));
    std::printf("trained %s model (%ld params), best validation loss %.6g\n",
                nms_model_kind(model), nms_model_param_total(model), best_val);
    std::printf("wrote checkpoint to %s\n", out.c_str());
    nms_model_free(model);
    nms_dataset_free(data);
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& system, int rod_points,
             const std::string& data_path, const SolverFlags& solver,
             const std::string& out, const std::string& csv_dir) {
    if (model_path.empty() == system.empty())
        usage_error("eval needs exactly one of --model or --system");
    nms_dataset* data = nullptr;
    check_ok(nms_dataset_load(data_path.c_str(), &data));
    nms_solver_options sopt = solver.build();
    const char* json = out.empty() ? nullptr : out.c_str();
    const char* dir = csv_dir.empty() ? nullptr : csv_dir.c_str();
    if (!model_path.empty()) {
        nms_model* model = nullptr;
        check_ok(nms_model_load(model_path.c_str(), &model));
        check_ok(nms_eval_report(model, data, &sopt, json, dir));
        nms_model_free(model);
    } else {
        check_ok(nms_eval_exact(system.c_str(), rod_points, data, &sopt, json, dir));
    }
    if (json) std::printf("wrote report to %s\n", json);
    if (dir) std::printf("wrote per-coordinate CSVs to %s\n", dir);
    nms_dataset_free(data);
    return 0;
}

int cmd_rollout(const std::string& model_path, const std::string& ic_str, double t_end,
                long points, const SolverFlags& solver, const std::string& out) {
    if (t_end <= 0.0) usage_error("--t-end must be positive");
    if (points < 2) usage_error("--points must be at least 2");
    nms_model* model = nullptr;
    check_ok(nms_model_load(model_path.c_str(), &model));
    std::vector<double> ic = parse_doubles(ic_str, "--ic");
    if (int(ic.size()) != nms_model_dim(model))
        usage_error("--ic length must match model dimension");
    std::vector<double> t_eval;
    for (long i = 0; i < points; ++i)
        t_eval.push_back(t_end * double(i) / double(points - 1));
    nms_solver_options sopt = solver.build();
    nms_trajectory* traj = nullptr;
    check_ok(nms_model_rollout(model, ic.data(), int(ic.size()), t_eval.data(),
                               long(t_eval.size()), &sopt, &traj));
    check_ok(nms_trajectory_save(traj, out.c_str()));
    std::printf("wrote %ld snapshots to %s\n", nms_trajectory_rows(traj), out.c_str());
    nms_trajectory_free(traj);
    nms_model_free(model);
    return 0;
}

int cmd_check(const std::string& model_path, int states, uint64_t seed) {
    nms_model* model = nullptr;
    check_ok(nms_model_load(model_path.c_str(), &model));
    nms_check_result res;
    check_ok(nms_model_check(model, states, seed, &res));
    nms_model_free(model);

    const bool skew_ok = res.max_skew <= 1e-10;
    const bool sym_ok = res.max_asym <= 1e-10;
    const bool psd_ok = res.min_eigenvalue >= -1e-10;
    const bool degen_ok = res.max_degeneracy <= 1e-10;
    std::printf("states checked        %d\n", res.states_checked);
    std::printf("max |L + L^T|         %.3e  [%s]\n", res.max_skew,
                skew_ok ? "ok" : "FAIL");
    std::printf("max |M - M^T|         %.3e  [%s]\n", res.max_asym,
                sym_ok ? "ok" : "FAIL");
    std::printf("min eig(M) / |M|      %.3e  [%s]\n", res.min_eigenvalue,
                psd_ok ? "ok" : "FAIL");
    std::printf("max degeneracy resid  %.3e  [%s]\n", res.max_degeneracy,
                degen_ok ? "ok" : "FAIL");
    std::printf("max Jacobi residual   %.3e  [diagnostic]\n", res.max_jacobi);
    return skew_ok && sym_ok && psd_ok && degen_ok ? 0 : 1;
}

int cmd_scaling(const std::string& n_str, int r, int trials, uint64_t seed,
                const std::string& out) {
    std::vector<double> nd = parse_doubles(n_str, "--n");
    std::vector<int> ns;
    for (double v : nd) {
        if (v < 2 || v != double(int(v))) usage_error("--n entries must be integers >= 2");
        ns.push_back(int(v));
    }
    char* csv = nullptr;
    check_ok(nms_scaling_csv(ns.data(), int(ns.size()), r, trials, seed, &csv));
    if (out.empty()) {
        std::fputs(csv, stdout);
    } else {
        std::ofstream file(out, std::ios::binary);
        if (!file) {
            nms_string_free(csv);
            usage_error("cannot open '" + out + "' for writing");
        }
        file << csv;
        std::printf("wrote scaling table to %s\n", out.c_str());
    }
    nms_string_free(csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Metriplectic dynamics learning toolkit"};
    app.require_subcommand(1);

    // gen
    std::string g_system, g_out;
    int g_rod_points = 50, g_n_ic = 1;
    double g_dt = 1e-3;
    long g_steps = 1000;
    uint64_t g_seed = 0;
    std::vector<std::string> g_ics;
    SplitFlags g_split;
    auto* gen = app.add_subcommand("gen", "Generate a ground-truth dataset");
    gen->add_option("--system", g_system, "System: tgc, tdp, dno1, dno2, rod")->required();
    gen->add_option("--rod-points", g_rod_points, "Spatial points for rod");
    gen->add_option("--dt", g_dt, "Snapshot interval");
    gen->add_option("--steps", g_steps, "Number of RK4 steps");
    gen->add_option("--seed", g_seed, "Random seed");
    gen->add_option("--ic", g_ics, "Initial condition as v0,v1,... (repeatable)");
    gen->add_option("--n-ic", g_n_ic, "Number of sampled ICs (tdp)");
    g_split.add(gen);
    gen->add_option("--out", g_out, "Output dataset CSV")->required();

    // train
    std::string t_config, t_data, t_model = "nms", t_mode = "windowed";
    std::string t_observe, t_loss = "mse", t_out, t_loss_out;
    int t_r = 2, t_r_inner = 0, t_hidden_width = 10, t_hidden_depth = 1;
    int t_batch = 8, t_rollout = 4, t_max_offset = 10;
    long t_steps = 30000, t_val_cadence = 100;
    double t_lr = 0.01;
    uint64_t t_seed = 0;
    bool t_hamiltonian = false, t_verbose = false;
    SolverFlags t_solver;
    auto* train = app.add_subcommand("train", "Train a model on a dataset");
    train->add_option("--config", t_config, "TOML config with flat dotted keys");
    train->add_option("--data", t_data, "Input dataset CSV")->required();
    train->add_option("--model", t_model, "Model kind: nms or node");
    train->add_option("--r", t_r, "Rank of the irreversible operator");
    train->add_option("--r-inner", t_r_inner, "Inner dimension r' (full K mode)");
    train->add_flag("--hamiltonian", t_hamiltonian, "Drop the dissipative part");
    train->add_option("--hidden-width", t_hidden_width, "Hidden layer width");
    train->add_option("--hidden-depth", t_hidden_depth, "Hidden layer count");
    train->add_option("--mode", t_mode, "Rollout anchoring: windowed or origin");
    train->add_option("--observe", t_observe, "Observability mask, e.g. 1,1,0");
    train->add_option("--steps", t_steps, "Optimization steps");
    train->add_option("--batch", t_batch, "Snapshots per step");
    train->add_option("--rollout", t_rollout, "Offsets per rollout");
    train->add_option("--max-offset", t_max_offset, "Largest window offset");
    train->add_option("--lr", t_lr, "Adamax learning rate");
    train->add_option("--seed", t_seed, "Random seed");
    train->add_option("--val-cadence", t_val_cadence, "Steps between validations");
    train->add_option("--loss", t_loss, "Loss metric: mse or mae");
    t_solver.add(train);
    train->add_flag("--verbose", t_verbose, "Per-validation progress on stderr");
    train->add_option("--out", t_out, "Output checkpoint JSON")->required();
    train->add_option("--loss-out", t_loss_out, "Per-step loss CSV");

    // eval
    std::string e_model, e_system, e_data, e_out, e_csv_dir;
    int e_rod_points = 50;
    SolverFlags e_solver;
    auto* eval = app.add_subcommand("eval", "Evaluate a model against a dataset");
    eval->add_option("--model", e_model, "Checkpoint JSON");
    eval->add_option("--system", e_system, "Exact system instead of a checkpoint");
    eval->add_option("--rod-points", e_rod_points, "Spatial points for rod");
    eval->add_option("--data", e_data, "Ground-truth dataset CSV")->required();
    e_solver.add(eval);
    eval->add_option("--out", e_out, "Report JSON path");
    eval->add_option("--csv-dir", e_csv_dir, "Directory for per-coordinate CSVs");

    // rollout
    std::string r_model, r_ic, r_out;
    double r_t_end = 10.0;
    long r_points = 101;
    SolverFlags r_solver;
    auto* rollout = app.add_subcommand("rollout", "Integrate a checkpointed model");
    rollout->add_option("--model", r_model, "Checkpoint JSON")->required();
    rollout->add_option("--ic", r_ic, "Initial condition v0,v1,...")->required();
    rollout->add_option("--t-end", r_t_end, "Integration horizon");
    rollout->add_option("--points", r_points, "Snapshots on [0, t-end]");
    r_solver.add(rollout);
    rollout->add_option("--out", r_out, "Output trajectory CSV")->required();

    // check
    std::string c_model;
    int c_states = 200;
    uint64_t c_seed = 0;
    auto* check = app.add_subcommand("check", "Structural audit of a checkpoint");
    check->add_option("--model", c_model, "Checkpoint JSON")->required();
    check->add_option("--states", c_states, "Random states to audit");
    check->add_option("--seed", c_seed, "Random seed");

    // scaling
    std::string s_n = "10,20,30,50", s_out;
    int s_r = 2, s_trials = 1000;
    uint64_t s_seed = 0;
    auto* scaling = app.add_subcommand("scaling", "Parameter-count and timing table");
    scaling->add_option("--n", s_n, "Comma-separated state dimensions");
    scaling->add_option("--r", s_r, "Rank of the irreversible operator");
    scaling->add_option("--trials", s_trials, "Timing evaluations per n");
    scaling->add_option("--seed", s_seed, "Random seed");
    scaling->add_option("--out", s_out, "Output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed())
        return cmd_gen(g_system, g_rod_points, g_dt, g_steps, g_seed, g_split, g_ics,
                       g_n_ic, g_out);
    if (train->parsed())
        return cmd_train(t_config, t_data, t_model, t_r, t_r_inner, t_hamiltonian,
                         t_hidden_width, t_hidden_depth, t_mode, t_observe, t_steps,
                         t_batch, t_rollout, t_max_offset, t_lr, t_seed, t_val_cadence,
                         t_loss, t_solver, t_verbose, t_out, t_loss_out, train);
    if (eval->parsed())
        return cmd_eval(e_model, e_system, e_rod_points, e_data, e_solver, e_out,
                        e_csv_dir);
    if (rollout->parsed())
        return cmd_rollout(r_model, r_ic, r_t_end, r_points, r_solver, r_out);
    if (check->parsed()) return cmd_check(c_model, c_states, c_seed);
    if (scaling->parsed()) return cmd_scaling(s_n, s_r, s_trials, s_seed, s_out);
    return 1;
}
