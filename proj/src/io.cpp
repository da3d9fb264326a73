#include "nms/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nms {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

std::vector<double> parse_row(const std::string& line, const std::string& path) {
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            vals.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw IoError("bad numeric cell '" + cell + "' in " + path);
        }
    }
    return vals;
}

void write_state_header(std::ofstream& out, int n, bool traj_col) {
    if (traj_col) out << "traj,";
    out << "t";
    for (int j = 0; j < n; ++j) out << ",x" << j;
    out << "\n";
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out = open_out(path);
    write_state_header(out, traj.states.cols, false);
    for (int i = 0; i < traj.states.rows; ++i) {
        out << format_double(traj.times[size_t(i)]);
        for (int j = 0; j < traj.states.cols; ++j)
            out << ',' << format_double(traj.states(i, j));
        out << "\n";
    }
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty trajectory file " + path);
    Trajectory traj;
    int n = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> vals = parse_row(line, path);
        if (n < 0) {
            n = int(vals.size()) - 1;
            if (n < 1) throw IoError("trajectory file " + path + " has no state columns");
            traj.states = Mat<double>(0, n);
        }
        if (int(vals.size()) != n + 1) throw IoError("ragged row in " + path);
        traj.times.push_back(vals[0]);
        traj.states.a.insert(traj.states.a.end(), vals.begin() + 1, vals.end());
    }
    traj.states.rows = int(traj.times.size());
    return traj;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::ofstream out = open_out(path);
    out << "# nms-dataset v1 dt=" << format_double(data.dt) << " seed=" << data.seed;
    out << " mask=";
    for (uint8_t o : data.observable) out << (o ? '1' : '0');
    if (data.split.kind == SplitSpec::Kind::temporal) {
        out << " split=temporal t_train=" << format_double(data.split.t_train)
            << " t_val=" << format_double(data.split.t_val)
            << " t_test=" << format_double(data.split.t_test);
    } else {
        out << " split=by_trajectory train_frac=" << format_double(data.split.train_frac)
            << " val_frac=" << format_double(data.split.val_frac);
    }
    out << " truncated=";
    for (size_t k = 0; k < data.truncated_at.size(); ++k)
        out << (k ? ";" : "") << data.truncated_at[k];
    out << "\n";
    write_state_header(out, data.n, true);
    size_t traj = 0;
    for (size_t i = 0; i < data.rows(); ++i) {
        while (traj + 1 < data.n_traj() && i >= data.traj_starts[traj + 1]) ++traj;
        out << traj << ',' << format_double(data.times[i]);
        for (int j = 0; j < data.n; ++j) out << ',' << format_double(data.states(int(i), j));
        out << "\n";
    }
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# nms-dataset v1 ", 0) != 0)
        throw IoError("missing dataset metadata line in " + path);

    Dataset data;
    std::string trunc_list;
    {
        std::stringstream ss(line.substr(std::string("# nms-dataset v1 ").size()));
        std::string tok;
        std::string split_kind;
        while (ss >> tok) {
            const size_t eq = tok.find('=');
            if (eq == std::string::npos) throw IoError("bad metadata token '" + tok + "'");
            const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "dt") data.dt = std::stod(val);
            else if (key == "seed") data.seed = std::stoull(val);
            else if (key == "mask") {
                for (char c : val) data.observable.push_back(c == '1' ? 1 : 0);
            } else if (key == "split") split_kind = val;
            else if (key == "t_train") data.split.t_train = std::stod(val);
            else if (key == "t_val") data.split.t_val = std::stod(val);
            else if (key == "t_test") data.split.t_test = std::stod(val);
            else if (key == "train_frac") data.split.train_frac = std::stod(val);
            else if (key == "val_frac") data.split.val_frac = std::stod(val);
            else if (key == "truncated") trunc_list = val;
            else throw IoError("unknown metadata key '" + key + "' in " + path);
        }
        data.split.kind = split_kind == "by_trajectory" ? SplitSpec::Kind::by_trajectory
                                                        : SplitSpec::Kind::temporal;
    }
    if (!std::getline(in, line)) throw IoError("missing header in " + path);

    data.n = int(data.observable.size());
    if (data.n < 1) throw IoError("dataset metadata lacks a mask in " + path);
    data.states = Mat<double>(0, data.n);
    long prev_traj = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> vals = parse_row(line, path);
        if (int(vals.size()) != data.n + 2) throw IoError("ragged row in " + path);
        const long traj = std::lround(vals[0]);
        if (traj != prev_traj) {
            if (traj != prev_traj + 1) throw IoError("non-contiguous traj column in " + path);
            data.traj_starts.push_back(data.times.size());
            prev_traj = traj;
        }
        data.times.push_back(vals[1]);
        data.states.a.insert(data.states.a.end(), vals.begin() + 2, vals.end());
    }
    data.states.rows = int(data.times.size());
    {
        std::stringstream ss(trunc_list);
        std::string cell;
        while (std::getline(ss, cell, ';'))
            if (!cell.empty()) data.truncated_at.push_back(std::stol(cell));
    }
    if (data.truncated_at.size() != data.n_traj())
        data.truncated_at.assign(data.n_traj(), -1);
    return data;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    ordered_json doc;
    doc["schema"] = "nms-checkpoint-v1";
    doc["kind"] = ckpt.kind;
    if (ckpt.kind == "nms") {
        ordered_json cfg;
        cfg["n"] = ckpt.cfg.n;
        cfg["r"] = ckpt.cfg.r;
        cfg["r_inner"] = ckpt.cfg.r_inner;
        cfg["k_param"] = ckpt.cfg.k_param == KParam::cholesky ? "cholesky" : "full";
        cfg["hamiltonian_mode"] = ckpt.cfg.hamiltonian_mode;
        cfg["a_hidden"] = ckpt.cfg.a_hidden;
        cfg["b_hidden"] = ckpt.cfg.b_hidden;
        cfg["k_hidden"] = ckpt.cfg.k_hidden;
        cfg["e_hidden"] = ckpt.cfg.e_hidden;
        cfg["s_hidden"] = ckpt.cfg.s_hidden;
        doc["config"] = cfg;
    } else {
        doc["node_widths"] = ckpt.node_widths;
    }
    doc["params"] = ckpt.params;
    doc["seed"] = ckpt.seed;
    doc["step"] = ckpt.step;
    doc["best_val"] = ckpt.best_val;
    doc["config_hash"] = ckpt.config_hash;
    std::ofstream out = open_out(path);
    out << doc.dump(2) << "\n";
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in = open_in(path);
    ordered_json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw IoError("bad checkpoint JSON in " + path + ": " + e.what());
    }
    if (doc.value("schema", "") != "nms-checkpoint-v1")
        throw IoError("unsupported checkpoint schema in " + path);
    Checkpoint ckpt;
    ckpt.kind = doc.at("kind").get<std::string>();
    if (ckpt.kind == "nms") {
        const auto& cfg = doc.at("config");
        ckpt.cfg.n = cfg.at("n").get<int>();
        ckpt.cfg.r = cfg.at("r").get<int>();
        ckpt.cfg.r_inner = cfg.at("r_inner").get<int>();
        ckpt.cfg.k_param = cfg.at("k_param").get<std::string>() == "full" ? KParam::full
                                                                          : KParam::cholesky;
        ckpt.cfg.hamiltonian_mode = cfg.at("hamiltonian_mode").get<bool>();
        ckpt.cfg.a_hidden = cfg.at("a_hidden").get<std::vector<int>>();
        ckpt.cfg.b_hidden = cfg.at("b_hidden").get<std::vector<int>>();
        ckpt.cfg.k_hidden = cfg.at("k_hidden").get<std::vector<int>>();
        ckpt.cfg.e_hidden = cfg.at("e_hidden").get<std::vector<int>>();
        ckpt.cfg.s_hidden = cfg.at("s_hidden").get<std::vector<int>>();
    } else if (ckpt.kind == "node") {
        ckpt.node_widths = doc.at("node_widths").get<std::vector<int>>();
    } else {
        throw IoError("unknown checkpoint kind in " + path);
    }
    ckpt.params = doc.at("params").get<std::vector<double>>();
    ckpt.seed = doc.at("seed").get<uint64_t>();
    ckpt.step = doc.at("step").get<long>();
    ckpt.best_val = doc.at("best_val").get<double>();
    ckpt.config_hash = doc.at("config_hash").get<std::string>();
    return ckpt;
}

void write_loss_csv(const std::string& path, const TrainResult& result) {
    std::ofstream out = open_out(path);
    out << "step,train_loss,val_loss\n";
    size_t vi = 0;
    for (size_t i = 0; i < result.loss_curve.size(); ++i) {
        const long step = long(i) + 1;
        out << step << ',' << format_double(result.loss_curve[i]) << ',';
        while (vi < result.val_curve.size() && result.val_curve[vi].first < step) ++vi;
        if (vi < result.val_curve.size() && result.val_curve[vi].first == step)
            out << format_double(result.val_curve[vi].second);
        out << "\n";
    }
}

}  // namespace nms
