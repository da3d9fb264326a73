#include "nms/nms.h"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>

#include <json.hpp>

#include "nms/brackets.hpp"
#include "nms/dataset.hpp"
#include "nms/io.hpp"
#include "nms/metrics.hpp"
#include "nms/odeint.hpp"
#include "nms/systems.hpp"
#include "nms/training.hpp"

using namespace nms;

extern "C" {
struct nms_dataset {
    Dataset data;
};
struct nms_model {
    std::unique_ptr<TrainableModel> impl;
};
struct nms_trajectory {
    Trajectory traj;
};
}

namespace {

thread_local std::string g_last_error;

template <class F>
nms_status guarded(F&& fn) {
    try {
        fn();
        return NMS_OK;
    } catch (const ConfigError& e) {
        g_last_error = e.what();
        return NMS_ERR_VALIDATION;
    } catch (const IoError& e) {
        g_last_error = e.what();
        return NMS_ERR_IO;
    } catch (const StiffnessError& e) {
        g_last_error = e.what();
        return NMS_ERR_SOLVER;
    } catch (const DomainError& e) {
        g_last_error = e.what();
        return NMS_ERR_SOLVER;
    } catch (const NondegeneracyError& e) {
        g_last_error = e.what();
        return NMS_ERR_SOLVER;
    } catch (const Error& e) {
        g_last_error = e.what();
        return NMS_ERR_SOLVER;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return NMS_ERR_INTERNAL;
    }
}

void require(bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
}

SplitSpec to_split(const nms_split_options* opt) {
    SplitSpec s;
    if (!opt) return s;
    s.kind = opt->by_trajectory ? SplitSpec::Kind::by_trajectory
                                : SplitSpec::Kind::temporal;
    s.t_train = opt->t_train;
    s.t_val = opt->t_val;
    s.t_test = opt->t_test;
    s.train_frac = opt->train_frac;
    s.val_frac = opt->val_frac;
    return s;
}

SolverConfig to_solver(const nms_solver_options* opt) {
    SolverConfig s;
    if (!opt) return s;
    s.method = opt->use_rk4 ? Method::rk4 : Method::dopri5;
    s.dt = opt->dt;
    s.rtol = opt->rtol;
    s.atol = opt->atol;
    s.max_steps = opt->max_steps;
    return s;
}

// Extremal eigenvalues of a symmetric matrix by shifted power iteration;
// enough accuracy for an audit and keeps the library dependency-free.
double sym_min_eigenvalue(const Mat<double>& m) {
    const int n = m.rows;
    const double shift = double(n) * inf_norm(m) + 1.0;  // spectral radius bound
    auto dominant = [&](double sign) {
        std::vector<double> v(size_t(n), 0.0);
        for (int i = 0; i < n; ++i) v[size_t(i)] = 1.0 / double(i + 1);
        double lambda = 0.0;
        for (int it = 0; it < 300; ++it) {
            std::vector<double> w(size_t(n), 0.0);
            for (int i = 0; i < n; ++i) {
                double acc = shift * v[size_t(i)];
                for (int j = 0; j < n; ++j) acc += sign * m(i, j) * v[size_t(j)];
                w[size_t(i)] = acc;
            }
            double nrm = norm2(w);
            if (nrm == 0.0) return 0.0;
            for (double& x : w) x /= nrm;
            lambda = nrm;
            v = std::move(w);
        }
        return lambda - shift;  // sign * extremal eigenvalue
    };
    return -dominant(-1.0);
}

struct EvalSource {
    std::function<std::vector<double>(double, std::span<const double>)> rhs;
    std::function<double(std::span<const double>)> energy;    // may be empty
    std::function<double(std::span<const double>)> entropy;   // may be empty
    std::function<double(std::span<const double>)> s_dot;     // may be empty
    std::function<double(std::span<const double>)> degeneracy;  // may be empty
};

void run_eval(const EvalSource& src, const Dataset& data, const SolverConfig& solver,
              const char* json_path, const char* csv_dir) {
    const int n = data.n;
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<Trajectory> rollouts;
    for (size_t k = 0; k < data.n_traj(); ++k) {
        const size_t b = data.traj_begin(k), e = data.traj_end(k);
        std::vector<double> t_eval(data.times.begin() + long(b), data.times.begin() + long(e));
        rollouts.push_back(integrate_recorded<double>(src.rhs, data.row(b), t_eval, solver));
    }
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // Observed-coordinate errors plus per-coordinate breakdown.
    double se = 0.0, ae = 0.0;
    long count = 0;
    std::vector<double> coord_se(size_t(n), 0.0);
    std::vector<long> coord_count(size_t(n), 0);
    for (size_t k = 0; k < data.n_traj(); ++k) {
        const size_t b = data.traj_begin(k);
        const Trajectory& r = rollouts[k];
        for (int i = 0; i < r.states.rows; ++i)
            for (int j = 0; j < n; ++j) {
                const double d = r.states(i, j) - data.row(b + size_t(i))[size_t(j)];
                coord_se[size_t(j)] += d * d;
                ++coord_count[size_t(j)];
                if (data.observable.empty() || data.observable[size_t(j)]) {
                    se += d * d;
                    ae += std::abs(d);
                    ++count;
                }
            }
    }
    require(count > 0, "eval: no observed components");
    const double mse = se / double(count), mae = ae / double(count);

    // Thermodynamic diagnostics along the predicted trajectories.
    double energy_drift = 0.0, entropy_violation = 0.0, degeneracy_max = 0.0;
    std::vector<double> s_dot_series;
    for (const Trajectory& r : rollouts) {
        double e0 = 0.0, s_prev = 0.0;
        for (int i = 0; i < r.states.rows; ++i) {
            std::vector<double> x(size_t(n), 0.0);
            for (int j = 0; j < n; ++j) x[size_t(j)] = r.states(i, j);
            if (src.energy) {
                const double e = src.energy(x);
                if (i == 0) e0 = e;
                energy_drift = std::max(energy_drift, std::abs(e - e0));
            }
            if (src.entropy) {
                const double s = src.entropy(x);
                if (i > 0) entropy_violation = std::min(entropy_violation, s - s_prev);
                s_prev = s;
            }
            if (src.s_dot) s_dot_series.push_back(src.s_dot(x));
            if (src.degeneracy) degeneracy_max = std::max(degeneracy_max, src.degeneracy(x));
        }
    }

    if (json_path) {
        nlohmann::ordered_json report;
        report["schema"] = "nms-eval-v1";
        report["conventions"] = {
            {"mse", "mean of squared errors over observed coordinates and snapshots"},
            {"mae", "mean of absolute errors over observed coordinates and snapshots"}};
        report["mse"] = mse;
        report["mae"] = mae;
        nlohmann::ordered_json per_coord = nlohmann::ordered_json::array();
        for (int j = 0; j < n; ++j)
            per_coord.push_back(coord_count[size_t(j)]
                                    ? coord_se[size_t(j)] / double(coord_count[size_t(j)])
                                    : 0.0);
        report["per_coordinate_mse"] = per_coord;
        if (src.energy) report["energy_drift"] = energy_drift;
        if (src.entropy) report["entropy_violation"] = entropy_violation;
        if (src.s_dot) report["s_dot"] = s_dot_series;
        if (src.degeneracy) report["degeneracy_max"] = degeneracy_max;
        report["rollout_wall_s"] = wall_s;
        report["n_trajectories"] = data.n_traj();
        report["n_snapshots"] = data.rows();
        std::ofstream out(json_path, std::ios::binary);
        if (!out) throw IoError(std::string("cannot open '") + json_path + "' for writing");
        out << report.dump(2) << "\n";
    }

    if (csv_dir) {
        std::filesystem::create_directories(csv_dir);
        const std::filesystem::path dir(csv_dir);
        for (int j = 0; j < n; ++j) {
            std::ofstream out(dir / ("coord_x" + std::to_string(j) + ".csv"),
                              std::ios::binary);
            out << "traj,t,truth,pred\n";
            for (size_t k = 0; k < data.n_traj(); ++k) {
                const size_t b = data.traj_begin(k);
                const Trajectory& r = rollouts[k];
                for (int i = 0; i < r.states.rows; ++i)
                    out << k << ',' << format_double(r.times[size_t(i)]) << ','
                        << format_double(data.row(b + size_t(i))[size_t(j)]) << ','
                        << format_double(r.states(i, j)) << "\n";
            }
        }
        if (src.energy || src.entropy || src.s_dot) {
            std::ofstream out(dir / "thermo.csv", std::ios::binary);
            out << "traj,t,energy,entropy,s_dot\n";
            size_t sd = 0;
            for (size_t k = 0; k < data.n_traj(); ++k) {
                const Trajectory& r = rollouts[k];
                for (int i = 0; i < r.states.rows; ++i) {
                    std::vector<double> x(size_t(n), 0.0);
                    for (int j = 0; j < n; ++j) x[size_t(j)] = r.states(i, j);
                    out << k << ',' << format_double(r.times[size_t(i)]) << ','
                        << (src.energy ? format_double(src.energy(x)) : "") << ','
                        << (src.entropy ? format_double(src.entropy(x)) : "") << ','
                        << (src.s_dot ? format_double(s_dot_series[sd++]) : "") << "\n";
                }
            }
        }
    }
}

}  // namespace

extern "C" {

const char* nms_last_error(void) { return g_last_error.c_str(); }

void nms_string_free(char* s) { delete[] s; }

void nms_split_options_init(nms_split_options* opt) {
    SplitSpec s;
    opt->by_trajectory = 0;
    opt->t_train = s.t_train;
    opt->t_val = s.t_val;
    opt->t_test = s.t_test;
    opt->train_frac = s.train_frac;
    opt->val_frac = s.val_frac;
}

nms_status nms_dataset_generate(const char* system, int rod_points,
                                const double* ics, int n_ics, int dim,
                                double dt, long steps,
                                const nms_split_options* split, uint64_t seed,
                                nms_dataset** out) {
    return guarded([&] {
        require(system && out, "dataset_generate: null argument");
        SystemSpec spec = make_system(system, rod_points > 0 ? rod_points : 50);
        std::vector<std::vector<double>> ic_rows;
        if (ics) {
            require(n_ics > 0 && dim == spec.n, "dataset_generate: bad IC shape");
            for (int k = 0; k < n_ics; ++k)
                ic_rows.emplace_back(ics + size_t(k) * size_t(dim),
                                     ics + size_t(k + 1) * size_t(dim));
        } else if (n_ics > 1) {
            require(spec.name == "tdp",
                    "dataset_generate: only tdp defines an IC sampling box");
            ic_rows = tdp_sample_ics(n_ics, seed);
        } else {
            ic_rows.push_back(spec.default_ic);
        }
        auto d = std::make_unique<nms_dataset>();
        d->data = generate_dataset(spec, ic_rows, dt, steps, to_split(split), seed);
        *out = d.release();
    });
}

nms_status nms_dataset_load(const char* path, nms_dataset** out) {
    return guarded([&] {
        require(path && out, "dataset_load: null argument");
        auto d = std::make_unique<nms_dataset>();
        d->data = read_dataset_csv(path);
        *out = d.release();
    });
}

nms_status nms_dataset_save(const nms_dataset* d, const char* path) {
    return guarded([&] {
        require(d && path, "dataset_save: null argument");
        write_dataset_csv(path, d->data);
    });
}

nms_status nms_dataset_set_observed(nms_dataset* d, const uint8_t* mask, int dim) {
    return guarded([&] {
        require(d && mask, "dataset_set_observed: null argument");
        require(dim == d->data.n, "dataset_set_observed: mask length mismatch");
        bool any = false;
        for (int i = 0; i < dim; ++i) any = any || mask[i];
        require(any, "dataset_set_observed: mask selects nothing");
        d->data.observable.assign(mask, mask + dim);
    });
}

nms_status nms_dataset_fill_unobserved(nms_dataset* d) {
    return guarded([&] {
        require(d != nullptr, "dataset_fill_unobserved: null argument");
        init_unobserved_linear(d->data);
    });
}

int nms_dataset_dim(const nms_dataset* d) { return d ? d->data.n : 0; }
long nms_dataset_rows(const nms_dataset* d) { return d ? long(d->data.rows()) : 0; }
void nms_dataset_free(nms_dataset* d) { delete d; }

void nms_model_options_init(nms_model_options* opt) {
    opt->n = 0;
    opt->r = 1;
    opt->r_inner = 0;
    opt->hamiltonian = 0;
    opt->hidden_width = 10;
    opt->hidden_depth = 1;
}

nms_status nms_model_create(const nms_model_options* opt, uint64_t seed,
                            nms_model** out) {
    return guarded([&] {
        require(opt && out, "model_create: null argument");
        require(opt->hidden_width > 0 && opt->hidden_depth > 0,
                "model_create: hidden layers must be positive");
        ModelConfig cfg;
        cfg.n = opt->n;
        cfg.r = opt->r;
        if (opt->r_inner > 0) {
            cfg.k_param = KParam::full;
            cfg.r_inner = opt->r_inner;
        }
        cfg.hamiltonian_mode = opt->hamiltonian != 0;
        const std::vector<int> hidden(size_t(opt->hidden_depth), opt->hidden_width);
        cfg.a_hidden = cfg.b_hidden = cfg.k_hidden = cfg.e_hidden = cfg.s_hidden = hidden;
        cfg.validate();
        auto m = std::make_unique<nms_model>();
        m->impl = std::make_unique<NmsTrainable>(model_init(cfg, seed));
        *out = m.release();
    });
}

nms_status nms_model_create_node(int dim, int hidden_width, int hidden_depth,
                                 uint64_t seed, nms_model** out) {
    return guarded([&] {
        require(out != nullptr, "model_create_node: null argument");
        require(dim > 0 && hidden_width > 0 && hidden_depth > 0,
                "model_create_node: dimensions must be positive");
        std::vector<int> widths{dim};
        for (int i = 0; i < hidden_depth; ++i) widths.push_back(hidden_width);
        widths.push_back(dim);
        auto m = std::make_unique<nms_model>();
        m->impl = std::make_unique<NodeTrainable>(widths, seed);
        *out = m.release();
    });
}

nms_status nms_model_load(const char* path, nms_model** out) {
    return guarded([&] {
        require(path && out, "model_load: null argument");
        auto m = std::make_unique<nms_model>();
        m->impl = model_from_checkpoint(read_checkpoint(path));
        *out = m.release();
    });
}

nms_status nms_model_save(const nms_model* m, const char* path) {
    return guarded([&] {
        require(m && path, "model_save: null argument");
        write_checkpoint(path, make_checkpoint(*m->impl, TrainConfig{}));
    });
}

int nms_model_dim(const nms_model* m) { return m ? m->impl->dim() : 0; }

long nms_model_param_total(const nms_model* m) {
    return m ? long(m->impl->params().size()) : 0;
}

const char* nms_model_kind(const nms_model* m) {
    if (!m) return "";
    return m->impl->kind() == "nms" ? "nms" : "node";
}

nms_status nms_model_rhs(const nms_model* m, const double* x, int dim, double* out) {
    return guarded([&] {
        require(m && x && out, "model_rhs: null argument");
        require(dim == m->impl->dim(), "model_rhs: dimension mismatch");
        auto v = m->impl->rhs(std::span<const double>(x, size_t(dim)));
        std::memcpy(out, v.data(), sizeof(double) * v.size());
    });
}

nms_status nms_model_energy_entropy(const nms_model* m, const double* x, int dim,
                                    double* energy, double* entropy) {
    return guarded([&] {
        require(m && x, "model_energy_entropy: null argument");
        require(dim == m->impl->dim(), "model_energy_entropy: dimension mismatch");
        auto* nm = dynamic_cast<const NmsTrainable*>(m->impl.get());
        require(nm != nullptr, "model_energy_entropy: unstructured model has no potentials");
        ModelEvaluator eval(nm->model());
        std::span<const double> xs(x, size_t(dim));
        if (energy) *energy = eval.energy(xs);
        if (entropy) *entropy = eval.entropy(xs);
    });
}

void nms_model_free(nms_model* m) { delete m; }

void nms_solver_options_init(nms_solver_options* opt) {
    SolverConfig s;
    opt->use_rk4 = 0;
    opt->dt = s.dt;
    opt->rtol = s.rtol;
    opt->atol = s.atol;
    opt->max_steps = s.max_steps;
}

void nms_train_options_init(nms_train_options* opt) {
    TrainConfig c;
    opt->origin_mode = 0;
    opt->n_steps = c.n_steps;
    opt->batch = c.batch;
    opt->rollout = c.rollout;
    opt->max_offset = c.max_offset;
    opt->lr = c.lr;
    opt->seed = c.seed;
    opt->val_cadence = c.val_cadence;
    opt->use_mae = 0;
    opt->verbose = 0;
    nms_solver_options_init(&opt->solver);
}

nms_status nms_train_run(nms_model* m, const nms_dataset* d,
                         const nms_train_options* opt, const char* loss_csv_path,
                         double* best_val) {
    return guarded([&] {
        require(m && d && opt, "train_run: null argument");
        TrainConfig cfg;
        cfg.mode = opt->origin_mode ? TrainMode::origin : TrainMode::windowed;
        cfg.n_steps = opt->n_steps;
        cfg.batch = opt->batch;
        cfg.rollout = opt->rollout;
        cfg.max_offset = opt->max_offset;
        cfg.lr = opt->lr;
        cfg.seed = opt->seed;
        cfg.val_cadence = opt->val_cadence;
        cfg.loss = opt->use_mae ? LossMetric::mae : LossMetric::mse;
        cfg.verbose = opt->verbose != 0;
        cfg.solver = to_solver(&opt->solver);
        TrainResult res = train(*m->impl, d->data, cfg);
        m->impl->params() = res.checkpoint.params;
        if (loss_csv_path) write_loss_csv(loss_csv_path, res);
        if (best_val) *best_val = res.checkpoint.best_val;
    });
}

nms_status nms_model_rollout(const nms_model* m, const double* ic, int dim,
                             const double* t_eval, long n_t,
                             const nms_solver_options* opt, nms_trajectory** out) {
    return guarded([&] {
        require(m && ic && t_eval && out, "model_rollout: null argument");
        require(dim == m->impl->dim(), "model_rollout: dimension mismatch");
        require(n_t > 0, "model_rollout: empty time grid");
        const SolverConfig solver = to_solver(opt);
        std::span<const double> ts(t_eval, size_t(n_t));
        std::span<const double> x0(ic, size_t(dim));
        auto t = std::make_unique<nms_trajectory>();
        if (auto* nm = dynamic_cast<const NmsTrainable*>(m->impl.get())) {
            ModelEvaluator eval(nm->model());
            auto f = [&](double, std::span<const double> x) { return eval.rhs(x); };
            t->traj = integrate_recorded<double>(f, x0, ts, solver);
        } else {
            auto f = [&](double, std::span<const double> x) { return m->impl->rhs(x); };
            t->traj = integrate_recorded<double>(f, x0, ts, solver);
        }
        *out = t.release();
    });
}

long nms_trajectory_rows(const nms_trajectory* t) {
    return t ? long(t->traj.times.size()) : 0;
}
int nms_trajectory_dim(const nms_trajectory* t) { return t ? t->traj.states.cols : 0; }
const double* nms_trajectory_times(const nms_trajectory* t) {
    return t ? t->traj.times.data() : nullptr;
}
const double* nms_trajectory_states(const nms_trajectory* t) {
    return t ? t->traj.states.a.data() : nullptr;
}
nms_status nms_trajectory_save(const nms_trajectory* t, const char* path) {
    return guarded([&] {
        require(t && path, "trajectory_save: null argument");
        write_trajectory_csv(path, t->traj);
    });
}
void nms_trajectory_free(nms_trajectory* t) { delete t; }

nms_status nms_model_check(const nms_model* m, int n_states, uint64_t seed,
                           nms_check_result* out) {
    return guarded([&] {
        require(m && out, "model_check: null argument");
        require(n_states > 0, "model_check: need at least one state");
        auto* nm = dynamic_cast<const NmsTrainable*>(m->impl.get());
        require(nm != nullptr, "model_check: structural audit applies to nms models only");
        const MetriplecticModel& model = nm->model();
        const int n = model.cfg.n;
        ModelEvaluator eval(model);
        *out = nms_check_result{};
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> dist(0.0, 0.5);
        int checked = 0;
        for (int s = 0; s < n_states; ++s) {
            std::vector<double> x(size_t(n), 0.0);
            for (double& v : x) v = dist(rng);
            Mat<double> l, mm;
            std::vector<double> ge, gs;
            try {
                l = eval.operator_L(x);
                mm = eval.operator_M(x);
                ge = eval.grad_energy(x);
                gs = eval.grad_entropy(x);
            } catch (const NondegeneracyError&) {
                continue;  // state outside the nondegenerate regime; skip
            }
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    out->max_skew = std::max(out->max_skew, std::abs(l(i, j) + l(j, i)));
                    out->max_asym = std::max(out->max_asym, std::abs(mm(i, j) - mm(j, i)));
                }
            const double m_scale = std::max(1.0, inf_norm(mm));
            out->min_eigenvalue =
                std::min(out->min_eigenvalue, sym_min_eigenvalue(mm) / m_scale);
            const double l_scale = std::max(1.0, inf_norm(l));
            std::vector<double> lgs = matvec(l, std::span<const double>(gs));
            std::vector<double> mge = matvec(mm, std::span<const double>(ge));
            out->max_degeneracy = std::max(
                out->max_degeneracy,
                std::max(norm2(lgs) / (l_scale * std::max(1.0, norm2(gs))),
                         norm2(mge) / (m_scale * std::max(1.0, norm2(ge)))));
            if (n <= 12 && checked < 5) {
                try {
                    out->max_jacobi =
                        std::max(out->max_jacobi, jacobi_residual(model, x));
                } catch (const Error&) {
                }
            }
            ++checked;
        }
        require(checked > 0, "model_check: every sampled state was degenerate");
        out->states_checked = checked;
    });
}

nms_status nms_eval_report(const nms_model* m, const nms_dataset* d,
                           const nms_solver_options* opt, const char* json_path,
                           const char* csv_dir) {
    return guarded([&] {
        require(m && d, "eval_report: null argument");
        require(m->impl->dim() == d->data.n, "eval_report: model/dataset dimension mismatch");
        EvalSource src;
        if (auto* nm = dynamic_cast<const NmsTrainable*>(m->impl.get())) {
            auto eval = std::make_shared<ModelEvaluator>(nm->model());
            src.rhs = [eval](double, std::span<const double> x) { return eval->rhs(x); };
            src.energy = [eval](std::span<const double> x) { return eval->energy(x); };
            src.entropy = [eval](std::span<const double> x) { return eval->entropy(x); };
            src.s_dot = [eval](std::span<const double> x) {
                auto gs = eval->grad_entropy(x);
                auto v = eval->rhs(x);
                double acc = 0.0;
                for (size_t i = 0; i < gs.size(); ++i) acc += gs[i] * v[i];
                return acc;
            };
            src.degeneracy = [eval](std::span<const double> x) {
                Mat<double> l = eval->operator_L(x), mm = eval->operator_M(x);
                auto ge = eval->grad_energy(x);
                auto gs = eval->grad_entropy(x);
                std::vector<double> lgs = matvec(l, std::span<const double>(gs));
                std::vector<double> mge = matvec(mm, std::span<const double>(ge));
                return std::max(
                    norm2(lgs) / (std::max(1.0, inf_norm(l)) * std::max(1.0, norm2(gs))),
                    norm2(mge) / (std::max(1.0, inf_norm(mm)) * std::max(1.0, norm2(ge))));
            };
        } else {
            auto* impl = m->impl.get();
            src.rhs = [impl](double, std::span<const double> x) { return impl->rhs(x); };
        }
        run_eval(src, d->data, to_solver(opt), json_path, csv_dir);
    });
}

nms_status nms_eval_exact(const char* system, int rod_points, const nms_dataset* d,
                          const nms_solver_options* opt, const char* json_path,
                          const char* csv_dir) {
    return guarded([&] {
        require(system && d, "eval_exact: null argument");
        auto spec = std::make_shared<SystemSpec>(
            make_system(system, rod_points > 0 ? rod_points : 50));
        require(spec->n == d->data.n, "eval_exact: system/dataset dimension mismatch");
        EvalSource src;
        src.rhs = [spec](double, std::span<const double> x) { return spec->rhs(x); };
        src.energy = [spec](std::span<const double> x) { return spec->energy(x); };
        src.entropy = [spec](std::span<const double> x) { return spec->entropy(x); };
        src.s_dot = [spec](std::span<const double> x) {
            auto gs = spec->grad_S(x);
            auto v = spec->rhs(x);
            double acc = 0.0;
            for (size_t i = 0; i < gs.size(); ++i) acc += gs[i] * v[i];
            return acc;
        };
        run_eval(src, d->data, to_solver(opt), json_path, csv_dir);
    });
}

nms_status nms_param_count(const char* architecture, int n, int r, long* out) {
    return guarded([&] {
        require(architecture && out, "param_count: null argument");
        *out = param_count(architecture_from_string(architecture), n, r);
    });
}

nms_status nms_scaling_csv(const int* n_list, int count, int r, int trials,
                           uint64_t seed, char** csv_out) {
    return guarded([&] {
        require(n_list && csv_out, "scaling_csv: null argument");
        require(count > 0 && trials > 0, "scaling_csv: need counts and trials > 0");
        std::span<const int> ns(n_list, size_t(count));
        auto rows = scaling_table(ns, r, trials, seed);
        std::string text = "n,nms,gnode,gfinn,rhs_wall_us\n";
        for (const auto& row : rows) {
            text += std::to_string(row.n) + ',' + std::to_string(row.nms) + ',' +
                    std::to_string(row.gnode) + ',' + std::to_string(row.gfinn) + ',' +
                    format_double(row.rhs_wall_us) + "\n";
        }
        char* buf = new char[text.size() + 1];
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *csv_out = buf;
    });
}

}  // extern "C"
