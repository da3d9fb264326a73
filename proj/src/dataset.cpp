#include "nms/dataset.hpp"

#include <cstdio>

#include "nms/odeint.hpp"

namespace nms {

bool Dataset::in_segment(size_t traj, size_t r, Segment seg) const {
    if (r < traj_begin(traj) || r >= traj_end(traj)) return false;
    if (split.kind == SplitSpec::Kind::by_trajectory) {
        const size_t nt = n_traj();
        const auto n_train = size_t(double(nt) * split.train_frac + 0.5);
        const auto n_val = size_t(double(nt) * split.val_frac + 0.5);
        switch (seg) {
            case Segment::train: return traj < n_train;
            case Segment::val: return traj >= n_train && traj < n_train + n_val;
            case Segment::test: return traj >= n_train + n_val;
        }
        return false;
    }
    const double t = times[r] - times[traj_begin(traj)];
    switch (seg) {
        case Segment::train: return t <= split.t_train + 1e-12;
        case Segment::val: return t > split.t_train + 1e-12 && t <= split.t_val + 1e-12;
        case Segment::test: return t > split.t_val + 1e-12;
    }
    return false;
}

Dataset generate_dataset(const SystemSpec& spec, const std::vector<std::vector<double>>& ics,
                         double dt, long steps, const SplitSpec& split, uint64_t seed) {
    split.validate();
    if (ics.empty()) throw ConfigError("generate_dataset: no initial conditions");
    if (dt <= 0.0) throw ConfigError("generate_dataset: dt must be positive");
    if (steps < 0) throw ConfigError("generate_dataset: steps must be nonnegative");

    Dataset data;
    data.n = spec.n;
    data.dt = dt;
    data.observable = spec.observable;
    data.split = split;
    data.seed = seed;
    data.states = Mat<double>(0, spec.n);
    data.states.a.reserve(ics.size() * size_t(steps + 1) * size_t(spec.n));

    auto f = [&](double, std::span<const double> x) {
        return spec.rhs(x);
    };

    for (const auto& ic : ics) {
        if (int(ic.size()) != spec.n)
            throw ConfigError("generate_dataset: IC dimension mismatch");
        spec.check_domain(ic);
        data.traj_starts.push_back(data.times.size());
        data.truncated_at.push_back(-1);
        std::vector<double> x = ic;
        data.times.push_back(0.0);
        data.states.a.insert(data.states.a.end(), x.begin(), x.end());
        for (long s = 0; s < steps; ++s) {
            try {
                x = rk4_step<double>(f, double(s) * dt, x, dt);
                spec.check_domain(x);
            } catch (const DomainError& e) {
                std::fprintf(stderr, "warning: %s trajectory %zu truncated at step %ld: %s\n",
                             spec.name.c_str(), data.traj_starts.size() - 1, s + 1, e.what());
                data.truncated_at.back() = long(data.times.size());
                break;
            }
            data.times.push_back(double(s + 1) * dt);
            data.states.a.insert(data.states.a.end(), x.begin(), x.end());
        }
    }
    data.states.rows = int(data.times.size());
    return data;
}

void init_unobserved_linear(Dataset& data) {
    bool any = false;
    for (uint8_t o : data.observable) any = any || o == 0;
    if (!any) return;
    for (size_t k = 0; k < data.n_traj(); ++k) {
        const size_t b = data.traj_begin(k), e = data.traj_end(k);
        const double t0 = data.times[b];
        // Horizon: the training window for temporal splits, otherwise the
        // trajectory span.  The line continues past 1 beyond the horizon.
        double horizon = data.split.kind == SplitSpec::Kind::temporal
                             ? data.split.t_train
                             : data.times[e - 1] - t0;
        if (horizon <= 0.0) horizon = 1.0;
        for (size_t r = b; r < e; ++r) {
            const double v = (data.times[r] - t0) / horizon;
            for (int j = 0; j < data.n; ++j)
                if (!data.observable[size_t(j)]) data.states(int(r), j) = v;
        }
    }
}

}  // namespace nms
