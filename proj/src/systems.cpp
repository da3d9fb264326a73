#include "nms/systems.hpp"

#include <cmath>
#include <random>

namespace nms {
namespace {

// Gradient of a closed-form scalar field via a scratch tape.
template <class F>
std::vector<double> tape_gradient(F&& f, std::span<const double> x) {
    thread_local Tape tape;
    tape.clear();
    std::vector<Var> xv = tape.leaves(x);
    Var y = f(std::span<const Var>(xv));
    std::vector<double> adj;
    tape.backward(y, adj);
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) g[i] = adj[size_t(xv[i].idx)];
    return g;
}

Mat<double> canonical_L(int n_pairs, int n_total) {
    Mat<double> l(n_total, n_total, 0.0);
    for (int i = 0; i < n_pairs; ++i) {
        l(i, n_pairs + i) = 1.0;
        l(n_pairs + i, i) = -1.0;
    }
    return l;
}

void finalize_rhs(SystemSpec& s) {
    auto dom = s.check_domain;
    auto grad_E = s.grad_E;
    auto grad_S = s.grad_S;
    auto exact_L = s.exact_L;
    auto exact_M = s.exact_M;
    s.rhs = [=](std::span<const double> x) {
        dom(x);
        std::vector<double> ge = grad_E(x), gs = grad_S(x);
        Mat<double> l = exact_L(x), m = exact_M(x);
        std::vector<double> out = matvec(l, std::span<const double>(ge));
        std::vector<double> irr = matvec(m, std::span<const double>(gs));
        for (size_t i = 0; i < out.size(); ++i) out[i] += irr[i];
        return out;
    };
}

}  // namespace

// ---------------------------------------------------------------------------
// Two gas containers.  State (q, p, S1, S2).

namespace {

template <class T>
T tgc_container_energy(T s_i, T v_i, const TgcConstants& c) {
    using std::exp;
    using std::pow;
    // Sackur-Tetrode: S_i/NkB = ln(c_hat V_i E_i^{3/2}) inverted for E_i.
    return pow(exp(s_i * (1.0 / c.n_kb)) / (c.c_hat * v_i), 2.0 / 3.0);
}

template <class T>
T tgc_energy(std::span<const T> x, const TgcConstants& c) {
    T v1 = x[0] * 1.0;
    T v2 = 2.0 * c.half_length - x[0];
    T e1 = tgc_container_energy(x[2], v1, c);
    T e2 = tgc_container_energy(x[3], v2, c);
    return x[1] * x[1] * (0.5 / c.mass) + e1 + e2;
}

}  // namespace

SystemSpec tgc_spec(const TgcConstants& c) {
    SystemSpec s;
    s.name = "tgc";
    s.n = 4;
    s.observable = {1, 1, 0, 0};
    if (c.literal_ic) {
        s.default_ic = {1.0, 2.0, 103.2874, 103.2874};
    } else {
        // Entropies rescaled so E_i = 1 at q = 1 (desk-scale energies).
        const double si = c.n_kb * std::log(c.c_hat * c.half_length);
        s.default_ic = {c.half_length, 2.0, si, si};
    }
    s.check_domain = [c](std::span<const double> x) {
        if (!(x[0] > 0.0 && x[0] < 2.0 * c.half_length))
            throw DomainError("tgc: wall position q = " + std::to_string(x[0]) +
                              " outside (0, 2L)");
    };
    s.energy = [c](std::span<const double> x) { return tgc_energy(x, c); };
    s.entropy = [](std::span<const double> x) { return x[2] + x[3]; };
    s.grad_E = [c](std::span<const double> x) {
        return tape_gradient([&](std::span<const Var> xv) { return tgc_energy(xv, c); }, x);
    };
    s.grad_S = [](std::span<const double> x) {
        return std::vector<double>{0.0, 0.0, 1.0, 1.0};
    };
    s.exact_L = [](std::span<const double>) { return canonical_L(1, 4); };
    s.exact_M = [c](std::span<const double> x) {
        // T_i = dE/dS_i = (2 / (3 NkB)) E_i for the Sackur-Tetrode gas.
        const double e1 = tgc_container_energy(x[2], x[0], c);
        const double e2 = tgc_container_energy(x[3], 2.0 * c.half_length - x[0], c);
        const double t1 = 2.0 / (3.0 * c.n_kb) * e1;
        const double t2 = 2.0 / (3.0 * c.n_kb) * e2;
        const double cc = c.alpha * c.n_kb * c.n_kb;
        Mat<double> m(4, 4, 0.0);
        m(2, 2) = cc / (t1 * t1);
        m(2, 3) = m(3, 2) = -cc / (t1 * t2);
        m(3, 3) = cc / (t2 * t2);
        return m;
    };
    finalize_rhs(s);
    return s;
}

// ---------------------------------------------------------------------------
// Thermoelastic double pendulum.  State (q1, q2, p1, p2, S1, S2) in R^10.

namespace {

template <class T>
T tdp_lambda1(std::span<const T> x) {
    using std::sqrt;
    return sqrt(x[0] * x[0] + x[1] * x[1]);
}
template <class T>
T tdp_lambda2(std::span<const T> x) {
    using std::sqrt;
    T dx = x[2] - x[0], dy = x[3] - x[1];
    return sqrt(dx * dx + dy * dy);
}

template <class T>
T tdp_internal(T log_lambda, T s_i) {
    using std::exp;
    return 0.5 * log_lambda * log_lambda + log_lambda + exp(s_i - log_lambda) - 1.0;
}

template <class T>
T tdp_energy(std::span<const T> x, const TdpConstants& c) {
    using std::log;
    T ll1 = log(tdp_lambda1(x));
    T ll2 = log(tdp_lambda2(x));
    T kin = (x[4] * x[4] + x[5] * x[5]) * (0.5 / c.m1) +
            (x[6] * x[6] + x[7] * x[7]) * (0.5 / c.m2);
    return kin + tdp_internal(ll1, x[8]) + tdp_internal(ll2, x[9]);
}

}  // namespace

SystemSpec tdp_spec(const TdpConstants& c) {
    SystemSpec s;
    s.name = "tdp";
    s.n = 10;
    s.observable = {1, 1, 1, 1, 1, 1, 1, 1, 0, 0};
    s.default_ic = {0.6, 0.0, 2.2, 0.0, 0.1, 1.0, 0.0, 1.0, 0.2, 0.2};
    s.check_domain = [](std::span<const double> x) {
        const double l1 = tdp_lambda1(x), l2 = tdp_lambda2(x);
        if (l1 <= 1e-10 || l2 <= 1e-10)
            throw DomainError("tdp: spring length collapsed to zero");
    };
    s.energy = [c](std::span<const double> x) { return tdp_energy(x, c); };
    s.entropy = [](std::span<const double> x) { return x[8] + x[9]; };
    s.grad_E = [c](std::span<const double> x) {
        return tape_gradient([&](std::span<const Var> xv) { return tdp_energy(xv, c); }, x);
    };
    s.grad_S = [](std::span<const double> x) {
        std::vector<double> g(10, 0.0);
        g[8] = g[9] = 1.0;
        return g;
    };
    s.exact_L = [](std::span<const double>) { return canonical_L(4, 10); };
    s.exact_M = [c](std::span<const double> x) {
        const double t1 = std::exp(x[8]) / tdp_lambda1(x);
        const double t2 = std::exp(x[9]) / tdp_lambda2(x);
        Mat<double> m(10, 10, 0.0);
        m(8, 8) = c.kappa * t2 / t1;
        m(8, 9) = m(9, 8) = -c.kappa;
        m(9, 9) = c.kappa * t1 / t2;
        return m;
    };
    finalize_rhs(s);
    return s;
}

std::vector<std::vector<double>> tdp_sample_ics(int count, uint64_t seed) {
    // Per-coordinate sampling boxes; the source list gives nine ranges for
    // ten coordinates, so the final one is reused for S2.
    static constexpr double lo[10] = {0.1, -0.1, 2.1, -0.1, -1.9, 0.9, -0.1, 0.9, 0.1, 0.1};
    static constexpr double hi[10] = {1.1, 0.1, 2.3, 0.1, 2.1, 1.1, 0.1, 1.1, 0.3, 0.3};
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> out;
    out.reserve(size_t(count));
    for (int k = 0; k < count; ++k) {
        std::vector<double> x(10);
        for (int i = 0; i < 10; ++i) {
            std::uniform_real_distribution<double> dist(lo[i], hi[i]);
            x[size_t(i)] = dist(rng);
        }
        out.push_back(std::move(x));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Damped nonlinear oscillator.  State (q, p, S), q, p in R^d.

namespace {

template <class T>
T dno_energy(std::span<const T> x, int d, const DnoConstants& c) {
    using std::cos;
    T kin = x[size_t(d)] * x[size_t(d)];
    for (int i = 1; i < d; ++i) kin = kin + x[size_t(d + i)] * x[size_t(d + i)];
    T pot = cos(x[0]) * (-c.stiffness);
    for (int i = 1; i < d; ++i) pot = pot - c.stiffness * cos(x[size_t(i)]);
    return kin * (0.5 / c.mass) + pot + c.bath_temperature * x[size_t(2 * d)];
}

}  // namespace

SystemSpec dno_spec(int d, const DnoConstants& c) {
    if (d != 1 && d != 2) throw ConfigError("dno_spec: d must be 1 or 2");
    if (c.bath_temperature <= 0.0) throw ConfigError("dno_spec: T must be positive");
    if (c.mass <= 0.0 || c.stiffness <= 0.0 || c.damping < 0.0)
        throw ConfigError("dno_spec: need m, k > 0 and damping >= 0");
    SystemSpec s;
    s.name = d == 1 ? "dno1" : "dno2";
    const int n = 2 * d + 1;
    s.n = n;
    s.observable.assign(size_t(n), 1);
    s.observable[size_t(2 * d)] = 0;
    s.default_ic.assign(size_t(n), 0.0);
    for (int i = 0; i < d; ++i) s.default_ic[size_t(i)] = 2.0;
    s.check_domain = [](std::span<const double>) {};
    s.energy = [c, d](std::span<const double> x) { return dno_energy(x, d, c); };
    s.entropy = [d](std::span<const double> x) { return x[size_t(2 * d)]; };
    s.grad_E = [c, d](std::span<const double> x) {
        return tape_gradient([&](std::span<const Var> xv) { return dno_energy(xv, d, c); },
                             x);
    };
    s.grad_S = [d, n](std::span<const double>) {
        std::vector<double> g(size_t(n), 0.0);
        g[size_t(2 * d)] = 1.0;
        return g;
    };
    s.exact_L = [d, n](std::span<const double>) { return canonical_L(d, n); };
    s.exact_M = [c, d, n](std::span<const double> x) {
        // (gamma*m/T) sum_j u_j u_j^T with u_j = (0, T e_j, -p_j/m); this is
        // the PSD field whose action on grad S reproduces -gamma*p damping
        // and the stated entropy production, and which annihilates grad E.
        Mat<double> m(n, n, 0.0);
        const double g = c.damping, mm = c.mass, tt = c.bath_temperature;
        double p2 = 0.0;
        for (int j = 0; j < d; ++j) {
            const double pj = x[size_t(d + j)];
            p2 += pj * pj;
            m(d + j, d + j) = g * mm * tt;
            m(d + j, 2 * d) = m(2 * d, d + j) = -g * pj;
        }
        m(2 * d, 2 * d) = g * p2 / (mm * tt);
        return m;
    };
    finalize_rhs(s);
    return s;
}

// ---------------------------------------------------------------------------
// Damped thermoelastic rod.  State (q, p, S), q, p in R^N.

namespace {

template <class T>
T rod_energy(std::span<const T> x, int N, const RodConstants& c) {
    T kin = x[size_t(N)] * x[size_t(N)];
    for (int i = 1; i < N; ++i) kin = kin + x[size_t(N + i)] * x[size_t(N + i)];
    // Nearest-neighbor quadratic chain potential.
    T d0 = x[1] - x[0];
    T pot = d0 * d0 * (0.5 * c.spring);
    for (int i = 1; i + 1 < N; ++i) {
        T di = x[size_t(i + 1)] - x[size_t(i)];
        pot = pot + di * di * (0.5 * c.spring);
    }
    return kin * (0.5 / c.mass) + pot + x[size_t(2 * N)] * 1.0;
}

}  // namespace

SystemSpec rod_spec(int N, const RodConstants& c) {
    if (N < 2) throw ConfigError("rod_spec: N must be >= 2");
    SystemSpec s;
    s.name = "rod";
    const int n = 2 * N + 1;
    s.n = n;
    s.observable.assign(size_t(n), 1);
    s.observable[size_t(2 * N)] = 0;
    s.default_ic.assign(size_t(n), 0.0);
    for (int i = 0; i < N; ++i)
        s.default_ic[size_t(i)] = std::sin(M_PI * double(i) / double(N - 1));
    s.check_domain = [](std::span<const double>) {};
    s.energy = [c, N](std::span<const double> x) { return rod_energy(x, N, c); };
    s.entropy = [N](std::span<const double> x) { return x[size_t(2 * N)]; };
    s.grad_E = [c, N](std::span<const double> x) {
        return tape_gradient([&](std::span<const Var> xv) { return rod_energy(xv, N, c); },
                             x);
    };
    s.grad_S = [N, n](std::span<const double>) {
        std::vector<double> g(size_t(n), 0.0);
        g[size_t(2 * N)] = 1.0;
        return g;
    };
    s.exact_L = [N, n](std::span<const double>) { return canonical_L(N, n); };
    s.exact_M = [c, N, n](std::span<const double> x) {
        Mat<double> m(n, n, 0.0);
        const double g = c.damping, mm = c.mass;
        double p2 = 0.0;
        for (int j = 0; j < N; ++j) {
            const double pj = x[size_t(N + j)];
            p2 += pj * pj;
            m(N + j, N + j) = g;
            m(N + j, 2 * N) = m(2 * N, N + j) = -g * pj / mm;
        }
        m(2 * N, 2 * N) = g * p2 / (mm * mm);
        return m;
    };
    finalize_rhs(s);
    return s;
}

SystemSpec make_system(const std::string& name, int rod_points) {
    if (name == "tgc") return tgc_spec();
    if (name == "tdp") return tdp_spec();
    if (name == "dno1") return dno_spec(1);
    if (name == "dno2") return dno_spec(2);
    if (name == "rod") return rod_spec(rod_points);
    throw ConfigError("unknown system '" + name + "'");
}

}  // namespace nms
