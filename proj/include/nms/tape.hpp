#pragma once

// Scalar reverse-mode differentiation tape.
//
// Every recorded value is a node holding up to two parent references with
// local partial derivatives.  A partial is stored either as a literal
// double or as a reference to another node; the node-reference form makes
// the backward pass itself recordable, so grad() can emit adjoint
// accumulation as ordinary tape operations and gradients of gradients
// (e.g. grad E feeding the assembled vector field, then differentiated
// through a solver) come out exact.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nms/errors.hpp"

namespace nms {

class Tape;

struct Var {
    Tape* tape = nullptr;
    int32_t idx = -1;

    double value() const;
    bool valid() const { return tape != nullptr && idx >= 0; }
};

class Tape {
  public:
    struct Node {
        double val;
        int32_t parent[2];
        int32_t pnode[2];  // partial as node index, or -1
        double plit[2];    // partial as literal when pnode < 0
    };

    Tape() { nodes_.reserve(1 << 16); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    size_t size() const { return nodes_.size(); }
    void clear() {
        nodes_.clear();
        epoch_data_.clear();
        saturation_count_ = 0;
    }

    // Scratch scopes: mark the current length and truncate back to it.
    size_t mark() const { return nodes_.size(); }
    void rewind(size_t m) {
        nodes_.resize(m);
        if (epoch_data_.size() > m) epoch_data_.resize(m);
    }

    double value(int32_t i) const { return nodes_[size_t(i)].val; }
    const Node& node(int32_t i) const { return nodes_[size_t(i)]; }

    Var leaf(double v) { return push0(v, "leaf"); }
    Var constant(double v) { return push0(v, "const"); }

    std::vector<Var> leaves(std::span<const double> vals) {
        std::vector<Var> out;
        out.reserve(vals.size());
        for (double v : vals) out.push_back(leaf(v));
        return out;
    }

    Var push0(double v, const char* op) {
        check_finite(v, op);
        nodes_.push_back(Node{v, {-1, -1}, {-1, -1}, {0.0, 0.0}});
        return Var{this, int32_t(nodes_.size() - 1)};
    }
    Var push1(double v, const char* op, int32_t p, double dlit, int32_t dnode = -1) {
        check_finite(v, op);
        nodes_.push_back(Node{v, {p, -1}, {dnode, -1}, {dlit, 0.0}});
        return Var{this, int32_t(nodes_.size() - 1)};
    }
    Var push2(double v, const char* op, int32_t p0, double d0, int32_t p1, double d1,
              int32_t dn0 = -1, int32_t dn1 = -1) {
        check_finite(v, op);
        nodes_.push_back(Node{v, {p0, p1}, {dn0, dn1}, {d0, d1}});
        return Var{this, int32_t(nodes_.size() - 1)};
    }

    // Late-bind a partial to a node created after its owner.  The data
    // dependency graph (parents) stays index-ordered; only partial
    // references may point forward.
    void set_pnode(int32_t i, int slot, int32_t j) { nodes_[size_t(i)].pnode[slot] = j; }

    // Dense numeric backward pass from a scalar root.  adj is resized to the
    // current tape length; adj[i] afterwards holds d(root)/d(node i).
    void backward(Var root, std::vector<double>& adj) const {
        adj.assign(nodes_.size(), 0.0);
        adj[size_t(root.idx)] = 1.0;
        for (int32_t i = root.idx; i >= 0; --i) {
            const double a = adj[size_t(i)];
            if (a == 0.0) continue;
            const Node& nd = nodes_[size_t(i)];
            for (int s = 0; s < 2; ++s) {
                const int32_t p = nd.parent[s];
                if (p < 0) continue;
                const double d =
                    nd.pnode[s] >= 0 ? nodes_[size_t(nd.pnode[s])].val : nd.plit[s];
                adj[size_t(p)] += a * d;
            }
        }
    }

    // Recorded backward pass: returns d(root)/d(wrt[k]) as new tape
    // variables.  Visits only the ancestors of root (sparse, so repeated
    // small gradients on a long tape stay cheap).
    std::vector<Var> grad(Var root, std::span<const Var> wrt);

    // exp inputs are clamped at +/-50; each clamp increments this counter.
    uint64_t saturation_count() const { return saturation_count_; }
    void note_saturation() { ++saturation_count_; }

  private:
    static void check_finite(double v, const char* op) {
        if (!std::isfinite(v))
            throw TapeError(std::string("non-finite value in primitive '") + op + "'");
    }

    std::vector<Node> nodes_;
    uint64_t saturation_count_ = 0;

    // Epoch-stamped scratch used by grad(); grows with the tape.
    struct Stamp {
        uint32_t epoch = 0;
        int32_t adj = -1;
    };
    std::vector<Stamp> epoch_data_;
    uint32_t epoch_ = 0;
};

inline double Var::value() const { return tape->value(idx); }

// ---------------------------------------------------------------------------
// Recorded primitives.

inline Var operator-(Var a) { return a.tape->push1(-a.value(), "neg", a.idx, -1.0); }

inline Var operator+(Var a, Var b) {
    return a.tape->push2(a.value() + b.value(), "add", a.idx, 1.0, b.idx, 1.0);
}
inline Var operator-(Var a, Var b) {
    return a.tape->push2(a.value() - b.value(), "sub", a.idx, 1.0, b.idx, -1.0);
}
inline Var operator*(Var a, Var b) {
    return a.tape->push2(a.value() * b.value(), "mul", a.idx, 0.0, b.idx, 0.0, b.idx,
                         a.idx);
}
inline Var operator/(Var a, Var b) {
    const double bv = b.value();
    if (bv == 0.0) throw TapeError("division by zero in primitive 'div'");
    const double q = a.value() / bv;
    Var out = a.tape->push2(q, "div", a.idx, 1.0 / bv, b.idx, -q / bv);
    // Recorded partials: d/da = 1/b, d/db = -q/b.
    Var inv_b = a.tape->push1(1.0 / bv, "div", b.idx, -1.0 / (bv * bv));
    Var dinv = -(inv_b * inv_b);
    a.tape->set_pnode(inv_b.idx, 0, dinv.idx);
    Var ddb = -(out * inv_b);
    a.tape->set_pnode(out.idx, 0, inv_b.idx);
    a.tape->set_pnode(out.idx, 1, ddb.idx);
    return out;
}
inline Var operator+(Var a, double c) {
    return a.tape->push1(a.value() + c, "add", a.idx, 1.0);
}
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) {
    return a.tape->push1(c - a.value(), "sub", a.idx, -1.0);
}
inline Var operator*(Var a, double c) {
    return a.tape->push1(a.value() * c, "mul", a.idx, c);
}
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) {
    if (c == 0.0) throw TapeError("division by zero in primitive 'div'");
    return a * (1.0 / c);
}
inline Var operator/(double c, Var a) {
    const double av = a.value();
    if (av == 0.0) throw TapeError("division by zero in primitive 'div'");
    Var out = a.tape->push1(c / av, "div", a.idx, -c / (av * av));
    Var d = -(out / a);
    a.tape->set_pnode(out.idx, 0, d.idx);
    return out;
}

inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator-=(Var& a, Var b) { return a = a - b; }
inline Var& operator*=(Var& a, Var b) { return a = a * b; }

inline Var tanh(Var a) {
    const double t = std::tanh(a.value());
    Var out = a.tape->push1(t, "tanh", a.idx, 1.0 - t * t);
    Var d = 1.0 - out * out;
    a.tape->set_pnode(out.idx, 0, d.idx);
    return out;
}

inline Var exp(Var a) {
    double x = a.value();
    if (x > 50.0 || x < -50.0) {
        a.tape->note_saturation();
        x = x > 50.0 ? 50.0 : -50.0;
    }
    const double e = std::exp(x);
    Var out = a.tape->push1(e, "exp", a.idx, e);
    a.tape->set_pnode(out.idx, 0, out.idx);  // d exp/dx = exp itself
    return out;
}

inline Var log(Var a) {
    const double x = a.value();
    if (x <= 0.0) throw TapeError("log of nonpositive value in primitive 'log'");
    Var out = a.tape->push1(std::log(x), "log", a.idx, 1.0 / x);
    Var inv = 1.0 / a;
    a.tape->set_pnode(out.idx, 0, inv.idx);
    return out;
}

inline Var sin(Var a) {
    const double sv = std::sin(a.value());
    const double cv = std::cos(a.value());
    Var s = a.tape->push1(sv, "sin", a.idx, cv);
    Var c = a.tape->push1(cv, "cos", a.idx, -sv);
    Var ms = -s;
    a.tape->set_pnode(s.idx, 0, c.idx);
    a.tape->set_pnode(c.idx, 0, ms.idx);
    return s;
}

inline Var cos(Var a) {
    const double sv = std::sin(a.value());
    const double cv = std::cos(a.value());
    Var c = a.tape->push1(cv, "cos", a.idx, -sv);
    Var s = a.tape->push1(sv, "sin", a.idx, cv);
    Var ms = -s;
    a.tape->set_pnode(s.idx, 0, c.idx);
    a.tape->set_pnode(c.idx, 0, ms.idx);
    return c;
}

inline Var sqrt(Var a) {
    const double x = a.value();
    if (x <= 0.0) throw TapeError("sqrt of nonpositive value in primitive 'sqrt'");
    const double s = std::sqrt(x);
    Var out = a.tape->push1(s, "sqrt", a.idx, 0.5 / s);
    Var d = 0.5 / out;
    a.tape->set_pnode(out.idx, 0, d.idx);
    return out;
}

inline Var pow(Var a, double p) {
    const double x = a.value();
    const double y = std::pow(x, p);
    if (!std::isfinite(y)) throw TapeError("non-finite value in primitive 'pow'");
    if (x == 0.0) return a.tape->push1(y, "pow", a.idx, p == 1.0 ? 1.0 : 0.0);
    Var out = a.tape->push1(y, "pow", a.idx, p * y / x);
    Var d = out / a * p;
    a.tape->set_pnode(out.idx, 0, d.idx);
    return out;
}

inline Var dot(std::span<const Var> a, std::span<const Var> b) {
    Var acc = a[0] * b[0];
    for (size_t i = 1; i < a.size(); ++i) acc = acc + a[i] * b[i];
    return acc;
}

inline Var sum_sq(std::span<const Var> a) {
    Var acc = a[0] * a[0];
    for (size_t i = 1; i < a.size(); ++i) acc = acc + a[i] * a[i];
    return acc;
}

// Generic helpers so templated numerics accept both double and Var.
inline double value_of(double x) { return x; }
inline double value_of(Var x) { return x.value(); }

// ---------------------------------------------------------------------------

inline std::vector<Var> Tape::grad(Var root, std::span<const Var> wrt) {
    if (epoch_data_.size() < nodes_.size()) epoch_data_.resize(nodes_.size());
    ++epoch_;

    // Collect ancestors of root (data-dependency parents only).
    std::vector<int32_t> order;
    std::vector<int32_t> stack{root.idx};
    epoch_data_[size_t(root.idx)] = {epoch_, -1};
    while (!stack.empty()) {
        int32_t i = stack.back();
        stack.pop_back();
        order.push_back(i);
        const Node& nd = nodes_[size_t(i)];
        for (int s = 0; s < 2; ++s) {
            int32_t p = nd.parent[s];
            if (p < 0) continue;
            Stamp& st = epoch_data_[size_t(p)];
            if (st.epoch != epoch_) {
                st = {epoch_, -1};
                stack.push_back(p);
            }
        }
    }
    std::sort(order.begin(), order.end(), std::greater<int32_t>());
    const size_t limit = epoch_data_.size();

    // Seed and propagate.  Appended adjoint nodes have indices above
    // root.idx, so the descending visit order stays topological.
    Var one = constant(1.0);
    epoch_data_[size_t(root.idx)].adj = one.idx;
    for (int32_t i : order) {
        const int32_t a_idx = epoch_data_[size_t(i)].adj;
        if (a_idx < 0) continue;
        Var a{this, a_idx};
        const Node nd = nodes_[size_t(i)];  // copy: nodes_ may reallocate below
        for (int s = 0; s < 2; ++s) {
            const int32_t p = nd.parent[s];
            if (p < 0) continue;
            Var contrib = nd.pnode[s] >= 0 ? a * Var{this, nd.pnode[s]} : a * nd.plit[s];
            Stamp& st = epoch_data_[size_t(p)];
            st.adj = st.adj < 0 ? contrib.idx : (Var{this, st.adj} + contrib).idx;
        }
    }

    std::vector<Var> out;
    out.reserve(wrt.size());
    for (Var w : wrt) {
        if (size_t(w.idx) < limit) {
            const Stamp& st = epoch_data_[size_t(w.idx)];
            if (st.epoch == epoch_ && st.adj >= 0) {
                out.push_back(Var{this, st.adj});
                continue;
            }
        }
        out.push_back(constant(0.0));
    }
    return out;
}

}  // namespace nms
