#include "xvapinn/tape.hpp"

#include <cmath>

namespace xvapinn::ad {

Var Tape::variable(double value) {
    nodes_.push_back({kNone, kNone, 0.0, 0.0});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

Var Tape::unary(const Var& a, double value, double da) {
    if (a.is_constant()) return Var(value);
    nodes_.push_back({a.index(), kNone, da, 0.0});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

Var Tape::binary(const Var& a, const Var& b, double value, double da, double db) {
    if (a.is_constant()) return unary(b, value, db);
    if (b.is_constant()) return unary(a, value, da);
    nodes_.push_back({a.index(), b.index(), da, db});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

Adjoints Tape::gradient(const Var& output) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    if (output.is_constant()) return Adjoints(std::move(adj));
    adj[output.index()] = 1.0;
    for (std::size_t i = output.index() + 1; i-- > 0;) {
        const double a = adj[i];
        if (a == 0.0) continue;
        const Node& n = nodes_[i];
        if (n.lhs != kNone) adj[n.lhs] += a * n.dlhs;
        if (n.rhs != kNone) adj[n.rhs] += a * n.drhs;
    }
    return Adjoints(std::move(adj));
}

namespace {

Tape* tape_of(const Var& a, const Var& b) { return a.tape() ? a.tape() : b.tape(); }

}  // namespace

double value_of(const Var& v) { return v.value(); }

Var operator+(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    const double v = a.value() + b.value();
    return t ? t->binary(a, b, v, 1.0, 1.0) : Var(v);
}

Var operator-(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    const double v = a.value() - b.value();
    return t ? t->binary(a, b, v, 1.0, -1.0) : Var(v);
}

Var operator*(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    const double v = a.value() * b.value();
    return t ? t->binary(a, b, v, b.value(), a.value()) : Var(v);
}

Var operator/(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    const double v = a.value() / b.value();
    return t ? t->binary(a, b, v, 1.0 / b.value(), -v / b.value()) : Var(v);
}

Var operator-(const Var& a) {
    return a.tape() ? a.tape()->unary(a, -a.value(), -1.0) : Var(-a.value());
}

Var& Var::operator+=(const Var& o) { return *this = *this + o; }
Var& Var::operator-=(const Var& o) { return *this = *this - o; }
Var& Var::operator*=(const Var& o) { return *this = *this * o; }
Var& Var::operator/=(const Var& o) { return *this = *this / o; }

Var max(const Var& a, const Var& b) { return a.value() > b.value() ? a : b; }
Var min(const Var& a, const Var& b) { return a.value() < b.value() ? a : b; }

Var abs(const Var& a) {
    if (a.value() > 0.0) return a;
    if (a.value() < 0.0) return -a;
    return Var(0.0);
}

Var exp(const Var& a) {
    const double v = std::exp(a.value());
    return a.tape() ? a.tape()->unary(a, v, v) : Var(v);
}

Var log(const Var& a) {
    const double v = std::log(a.value());
    return a.tape() ? a.tape()->unary(a, v, 1.0 / a.value()) : Var(v);
}

Var sqrt(const Var& a) {
    const double v = std::sqrt(a.value());
    return a.tape() ? a.tape()->unary(a, v, 0.5 / v) : Var(v);
}

Var tanh(const Var& a) {
    const double v = std::tanh(a.value());
    return a.tape() ? a.tape()->unary(a, v, 1.0 - v * v) : Var(v);
}

Var pow(const Var& a, double p) {
    const double v = std::pow(a.value(), p);
    return a.tape() ? a.tape()->unary(a, v, p * std::pow(a.value(), p - 1.0)) : Var(v);
}

Var square(const Var& a) { return a * a; }

}  // namespace xvapinn::ad
