#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace xvapinn::ad {

class Tape;

/// Scalar recorded on a Tape. A Var without a tape is a constant.
class Var {
public:
    Var() = default;
    Var(double constant) : value_(constant) {}  // NOLINT(implicit)

    double value() const noexcept { return value_; }
    bool is_constant() const noexcept { return tape_ == nullptr; }
    Tape* tape() const noexcept { return tape_; }
    std::uint32_t index() const noexcept { return index_; }

    Var& operator+=(const Var& o);
    Var& operator-=(const Var& o);
    Var& operator*=(const Var& o);
    Var& operator/=(const Var& o);

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t index, double value)
        : tape_(tape), index_(index), value_(value) {}

    Tape* tape_ = nullptr;
    std::uint32_t index_ = 0;
    double value_ = 0.0;
};

/// Adjoints of every node on a tape with respect to one output.
class Adjoints {
public:
    explicit Adjoints(std::vector<double> values) : values_(std::move(values)) {}
    double operator[](const Var& v) const {
        return v.is_constant() ? 0.0 : values_[v.index()];
    }

private:
    std::vector<double> values_;
};

/// Wengert list for reverse-mode differentiation of scalar expressions. Every
/// node has at most two parents, so the backward sweep is a single pass over
/// a flat array.
class Tape {
public:
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    Var variable(double value);

    // Node with one or two parents and the local partial derivatives.
    Var unary(const Var& a, double value, double da);
    Var binary(const Var& a, const Var& b, double value, double da, double db);

    Adjoints gradient(const Var& output) const;

    void clear() noexcept { nodes_.clear(); }
    void reserve(std::size_t n) { nodes_.reserve(n); }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        std::uint32_t lhs;
        std::uint32_t rhs;
        double dlhs;
        double drhs;
    };
    std::vector<Node> nodes_;
};

double value_of(const Var& v);
inline double value_of(double v) { return v; }

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }

// Ties resolve to the second argument, so max(v, 0) and min(v, 0) have
// derivative 0 at v == 0.
Var max(const Var& a, const Var& b);
Var min(const Var& a, const Var& b);

inline double max(double a, double b) { return a > b ? a : b; }
inline double min(double a, double b) { return a < b ? a : b; }
inline double square(double a) { return a * a; }

Var abs(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var tanh(const Var& a);
Var pow(const Var& a, double p);
Var square(const Var& a);

}  // namespace xvapinn::ad
