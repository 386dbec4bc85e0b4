#ifndef MCDH_AD_HPP
#define MCDH_AD_HPP

// Minimal tape-based reverse-mode automatic differentiation for scalar
// expression graphs. Used for the small hyperparameter blocks (correlation
// transform, priors, Jacobians); the heavy likelihood path carries
// hand-written adjoints.

#include <cmath>
#include <cstdint>
#include <vector>

namespace mcdh::ad {

class Tape;

/// Scalar recorded on a Tape. A Var with no tape is a constant.
class Var {
public:
  Var() = default;
  Var(double v) : value_(v) {}  // NOLINT: implicit constants are intended

  double value() const noexcept { return value_; }
  std::int32_t index() const noexcept { return index_; }
  Tape* tape() const noexcept { return tape_; }

private:
  friend class Tape;
  Var(Tape* t, std::int32_t i, double v) : tape_(t), index_(i), value_(v) {}

  Tape* tape_ = nullptr;
  std::int32_t index_ = -1;
  double value_ = 0.0;
};

class Tape {
public:
  Var variable(double v) { return push(v, -1, 0.0, -1, 0.0); }

  Var push(double v, std::int32_t a, double da, std::int32_t b, double db) {
    nodes_.push_back(Node{{a, b}, {da, db}});
    adjoints_.push_back(0.0);
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1), v);
  }

  /// Adds `seed` to the adjoint of `v`; constants are ignored.
  void seed(const Var& v, double seed) {
    if (v.tape_ == this && v.index_ >= 0) adjoints_[static_cast<std::size_t>(v.index_)] += seed;
  }

  void backward() {
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      const double a = adjoints_[i];
      if (a == 0.0) continue;
      const Node& n = nodes_[i];
      for (int s = 0; s < 2; ++s)
        if (n.parent[s] >= 0) adjoints_[static_cast<std::size_t>(n.parent[s])] += n.partial[s] * a;
    }
  }

  double adjoint(const Var& v) const {
    return (v.tape_ == this && v.index_ >= 0) ? adjoints_[static_cast<std::size_t>(v.index_)] : 0.0;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    adjoints_.clear();
  }

private:
  struct Node {
    std::int32_t parent[2];
    double partial[2];
  };
  std::vector<Node> nodes_;
  std::vector<double> adjoints_;
};

namespace detail {
inline Tape* tape_of(const Var& a, const Var& b) { return a.tape() ? a.tape() : b.tape(); }

inline Var unary(const Var& a, double value, double da) {
  if (!a.tape()) return Var(value);
  return a.tape()->push(value, a.index(), da, -1, 0.0);
}

inline Var binary(const Var& a, const Var& b, double value, double da, double db) {
  Tape* t = tape_of(a, b);
  if (!t) return Var(value);
  return t->push(value, a.tape() ? a.index() : -1, da, b.tape() ? b.index() : -1, db);
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(a, b, a.value() * b.value(), b.value(), a.value());
}
inline Var operator/(const Var& a, const Var& b) {
  const double v = a.value() / b.value();
  return detail::binary(a, b, v, 1.0 / b.value(), -v / b.value());
}
inline Var operator-(const Var& a) { return detail::unary(a, -a.value(), -1.0); }

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

inline Var exp(const Var& a) {
  const double v = std::exp(a.value());
  return detail::unary(a, v, v);
}
inline Var log(const Var& a) { return detail::unary(a, std::log(a.value()), 1.0 / a.value()); }
inline Var log1p(const Var& a) {
  return detail::unary(a, std::log1p(a.value()), 1.0 / (1.0 + a.value()));
}
inline Var sqrt(const Var& a) {
  const double v = std::sqrt(a.value());
  return detail::unary(a, v, 0.5 / v);
}
inline Var tanh(const Var& a) {
  const double v = std::tanh(a.value());
  return detail::unary(a, v, 1.0 - v * v);
}

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

}  // namespace mcdh::ad

#endif  // MCDH_AD_HPP
