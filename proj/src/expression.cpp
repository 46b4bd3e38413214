#include "kem/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace kem {

Jet2 operator+(const Jet2& a, const Jet2& b) {
  return {a.v + b.v, a.x + b.x, a.y + b.y, a.xx + b.xx, a.xy + b.xy, a.yy + b.yy};
}
Jet2 operator-(const Jet2& a, const Jet2& b) {
  return {a.v - b.v, a.x - b.x, a.y - b.y, a.xx - b.xx, a.xy - b.xy, a.yy - b.yy};
}
Jet2 operator-(const Jet2& a) { return {-a.v, -a.x, -a.y, -a.xx, -a.xy, -a.yy}; }
Jet2 operator*(double s, const Jet2& a) { return {s * a.v, s * a.x, s * a.y, s * a.xx, s * a.xy, s * a.yy}; }

Jet2 operator*(const Jet2& a, const Jet2& b) {
  return {a.v * b.v,
          a.x * b.v + a.v * b.x,
          a.y * b.v + a.v * b.y,
          a.xx * b.v + 2 * a.x * b.x + a.v * b.xx,
          a.xy * b.v + a.x * b.y + a.y * b.x + a.v * b.xy,
          a.yy * b.v + 2 * a.y * b.y + a.v * b.yy};
}

Jet2 chain(const Jet2& u, double f, double df, double ddf) {
  return {f,
          df * u.x,
          df * u.y,
          ddf * u.x * u.x + df * u.xx,
          ddf * u.x * u.y + df * u.xy,
          ddf * u.y * u.y + df * u.yy};
}

Jet2 operator/(const Jet2& a, const Jet2& b) {
  const double iv = 1 / b.v;
  return a * chain(b, iv, -iv * iv, 2 * iv * iv * iv);
}

Jet2 exp(const Jet2& u) {
  const double e = std::exp(u.v);
  return chain(u, e, e, e);
}
Jet2 log(const Jet2& u) { return chain(u, std::log(u.v), 1 / u.v, -1 / (u.v * u.v)); }
Jet2 sqrt(const Jet2& u) {
  const double s = std::sqrt(u.v);
  return chain(u, s, 0.5 / s, -0.25 / (s * u.v));
}
Jet2 pow(const Jet2& u, double p) {
  if (p == 0) return Jet2::constant(1);
  if (p == 1) return u;
  if (p == 2) return u * u;
  return chain(u, std::pow(u.v, p), p * std::pow(u.v, p - 1), p * (p - 1) * std::pow(u.v, p - 2));
}
Jet2 sin(const Jet2& u) { return chain(u, std::sin(u.v), std::cos(u.v), -std::sin(u.v)); }
Jet2 cos(const Jet2& u) { return chain(u, std::cos(u.v), -std::sin(u.v), -std::cos(u.v)); }

struct Expression::Node {
  enum Kind { num, var_x, var_y, neg, add, sub, mul, div, pw, fn } kind = num;
  double value = 0;
  std::string name;
  std::shared_ptr<const Node> l, r;

  bool constant() const {
    if (kind == var_x || kind == var_y) return false;
    return (!l || l->constant()) && (!r || r->constant());
  }

  Jet2 eval(double x, double y) const {
    switch (kind) {
      case num: return Jet2::constant(value);
      case var_x: return {x, 1, 0, 0, 0, 0};
      case var_y: return {y, 0, 1, 0, 0, 0};
      case neg: return -l->eval(x, y);
      case add: return l->eval(x, y) + r->eval(x, y);
      case sub: return l->eval(x, y) - r->eval(x, y);
      case mul: return l->eval(x, y) * r->eval(x, y);
      case div: return l->eval(x, y) / r->eval(x, y);
      case pw: {
        const Jet2 base = l->eval(x, y);
        if (r->constant()) return pow(base, r->eval(0, 0).v);
        return exp(r->eval(x, y) * log(base));
      }
      case fn: return apply(l->eval(x, y));
    }
    return {};
  }

  Jet2 apply(const Jet2& u) const {
    const double v = u.v;
    if (name == "exp") return exp(u);
    if (name == "log") return log(u);
    if (name == "sqrt") return sqrt(u);
    if (name == "sin") return sin(u);
    if (name == "cos") return cos(u);
    if (name == "tan") {
      const double t = std::tan(v);
      return chain(u, t, 1 + t * t, 2 * t * (1 + t * t));
    }
    if (name == "sinh") return chain(u, std::sinh(v), std::cosh(v), std::sinh(v));
    if (name == "cosh") return chain(u, std::cosh(v), std::sinh(v), std::cosh(v));
    if (name == "tanh") {
      const double t = std::tanh(v);
      return chain(u, t, 1 - t * t, -2 * t * (1 - t * t));
    }
    if (name == "atan") return chain(u, std::atan(v), 1 / (1 + v * v), -2 * v / ((1 + v * v) * (1 + v * v)));
    if (name == "abs") {
      const double s = v < 0 ? -1.0 : 1.0;
      return chain(u, std::abs(v), s, 0);
    }
    throw std::logic_error("unknown function " + name);
  }
};

namespace {

using NodeP = std::shared_ptr<const Expression::Node>;

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodeP parse() {
    NodeP n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("expression error at position " + std::to_string(pos_) + ": " + what);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  static NodeP make(Expression::Node::Kind k, NodeP l = nullptr, NodeP r = nullptr) {
    auto n = std::make_shared<Expression::Node>();
    n->kind = k;
    n->l = std::move(l);
    n->r = std::move(r);
    return n;
  }

  NodeP expr() {
    NodeP n = term();
    while (true) {
      if (eat('+'))
        n = make(Expression::Node::add, n, term());
      else if (eat('-'))
        n = make(Expression::Node::sub, n, term());
      else
        return n;
    }
  }
  NodeP term() {
    NodeP n = unary();
    while (true) {
      if (eat('*'))
        n = make(Expression::Node::mul, n, unary());
      else if (eat('/'))
        n = make(Expression::Node::div, n, unary());
      else
        return n;
    }
  }
  NodeP unary() {
    if (eat('-')) return make(Expression::Node::neg, unary());
    if (eat('+')) return unary();
    return power();
  }
  NodeP power() {
    NodeP base = primary();
    if (eat('^')) return make(Expression::Node::pw, base, unary());
    return base;
  }
  NodeP primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (eat('(')) {
      NodeP n = expr();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Expression::Node>();
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (id == "x") return make(Expression::Node::var_x);
      if (id == "y") return make(Expression::Node::var_y);
      if (id == "pi") {
        auto n = std::make_shared<Expression::Node>();
        n->value = std::numbers::pi;
        return n;
      }
      static const std::vector<std::string> fns{"exp", "log", "sqrt", "sin", "cos", "tan",
                                                "sinh", "cosh", "tanh", "atan", "abs"};
      bool known = false;
      for (const auto& f : fns) known = known || f == id;
      if (!known) {
        pos_ = start;
        fail("unknown identifier '" + id + "'");
      }
      if (!eat('(')) fail("expected '(' after " + id);
      NodeP arg = expr();
      if (!eat(')')) fail("expected ')'");
      auto n = std::make_shared<Expression::Node>();
      n->kind = Expression::Node::fn;
      n->name = id;
      n->l = arg;
      return n;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }
};

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  Parser p(text);
  e.root_ = p.parse();
  e.src_ = text;
  return e;
}

Jet2 Expression::eval(double x, double y) const {
  if (!root_) throw std::logic_error("empty expression");
  return root_->eval(x, y);
}

}  // namespace kem
