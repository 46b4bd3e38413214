// Scalar expressions in x and y with exact first and second derivatives.
#pragma once

#include <memory>
#include <string>

namespace kem {

// value, gradient and Hessian at a point
struct Jet2 {
  double v = 0, x = 0, y = 0, xx = 0, xy = 0, yy = 0;

  static Jet2 constant(double c) { return {c, 0, 0, 0, 0, 0}; }
};

Jet2 operator+(const Jet2& a, const Jet2& b);
Jet2 operator-(const Jet2& a, const Jet2& b);
Jet2 operator-(const Jet2& a);
Jet2 operator*(const Jet2& a, const Jet2& b);
Jet2 operator/(const Jet2& a, const Jet2& b);
Jet2 operator*(double s, const Jet2& a);

// f(u) given f, f', f'' at u.v
Jet2 chain(const Jet2& u, double f, double df, double ddf);
Jet2 exp(const Jet2& u);
Jet2 log(const Jet2& u);
Jet2 sqrt(const Jet2& u);
Jet2 pow(const Jet2& u, double p);
Jet2 sin(const Jet2& u);
Jet2 cos(const Jet2& u);

// Grammar: + - * / ^ (right-assoc), unary minus, parentheses, numbers,
// x, y, pi, and exp log sqrt sin cos tan sinh cosh tanh atan abs.
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text);

  Jet2 eval(double x, double y) const;
  double value(double x, double y) const { return eval(x, y).v; }
  const std::string& source() const { return src_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string src_;
};

}  // namespace kem
