#pragma once

// Small arithmetic expression language for right-hand sides f(x).
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?
//   atom   := number | name | name '(' expr ')' | '(' expr ')'
//
// Names: x1 y1 x2 y2 (x = x1, y = y1), r = |z|, r2 = |z|^2, pi, and any
// caller-supplied constants (e.g. eps). Functions: sin cos tan exp log sqrt abs tanh.

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "cma/error.hpp"
#include "cma/linalg.hpp"

namespace cma {

class Expression {
 public:
  /// Parses `text`; throws ValidationError with the offending position.
  static Expression parse(const std::string& text, const std::map<std::string, double>& constants = {}) {
    Parser p{text, 0, constants};
    Expression e;
    e.text_ = text;
    e.root_ = p.expr();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected trailing input");
    return e;
  }

  double operator()(const RealPoint& x) const { return root_->eval(x); }
  const std::string& text() const { return text_; }

 private:
  struct Node {
    virtual ~Node() = default;
    virtual double eval(const RealPoint& x) const = 0;
  };
  using NodePtr = std::shared_ptr<const Node>;

  struct Constant : Node {
    double v;
    explicit Constant(double c) : v(c) {}
    double eval(const RealPoint&) const override { return v; }
  };
  struct Variable : Node {
    std::function<double(const RealPoint&)> fn;
    explicit Variable(std::function<double(const RealPoint&)> f) : fn(std::move(f)) {}
    double eval(const RealPoint& x) const override { return fn(x); }
  };
  struct Unary : Node {
    double (*fn)(double);
    NodePtr a;
    Unary(double (*f)(double), NodePtr x) : fn(f), a(std::move(x)) {}
    double eval(const RealPoint& x) const override { return fn(a->eval(x)); }
  };
  struct Binary : Node {
    char op;
    NodePtr a, b;
    Binary(char o, NodePtr x, NodePtr y) : op(o), a(std::move(x)), b(std::move(y)) {}
    double eval(const RealPoint& x) const override {
      const double l = a->eval(x), r = b->eval(x);
      switch (op) {
        case '+':
          return l + r;
        case '-':
          return l - r;
        case '*':
          return l * r;
        case '/':
          return l / r;
        default:
          return std::pow(l, r);
      }
    }
  };

  struct Parser {
    const std::string& s;
    std::size_t pos;
    const std::map<std::string, double>& constants;

    [[noreturn]] void fail(const std::string& what) const {
      throw ValidationError("expression \"" + s + "\": " + what + " at position " + std::to_string(pos));
    }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    NodePtr expr() {
      NodePtr l = term();
      for (;;) {
        if (accept('+'))
          l = std::make_shared<Binary>('+', l, term());
        else if (accept('-'))
          l = std::make_shared<Binary>('-', l, term());
        else
          return l;
      }
    }
    NodePtr term() {
      NodePtr l = unary();
      for (;;) {
        if (accept('*'))
          l = std::make_shared<Binary>('*', l, unary());
        else if (accept('/'))
          l = std::make_shared<Binary>('/', l, unary());
        else
          return l;
      }
    }
    NodePtr unary() {
      if (accept('-')) return std::make_shared<Binary>('-', std::make_shared<Constant>(0.0), unary());
      if (accept('+')) return unary();
      return power();
    }
    NodePtr power() {
      NodePtr base = atom();
      if (accept('^')) return std::make_shared<Binary>('^', base, unary());
      return base;
    }
    NodePtr atom() {
      skip();
      if (pos >= s.size()) fail("unexpected end of input");
      if (accept('(')) {
        NodePtr e = expr();
        if (!accept(')')) fail("expected ')'");
        return e;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(s.substr(pos), &used);
        } catch (const std::exception&) {
          fail("malformed number");
        }
        pos += used;
        return std::make_shared<Constant>(v);
      }
      if (!std::isalpha(static_cast<unsigned char>(c))) fail(std::string("unexpected character '") + c + "'");
      const std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
      const std::string name = s.substr(start, pos - start);
      skip();
      if (pos < s.size() && s[pos] == '(') {
        double (*fn)(double) = nullptr;
        static const std::map<std::string, double (*)(double)> fns = {
            {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
            {"tan", [](double v) { return std::tan(v); }},   {"exp", [](double v) { return std::exp(v); }},
            {"log", [](double v) { return std::log(v); }},   {"sqrt", [](double v) { return std::sqrt(v); }},
            {"abs", [](double v) { return std::abs(v); }},   {"tanh", [](double v) { return std::tanh(v); }}};
        const auto it = fns.find(name);
        if (it == fns.end()) fail("unknown function " + name);
        fn = it->second;
        ++pos;
        NodePtr arg = expr();
        if (!accept(')')) fail("expected ')'");
        return std::make_shared<Unary>(fn, arg);
      }
      return variable(name);
    }
    NodePtr variable(const std::string& name) {
      auto axis = [this, &name](int a) -> NodePtr {
        return std::make_shared<Variable>([a, name](const RealPoint& x) {
          if (a >= x.size()) throw PreconditionError("expression: variable " + name + " needs n = 2");
          return x(a);
        });
      };
      if (name == "x1" || name == "x") return axis(0);
      if (name == "y1" || name == "y") return axis(1);
      if (name == "x2") return axis(2);
      if (name == "y2") return axis(3);
      if (name == "r") return std::make_shared<Variable>([](const RealPoint& x) { return x.norm(); });
      if (name == "r2") return std::make_shared<Variable>([](const RealPoint& x) { return x.squaredNorm(); });
      if (name == "pi") return std::make_shared<Constant>(std::numbers::pi);
      const auto it = constants.find(name);
      if (it != constants.end()) return std::make_shared<Constant>(it->second);
      fail("unknown name " + name);
    }
  };

  std::string text_;
  NodePtr root_;
};

}  // namespace cma
