#pragma once

// Density expressions: numbers, + - * /, unary minus, parentheses, exp, log,
// cos, sin, ambient coordinates x1..xN and the chart angles theta (axis 0)
// and phi (axis 1). Anything else is a parse error.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "abplab/error.hpp"

namespace abplab {

class Expression {
 public:
  struct Node {
    enum class Op { Number, Coord, Angle, Neg, Add, Sub, Mul, Div, Exp, Log, Cos, Sin } op;
    double value = 0.0;
    int index = 0;
    std::unique_ptr<Node> a, b;
  };

  Expression() = default;
  static Expression parse(const std::string& text) {
    Parser p{text, 0};
    Expression e;
    e.text_ = text;
    e.root_ = p.sum();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
    e.scan(*e.root_);
    return e;
  }

  /// Largest coordinate index used (x3 -> 3), 0 if none.
  int max_coordinate() const { return max_coord_; }
  bool uses_angles() const { return uses_angles_; }
  const std::string& text() const { return text_; }

  double eval(const double* x, int ambient, const double* angles = nullptr, int angle_count = 0) const {
    return eval(*root_, x, ambient, angles, angle_count);
  }

 private:
  struct Parser {
    const std::string& s;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw Error(ErrorKind::Parse, "density '" + s + "' at column " + std::to_string(pos + 1) + ": " + what);
    }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    static std::unique_ptr<Node> make(Node::Op op, std::unique_ptr<Node> a = {}, std::unique_ptr<Node> b = {}) {
      auto n = std::make_unique<Node>();
      n->op = op;
      n->a = std::move(a);
      n->b = std::move(b);
      return n;
    }
    std::unique_ptr<Node> sum() {
      auto lhs = product();
      while (true) {
        if (eat('+')) lhs = make(Node::Op::Add, std::move(lhs), product());
        else if (eat('-')) lhs = make(Node::Op::Sub, std::move(lhs), product());
        else return lhs;
      }
    }
    std::unique_ptr<Node> product() {
      auto lhs = unary();
      while (true) {
        if (eat('*')) lhs = make(Node::Op::Mul, std::move(lhs), unary());
        else if (eat('/')) lhs = make(Node::Op::Div, std::move(lhs), unary());
        else return lhs;
      }
    }
    std::unique_ptr<Node> unary() {
      if (eat('-')) return make(Node::Op::Neg, unary());
      if (eat('+')) return unary();
      return primary();
    }
    std::unique_ptr<Node> primary() {
      skip();
      if (pos >= s.size()) fail("unexpected end");
      if (eat('(')) {
        auto e = sum();
        if (!eat(')')) fail("expected ')'");
        return e;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(s.substr(pos), &used);
        } catch (const std::exception&) {
          fail("bad number");
        }
        pos += used;
        auto n = make(Node::Op::Number);
        n->value = v;
        return n;
      }
      if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");
      const std::size_t start = pos;
      while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
      const std::string word = s.substr(start, pos - start);
      if (word == "theta" || word == "phi") {
        auto n = make(Node::Op::Angle);
        n->index = word == "theta" ? 0 : 1;
        return n;
      }
      if (word.size() > 1 && word[0] == 'x' &&
          word.find_first_not_of("0123456789", 1) == std::string::npos && word[1] != '0') {
        auto n = make(Node::Op::Coord);
        n->index = std::stoi(word.substr(1));
        return n;
      }
      Node::Op op;
      if (word == "exp") op = Node::Op::Exp;
      else if (word == "log") op = Node::Op::Log;
      else if (word == "cos") op = Node::Op::Cos;
      else if (word == "sin") op = Node::Op::Sin;
      else {
        pos = start;
        fail("unknown identifier '" + word + "'");
      }
      if (!eat('(')) fail("expected '(' after " + word);
      auto arg = sum();
      if (!eat(')')) fail("expected ')'");
      return make(op, std::move(arg));
    }
  };

  void scan(const Node& n) {
    if (n.op == Node::Op::Coord) max_coord_ = std::max(max_coord_, n.index);
    if (n.op == Node::Op::Angle) uses_angles_ = true;
    if (n.a) scan(*n.a);
    if (n.b) scan(*n.b);
  }

  double eval(const Node& n, const double* x, int ambient, const double* angles, int angle_count) const {
    auto sub = [&](const std::unique_ptr<Node>& c) { return eval(*c, x, ambient, angles, angle_count); };
    switch (n.op) {
      case Node::Op::Number: return n.value;
      case Node::Op::Coord:
        if (n.index > ambient) {
          throw Error(ErrorKind::Parse, "x" + std::to_string(n.index) + " exceeds ambient dimension " + std::to_string(ambient));
        }
        return x[n.index - 1];
      case Node::Op::Angle:
        if (n.index >= angle_count) {
          throw Error(ErrorKind::Parse, std::string(n.index ? "phi" : "theta") + " needs a chart with that axis");
        }
        return angles[n.index];
      case Node::Op::Neg: return -sub(n.a);
      case Node::Op::Add: return sub(n.a) + sub(n.b);
      case Node::Op::Sub: return sub(n.a) - sub(n.b);
      case Node::Op::Mul: return sub(n.a) * sub(n.b);
      case Node::Op::Div: return sub(n.a) / sub(n.b);
      case Node::Op::Exp: return std::exp(sub(n.a));
      case Node::Op::Log: return std::log(sub(n.a));
      case Node::Op::Cos: return std::cos(sub(n.a));
      case Node::Op::Sin: return std::sin(sub(n.a));
    }
    return 0.0;
  }

  std::string text_;
  std::shared_ptr<Node> root_;
  int max_coord_ = 0;
  bool uses_angles_ = false;
};

}  // namespace abplab
