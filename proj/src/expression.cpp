#include "conflap/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace conflap {

struct Expression::Node {
  enum class Kind { number, coord, neg, add, sub, mul, div, pow, sin, cos, exp };
  Kind kind = Kind::number;
  double value = 0.0;
  int coord = 0;
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_leaf(double v) {
  auto n = std::make_shared<Node>();
  n->value = v;
  return n;
}

NodePtr make_op(Node::Kind k, NodePtr a, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    auto e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << "expression parse error at column " << pos_ + 1 << ": " << msg << " in '" << s_ << "'";
    throw std::invalid_argument(os.str());
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make_op(Node::Kind::add, lhs, term());
      else if (accept('-'))
        lhs = make_op(Node::Kind::sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make_op(Node::Kind::mul, lhs, unary());
      else if (accept('/'))
        lhs = make_op(Node::Kind::div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_op(Node::Kind::neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = atom();
    if (accept('^')) return make_op(Node::Kind::pow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("malformed number");
      }
      pos_ += used;
      return make_leaf(v);
    }
    if (accept('(')) {
      auto e = expr();
      expect(')');
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (id == "pi") return make_leaf(std::numbers::pi);
      if (id.size() == 2 && id[0] == 'x' && id[1] >= '1' && id[1] <= '4') {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::coord;
        n->coord = id[1] - '0';
        return n;
      }
      Node::Kind k;
      if (id == "sin")
        k = Node::Kind::sin;
      else if (id == "cos")
        k = Node::Kind::cos;
      else if (id == "exp")
        k = Node::Kind::exp;
      else {
        pos_ = start;
        fail("unknown identifier '" + id + "'");
      }
      expect('(');
      auto arg = expr();
      expect(')');
      return make_op(k, arg);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

double eval(const Node& n, std::span<const double> x) {
  switch (n.kind) {
    case Node::Kind::number: return n.value;
    case Node::Kind::coord:
      if (static_cast<std::size_t>(n.coord) > x.size())
        throw std::invalid_argument("expression references x" + std::to_string(n.coord) +
                                    " but nodes have " + std::to_string(x.size()) + " coordinates");
      return x[n.coord - 1];
    case Node::Kind::neg: return -eval(*n.lhs, x);
    case Node::Kind::add: return eval(*n.lhs, x) + eval(*n.rhs, x);
    case Node::Kind::sub: return eval(*n.lhs, x) - eval(*n.rhs, x);
    case Node::Kind::mul: return eval(*n.lhs, x) * eval(*n.rhs, x);
    case Node::Kind::div: return eval(*n.lhs, x) / eval(*n.rhs, x);
    case Node::Kind::pow: return std::pow(eval(*n.lhs, x), eval(*n.rhs, x));
    case Node::Kind::sin: return std::sin(eval(*n.lhs, x));
    case Node::Kind::cos: return std::cos(eval(*n.lhs, x));
    case Node::Kind::exp: return std::exp(eval(*n.lhs, x));
  }
  return 0.0;
}

int max_coord(const Node& n) {
  int m = n.kind == Node::Kind::coord ? n.coord : 0;
  if (n.lhs) m = std::max(m, max_coord(*n.lhs));
  if (n.rhs) m = std::max(m, max_coord(*n.rhs));
  return m;
}

}  // namespace

Expression Expression::parse(const std::string& text) {
  Parser p(text);
  return Expression(p.parse(), text);
}

Expression Expression::constant(double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  return Expression(make_leaf(value), os.str());
}

double Expression::operator()(std::span<const double> coords) const { return eval(*root_, coords); }

int Expression::max_coordinate() const { return max_coord(*root_); }

}  // namespace conflap
