#pragma once

#include <memory>
#include <span>
#include <string>

namespace conflap {

/// Closed-form scalar field over ambient node coordinates.
///
/// Grammar (whitespace ignored):
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | power
///   power  := atom ('^' unary)?
///   atom   := number | 'pi' | 'x1' .. 'x4'
///           | ('sin' | 'cos' | 'exp') '(' expr ')' | '(' expr ')'
///
/// Coordinates are 1-based: x1 is the first ambient coordinate of a node.
class Expression {
 public:
  /// Throws std::invalid_argument with the offending column on parse errors.
  static Expression parse(const std::string& text);
  static Expression constant(double value);

  double operator()(std::span<const double> coords) const;

  /// Highest coordinate index referenced (0 for constants).
  int max_coordinate() const;
  bool is_constant() const { return max_coordinate() == 0; }
  const std::string& text() const { return text_; }

  struct Node;

 private:
  Expression(std::shared_ptr<const Node> root, std::string text)
      : root_(std::move(root)), text_(std::move(text)) {}
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace conflap
