#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "adaptron/value.hpp"

namespace adaptron {

/// Error raised while turning text into a rule set or an expression.
/// Lines and columns are 1-based and refer to the original source text.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, int line, int column)
      : std::runtime_error(std::move(message)), line(line), column(column) {}
  int line;
  int column;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class UnaryOp { Not, Negate };
enum class BinaryOp { Mul, Div, Mod, Add, Sub, Lt, Le, Gt, Ge, Eq, Ne, And, Or };

const char* to_token(UnaryOp op);
const char* to_token(BinaryOp op);

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

/// One node of an evaluable expression tree. Trees are immutable and shared
/// freely between copies of a rule set.
struct ExprNode {
  struct Literal {
    Value value;
  };
  struct VariableRef {
    std::string key;  // state-store key
  };
  struct Unary {
    UnaryOp op;
    ExprPtr child;
  };
  struct Binary {
    BinaryOp op;
    ExprPtr left;
    ExprPtr right;
  };
  std::variant<Literal, VariableRef, Unary, Binary> data;
};

class Expression {
 public:
  Expression() = default;
  explicit Expression(ExprPtr root) : root_(std::move(root)) {}

  const ExprPtr& root() const { return root_; }
  bool empty() const { return root_ == nullptr; }

  /// Infix text that parses back to a structurally equal tree.
  std::string to_string() const;

  friend bool operator==(const Expression& a, const Expression& b);
  friend bool operator!=(const Expression& a, const Expression& b) { return !(a == b); }

 private:
  ExprPtr root_;
};

/// Resolves a state-store key; absent keys are evaluation errors.
using VariableLookup = std::function<std::optional<Value>(const std::string&)>;

/// Infix parser with C precedence/associativity, implemented by converting to
/// Reverse Polish order with a shunting-yard pass. `line`/`column` shift the
/// positions reported in errors when the text is embedded in a larger file.
Expression parse_expression(std::string_view text, int line = 1, int column = 1);

Value eval_expression(const Expression& expr, const VariableLookup& lookup);

}  // namespace adaptron
