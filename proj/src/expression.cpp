#include "adaptron/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace adaptron {
namespace {

struct OpInfo {
  int precedence;  // higher binds tighter
  bool right_assoc;
};

OpInfo info(BinaryOp op) {
  switch (op) {
    case BinaryOp::Or: return {1, false};
    case BinaryOp::And: return {2, false};
    case BinaryOp::Eq:
    case BinaryOp::Ne: return {3, false};
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: return {4, false};
    case BinaryOp::Add:
    case BinaryOp::Sub: return {5, false};
    case BinaryOp::Mul:
    case BinaryOp::Div:
    case BinaryOp::Mod: return {6, false};
  }
  return {0, false};
}

constexpr int kUnaryPrecedence = 7;

struct Token {
  enum class Kind { Number, Bool, String, Ident, BinOp, UnOp, LParen, RParen, End };
  Kind kind = Kind::End;
  Value value;       // Number/Bool/String
  std::string text;  // Ident
  BinaryOp bin_op = BinaryOp::Add;
  UnaryOp un_op = UnaryOp::Not;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  Lexer(std::string_view text, int line, int column)
      : text_(text), line_(line), column_(column) {}

  // `after_operand` disambiguates unary from binary minus.
  Token next(bool after_operand) {
    skip_ws();
    Token t;
    t.line = line_;
    t.column = column_;
    if (pos_ >= text_.size()) {
      t.kind = Token::Kind::End;
      return t;
    }
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) return lex_number(t);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_ident(t);
    if (c == '"') return lex_string(t);
    if (c == '(') { advance(); t.kind = Token::Kind::LParen; return t; }
    if (c == ')') { advance(); t.kind = Token::Kind::RParen; return t; }
    return lex_operator(t, after_operand);
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') { ++line_; column_ = 1; } else { ++column_; }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) advance();
  }

  Token lex_number(Token& t) {
    size_t start = pos_;
    bool real = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) { advance(); continue; }
      if (c == '.' && pos_ + 1 < text_.size() &&
          std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
        real = true;
        advance();
        continue;
      }
      if ((c == 'e' || c == 'E') && pos_ + 1 < text_.size() &&
          (std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) || text_[pos_ + 1] == '-' ||
           text_[pos_ + 1] == '+')) {
        real = true;
        advance();
        if (text_[pos_] == '-' || text_[pos_] == '+') advance();
        continue;
      }
      break;
    }
    std::string lexeme(text_.substr(start, pos_ - start));
    t.kind = Token::Kind::Number;
    if (real) {
      t.value = std::strtod(lexeme.c_str(), nullptr);
    } else {
      errno = 0;
      char* end = nullptr;
      long long v = std::strtoll(lexeme.c_str(), &end, 10);
      if (errno == ERANGE || end != lexeme.c_str() + lexeme.size())
        throw ParseError("malformed number '" + lexeme + "'", t.line, t.column);
      t.value = static_cast<std::int64_t>(v);
    }
    return t;
  }

  Token lex_ident(Token& t) {
    size_t start = pos_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') { advance(); continue; }
      break;
    }
    std::string name(text_.substr(start, pos_ - start));
    if (name == "true" || name == "false") {
      t.kind = Token::Kind::Bool;
      t.value = (name == "true");
    } else {
      t.kind = Token::Kind::Ident;
      t.text = std::move(name);
    }
    return t;
  }

  Token lex_string(Token& t) {
    advance();  // opening quote
    size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '"') advance();
    if (pos_ >= text_.size()) throw ParseError("unterminated string literal", t.line, t.column);
    t.kind = Token::Kind::String;
    t.value = std::string(text_.substr(start, pos_ - start));
    advance();  // closing quote
    return t;
  }

  Token lex_operator(Token& t, bool after_operand) {
    auto two = [&](char a, char b) {
      return text_[pos_] == a && pos_ + 1 < text_.size() && text_[pos_ + 1] == b;
    };
    auto emit = [&](BinaryOp op, int len) {
      t.kind = Token::Kind::BinOp;
      t.bin_op = op;
      for (int i = 0; i < len; ++i) advance();
      return t;
    };
    if (two('<', '=')) return emit(BinaryOp::Le, 2);
    if (two('>', '=')) return emit(BinaryOp::Ge, 2);
    if (two('=', '=')) return emit(BinaryOp::Eq, 2);
    if (two('!', '=')) return emit(BinaryOp::Ne, 2);
    if (two('&', '&')) return emit(BinaryOp::And, 2);
    if (two('|', '|')) return emit(BinaryOp::Or, 2);
    switch (text_[pos_]) {
      case '<': return emit(BinaryOp::Lt, 1);
      case '>': return emit(BinaryOp::Gt, 1);
      case '+': return emit(BinaryOp::Add, 1);
      case '*': return emit(BinaryOp::Mul, 1);
      case '/': return emit(BinaryOp::Div, 1);
      case '%': return emit(BinaryOp::Mod, 1);
      case '-':
        if (after_operand) return emit(BinaryOp::Sub, 1);
        t.kind = Token::Kind::UnOp;
        t.un_op = UnaryOp::Negate;
        advance();
        return t;
      case '!':
        t.kind = Token::Kind::UnOp;
        t.un_op = UnaryOp::Not;
        advance();
        return t;
      default:
        throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", t.line,
                         t.column);
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_;
  int column_;
};

ExprPtr make_literal(Value v) {
  return std::make_shared<ExprNode>(ExprNode{ExprNode::Literal{std::move(v)}});
}

// Pending operator on the shunting-yard stack.
struct PendingOp {
  bool unary = false;
  UnaryOp un{};
  BinaryOp bin{};
  int precedence = 0;
  bool right_assoc = false;
  bool paren = false;  // sentinel for '('
  int line = 1;
  int column = 1;
};

}  // namespace

const char* to_token(UnaryOp op) { return op == UnaryOp::Not ? "!" : "-"; }

const char* to_token(BinaryOp op) {
  switch (op) {
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::And: return "&&";
    case BinaryOp::Or: return "||";
  }
  return "?";
}

Expression parse_expression(std::string_view text, int line, int column) {
  Lexer lexer(text, line, column);
  std::vector<ExprPtr> operands;
  std::vector<PendingOp> ops;

  auto reduce = [&](const PendingOp& op) {
    if (op.unary) {
      if (operands.empty())
        throw ParseError("dangling operator", op.line, op.column);
      ExprPtr child = std::move(operands.back());
      operands.pop_back();
      operands.push_back(
          std::make_shared<ExprNode>(ExprNode{ExprNode::Unary{op.un, std::move(child)}}));
    } else {
      if (operands.size() < 2)
        throw ParseError("dangling operator", op.line, op.column);
      ExprPtr right = std::move(operands.back());
      operands.pop_back();
      ExprPtr left = std::move(operands.back());
      operands.pop_back();
      operands.push_back(std::make_shared<ExprNode>(
          ExprNode{ExprNode::Binary{op.bin, std::move(left), std::move(right)}}));
    }
  };

  bool after_operand = false;
  for (;;) {
    Token t = lexer.next(after_operand);
    if (t.kind == Token::Kind::End) break;
    switch (t.kind) {
      case Token::Kind::Number:
      case Token::Kind::Bool:
      case Token::Kind::String:
        if (after_operand)
          throw ParseError("expected operator before operand", t.line, t.column);
        operands.push_back(make_literal(std::move(t.value)));
        after_operand = true;
        break;
      case Token::Kind::Ident:
        if (after_operand)
          throw ParseError("expected operator before '" + t.text + "'", t.line, t.column);
        operands.push_back(
            std::make_shared<ExprNode>(ExprNode{ExprNode::VariableRef{std::move(t.text)}}));
        after_operand = true;
        break;
      case Token::Kind::UnOp: {
        PendingOp p;
        p.unary = true;
        p.un = t.un_op;
        p.precedence = kUnaryPrecedence;
        p.right_assoc = true;
        p.line = t.line;
        p.column = t.column;
        ops.push_back(p);
        break;
      }
      case Token::Kind::BinOp: {
        if (!after_operand)
          throw ParseError(std::string("operator '") + to_token(t.bin_op) +
                               "' without left operand",
                           t.line, t.column);
        OpInfo oi = info(t.bin_op);
        while (!ops.empty() && !ops.back().paren &&
               (ops.back().precedence > oi.precedence ||
                (ops.back().precedence == oi.precedence && !oi.right_assoc))) {
          reduce(ops.back());
          ops.pop_back();
        }
        PendingOp p;
        p.bin = t.bin_op;
        p.precedence = oi.precedence;
        p.right_assoc = oi.right_assoc;
        p.line = t.line;
        p.column = t.column;
        ops.push_back(p);
        after_operand = false;
        break;
      }
      case Token::Kind::LParen: {
        if (after_operand)
          throw ParseError("expected operator before '('", t.line, t.column);
        PendingOp p;
        p.paren = true;
        p.line = t.line;
        p.column = t.column;
        ops.push_back(p);
        break;
      }
      case Token::Kind::RParen: {
        bool matched = false;
        while (!ops.empty()) {
          if (ops.back().paren) {
            ops.pop_back();
            matched = true;
            break;
          }
          reduce(ops.back());
          ops.pop_back();
        }
        if (!matched) throw ParseError("unbalanced ')'", t.line, t.column);
        after_operand = true;
        break;
      }
      case Token::Kind::End:
        break;
    }
  }

  while (!ops.empty()) {
    if (ops.back().paren) throw ParseError("unbalanced '('", ops.back().line, ops.back().column);
    reduce(ops.back());
    ops.pop_back();
  }
  if (operands.empty()) throw ParseError("empty expression", line, column);
  if (operands.size() != 1)
    throw ParseError("expected operator between operands", line, column);
  return Expression(std::move(operands.front()));
}

namespace {

bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->data.index() != b->data.index()) return false;
  if (const auto* la = std::get_if<ExprNode::Literal>(&a->data))
    return la->value == std::get<ExprNode::Literal>(b->data).value;
  if (const auto* va = std::get_if<ExprNode::VariableRef>(&a->data))
    return va->key == std::get<ExprNode::VariableRef>(b->data).key;
  if (const auto* ua = std::get_if<ExprNode::Unary>(&a->data)) {
    const auto& ub = std::get<ExprNode::Unary>(b->data);
    return ua->op == ub.op && equal(ua->child, ub.child);
  }
  const auto& ba = std::get<ExprNode::Binary>(a->data);
  const auto& bb = std::get<ExprNode::Binary>(b->data);
  return ba.op == bb.op && equal(ba.left, bb.left) && equal(ba.right, bb.right);
}

int node_precedence(const ExprPtr& n) {
  if (std::holds_alternative<ExprNode::Binary>(n->data))
    return info(std::get<ExprNode::Binary>(n->data).op).precedence;
  if (std::holds_alternative<ExprNode::Unary>(n->data)) return kUnaryPrecedence;
  return 100;  // atoms never need parentheses
}

void print(const ExprPtr& n, std::string& out) {
  if (const auto* lit = std::get_if<ExprNode::Literal>(&n->data)) {
    out += value_to_string(lit->value);
    return;
  }
  if (const auto* var = std::get_if<ExprNode::VariableRef>(&n->data)) {
    out += var->key;
    return;
  }
  if (const auto* un = std::get_if<ExprNode::Unary>(&n->data)) {
    out += to_token(un->op);
    bool parens = node_precedence(un->child) < kUnaryPrecedence;
    // avoid "--x" reading as a decrement-lookalike
    if (!parens && un->op == UnaryOp::Negate) {
      if (const auto* cu = std::get_if<ExprNode::Unary>(&un->child->data))
        parens = cu->op == UnaryOp::Negate;
    }
    if (parens) out += '(';
    print(un->child, out);
    if (parens) out += ')';
    return;
  }
  const auto& bin = std::get<ExprNode::Binary>(n->data);
  int prec = info(bin.op).precedence;
  bool lp = node_precedence(bin.left) < prec;
  bool rp = node_precedence(bin.right) <= prec;  // all binary ops are left-assoc
  if (lp) out += '(';
  print(bin.left, out);
  if (lp) out += ')';
  out += ' ';
  out += to_token(bin.op);
  out += ' ';
  if (rp) out += '(';
  print(bin.right, out);
  if (rp) out += ')';
}

Value eval(const ExprPtr& n, const VariableLookup& lookup) {
  if (const auto* lit = std::get_if<ExprNode::Literal>(&n->data)) return lit->value;
  if (const auto* var = std::get_if<ExprNode::VariableRef>(&n->data)) {
    auto v = lookup(var->key);
    if (!v) throw EvalError("unknown variable " + var->key);
    return *v;
  }
  if (const auto* un = std::get_if<ExprNode::Unary>(&n->data)) {
    Value child = eval(un->child, lookup);
    if (un->op == UnaryOp::Not) {
      if (const auto* b = std::get_if<bool>(&child)) return !*b;
      throw EvalError(std::string("operator ! applied to ") + type_name(child));
    }
    if (const auto* i = std::get_if<std::int64_t>(&child)) return -*i;
    if (const auto* d = std::get_if<double>(&child)) return -*d;
    throw EvalError(std::string("unary - applied to ") + type_name(child));
  }

  const auto& bin = std::get<ExprNode::Binary>(n->data);
  if (bin.op == BinaryOp::And || bin.op == BinaryOp::Or) {
    Value left = eval(bin.left, lookup);
    const auto* lb = std::get_if<bool>(&left);
    if (!lb)
      throw EvalError(std::string(to_token(bin.op)) + " applied to " + type_name(left));
    if (bin.op == BinaryOp::And && !*lb) return false;  // short-circuit
    if (bin.op == BinaryOp::Or && *lb) return true;
    Value right = eval(bin.right, lookup);
    const auto* rb = std::get_if<bool>(&right);
    if (!rb)
      throw EvalError(std::string(to_token(bin.op)) + " applied to " + type_name(right));
    return *rb;
  }

  Value left = eval(bin.left, lookup);
  Value right = eval(bin.right, lookup);

  auto numeric_pair = [&]() {
    if (!is_numeric(left) || !is_numeric(right))
      throw EvalError(std::string("operator ") + to_token(bin.op) + " applied to " +
                      type_name(left) + " and " + type_name(right));
  };
  auto both_int = [&]() {
    return std::holds_alternative<std::int64_t>(left) &&
           std::holds_alternative<std::int64_t>(right);
  };

  switch (bin.op) {
    case BinaryOp::Add:
      numeric_pair();
      if (both_int()) return std::get<std::int64_t>(left) + std::get<std::int64_t>(right);
      return as_real(left) + as_real(right);
    case BinaryOp::Sub:
      numeric_pair();
      if (both_int()) return std::get<std::int64_t>(left) - std::get<std::int64_t>(right);
      return as_real(left) - as_real(right);
    case BinaryOp::Mul:
      numeric_pair();
      if (both_int()) return std::get<std::int64_t>(left) * std::get<std::int64_t>(right);
      return as_real(left) * as_real(right);
    case BinaryOp::Div:
      numeric_pair();
      if (both_int()) {
        auto d = std::get<std::int64_t>(right);
        if (d == 0) throw EvalError("division by zero");
        return std::get<std::int64_t>(left) / d;
      }
      if (as_real(right) == 0.0) throw EvalError("division by zero");
      return as_real(left) / as_real(right);
    case BinaryOp::Mod: {
      if (!both_int())
        throw EvalError(std::string("operator % requires integers, got ") + type_name(left) +
                        " and " + type_name(right));
      auto d = std::get<std::int64_t>(right);
      if (d == 0) throw EvalError("division by zero");
      return std::get<std::int64_t>(left) % d;
    }
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: {
      numeric_pair();
      double a = as_real(left), b = as_real(right);
      switch (bin.op) {
        case BinaryOp::Lt: return a < b;
        case BinaryOp::Le: return a <= b;
        case BinaryOp::Gt: return a > b;
        default: return a >= b;
      }
    }
    case BinaryOp::Eq:
    case BinaryOp::Ne: {
      bool eq;
      if (is_numeric(left) && is_numeric(right)) {
        eq = as_real(left) == as_real(right);
      } else if (left.index() == right.index()) {
        eq = left == right;
      } else {
        throw EvalError(std::string("cannot compare ") + type_name(left) + " with " +
                        type_name(right));
      }
      return bin.op == BinaryOp::Eq ? eq : !eq;
    }
    default:
      throw EvalError("unreachable operator");
  }
}

}  // namespace

bool operator==(const Expression& a, const Expression& b) { return equal(a.root_, b.root_); }

std::string Expression::to_string() const {
  if (!root_) return {};
  std::string out;
  print(root_, out);
  return out;
}

Value eval_expression(const Expression& expr, const VariableLookup& lookup) {
  if (expr.empty()) throw EvalError("empty expression");
  return eval(expr.root(), lookup);
}

}  // namespace adaptron
