#pragma once

#include <cctype>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "vnc/dual.hpp"
#include "vnc/errors.hpp"
#include "vnc/linalg.hpp"

namespace vnc {

enum class SymbolKind { Coordinate, Velocity, Parameter };

/// Declared names an expression may reference. Coordinates are user-named;
/// velocities are positional (`v1..vn`, index matching the coordinate order);
/// parameters are named constants bound at system construction.
class SymbolTable {
 public:
  SymbolTable() = default;
  SymbolTable(std::vector<std::string> coordinates,
              std::vector<std::string> parameters = {})
      : coordinates_(std::move(coordinates)), parameters_(std::move(parameters)) {
    velocities_.reserve(coordinates_.size());
    for (std::size_t i = 0; i < coordinates_.size(); ++i) {
      velocities_.push_back("v" + std::to_string(i + 1));
    }
    validate_unique();
  }

  int dim() const { return static_cast<int>(coordinates_.size()); }
  int parameter_count() const { return static_cast<int>(parameters_.size()); }
  const std::vector<std::string>& coordinates() const { return coordinates_; }
  const std::vector<std::string>& velocities() const { return velocities_; }
  const std::vector<std::string>& parameters() const { return parameters_; }

  std::optional<std::pair<SymbolKind, int>> lookup(std::string_view name) const {
    for (std::size_t i = 0; i < coordinates_.size(); ++i)
      if (coordinates_[i] == name) return {{SymbolKind::Coordinate, int(i)}};
    for (std::size_t i = 0; i < velocities_.size(); ++i)
      if (velocities_[i] == name) return {{SymbolKind::Velocity, int(i)}};
    for (std::size_t i = 0; i < parameters_.size(); ++i)
      if (parameters_[i] == name) return {{SymbolKind::Parameter, int(i)}};
    return std::nullopt;
  }

 private:
  void validate_unique() const {
    auto clash = [this](const std::string& n, std::size_t upto_coord,
                        std::size_t upto_param) {
      for (std::size_t i = 0; i < upto_coord; ++i)
        if (coordinates_[i] == n) return true;
      for (const auto& v : velocities_)
        if (v == n) return true;
      for (std::size_t i = 0; i < upto_param; ++i)
        if (parameters_[i] == n) return true;
      return false;
    };
    for (std::size_t i = 0; i < coordinates_.size(); ++i)
      if (clash(coordinates_[i], i, 0))
        throw InvalidSystem("duplicate or reserved symbol name: " + coordinates_[i]);
    for (std::size_t i = 0; i < parameters_.size(); ++i)
      if (clash(parameters_[i], coordinates_.size(), i))
        throw InvalidSystem("duplicate or reserved symbol name: " + parameters_[i]);
  }

  std::vector<std::string> coordinates_;
  std::vector<std::string> velocities_;
  std::vector<std::string> parameters_;
};

enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class UnaryFn { Neg, Sin, Cos, Tan, Exp, Log, Sqrt, Abs };

namespace detail {

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct Literal {
  double value;
};
struct Symbol {
  SymbolKind kind;
  int index;
  std::string name;
};
struct Unary {
  UnaryFn fn;
  NodePtr arg;
};
struct Binary {
  BinaryOp op;
  NodePtr lhs;
  NodePtr rhs;
};

struct ExprNode {
  std::variant<Literal, Symbol, Unary, Binary> v;
};

inline NodePtr make_node(std::variant<Literal, Symbol, Unary, Binary> v) {
  return std::make_shared<const ExprNode>(ExprNode{std::move(v)});
}

template <class S>
struct EvalEnv {
  const VecX<S>* q;
  const VecX<S>* v;       // may be null when velocities are out of scope
  const double* params;   // flat array, may be null when none declared
  int n_params;
};

template <class S>
S check_finite(S x, const char* what) {
  if (!is_finite(x)) throw DomainError(std::string("non-finite result in ") + what);
  return x;
}

template <class S>
S eval_node(const ExprNode& node, const EvalEnv<S>& env);

template <class S>
S apply_unary(UnaryFn fn, S x) {
  using std::abs;
  using std::cos;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sqrt;
  using std::tan;
  switch (fn) {
    case UnaryFn::Neg:
      return -x;
    case UnaryFn::Sin:
      return check_finite(sin(x), "sin");
    case UnaryFn::Cos:
      return check_finite(cos(x), "cos");
    case UnaryFn::Tan:
      return check_finite(tan(x), "tan");
    case UnaryFn::Exp:
      return check_finite(exp(x), "exp");
    case UnaryFn::Log:
      if (value_of(x) <= 0.0) throw DomainError("log of nonpositive value");
      return check_finite(log(x), "log");
    case UnaryFn::Sqrt:
      if (value_of(x) < 0.0) throw DomainError("sqrt of negative value");
      return check_finite(sqrt(x), "sqrt");
    case UnaryFn::Abs:
      return abs(x);
  }
  throw DomainError("unknown function");
}

template <class S>
S apply_binary(BinaryOp op, S a, S b) {
  using std::pow;
  switch (op) {
    case BinaryOp::Add:
      return a + b;
    case BinaryOp::Sub:
      return a - b;
    case BinaryOp::Mul:
      return a * b;
    case BinaryOp::Div:
      if (value_of(b) == 0.0) throw DomainError("division by zero");
      return check_finite(a / b, "division");
    case BinaryOp::Pow:
      return check_finite(pow(a, b), "pow");
  }
  throw DomainError("unknown operator");
}

template <class S>
S eval_node(const ExprNode& node, const EvalEnv<S>& env) {
  if (const auto* lit = std::get_if<Literal>(&node.v)) {
    return S(lit->value);
  }
  if (const auto* sym = std::get_if<Symbol>(&node.v)) {
    switch (sym->kind) {
      case SymbolKind::Coordinate:
        return (*env.q)[sym->index];
      case SymbolKind::Velocity:
        if (env.v == nullptr || sym->index >= env.v->size())
          throw DomainError("velocity symbol out of scope: " + sym->name);
        return (*env.v)[sym->index];
      case SymbolKind::Parameter:
        if (env.params == nullptr || sym->index >= env.n_params)
          throw DomainError("unbound parameter: " + sym->name);
        return S(env.params[sym->index]);
    }
  }
  if (const auto* un = std::get_if<Unary>(&node.v)) {
    return apply_unary(un->fn, eval_node(*un->arg, env));
  }
  const auto& bin = std::get<Binary>(node.v);
  return apply_binary(bin.op, eval_node(*bin.lhs, env), eval_node(*bin.rhs, env));
}

}  // namespace detail

/// Immutable expression over chart coordinates, velocities and parameters.
/// Evaluation is generic over the scalar, so the same tree yields values
/// (double) and exact first derivatives (Dual).
class Expr {
 public:
  Expr() = default;

  static Expr parse(std::string_view source, const SymbolTable& symbols);

  static Expr literal(double v) {
    Expr e;
    e.root_ = detail::make_node(detail::Literal{v});
    return e;
  }

  bool valid() const { return root_ != nullptr; }

  template <class S>
  S eval(const VecX<S>& q, const VecX<S>& v,
         const std::vector<double>& params) const {
    detail::EvalEnv<S> env{&q, &v, params.empty() ? nullptr : params.data(),
                           static_cast<int>(params.size())};
    return detail::eval_node<S>(*root_, env);
  }

  template <class S>
  S eval_q(const VecX<S>& q, const std::vector<double>& params) const {
    detail::EvalEnv<S> env{&q, nullptr, params.empty() ? nullptr : params.data(),
                           static_cast<int>(params.size())};
    return detail::eval_node<S>(*root_, env);
  }

  /// Value plus partials with respect to the seeded coordinates; non-seeded
  /// slots hold zero. Velocities enter as constants.
  Dual eval_dual(const VectorXd& q, const VectorXd& v,
                 const std::vector<double>& params,
                 const std::vector<int>& seed) const {
    const int n = static_cast<int>(q.size());
    VecX<Dual> dq(n);
    for (int i = 0; i < n; ++i) dq[i] = Dual(q[i]);
    for (int s : seed) dq[s] = Dual::seeded(q[s], s, n);
    VecX<Dual> dv = constant_duals(v);
    return eval<Dual>(dq, dv, params);
  }

  bool depends_on_velocity() const { return depends_on(SymbolKind::Velocity); }
  bool depends_on(SymbolKind kind) const { return depends_on_impl(root_, kind); }

  std::string str() const { return print(root_, 0); }

  bool same_structure(const Expr& o) const { return same(root_, o.root_); }

 private:
  static bool depends_on_impl(const detail::NodePtr& n, SymbolKind kind) {
    if (const auto* sym = std::get_if<detail::Symbol>(&n->v))
      return sym->kind == kind;
    if (const auto* un = std::get_if<detail::Unary>(&n->v))
      return depends_on_impl(un->arg, kind);
    if (const auto* bin = std::get_if<detail::Binary>(&n->v))
      return depends_on_impl(bin->lhs, kind) || depends_on_impl(bin->rhs, kind);
    return false;
  }

  static bool same(const detail::NodePtr& a, const detail::NodePtr& b) {
    if (a->v.index() != b->v.index()) return false;
    if (const auto* la = std::get_if<detail::Literal>(&a->v)) {
      return la->value == std::get<detail::Literal>(b->v).value;
    }
    if (const auto* sa = std::get_if<detail::Symbol>(&a->v)) {
      // names, not indices: symbol tables may order parameters differently
      const auto& sb = std::get<detail::Symbol>(b->v);
      return sa->kind == sb.kind && sa->name == sb.name;
    }
    if (const auto* ua = std::get_if<detail::Unary>(&a->v)) {
      const auto& ub = std::get<detail::Unary>(b->v);
      return ua->fn == ub.fn && same(ua->arg, ub.arg);
    }
    const auto& ba = std::get<detail::Binary>(a->v);
    const auto& bb = std::get<detail::Binary>(b->v);
    return ba.op == bb.op && same(ba.lhs, bb.lhs) && same(ba.rhs, bb.rhs);
  }

  // Precedence levels: + - (1), * / (2), unary (3), ^ (4), atoms (5).
  static int prec(const detail::NodePtr& n) {
    if (const auto* un = std::get_if<detail::Unary>(&n->v))
      return un->fn == UnaryFn::Neg ? 3 : 5;
    if (const auto* bin = std::get_if<detail::Binary>(&n->v)) {
      switch (bin->op) {
        case BinaryOp::Add:
        case BinaryOp::Sub:
          return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div:
          return 2;
        case BinaryOp::Pow:
          return 4;
      }
    }
    return 5;
  }

  static std::string fn_name(UnaryFn fn) {
    switch (fn) {
      case UnaryFn::Neg:
        return "-";
      case UnaryFn::Sin:
        return "sin";
      case UnaryFn::Cos:
        return "cos";
      case UnaryFn::Tan:
        return "tan";
      case UnaryFn::Exp:
        return "exp";
      case UnaryFn::Log:
        return "log";
      case UnaryFn::Sqrt:
        return "sqrt";
      case UnaryFn::Abs:
        return "abs";
    }
    return "?";
  }

  static std::string wrap(const detail::NodePtr& n, int min_prec) {
    std::string s = print(n, 0);
    if (prec(n) < min_prec) return "(" + s + ")";
    return s;
  }

  static std::string print(const detail::NodePtr& n, int /*depth*/) {
    if (const auto* lit = std::get_if<detail::Literal>(&n->v)) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", lit->value);
      return buf;
    }
    if (const auto* sym = std::get_if<detail::Symbol>(&n->v)) return sym->name;
    if (const auto* un = std::get_if<detail::Unary>(&n->v)) {
      if (un->fn == UnaryFn::Neg) return "-" + wrap(un->arg, 3);
      return fn_name(un->fn) + "(" + print(un->arg, 0) + ")";
    }
    const auto& bin = std::get<detail::Binary>(n->v);
    switch (bin.op) {
      case BinaryOp::Add:
        return wrap(bin.lhs, 1) + " + " + wrap(bin.rhs, 2);
      case BinaryOp::Sub:
        return wrap(bin.lhs, 1) + " - " + wrap(bin.rhs, 2);
      case BinaryOp::Mul:
        return wrap(bin.lhs, 2) + "*" + wrap(bin.rhs, 3);
      case BinaryOp::Div:
        return wrap(bin.lhs, 2) + "/" + wrap(bin.rhs, 3);
      case BinaryOp::Pow:
        // right-associative: parenthesize an operator-valued base
        return wrap(bin.lhs, 5) + "^" + wrap(bin.rhs, 3);
    }
    return "?";
  }

  explicit Expr(detail::NodePtr root) : root_(std::move(root)) {}
  friend class Parser;

  detail::NodePtr root_;
};

namespace detail {

enum class TokKind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
  TokKind kind;
  double number = 0.0;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    t.column = col_;
    if (pos_ >= src_.size()) {
      t.kind = TokKind::End;
      return t;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return lex_number(t);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        advance();
      t.kind = TokKind::Ident;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    advance();
    switch (c) {
      case '+':
        t.kind = TokKind::Plus;
        return t;
      case '-':
        t.kind = TokKind::Minus;
        return t;
      case '*':
        t.kind = TokKind::Star;
        return t;
      case '/':
        t.kind = TokKind::Slash;
        return t;
      case '^':
        t.kind = TokKind::Caret;
        return t;
      case '(':
        t.kind = TokKind::LParen;
        return t;
      case ')':
        t.kind = TokKind::RParen;
        return t;
      default:
        throw ParseError(ParseError::Kind::Syntax,
                         std::string("unexpected character '") + c + "'", t.line,
                         t.column);
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_])))
      advance();
  }

  Token lex_number(Token t) {
    std::size_t start = pos_;
    bool seen_digit = false;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      seen_digit = true;
      advance();
    }
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        seen_digit = true;
        advance();
      }
    }
    if (!seen_digit) {
      throw ParseError(ParseError::Kind::Syntax, "malformed number", t.line, t.column);
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_])))
          advance();
      } else {
        pos_ = mark;  // 'e' belongs to a following identifier, not the number
      }
    }
    t.kind = TokKind::Number;
    t.number = std::stod(std::string(src_.substr(start, pos_ - start)));
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace detail

class Parser {
 public:
  Parser(std::string_view src, const SymbolTable& symbols)
      : lexer_(src), symbols_(symbols) {
    cur_ = lexer_.next();
  }

  Expr run() {
    if (cur_.kind == detail::TokKind::End) {
      throw ParseError(ParseError::Kind::EmptyInput, "empty expression", 1, 1);
    }
    detail::NodePtr root = parse_sum();
    expect_end();
    return Expr(std::move(root));
  }

 private:
  using NodePtr = detail::NodePtr;
  using TokKind = detail::TokKind;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(ParseError::Kind::Syntax, msg, cur_.line, cur_.column);
  }

  void bump() { cur_ = lexer_.next(); }

  void expect_end() {
    if (cur_.kind != TokKind::End) fail("unexpected trailing input");
  }

  NodePtr parse_sum() {
    NodePtr lhs = parse_term();
    while (cur_.kind == TokKind::Plus || cur_.kind == TokKind::Minus) {
      const BinaryOp op =
          cur_.kind == TokKind::Plus ? BinaryOp::Add : BinaryOp::Sub;
      bump();
      NodePtr rhs = parse_term();
      lhs = detail::make_node(detail::Binary{op, std::move(lhs), std::move(rhs)});
    }
    return lhs;
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    while (cur_.kind == TokKind::Star || cur_.kind == TokKind::Slash) {
      const BinaryOp op =
          cur_.kind == TokKind::Star ? BinaryOp::Mul : BinaryOp::Div;
      bump();
      NodePtr rhs = parse_unary();
      lhs = detail::make_node(detail::Binary{op, std::move(lhs), std::move(rhs)});
    }
    return lhs;
  }

  NodePtr parse_unary() {
    if (cur_.kind == TokKind::Minus) {
      bump();
      return detail::make_node(detail::Unary{UnaryFn::Neg, parse_unary()});
    }
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (cur_.kind == TokKind::Caret) {
      bump();
      // exponent at unary level keeps '^' right associative and admits `x^-2`
      NodePtr exp = parse_unary();
      return detail::make_node(
          detail::Binary{BinaryOp::Pow, std::move(base), std::move(exp)});
    }
    return base;
  }

  static std::optional<UnaryFn> function_named(const std::string& name) {
    if (name == "sin") return UnaryFn::Sin;
    if (name == "cos") return UnaryFn::Cos;
    if (name == "tan") return UnaryFn::Tan;
    if (name == "exp") return UnaryFn::Exp;
    if (name == "log") return UnaryFn::Log;
    if (name == "sqrt") return UnaryFn::Sqrt;
    if (name == "abs") return UnaryFn::Abs;
    return std::nullopt;
  }

  NodePtr parse_primary() {
    if (cur_.kind == TokKind::Number) {
      const double v = cur_.number;
      bump();
      return detail::make_node(detail::Literal{v});
    }
    if (cur_.kind == TokKind::LParen) {
      bump();
      NodePtr inner = parse_sum();
      if (cur_.kind != TokKind::RParen) fail("expected ')'");
      bump();
      return inner;
    }
    if (cur_.kind == TokKind::Ident) {
      const std::string name = cur_.text;
      const int line = cur_.line;
      const int column = cur_.column;
      bump();
      if (cur_.kind == TokKind::LParen) {
        const auto fn = function_named(name);
        if (!fn) {
          throw ParseError(ParseError::Kind::UnknownSymbol,
                           "unknown function '" + name + "'", line, column);
        }
        bump();
        NodePtr arg = parse_sum();
        if (cur_.kind != TokKind::RParen) fail("expected ')'");
        bump();
        return detail::make_node(detail::Unary{*fn, std::move(arg)});
      }
      const auto sym = symbols_.lookup(name);
      if (!sym) {
        throw ParseError(ParseError::Kind::UnknownSymbol,
                         "unknown symbol '" + name + "'", line, column);
      }
      return detail::make_node(detail::Symbol{sym->first, sym->second, name});
    }
    fail("expected a value");
  }

  detail::Lexer lexer_;
  const SymbolTable& symbols_;
  detail::Token cur_;
};

inline Expr Expr::parse(std::string_view source, const SymbolTable& symbols) {
  return Parser(source, symbols).run();
}

}  // namespace vnc
