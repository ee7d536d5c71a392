#pragma once

// Closed-form expressions in the coordinates x1..xn and, for norm
// expressions, the vector components v1..vn. Text is parsed once into a
// postfix program that can be evaluated on doubles or on any jet type.

#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "finsler/dual.hpp"
#include "finsler/errors.hpp"

namespace finsler {

class Expression {
 public:
  enum class Op : unsigned char {
    kConst, kX, kV, kAdd, kSub, kMul, kDiv, kNeg, kPowConst, kPow,
    kSin, kCos, kTan, kExp, kLog, kSqrt,
  };
  struct Instr {
    Op op;
    int index = 0;
    double value = 0.0;
  };

  Expression() : Expression(0.0) {}
  explicit Expression(double c) : text_(formatConstant(c)) {
    code_.push_back({Op::kConst, 0, c});
    depth_ = 1;
  }

  // allowV enables v1..vn; otherwise only x1..xn may appear.
  static Expression parse(std::string_view text, int dim, bool allowV) {
    Parser p{text, dim, allowV, 0};
    auto root = p.parseExpr();
    p.skipSpace();
    if (p.pos != text.size()) p.fail("unexpected trailing input");
    Expression e;
    e.text_ = std::string(text);
    e.code_.clear();
    e.usesX_ = false;
    e.usesV_ = false;
    int depth = 0;
    int maxDepth = 0;
    e.emit(*root, depth, maxDepth);
    e.depth_ = maxDepth;
    if (e.depth_ > kStack) throw FinslerError(ErrorCode::kParseError, "expression too deeply nested: " + e.text_);
    return e;
  }

  const std::string& text() const { return text_; }
  bool isConstant() const { return code_.size() == 1 && code_[0].op == Op::kConst; }
  double constantValue() const { return code_[0].value; }
  bool usesX() const { return usesX_; }
  bool usesV() const { return usesV_; }

  template <typename T>
  T eval(const T* x, const T* v) const {
    if (isConstant()) return T(code_[0].value);
    std::array<T, kStack> s;
    int top = -1;
    for (const Instr& in : code_) {
      switch (in.op) {
        case Op::kConst: s[++top] = T(in.value); break;
        case Op::kX: s[++top] = x[in.index]; break;
        case Op::kV: s[++top] = v[in.index]; break;
        case Op::kAdd: s[top - 1] = s[top - 1] + s[top]; --top; break;
        case Op::kSub: s[top - 1] = s[top - 1] - s[top]; --top; break;
        case Op::kMul: s[top - 1] = s[top - 1] * s[top]; --top; break;
        case Op::kDiv: s[top - 1] = s[top - 1] / s[top]; --top; break;
        case Op::kNeg: s[top] = -s[top]; break;
        case Op::kPowConst: s[top] = powConst(s[top], in.value); break;
        case Op::kPow: s[top - 1] = pow(s[top - 1], s[top]); --top; break;
        case Op::kSin: s[top] = sin(s[top]); break;
        case Op::kCos: s[top] = cos(s[top]); break;
        case Op::kTan: s[top] = tan(s[top]); break;
        case Op::kExp: s[top] = exp(s[top]); break;
        case Op::kLog: s[top] = log(s[top]); break;
        case Op::kSqrt: s[top] = sqrt(s[top]); break;
      }
    }
    return s[0];
  }

  double operator()(const double* x, const double* v = nullptr) const { return eval<double>(x, v); }

 private:
  static constexpr int kStack = 48;

  struct Node {
    Op op;
    int index = 0;
    double value = 0.0;
    std::unique_ptr<Node> a, b;
  };
  using NodePtr = std::unique_ptr<Node>;

  static std::string formatConstant(double c) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", c);
    return buf;
  }

  template <typename T>
  static T powConst(const T& base, double k) {
    if (k == 2.0) return base * base;
    if (k == 3.0) return base * base * base;
    if (k == 4.0) {
      T b2 = base * base;
      return b2 * b2;
    }
    if (k == 0.5) return sqrt(base);
    return pow(base, k);
  }

  static double applyConst(Op op, double a, double b) {
    switch (op) {
      case Op::kAdd: return a + b;
      case Op::kSub: return a - b;
      case Op::kMul: return a * b;
      case Op::kDiv: return a / b;
      case Op::kNeg: return -a;
      case Op::kPow:
      case Op::kPowConst: return std::pow(a, b);
      case Op::kSin: return std::sin(a);
      case Op::kCos: return std::cos(a);
      case Op::kTan: return std::tan(a);
      case Op::kExp: return std::exp(a);
      case Op::kLog: return std::log(a);
      case Op::kSqrt: return std::sqrt(a);
      default: return 0.0;
    }
  }

  static NodePtr leaf(Op op, int index, double value) {
    auto n = std::make_unique<Node>();
    n->op = op;
    n->index = index;
    n->value = value;
    return n;
  }

  // Folds constant subtrees as they are built.
  static NodePtr make(Op op, NodePtr a, NodePtr b = nullptr) {
    bool aConst = a && a->op == Op::kConst;
    bool bConst = !b || b->op == Op::kConst;
    if (aConst && bConst) return leaf(Op::kConst, 0, applyConst(op, a->value, b ? b->value : 0.0));
    if (op == Op::kPow && b && b->op == Op::kConst) {
      auto n = std::make_unique<Node>();
      n->op = Op::kPowConst;
      n->value = b->value;
      n->a = std::move(a);
      return n;
    }
    auto n = std::make_unique<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  void emit(const Node& n, int& depth, int& maxDepth) {
    switch (n.op) {
      case Op::kConst:
      case Op::kX:
      case Op::kV:
        if (n.op == Op::kX) usesX_ = true;
        if (n.op == Op::kV) usesV_ = true;
        code_.push_back({n.op, n.index, n.value});
        ++depth;
        break;
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv:
      case Op::kPow:
        emit(*n.a, depth, maxDepth);
        emit(*n.b, depth, maxDepth);
        code_.push_back({n.op, 0, 0.0});
        --depth;
        break;
      default:
        emit(*n.a, depth, maxDepth);
        code_.push_back({n.op, 0, n.value});
        break;
    }
    if (depth > maxDepth) maxDepth = depth;
  }

  struct Parser {
    std::string_view s;
    int dim;
    bool allowV;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& msg) const {
      throw FinslerError(ErrorCode::kParseError, msg + " at position " + std::to_string(pos) + " in '" + std::string(s) + "'");
    }
    void skipSpace() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skipSpace();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    NodePtr parseExpr() {
      NodePtr lhs = parseTerm();
      for (;;) {
        if (accept('+')) lhs = make(Op::kAdd, std::move(lhs), parseTerm());
        else if (accept('-')) lhs = make(Op::kSub, std::move(lhs), parseTerm());
        else return lhs;
      }
    }
    NodePtr parseTerm() {
      NodePtr lhs = parseUnary();
      for (;;) {
        if (accept('*')) lhs = make(Op::kMul, std::move(lhs), parseUnary());
        else if (accept('/')) lhs = make(Op::kDiv, std::move(lhs), parseUnary());
        else return lhs;
      }
    }
    NodePtr parseUnary() {
      if (accept('-')) return make(Op::kNeg, parseUnary());
      if (accept('+')) return parseUnary();
      return parsePower();
    }
    // '^' is right associative and binds tighter than unary minus on its left.
    NodePtr parsePower() {
      NodePtr base = parsePrimary();
      if (accept('^')) return make(Op::kPow, std::move(base), parseUnary());
      return base;
    }
    NodePtr parsePrimary() {
      skipSpace();
      if (pos >= s.size()) fail("unexpected end of input");
      char c = s[pos];
      if (c == '(') {
        ++pos;
        NodePtr e = parseExpr();
        expect(')');
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parseNumber();
      if (std::isalpha(static_cast<unsigned char>(c))) return parseIdent();
      fail(std::string("unexpected character '") + c + "'");
    }
    NodePtr parseNumber() {
      std::size_t start = pos;
      while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.')) ++pos;
      if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
        std::size_t save = pos;
        ++pos;
        if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
        if (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
          while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        } else {
          pos = save;
        }
      }
      std::string tok(s.substr(start, pos - start));
      char* end = nullptr;
      double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') fail("malformed number '" + tok + "'");
      return leaf(Op::kConst, 0, v);
    }
    NodePtr parseIdent() {
      std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
      std::string id(s.substr(start, pos - start));
      if ((id[0] == 'x' || id[0] == 'v') && id.size() > 1 &&
          id.find_first_not_of("0123456789", 1) == std::string::npos) {
        int k = std::stoi(id.substr(1));
        if (k < 1 || k > dim) fail("variable '" + id + "' out of range for dimension " + std::to_string(dim));
        if (id[0] == 'v' && !allowV) fail("vector component '" + id + "' not allowed here");
        return leaf(id[0] == 'x' ? Op::kX : Op::kV, k - 1, 0.0);
      }
      if (id == "pi") return leaf(Op::kConst, 0, std::numbers::pi);
      if (id == "e") return leaf(Op::kConst, 0, std::numbers::e);
      static const std::pair<const char*, Op> unary[] = {
          {"sin", Op::kSin}, {"cos", Op::kCos}, {"tan", Op::kTan},
          {"exp", Op::kExp}, {"log", Op::kLog}, {"sqrt", Op::kSqrt},
      };
      for (const auto& [name, op] : unary) {
        if (id == name) {
          expect('(');
          NodePtr arg = parseExpr();
          expect(')');
          return make(op, std::move(arg));
        }
      }
      if (id == "pow") {
        expect('(');
        NodePtr a = parseExpr();
        expect(',');
        NodePtr b = parseExpr();
        expect(')');
        return make(Op::kPow, std::move(a), std::move(b));
      }
      fail("unknown identifier '" + id + "'");
    }
  };

  std::string text_;
  std::vector<Instr> code_;
  int depth_ = 0;
  bool usesX_ = false;
  bool usesV_ = false;
};

}  // namespace finsler
