#include "setid/expr.hpp"

#include "setid/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace setid {

class ExprParser {
 public:
  ExprParser(std::string_view text, const std::vector<std::string>& vars, int line, int column, Expression& out)
      : s_(text), vars_(vars), line_(line), col0_(column), out_(out) {}

  int parse() {
    const int root = expr();
    skip_space();
    if (pos_ < s_.size()) error("unexpected '" + current_char() + "'");
    return root;
  }

 private:
  std::string_view s_;
  const std::vector<std::string>& vars_;
  int line_;
  int col0_;
  Expression& out_;
  std::size_t pos_ = 0;

  int column_at(std::size_t pos) const {
    int cps = 0;
    for (std::size_t i = 0; i < pos && i < s_.size(); ++i)
      if ((static_cast<unsigned char>(s_[i]) & 0xC0) != 0x80) ++cps;
    return col0_ + cps;
  }

  std::string current_char() const {
    if (pos_ >= s_.size()) return "end of input";
    std::size_t len = 1;
    while (pos_ + len < s_.size() && (static_cast<unsigned char>(s_[pos_ + len]) & 0xC0) == 0x80) ++len;
    return std::string(s_.substr(pos_, len));
  }

  [[noreturn]] void error(const std::string& what) const {
    const int col = column_at(pos_);
    throw ParseError(what, line_, col);
  }

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int add(Expression::Op op, int a, int b) {
    Expression::Node n{op};
    n.a = a;
    n.b = b;
    out_.nodes_.push_back(n);
    return static_cast<int>(out_.nodes_.size()) - 1;
  }

  int expr() {
    int lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = add(Expression::Op::Add, lhs, term());
      } else if (accept('-')) {
        lhs = add(Expression::Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  int term() {
    int lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = add(Expression::Op::Mul, lhs, unary());
      } else if (accept('/')) {
        lhs = add(Expression::Op::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  int unary() {
    if (accept('-')) return add(Expression::Op::Neg, unary(), -1);
    return power();
  }

  int power() {
    const int base = primary();
    if (accept('^')) return add(Expression::Op::Pow, base, unary());
    return base;
  }

  static bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
  static bool ident_char(unsigned char c) { return ident_start(c) || std::isdigit(c); }

  int primary() {
    skip_space();
    if (pos_ >= s_.size()) error("unexpected end of input");
    const unsigned char c = static_cast<unsigned char>(s_[pos_]);
    if (c == '(') {
      ++pos_;
      const int inner = expr();
      if (!accept(')')) error("expected ')'");
      return inner;
    }
    if (std::isdigit(c) || c == '.') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
        std::size_t p = pos_ + 1;
        if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
        if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
          pos_ = p;
          while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
      }
      const std::string lit(s_.substr(start, pos_ - start));
      char* end = nullptr;
      const double v = std::strtod(lit.c_str(), &end);
      if (end != lit.c_str() + lit.size()) {
        pos_ = start;
        error("malformed number '" + lit + "'");
      }
      Expression::Node n{Expression::Op::Const};
      n.value = v;
      out_.nodes_.push_back(n);
      return static_cast<int>(out_.nodes_.size()) - 1;
    }
    if (ident_start(c)) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && ident_char(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string name(s_.substr(start, pos_ - start));
      const auto it = std::find(vars_.begin(), vars_.end(), name);
      if (it == vars_.end())
        fail(ErrorCode::UnknownParameterName, "line " + std::to_string(line_) + ", column " +
                                                  std::to_string(column_at(start)) + ": unknown name '" + name + "'");
      Expression::Node n{Expression::Op::Var};
      n.var = static_cast<int>(it - vars_.begin());
      out_.nodes_.push_back(n);
      return static_cast<int>(out_.nodes_.size()) - 1;
    }
    error("unexpected '" + current_char() + "'");
  }
};

Expression Expression::compile(std::string_view text, const std::vector<std::string>& variables, int line,
                               int column) {
  Expression e;
  e.names_ = variables;
  ExprParser parser(text, variables, line, column, e);
  e.root_ = parser.parse();
  e.emit(e.root_, 1);
  return e;
}

void Expression::emit(int node, int depth) {
  max_depth_ = std::max(max_depth_, depth);
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  switch (n.op) {
    case Op::Const:
      constants_.push_back(n.value);
      code_.push_back({Op::Const, static_cast<int>(constants_.size()) - 1});
      return;
    case Op::Var:
      code_.push_back({Op::Var, n.var});
      return;
    case Op::Neg:
      emit(n.a, depth);
      code_.push_back({Op::Neg, -1});
      return;
    default:
      emit(n.a, depth);
      emit(n.b, depth + 1);
      code_.push_back({n.op, -1});
      return;
  }
}

double Expression::eval(const double* values) const {
  if (code_.empty()) return 0.0;
  double small[32];
  std::vector<double> big;
  double* st = small;
  if (max_depth_ > 32) {
    big.resize(static_cast<std::size_t>(max_depth_));
    st = big.data();
  }
  int sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Const: st[sp++] = constants_[static_cast<std::size_t>(in.index)]; break;
      case Op::Var: st[sp++] = values[in.index]; break;
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Add: --sp; st[sp - 1] += st[sp]; break;
      case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
      case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
      case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
      case Op::Pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
    }
  }
  return st[0];
}

namespace {

int precedence(int op) {
  // Add/Sub 1, Mul/Div 2, Neg 3, Pow 4, leaves 5.
  static const int table[] = {5, 5, 1, 1, 2, 2, 3, 4};
  return table[op];
}

std::string format_number(double v) {
  char buf[32];
  for (int digits = 1; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace

std::string Expression::render(int node, int min_prec) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  const int prec = precedence(static_cast<int>(n.op));
  std::string s;
  switch (n.op) {
    case Op::Const: s = format_number(n.value); break;
    case Op::Var: s = names_[static_cast<std::size_t>(n.var)]; break;
    case Op::Neg: s = "-" + render(n.a, 3); break;
    case Op::Add: s = render(n.a, 1) + " + " + render(n.b, 2); break;
    case Op::Sub: s = render(n.a, 1) + " - " + render(n.b, 2); break;
    case Op::Mul: s = render(n.a, 2) + " * " + render(n.b, 3); break;
    case Op::Div: s = render(n.a, 2) + " / " + render(n.b, 3); break;
    case Op::Pow: s = render(n.a, 5) + " ^ " + render(n.b, 3); break;
  }
  return prec < min_prec ? "(" + s + ")" : s;
}

std::string Expression::canonical() const { return root_ < 0 ? "0" : render(root_, 1); }

bool Expression::is_constant() const {
  return std::none_of(code_.begin(), code_.end(), [](const Instr& i) { return i.op == Op::Var; });
}

std::vector<int> Expression::variables_used() const {
  std::vector<int> out;
  for (const Instr& i : code_)
    if (i.op == Op::Var) out.push_back(i.index);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace setid
