#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace setid {

// Arithmetic over named variables and numeric literals:
//   expr  = term (('+' | '-') term)*
//   term  = unary (('*' | '/') unary)*
//   unary = '-' unary | power
//   power = primary ('^' unary)?
//   primary = number | identifier | '(' expr ')'
// Compiled once to postfix code; evaluation does not allocate for shallow
// expressions.
class Expression {
 public:
  Expression() = default;

  // `line` and `column` locate the first character of `text` in its source
  // for error messages. Columns count code points from 1.
  static Expression compile(std::string_view text, const std::vector<std::string>& variables, int line = 1,
                            int column = 1);

  double eval(const double* values) const;
  double eval(const std::vector<double>& values) const { return eval(values.data()); }

  // Minimal-parenthesis rendering; compile(canonical()) reproduces the tree.
  std::string canonical() const;

  bool is_constant() const;
  std::vector<int> variables_used() const;

 private:
  enum class Op : unsigned char { Const, Var, Add, Sub, Mul, Div, Neg, Pow };
  struct Node {
    Op op;
    int a = -1, b = -1;  // children
    double value = 0.0;
    int var = -1;
  };
  struct Instr {
    Op op;
    int index;  // constant slot or variable index
  };

  std::vector<Node> nodes_;
  int root_ = -1;
  std::vector<Instr> code_;
  std::vector<double> constants_;
  int max_depth_ = 0;
  std::vector<std::string> names_;

  void emit(int node, int depth);
  std::string render(int node, int min_prec) const;

  friend class ExprParser;
};

}  // namespace setid
