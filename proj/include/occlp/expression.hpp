#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace occlp {

// Small arithmetic expression over state variables y1..ym and controls u1..uk.
// Grammar: + - * / ^, unary minus, parentheses, decimal literals, `pi`,
// and the functions sin, cos, exp, sqrt. Used for custom dynamics, costs,
// first integrals and feedback laws declared in study configs.
class Expression {
 public:
  struct Node;

  Expression();
  static Expression parse(std::string_view text);
  static Expression constant(double value);

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& y,
                    const Eigen::Ref<const Eigen::VectorXd>& u) const;
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& y) const;

  // Symbolic partial derivative with respect to y_{index+1}.
  Expression derivative_state(int index) const;

  // Highest referenced variable index (1-based); 0 when unused.
  int max_state_index() const;
  int max_control_index() const;
  bool is_constant() const;

  const std::string& text() const { return text_; }

 private:
  Expression(std::shared_ptr<const Node> root, std::string text);

  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace occlp
