#include "occlp/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace occlp {

struct Expression::Node {
  enum class Kind { Constant, State, Control, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Sqrt };

  Kind kind = Kind::Constant;
  double value = 0.0;
  int index = 0;  // 0-based variable index
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;
using Kind = Node::Kind;

NodePtr make_constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Constant;
  n->value = v;
  return n;
}

NodePtr make_variable(Kind kind, int index) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->index = index;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->kind == Kind::Constant && n->value == v; }

NodePtr make_binary(Kind kind, NodePtr a, NodePtr b) {
  if (a->kind == Kind::Constant && b->kind == Kind::Constant) {
    switch (kind) {
      case Kind::Add: return make_constant(a->value + b->value);
      case Kind::Sub: return make_constant(a->value - b->value);
      case Kind::Mul: return make_constant(a->value * b->value);
      case Kind::Div: return make_constant(a->value / b->value);
      case Kind::Pow: return make_constant(std::pow(a->value, b->value));
      default: break;
    }
  }
  switch (kind) {
    case Kind::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Kind::Sub:
      if (is_const(b, 0.0)) return a;
      break;
    case Kind::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return make_constant(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Kind::Div:
      if (is_const(a, 0.0)) return make_constant(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Kind::Pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return make_constant(1.0);
      break;
    default: break;
  }
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

NodePtr make_unary(Kind kind, NodePtr a) {
  if (a->kind == Kind::Constant) {
    switch (kind) {
      case Kind::Neg: return make_constant(-a->value);
      case Kind::Sin: return make_constant(std::sin(a->value));
      case Kind::Cos: return make_constant(std::cos(a->value));
      case Kind::Exp: return make_constant(std::exp(a->value));
      case Kind::Sqrt: return make_constant(std::sqrt(a->value));
      default: break;
    }
  }
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(a);
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    auto root = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "expression '" << text_ << "': " << what << " at offset " << pos_;
    throw std::invalid_argument(os.str());
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_sum() {
    auto node = parse_product();
    for (;;) {
      if (accept('+')) {
        node = make_binary(Kind::Add, node, parse_product());
      } else if (accept('-')) {
        node = make_binary(Kind::Sub, node, parse_product());
      } else {
        return node;
      }
    }
  }

  NodePtr parse_product() {
    auto node = parse_unary();
    for (;;) {
      if (accept('*')) {
        node = make_binary(Kind::Mul, node, parse_unary());
      } else if (accept('/')) {
        node = make_binary(Kind::Div, node, parse_unary());
      } else {
        return node;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_unary(Kind::Neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    auto base = parse_primary();
    if (accept('^')) return make_binary(Kind::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (accept('(')) {
      auto inner = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr parse_number() {
    const std::string rest(text_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    pos_ += used;
    return make_constant(v);
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    if (name == "pi") return make_constant(std::numbers::pi);
    if ((name[0] == 'y' || name[0] == 'u') && name.size() > 1) {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i) digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
      if (digits) {
        const int idx = std::stoi(name.substr(1));
        if (idx < 1) fail("variable indices start at 1");
        return make_variable(name[0] == 'y' ? Kind::State : Kind::Control, idx - 1);
      }
    }
    Kind fn;
    if (name == "sin") {
      fn = Kind::Sin;
    } else if (name == "cos") {
      fn = Kind::Cos;
    } else if (name == "exp") {
      fn = Kind::Exp;
    } else if (name == "sqrt") {
      fn = Kind::Sqrt;
    } else {
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    if (!accept('(')) fail("expected '(' after " + name);
    auto arg = parse_sum();
    if (!accept(')')) fail("expected ')'");
    return make_unary(fn, arg);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

double evaluate(const Node& n, const Eigen::Ref<const Eigen::VectorXd>& y,
                const Eigen::Ref<const Eigen::VectorXd>& u) {
  switch (n.kind) {
    case Kind::Constant: return n.value;
    case Kind::State:
      if (n.index >= y.size()) throw std::invalid_argument("expression references y" + std::to_string(n.index + 1) + " beyond state dimension");
      return y[n.index];
    case Kind::Control:
      if (n.index >= u.size()) throw std::invalid_argument("expression references u" + std::to_string(n.index + 1) + " beyond control dimension");
      return u[n.index];
    case Kind::Add: return evaluate(*n.lhs, y, u) + evaluate(*n.rhs, y, u);
    case Kind::Sub: return evaluate(*n.lhs, y, u) - evaluate(*n.rhs, y, u);
    case Kind::Mul: return evaluate(*n.lhs, y, u) * evaluate(*n.rhs, y, u);
    case Kind::Div: return evaluate(*n.lhs, y, u) / evaluate(*n.rhs, y, u);
    case Kind::Pow: {
      const double base = evaluate(*n.lhs, y, u);
      if (n.rhs->kind == Kind::Constant) {
        const double e = n.rhs->value;
        if (e == 2.0) return base * base;
        if (e == std::floor(e) && std::abs(e) <= 64) {
          double r = 1.0;
          for (int i = 0; i < static_cast<int>(std::abs(e)); ++i) r *= base;
          return e < 0 ? 1.0 / r : r;
        }
      }
      return std::pow(base, evaluate(*n.rhs, y, u));
    }
    case Kind::Neg: return -evaluate(*n.lhs, y, u);
    case Kind::Sin: return std::sin(evaluate(*n.lhs, y, u));
    case Kind::Cos: return std::cos(evaluate(*n.lhs, y, u));
    case Kind::Exp: return std::exp(evaluate(*n.lhs, y, u));
    case Kind::Sqrt: return std::sqrt(evaluate(*n.lhs, y, u));
  }
  return 0.0;
}

NodePtr differentiate(const NodePtr& n, int index) {
  switch (n->kind) {
    case Kind::Constant:
    case Kind::Control: return make_constant(0.0);
    case Kind::State: return make_constant(n->index == index ? 1.0 : 0.0);
    case Kind::Add: return make_binary(Kind::Add, differentiate(n->lhs, index), differentiate(n->rhs, index));
    case Kind::Sub: return make_binary(Kind::Sub, differentiate(n->lhs, index), differentiate(n->rhs, index));
    case Kind::Mul:
      return make_binary(Kind::Add, make_binary(Kind::Mul, differentiate(n->lhs, index), n->rhs),
                         make_binary(Kind::Mul, n->lhs, differentiate(n->rhs, index)));
    case Kind::Div: {
      auto num = make_binary(Kind::Sub, make_binary(Kind::Mul, differentiate(n->lhs, index), n->rhs),
                             make_binary(Kind::Mul, n->lhs, differentiate(n->rhs, index)));
      return make_binary(Kind::Div, num, make_binary(Kind::Pow, n->rhs, make_constant(2.0)));
    }
    case Kind::Pow: {
      if (n->rhs->kind != Kind::Constant) {
        throw std::invalid_argument("cannot differentiate a power with non-constant exponent");
      }
      const double e = n->rhs->value;
      auto outer = make_binary(Kind::Mul, make_constant(e), make_binary(Kind::Pow, n->lhs, make_constant(e - 1.0)));
      return make_binary(Kind::Mul, outer, differentiate(n->lhs, index));
    }
    case Kind::Neg: {
      auto d = differentiate(n->lhs, index);
      return is_const(d, 0.0) ? d : make_unary(Kind::Neg, d);
    }
    case Kind::Sin: return make_binary(Kind::Mul, make_unary(Kind::Cos, n->lhs), differentiate(n->lhs, index));
    case Kind::Cos:
      return make_binary(Kind::Mul, make_unary(Kind::Neg, make_unary(Kind::Sin, n->lhs)), differentiate(n->lhs, index));
    case Kind::Exp: return make_binary(Kind::Mul, n, differentiate(n->lhs, index));
    case Kind::Sqrt:
      return make_binary(Kind::Div, differentiate(n->lhs, index), make_binary(Kind::Mul, make_constant(2.0), n));
  }
  return make_constant(0.0);
}

void print(const Node& n, std::ostream& os) {
  auto bin = [&](const char* op) {
    os << '(';
    print(*n.lhs, os);
    os << ' ' << op << ' ';
    print(*n.rhs, os);
    os << ')';
  };
  auto fn = [&](const char* name) {
    os << name << '(';
    print(*n.lhs, os);
    os << ')';
  };
  switch (n.kind) {
    case Kind::Constant: {
      std::ostringstream s;
      s.precision(17);
      s << n.value;
      os << s.str();
      break;
    }
    case Kind::State: os << 'y' << n.index + 1; break;
    case Kind::Control: os << 'u' << n.index + 1; break;
    case Kind::Add: bin("+"); break;
    case Kind::Sub: bin("-"); break;
    case Kind::Mul: bin("*"); break;
    case Kind::Div: bin("/"); break;
    case Kind::Pow: bin("^"); break;
    case Kind::Neg: fn("-"); break;
    case Kind::Sin: fn("sin"); break;
    case Kind::Cos: fn("cos"); break;
    case Kind::Exp: fn("exp"); break;
    case Kind::Sqrt: fn("sqrt"); break;
  }
}

int max_index(const Node& n, Kind kind) {
  int m = n.kind == kind ? n.index + 1 : 0;
  if (n.lhs) m = std::max(m, max_index(*n.lhs, kind));
  if (n.rhs) m = std::max(m, max_index(*n.rhs, kind));
  return m;
}

}  // namespace

Expression::Expression() : Expression(make_constant(0.0), "0") {}

Expression::Expression(std::shared_ptr<const Node> root, std::string text)
    : root_(std::move(root)), text_(std::move(text)) {}

Expression Expression::parse(std::string_view text) {
  return Expression(Parser(text).parse(), std::string(text));
}

Expression Expression::constant(double value) {
  auto node = make_constant(value);
  std::ostringstream os;
  print(*node, os);
  return Expression(node, os.str());
}

double Expression::operator()(const Eigen::Ref<const Eigen::VectorXd>& y,
                              const Eigen::Ref<const Eigen::VectorXd>& u) const {
  return evaluate(*root_, y, u);
}

double Expression::operator()(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  static const Eigen::VectorXd no_control;
  return evaluate(*root_, y, no_control);
}

Expression Expression::derivative_state(int index) const {
  auto d = differentiate(root_, index);
  std::ostringstream os;
  print(*d, os);
  return Expression(d, os.str());
}

int Expression::max_state_index() const { return max_index(*root_, Kind::State); }
int Expression::max_control_index() const { return max_index(*root_, Kind::Control); }
bool Expression::is_constant() const { return root_->kind == Kind::Constant; }

}  // namespace occlp
