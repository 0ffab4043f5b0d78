#include "mfbsde/dsl.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <utility>
#include <vector>

namespace mfbsde::dsl {

enum class var_kind { t, y, yp, i, ip, z_comp, zp_comp, snorm_z, snorm_zp, n };
enum class fn1 { neg, abs, sin, cos, tanh, exp, sqrt };
enum class op2 { add, sub, mul, div, min, max, pow };

struct node {
  enum class kind { number, variable, unary, binary };
  kind k = kind::number;
  double value = 0.0;
  var_kind var = var_kind::t;
  int index = 0;  // 0-based component for z_comp / zp_comp
  fn1 f = fn1::neg;
  op2 op = op2::add;
  node_ptr a, b;
};

namespace {

node_ptr make_number(double v) {
  auto n = std::make_shared<node>();
  n->k = node::kind::number;
  n->value = v;
  return n;
}

node_ptr make_var(var_kind v, int index = 0) {
  auto n = std::make_shared<node>();
  n->k = node::kind::variable;
  n->var = v;
  n->index = index;
  return n;
}

node_ptr make_unary(fn1 f, node_ptr a) {
  auto n = std::make_shared<node>();
  n->k = node::kind::unary;
  n->f = f;
  n->a = std::move(a);
  return n;
}

node_ptr make_binary(op2 op, node_ptr a, node_ptr b) {
  auto n = std::make_shared<node>();
  n->k = node::kind::binary;
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class parser {
 public:
  parser(const std::string& text, profile p, int n_states)
      : text_(text), profile_(p), n_states_(n_states) {}

  node_ptr run() {
    node_ptr e = parse_expr();
    skip_ws();
    if (pos_ < text_.size()) {
      throw syntax_error(pos_, "end of input");
    }
    return e;
  }

 private:
  const std::string& text_;
  profile profile_;
  int n_states_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, const std::string& what) {
    if (!eat(c)) throw syntax_error(pos_, what);
  }

  node_ptr parse_expr() {
    node_ptr lhs = parse_term();
    for (;;) {
      if (eat('+')) {
        lhs = make_binary(op2::add, lhs, parse_term());
      } else if (eat('-')) {
        lhs = make_binary(op2::sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  node_ptr parse_term() {
    node_ptr lhs = parse_unary();
    for (;;) {
      if (eat('*')) {
        lhs = make_binary(op2::mul, lhs, parse_unary());
      } else if (eat('/')) {
        lhs = make_binary(op2::div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  node_ptr parse_unary() {
    if (eat('-')) return make_unary(fn1::neg, parse_unary());
    return parse_primary();
  }

  node_ptr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw syntax_error(pos_, "a value");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      node_ptr e = parse_expr();
      expect(')', "')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return parse_number();
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      return parse_ident();
    }
    throw syntax_error(pos_, "a number, variable, function or '('");
  }

  node_ptr parse_number() {
    const char* start = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(start, &end);
    if (end == start) throw syntax_error(pos_, "a number");
    pos_ += static_cast<std::size_t>(end - start);
    return make_number(v);
  }

  node_ptr parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name = text_.substr(start, pos_ - start);

    // Function call?
    const std::size_t after_name = pos_;
    skip_ws();
    const bool is_call = pos_ < text_.size() && text_[pos_] == '(';
    pos_ = after_name;

    if (is_call) return parse_call(name, start);
    return parse_variable(name, start);
  }

  node_ptr parse_call(const std::string& name, std::size_t at) {
    const bool terminal = profile_ == profile::terminal;
    if (name == "snorm" || name == "snorm_p") {
      if (terminal) throw unknown_variable_error(name, at);
      expect('(', "'('");
      skip_ws();
      const std::size_t arg_at = pos_;
      const std::string want = name == "snorm" ? "z" : "zp";
      std::size_t p = pos_;
      while (p < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[p])) || text_[p] == '_')) {
        ++p;
      }
      if (text_.substr(pos_, p - pos_) != want) {
        throw syntax_error(arg_at, "'" + want + "' as the argument of " + name);
      }
      pos_ = p;
      expect(')', "')'");
      return make_var(name == "snorm" ? var_kind::snorm_z : var_kind::snorm_zp);
    }

    fn1 f{};
    bool unary_fn = true;
    op2 op{};
    bool binary_fn = false;
    if (name == "abs") f = fn1::abs;
    else if (name == "sin") f = fn1::sin;
    else if (name == "cos") f = fn1::cos;
    else if (name == "tanh") f = fn1::tanh;
    else if (name == "exp" || name == "sqrt" || name == "pow") {
      if (!terminal) {
        throw syntax_error(at, "a bounded function ('" + name +
                                   "' is only allowed in terminal expressions)");
      }
      if (name == "pow") {
        unary_fn = false;
        binary_fn = true;
        op = op2::pow;
      } else {
        f = name == "exp" ? fn1::exp : fn1::sqrt;
      }
    } else if (name == "min" || name == "max") {
      unary_fn = false;
      binary_fn = true;
      op = name == "min" ? op2::min : op2::max;
    } else {
      throw unknown_variable_error(name, at);
    }

    expect('(', "'('");
    node_ptr a = parse_expr();
    if (binary_fn) {
      expect(',', "','");
      node_ptr b = parse_expr();
      expect(')', "')'");
      return make_binary(op, std::move(a), std::move(b));
    }
    expect(')', "')'");
    return make_unary(f, std::move(a));
  }

  node_ptr parse_variable(const std::string& name, std::size_t at) {
    if (profile_ == profile::terminal) {
      if (name == "i") return make_var(var_kind::i);
      if (name == "n") return make_var(var_kind::n);
      throw unknown_variable_error(name, at);
    }
    if (name == "t") return make_var(var_kind::t);
    if (name == "y") return make_var(var_kind::y);
    if (name == "yp") return make_var(var_kind::yp);
    if (name == "i") return make_var(var_kind::i);
    if (name == "ip") return make_var(var_kind::ip);
    // z<k> / zp<k> with a 1-based component index.
    const bool zp = name.size() > 2 && name[0] == 'z' && name[1] == 'p';
    const bool z = !zp && name.size() > 1 && name[0] == 'z';
    if (z || zp) {
      const std::string digits = name.substr(zp ? 2 : 1);
      bool all_digits = !digits.empty();
      for (char d : digits) {
        if (!std::isdigit(static_cast<unsigned char>(d))) all_digits = false;
      }
      if (all_digits && digits.size() <= 6) {
        const long k = std::strtol(digits.c_str(), nullptr, 10);
        if (k >= 1 && (n_states_ <= 0 || k <= n_states_)) {
          return make_var(zp ? var_kind::zp_comp : var_kind::z_comp,
                          static_cast<int>(k - 1));
        }
      }
    }
    throw unknown_variable_error(name, at);
  }
};

void analyze(const node_ptr& n, bool& snorm_z, bool& snorm_zp, int& max_z, int& max_zp) {
  if (!n) return;
  if (n->k == node::kind::variable) {
    if (n->var == var_kind::snorm_z) snorm_z = true;
    if (n->var == var_kind::snorm_zp) snorm_zp = true;
    if (n->var == var_kind::z_comp && n->index + 1 > max_z) max_z = n->index + 1;
    if (n->var == var_kind::zp_comp && n->index + 1 > max_zp) max_zp = n->index + 1;
  }
  analyze(n->a, snorm_z, snorm_zp, max_z, max_zp);
  analyze(n->b, snorm_z, snorm_zp, max_z, max_zp);
}

double eval_node(const node& n, const eval_values& v) {
  switch (n.k) {
    case node::kind::number:
      return n.value;
    case node::kind::variable:
      switch (n.var) {
        case var_kind::t: return v.t;
        case var_kind::y: return v.y;
        case var_kind::yp: return v.yp;
        case var_kind::i: return v.i;
        case var_kind::ip: return v.ip;
        case var_kind::z_comp: return v.z[n.index];
        case var_kind::zp_comp: return v.zp[n.index];
        case var_kind::snorm_z: return v.snorm_z;
        case var_kind::snorm_zp: return v.snorm_zp;
        case var_kind::n: return v.n;
      }
      return 0.0;
    case node::kind::unary: {
      const double a = eval_node(*n.a, v);
      switch (n.f) {
        case fn1::neg: return -a;
        case fn1::abs: return std::abs(a);
        case fn1::sin: return std::sin(a);
        case fn1::cos: return std::cos(a);
        case fn1::tanh: return std::tanh(a);
        case fn1::exp: return std::exp(a);
        case fn1::sqrt: return std::sqrt(a);
      }
      return 0.0;
    }
    case node::kind::binary: {
      const double a = eval_node(*n.a, v);
      const double b = eval_node(*n.b, v);
      switch (n.op) {
        case op2::add: return a + b;
        case op2::sub: return a - b;
        case op2::mul: return a * b;
        case op2::div: return a / b;
        case op2::min: return std::fmin(a, b);
        case op2::max: return std::fmax(a, b);
        case op2::pow: return std::pow(a, b);
      }
      return 0.0;
    }
  }
  return 0.0;
}

int precedence(const node& n) {
  if (n.k != node::kind::binary) return 3;
  switch (n.op) {
    case op2::add:
    case op2::sub:
      return 1;
    case op2::mul:
    case op2::div:
      return 2;
    default:
      return 3;  // min/max/pow print as calls
  }
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void format_node(const node& n, std::string& out) {
  switch (n.k) {
    case node::kind::number:
      out += format_number(n.value);
      return;
    case node::kind::variable:
      switch (n.var) {
        case var_kind::t: out += "t"; return;
        case var_kind::y: out += "y"; return;
        case var_kind::yp: out += "yp"; return;
        case var_kind::i: out += "i"; return;
        case var_kind::ip: out += "ip"; return;
        case var_kind::z_comp: out += "z" + std::to_string(n.index + 1); return;
        case var_kind::zp_comp: out += "zp" + std::to_string(n.index + 1); return;
        case var_kind::snorm_z: out += "snorm(z)"; return;
        case var_kind::snorm_zp: out += "snorm_p(zp)"; return;
        case var_kind::n: out += "n"; return;
      }
      return;
    case node::kind::unary: {
      const char* fn = nullptr;
      switch (n.f) {
        case fn1::neg: fn = nullptr; break;
        case fn1::abs: fn = "abs"; break;
        case fn1::sin: fn = "sin"; break;
        case fn1::cos: fn = "cos"; break;
        case fn1::tanh: fn = "tanh"; break;
        case fn1::exp: fn = "exp"; break;
        case fn1::sqrt: fn = "sqrt"; break;
      }
      if (fn == nullptr) {
        out += "-";
        const bool parens = n.a->k == node::kind::binary && precedence(*n.a) <= 2;
        if (parens) out += "(";
        format_node(*n.a, out);
        if (parens) out += ")";
      } else {
        out += fn;
        out += "(";
        format_node(*n.a, out);
        out += ")";
      }
      return;
    }
    case node::kind::binary: {
      const char* call = nullptr;
      switch (n.op) {
        case op2::min: call = "min"; break;
        case op2::max: call = "max"; break;
        case op2::pow: call = "pow"; break;
        default: break;
      }
      if (call != nullptr) {
        out += call;
        out += "(";
        format_node(*n.a, out);
        out += ", ";
        format_node(*n.b, out);
        out += ")";
        return;
      }
      const int prec = precedence(n);
      const char* sym = n.op == op2::add ? " + "
                        : n.op == op2::sub ? " - "
                        : n.op == op2::mul ? "*"
                                           : "/";
      const bool lp = precedence(*n.a) < prec;
      if (lp) out += "(";
      format_node(*n.a, out);
      if (lp) out += ")";
      out += sym;
      // parsing is left-associative, so a right child at the same precedence
      // level must keep its parentheses to reparse into the same shape
      const bool rp = precedence(*n.b) <= prec;
      if (rp) out += "(";
      format_node(*n.b, out);
      if (rp) out += ")";
      return;
    }
  }
}

bool equal_nodes(const node_ptr& a, const node_ptr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->k != b->k) return false;
  switch (a->k) {
    case node::kind::number:
      return a->value == b->value;
    case node::kind::variable:
      return a->var == b->var && a->index == b->index;
    case node::kind::unary:
      return a->f == b->f && equal_nodes(a->a, b->a);
    case node::kind::binary:
      return a->op == b->op && equal_nodes(a->a, b->a) && equal_nodes(a->b, b->b);
  }
  return false;
}

}  // namespace

double expression::evaluate(const eval_values& v) const {
  if (!root_) return 0.0;
  return eval_node(*root_, v);
}

std::string expression::format() const {
  if (!root_) return "0";
  std::string out;
  format_node(*root_, out);
  return out;
}

bool expression::operator==(const expression& other) const {
  return equal_nodes(root_, other.root_);
}

expression parse(const std::string& text, profile p, int n_states) {
  parser ps(text, p, n_states);
  expression e;
  e.root_ = ps.run();
  analyze(e.root_, e.uses_snorm_z_, e.uses_snorm_zp_, e.max_z_index_, e.max_zp_index_);
  return e;
}

}  // namespace mfbsde::dsl
