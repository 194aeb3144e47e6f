#include "pdeopt/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <utility>

namespace pdeopt {

namespace {

using Fn = std::function<double(double, double)>;

[[noreturn]] void fail(std::size_t pos, const std::string& what) {
  std::ostringstream os;
  os << "expression error at position " << pos + 1 << ": " << what;
  throw std::invalid_argument(os.str());
}

struct Parser {
  const std::string& src;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < src.size() &&
           std::isspace(static_cast<unsigned char>(src[pos])))
      ++pos;
  }

  // '-' or the 3-byte utf-8 minus sign
  bool minus_at(std::size_t p) const {
    if (p >= src.size()) return false;
    if (src[p] == '-') return true;
    return p + 2 < src.size() &&
           static_cast<unsigned char>(src[p]) == 0xE2 &&
           static_cast<unsigned char>(src[p + 1]) == 0x88 &&
           static_cast<unsigned char>(src[p + 2]) == 0x92;
  }

  void eat_minus() { pos += src[pos] == '-' ? 1 : 3; }

  Fn parse_expr() {
    Fn left = parse_term();
    for (;;) {
      skip_ws();
      if (pos < src.size() && src[pos] == '+') {
        ++pos;
        Fn right = parse_term();
        left = [l = std::move(left), r = std::move(right)](double a, double b) {
          return l(a, b) + r(a, b);
        };
      } else if (minus_at(pos)) {
        eat_minus();
        Fn right = parse_term();
        left = [l = std::move(left), r = std::move(right)](double a, double b) {
          return l(a, b) - r(a, b);
        };
      } else {
        return left;
      }
    }
  }

  Fn parse_term() {
    Fn left = parse_unary();
    for (;;) {
      skip_ws();
      if (pos < src.size() && src[pos] == '*') {
        ++pos;
        Fn right = parse_unary();
        left = [l = std::move(left), r = std::move(right)](double a, double b) {
          return l(a, b) * r(a, b);
        };
      } else if (pos < src.size() && src[pos] == '/') {
        ++pos;
        Fn right = parse_unary();
        left = [l = std::move(left), r = std::move(right)](double a, double b) {
          return l(a, b) / r(a, b);
        };
      } else {
        return left;
      }
    }
  }

  Fn parse_unary() {
    skip_ws();
    if (pos < src.size() && src[pos] == '+') {
      ++pos;
      return parse_unary();
    }
    if (minus_at(pos)) {
      eat_minus();
      Fn inner = parse_unary();
      return [f = std::move(inner)](double a, double b) { return -f(a, b); };
    }
    return parse_power();
  }

  Fn parse_power() {
    Fn base = parse_primary();
    skip_ws();
    if (pos < src.size() && src[pos] == '^') {
      ++pos;
      Fn expo = parse_unary();  // right associative, unary exponents allowed
      return [l = std::move(base), r = std::move(expo)](double a, double b) {
        return std::pow(l(a, b), r(a, b));
      };
    }
    return base;
  }

  Fn parse_primary() {
    skip_ws();
    if (pos >= src.size()) fail(pos, "unexpected end of input");
    const char c = src[pos];
    if (c == '(') {
      ++pos;
      Fn inner = parse_expr();
      skip_ws();
      if (pos >= src.size() || src[pos] != ')')
        fail(pos, "expected ')'");
      ++pos;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* start = src.c_str() + pos;
      char* end = nullptr;
      const double value = std::strtod(start, &end);
      if (end == start) fail(pos, "invalid number");
      pos += static_cast<std::size_t>(end - start);
      return [value](double, double) { return value; };
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos;
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) ||
              src[pos] == '_'))
        ++pos;
      const std::string name = src.substr(start, pos - start);
      if (name == "pi") return [](double, double) { return M_PI; };
      if (name == "x1") return [](double a, double) { return a; };
      if (name == "x2") return [](double, double b) { return b; };
      if (name == "sin" || name == "cos" || name == "exp") {
        skip_ws();
        if (pos >= src.size() || src[pos] != '(')
          fail(pos, "expected '(' after function name");
        ++pos;
        Fn arg = parse_expr();
        skip_ws();
        if (pos >= src.size() || src[pos] != ')')
          fail(pos, "expected ')'");
        ++pos;
        using UnaryFn = double (*)(double);
        const UnaryFn fn = name == "sin"   ? static_cast<UnaryFn>(std::sin)
                           : name == "cos" ? static_cast<UnaryFn>(std::cos)
                                           : static_cast<UnaryFn>(std::exp);
        return [fn, f = std::move(arg)](double a, double b) {
          return fn(f(a, b));
        };
      }
      fail(start, "unknown identifier '" + name + "'");
    }
    fail(pos, std::string("unexpected character '") + c + "'");
  }
};

}  // namespace

std::function<double(double, double)> compile_expression(
    const std::string& src) {
  Parser parser{src};
  Fn fn = parser.parse_expr();
  parser.skip_ws();
  if (parser.pos != src.size())
    fail(parser.pos, "unexpected trailing input");
  return fn;
}

}  // namespace pdeopt
