#pragma once

// Minimal arithmetic expressions over the spatial coordinates: operators
// + - * / ^, functions sin/cos/exp, the constant pi and variables x1/x2.
// Exponentiation is right associative and binds tighter than unary minus.
// Evaluation follows IEEE semantics (1/0 is inf); finiteness is enforced
// where fields are built from expressions, not here.

#include <functional>
#include <string>

namespace pdeopt {

// Parses src into a reusable evaluator. Throws std::invalid_argument with
// the 1-based byte position of the offending token on malformed input. The
// unicode minus sign is accepted as a synonym for '-'.
std::function<double(double, double)> compile_expression(const std::string& src);

}  // namespace pdeopt
