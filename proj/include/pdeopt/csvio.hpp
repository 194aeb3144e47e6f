#pragma once

#include <string>
#include <vector>

namespace pdeopt {

// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_number(double value);

// Writes header + rows, one line each, comma separated, trailing newline.
// Cells are emitted verbatim; callers keep commas and newlines out of them.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace pdeopt
