#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spmbd::tools {

/// Entry point of the spmbd tool; args[0] is the program name. Returns 0 on
/// success, 2 on usage errors, 1 on configuration or run failures and 3 when
/// --strict rejects a contaminated reference.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spmbd::tools
