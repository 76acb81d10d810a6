#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "imupen/dataio.hpp"

namespace imupen::cli {

/// Runs one command line (args[0] is the program name). Returns the process
/// exit code; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// FNV-1a over labels, shapes and the little-endian bytes of every value.
std::uint64_t dataset_hash(const Dataset& ds);

}  // namespace imupen::cli
