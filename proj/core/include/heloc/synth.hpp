#pragma once

#include <string>
#include <string_view>

#include "heloc/random.hpp"

namespace heloc {

/// Template families for generated demo-language programs.
enum class ProgramFamily {
  mixed,   // any statement kind
  loops,   // dominated by while loops with counter updates
  branches // dominated by if/else chains on equality tests
};

ProgramFamily parse_family(std::string_view name);

/// Generates a random program whose tree depth never exceeds max_depth
/// (at least 4).
std::string generate_program(ProgramFamily family, Rng& rng, int max_depth = 6);

}  // namespace heloc
