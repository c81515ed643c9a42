#include "heloc/random.hpp"

#include <sstream>

#include "heloc/error.hpp"

namespace heloc {

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (in.fail()) throw FormatError("invalid generator state");
}

}  // namespace heloc
