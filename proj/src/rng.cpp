#include "lbow/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lbow {

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t r;
  do {
    r = gen_();
  } while (r >= limit);
  return static_cast<int>(r % un);
}

double Rng::gumbel() {
  double u = uniform01();
  if (u < 1e-20) u = 1e-20;
  return -std::log(-std::log(u));
}

std::string Rng::state() const {
  std::ostringstream os;
  os << gen_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> gen_;
  if (is.fail()) throw std::runtime_error("Rng::set_state: malformed state string");
}

}  // namespace lbow
