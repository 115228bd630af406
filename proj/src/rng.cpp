#include "fedmoe/rng.hpp"

namespace fedmoe {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t k : keys) h = mix(h + kGolden + mix(k));
  return h;
}

CounterRng::result_type CounterRng::operator()() {
  state_ += kGolden;
  return mix(state_);
}

PathRng make_stream(std::uint64_t master_seed, std::uint64_t agent, StreamPurpose purpose) {
  return PathRng(derive_seed({master_seed, agent, static_cast<std::uint64_t>(purpose)}));
}

}  // namespace fedmoe
