#ifndef DTREG_RNG_HPP
#define DTREG_RNG_HPP

#include <cstdint>
#include <random>

namespace dtreg {

/// splitmix64 step; used to derive independent child seeds from a master
/// seed.  Derivation is pure arithmetic, so stream layout never depends on
/// thread scheduling.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed for stream `index` of generation `salt` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                 std::uint64_t salt = 0) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
  splitmix64(s);
  s ^= 0xd1b54a32d192ed03ULL * (index + 1);
  std::uint64_t out = splitmix64(s);
  return out ^ splitmix64(s);
}

inline std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t index,
                                   std::uint64_t salt = 0) {
  return std::mt19937_64(derive_seed(master, index, salt));
}

}  // namespace dtreg

#endif  // DTREG_RNG_HPP
