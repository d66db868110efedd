#include "embnav/seed.hpp"

#include <cmath>

#include "embnav/common.hpp"

namespace embnav {

double wrap_angle(double radians) {
    double wrapped = std::remainder(radians, 2.0 * kPi);  // [-pi, pi]
    if (wrapped <= -kPi) wrapped += 2.0 * kPi;
    return wrapped;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t hash = basis;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index) {
    return splitmix64(splitmix64(master ^ fnv1a64(stage)) + index);
}

}  // namespace embnav
