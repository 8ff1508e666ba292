#pragma once

#include <cstdint>

namespace rprop {

constexpr std::int64_t pow_int(std::int64_t base, int exp) {
    std::int64_t r = 1;
    for (int k = 0; k < exp; ++k) r *= base;
    return r;
}

constexpr std::int64_t pow2(int exp) { return pow_int(2, exp); }
constexpr std::int64_t pow3(int exp) { return pow_int(3, exp); }

}  // namespace rprop
