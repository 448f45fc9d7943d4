#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace ksel {

using Key = std::int64_t;
using u8 = std::uint8_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i32 = std::int32_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;

[[noreturn]] inline void contract_fail(const char* cond, const char* file, int line) {
    std::fprintf(stderr, "ksel: contract violation: %s (%s:%d)\n", cond, file, line);
    std::abort();
}

// Always-on contract checks; violations indicate structural corruption.
#define KSEL_ASSERT(cond) \
    ((cond) ? (void)0 : ::ksel::contract_fail(#cond, __FILE__, __LINE__))

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};
struct RankOutOfRange : std::out_of_range {
    using std::out_of_range::out_of_range;
};
struct EmptyQuantile : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyBuild : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Exact rational threshold (num/den). Thresholds such as zeta = n'/(6k) are
// real-valued; comparisons against integer counts are done exactly in 128-bit
// integer arithmetic, never in floating point.
struct Frac {
    u64 num = 0;
    u64 den = 1;
    double value() const { return den ? double(num) / double(den) : 0.0; }
};

inline bool count_gt(u64 count, Frac f) {
    return u128(count) * f.den > u128(f.num);
}
inline bool count_le(u64 count, Frac f) { return !count_gt(count, f); }

inline u64 ceil_div(u64 a, u64 b) {
    KSEL_ASSERT(b > 0);
    return a / b + (a % b != 0);
}

// ceil(m * f), exact.
inline u64 ceil_mul(u64 m, Frac f) {
    KSEL_ASSERT(f.den > 0);
    u128 p = u128(m) * f.num;
    return u64(p / f.den + (p % f.den != 0));
}

}  // namespace ksel
