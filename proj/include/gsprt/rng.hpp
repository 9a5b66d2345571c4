#pragma once

#include <array>
#include <cstdint>

#include "gsprt/normal.hpp"

namespace gsprt {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// The key is the 64-bit experiment seed; the high counter words carry the
/// stream (trial) index, so any trial's stream can be generated independently
/// of scheduling: seed + trial index fully determine the draws.
class Philox {
  public:
    using Block = std::array<std::uint32_t, 4>;

    Philox(std::uint64_t seed, std::uint64_t stream) {
        key_[0] = static_cast<std::uint32_t>(seed);
        key_[1] = static_cast<std::uint32_t>(seed >> 32);
        ctr_[0] = 0;
        ctr_[1] = 0;
        ctr_[2] = static_cast<std::uint32_t>(stream);
        ctr_[3] = static_cast<std::uint32_t>(stream >> 32);
    }

    static Block block(Block ctr, std::uint32_t k0, std::uint32_t k1) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            ctr = Block{hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
            k0 += kWey0;
            k1 += kWey1;
        }
        return ctr;
    }

    std::uint64_t next_u64() {
        if (have_ == 0) {
            const Block out = block(ctr_, key_[0], key_[1]);
            if (++ctr_[0] == 0) ++ctr_[1];
            buf_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
            buf_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
            have_ = 2;
        }
        return buf_[--have_];
    }

    /// Uniform double in the open interval (0,1).
    double next_double() {
        const std::uint64_t r = next_u64() >> 11;  // 53 bits
        return (static_cast<double>(r) + 0.5) * 0x1.0p-53;
    }

    /// Sample an index from the cumulative distribution (cdf[d-1] == 1).
    int next_categorical(const double* cdf, int d) {
        const double u = next_double();
        for (int i = 0; i < d - 1; ++i)
            if (u < cdf[i]) return i;
        return d - 1;
    }

    double next_gaussian(double mu, double sigma) {
        return mu + sigma * gaussian_quantile(next_double());
    }

  private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWey0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWey1 = 0xBB67AE85u;

    std::array<std::uint32_t, 2> key_{};
    Block ctr_{};
    std::uint64_t buf_[2] = {0, 0};
    int have_ = 0;
};

}  // namespace gsprt
