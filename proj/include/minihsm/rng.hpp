#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>

#include "minihsm/bytes.hpp"
#include "minihsm/errors.hpp"
#include "minihsm/sha256.hpp"

namespace minihsm {

// Byte source for all randomness in the library. Default-constructed it
// draws from the OS; constructed with a seed it becomes a deterministic
// SHA-256 counter stream, which is what makes keygen, seal and decoy
// generation reproducible in tests and under the CLI --seed flag.
class Rng {
  public:
    Rng() : deterministic_(false) {}

    explicit Rng(std::uint64_t seed) : deterministic_(true) {
        Bytes s;
        put_u64_be(s, seed);
        seed_ = sha256(as_span(s));
        counter_ = 0;
        avail_ = 0;
    }

    void fill(std::uint8_t* out, std::size_t n) {
        if (deterministic_) {
            fill_deterministic(out, n);
        } else {
            fill_system(out, n);
        }
    }

    Bytes bytes(std::size_t n) {
        Bytes out(n);
        if (n > 0) fill(out.data(), n);
        return out;
    }

    template <std::size_t N>
    std::array<std::uint8_t, N> array() {
        std::array<std::uint8_t, N> out;
        fill(out.data(), N);
        return out;
    }

    std::uint64_t next_u64() {
        std::uint8_t b[8];
        fill(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | b[i];
        return v;
    }

    bool deterministic() const { return deterministic_; }

  private:
    void fill_deterministic(std::uint8_t* out, std::size_t n) {
        while (n > 0) {
            if (avail_ == 0) {
                Bytes block(seed_.begin(), seed_.end());
                put_u64_be(block, counter_++);
                block_ = sha256(as_span(block));
                avail_ = block_.size();
            }
            const std::size_t take = n < avail_ ? n : avail_;
            std::memcpy(out, block_.data() + (block_.size() - avail_), take);
            avail_ -= take;
            out += take;
            n -= take;
        }
    }

    void fill_system(std::uint8_t* out, std::size_t n) {
        std::FILE* f = std::fopen("/dev/urandom", "rb");
        if (f == nullptr) throw IoError("cannot open /dev/urandom");
        const std::size_t got = std::fread(out, 1, n, f);
        std::fclose(f);
        if (got != n) throw IoError("short read from /dev/urandom");
    }

    bool deterministic_;
    Digest256 seed_{};
    Digest256 block_{};
    std::uint64_t counter_ = 0;
    std::size_t avail_ = 0;
};

}  // namespace minihsm
