#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "minihsm/bytes.hpp"

namespace minihsm {

// Arbitrary-precision unsigned integer on 32-bit limbs (little-endian,
// normalized: no leading zero limbs, zero is the empty vector). Just the
// operations the RSA layer needs; no signed arithmetic.
class BigUint {
  public:
    BigUint() = default;

    BigUint(std::uint64_t v) {  // NOLINT(google-explicit-constructor)
        if (v != 0) limbs_.push_back(static_cast<std::uint32_t>(v));
        if (v >> 32) limbs_.push_back(static_cast<std::uint32_t>(v >> 32));
    }

    static BigUint from_hex(std::string_view hex) {
        BigUint out;
        for (char c : hex) {
            int d;
            if (c >= '0' && c <= '9') d = c - '0';
            else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
            else throw std::invalid_argument("invalid hex digit");
            out = (out << 4) + BigUint(static_cast<std::uint64_t>(d));
        }
        return out;
    }

    // big-endian magnitude, most significant byte first
    static BigUint from_bytes_be(ByteSpan bytes) {
        BigUint out;
        out.limbs_.assign((bytes.size() + 3) / 4, 0);
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            const std::size_t bit_pos = (bytes.size() - 1 - i) * 8;
            out.limbs_[bit_pos / 32] |= static_cast<std::uint32_t>(bytes[i]) << (bit_pos % 32);
        }
        out.normalize();
        return out;
    }

    // Minimal-length big-endian encoding; zero encodes as empty.
    Bytes to_bytes_be() const {
        Bytes out;
        const std::size_t n = byte_length();
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t bit_pos = (n - 1 - i) * 8;
            out[i] = static_cast<std::uint8_t>(limbs_[bit_pos / 32] >> (bit_pos % 32));
        }
        return out;
    }

    // Fixed-width big-endian encoding, left-padded with zeros.
    Bytes to_bytes_be(std::size_t width) const {
        Bytes minimal = to_bytes_be();
        if (minimal.size() > width) throw std::length_error("value does not fit requested width");
        Bytes out(width - minimal.size(), 0);
        out.insert(out.end(), minimal.begin(), minimal.end());
        return out;
    }

    std::string to_hex() const {
        if (is_zero()) return "0";
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        bool started = false;
        for (std::size_t i = limbs_.size(); i-- > 0;) {
            for (int s = 28; s >= 0; s -= 4) {
                const unsigned d = (limbs_[i] >> s) & 0xF;
                if (!started && d == 0) continue;
                started = true;
                out.push_back(digits[d]);
            }
        }
        return out;
    }

    bool is_zero() const { return limbs_.empty(); }
    bool is_odd() const { return !limbs_.empty() && (limbs_[0] & 1); }

    std::size_t bit_length() const {
        if (limbs_.empty()) return 0;
        return (limbs_.size() - 1) * 32 + (32 - static_cast<std::size_t>(std::countl_zero(limbs_.back())));
    }

    std::size_t byte_length() const { return (bit_length() + 7) / 8; }

    bool bit(std::size_t i) const {
        const std::size_t limb = i / 32;
        if (limb >= limbs_.size()) return false;
        return (limbs_[limb] >> (i % 32)) & 1;
    }

    std::uint64_t to_u64() const {
        std::uint64_t v = 0;
        if (limbs_.size() > 2) throw std::length_error("value exceeds 64 bits");
        if (limbs_.size() > 1) v = static_cast<std::uint64_t>(limbs_[1]) << 32;
        if (!limbs_.empty()) v |= limbs_[0];
        return v;
    }

    friend std::strong_ordering operator<=>(const BigUint& a, const BigUint& b) {
        if (a.limbs_.size() != b.limbs_.size()) return a.limbs_.size() <=> b.limbs_.size();
        for (std::size_t i = a.limbs_.size(); i-- > 0;) {
            if (a.limbs_[i] != b.limbs_[i]) return a.limbs_[i] <=> b.limbs_[i];
        }
        return std::strong_ordering::equal;
    }
    friend bool operator==(const BigUint& a, const BigUint& b) { return a.limbs_ == b.limbs_; }

    friend BigUint operator+(const BigUint& a, const BigUint& b) {
        BigUint out;
        const std::size_t n = std::max(a.limbs_.size(), b.limbs_.size());
        out.limbs_.resize(n + 1, 0);
        std::uint64_t carry = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t s = carry;
            if (i < a.limbs_.size()) s += a.limbs_[i];
            if (i < b.limbs_.size()) s += b.limbs_[i];
            out.limbs_[i] = static_cast<std::uint32_t>(s);
            carry = s >> 32;
        }
        out.limbs_[n] = static_cast<std::uint32_t>(carry);
        out.normalize();
        return out;
    }

    // requires a >= b
    friend BigUint operator-(const BigUint& a, const BigUint& b) {
        if (a < b) throw std::underflow_error("BigUint subtraction underflow");
        BigUint out;
        out.limbs_.resize(a.limbs_.size(), 0);
        std::int64_t borrow = 0;
        for (std::size_t i = 0; i < a.limbs_.size(); ++i) {
            std::int64_t d = static_cast<std::int64_t>(a.limbs_[i]) - borrow;
            if (i < b.limbs_.size()) d -= b.limbs_[i];
            if (d < 0) {
                d += (1LL << 32);
                borrow = 1;
            } else {
                borrow = 0;
            }
            out.limbs_[i] = static_cast<std::uint32_t>(d);
        }
        out.normalize();
        return out;
    }

    friend BigUint operator*(const BigUint& a, const BigUint& b) {
        if (a.is_zero() || b.is_zero()) return BigUint();
        BigUint out;
        out.limbs_.assign(a.limbs_.size() + b.limbs_.size(), 0);
        for (std::size_t i = 0; i < a.limbs_.size(); ++i) {
            std::uint64_t carry = 0;
            const std::uint64_t ai = a.limbs_[i];
            for (std::size_t j = 0; j < b.limbs_.size(); ++j) {
                const std::uint64_t cur = out.limbs_[i + j] + ai * b.limbs_[j] + carry;
                out.limbs_[i + j] = static_cast<std::uint32_t>(cur);
                carry = cur >> 32;
            }
            out.limbs_[i + b.limbs_.size()] += static_cast<std::uint32_t>(carry);
        }
        out.normalize();
        return out;
    }

    BigUint operator<<(std::size_t bits) const {
        if (is_zero()) return BigUint();
        const std::size_t limb_shift = bits / 32;
        const unsigned bit_shift = static_cast<unsigned>(bits % 32);
        BigUint out;
        out.limbs_.assign(limbs_.size() + limb_shift + 1, 0);
        for (std::size_t i = 0; i < limbs_.size(); ++i) {
            out.limbs_[i + limb_shift] |= limbs_[i] << bit_shift;
            if (bit_shift != 0) out.limbs_[i + limb_shift + 1] |= limbs_[i] >> (32 - bit_shift);
        }
        out.normalize();
        return out;
    }

    BigUint operator>>(std::size_t bits) const {
        const std::size_t limb_shift = bits / 32;
        if (limb_shift >= limbs_.size()) return BigUint();
        const unsigned bit_shift = static_cast<unsigned>(bits % 32);
        BigUint out;
        out.limbs_.assign(limbs_.size() - limb_shift, 0);
        for (std::size_t i = 0; i < out.limbs_.size(); ++i) {
            out.limbs_[i] = limbs_[i + limb_shift] >> bit_shift;
            if (bit_shift != 0 && i + limb_shift + 1 < limbs_.size())
                out.limbs_[i] |= limbs_[i + limb_shift + 1] << (32 - bit_shift);
        }
        out.normalize();
        return out;
    }

    // Knuth algorithm D; returns {quotient, remainder}.
    static std::pair<BigUint, BigUint> divmod(const BigUint& a, const BigUint& b) {
        if (b.is_zero()) throw std::domain_error("division by zero");
        if (a < b) return {BigUint(), a};
        const std::size_t n = b.limbs_.size();
        if (n == 1) {
            const std::uint64_t d = b.limbs_[0];
            std::uint64_t rem = 0;
            BigUint q;
            q.limbs_.resize(a.limbs_.size());
            for (std::size_t i = a.limbs_.size(); i-- > 0;) {
                const std::uint64_t cur = (rem << 32) | a.limbs_[i];
                q.limbs_[i] = static_cast<std::uint32_t>(cur / d);
                rem = cur % d;
            }
            q.normalize();
            return {q, BigUint(rem)};
        }

        const unsigned s = static_cast<unsigned>(std::countl_zero(b.limbs_.back()));
        std::vector<std::uint32_t> v(n);
        for (std::size_t i = n; i-- > 1;)
            v[i] = (b.limbs_[i] << s) | (s ? (b.limbs_[i - 1] >> (32 - s)) : 0);
        v[0] = b.limbs_[0] << s;

        const std::size_t ul = a.limbs_.size();
        std::vector<std::uint32_t> u(ul + 1);
        u[ul] = s ? (a.limbs_.back() >> (32 - s)) : 0;
        for (std::size_t i = ul; i-- > 1;)
            u[i] = (a.limbs_[i] << s) | (s ? (a.limbs_[i - 1] >> (32 - s)) : 0);
        u[0] = a.limbs_[0] << s;

        const std::size_t m = ul - n;
        BigUint q;
        q.limbs_.assign(m + 1, 0);
        constexpr std::uint64_t kBase = 1ULL << 32;

        for (std::size_t j = m + 1; j-- > 0;) {
            const std::uint64_t num = (static_cast<std::uint64_t>(u[j + n]) << 32) | u[j + n - 1];
            std::uint64_t qhat = num / v[n - 1];
            std::uint64_t rhat = num % v[n - 1];
            while (qhat >= kBase ||
                   qhat * v[n - 2] > ((rhat << 32) | u[j + n - 2])) {
                --qhat;
                rhat += v[n - 1];
                if (rhat >= kBase) break;
            }

            // multiply-subtract qhat*v from u[j..j+n]
            std::int64_t k = 0;
            std::int64_t t = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint64_t p = qhat * v[i];
                t = static_cast<std::int64_t>(u[i + j]) - k - static_cast<std::int64_t>(p & 0xFFFFFFFFULL);
                u[i + j] = static_cast<std::uint32_t>(t);
                k = static_cast<std::int64_t>(p >> 32) - (t >> 32);
            }
            t = static_cast<std::int64_t>(u[j + n]) - k;
            u[j + n] = static_cast<std::uint32_t>(t);

            q.limbs_[j] = static_cast<std::uint32_t>(qhat);
            if (t < 0) {  // overshot by one: add the divisor back
                --q.limbs_[j];
                std::uint64_t carry = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const std::uint64_t sum = static_cast<std::uint64_t>(u[i + j]) + v[i] + carry;
                    u[i + j] = static_cast<std::uint32_t>(sum);
                    carry = sum >> 32;
                }
                u[j + n] += static_cast<std::uint32_t>(carry);
            }
        }

        BigUint r;
        r.limbs_.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            r.limbs_[i] = u[i] >> s;
            if (s != 0 && i + 1 < u.size()) r.limbs_[i] |= u[i + 1] << (32 - s);
        }
        q.normalize();
        r.normalize();
        return {q, r};
    }

    friend BigUint operator/(const BigUint& a, const BigUint& b) { return divmod(a, b).first; }
    friend BigUint operator%(const BigUint& a, const BigUint& b) { return divmod(a, b).second; }

  private:
    void normalize() {
        while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
    }

    std::vector<std::uint32_t> limbs_;
};

}  // namespace minihsm
