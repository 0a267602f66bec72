#pragma once

#include <array>
#include <cstdint>
#include <cstring>

#include "minihsm/bytes.hpp"
#include "minihsm/errors.hpp"

namespace minihsm {

inline constexpr std::size_t kAesBlockSize = 16;
inline constexpr int kAesRounds = 10;  // AES-128

using Block16 = std::array<std::uint8_t, 16>;

// 4x4 byte state. A 16-byte block fills the matrix column-major
// (byte i -> row i%4, column i/4), so the flat storage below is in
// block order and block<->state conversion is a plain copy.
struct AesState {
    std::array<std::uint8_t, 16> b{};

    std::uint8_t& at(int row, int col) { return b[static_cast<std::size_t>(col * 4 + row)]; }
    std::uint8_t at(int row, int col) const { return b[static_cast<std::size_t>(col * 4 + row)]; }

    static AesState from_block(const Block16& block) {
        AesState s;
        s.b = block;
        return s;
    }
    Block16 to_block() const { return b; }

    bool operator==(const AesState&) const = default;
};

struct AesKey128 {
    std::array<std::uint8_t, 16> bytes{};

    bool operator==(const AesKey128&) const = default;
};

// Round keys 0..10; entry 0 is the cipher key itself.
struct RoundKeySchedule {
    std::array<std::array<std::uint8_t, 16>, 11> round_keys{};
};

struct SBoxTable {
    std::array<std::uint8_t, 256> forward{};
    std::array<std::uint8_t, 256> inverse{};
};

struct MixColumnsMatrix {
    std::array<std::array<std::uint8_t, 4>, 4> forward{{{2, 3, 1, 1}, {1, 2, 3, 1}, {1, 1, 2, 3}, {3, 1, 1, 2}}};
    std::array<std::array<std::uint8_t, 4>, 4> inverse{{{14, 11, 13, 9}, {9, 14, 11, 13}, {13, 9, 14, 11}, {11, 13, 9, 14}}};
};

inline const MixColumnsMatrix& mix_columns_matrix() {
    static const MixColumnsMatrix m;
    return m;
}

// Multiplication in GF(2^8) modulo x^8 + x^4 + x^3 + x + 1.
constexpr std::uint8_t gf_mul(std::uint8_t a, std::uint8_t b) {
    std::uint8_t r = 0;
    std::uint8_t x = a;
    for (int i = 0; i < 8; ++i) {
        if (b & 1) r ^= x;
        const bool hi = (x & 0x80) != 0;
        x = static_cast<std::uint8_t>(x << 1);
        if (hi) x ^= 0x1B;
        b >>= 1;
    }
    return r;
}

// Forward table: multiplicative inverse in GF(2^8) followed by the
// affine transform with constant 0x63. Inverse table derived from it.
inline SBoxTable build_sbox() {
    SBoxTable t;
    // inverses via x^254 (Fermat in GF(2^8))
    auto gf_inverse = [](std::uint8_t a) -> std::uint8_t {
        if (a == 0) return 0;
        std::uint8_t result = 1;
        std::uint8_t base = a;
        int e = 254;
        while (e > 0) {
            if (e & 1) result = gf_mul(result, base);
            base = gf_mul(base, base);
            e >>= 1;
        }
        return result;
    };
    for (int x = 0; x < 256; ++x) {
        const std::uint8_t inv = gf_inverse(static_cast<std::uint8_t>(x));
        std::uint8_t y = 0;
        for (int i = 0; i < 8; ++i) {
            const int bit = ((inv >> i) ^ (inv >> ((i + 4) % 8)) ^ (inv >> ((i + 5) % 8)) ^
                             (inv >> ((i + 6) % 8)) ^ (inv >> ((i + 7) % 8)) ^ (0x63 >> i)) &
                            1;
            y = static_cast<std::uint8_t>(y | (bit << i));
        }
        t.forward[static_cast<std::size_t>(x)] = y;
        t.inverse[y] = static_cast<std::uint8_t>(x);
    }
    return t;
}

namespace detail {

inline const SBoxTable& sbox() {
    static const SBoxTable t = build_sbox();
    return t;
}

// byte-by-constant multiplication tables for the column mixes
struct GfTables {
    std::array<std::uint8_t, 256> m2, m3, m9, m11, m13, m14;
};

inline const GfTables& gf_tables() {
    static const GfTables t = [] {
        GfTables g;
        for (int x = 0; x < 256; ++x) {
            const auto b = static_cast<std::uint8_t>(x);
            g.m2[static_cast<std::size_t>(x)] = gf_mul(b, 2);
            g.m3[static_cast<std::size_t>(x)] = gf_mul(b, 3);
            g.m9[static_cast<std::size_t>(x)] = gf_mul(b, 9);
            g.m11[static_cast<std::size_t>(x)] = gf_mul(b, 11);
            g.m13[static_cast<std::size_t>(x)] = gf_mul(b, 13);
            g.m14[static_cast<std::size_t>(x)] = gf_mul(b, 14);
        }
        return g;
    }();
    return t;
}

}  // namespace detail

inline AesState add_round_key(AesState state, const std::array<std::uint8_t, 16>& round_key) {
    for (std::size_t i = 0; i < 16; ++i) state.b[i] ^= round_key[i];
    return state;
}

inline AesState sub_bytes(AesState state) {
    const auto& t = detail::sbox().forward;
    for (auto& v : state.b) v = t[v];
    return state;
}

inline AesState inv_sub_bytes(AesState state) {
    const auto& t = detail::sbox().inverse;
    for (auto& v : state.b) v = t[v];
    return state;
}

// Row r rotates left by r positions; row 0 stays put.
inline AesState shift_rows(const AesState& state) {
    AesState out;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) out.at(r, c) = state.at(r, (c + r) % 4);
    return out;
}

inline AesState inv_shift_rows(const AesState& state) {
    AesState out;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) out.at(r, (c + r) % 4) = state.at(r, c);
    return out;
}

// Column-wise product with the fixed forward matrix over GF(2^8).
inline AesState mix_columns(const AesState& state) {
    const auto& t = detail::gf_tables();
    AesState out;
    for (int c = 0; c < 4; ++c) {
        const std::uint8_t a0 = state.b[static_cast<std::size_t>(4 * c)];
        const std::uint8_t a1 = state.b[static_cast<std::size_t>(4 * c + 1)];
        const std::uint8_t a2 = state.b[static_cast<std::size_t>(4 * c + 2)];
        const std::uint8_t a3 = state.b[static_cast<std::size_t>(4 * c + 3)];
        out.b[static_cast<std::size_t>(4 * c)] = static_cast<std::uint8_t>(t.m2[a0] ^ t.m3[a1] ^ a2 ^ a3);
        out.b[static_cast<std::size_t>(4 * c + 1)] = static_cast<std::uint8_t>(a0 ^ t.m2[a1] ^ t.m3[a2] ^ a3);
        out.b[static_cast<std::size_t>(4 * c + 2)] = static_cast<std::uint8_t>(a0 ^ a1 ^ t.m2[a2] ^ t.m3[a3]);
        out.b[static_cast<std::size_t>(4 * c + 3)] = static_cast<std::uint8_t>(t.m3[a0] ^ a1 ^ a2 ^ t.m2[a3]);
    }
    return out;
}

inline AesState inv_mix_columns(const AesState& state) {
    const auto& t = detail::gf_tables();
    AesState out;
    for (int c = 0; c < 4; ++c) {
        const std::uint8_t a0 = state.b[static_cast<std::size_t>(4 * c)];
        const std::uint8_t a1 = state.b[static_cast<std::size_t>(4 * c + 1)];
        const std::uint8_t a2 = state.b[static_cast<std::size_t>(4 * c + 2)];
        const std::uint8_t a3 = state.b[static_cast<std::size_t>(4 * c + 3)];
        out.b[static_cast<std::size_t>(4 * c)] = static_cast<std::uint8_t>(t.m14[a0] ^ t.m11[a1] ^ t.m13[a2] ^ t.m9[a3]);
        out.b[static_cast<std::size_t>(4 * c + 1)] = static_cast<std::uint8_t>(t.m9[a0] ^ t.m14[a1] ^ t.m11[a2] ^ t.m13[a3]);
        out.b[static_cast<std::size_t>(4 * c + 2)] = static_cast<std::uint8_t>(t.m13[a0] ^ t.m9[a1] ^ t.m14[a2] ^ t.m11[a3]);
        out.b[static_cast<std::size_t>(4 * c + 3)] = static_cast<std::uint8_t>(t.m11[a0] ^ t.m13[a1] ^ t.m9[a2] ^ t.m14[a3]);
    }
    return out;
}

// AES-128 key expansion: RotWord + SubWord + Rcon every fourth word.
// Rcon values are powers of x in GF(2^8), computed rather than listed.
inline RoundKeySchedule expand_key(const AesKey128& key) {
    const auto& sb = detail::sbox().forward;
    RoundKeySchedule ks;
    std::array<std::array<std::uint8_t, 4>, 44> w;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = key.bytes[static_cast<std::size_t>(4 * i + j)];

    std::uint8_t rcon = 1;
    for (int i = 4; i < 44; ++i) {
        std::array<std::uint8_t, 4> t = w[static_cast<std::size_t>(i - 1)];
        if (i % 4 == 0) {
            const std::uint8_t first = t[0];
            t[0] = sb[t[1]];
            t[1] = sb[t[2]];
            t[2] = sb[t[3]];
            t[3] = sb[first];
            t[0] ^= rcon;
            rcon = gf_mul(rcon, 2);
        }
        for (int j = 0; j < 4; ++j) w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(w[static_cast<std::size_t>(i - 4)][static_cast<std::size_t>(j)] ^ t[static_cast<std::size_t>(j)]);
    }
    for (int r = 0; r <= kAesRounds; ++r)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                ks.round_keys[static_cast<std::size_t>(r)][static_cast<std::size_t>(4 * i + j)] = w[static_cast<std::size_t>(4 * r + i)][static_cast<std::size_t>(j)];
    return ks;
}

inline AesKey128 make_aes_key(ByteSpan bytes) {
    if (bytes.size() != 16) throw LengthError("AES-128 key must be 16 bytes");
    AesKey128 k;
    std::memcpy(k.bytes.data(), bytes.data(), 16);
    return k;
}

// Whole cipher: initial AddRoundKey, nine full rounds, final round
// without the column mix.
inline Block16 encrypt_block(const Block16& block, const RoundKeySchedule& ks) {
    AesState s = add_round_key(AesState::from_block(block), ks.round_keys[0]);
    for (int r = 1; r < kAesRounds; ++r) {
        s = add_round_key(mix_columns(shift_rows(sub_bytes(s))), ks.round_keys[static_cast<std::size_t>(r)]);
    }
    s = add_round_key(shift_rows(sub_bytes(s)), ks.round_keys[kAesRounds]);
    return s.to_block();
}

// Exact inverse, using the round keys untransformed: undo the final
// round, then nine rounds of InvShiftRows/InvSubBytes/AddRoundKey/
// InvMixColumns, then the initial key addition.
inline Block16 decrypt_block(const Block16& block, const RoundKeySchedule& ks) {
    AesState s = add_round_key(AesState::from_block(block), ks.round_keys[kAesRounds]);
    for (int r = kAesRounds - 1; r >= 1; --r) {
        s = inv_mix_columns(add_round_key(inv_sub_bytes(inv_shift_rows(s)), ks.round_keys[static_cast<std::size_t>(r)]));
    }
    s = add_round_key(inv_sub_bytes(inv_shift_rows(s)), ks.round_keys[0]);
    return s.to_block();
}

// ------------------------------------------------------------- padding

inline Bytes pkcs7_pad(ByteSpan data) {
    const std::size_t pad = kAesBlockSize - (data.size() % kAesBlockSize);
    Bytes out(data.begin(), data.end());
    out.insert(out.end(), pad, static_cast<std::uint8_t>(pad));
    return out;
}

inline Bytes pkcs7_unpad(ByteSpan data) {
    if (data.empty() || data.size() % kAesBlockSize != 0) throw PaddingError("padded data must be a nonzero multiple of 16 bytes");
    const std::uint8_t pad = data.back();
    if (pad < 1 || pad > kAesBlockSize) throw PaddingError();
    for (std::size_t i = data.size() - pad; i < data.size(); ++i)
        if (data[i] != pad) throw PaddingError();
    return Bytes(data.begin(), data.end() - pad);
}

// ------------------------------------------------------------ CBC mode

// Incremental CBC encryptor with PKCS#7 termination. update() may be fed
// arbitrary chunk sizes; finish() emits the final padded block(s).
class CbcEncryptor {
  public:
    CbcEncryptor(const AesKey128& key, const Block16& iv) : ks_(expand_key(key)), prev_(iv) {}

    void update(ByteSpan chunk, Bytes& out) {
        for (std::uint8_t byte : chunk) {
            pending_[pending_len_++] = byte;
            if (pending_len_ == kAesBlockSize) {
                emit_block(out);
            }
        }
    }

    void finish(Bytes& out) {
        const std::uint8_t pad = static_cast<std::uint8_t>(kAesBlockSize - pending_len_);
        while (pending_len_ < kAesBlockSize) pending_[pending_len_++] = pad;
        emit_block(out);
    }

  private:
    void emit_block(Bytes& out) {
        for (std::size_t i = 0; i < kAesBlockSize; ++i) prev_[i] ^= pending_[i];
        prev_ = encrypt_block(prev_, ks_);
        out.insert(out.end(), prev_.begin(), prev_.end());
        pending_len_ = 0;
    }

    RoundKeySchedule ks_;
    Block16 prev_;
    Block16 pending_{};
    std::size_t pending_len_ = 0;
};

// Incremental CBC decryptor. Holds the last full block back until
// finish() so the padding can be stripped.
class CbcDecryptor {
  public:
    CbcDecryptor(const AesKey128& key, const Block16& iv) : ks_(expand_key(key)), prev_(iv) {}

    void update(ByteSpan chunk, Bytes& out) {
        for (std::uint8_t byte : chunk) {
            pending_[pending_len_++] = byte;
            if (pending_len_ == kAesBlockSize) {
                if (have_held_) flush_held(out);
                held_ = decrypt_one(pending_);
                have_held_ = true;
                pending_len_ = 0;
            }
        }
    }

    void finish(Bytes& out) {
        if (pending_len_ != 0 || !have_held_) throw LengthError("ciphertext length not a nonzero multiple of 16 bytes");
        const Bytes tail = pkcs7_unpad(ByteSpan(held_.data(), held_.size()));
        out.insert(out.end(), tail.begin(), tail.end());
        have_held_ = false;
    }

  private:
    Block16 decrypt_one(const Block16& ct) {
        Block16 pt = decrypt_block(ct, ks_);
        for (std::size_t i = 0; i < kAesBlockSize; ++i) pt[i] ^= prev_[i];
        prev_ = ct;
        return pt;
    }

    void flush_held(Bytes& out) { out.insert(out.end(), held_.begin(), held_.end()); }

    RoundKeySchedule ks_;
    Block16 prev_;
    Block16 pending_{};
    std::size_t pending_len_ = 0;
    Block16 held_{};
    bool have_held_ = false;
};

inline Bytes cbc_encrypt(ByteSpan plaintext, const AesKey128& key, const Block16& iv) {
    Bytes out;
    out.reserve(plaintext.size() + kAesBlockSize);
    CbcEncryptor enc(key, iv);
    enc.update(plaintext, out);
    enc.finish(out);
    return out;
}

inline Bytes cbc_decrypt(ByteSpan ciphertext, const AesKey128& key, const Block16& iv) {
    if (ciphertext.empty() || ciphertext.size() % kAesBlockSize != 0)
        throw LengthError("ciphertext length not a nonzero multiple of 16 bytes");
    Bytes out;
    out.reserve(ciphertext.size());
    CbcDecryptor dec(key, iv);
    dec.update(ciphertext, out);
    dec.finish(out);
    return out;
}

}  // namespace minihsm
