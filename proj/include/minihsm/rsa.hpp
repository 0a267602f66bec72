#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "minihsm/aes.hpp"
#include "minihsm/bigint.hpp"
#include "minihsm/bytes.hpp"
#include "minihsm/errors.hpp"
#include "minihsm/rng.hpp"

namespace minihsm {

struct RsaPublicKey {
    BigUint n;  // modulus
    BigUint e;  // public exponent

    std::size_t modulus_bytes() const { return n.byte_length(); }
    bool operator==(const RsaPublicKey&) const = default;
};

struct RsaPrivateKey {
    BigUint n;
    BigUint e;
    BigUint d;    // private exponent
    BigUint p;
    BigUint q;
    BigUint phi;  // (p-1)(q-1)

    RsaPublicKey public_key() const { return RsaPublicKey{n, e}; }
    bool operator==(const RsaPrivateKey&) const = default;
};

struct PemBlock {
    std::string label;
    Bytes payload;
};

// ------------------------------------------------------- modular math

inline BigUint mod_exp(const BigUint& base, const BigUint& exp, const BigUint& modulus) {
    if (modulus <= BigUint(1)) throw InvalidModulus();
    BigUint result(1);
    BigUint b = base % modulus;
    const std::size_t nbits = exp.bit_length();
    for (std::size_t i = 0; i < nbits; ++i) {
        if (exp.bit(i)) result = (result * b) % modulus;
        b = (b * b) % modulus;
    }
    return result;
}

inline BigUint gcd(BigUint a, BigUint b) {
    while (!b.is_zero()) {
        BigUint r = a % b;
        a = std::move(b);
        b = std::move(r);
    }
    return a;
}

// Smallest x with (a*x) mod m = 1. Extended Euclid with coefficients
// tracked modulo m, so no signed intermediates are needed.
inline BigUint mod_inverse(const BigUint& a, const BigUint& m) {
    if (m <= BigUint(1)) throw InvalidModulus();
    BigUint r0 = m;
    BigUint r1 = a % m;
    BigUint t0;       // 0
    BigUint t1(1);
    while (!r1.is_zero()) {
        auto [quot, rem] = BigUint::divmod(r0, r1);
        r0 = std::move(r1);
        r1 = std::move(rem);
        const BigUint qt = (quot * t1) % m;
        BigUint t2 = (t0 >= qt) ? (t0 - qt) : (t0 + m - qt);
        t0 = std::move(t1);
        t1 = std::move(t2);
    }
    if (!(r0 == BigUint(1))) throw NotInvertible();
    return t0;
}

namespace detail {

// uniform in [0, bound) by rejection
inline BigUint random_below(const BigUint& bound, Rng& rng) {
    const std::size_t bits = bound.bit_length();
    const std::size_t nbytes = (bits + 7) / 8;
    const unsigned top_mask = bits % 8 ? static_cast<unsigned>((1u << (bits % 8)) - 1) : 0xFFu;
    for (;;) {
        Bytes buf = rng.bytes(nbytes);
        buf[0] &= static_cast<std::uint8_t>(top_mask);
        BigUint candidate = BigUint::from_bytes_be(as_span(buf));
        if (candidate < bound) return candidate;
    }
}

inline const std::vector<std::uint32_t>& small_primes() {
    static const std::vector<std::uint32_t> primes = [] {
        std::vector<std::uint32_t> out;
        std::vector<bool> composite(2000, false);
        for (std::uint32_t i = 2; i < composite.size(); ++i) {
            if (composite[i]) continue;
            out.push_back(i);
            for (std::uint32_t j = i * i; j < composite.size(); j += i) composite[j] = true;
        }
        return out;
    }();
    return primes;
}

}  // namespace detail

// Miller-Rabin. A false result is certain; a true result is wrong with
// probability at most 4^-rounds. The first two witnesses are fixed to
// 2 and 3 (making answers exact below 1,373,653); the rest come from
// the supplied generator.
inline bool is_probable_prime(const BigUint& n, int rounds, Rng& rng) {
    if (n < BigUint(2)) return false;
    for (std::uint32_t p : detail::small_primes()) {
        const BigUint bp(p);
        if (n == bp) return true;
        if ((n % bp).is_zero()) return false;
        if (bp * bp > n) return true;
    }

    const BigUint one(1);
    const BigUint n_minus_1 = n - one;
    BigUint d = n_minus_1;
    std::size_t s = 0;
    while (!d.is_odd()) {
        d = d >> 1;
        ++s;
    }

    for (int round = 0; round < rounds; ++round) {
        BigUint a;
        if (round == 0) a = BigUint(2);
        else if (round == 1) a = BigUint(3);
        else a = BigUint(2) + detail::random_below(n - BigUint(4), rng);  // [2, n-2]
        BigUint x = mod_exp(a, d, n);
        if (x == one || x == n_minus_1) continue;
        bool witness = true;
        for (std::size_t i = 1; i < s; ++i) {
            x = (x * x) % n;
            if (x == n_minus_1) {
                witness = false;
                break;
            }
        }
        if (witness) return false;
    }
    return true;
}

namespace detail {

inline BigUint random_prime(std::size_t bits, Rng& rng, int mr_rounds = 40) {
    // bits is a multiple of 8 for every supported modulus size
    for (;;) {
        Bytes buf = rng.bytes(bits / 8);
        buf[0] |= 0xC0;  // top two bits set: product of two such primes has exactly 2*bits bits
        buf[bits / 8 - 1] |= 0x01;
        const BigUint candidate = BigUint::from_bytes_be(as_span(buf));
        if (is_probable_prime(candidate, mr_rounds, rng)) return candidate;
    }
}

}  // namespace detail

// Fresh keypair with both primes of bits/2 and a modulus of exactly
// `bits` bits. Deterministic for a seeded generator.
inline std::pair<RsaPublicKey, RsaPrivateKey> generate_keypair(std::size_t bits, Rng& rng,
                                                               std::uint64_t public_exponent = 65537) {
    if (bits != 512 && bits != 1024 && bits != 2048 && bits != 3072 && bits != 4096)
        throw std::invalid_argument("modulus size must be one of 512/1024/2048/3072/4096");
    const BigUint e(public_exponent);
    if (!e.is_odd() || e <= BigUint(1)) throw std::invalid_argument("public exponent must be odd and > 1");

    const BigUint one(1);
    for (int attempt = 0; attempt < 64; ++attempt) {
        BigUint p = detail::random_prime(bits / 2, rng);
        BigUint q = detail::random_prime(bits / 2, rng);
        if (p == q) continue;
        const BigUint phi = (p - one) * (q - one);
        if (!(gcd(e, phi) == one)) continue;  // exponent clash: fresh primes
        const BigUint n = p * q;
        const BigUint d = mod_inverse(e, phi);
        return {RsaPublicKey{n, e}, RsaPrivateKey{n, e, d, p, q, phi}};
    }
    throw ExponentClash("could not find primes coprime to the public exponent");
}

// ---------------------------------------------------- RSA primitives

inline BigUint rsa_encrypt_int(const BigUint& m, const RsaPublicKey& pub) {
    if (m >= pub.n) throw MessageTooLarge();
    return mod_exp(m, pub.e, pub.n);
}

inline BigUint rsa_decrypt_int(const BigUint& c, const RsaPrivateKey& priv) {
    if (c >= priv.n) throw MessageTooLarge();
    return mod_exp(c, priv.d, priv.n);
}

// ------------------------------------------------------- key wrapping

inline constexpr std::size_t kWrapPayloadSize = 16;  // an AES-128 key
inline constexpr std::size_t kWrapMinPadding = 11;   // 00 02 PS(>=8) 00

// Encryption block 0x00 || 0x02 || nonzero random PS || 0x00 || key,
// then the RSA primitive; output is exactly the modulus byte length.
inline Bytes wrap_key(const AesKey128& key, const RsaPublicKey& pub, Rng& rng) {
    const std::size_t k = pub.modulus_bytes();
    if (k < kWrapPayloadSize + kWrapMinPadding) throw KeyTooLargeForModulus();
    Bytes eb;
    eb.reserve(k);
    eb.push_back(0x00);
    eb.push_back(0x02);
    const std::size_t ps_len = k - 3 - kWrapPayloadSize;
    while (eb.size() < 2 + ps_len) {
        const std::uint8_t b = rng.bytes(1)[0];
        if (b != 0) eb.push_back(b);
    }
    eb.push_back(0x00);
    eb.insert(eb.end(), key.bytes.begin(), key.bytes.end());

    const BigUint m = BigUint::from_bytes_be(as_span(eb));
    return rsa_encrypt_int(m, pub).to_bytes_be(k);
}

inline AesKey128 unwrap_key(ByteSpan wrapped, const RsaPrivateKey& priv) {
    const std::size_t k = priv.n.byte_length();
    if (wrapped.size() != k) throw PaddingError("wrapped key has wrong length for modulus");
    const BigUint c = BigUint::from_bytes_be(wrapped);
    if (c >= priv.n) throw PaddingError("wrapped key value out of range");
    const Bytes eb = rsa_decrypt_int(c, priv).to_bytes_be(k);

    if (eb.size() < kWrapPayloadSize + kWrapMinPadding || eb[0] != 0x00 || eb[1] != 0x02)
        throw PaddingError();
    std::size_t sep = 2;
    while (sep < eb.size() && eb[sep] != 0x00) ++sep;
    if (sep == eb.size() || sep - 2 < 8) throw PaddingError();
    if (eb.size() - sep - 1 != kWrapPayloadSize) throw PaddingError();

    AesKey128 out;
    std::memcpy(out.bytes.data(), eb.data() + sep + 1, kWrapPayloadSize);
    return out;
}

// ---------------------------------------------------------------- PEM

inline constexpr std::string_view kPemPublicLabel = "MINIHSM RSA PUBLIC KEY";
inline constexpr std::string_view kPemPrivateLabel = "MINIHSM RSA PRIVATE KEY";

namespace detail {

inline constexpr char kPemMagic[4] = {'R', 'S', 'A', 'K'};
inline constexpr std::uint16_t kPemVersion = 1;
inline constexpr std::uint8_t kPemTypePublic = 0;
inline constexpr std::uint8_t kPemTypePrivate = 1;

inline void put_integer(Bytes& out, const BigUint& v) {
    const Bytes mag = v.to_bytes_be();
    put_u32_be(out, static_cast<std::uint32_t>(mag.size()));
    put_bytes(out, as_span(mag));
}

inline Bytes pem_payload(std::uint8_t type, std::initializer_list<const BigUint*> ints) {
    Bytes out;
    out.insert(out.end(), kPemMagic, kPemMagic + 4);
    put_u16_be(out, kPemVersion);
    put_u8(out, type);
    for (const BigUint* v : ints) put_integer(out, *v);
    return out;
}

struct PemPayloadView {
    std::uint8_t type;
    std::vector<BigUint> integers;
};

inline PemPayloadView parse_pem_payload(ByteSpan payload) {
    ByteReader r(payload);
    try {
        const Bytes magic = r.take(4);
        if (std::memcmp(magic.data(), kPemMagic, 4) != 0) throw PemMagic();
        if (r.u16_be() != kPemVersion) throw PemSyntax("unsupported payload version");
        PemPayloadView out;
        out.type = r.u8();
        while (!r.done()) {
            const std::uint32_t len = r.u32_be();
            out.integers.push_back(BigUint::from_bytes_be(as_span(r.take(len))));
        }
        return out;
    } catch (const std::out_of_range&) {
        throw PemSyntax("payload truncated");
    }
}

inline std::string armor(std::string_view label, ByteSpan payload) {
    std::string out = "-----BEGIN ";
    out += label;
    out += "-----\n";
    const std::string b64 = base64_encode(payload);
    for (std::size_t i = 0; i < b64.size(); i += 64) {
        out += b64.substr(i, 64);
        out += '\n';
    }
    out += "-----END ";
    out += label;
    out += "-----\n";
    return out;
}

}  // namespace detail

inline Bytes public_pem_payload(const RsaPublicKey& k) {
    return detail::pem_payload(detail::kPemTypePublic, {&k.n, &k.e});
}

inline Bytes private_pem_payload(const RsaPrivateKey& k) {
    return detail::pem_payload(detail::kPemTypePrivate, {&k.n, &k.e, &k.d, &k.p, &k.q});
}

inline std::string encode_pem(const RsaPublicKey& k) {
    return detail::armor(kPemPublicLabel, as_span(public_pem_payload(k)));
}

inline std::string encode_pem(const RsaPrivateKey& k) {
    return detail::armor(kPemPrivateLabel, as_span(private_pem_payload(k)));
}

// Strips the armor, checks the label pair matches, and base64-decodes
// the body. Whitespace between lines is tolerated.
inline PemBlock parse_pem_block(std::string_view text) {
    const auto begin_pos = text.find("-----BEGIN ");
    if (begin_pos == std::string_view::npos) throw PemSyntax("missing BEGIN armor");
    const auto begin_label_start = begin_pos + 11;
    const auto begin_label_end = text.find("-----", begin_label_start);
    if (begin_label_end == std::string_view::npos) throw PemSyntax("malformed BEGIN armor");
    const std::string label(text.substr(begin_label_start, begin_label_end - begin_label_start));

    const std::string end_marker = "-----END " + label + "-----";
    const auto end_pos = text.find(end_marker, begin_label_end);
    if (end_pos == std::string_view::npos) throw PemSyntax("missing matching END armor");

    std::string body;
    for (char c : text.substr(begin_label_end + 5, end_pos - begin_label_end - 5)) {
        if (c == '\n' || c == '\r' || c == ' ' || c == '\t') continue;
        body.push_back(c);
    }
    Bytes payload;
    try {
        payload = base64_decode(body);
    } catch (const std::invalid_argument& e) {
        throw PemSyntax(e.what());
    }
    if (payload.size() < 4 || std::memcmp(payload.data(), detail::kPemMagic, 4) != 0) throw PemMagic();
    return PemBlock{label, std::move(payload)};
}

inline RsaPublicKey decode_public_payload(ByteSpan payload) {
    const auto view = detail::parse_pem_payload(payload);
    if (view.type != detail::kPemTypePublic) throw PemType("expected a public key");
    if (view.integers.size() != 2) throw PemSyntax("public payload must hold [n, e]");
    return RsaPublicKey{view.integers[0], view.integers[1]};
}

inline RsaPrivateKey decode_private_payload(ByteSpan payload) {
    const auto view = detail::parse_pem_payload(payload);
    if (view.type != detail::kPemTypePrivate) throw PemType("expected a private key");
    if (view.integers.size() != 5) throw PemSyntax("private payload must hold [n, e, d, p, q]");
    RsaPrivateKey k;
    k.n = view.integers[0];
    k.e = view.integers[1];
    k.d = view.integers[2];
    k.p = view.integers[3];
    k.q = view.integers[4];
    k.phi = (k.p - BigUint(1)) * (k.q - BigUint(1));
    return k;
}

inline RsaPublicKey decode_public_pem(std::string_view text) {
    const PemBlock block = parse_pem_block(text);
    if (block.label != kPemPublicLabel) throw PemType("expected a public key block");
    return decode_public_payload(as_span(block.payload));
}

inline RsaPrivateKey decode_private_pem(std::string_view text) {
    const PemBlock block = parse_pem_block(text);
    if (block.label != kPemPrivateLabel) throw PemType("expected a private key block");
    return decode_private_payload(as_span(block.payload));
}

}  // namespace minihsm
