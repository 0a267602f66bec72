#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "minihsm/aes.hpp"
#include "minihsm/bytes.hpp"
#include "minihsm/errors.hpp"
#include "minihsm/rng.hpp"
#include "minihsm/rsa.hpp"
#include "minihsm/sha256.hpp"

namespace minihsm {

// Hybrid ciphertext: the payload is encrypted under a fresh AES-128 key
// in CBC mode, and that key travels RSA-wrapped for one recipient. The
// plaintext digest makes round-trip integrity checkable after open().
struct Envelope {
    Digest256 recipient_fingerprint{};  // SHA-256 of the recipient's public PEM payload
    Bytes wrapped_key;                  // exactly the recipient modulus byte length
    Block16 iv{};
    Digest256 plaintext_digest{};
    Bytes ciphertext;                   // nonzero multiple of 16 bytes

    bool operator==(const Envelope&) const = default;
};

inline constexpr char kEnvelopeMagic[4] = {'H', 'E', 'N', 'V'};
inline constexpr std::uint16_t kEnvelopeVersion = 1;

// magic + version + fingerprint + wrapped_key_len + iv + digest + ciphertext_len
inline std::size_t envelope_header_size(std::size_t wrapped_key_len) {
    return 4 + 2 + 32 + 2 + wrapped_key_len + 16 + 32 + 8;
}

inline Digest256 key_fingerprint(const RsaPublicKey& pub) {
    return sha256(as_span(public_pem_payload(pub)));
}

inline Envelope seal(ByteSpan plaintext, const RsaPublicKey& recipient, Rng& rng) {
    Envelope env;
    env.recipient_fingerprint = key_fingerprint(recipient);
    AesKey128 key;
    rng.fill(key.bytes.data(), key.bytes.size());
    rng.fill(env.iv.data(), env.iv.size());
    env.wrapped_key = wrap_key(key, recipient, rng);
    env.plaintext_digest = sha256(plaintext);
    env.ciphertext = cbc_encrypt(plaintext, key, env.iv);
    secure_wipe(key.bytes.data(), key.bytes.size());
    return env;
}

inline Bytes open(const Envelope& env, const RsaPrivateKey& priv) {
    AesKey128 key;
    try {
        key = unwrap_key(as_span(env.wrapped_key), priv);
    } catch (const PaddingError&) {
        throw WrongKey();
    }
    Bytes plaintext;
    try {
        plaintext = cbc_decrypt(as_span(env.ciphertext), key, env.iv);
    } catch (const PaddingError&) {
        secure_wipe(key.bytes.data(), key.bytes.size());
        throw CorruptCiphertext();
    } catch (const LengthError&) {
        secure_wipe(key.bytes.data(), key.bytes.size());
        throw CorruptCiphertext("ciphertext length invalid");
    }
    secure_wipe(key.bytes.data(), key.bytes.size());
    if (!ct_equal(ByteSpan(env.plaintext_digest.data(), 32), ByteSpan(sha256(as_span(plaintext)).data(), 32)))
        throw DigestMismatch();
    return plaintext;
}

inline Bytes encode_envelope(const Envelope& env) {
    Bytes out;
    out.reserve(envelope_header_size(env.wrapped_key.size()) + env.ciphertext.size());
    out.insert(out.end(), kEnvelopeMagic, kEnvelopeMagic + 4);
    put_u16_be(out, kEnvelopeVersion);
    put_bytes(out, ByteSpan(env.recipient_fingerprint.data(), 32));
    put_u16_be(out, static_cast<std::uint16_t>(env.wrapped_key.size()));
    put_bytes(out, as_span(env.wrapped_key));
    put_bytes(out, ByteSpan(env.iv.data(), 16));
    put_bytes(out, ByteSpan(env.plaintext_digest.data(), 32));
    put_u64_be(out, env.ciphertext.size());
    put_bytes(out, as_span(env.ciphertext));
    return out;
}

inline Envelope decode_envelope(ByteSpan data) {
    ByteReader r(data);
    try {
        const Bytes magic = r.take(4);
        if (std::memcmp(magic.data(), kEnvelopeMagic, 4) != 0) throw EnvelopeMagic();
        if (r.u16_be() != kEnvelopeVersion) throw EnvelopeVersion();
        Envelope env;
        env.recipient_fingerprint = r.take_array<32>();
        env.wrapped_key = r.take(r.u16_be());
        env.iv = r.take_array<16>();
        env.plaintext_digest = r.take_array<32>();
        const std::uint64_t ct_len = r.u64_be();
        if (r.remaining() < ct_len) throw EnvelopeTruncated();
        env.ciphertext = r.take(static_cast<std::size_t>(ct_len));
        return env;
    } catch (const std::out_of_range&) {
        throw EnvelopeTruncated();
    }
}

// ------------------------------------------------------ file streaming

inline constexpr std::size_t kStreamChunk = 64 * 1024;

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

inline std::fstream create_output(const std::filesystem::path& path) {
    // create/truncate first, then reopen read-write so seekp works everywhere
    { std::ofstream touch(path, std::ios::binary | std::ios::trunc); if (!touch) throw IoError("cannot create " + path.string()); }
    std::fstream out(path, std::ios::binary | std::ios::in | std::ios::out);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace detail

// Streams the input through seal in fixed chunks, so large files never
// reside in memory. The digest and ciphertext length land in the header
// via a final patch-up seek.
inline void seal_file(const std::filesystem::path& in_path, const std::filesystem::path& out_path,
                      const RsaPublicKey& recipient, Rng& rng) {
    AesKey128 key;
    rng.fill(key.bytes.data(), key.bytes.size());
    Block16 iv;
    rng.fill(iv.data(), iv.size());
    const Bytes wrapped = wrap_key(key, recipient, rng);
    const Digest256 fingerprint = key_fingerprint(recipient);

    std::ifstream in = detail::open_input(in_path);
    std::fstream out = detail::create_output(out_path);

    Bytes header;
    header.insert(header.end(), kEnvelopeMagic, kEnvelopeMagic + 4);
    put_u16_be(header, kEnvelopeVersion);
    put_bytes(header, ByteSpan(fingerprint.data(), 32));
    put_u16_be(header, static_cast<std::uint16_t>(wrapped.size()));
    put_bytes(header, as_span(wrapped));
    put_bytes(header, ByteSpan(iv.data(), 16));
    const std::size_t digest_offset = header.size();
    header.insert(header.end(), 32, 0);  // digest, patched below
    const std::size_t ct_len_offset = header.size();
    header.insert(header.end(), 8, 0);   // ciphertext length, patched below
    out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));

    Sha256 hash;
    CbcEncryptor enc(key, iv);
    secure_wipe(key.bytes.data(), key.bytes.size());
    std::uint64_t ct_len = 0;
    Bytes chunk(kStreamChunk);
    Bytes produced;
    while (in) {
        in.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(chunk.size()));
        const std::size_t got = static_cast<std::size_t>(in.gcount());
        if (in.bad()) throw IoError("read failed on " + in_path.string());
        if (got == 0) break;
        hash.update(ByteSpan(chunk.data(), got));
        produced.clear();
        enc.update(ByteSpan(chunk.data(), got), produced);
        out.write(reinterpret_cast<const char*>(produced.data()), static_cast<std::streamsize>(produced.size()));
        ct_len += produced.size();
    }
    produced.clear();
    enc.finish(produced);
    out.write(reinterpret_cast<const char*>(produced.data()), static_cast<std::streamsize>(produced.size()));
    ct_len += produced.size();

    const Digest256 digest = hash.finish();
    Bytes patch(digest.begin(), digest.end());
    out.seekp(static_cast<std::streamoff>(digest_offset));
    out.write(reinterpret_cast<const char*>(patch.data()), 32);
    patch.clear();
    put_u64_be(patch, ct_len);
    out.seekp(static_cast<std::streamoff>(ct_len_offset));
    out.write(reinterpret_cast<const char*>(patch.data()), 8);
    out.flush();
    if (!out) throw IoError("write failed on " + out_path.string());
}

// Streaming counterpart of open(). The output file is removed again if
// decryption or the digest check fails, so a bad envelope never leaves
// partial plaintext behind.
inline void open_file(const std::filesystem::path& in_path, const std::filesystem::path& out_path,
                      const RsaPrivateKey& priv) {
    std::ifstream in = detail::open_input(in_path);

    Bytes head(4 + 2 + 32 + 2);
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    if (static_cast<std::size_t>(in.gcount()) != head.size()) throw EnvelopeTruncated();
    ByteReader r(as_span(head));
    const Bytes magic = r.take(4);
    if (std::memcmp(magic.data(), kEnvelopeMagic, 4) != 0) throw EnvelopeMagic();
    if (r.u16_be() != kEnvelopeVersion) throw EnvelopeVersion();
    r.take_array<32>();  // fingerprint: informational
    const std::uint16_t wrapped_len = r.u16_be();

    Bytes rest(static_cast<std::size_t>(wrapped_len) + 16 + 32 + 8);
    in.read(reinterpret_cast<char*>(rest.data()), static_cast<std::streamsize>(rest.size()));
    if (static_cast<std::size_t>(in.gcount()) != rest.size()) throw EnvelopeTruncated();
    ByteReader r2(as_span(rest));
    const Bytes wrapped = r2.take(wrapped_len);
    const Block16 iv = r2.take_array<16>();
    const Digest256 expect_digest = r2.take_array<32>();
    const std::uint64_t ct_len = r2.u64_be();
    if (ct_len == 0 || ct_len % kAesBlockSize != 0) throw EnvelopeTruncated("ciphertext length invalid");

    AesKey128 key;
    try {
        key = unwrap_key(as_span(wrapped), priv);
    } catch (const PaddingError&) {
        throw WrongKey();
    }

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + out_path.string());
    auto fail = [&](auto&& err) -> void {
        out.close();
        std::error_code ec;
        std::filesystem::remove(out_path, ec);
        throw err;
    };

    Sha256 hash;
    CbcDecryptor dec(key, iv);
    secure_wipe(key.bytes.data(), key.bytes.size());
    std::uint64_t remaining = ct_len;
    Bytes chunk(kStreamChunk);
    Bytes produced;
    try {
        while (remaining > 0) {
            const std::size_t want = remaining < chunk.size() ? static_cast<std::size_t>(remaining) : chunk.size();
            in.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(want));
            if (static_cast<std::size_t>(in.gcount()) != want) fail(EnvelopeTruncated());
            produced.clear();
            dec.update(ByteSpan(chunk.data(), want), produced);
            hash.update(as_span(produced));
            out.write(reinterpret_cast<const char*>(produced.data()), static_cast<std::streamsize>(produced.size()));
            remaining -= want;
        }
        produced.clear();
        dec.finish(produced);
        hash.update(as_span(produced));
        out.write(reinterpret_cast<const char*>(produced.data()), static_cast<std::streamsize>(produced.size()));
        out.flush();
        if (!out) fail(IoError("write failed on " + out_path.string()));
    } catch (const PaddingError&) {
        fail(CorruptCiphertext());
    } catch (const LengthError&) {
        fail(CorruptCiphertext("ciphertext length invalid"));
    }

    const Digest256 digest = hash.finish();
    if (!ct_equal(ByteSpan(digest.data(), 32), ByteSpan(expect_digest.data(), 32)))
        fail(DigestMismatch());
    out.close();
}

}  // namespace minihsm
