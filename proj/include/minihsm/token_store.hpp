#pragma once

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "minihsm/aes.hpp"
#include "minihsm/bytes.hpp"
#include "minihsm/envelope.hpp"
#include "minihsm/errors.hpp"
#include "minihsm/rng.hpp"
#include "minihsm/rsa.hpp"
#include "minihsm/sha256.hpp"

namespace minihsm {

enum class Role : std::uint8_t { User, SecurityOfficer };

enum class Protection : std::uint8_t { Unprotected = 0, Protected = 1, HighlyProtected = 2 };

inline std::string_view protection_name(Protection p) {
    switch (p) {
        case Protection::Unprotected: return "unprotected";
        case Protection::Protected: return "protected";
        case Protection::HighlyProtected: return "highly-protected";
    }
    return "unknown";
}

inline std::optional<Protection> protection_from_name(std::string_view name) {
    if (name == "unprotected") return Protection::Unprotected;
    if (name == "protected") return Protection::Protected;
    if (name == "highly-protected") return Protection::HighlyProtected;
    return std::nullopt;
}

using Salt16 = std::array<std::uint8_t, 16>;
using Key32 = std::array<std::uint8_t, 32>;

struct KeyRecord {
    std::string key_label;
    Protection protection = Protection::Unprotected;
    bool extractable = false;
    Block16 iv{};            // per-record IV for encrypted_key
    Bytes encrypted_key;     // private PEM payload under the slot token key
    Bytes public_part;       // public PEM payload, stored in clear

    bool operator==(const KeyRecord&) const = default;
};

struct AttackLogEntry {
    std::uint64_t unix_time = 0;
    std::uint32_t slot_id = 0;
    std::string key_label;

    bool operator==(const AttackLogEntry&) const = default;
};

struct SlotRecord {
    std::uint32_t slot_id = 0;
    std::string label;
    std::uint32_t kdf_iterations = 0;
    Salt16 user_salt{};
    Digest256 user_verifier{};
    Salt16 so_salt{};
    Digest256 so_verifier{};
    Salt16 storage_salt{};
    Key32 wrapped_token_key_user{};
    Key32 wrapped_token_key_so{};
    std::uint32_t failed_attempts = 0;
    std::vector<KeyRecord> keys;

    bool operator==(const SlotRecord&) const = default;
};

struct TokenFile {
    std::vector<SlotRecord> slots;
    std::vector<AttackLogEntry> attack_log;

    bool operator==(const TokenFile&) const = default;
};

struct KeyInfo {
    std::string key_label;
    Protection protection;
    bool extractable;

    bool operator==(const KeyInfo&) const = default;
};

// Authenticated handle to one slot. Holds the unwrapped token key in
// memory only; wiped on destruction. Never persisted.
class Session {
  public:
    Session(std::uint32_t slot_id, Role role, const Key32& token_key)
        : slot_id_(slot_id), role_(role), token_key_(token_key) {}

    ~Session() { secure_wipe(token_key_.data(), token_key_.size()); }

    Session(Session&& other) noexcept
        : slot_id_(other.slot_id_), role_(other.role_), token_key_(other.token_key_) {
        secure_wipe(other.token_key_.data(), other.token_key_.size());
    }
    Session& operator=(Session&&) = delete;
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    std::uint32_t slot_id() const { return slot_id_; }
    Role role() const { return role_; }
    const Key32& token_key() const { return token_key_; }

  private:
    std::uint32_t slot_id_;
    Role role_;
    Key32 token_key_;
};

inline constexpr std::uint32_t kDefaultKdfIterations = 100000;

// Salted iterated SHA-256: h0 = H(salt||pin), h_i = H(h_{i-1}||salt||pin),
// output h_iterations.
inline Digest256 derive_kdf(std::string_view pin, const Salt16& salt, std::uint32_t iterations) {
    if (iterations < 1) throw std::invalid_argument("kdf iterations must be >= 1");
    Sha256 h;
    h.update(ByteSpan(salt.data(), salt.size()));
    h.update(pin);
    Digest256 acc = h.finish();
    for (std::uint32_t i = 0; i < iterations; ++i) {
        h.update(ByteSpan(acc.data(), acc.size()));
        h.update(ByteSpan(salt.data(), salt.size()));
        h.update(pin);
        acc = h.finish();
    }
    return acc;
}

namespace detail {

inline AesKey128 kek_from_pin(std::string_view pin, const Salt16& storage_salt, std::uint32_t iterations) {
    const Digest256 d = derive_kdf(pin, storage_salt, iterations);
    AesKey128 k;
    std::memcpy(k.bytes.data(), d.data(), 16);
    return k;
}

// Raw two-block CBC with a zero IV and no padding: fits the fixed-size
// 32-byte token key exactly.
inline Key32 wrap_token_key(const Key32& token_key, const AesKey128& kek) {
    const RoundKeySchedule ks = expand_key(kek);
    Key32 out{};
    Block16 prev{};
    for (int blk = 0; blk < 2; ++blk) {
        Block16 x;
        for (int i = 0; i < 16; ++i) x[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(token_key[static_cast<std::size_t>(16 * blk + i)] ^ prev[static_cast<std::size_t>(i)]);
        prev = encrypt_block(x, ks);
        std::memcpy(out.data() + 16 * blk, prev.data(), 16);
    }
    return out;
}

inline Key32 unwrap_token_key(const Key32& wrapped, const AesKey128& kek) {
    const RoundKeySchedule ks = expand_key(kek);
    Key32 out{};
    Block16 prev{};
    for (int blk = 0; blk < 2; ++blk) {
        Block16 ct;
        std::memcpy(ct.data(), wrapped.data() + 16 * blk, 16);
        Block16 pt = decrypt_block(ct, ks);
        for (int i = 0; i < 16; ++i) out[static_cast<std::size_t>(16 * blk + i)] = static_cast<std::uint8_t>(pt[static_cast<std::size_t>(i)] ^ prev[static_cast<std::size_t>(i)]);
        prev = ct;
    }
    return out;
}

inline AesKey128 record_key(const Key32& token_key) {
    AesKey128 k;
    std::memcpy(k.bytes.data(), token_key.data(), 16);
    return k;
}

inline SlotRecord* find_slot(TokenFile& token, std::string_view label) {
    for (auto& slot : token.slots)
        if (slot.label == label) return &slot;
    return nullptr;
}

inline const SlotRecord* find_slot(const TokenFile& token, std::string_view label) {
    for (const auto& slot : token.slots)
        if (slot.label == label) return &slot;
    return nullptr;
}

inline SlotRecord* find_slot_by_id(TokenFile& token, std::uint32_t id) {
    for (auto& slot : token.slots)
        if (slot.slot_id == id) return &slot;
    return nullptr;
}

inline const SlotRecord* find_slot_by_id(const TokenFile& token, std::uint32_t id) {
    for (const auto& slot : token.slots)
        if (slot.slot_id == id) return &slot;
    return nullptr;
}

inline void check_pin(std::string_view pin) {
    if (pin.size() < 4) throw WeakPin();
    if (pin.size() > 255) throw std::invalid_argument("PIN longer than 255 bytes");
}

inline void check_label(std::string_view label) {
    if (label.empty()) throw std::invalid_argument("label must not be empty");
    if (label.size() > 65535) throw std::invalid_argument("label longer than 65535 bytes");
}

}  // namespace detail

inline std::uint32_t create_slot(TokenFile& token, std::string_view label, std::string_view user_pin,
                                 std::string_view so_pin, Rng& rng,
                                 std::uint32_t kdf_iterations = kDefaultKdfIterations) {
    detail::check_label(label);
    detail::check_pin(user_pin);
    detail::check_pin(so_pin);
    if (detail::find_slot(token, label) != nullptr) throw DuplicateSlotLabel();

    SlotRecord slot;
    std::uint32_t next_id = 1;
    for (const auto& s : token.slots) next_id = std::max(next_id, s.slot_id + 1);
    slot.slot_id = next_id;
    slot.label = std::string(label);
    slot.kdf_iterations = kdf_iterations;

    do {
        slot.user_salt = rng.array<16>();
        slot.so_salt = rng.array<16>();
        slot.storage_salt = rng.array<16>();
    } while (slot.user_salt == slot.so_salt || slot.user_salt == slot.storage_salt ||
             slot.so_salt == slot.storage_salt);

    slot.user_verifier = derive_kdf(user_pin, slot.user_salt, kdf_iterations);
    slot.so_verifier = derive_kdf(so_pin, slot.so_salt, kdf_iterations);

    Key32 token_key = rng.array<32>();
    slot.wrapped_token_key_user =
        detail::wrap_token_key(token_key, detail::kek_from_pin(user_pin, slot.storage_salt, kdf_iterations));
    slot.wrapped_token_key_so =
        detail::wrap_token_key(token_key, detail::kek_from_pin(so_pin, slot.storage_salt, kdf_iterations));
    secure_wipe(token_key.data(), token_key.size());

    token.slots.push_back(std::move(slot));
    return next_id;
}

// Verifier comparison is constant-time; a mismatch bumps failed_attempts
// (callers persist the token afterwards).
inline Session authenticate(TokenFile& token, std::string_view slot_label, std::string_view pin, Role role) {
    SlotRecord* slot = detail::find_slot(token, slot_label);
    if (slot == nullptr) throw UnknownSlot();

    const Salt16& salt = (role == Role::User) ? slot->user_salt : slot->so_salt;
    const Digest256& stored = (role == Role::User) ? slot->user_verifier : slot->so_verifier;
    const Digest256 candidate = derive_kdf(pin, salt, slot->kdf_iterations);
    if (!ct_equal(ByteSpan(candidate.data(), 32), ByteSpan(stored.data(), 32))) {
        ++slot->failed_attempts;
        throw AuthFailure();
    }

    const Key32& wrapped = (role == Role::User) ? slot->wrapped_token_key_user : slot->wrapped_token_key_so;
    const Key32 token_key =
        detail::unwrap_token_key(wrapped, detail::kek_from_pin(pin, slot->storage_salt, slot->kdf_iterations));
    return Session(slot->slot_id, role, token_key);
}

inline void import_private_key(TokenFile& token, const Session& session, std::string_view key_label,
                               const RsaPrivateKey& priv, Protection protection, bool extractable, Rng& rng) {
    if (session.role() != Role::SecurityOfficer) throw RoleDenied("key import requires a security officer session");
    detail::check_label(key_label);
    SlotRecord* slot = detail::find_slot_by_id(token, session.slot_id());
    if (slot == nullptr) throw UnknownSlot();
    for (const auto& k : slot->keys)
        if (k.key_label == key_label) throw DuplicateKeyLabel();

    KeyRecord rec;
    rec.key_label = std::string(key_label);
    rec.protection = protection;
    rec.extractable = extractable;
    rec.iv = rng.array<16>();
    Bytes payload = private_pem_payload(priv);
    rec.encrypted_key = cbc_encrypt(as_span(payload), detail::record_key(session.token_key()), rec.iv);
    secure_wipe(payload.data(), payload.size());
    rec.public_part = public_pem_payload(priv.public_key());
    slot->keys.push_back(std::move(rec));
}

// Metadata only; needs no authentication.
inline std::vector<KeyInfo> list_keys(const TokenFile& token, std::string_view slot_label) {
    const SlotRecord* slot = detail::find_slot(token, slot_label);
    if (slot == nullptr) throw UnknownSlot();
    std::vector<KeyInfo> out;
    out.reserve(slot->keys.size());
    for (const auto& k : slot->keys) out.push_back(KeyInfo{k.key_label, k.protection, k.extractable});
    return out;
}

// Decrypts the envelope with a stored private key. The key material is
// reconstructed inside this call and wiped before returning; only the
// plaintext crosses the boundary.
inline Bytes decrypt_with_stored_key(const TokenFile& token, const Session& session, std::string_view key_label,
                                     const Envelope& env) {
    if (session.role() != Role::User) throw RoleDenied("decryption requires a user session");
    const SlotRecord* slot = detail::find_slot_by_id(token, session.slot_id());
    if (slot == nullptr) throw UnknownSlot();
    const KeyRecord* rec = nullptr;
    for (const auto& k : slot->keys)
        if (k.key_label == key_label) rec = &k;
    if (rec == nullptr) throw UnknownKey();

    Bytes payload = cbc_decrypt(as_span(rec->encrypted_key), detail::record_key(session.token_key()), rec->iv);
    RsaPrivateKey priv = decode_private_payload(as_span(payload));
    secure_wipe(payload.data(), payload.size());
    return open(env, priv);
}

// Streaming variant for envelope files: the private key still never
// leaves the store.
inline void decrypt_file_with_stored_key(const TokenFile& token, const Session& session,
                                         std::string_view key_label, const std::filesystem::path& in_path,
                                         const std::filesystem::path& out_path) {
    if (session.role() != Role::User) throw RoleDenied("decryption requires a user session");
    const SlotRecord* slot = detail::find_slot_by_id(token, session.slot_id());
    if (slot == nullptr) throw UnknownSlot();
    const KeyRecord* rec = nullptr;
    for (const auto& k : slot->keys)
        if (k.key_label == key_label) rec = &k;
    if (rec == nullptr) throw UnknownKey();

    Bytes payload = cbc_decrypt(as_span(rec->encrypted_key), detail::record_key(session.token_key()), rec->iv);
    const RsaPrivateKey priv = decode_private_payload(as_span(payload));
    secure_wipe(payload.data(), payload.size());
    open_file(in_path, out_path, priv);
}

struct ExportResult {
    std::string pem;        // armored key material handed to the caller
    bool is_private;        // true only on the authorized extractable path
};

// Extraction endpoint. For a non-extractable key (the normal case) it
// fabricates a fresh random public key as a decoy, logs the attempt,
// and leaves the real record untouched. Only a security-officer session
// on a key imported as extractable receives the true private PEM.
inline ExportResult export_key(TokenFile& token, std::string_view slot_label, std::string_view key_label,
                               Rng& decoy_rng, const Session* so_session = nullptr,
                               std::uint64_t now = static_cast<std::uint64_t>(std::time(nullptr))) {
    SlotRecord* slot = detail::find_slot(token, slot_label);
    if (slot == nullptr) throw UnknownSlot();
    KeyRecord* rec = nullptr;
    for (auto& k : slot->keys)
        if (k.key_label == key_label) rec = &k;
    if (rec == nullptr) throw UnknownKey();

    if (rec->extractable && so_session != nullptr && so_session->role() == Role::SecurityOfficer &&
        so_session->slot_id() == slot->slot_id) {
        Bytes payload = cbc_decrypt(as_span(rec->encrypted_key), detail::record_key(so_session->token_key()), rec->iv);
        const RsaPrivateKey priv = decode_private_payload(as_span(payload));
        secure_wipe(payload.data(), payload.size());
        return ExportResult{encode_pem(priv), true};
    }

    const auto [decoy_pub, decoy_priv] = generate_keypair(512, decoy_rng);
    token.attack_log.push_back(AttackLogEntry{now, slot->slot_id, std::string(key_label)});
    return ExportResult{encode_pem(decoy_pub), false};
}

// ------------------------------------------------------- serialization

inline constexpr char kTokenMagic[4] = {'S', 'H', 'S', 'M'};
inline constexpr std::uint16_t kTokenVersion = 1;

namespace detail {

inline void put_label(Bytes& out, std::string_view label) {
    put_u16_be(out, static_cast<std::uint16_t>(label.size()));
    put_bytes(out, str_span(label));
}

inline void encode_slots(const TokenFile& token, Bytes& out) {
    out.insert(out.end(), kTokenMagic, kTokenMagic + 4);
    put_u16_be(out, kTokenVersion);
    put_u32_be(out, static_cast<std::uint32_t>(token.slots.size()));
    for (const auto& slot : token.slots) {
        put_u32_be(out, slot.slot_id);
        put_label(out, slot.label);
        put_u32_be(out, slot.kdf_iterations);
        put_bytes(out, ByteSpan(slot.user_salt.data(), 16));
        put_bytes(out, ByteSpan(slot.user_verifier.data(), 32));
        put_bytes(out, ByteSpan(slot.so_salt.data(), 16));
        put_bytes(out, ByteSpan(slot.so_verifier.data(), 32));
        put_bytes(out, ByteSpan(slot.storage_salt.data(), 16));
        put_bytes(out, ByteSpan(slot.wrapped_token_key_user.data(), 32));
        put_bytes(out, ByteSpan(slot.wrapped_token_key_so.data(), 32));
        put_u32_be(out, slot.failed_attempts);
        put_u32_be(out, static_cast<std::uint32_t>(slot.keys.size()));
        for (const auto& key : slot.keys) {
            put_label(out, key.key_label);
            put_u8(out, static_cast<std::uint8_t>(key.protection));
            put_u8(out, key.extractable ? 1 : 0);
            put_bytes(out, ByteSpan(key.iv.data(), 16));
            put_u32_be(out, static_cast<std::uint32_t>(key.encrypted_key.size()));
            put_bytes(out, as_span(key.encrypted_key));
            put_u32_be(out, static_cast<std::uint32_t>(key.public_part.size()));
            put_bytes(out, as_span(key.public_part));
        }
    }
}

}  // namespace detail

inline Bytes encode_token(const TokenFile& token) {
    Bytes out;
    detail::encode_slots(token, out);
    put_u32_be(out, static_cast<std::uint32_t>(token.attack_log.size()));
    for (const auto& entry : token.attack_log) {
        put_u64_be(out, entry.unix_time);
        put_u32_be(out, entry.slot_id);
        detail::put_label(out, entry.key_label);
    }
    return out;
}

// Digest over the serialized slot region (everything ahead of the attack
// log), so an appended log entry does not disturb it.
inline Digest256 slot_region_digest(const TokenFile& token) {
    Bytes region;
    detail::encode_slots(token, region);
    return sha256(as_span(region));
}

inline TokenFile decode_token(ByteSpan data) {
    ByteReader r(data);
    try {
        const Bytes magic = r.take(4);
        if (std::memcmp(magic.data(), kTokenMagic, 4) != 0) throw TokenMagic();
        if (r.u16_be() != kTokenVersion) throw TokenVersion();
        TokenFile token;
        const std::uint32_t slot_count = r.u32_be();
        for (std::uint32_t i = 0; i < slot_count; ++i) {
            SlotRecord slot;
            slot.slot_id = r.u32_be();
            slot.label = r.take_string(r.u16_be());
            slot.kdf_iterations = r.u32_be();
            slot.user_salt = r.take_array<16>();
            slot.user_verifier = r.take_array<32>();
            slot.so_salt = r.take_array<16>();
            slot.so_verifier = r.take_array<32>();
            slot.storage_salt = r.take_array<16>();
            slot.wrapped_token_key_user = r.take_array<32>();
            slot.wrapped_token_key_so = r.take_array<32>();
            slot.failed_attempts = r.u32_be();
            const std::uint32_t key_count = r.u32_be();
            for (std::uint32_t k = 0; k < key_count; ++k) {
                KeyRecord rec;
                rec.key_label = r.take_string(r.u16_be());
                const std::uint8_t prot = r.u8();
                if (prot > 2) throw TokenTruncated("invalid protection value");
                rec.protection = static_cast<Protection>(prot);
                rec.extractable = r.u8() != 0;
                rec.iv = r.take_array<16>();
                rec.encrypted_key = r.take(r.u32_be());
                rec.public_part = r.take(r.u32_be());
                slot.keys.push_back(std::move(rec));
            }
            token.slots.push_back(std::move(slot));
        }
        const std::uint32_t log_count = r.u32_be();
        for (std::uint32_t i = 0; i < log_count; ++i) {
            AttackLogEntry entry;
            entry.unix_time = r.u64_be();
            entry.slot_id = r.u32_be();
            entry.key_label = r.take_string(r.u16_be());
            token.attack_log.push_back(std::move(entry));
        }
        if (!r.done()) throw TokenTruncated("trailing bytes after attack log");
        return token;
    } catch (const std::out_of_range&) {
        throw TokenTruncated();
    }
}

// ---------------------------------------------------------- file layer

// Advisory whole-file lock on <path>.lock via flock(2). Mutating callers
// take Exclusive; readers take Shared.
class FileLock {
  public:
    enum class Mode { Shared, Exclusive };

    FileLock(const std::filesystem::path& path, Mode mode) : fd_(open_lockfile(path)) {
        if (flock(fd_, mode == Mode::Shared ? LOCK_SH : LOCK_EX) != 0) {
            ::close(fd_);
            throw IoError("flock failed on " + path.string());
        }
    }

    static std::optional<FileLock> try_acquire(const std::filesystem::path& path, Mode mode) {
        const int fd = open_lockfile(path);
        if (flock(fd, (mode == Mode::Shared ? LOCK_SH : LOCK_EX) | LOCK_NB) != 0) {
            ::close(fd);
            return std::nullopt;
        }
        return FileLock(fd);
    }

    ~FileLock() {
        if (fd_ >= 0) {
            flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }

    FileLock(FileLock&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    FileLock& operator=(FileLock&&) = delete;
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

  private:
    explicit FileLock(int fd) : fd_(fd) {}

    static int open_lockfile(const std::filesystem::path& path) {
        const std::string lock_path = path.string() + ".lock";
        const int fd = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0600);
        if (fd < 0) throw IoError("cannot open " + lock_path);
        return fd;
    }

    int fd_;
};

// Writes via a temp file + rename, under the exclusive advisory lock
// (pass with_lock=false when the caller already holds it).
inline void save_token(const TokenFile& token, const std::filesystem::path& path, bool with_lock = true) {
    std::optional<FileLock> lock;
    if (with_lock) lock.emplace(path, FileLock::Mode::Exclusive);
    const Bytes data = encode_token(token);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + tmp.string());
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) throw IoError("write failed on " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

inline TokenFile load_token(const std::filesystem::path& path, bool with_lock = true) {
    std::optional<FileLock> lock;
    if (with_lock) lock.emplace(path, FileLock::Mode::Shared);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed on " + path.string());
    return decode_token(as_span(data));
}

}  // namespace minihsm
