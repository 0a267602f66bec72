#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "minihsm/bytes.hpp"
#include "minihsm/errors.hpp"
#include "minihsm/rng.hpp"
#include "minihsm/rsa.hpp"
#include "minihsm/sha256.hpp"
#include "minihsm/token_store.hpp"

namespace minihsm {

enum class Verdict : std::uint8_t { Secure, Breached };

struct AttackReport {
    std::string slot_label;
    std::string key_label;
    std::string extracted_material;    // PEM text handed to the attacker
    bool extracted_is_private = false;
    bool matches_stored_private = false;
    Digest256 token_hash_before{};     // slot-region digests
    Digest256 token_hash_after{};
    Verdict verdict = Verdict::Breached;
};

// Credentials the "attacker" may present; the baseline scenario has none.
struct AttackCredentials {
    std::string so_pin;
};

inline constexpr std::string_view kDefaultExportName = "1exported_private_key.pem";

namespace detail {

// A private PEM whose (n, e) equal the stored public part is the stored
// private key; that is the operational breach test.
inline bool private_pem_matches_record(const std::string& pem, const KeyRecord& rec) {
    RsaPrivateKey extracted;
    try {
        extracted = decode_private_pem(pem);
    } catch (const Error&) {
        return false;
    }
    const RsaPublicKey stored = decode_public_payload(as_span(rec.public_part));
    return extracted.n == stored.n && extracted.e == stored.e;
}

}  // namespace detail

// Runs one extraction attempt against a token on disk: hash the slot
// region, request the key through the export endpoint, write whatever
// came back to out_pem_path, persist the token (the attempt is logged
// inside it), and re-hash.
inline AttackReport run_extraction_attack(const std::filesystem::path& token_path, std::string_view slot_label,
                                          std::string_view key_label,
                                          const std::filesystem::path& out_pem_path, Rng& decoy_rng,
                                          const std::optional<AttackCredentials>& creds = std::nullopt) {
    FileLock lock(token_path, FileLock::Mode::Exclusive);
    TokenFile token = load_token(token_path, /*with_lock=*/false);

    AttackReport report;
    report.slot_label = std::string(slot_label);
    report.key_label = std::string(key_label);
    report.token_hash_before = slot_region_digest(token);

    std::optional<Session> so_session;
    if (creds.has_value()) so_session.emplace(authenticate(token, slot_label, creds->so_pin, Role::SecurityOfficer));

    const ExportResult result =
        export_key(token, slot_label, key_label, decoy_rng, so_session.has_value() ? &*so_session : nullptr);
    report.extracted_material = result.pem;
    report.extracted_is_private = result.is_private;

    {
        std::ofstream out(out_pem_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + out_pem_path.string());
        out << result.pem;
        if (!out) throw IoError("write failed on " + out_pem_path.string());
    }

    save_token(token, token_path, /*with_lock=*/false);
    const TokenFile reloaded = load_token(token_path, /*with_lock=*/false);
    report.token_hash_after = slot_region_digest(reloaded);

    const SlotRecord* slot = detail::find_slot(reloaded, slot_label);
    const KeyRecord* rec = nullptr;
    if (slot != nullptr)
        for (const auto& k : slot->keys)
            if (k.key_label == key_label) rec = &k;
    report.matches_stored_private =
        report.extracted_is_private && rec != nullptr && detail::private_pem_matches_record(result.pem, *rec);

    const bool region_intact = report.token_hash_before == report.token_hash_after;
    report.verdict = (report.matches_stored_private || !region_intact) ? Verdict::Breached : Verdict::Secure;
    return report;
}

inline void write_attack_report(const AttackReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << "slot_label=" << report.slot_label << '\n'
        << "key_label=" << report.key_label << '\n'
        << "extracted_is_private=" << (report.extracted_is_private ? "true" : "false") << '\n'
        << "matches_stored_private=" << (report.matches_stored_private ? "true" : "false") << '\n'
        << "token_hash_before=" << to_hex(ByteSpan(report.token_hash_before.data(), 32)) << '\n'
        << "token_hash_after=" << to_hex(ByteSpan(report.token_hash_after.data(), 32)) << '\n'
        << "verdict=" << (report.verdict == Verdict::Secure ? "secure" : "breached") << '\n';
    if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace minihsm
