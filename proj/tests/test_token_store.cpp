#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "minihsm/token_store.hpp"
#include "test_util.hpp"

using namespace minihsm;
using testutil::TempDir;
using testutil::XorShift64;

namespace {

constexpr std::uint32_t kTestIters = 64;  // keep tests fast; production default is 100000

struct Fixture {
    TokenFile token;
    RsaPublicKey pub;
    RsaPrivateKey priv;
    std::string slot_label = "slot-a";
    std::string user_pin = "user-pin-1";
    std::string so_pin = "so-pin-1";
    std::string key_label = "key-1";
};

Fixture make_fixture(bool extractable = false, std::uint64_t seed = 100) {
    Fixture f;
    Rng rng(seed);
    auto [pub, priv] = generate_keypair(512, rng);
    f.pub = pub;
    f.priv = priv;
    create_slot(f.token, f.slot_label, f.user_pin, f.so_pin, rng, kTestIters);
    Session so = authenticate(f.token, f.slot_label, f.so_pin, Role::SecurityOfficer);
    import_private_key(f.token, so, f.key_label, f.priv, Protection::Protected, extractable, rng);
    return f;
}

}  // namespace

TEST_CASE("derive_kdf") {
    const Salt16 zero_salt{};
    SECTION("frozen chain vectors") {
        CHECK(to_hex(ByteSpan(derive_kdf("a", zero_salt, 1).data(), 32)) ==
              "0435c0ecfd83f0518799d94519392cabf06ccc7af454fdce7935a1df701ba449");
        CHECK(to_hex(ByteSpan(derive_kdf("a", zero_salt, 3).data(), 32)) ==
              "8a2eb66d50d1c6d00c86079e6b910af461ccfac173f1c1bdccdd4f03f4cc0262");
        Salt16 ramp;
        for (int i = 0; i < 16; ++i) ramp[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
        CHECK(to_hex(ByteSpan(derive_kdf("pin1234", ramp, 100).data(), 32)) ==
              "287e091d009a0d4df6cf9f2ed0376dda3fa2b75b7ecb46b2c51146c85e6720e8");
    }
    SECTION("deterministic") {
        CHECK(derive_kdf("pin", zero_salt, 10) == derive_kdf("pin", zero_salt, 10));
    }
    SECTION("distinct salts give distinct outputs") {
        XorShift64 xr(1);
        int collisions = 0;
        Digest256 base = derive_kdf("fixed-pin", zero_salt, 2);
        for (int i = 0; i < 1000; ++i) {
            Salt16 salt;
            for (auto& b : salt) b = xr.next_byte();
            if (derive_kdf("fixed-pin", salt, 2) == base) ++collisions;
        }
        CHECK(collisions == 0);
    }
    SECTION("iteration count changes the output") {
        CHECK(derive_kdf("pin", zero_salt, 1) != derive_kdf("pin", zero_salt, 2));
        CHECK_THROWS_AS(derive_kdf("pin", zero_salt, 0), std::invalid_argument);
    }
}

TEST_CASE("create_slot and authenticate") {
    TokenFile token;
    Rng rng(200);
    const std::uint32_t id = create_slot(token, "alpha", "userpin", "sopin", rng, kTestIters);
    CHECK(id == 1);
    CHECK(create_slot(token, "beta", "userpin2", "sopin2", rng, kTestIters) == 2);

    SECTION("both roles authenticate with their own PIN") {
        const Session u = authenticate(token, "alpha", "userpin", Role::User);
        CHECK(u.role() == Role::User);
        CHECK(u.slot_id() == 1);
        const Session s = authenticate(token, "alpha", "sopin", Role::SecurityOfficer);
        CHECK(s.role() == Role::SecurityOfficer);
    }
    SECTION("user path and SO path unwrap the same token key") {
        const Session u = authenticate(token, "alpha", "userpin", Role::User);
        const Session s = authenticate(token, "alpha", "sopin", Role::SecurityOfficer);
        CHECK(u.token_key() == s.token_key());
    }
    SECTION("wrong PIN fails and bumps the counter") {
        CHECK(token.slots[0].failed_attempts == 0);
        CHECK_THROWS_AS(authenticate(token, "alpha", "wrongpin", Role::User), AuthFailure);
        CHECK(token.slots[0].failed_attempts == 1);
        CHECK_THROWS_AS(authenticate(token, "alpha", "userpin ", Role::User), AuthFailure);
        CHECK(token.slots[0].failed_attempts == 2);
    }
    SECTION("roles are not interchangeable") {
        CHECK_THROWS_AS(authenticate(token, "alpha", "sopin", Role::User), AuthFailure);
        CHECK_THROWS_AS(authenticate(token, "alpha", "userpin", Role::SecurityOfficer), AuthFailure);
    }
    SECTION("unknown slot") {
        CHECK_THROWS_AS(authenticate(token, "gamma", "userpin", Role::User), UnknownSlot);
    }
    SECTION("duplicate labels are rejected") {
        CHECK_THROWS_AS(create_slot(token, "alpha", "userpin3", "sopin3", rng, kTestIters), DuplicateSlotLabel);
    }
    SECTION("weak PINs are rejected") {
        CHECK_THROWS_AS(create_slot(token, "gamma", "abc", "sopin3", rng, kTestIters), WeakPin);
        CHECK_THROWS_AS(create_slot(token, "gamma", "userpin3", "123", rng, kTestIters), WeakPin);
    }
    SECTION("salts are pairwise distinct") {
        const SlotRecord& slot = token.slots[0];
        CHECK(slot.user_salt != slot.so_salt);
        CHECK(slot.user_salt != slot.storage_salt);
        CHECK(slot.so_salt != slot.storage_salt);
    }
    SECTION("authentication soundness under random PINs and perturbations") {
        XorShift64 xr(3);
        for (int trial = 0; trial < 20; ++trial) {
            TokenFile t;
            std::string pin;
            const std::size_t len = 4 + xr.below(20);
            for (std::size_t i = 0; i < len; ++i) pin.push_back(static_cast<char>('!' + xr.below(90)));
            Rng r(trial);
            create_slot(t, "s", pin, "so-pin-x", r, kTestIters);
            CHECK_NOTHROW(authenticate(t, "s", pin, Role::User));
            std::string wrong = pin;
            wrong[xr.below(wrong.size())] ^= static_cast<char>(1 + xr.below(127));
            if (wrong != pin) CHECK_THROWS_AS(authenticate(t, "s", wrong, Role::User), AuthFailure);
        }
    }
}

TEST_CASE("import and list keys") {
    Fixture f = make_fixture();
    SECTION("listing shows metadata in insertion order") {
        Rng rng(300);
        auto [pub2, priv2] = generate_keypair(512, rng);
        Session so = authenticate(f.token, f.slot_label, f.so_pin, Role::SecurityOfficer);
        import_private_key(f.token, so, "key-2", priv2, Protection::HighlyProtected, true, rng);

        const auto keys = list_keys(f.token, f.slot_label);
        REQUIRE(keys.size() == 2);
        CHECK(keys[0] == KeyInfo{"key-1", Protection::Protected, false});
        CHECK(keys[1] == KeyInfo{"key-2", Protection::HighlyProtected, true});
    }
    SECTION("empty slot lists empty") {
        Rng rng(301);
        create_slot(f.token, "empty-slot", "user-pin-2", "so-pin-2", rng, kTestIters);
        CHECK(list_keys(f.token, "empty-slot").empty());
    }
    SECTION("listing an unknown slot fails") {
        CHECK_THROWS_AS(list_keys(f.token, "nope"), UnknownSlot);
    }
    SECTION("user sessions may not import") {
        Rng rng(302);
        Session user = authenticate(f.token, f.slot_label, f.user_pin, Role::User);
        CHECK_THROWS_AS(import_private_key(f.token, user, "key-x", f.priv, Protection::Unprotected, false, rng),
                        RoleDenied);
    }
    SECTION("duplicate key labels are rejected") {
        Rng rng(303);
        Session so = authenticate(f.token, f.slot_label, f.so_pin, Role::SecurityOfficer);
        CHECK_THROWS_AS(import_private_key(f.token, so, f.key_label, f.priv, Protection::Protected, false, rng),
                        DuplicateKeyLabel);
    }
}

TEST_CASE("decrypt_with_stored_key") {
    Fixture f = make_fixture();
    XorShift64 xr(4);
    const Bytes plaintext = xr.bytes(5000);
    Rng seal_rng(42);
    const Envelope env = seal(as_span(plaintext), f.pub, seal_rng);

    SECTION("end-to-end round trip through the store") {
        Session user = authenticate(f.token, f.slot_label, f.user_pin, Role::User);
        CHECK(decrypt_with_stored_key(f.token, user, f.key_label, env) == plaintext);
    }
    SECTION("unknown key label") {
        Session user = authenticate(f.token, f.slot_label, f.user_pin, Role::User);
        CHECK_THROWS_AS(decrypt_with_stored_key(f.token, user, "missing", env), UnknownKey);
    }
    SECTION("SO sessions may not decrypt") {
        Session so = authenticate(f.token, f.slot_label, f.so_pin, Role::SecurityOfficer);
        CHECK_THROWS_AS(decrypt_with_stored_key(f.token, so, f.key_label, env), RoleDenied);
    }
    SECTION("file variant") {
        TempDir dir("store-decrypt");
        const auto env_path = dir.file("x.env");
        const auto out_path = dir.file("x.out");
        testutil::write_file(env_path, as_span(encode_envelope(env)));
        Session user = authenticate(f.token, f.slot_label, f.user_pin, Role::User);
        decrypt_file_with_stored_key(f.token, user, f.key_label, env_path, out_path);
        CHECK(testutil::read_file(out_path) == plaintext);
    }
}

TEST_CASE("export_key honeypot behavior") {
    SECTION("non-extractable keys produce a decoy public key and a log entry") {
        Fixture f = make_fixture(false);
        const Digest256 before = slot_region_digest(f.token);
        const Bytes real_private = private_pem_payload(f.priv);

        Rng decoy_rng(777);
        const ExportResult result = export_key(f.token, f.slot_label, f.key_label, decoy_rng, nullptr, 1700000000);

        CHECK_FALSE(result.is_private);
        const PemBlock block = parse_pem_block(result.pem);
        CHECK(block.label == kPemPublicLabel);
        CHECK(block.payload != real_private);
        const RsaPublicKey decoy = decode_public_pem(result.pem);
        CHECK(!(decoy.n == f.pub.n));

        CHECK(slot_region_digest(f.token) == before);
        REQUIRE(f.token.attack_log.size() == 1);
        CHECK(f.token.attack_log[0].unix_time == 1700000000);
        CHECK(f.token.attack_log[0].slot_id == f.token.slots[0].slot_id);
        CHECK(f.token.attack_log[0].key_label == f.key_label);
    }
    SECTION("seeded decoys are reproducible") {
        Fixture f1 = make_fixture(false);
        Fixture f2 = make_fixture(false);
        Rng a(31), b(31);
        CHECK(export_key(f1.token, f1.slot_label, f1.key_label, a, nullptr, 1).pem ==
              export_key(f2.token, f2.slot_label, f2.key_label, b, nullptr, 1).pem);
    }
    SECTION("extractable key with an SO session exports the true private PEM") {
        Fixture f = make_fixture(true);
        Session so = authenticate(f.token, f.slot_label, f.so_pin, Role::SecurityOfficer);
        Rng decoy_rng(778);
        const ExportResult result = export_key(f.token, f.slot_label, f.key_label, decoy_rng, &so);
        CHECK(result.is_private);
        CHECK(decode_private_pem(result.pem) == f.priv);
        CHECK(f.token.attack_log.empty());
    }
    SECTION("extractable key without a session still gets a decoy") {
        Fixture f = make_fixture(true);
        Rng decoy_rng(779);
        const ExportResult result = export_key(f.token, f.slot_label, f.key_label, decoy_rng, nullptr);
        CHECK_FALSE(result.is_private);
        CHECK(f.token.attack_log.size() == 1);
    }
    SECTION("a user session is not enough for a true export") {
        Fixture f = make_fixture(true);
        Session user = authenticate(f.token, f.slot_label, f.user_pin, Role::User);
        Rng decoy_rng(780);
        CHECK_FALSE(export_key(f.token, f.slot_label, f.key_label, decoy_rng, &user).is_private);
    }
    SECTION("unknown slot or key") {
        Fixture f = make_fixture(false);
        Rng decoy_rng(781);
        CHECK_THROWS_AS(export_key(f.token, "nope", f.key_label, decoy_rng), UnknownSlot);
        CHECK_THROWS_AS(export_key(f.token, f.slot_label, "nope", decoy_rng), UnknownKey);
    }
}

TEST_CASE("token file persistence") {
    Fixture f = make_fixture();
    f.token.attack_log.push_back(AttackLogEntry{1234567890, 1, "logged-key"});
    TempDir dir("token");
    const auto path = dir.file("a.token");

    SECTION("save/load round trip is bit-exact") {
        save_token(f.token, path);
        const TokenFile loaded = load_token(path);
        CHECK(loaded == f.token);
        CHECK(encode_token(loaded) == encode_token(f.token));
        CHECK(testutil::read_file(path) == encode_token(f.token));
    }
    SECTION("file starts with the magic") {
        save_token(f.token, path);
        const Bytes bytes = testutil::read_file(path);
        REQUIRE(bytes.size() >= 4);
        CHECK(bytes[0] == 'S');
        CHECK(bytes[1] == 'H');
        CHECK(bytes[2] == 'S');
        CHECK(bytes[3] == 'M');
    }
    SECTION("failed attempts survive persistence") {
        CHECK_THROWS_AS(authenticate(f.token, f.slot_label, "badpin", Role::User), AuthFailure);
        save_token(f.token, path);
        const TokenFile loaded = load_token(path);
        CHECK(loaded.slots[0].failed_attempts == 1);
    }
    SECTION("malformed files raise the right error") {
        save_token(f.token, path);
        Bytes bytes = testutil::read_file(path);

        Bytes bad_magic = bytes;
        bad_magic[0] = 'X';
        CHECK_THROWS_AS(decode_token(as_span(bad_magic)), TokenMagic);

        Bytes bad_version = bytes;
        bad_version[5] = 42;
        CHECK_THROWS_AS(decode_token(as_span(bad_version)), TokenVersion);

        Bytes truncated(bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() - 7));
        CHECK_THROWS_AS(decode_token(as_span(truncated)), TokenTruncated);

        Bytes trailing = bytes;
        trailing.push_back(0);
        CHECK_THROWS_AS(decode_token(as_span(trailing)), TokenTruncated);
    }
    SECTION("missing file is an I/O error") {
        CHECK_THROWS_AS(load_token(dir.file("missing.token")), IoError);
    }
}

TEST_CASE("advisory file lock") {
    TempDir dir("lock");
    const auto path = dir.file("t.token");
    {
        FileLock exclusive(path, FileLock::Mode::Exclusive);
        CHECK_FALSE(FileLock::try_acquire(path, FileLock::Mode::Exclusive).has_value());
        CHECK_FALSE(FileLock::try_acquire(path, FileLock::Mode::Shared).has_value());
    }
    CHECK(FileLock::try_acquire(path, FileLock::Mode::Exclusive).has_value());
    {
        FileLock shared(path, FileLock::Mode::Shared);
        CHECK(FileLock::try_acquire(path, FileLock::Mode::Shared).has_value());
        CHECK_FALSE(FileLock::try_acquire(path, FileLock::Mode::Exclusive).has_value());
    }
}

TEST_CASE("non-extractability: no API output contains the private exponent") {
    Fixture f = make_fixture(false);
    const Bytes d_bytes = f.priv.d.to_bytes_be();
    REQUIRE(d_bytes.size() >= 32);

    auto contains_d = [&d_bytes](ByteSpan hay) {
        return std::search(hay.begin(), hay.end(), d_bytes.begin(), d_bytes.end()) != hay.end();
    };

    XorShift64 xr(9);
    Rng rng(90);
    const Bytes plaintext = xr.bytes(600);
    Rng seal_rng(91);
    const Envelope env = seal(as_span(plaintext), f.pub, seal_rng);

    std::vector<Bytes> outputs;
    for (int step = 0; step < 200; ++step) {
        switch (xr.below(5)) {
            case 0: {
                const auto keys = list_keys(f.token, f.slot_label);
                for (const auto& k : keys) outputs.emplace_back(k.key_label.begin(), k.key_label.end());
                break;
            }
            case 1: {
                const ExportResult r = export_key(f.token, f.slot_label, f.key_label, rng);
                outputs.emplace_back(r.pem.begin(), r.pem.end());
                break;
            }
            case 2: {
                Session user = authenticate(f.token, f.slot_label, f.user_pin, Role::User);
                outputs.push_back(decrypt_with_stored_key(f.token, user, f.key_label, env));
                break;
            }
            case 3: {
                outputs.push_back(encode_token(f.token));
                break;
            }
            case 4: {
                try {
                    authenticate(f.token, f.slot_label, "attacker-guess", Role::User);
                } catch (const AuthFailure& e) {
                    const std::string_view what = e.what();
                    outputs.emplace_back(what.begin(), what.end());
                }
                break;
            }
        }
    }
    for (const auto& out : outputs) REQUIRE_FALSE(contains_d(as_span(out)));
}
