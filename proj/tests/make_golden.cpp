// Regenerates the fixtures under tests/golden. Run manually when the
// token or envelope layout changes, then commit the outputs.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "minihsm/minihsm.hpp"

using namespace minihsm;

namespace {

constexpr std::uint64_t kKeySeed = 0xC0FFEE;
constexpr std::uint64_t kTokenSeed = 0xBEEF;
constexpr std::uint64_t kSealSeed = 0x5EA1;
constexpr std::uint32_t kIterations = 64;

void write(const std::filesystem::path& path, ByteSpan data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("cannot write " + path.string());
    std::cout << "wrote " << path.string() << " (" << data.size() << " bytes)\n";
}

}  // namespace

int main() {
    const std::filesystem::path dir = MINIHSM_TEST_DATA_DIR;
    std::filesystem::create_directories(dir);

    Rng key_rng(kKeySeed);
    const auto [pub, priv] = generate_keypair(512, key_rng);

    // token with one slot, one non-extractable key, one logged attempt
    TokenFile token;
    Rng token_rng(kTokenSeed);
    create_slot(token, "golden-slot", "golden-user-pin", "golden-so-pin", token_rng, kIterations);
    Session so = authenticate(token, "golden-slot", "golden-so-pin", Role::SecurityOfficer);
    import_private_key(token, so, "golden-key", priv, Protection::Protected, false, token_rng);
    token.attack_log.push_back(AttackLogEntry{1700000000, 1, "golden-key"});
    write(dir / "golden.token", as_span(encode_token(token)));

    // envelope over a fixed plaintext
    const std::string text = "golden envelope fixture payload: forty-seven bytes";
    Rng seal_rng(kSealSeed);
    const Envelope env = seal(str_span(text), pub, seal_rng);
    write(dir / "golden.env", as_span(encode_envelope(env)));

    return 0;
}
