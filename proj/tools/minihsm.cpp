// minihsm command line: keygen, slot management, hybrid encrypt/decrypt,
// extraction-attack harness and the measurement harness.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <termios.h>
#include <unistd.h>

#include <CLI11.hpp>

#include "minihsm/minihsm.hpp"

namespace fs = std::filesystem;
using namespace minihsm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAuth = 2;
constexpr int kExitCrypto = 3;
constexpr int kExitIo = 4;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const AuthFailure*>(&e) != nullptr) return kExitAuth;
    if (dynamic_cast<const RoleDenied*>(&e) != nullptr) return kExitAuth;
    if (dynamic_cast<const IoError*>(&e) != nullptr) return kExitIo;
    if (dynamic_cast<const Error*>(&e) != nullptr) return kExitCrypto;
    if (dynamic_cast<const std::invalid_argument*>(&e) != nullptr) return kExitUsage;
    return kExitCrypto;
}

// no-echo PIN prompt; falls back to a plain line read when stdin is not
// a terminal (piped scripts)
std::string prompt_pin(const std::string& what) {
    std::cerr << what << ": " << std::flush;
    std::string pin;
    if (isatty(STDIN_FILENO)) {
        termios before{};
        tcgetattr(STDIN_FILENO, &before);
        termios silent = before;
        silent.c_lflag &= ~static_cast<tcflag_t>(ECHO);
        tcsetattr(STDIN_FILENO, TCSAFLUSH, &silent);
        std::getline(std::cin, pin);
        tcsetattr(STDIN_FILENO, TCSAFLUSH, &before);
        std::cerr << '\n';
    } else {
        std::getline(std::cin, pin);
    }
    return pin;
}

// precedence: flag > environment > interactive prompt
std::string resolve_pin(const std::string& flag_value, const char* env_name, const std::string& what) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv(env_name); env != nullptr && *env != '\0') return env;
    return prompt_pin(what);
}

void require_new_file(const fs::path& path, bool force) {
    if (!force && fs::exists(path))
        throw std::invalid_argument(path.string() + " already exists (use --force to overwrite)");
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << text;
    if (!out) throw IoError("write failed on " + path.string());
}

Rng make_rng(const std::optional<std::uint64_t>& seed) {
    return seed.has_value() ? Rng(*seed) : Rng();
}

struct CommonOpts {
    std::string token_path = "minihsm.token";
    std::optional<std::uint64_t> seed;
    bool force = false;
};

int cmd_keygen(std::size_t bits, std::uint64_t e, const fs::path& out_pub, const fs::path& out_priv,
               const CommonOpts& opts) {
    require_new_file(out_pub, opts.force);
    require_new_file(out_priv, opts.force);
    Rng rng = make_rng(opts.seed);
    auto [pub, priv] = generate_keypair(bits, rng, e);
    write_text_file(out_pub, encode_pem(pub));
    write_text_file(out_priv, encode_pem(priv));
    std::cout << "wrote " << out_pub.string() << " and " << out_priv.string() << " (" << bits << "-bit modulus)\n";
    return kExitOk;
}

int cmd_init_slot(const std::string& label, const std::string& user_pin_flag, const std::string& so_pin_flag,
                  std::uint32_t kdf_iterations, const CommonOpts& opts) {
    const std::string user_pin = resolve_pin(user_pin_flag, "MINIHSM_USER_PIN", "user PIN for slot " + label);
    const std::string so_pin = resolve_pin(so_pin_flag, "MINIHSM_SO_PIN", "security officer PIN for slot " + label);

    FileLock lock(opts.token_path, FileLock::Mode::Exclusive);
    TokenFile token;
    if (fs::exists(opts.token_path)) token = load_token(opts.token_path, /*with_lock=*/false);
    Rng rng = make_rng(opts.seed);
    const std::uint32_t slot_id = create_slot(token, label, user_pin, so_pin, rng, kdf_iterations);
    save_token(token, opts.token_path, /*with_lock=*/false);
    std::cout << "created slot " << slot_id << " (\"" << label << "\") in " << opts.token_path << "\n";
    return kExitOk;
}

int cmd_import_key(const std::string& slot_label, const std::string& key_label, const fs::path& key_path,
                   bool extractable, const std::string& protection_name_str, const std::string& so_pin_flag,
                   const CommonOpts& opts) {
    const auto protection = protection_from_name(protection_name_str);
    if (!protection.has_value()) throw std::invalid_argument("unknown protection level " + protection_name_str);
    const RsaPrivateKey priv = decode_private_pem(read_text_file(key_path));
    const std::string so_pin = resolve_pin(so_pin_flag, "MINIHSM_SO_PIN", "security officer PIN for slot " + slot_label);

    FileLock lock(opts.token_path, FileLock::Mode::Exclusive);
    TokenFile token = load_token(opts.token_path, /*with_lock=*/false);
    Rng rng = make_rng(opts.seed);
    int code = kExitOk;
    try {
        Session so = authenticate(token, slot_label, so_pin, Role::SecurityOfficer);
        import_private_key(token, so, key_label, priv, *protection, extractable, rng);
        std::cout << "imported key \"" << key_label << "\" into slot \"" << slot_label << "\"\n";
    } catch (const AuthFailure&) {
        code = kExitAuth;
        std::cerr << "error: authentication failed\n";
    }
    save_token(token, opts.token_path, /*with_lock=*/false);  // persists failed_attempts too
    return code;
}

int cmd_list_keys(const std::string& slot_label, const CommonOpts& opts) {
    const TokenFile token = load_token(opts.token_path);
    const auto keys = list_keys(token, slot_label);
    if (keys.empty()) {
        std::cout << "slot \"" << slot_label << "\" holds no keys\n";
        return kExitOk;
    }
    for (const auto& k : keys) {
        std::cout << k.key_label << "  " << protection_name(k.protection) << "  "
                  << (k.extractable ? "extractable" : "non-extractable") << "\n";
    }
    return kExitOk;
}

int cmd_encrypt(const fs::path& pub_path, const fs::path& in_path, const fs::path& out_path,
                const CommonOpts& opts) {
    require_new_file(out_path, opts.force);
    const RsaPublicKey pub = decode_public_pem(read_text_file(pub_path));
    Rng rng = make_rng(opts.seed);
    seal_file(in_path, out_path, pub, rng);
    std::cout << "sealed " << in_path.string() << " -> " << out_path.string() << "\n";
    return kExitOk;
}

int cmd_decrypt(const std::string& slot_label, const std::string& key_label, const fs::path& in_path,
                const fs::path& out_path, const std::string& user_pin_flag, const CommonOpts& opts) {
    require_new_file(out_path, opts.force);
    const std::string user_pin = resolve_pin(user_pin_flag, "MINIHSM_USER_PIN", "user PIN for slot " + slot_label);

    FileLock lock(opts.token_path, FileLock::Mode::Exclusive);
    TokenFile token = load_token(opts.token_path, /*with_lock=*/false);
    try {
        Session session = authenticate(token, slot_label, user_pin, Role::User);
        decrypt_file_with_stored_key(token, session, key_label, in_path, out_path);
    } catch (const AuthFailure&) {
        save_token(token, opts.token_path, /*with_lock=*/false);  // record the failed attempt
        std::cerr << "error: authentication failed\n";
        return kExitAuth;
    }
    std::cout << "opened " << in_path.string() << " -> " << out_path.string() << "\n";
    return kExitOk;
}

int cmd_attack(const std::string& slot_label, const std::string& key_label, const fs::path& out_pem,
               const fs::path& report_path, const std::string& so_pin_flag, const CommonOpts& opts) {
    Rng rng = make_rng(opts.seed);
    std::optional<AttackCredentials> creds;
    if (!so_pin_flag.empty()) creds = AttackCredentials{so_pin_flag};
    else if (const char* env = std::getenv("MINIHSM_SO_PIN"); env != nullptr && *env != '\0')
        creds = AttackCredentials{env};

    const AttackReport report = run_extraction_attack(opts.token_path, slot_label, key_label, out_pem, rng, creds);
    write_attack_report(report, report_path);

    const bool secure = report.verdict == Verdict::Secure;
    std::cout << "extraction attempt on \"" << key_label << "\" in slot \"" << slot_label << "\": "
              << (secure ? "verdict=secure" : "verdict=breached") << "\n"
              << "exported material written to " << out_pem.string() << " ("
              << (report.extracted_is_private ? "private key" : "decoy public key") << ")\n"
              << "report written to " << report_path.string() << "\n";
    return secure ? kExitOk : kExitAuth;
}

int cmd_bench(const std::string& op_name, std::uint64_t size_mb, int batches, int samples,
              const fs::path& out_path, bool json, const CommonOpts& opts) {
    BenchOp op;
    if (op_name == "encrypt") op = BenchOp::Encrypt;
    else if (op_name == "decrypt") op = BenchOp::Decrypt;
    else if (op_name == "slot-access") op = BenchOp::SlotAccess;
    else throw std::invalid_argument("unknown bench op " + op_name);

    const std::uint64_t size_bytes = size_mb * 1024 * 1024;
    const fs::path work_dir = fs::temp_directory_path() / ("minihsm-bench-" + std::to_string(::getpid()));
    BenchEnvironment env = prepare_bench(op, size_bytes, opts.seed.value_or(1), work_dir);
    BenchReport report = run_benchmark(op, size_bytes, batches, samples, env);
    if (json) emit_json(report, out_path);
    else emit_csv(report, out_path);

    std::error_code ec;
    fs::remove_all(work_dir, ec);
    char mean_buf[64];
    std::snprintf(mean_buf, sizeof(mean_buf), "%.3f", report.grand_mean.real_s);
    std::cout << "bench " << op_name << " on " << size_mb << " MB: mean real " << mean_buf << " s, report in "
              << out_path.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"minihsm: hybrid AES+RSA envelope encryption with a PIN-protected software key store"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::optional<std::uint64_t> seed_opt;

    // keygen
    auto* keygen = app.add_subcommand("keygen", "generate an RSA keypair as a PEM file pair");
    std::size_t kg_bits = 2048;
    std::uint64_t kg_e = 65537;
    std::string kg_pub, kg_priv;
    keygen->add_option("--bits", kg_bits, "modulus size (512/1024/2048/3072/4096)")->capture_default_str();
    keygen->add_option("--e", kg_e, "public exponent")->capture_default_str();
    keygen->add_option("--out-pub", kg_pub, "output path for the public key")->required();
    keygen->add_option("--out-priv", kg_priv, "output path for the private key")->required();

    // init-slot
    auto* init_slot = app.add_subcommand("init-slot", "create a PIN-protected slot in the token file");
    std::string is_label, is_user_pin, is_so_pin;
    std::uint32_t is_iters = kDefaultKdfIterations;
    init_slot->add_option("--label", is_label, "slot label")->required();
    init_slot->add_option("--user-pin", is_user_pin, "user PIN (else $MINIHSM_USER_PIN, else prompt)");
    init_slot->add_option("--so-pin", is_so_pin, "security officer PIN (else $MINIHSM_SO_PIN, else prompt)");
    init_slot->add_option("--kdf-iterations", is_iters, "PIN KDF iteration count")->capture_default_str();

    // import-key
    auto* import_key = app.add_subcommand("import-key", "import a private key into a slot (security officer)");
    std::string ik_slot, ik_label, ik_key, ik_protection = "protected", ik_so_pin;
    bool ik_extractable = false;
    import_key->add_option("--slot", ik_slot, "slot label")->required();
    import_key->add_option("--label", ik_label, "key label")->required();
    import_key->add_option("--key", ik_key, "private key PEM file")->required();
    import_key->add_flag("--extractable", ik_extractable, "allow later export by the security officer");
    import_key->add_option("--protection", ik_protection, "unprotected|protected|highly-protected")->capture_default_str();
    import_key->add_option("--so-pin", ik_so_pin, "security officer PIN (else $MINIHSM_SO_PIN, else prompt)");

    // list-keys
    auto* list_keys_cmd = app.add_subcommand("list-keys", "list key metadata in a slot");
    std::string lk_slot;
    list_keys_cmd->add_option("--slot", lk_slot, "slot label")->required();

    // encrypt
    auto* encrypt = app.add_subcommand("encrypt", "seal a file for a recipient public key");
    std::string en_pub, en_in, en_out;
    encrypt->add_option("--pub", en_pub, "recipient public key PEM")->required();
    encrypt->add_option("--in", en_in, "plaintext input file")->required();
    encrypt->add_option("--out", en_out, "envelope output file")->required();

    // decrypt
    auto* decrypt = app.add_subcommand("decrypt", "open an envelope with a stored slot key (user PIN)");
    std::string de_slot, de_label, de_in, de_out, de_user_pin;
    decrypt->add_option("--slot", de_slot, "slot label")->required();
    decrypt->add_option("--label", de_label, "key label")->required();
    decrypt->add_option("--in", de_in, "envelope input file")->required();
    decrypt->add_option("--out", de_out, "plaintext output file")->required();
    decrypt->add_option("--user-pin", de_user_pin, "user PIN (else $MINIHSM_USER_PIN, else prompt)");

    // attack
    auto* attack = app.add_subcommand("attack", "simulate a key-extraction attack against a slot");
    std::string at_slot, at_label, at_out = std::string(kDefaultExportName), at_report = "attack_report.txt", at_so_pin;
    attack->add_option("--slot", at_slot, "slot label")->required();
    attack->add_option("--label", at_label, "key label")->required();
    attack->add_option("--out", at_out, "where the extracted PEM lands")->capture_default_str();
    attack->add_option("--report", at_report, "key=value report path")->capture_default_str();
    attack->add_option("--so-pin", at_so_pin, "present security officer credentials (positive control)");

    // bench
    auto* bench = app.add_subcommand("bench", "run the time/memory measurement protocol");
    std::string be_op, be_out;
    std::uint64_t be_size_mb = 1;
    int be_batches = 10, be_samples = 8;
    bool be_json = false;
    bench->add_option("--op", be_op, "encrypt|decrypt|slot-access")->required();
    bench->add_option("--size-mb", be_size_mb, "workload size in MB")->capture_default_str();
    bench->add_option("--batches", be_batches, "number of batches")->capture_default_str();
    bench->add_option("--samples", be_samples, "samples per batch")->capture_default_str();
    bench->add_option("--out", be_out, "report output path")->required();
    bench->add_flag("--json", be_json, "emit JSON instead of CSV");

    // global options, reachable after the subcommand name too
    app.add_option("--token", opts.token_path, "token file path")->envname("MINIHSM_TOKEN")->capture_default_str();
    app.add_option("--seed", seed_opt, "deterministic randomness seed (testing)");
    app.add_flag("--force", opts.force, "overwrite existing output files");
    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    opts.seed = seed_opt;

    try {
        if (keygen->parsed()) return cmd_keygen(kg_bits, kg_e, kg_pub, kg_priv, opts);
        if (init_slot->parsed()) return cmd_init_slot(is_label, is_user_pin, is_so_pin, is_iters, opts);
        if (import_key->parsed())
            return cmd_import_key(ik_slot, ik_label, ik_key, ik_extractable, ik_protection, ik_so_pin, opts);
        if (list_keys_cmd->parsed()) return cmd_list_keys(lk_slot, opts);
        if (encrypt->parsed()) return cmd_encrypt(en_pub, en_in, en_out, opts);
        if (decrypt->parsed()) return cmd_decrypt(de_slot, de_label, de_in, de_out, de_user_pin, opts);
        if (attack->parsed()) return cmd_attack(at_slot, at_label, at_out, at_report, at_so_pin, opts);
        if (bench->parsed()) return cmd_bench(be_op, be_size_mb, be_batches, be_samples, be_out, be_json, opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return kExitUsage;
}
