#include <catch2/catch_amalgamated.hpp>

#include "minihsm/bigint.hpp"
#include "test_util.hpp"

using namespace minihsm;
using testutil::XorShift64;

namespace {

BigUint random_biguint(XorShift64& rng, std::size_t max_bytes) {
    const std::size_t n = 1 + rng.below(max_bytes);
    const Bytes b = rng.bytes(n);
    return BigUint::from_bytes_be(as_span(b));
}

}  // namespace

TEST_CASE("construction and encoding round trips") {
    CHECK(BigUint().is_zero());
    CHECK(BigUint(0).is_zero());
    CHECK(BigUint(1).to_hex() == "1");
    CHECK(BigUint(0xDEADBEEFCAFEBABEULL).to_hex() == "deadbeefcafebabe");
    CHECK(BigUint::from_hex("deadbeefcafebabe").to_u64() == 0xDEADBEEFCAFEBABEULL);

    SECTION("bytes round trip drops leading zeros") {
        const Bytes raw = from_hex("0000abcd12");
        const BigUint v = BigUint::from_bytes_be(as_span(raw));
        CHECK(to_hex(as_span(v.to_bytes_be())) == "abcd12");
        CHECK(to_hex(as_span(v.to_bytes_be(5))) == "0000abcd12");
        CHECK_THROWS_AS(v.to_bytes_be(2), std::length_error);
    }
    SECTION("hex round trip on random values") {
        XorShift64 rng(1);
        for (int i = 0; i < 100; ++i) {
            const BigUint v = random_biguint(rng, 64);
            CHECK(BigUint::from_hex(v.to_hex()) == v);
        }
    }
    SECTION("bit_length") {
        CHECK(BigUint(0).bit_length() == 0);
        CHECK(BigUint(1).bit_length() == 1);
        CHECK(BigUint(255).bit_length() == 8);
        CHECK(BigUint(256).bit_length() == 9);
        CHECK((BigUint(1) << 511).bit_length() == 512);
    }
}

TEST_CASE("frozen multiplication and division vectors") {
    struct Vec {
        const char* a;
        const char* b;
        const char* prod;
        const char* quot;
        const char* rem;
    };
    // independently computed with arbitrary-precision integer arithmetic
    const Vec vectors[] = {
        {"bdd640fb06671ad11c80317fa3b1799d", "beb13b9046685257",
         "8d6871889a044cbc49446924cea1e24c58715379d00c9e5b", "feda06a7cfa5409a", "3a00ce88c9473147"},
        {"8b9d2434e465e150bd9c66b3ad3c2d6d1a3d1fa7bc8960a923b8c1e9392456de",
         "8822e8f36c031199972a846916419f82",
         "4a3e8526123dba22e217002f42df80c1b799121a5bb667afdcc74ea1f4dcdd137556a6edada257a78a810dabb8c5febc",
         "1068a0d1edf3d02a0a3d540453bd35be9", "7df583944ea66646317bed773590f38c"},
        {"12d72ff5d2a386ecbe06b65a6a48b8148f6b38a088ca65ed389b74d0fb132e706298fadc1a606cb0fb39a1de644815ef6d"
         "13b8faa1837f8a88b17fc695a07a0ca6e",
         "b2b9437a28df6ec4ce4a2bbdc241330b01a9e71fde8a774bcf36d58b47378190",
         "d2741d1e4372e5c6e0b4075ce089624faf9341e7537816a80f9f4757f0183193d4e23ac84b5ffe39f881cc974f4117cc90"
         "8d2aa0e73462f264407cb1d908535ee58270f8e5394c8a9e9482d242296468f9c30c4e5e1eb439d4db764be650154be0",
         "1afca17bdf25333fb8d33f9f6afa2fec76201b9a90d8815ecddc7a4e1d5c840fb27",
         "ae1c4bad971b1378388fdfe99518b8ad1bab6b520e020e39967eca65de23dd7e"},
        {"9e574f7aa0ee89aed453dd324b0dbb418d5288f1142c3fe860e7a113ec1b8ca1f91e1d4c1ff49b7889463e85759cde66ba"
         "cfb3d00b1f9163ce9ff57f43b7a3a69a8dca03580d7b71d8f564135be6128e18c267976142ea7d17be31111a2a73ed562b"
         "0f79c37459eef50bea63371ecd7b27cd813047229389571aa8766c307511",
         "bb982ef8daf61a26146d3f31fc377a4c4a15544dc5e7ce8a3a578a8ea9488d990bbb259911ce5dd2b45ed1f03139d32c93"
         "cd59bf5c941cf0dc98d2c1e2acf72f",
         "7407e7f360a965ac71468b5ff4ef5da60835538aafecca4e6703d0e533040bd23c50151a36110c90c1675df0d0635c7dda"
         "789db3dca70c6dee5b252299b7ee0bf8f48193011632e010bd8939eefea9d26d44e22d30699754d5e63824cced4546ce0c"
         "0455a81a5e7fbfbe674da66da9d0f08dc436132c057d36673788234a1501b3fa0b58188fe00cfa02ff11b54f6c9ef5a52b"
         "972036019daed18087b9b05ec47492faaff9fb274c31de8b9388c4645b39553c31a3824b3ae02adbd94744e51f",
         "d81457475405cc1ea266035578f8aafe6654d47fae9c849e0dd213de5bf3452aefecf5b3b3f5d00af13fb5a8ad61b47883"
         "b2d5c56d4f71e8c6ce7f6181d3c435",
         "1929341edac03873143e42d34686e6dfaceb70c6e96e474380d6e754f5a9aa9dbb10a122fa60f1bab921eb05699e6f7890"
         "f7ceca78785dbd4d179dd8a6644c56"},
        {"a2bc372f7412b29347294739614ff3d719db3ad0ddd1dfb2", "135a240ae5af305535ec42e0829a3b2e95d65a441d58842de",
         "c4d452d516ac0c1814a370cafc37dd3e777ef9c783753c9182ba2849115f97f8575aea995c34e9cfa99e2520683be05c",
         "0", "a2bc372f7412b29347294739614ff3d719db3ad0ddd1dfb2"},
    };
    for (const auto& v : vectors) {
        const BigUint a = BigUint::from_hex(v.a);
        const BigUint b = BigUint::from_hex(v.b);
        CHECK((a * b).to_hex() == v.prod);
        const auto [q, r] = BigUint::divmod(a, b);
        CHECK(q.to_hex() == v.quot);
        CHECK(r.to_hex() == v.rem);
    }
}

TEST_CASE("division identity holds on random operands") {
    XorShift64 rng(2);
    for (int trial = 0; trial < 500; ++trial) {
        const BigUint a = random_biguint(rng, 96);
        BigUint b = random_biguint(rng, 48);
        if (b.is_zero()) b = BigUint(1);
        const auto [q, r] = BigUint::divmod(a, b);
        REQUIRE(r < b);
        REQUIRE(q * b + r == a);
    }
}

TEST_CASE("division edge cases") {
    const BigUint big = BigUint::from_hex("ffffffffffffffffffffffffffffffff");
    CHECK(BigUint::divmod(big, big).first == BigUint(1));
    CHECK(BigUint::divmod(big, big).second.is_zero());
    CHECK(BigUint::divmod(BigUint(5), big).first.is_zero());
    CHECK(BigUint::divmod(BigUint(5), big).second == BigUint(5));
    CHECK((big / BigUint(1)) == big);
    CHECK_THROWS_AS(BigUint::divmod(big, BigUint()), std::domain_error);

    // divisor with a top limb that forces maximal quotient-digit estimates
    const BigUint a = (BigUint(1) << 128) - BigUint(1);
    const BigUint b = (BigUint(1) << 64) + BigUint(1);
    const auto [q, r] = BigUint::divmod(a, b);
    CHECK(q * b + r == a);
    CHECK(r < b);

    // power-of-two divisors agree with shifts
    XorShift64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const BigUint v = random_biguint(rng, 40);
        const std::size_t k = rng.below(160);
        CHECK(v / (BigUint(1) << k) == v >> k);
    }
}

TEST_CASE("addition and subtraction") {
    XorShift64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const BigUint a = random_biguint(rng, 48);
        const BigUint b = random_biguint(rng, 48);
        const BigUint sum = a + b;
        REQUIRE(sum - a == b);
        REQUIRE(sum - b == a);
        REQUIRE(sum >= a);
    }
    CHECK_THROWS_AS(BigUint(1) - BigUint(2), std::underflow_error);

    // borrow ripples across many limbs
    const BigUint top = BigUint(1) << 256;
    CHECK((top - BigUint(1)).bit_length() == 256);
    CHECK(top - (top - BigUint(1)) == BigUint(1));
}

TEST_CASE("shifts") {
    XorShift64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const BigUint v = random_biguint(rng, 32);
        const std::size_t k = rng.below(200);
        CHECK(((v << k) >> k) == v);
    }
    CHECK((BigUint(1) << 0) == BigUint(1));
    CHECK((BigUint(0) << 100).is_zero());
    CHECK((BigUint(1) >> 1).is_zero());
}

TEST_CASE("comparisons") {
    CHECK(BigUint(0) < BigUint(1));
    CHECK(BigUint::from_hex("100000000") > BigUint::from_hex("ffffffff"));
    CHECK(BigUint::from_hex("ffffffffffffffff") == BigUint(0xFFFFFFFFFFFFFFFFULL));
    CHECK(BigUint(7).bit(0));
    CHECK(BigUint(7).bit(2));
    CHECK_FALSE(BigUint(7).bit(3));
    CHECK_FALSE(BigUint(7).bit(1000));
}
