#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "pkd/entropy.hpp"

using pkd::EntropySource;
using pkd::Seed256;

TEST_CASE("chacha20 block matches RFC 8439 2.3.2") {
    std::array<std::uint32_t, 8> key;
    for (std::size_t i = 0; i < 8; ++i)
        key[i] = std::uint32_t(4 * i) | std::uint32_t(4 * i + 1) << 8 |
                 std::uint32_t(4 * i + 2) << 16 | std::uint32_t(4 * i + 3) << 24;
    std::array<std::uint32_t, 3> nonce = {0x09000000u, 0x4a000000u, 0u};
    std::uint8_t out[64];
    pkd::detail::chacha20_block(key, 1, nonce, out);
    static const std::uint8_t expect[64] = {
        0x10, 0xf1, 0xe7, 0xe4, 0xd1, 0x3b, 0x59, 0x15, 0x50, 0x0f, 0xdd, 0x1f, 0xa3,
        0x20, 0x71, 0xc4, 0xc7, 0xd1, 0xf4, 0xc7, 0x33, 0xc0, 0x68, 0x03, 0x04, 0x22,
        0xaa, 0x9a, 0xc3, 0xd4, 0x6c, 0x4e, 0xd2, 0x82, 0x64, 0x46, 0x07, 0x9f, 0xaa,
        0x09, 0x14, 0xc2, 0xd7, 0x05, 0xd9, 0x8b, 0x02, 0xa2, 0xb5, 0x12, 0x9c, 0xd1,
        0xde, 0x16, 0x4e, 0xb9, 0xcb, 0xd0, 0x83, 0xe8, 0xa2, 0x50, 0x3c, 0x4e,
    };
    for (int i = 0; i < 64; ++i)
        CHECK(out[i] == expect[i]);
}

TEST_CASE("seed hex parsing") {
    Seed256 z = pkd::parse_seed_hex(std::string(64, '0'));
    for (auto b : z)
        CHECK(b == 0);
    CHECK(pkd::seed_to_hex(z) == std::string(64, '0'));
    CHECK_THROWS_AS(pkd::parse_seed_hex("abc"), std::invalid_argument);
    CHECK_THROWS_AS(pkd::parse_seed_hex(std::string(63, '0') + "g"), std::invalid_argument);
}

TEST_CASE("draw_bits empty and determinism") {
    Seed256 seed{};
    seed[0] = 7;
    auto a = EntropySource::seeded(seed);
    CHECK(a.draw_bits(0).size() == 0);
    CHECK(a.bits_drawn() == 0);

    auto b = EntropySource::seeded(seed);
    auto c = EntropySource::seeded(seed);
    CHECK(b.draw_bits(64) == c.draw_bits(64));

    Seed256 other = seed;
    other[31] = 1;
    auto d = EntropySource::seeded(other);
    CHECK(b.draw_bits(128) != d.draw_bits(128)); // d starts from its own stream
}

TEST_CASE("bits_drawn counts exactly") {
    auto src = EntropySource::seeded({});
    src.draw_bits(13);
    CHECK(src.bits_drawn() == 13);
    src.draw_uniform_index(1024);
    CHECK(src.bits_drawn() == 23); // power of two: exactly 10 bits
    src.draw_uniform_index(1);
    CHECK(src.bits_drawn() == 23); // single outcome consumes nothing
}

TEST_CASE("seeded stream is balanced") {
    auto src = EntropySource::seeded({});
    auto bits = src.draw_bits(1000000);
    double ones = double(bits.popcount()) / 1e6;
    CHECK(ones >= 0.498);
    CHECK(ones <= 0.502);
}

TEST_CASE("draw_uniform_index contract") {
    auto src = EntropySource::seeded({});
    CHECK(src.draw_uniform_index(1) == 0);
    CHECK_THROWS_AS(src.draw_uniform_index(0), std::invalid_argument);
    for (std::uint64_t bound : {2ull, 3ull, 5ull, 24ull, 1000ull}) {
        for (int i = 0; i < 2000; ++i)
            CHECK(src.draw_uniform_index(bound) < bound);
    }
}

TEST_CASE("draw_uniform_index is uniform over 24 cells") {
    auto src = EntropySource::seeded({});
    const std::uint64_t trials = 1000000;
    std::vector<std::uint64_t> counts(24, 0);
    for (std::uint64_t i = 0; i < trials; ++i)
        ++counts[src.draw_uniform_index(24)];
    double p = 1.0 / 24;
    double sigma = std::sqrt(double(trials) * p * (1 - p));
    for (auto c : counts)
        CHECK(std::fabs(double(c) - trials * p) <= 3 * sigma);
}

TEST_CASE("fixed source serves its bytes MSB-first") {
    auto src = EntropySource::fixed({0xA5, 0x00});
    CHECK(src.draw_bits(8).to_string01() == "10100101");
    CHECK(src.draw_bits(8).to_string01() == "00000000");
    CHECK(src.draw_bits(4).to_string01() == "1010"); // cycles
}

TEST_CASE("system source delivers distinct draws") {
    auto a = EntropySource::system();
    CHECK(a.draw_bits(256) != a.draw_bits(256));
    CHECK(a.bits_drawn() == 512);
}
