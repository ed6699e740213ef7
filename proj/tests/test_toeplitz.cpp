#include <doctest.h>

#include <stdexcept>

#include "pkd/entropy.hpp"
#include "pkd/toeplitz.hpp"

using namespace pkd;

namespace {

// Reference oracle: the naive double loop straight off the entry
// convention H[i][j] = seed[i - j + cols - 1].
BitString naive_row_times_matrix(const BitString& k, const ToeplitzSpec& spec) {
    BitString d(spec.cols);
    for (std::uint64_t j = 0; j < spec.cols; ++j) {
        bool v = false;
        for (std::uint64_t i = 0; i < spec.rows; ++i)
            v ^= k.bit(i) && spec.entry(i, j);
        d.set_bit(j, v);
    }
    return d;
}

BitString naive_matrix_times_vec(const BitString& key, const ToeplitzSpec& spec) {
    BitString out(spec.rows);
    for (std::uint64_t i = 0; i < spec.rows; ++i) {
        bool v = false;
        for (std::uint64_t j = 0; j < spec.cols; ++j)
            v ^= key.bit(j) && spec.entry(i, j);
        out.set_bit(i, v);
    }
    return out;
}

ToeplitzSpec random_spec(EntropySource& src, std::uint64_t rows, std::uint64_t cols) {
    return ToeplitzSpec{rows, cols, src.draw_bits(rows + cols - 1)};
}

} // namespace

TEST_CASE("spec validation and entry convention") {
    ToeplitzSpec spec{2, 3, BitString::from_string("1011")};
    spec.validate();
    // H row 0 = seed[2], seed[1], seed[0]; row 1 = seed[3], seed[2], seed[1]
    CHECK(spec.entry(0, 0) == true);
    CHECK(spec.entry(0, 1) == false);
    CHECK(spec.entry(0, 2) == true);
    CHECK(spec.entry(1, 0) == true);
    CHECK(spec.entry(1, 1) == true);
    CHECK(spec.entry(1, 2) == false);

    ToeplitzSpec bad{2, 3, BitString::from_string("101")};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("diagonal constancy") {
    auto src = EntropySource::seeded({});
    ToeplitzSpec spec = random_spec(src, 17, 23);
    for (std::uint64_t i = 1; i < spec.rows; ++i)
        for (std::uint64_t j = 1; j < spec.cols; ++j)
            CHECK(spec.entry(i, j) == spec.entry(i - 1, j - 1));
}

TEST_CASE("masking example from the entry convention") {
    ToeplitzSpec spec{2, 3, BitString::from_string("1011")};
    BitString k = BitString::from_string("10");
    BitString d = mask_vector(k, spec);
    CHECK(d == naive_row_times_matrix(k, spec));
    CHECK(d.to_string01() == "101"); // row 0 of H
    CHECK(mask_vector(BitString::from_string("00"), spec).popcount() == 0);
    CHECK_THROWS_AS(mask_vector(BitString::from_string("1"), spec), std::invalid_argument);
}

TEST_CASE("masking is linear over GF(2)") {
    auto src = EntropySource::seeded({});
    for (int trial = 0; trial < 50; ++trial) {
        std::uint64_t rows = 1 + src.draw_uniform_index(64);
        std::uint64_t cols = 1 + src.draw_uniform_index(150);
        ToeplitzSpec spec = random_spec(src, rows, cols);
        BitString k1 = src.draw_bits(rows), k2 = src.draw_bits(rows);
        CHECK(mask_vector(k1 ^ k2, spec) == (mask_vector(k1, spec) ^ mask_vector(k2, spec)));
    }
}

TEST_CASE("word-packed paths match the naive oracle") {
    auto src = EntropySource::seeded({});
    for (int trial = 0; trial < 250; ++trial) {
        std::uint64_t rows = 1 + src.draw_uniform_index(128);
        std::uint64_t cols = 1 + src.draw_uniform_index(256);
        ToeplitzSpec spec = random_spec(src, rows, cols);
        BitString k = src.draw_bits(rows);
        CHECK(mask_vector(k, spec) == naive_row_times_matrix(k, spec));
        BitString key = src.draw_bits(cols);
        CHECK(privacy_amplify(key, spec) == naive_matrix_times_vec(key, spec));
    }
}

TEST_CASE("privacy amplification basics") {
    auto src = EntropySource::seeded({});
    ToeplitzSpec spec = random_spec(src, 16, 64);
    CHECK(privacy_amplify(BitString(64), spec).popcount() == 0);
    BitString key = src.draw_bits(64);
    CHECK(privacy_amplify(key, spec) == naive_matrix_times_vec(key, spec));
    CHECK_THROWS_AS(privacy_amplify(src.draw_bits(63), spec), std::invalid_argument);

    // single output row: parity of key AND one seed window
    ToeplitzSpec one{1, 64, src.draw_bits(64)};
    BitString g = privacy_amplify(key, one);
    bool expect = false;
    for (std::uint64_t j = 0; j < 64; ++j)
        expect ^= key.bit(j) && one.entry(0, j);
    CHECK(g.bit(0) == expect);
}

TEST_CASE("tag length for the correctness bound") {
    CHECK(tag_bits_for(1e-15) == 51);
    CHECK(tag_bits_for(1e-10) == 35); // ceil(log2(2e10))
    CHECK_THROWS_AS(tag_bits_for(0.0), std::invalid_argument);
}

TEST_CASE("equal keys give equal tags, distinct keys never collide here") {
    auto src = EntropySource::seeded({});
    const std::uint64_t tag_len = 51;
    const std::uint64_t key_len = 64;
    std::uint64_t collisions = 0;
    const int trials = 100000;
    for (int t = 0; t < trials; ++t) {
        ToeplitzSpec spec{tag_len, key_len, src.draw_bits(tag_len + key_len - 1)};
        BitString key = src.draw_bits(key_len);
        BitString error(key_len);
        do {
            error = BitString(key_len);
            error.set_bit(src.draw_uniform_index(key_len), true);
        } while (error.popcount() == 0);
        if (t % 1000 == 0)
            CHECK(verification_tag(key, spec) == verification_tag(key, spec));
        if (verification_tag(key, spec) == verification_tag(key ^ error, spec))
            ++collisions;
    }
    // Expected collisions <= trials * 2^-51; observing zero is the pass.
    CHECK(collisions == 0);
}
