#include "pkd/entropy.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

#include <unistd.h>

namespace pkd {

namespace detail {

namespace {

inline std::uint32_t rotl32(std::uint32_t x, int n) {
    return (x << n) | (x >> (32 - n));
}

inline void quarter_round(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c, std::uint32_t& d) {
    a += b; d ^= a; d = rotl32(d, 16);
    c += d; b ^= c; b = rotl32(b, 12);
    a += b; d ^= a; d = rotl32(d, 8);
    c += d; b ^= c; b = rotl32(b, 7);
}

} // namespace

void chacha20_block(const std::array<std::uint32_t, 8>& key, std::uint32_t counter,
                    const std::array<std::uint32_t, 3>& nonce, std::uint8_t out[64]) {
    std::uint32_t state[16] = {
        0x61707865, 0x3320646e, 0x79622d32, 0x6b206574,
        key[0], key[1], key[2], key[3],
        key[4], key[5], key[6], key[7],
        counter, nonce[0], nonce[1], nonce[2],
    };
    std::uint32_t x[16];
    std::memcpy(x, state, sizeof(x));
    for (int round = 0; round < 10; ++round) {
        quarter_round(x[0], x[4], x[8], x[12]);
        quarter_round(x[1], x[5], x[9], x[13]);
        quarter_round(x[2], x[6], x[10], x[14]);
        quarter_round(x[3], x[7], x[11], x[15]);
        quarter_round(x[0], x[5], x[10], x[15]);
        quarter_round(x[1], x[6], x[11], x[12]);
        quarter_round(x[2], x[7], x[8], x[13]);
        quarter_round(x[3], x[4], x[9], x[14]);
    }
    for (int i = 0; i < 16; ++i) {
        std::uint32_t v = x[i] + state[i];
        out[4 * i + 0] = std::uint8_t(v);
        out[4 * i + 1] = std::uint8_t(v >> 8);
        out[4 * i + 2] = std::uint8_t(v >> 16);
        out[4 * i + 3] = std::uint8_t(v >> 24);
    }
}

} // namespace detail

Seed256 parse_seed_hex(std::string_view hex) {
    if (hex.size() != 64)
        throw std::invalid_argument("seed must be 64 hex characters");
    auto nibble = [](char c) -> unsigned {
        if (c >= '0' && c <= '9') return unsigned(c - '0');
        if (c >= 'a' && c <= 'f') return unsigned(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return unsigned(c - 'A' + 10);
        throw std::invalid_argument("seed contains a non-hex character");
    };
    Seed256 out{};
    for (std::size_t i = 0; i < 32; ++i)
        out[i] = std::uint8_t(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return out;
}

std::string seed_to_hex(const Seed256& seed) {
    static const char* digits = "0123456789abcdef";
    std::string s(64, '0');
    for (std::size_t i = 0; i < 32; ++i) {
        s[2 * i] = digits[seed[i] >> 4];
        s[2 * i + 1] = digits[seed[i] & 0xf];
    }
    return s;
}

EntropySource EntropySource::system() {
    EntropySource src;
    src.kind_ = Kind::system;
    return src;
}

EntropySource EntropySource::seeded(const Seed256& seed) {
    EntropySource src;
    src.kind_ = Kind::seeded;
    for (std::size_t i = 0; i < 8; ++i) {
        src.key_[i] = std::uint32_t(seed[4 * i]) |
                      std::uint32_t(seed[4 * i + 1]) << 8 |
                      std::uint32_t(seed[4 * i + 2]) << 16 |
                      std::uint32_t(seed[4 * i + 3]) << 24;
    }
    return src;
}

EntropySource EntropySource::fixed(std::vector<std::uint8_t> bytes) {
    if (bytes.empty())
        throw std::invalid_argument("fixed source needs at least one byte");
    EntropySource src;
    src.kind_ = Kind::fixed;
    src.fixed_bytes_ = std::move(bytes);
    return src;
}

void EntropySource::refill() {
    if (kind_ == Kind::system) {
        for (std::size_t off = 0; off < buffer_.size(); off += 256) {
            if (getentropy(buffer_.data() + off, 256) != 0)
                throw std::runtime_error("getentropy failed");
        }
    } else if (kind_ == Kind::fixed) {
        for (std::size_t off = 0; off < buffer_.size(); ++off) {
            buffer_[off] = fixed_bytes_[fixed_pos_];
            fixed_pos_ = (fixed_pos_ + 1) % fixed_bytes_.size();
        }
    } else {
        for (std::size_t off = 0; off < buffer_.size(); off += 64) {
            std::array<std::uint32_t, 3> nonce = {0, std::uint32_t(block_counter_ >> 32), 0};
            detail::chacha20_block(key_, std::uint32_t(block_counter_), nonce,
                                   buffer_.data() + off);
            ++block_counter_;
        }
    }
    buffer_len_ = buffer_.size();
    byte_pos_ = 0;
    bit_pos_ = 0;
}

std::uint64_t EntropySource::take(unsigned nbits) {
    std::uint64_t v = 0;
    unsigned got = 0;
    while (got < nbits) {
        if (byte_pos_ >= buffer_len_)
            refill();
        unsigned avail = 8 - bit_pos_;
        unsigned want = nbits - got;
        unsigned use = want < avail ? want : avail;
        unsigned shift = avail - use;
        std::uint64_t chunk = (buffer_[byte_pos_] >> shift) & ((1u << use) - 1);
        v = (v << use) | chunk;
        got += use;
        bit_pos_ += use;
        if (bit_pos_ == 8) {
            bit_pos_ = 0;
            ++byte_pos_;
        }
    }
    bits_drawn_ += nbits;
    return v;
}

BitString EntropySource::draw_bits(std::size_t count) {
    BitString out(count);
    std::size_t i = 0;
    for (; i + 32 <= count; i += 32)
        out.set_substring(i / 32, 32, take(32));
    for (; i < count; ++i)
        out.set_bit(i, take(1) & 1);
    return out;
}

std::uint64_t EntropySource::draw_uniform_index(std::uint64_t bound) {
    if (bound == 0)
        throw std::invalid_argument("draw_uniform_index: bound must be >= 1");
    if (bound == 1)
        return 0;
    unsigned nbits = unsigned(std::bit_width(bound - 1));
    if (std::has_single_bit(bound))
        return take(nbits);
    for (;;) {
        std::uint64_t v = take(nbits);
        if (v < bound)
            return v;
    }
}

Seed256 EntropySource::draw_seed() {
    Seed256 out;
    for (auto& b : out)
        b = std::uint8_t(take(8));
    return out;
}

} // namespace pkd
