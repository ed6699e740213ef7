#ifndef PKD_ENTROPY_HPP
#define PKD_ENTROPY_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pkd/bitstring.hpp"

namespace pkd {

using Seed256 = std::array<std::uint8_t, 32>;

// Parses 64 hex characters into a 32-byte seed. Throws on bad input.
Seed256 parse_seed_hex(std::string_view hex);
std::string seed_to_hex(const Seed256& seed);

// Uniform random bit supply. Two kinds:
//   - system: OS CSPRNG, non-reproducible.
//   - seeded: ChaCha20 keystream keyed by a 32-byte seed; equal seeds give
//     identical bit streams.
// Bits are served MSB-first from the underlying byte stream and the source
// keeps sub-byte position, so consumption counts are exact. Single-owner:
// use one source per worker.
class EntropySource {
public:
    static EntropySource system();
    static EntropySource seeded(const Seed256& seed);
    // Serves the given bytes, cycling forever. For tests that need a
    // hand-crafted stream (forced shuffles, rejection paths).
    static EntropySource fixed(std::vector<std::uint8_t> bytes);

    BitString draw_bits(std::size_t count);

    // Uniform in [0, bound). Power-of-two bounds consume exactly
    // log2(bound) bits; other bounds use mask-and-accept rejection.
    std::uint64_t draw_uniform_index(std::uint64_t bound);

    // Convenience: next 32 bytes of the stream as a derived seed.
    Seed256 draw_seed();

    std::uint64_t bits_drawn() const { return bits_drawn_; }

private:
    EntropySource() = default;

    std::uint64_t take(unsigned nbits); // nbits <= 57
    void refill();

    enum class Kind { system, seeded, fixed } kind_ = Kind::system;

    // ChaCha20 state (seeded kind only).
    std::array<std::uint32_t, 8> key_{};
    std::uint64_t block_counter_ = 0;
    std::vector<std::uint8_t> fixed_bytes_;
    std::size_t fixed_pos_ = 0;

    std::array<std::uint8_t, 256> buffer_{};
    std::size_t buffer_len_ = 0;   // valid bytes
    std::size_t byte_pos_ = 0;     // next byte to consume from
    unsigned bit_pos_ = 0;         // bits already consumed from buffer_[byte_pos_]
    std::uint64_t bits_drawn_ = 0;
};

namespace detail {
// One 64-byte ChaCha20 block (RFC 8439 layout, 32-bit counter + 96-bit
// nonce packed from a 64-bit block index). Exposed for known-answer tests.
void chacha20_block(const std::array<std::uint32_t, 8>& key, std::uint32_t counter,
                    const std::array<std::uint32_t, 3>& nonce, std::uint8_t out[64]);
}

} // namespace pkd

#endif
