#ifndef PKD_BITSTRING_HPP
#define PKD_BITSTRING_HPP

#include <cstdint>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pkd {

// Packed bit string, MSB-first. Bit i lives in word i/64 at position
// 63 - (i % 64), so the first bit of the string is the most significant
// bit of the first word and byte serialization is a plain big-endian
// dump. Unused tail bits of the last word are kept zero.
class BitString {
public:
    BitString() = default;
    explicit BitString(std::size_t nbits) : words_((nbits + 63) / 64, 0), size_(nbits) {}

    // "1011"-style literal, for tests and golden values.
    static BitString from_string(std::string_view bits);
    static BitString from_bytes(std::span<const std::uint8_t> bytes, std::size_t nbits);

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    bool bit(std::size_t i) const {
        return (words_[i >> 6] >> (63 - (i & 63))) & 1u;
    }
    void set_bit(std::size_t i, bool v) {
        std::uint64_t mask = std::uint64_t(1) << (63 - (i & 63));
        if (v)
            words_[i >> 6] |= mask;
        else
            words_[i >> 6] &= ~mask;
    }
    void flip_bit(std::size_t i) { words_[i >> 6] ^= std::uint64_t(1) << (63 - (i & 63)); }

    // Value of bits [index*width, (index+1)*width), MSB first. width <= 57.
    std::uint64_t substring(std::size_t index, unsigned width) const;
    void set_substring(std::size_t index, unsigned width, std::uint64_t value);

    void append_bit(bool v);
    // Appends the low `width` bits of value, MSB first.
    void append_bits(std::uint64_t value, unsigned width);
    void append(const BitString& other);

    BitString slice(std::size_t begin, std::size_t len) const;
    BitString reversed() const;

    // this[0..len) ^= src[src_begin .. src_begin+len). Word-level shifted XOR.
    void xor_window(const BitString& src, std::size_t src_begin, std::size_t len);

    BitString& operator^=(const BitString& other);
    BitString operator^(const BitString& other) const;
    bool operator==(const BitString& other) const;
    bool operator!=(const BitString& other) const { return !(*this == other); }

    // XOR-fold of bits [begin, end).
    bool parity_range(std::size_t begin, std::size_t end) const;
    bool parity() const { return parity_range(0, size_); }
    std::size_t popcount() const;
    std::size_t hamming_distance(const BitString& other) const;

    std::vector<std::uint8_t> to_bytes() const;
    std::string to_string01() const;

    std::span<const std::uint64_t> words() const { return words_; }

private:
    void mask_tail();

    std::vector<std::uint64_t> words_;
    std::size_t size_ = 0;
};

} // namespace pkd

#endif
