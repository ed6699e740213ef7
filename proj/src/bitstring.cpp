#include "pkd/bitstring.hpp"

#include <bit>
#include <stdexcept>

namespace pkd {

namespace {

inline std::uint64_t low_mask(unsigned width) {
    return width >= 64 ? ~std::uint64_t(0) : ((std::uint64_t(1) << width) - 1);
}

} // namespace

void BitString::mask_tail() {
    unsigned tail = size_ & 63;
    if (tail != 0)
        words_.back() &= ~low_mask(64 - tail);
}

BitString BitString::from_string(std::string_view bits) {
    BitString out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        char c = bits[i];
        if (c != '0' && c != '1')
            throw std::invalid_argument("BitString::from_string: expected only '0'/'1'");
        if (c == '1')
            out.set_bit(i, true);
    }
    return out;
}

BitString BitString::from_bytes(std::span<const std::uint8_t> bytes, std::size_t nbits) {
    if (nbits > bytes.size() * 8)
        throw std::invalid_argument("BitString::from_bytes: not enough bytes");
    BitString out(nbits);
    for (std::size_t j = 0; j * 8 < nbits; ++j) {
        unsigned shift = 56 - 8 * (j & 7);
        out.words_[j >> 3] |= std::uint64_t(bytes[j]) << shift;
    }
    out.mask_tail();
    return out;
}

std::uint64_t BitString::substring(std::size_t index, unsigned width) const {
    if (width == 0 || width > 57)
        throw std::invalid_argument("BitString::substring: width out of range");
    std::size_t begin = index * width;
    if (begin + width > size_)
        throw std::out_of_range("BitString::substring: past end");
    std::size_t q = begin >> 6;
    unsigned r = begin & 63;
    if (r + width <= 64)
        return (words_[q] >> (64 - r - width)) & low_mask(width);
    unsigned hi = 64 - r;          // bits taken from words_[q]
    unsigned lo = width - hi;      // bits taken from words_[q+1]
    std::uint64_t v = (words_[q] & low_mask(hi)) << lo;
    v |= words_[q + 1] >> (64 - lo);
    return v;
}

void BitString::set_substring(std::size_t index, unsigned width, std::uint64_t value) {
    if (width == 0 || width > 57)
        throw std::invalid_argument("BitString::set_substring: width out of range");
    std::size_t begin = index * width;
    if (begin + width > size_)
        throw std::out_of_range("BitString::set_substring: past end");
    value &= low_mask(width);
    std::size_t q = begin >> 6;
    unsigned r = begin & 63;
    if (r + width <= 64) {
        unsigned shift = 64 - r - width;
        words_[q] = (words_[q] & ~(low_mask(width) << shift)) | (value << shift);
        return;
    }
    unsigned hi = 64 - r;
    unsigned lo = width - hi;
    words_[q] = (words_[q] & ~low_mask(hi)) | (value >> lo);
    std::uint64_t lo_bits = value & low_mask(lo);
    words_[q + 1] = (words_[q + 1] & low_mask(64 - lo)) | (lo_bits << (64 - lo));
}

void BitString::append_bit(bool v) {
    if ((size_ & 63) == 0)
        words_.push_back(0);
    ++size_;
    if (v)
        set_bit(size_ - 1, true);
}

void BitString::append_bits(std::uint64_t value, unsigned width) {
    if (width > 64)
        throw std::invalid_argument("BitString::append_bits: width > 64");
    for (unsigned i = width; i-- > 0;)
        append_bit((value >> i) & 1u);
}

void BitString::append(const BitString& other) {
    // Fast path when we are word-aligned.
    if ((size_ & 63) == 0) {
        std::size_t nbits = size_ + other.size_;
        words_.resize((nbits + 63) / 64, 0);
        std::size_t base = size_ >> 6;
        for (std::size_t w = 0; w < other.words_.size(); ++w)
            words_[base + w] = other.words_[w];
        size_ = nbits;
        return;
    }
    for (std::size_t i = 0; i < other.size_; ++i)
        append_bit(other.bit(i));
}

BitString BitString::slice(std::size_t begin, std::size_t len) const {
    if (begin + len > size_)
        throw std::out_of_range("BitString::slice: past end");
    BitString out(len);
    out.xor_window(*this, begin, len);
    return out;
}

BitString BitString::reversed() const {
    BitString out(size_);
    for (std::size_t i = 0; i < size_; ++i)
        if (bit(i))
            out.set_bit(size_ - 1 - i, true);
    return out;
}

void BitString::xor_window(const BitString& src, std::size_t src_begin, std::size_t len) {
    if (len > size_)
        throw std::invalid_argument("BitString::xor_window: window longer than destination");
    if (src_begin + len > src.size_)
        throw std::out_of_range("BitString::xor_window: source window past end");
    if (len == 0)
        return;
    std::size_t q = src_begin >> 6;
    unsigned r = src_begin & 63;
    std::size_t nwords = (len + 63) / 64;
    unsigned tail = len & 63;
    const auto& sw = src.words_;
    for (std::size_t w = 0; w < nwords; ++w) {
        std::uint64_t v;
        if (r == 0) {
            v = sw[q + w];
        } else {
            v = sw[q + w] << r;
            if (q + w + 1 < sw.size())
                v |= sw[q + w + 1] >> (64 - r);
        }
        // Drop source bits smeared past len-1 so destination bits beyond
        // the window stay untouched.
        if (w == nwords - 1 && tail != 0)
            v &= ~low_mask(64 - tail);
        words_[w] ^= v;
    }
    mask_tail();
}

BitString& BitString::operator^=(const BitString& other) {
    if (size_ != other.size_)
        throw std::invalid_argument("BitString::operator^=: length mismatch");
    for (std::size_t w = 0; w < words_.size(); ++w)
        words_[w] ^= other.words_[w];
    return *this;
}

BitString BitString::operator^(const BitString& other) const {
    BitString out = *this;
    out ^= other;
    return out;
}

bool BitString::operator==(const BitString& other) const {
    return size_ == other.size_ && words_ == other.words_;
}

bool BitString::parity_range(std::size_t begin, std::size_t end) const {
    if (end > size_ || begin > end)
        throw std::out_of_range("BitString::parity_range: bad range");
    if (begin == end)
        return false;
    std::size_t qb = begin >> 6, qe = (end - 1) >> 6;
    std::uint64_t acc = 0;
    if (qb == qe) {
        std::uint64_t w = words_[qb];
        w <<= (begin & 63);
        w >>= (begin & 63) + (63 - ((end - 1) & 63));
        acc = w;
    } else {
        acc = words_[qb] << (begin & 63);
        for (std::size_t q = qb + 1; q < qe; ++q)
            acc ^= words_[q];
        acc ^= words_[qe] >> (63 - ((end - 1) & 63));
    }
    return std::popcount(acc) & 1;
}

std::size_t BitString::popcount() const {
    std::size_t n = 0;
    for (std::uint64_t w : words_)
        n += std::popcount(w);
    return n;
}

std::size_t BitString::hamming_distance(const BitString& other) const {
    if (size_ != other.size_)
        throw std::invalid_argument("BitString::hamming_distance: length mismatch");
    std::size_t n = 0;
    for (std::size_t w = 0; w < words_.size(); ++w)
        n += std::popcount(words_[w] ^ other.words_[w]);
    return n;
}

std::vector<std::uint8_t> BitString::to_bytes() const {
    std::size_t nbytes = (size_ + 7) / 8;
    std::vector<std::uint8_t> out(nbytes);
    for (std::size_t j = 0; j < nbytes; ++j)
        out[j] = std::uint8_t(words_[j >> 3] >> (56 - 8 * (j & 7)));
    return out;
}

std::string BitString::to_string01() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i)
        if (bit(i))
            s[i] = '1';
    return s;
}

} // namespace pkd
