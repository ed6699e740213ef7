#ifndef PKD_TOEPLITZ_HPP
#define PKD_TOEPLITZ_HPP

#include <cstdint>

#include "pkd/bitstring.hpp"

namespace pkd {

// Toeplitz matrix over GF(2), defined by a seed of rows + cols - 1 bits:
// H[i][j] = seed[i - j + cols - 1]. Entries are constant along diagonals.
struct ToeplitzSpec {
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    BitString seed;

    void validate() const; // throws when seed length != rows + cols - 1
    bool entry(std::uint64_t i, std::uint64_t j) const {
        return seed.bit(i - j + cols - 1);
    }
};

// D = K * H, a row vector times the matrix; |K| = rows, |D| = cols.
// Processes K one set bit at a time, XORing a shifted window of the
// reversed seed into the accumulator: O(weight(K) * cols / 64).
BitString mask_vector(const BitString& k, const ToeplitzSpec& spec);

// Gamma = H * key; |key| = cols, |Gamma| = rows. Same windowing trick on
// the un-reversed seed.
BitString privacy_amplify(const BitString& key, const ToeplitzSpec& spec);

// Alias of H * key used for error verification; rows = tag length.
BitString verification_tag(const BitString& key, const ToeplitzSpec& spec);

// Tag length for a correctness bound: ceil(log2(2 / eps_correct)).
std::uint64_t tag_bits_for(double eps_correct);

} // namespace pkd

#endif
