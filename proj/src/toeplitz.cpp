#include "pkd/toeplitz.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace pkd {

void ToeplitzSpec::validate() const {
    if (rows == 0 || cols == 0)
        throw std::invalid_argument("toeplitz: rows and cols must be positive");
    if (seed.size() != rows + cols - 1)
        throw std::invalid_argument("toeplitz: seed length must be rows + cols - 1");
}

namespace {

// For every set bit of `selector`, XOR the window src[base - pos ..) of
// length out_len into out. Shared core of both multiply directions.
void accumulate_windows(BitString& out, const BitString& selector, const BitString& src,
                        std::uint64_t base, std::uint64_t out_len) {
    auto words = selector.words();
    for (std::size_t w = 0; w < words.size(); ++w) {
        std::uint64_t v = words[w];
        while (v != 0) {
            int lead = std::countl_zero(v);
            std::uint64_t pos = 64 * w + std::uint64_t(lead);
            out.xor_window(src, base - pos, out_len);
            v &= ~(std::uint64_t(1) << (63 - lead));
        }
    }
}

} // namespace

BitString mask_vector(const BitString& k, const ToeplitzSpec& spec) {
    spec.validate();
    if (k.size() != spec.rows)
        throw std::invalid_argument("mask_vector: |K| must equal rows");
    // D[j] = xor_i K[i] seed[i - j + cols - 1]. With R = reversed seed,
    // the i-th row is the contiguous window R[rows-1-i ..) of length cols.
    BitString reversed = spec.seed.reversed();
    BitString d(spec.cols);
    accumulate_windows(d, k, reversed, spec.rows - 1, spec.cols);
    return d;
}

BitString privacy_amplify(const BitString& key, const ToeplitzSpec& spec) {
    spec.validate();
    if (key.size() != spec.cols)
        throw std::invalid_argument("privacy_amplify: |key| must equal cols");
    // Gamma[i] = xor_j key[j] seed[i + (cols - 1 - j)]: column j contributes
    // the window seed[cols-1-j ..) of length rows.
    BitString gamma(spec.rows);
    accumulate_windows(gamma, key, spec.seed, spec.cols - 1, spec.rows);
    return gamma;
}

BitString verification_tag(const BitString& key, const ToeplitzSpec& spec) {
    return privacy_amplify(key, spec);
}

std::uint64_t tag_bits_for(double eps_correct) {
    if (!(eps_correct > 0.0 && eps_correct < 1.0))
        throw std::invalid_argument("tag_bits_for: eps out of (0,1)");
    return std::uint64_t(std::ceil(std::log2(2.0 / eps_correct)));
}

} // namespace pkd
