#ifndef PKD_GOWF_HPP
#define PKD_GOWF_HPP

#include <cstdint>
#include <vector>

#include "pkd/bitstring.hpp"
#include "pkd/entropy.hpp"

namespace pkd {

// Raw-key error rate of the deterministic guess rule in the continuum
// limit: 1/2 - 1/pi.
inline constexpr double kRawErrorRate = 0.18169011381620932;

// Session parameters. The alphabet size must be a power of two.
struct Params {
    std::uint32_t alphabet_size = 1024;      // m
    std::uint64_t symbols = 1000000;         // n, substrings per session
    std::uint32_t measure_bits = 12;         // b, virtual-measurement resolution
    std::uint64_t mask_key_bits = 10000;     // s, per-session masking key length
    double eps_correct = 1e-15;
    double eps_secret = 1e-10;
    double max_efficiency = 1.6;             // f_max, reconciliation abort threshold

    unsigned symbol_width() const;                       // log2(m)
    std::uint64_t input_bits() const;                    // t = n * log2(m)
    std::uint64_t rule_bits() const;                     // m * log2(m)
    void validate() const;                               // throws on bad values
};

// A bijection on {0,...,m-1} with its inverse precomputed, so both the
// forward map (Alice) and per-symbol inversion stay O(1).
class MappingRule {
public:
    MappingRule(std::uint32_t m, std::vector<std::uint32_t> perm);

    std::uint32_t alphabet_size() const { return m_; }
    std::uint32_t map(std::uint32_t j) const { return perm_[j]; }
    std::uint32_t invert(std::uint32_t j) const { return inverse_[j]; }
    const std::vector<std::uint32_t>& permutation() const { return perm_; }

    MappingRule inverse_rule() const;
    bool operator==(const MappingRule& other) const { return m_ == other.m_ && perm_ == other.perm_; }

private:
    std::uint32_t m_;
    std::vector<std::uint32_t> perm_;
    std::vector<std::uint32_t> inverse_;
};

// Uniform permutation via Fisher-Yates driven by draw_uniform_index.
MappingRule sample_mapping_rule(EntropySource& source, std::uint32_t m);

// Wire encoding: perm[j] as the j-th width-log2(m) substring, MSB first;
// exactly m*log2(m) bits. deserialize rejects wrong length and
// non-bijective content.
BitString serialize_mapping_rule(const MappingRule& rule);
MappingRule deserialize_mapping_rule(const BitString& bits, std::uint32_t m);

// Substring-wise image of X under the rule; length preserved.
BitString apply_mapping(const MappingRule& rule, const BitString& x);

// Probability of output 0 for mapped symbol x': (1 + cos(2*pi*x'/m)) / 2.
double gowf_p0(std::uint32_t x_prime, std::uint32_t m);

// b-bit integer threshold floor(2^(b-1) * (1 + cos(2*pi*x'/m))); the
// virtual measurement emits 0 iff the drawn b-bit value is below it.
std::uint64_t measure_threshold(std::uint32_t x_prime, std::uint32_t m, std::uint32_t b);

// Samples y_i for every width-log2(m) substring of x_prime, consuming
// exactly n*b bits of entropy. Returns n bits.
BitString virtual_measure(const BitString& x_prime, EntropySource& source, const Params& params);

// Bob's deterministic estimate: z = 0 for x' in [0, m/4) or [3m/4, m),
// z = 1 for x' in [m/4, 3m/4).
BitString guess_output(const BitString& x_prime, std::uint32_t m);

// h(x) = -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0.
double binary_entropy(double x);

// Exact error rate of guess_output against the quantized measurement:
// (1/m) * sum over x' of Pr[z(x') != y(x')]. Tends to 1/2 - 1/pi.
double guess_error_probability(std::uint32_t m, std::uint32_t b);

} // namespace pkd

#endif
