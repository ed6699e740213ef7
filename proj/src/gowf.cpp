#include "pkd/gowf.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pkd {

unsigned Params::symbol_width() const {
    return unsigned(std::bit_width(std::uint64_t(alphabet_size)) - 1);
}

std::uint64_t Params::input_bits() const {
    return symbols * symbol_width();
}

std::uint64_t Params::rule_bits() const {
    return std::uint64_t(alphabet_size) * symbol_width();
}

void Params::validate() const {
    if (alphabet_size < 4 || !std::has_single_bit(alphabet_size))
        throw std::invalid_argument("params: alphabet size must be a power of two >= 4");
    if (measure_bits < 2 || measure_bits > 57)
        throw std::invalid_argument("params: measurement resolution out of range");
    if (symbols < 1)
        throw std::invalid_argument("params: need at least one symbol");
    if (mask_key_bits < 1)
        throw std::invalid_argument("params: masking key must be nonempty");
    if (!(eps_correct > 0.0 && eps_correct < 1.0))
        throw std::invalid_argument("params: eps_correct out of (0,1)");
    if (!(eps_secret > 0.0 && eps_secret < 1.0))
        throw std::invalid_argument("params: eps_secret out of (0,1)");
    if (max_efficiency < 1.0)
        throw std::invalid_argument("params: max efficiency must be >= 1");
}

MappingRule::MappingRule(std::uint32_t m, std::vector<std::uint32_t> perm)
    : m_(m), perm_(std::move(perm)), inverse_(m, m) {
    if (perm_.size() != m_)
        throw std::invalid_argument("mapping rule: permutation size != m");
    for (std::uint32_t j = 0; j < m_; ++j) {
        std::uint32_t v = perm_[j];
        if (v >= m_ || inverse_[v] != m_)
            throw std::invalid_argument("mapping rule: not a bijection");
        inverse_[v] = j;
    }
}

MappingRule MappingRule::inverse_rule() const {
    return MappingRule(m_, inverse_);
}

MappingRule sample_mapping_rule(EntropySource& source, std::uint32_t m) {
    if (m < 4 || !std::has_single_bit(m))
        throw std::invalid_argument("sample_mapping_rule: m must be a power of two >= 4");
    std::vector<std::uint32_t> perm(m);
    for (std::uint32_t j = 0; j < m; ++j)
        perm[j] = j;
    for (std::uint32_t i = m - 1; i >= 1; --i) {
        auto j = std::uint32_t(source.draw_uniform_index(i + 1));
        std::swap(perm[i], perm[j]);
    }
    return MappingRule(m, std::move(perm));
}

BitString serialize_mapping_rule(const MappingRule& rule) {
    std::uint32_t m = rule.alphabet_size();
    unsigned w = unsigned(std::bit_width(m) - 1);
    BitString bits(std::uint64_t(m) * w);
    for (std::uint32_t j = 0; j < m; ++j)
        bits.set_substring(j, w, rule.map(j));
    return bits;
}

MappingRule deserialize_mapping_rule(const BitString& bits, std::uint32_t m) {
    if (m < 4 || !std::has_single_bit(m))
        throw std::invalid_argument("deserialize_mapping_rule: bad m");
    unsigned w = unsigned(std::bit_width(m) - 1);
    if (bits.size() != std::uint64_t(m) * w)
        throw std::invalid_argument("deserialize_mapping_rule: wrong length");
    std::vector<std::uint32_t> perm(m);
    for (std::uint32_t j = 0; j < m; ++j)
        perm[j] = std::uint32_t(bits.substring(j, w));
    return MappingRule(m, std::move(perm)); // bijection check in the constructor
}

BitString apply_mapping(const MappingRule& rule, const BitString& x) {
    unsigned w = unsigned(std::bit_width(rule.alphabet_size()) - 1);
    if (x.size() % w != 0)
        throw std::invalid_argument("apply_mapping: length not a multiple of log2(m)");
    std::size_t n = x.size() / w;
    BitString out(x.size());
    for (std::size_t i = 0; i < n; ++i)
        out.set_substring(i, w, rule.map(std::uint32_t(x.substring(i, w))));
    return out;
}

double gowf_p0(std::uint32_t x_prime, std::uint32_t m) {
    if (x_prime >= m)
        throw std::out_of_range("gowf_p0: symbol out of range");
    return (1.0 + std::cos(2.0 * std::numbers::pi * double(x_prime) / double(m))) / 2.0;
}

std::uint64_t measure_threshold(std::uint32_t x_prime, std::uint32_t m, std::uint32_t b) {
    double scale = std::ldexp(1.0, int(b) - 1); // 2^(b-1)
    double real =
        scale * (1.0 + std::cos(2.0 * std::numbers::pi * double(x_prime) / double(m)));
    return std::uint64_t(std::floor(real));
}

BitString virtual_measure(const BitString& x_prime, EntropySource& source, const Params& params) {
    unsigned w = params.symbol_width();
    if (x_prime.size() % w != 0)
        throw std::invalid_argument("virtual_measure: length not a multiple of log2(m)");
    std::size_t n = x_prime.size() / w;
    std::uint32_t m = params.alphabet_size;
    std::uint32_t b = params.measure_bits;

    std::vector<std::uint64_t> threshold(m);
    for (std::uint32_t v = 0; v < m; ++v)
        threshold[v] = measure_threshold(v, m, b);

    BitString y(n);
    std::uint64_t range = std::uint64_t(1) << b;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t a = source.draw_uniform_index(range); // exactly b bits
        auto v = std::uint32_t(x_prime.substring(i, w));
        if (a >= threshold[v])
            y.set_bit(i, true);
    }
    return y;
}

BitString guess_output(const BitString& x_prime, std::uint32_t m) {
    if (m < 4 || !std::has_single_bit(m))
        throw std::invalid_argument("guess_output: bad m");
    unsigned w = unsigned(std::bit_width(m) - 1);
    if (x_prime.size() % w != 0)
        throw std::invalid_argument("guess_output: length not a multiple of log2(m)");
    std::size_t n = x_prime.size() / w;
    std::uint32_t lo = m / 4, hi = 3 * (m / 4);
    BitString z(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto v = std::uint32_t(x_prime.substring(i, w));
        if (v >= lo && v < hi)
            z.set_bit(i, true);
    }
    return z;
}

double binary_entropy(double x) {
    if (x < 0.0 || x > 1.0)
        throw std::domain_error("binary_entropy: argument outside [0,1]");
    if (x == 0.0 || x == 1.0)
        return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double guess_error_probability(std::uint32_t m, std::uint32_t b) {
    double scale = std::ldexp(1.0, -int(b)); // 2^-b
    std::uint32_t lo = m / 4, hi = 3 * (m / 4);
    double sum = 0.0;
    for (std::uint32_t v = 0; v < m; ++v) {
        double p0 = double(measure_threshold(v, m, b)) * scale;
        bool z_one = (v >= lo && v < hi);
        sum += z_one ? p0 : 1.0 - p0;
    }
    return sum / double(m);
}

} // namespace pkd
