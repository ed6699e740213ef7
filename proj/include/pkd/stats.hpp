#ifndef PKD_STATS_HPP
#define PKD_STATS_HPP

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "pkd/entropy.hpp"
#include "pkd/gowf.hpp"

namespace pkd::stats {

using Rational = boost::multiprecision::cpp_rational;

// Equality pattern over the d joint positions, as canonical class ids:
// {0,0} means both substrings equal, {0,1,0} means first and third equal.
using EqualityPattern = std::vector<int>;

EqualityPattern canonical_pattern(const EqualityPattern& pattern);
int pattern_classes(const EqualityPattern& pattern);
// All set partitions of d positions (restricted growth strings), d <= 3.
std::vector<EqualityPattern> all_patterns(std::uint32_t d);
std::string pattern_name(const EqualityPattern& pattern);

// Number of ordered input tuples realizing the pattern, m(m-1)...(m-g+1).
Rational pattern_tuple_count(std::uint32_t m, const EqualityPattern& pattern);
// Prior probability of the pattern under uniform inputs.
Rational pattern_prior(std::uint32_t m, const EqualityPattern& pattern);

// Exact full-period cosine power sum: sum_i cos^k(2*pi*i/m).
Rational cosine_power_sum(std::uint32_t m, std::uint32_t k);

// Permutation-averaged Pr[Y_d | X_d] for the given equality pattern and
// output bits (bit d-1-p of output_bits is position p's outcome), exact.
// Inner sums over injective index tuples collapse to the closed cosine
// power sums, so the result is rational for every m >= 4. d <= 3.
Rational joint_conditional_probability(std::uint32_t m, std::uint32_t d,
                                       const EqualityPattern& pattern,
                                       std::uint32_t output_bits);

// Bayes inversion Pr[X_d | Y_d] = conditional * 2^d / m^d, using the
// uniform output marginal (itself checked by output_marginal).
Rational posterior_probability(std::uint32_t m, std::uint32_t d,
                               const EqualityPattern& pattern, std::uint32_t output_bits);

// Sum over patterns of prior * conditional; must equal 2^-d exactly.
Rational output_marginal(std::uint32_t m, std::uint32_t d, std::uint32_t output_bits);

// Published closed forms for the same quantities, used as the reference
// side of the exactness checks.
Rational closed_form_conditional(std::uint32_t m, std::uint32_t d,
                                 const EqualityPattern& pattern, std::uint32_t output_bits);
Rational closed_form_posterior(std::uint32_t m, std::uint32_t d,
                               const EqualityPattern& pattern, std::uint32_t output_bits);

// H[X_d | Y_d = output] in bits, from the exact posterior table.
double conditional_entropy_joint(std::uint32_t m, std::uint32_t d, std::uint32_t output_bits);

// Circulant Gram spectrum of the m symmetric states.
struct GramSpectrum {
    std::uint32_t m = 0;
    std::vector<std::complex<long double>> eigenvalues;

    long double trace() const;
};
GramSpectrum gram_spectrum(std::uint32_t m);

// P_min = 1 - |sum_r sqrt(lambda_r)|^2 / m^2; equals 1 - 2/m.
double min_error_probability(std::uint32_t m);

// Finite-m identical-input extremes: max = (1/m) sum ((1+cos)/2)^d,
// min interleaves (1+cos)/2 and (1-cos)/2 halves.
struct DbitExtremes {
    double max_prob;
    double min_prob;
    double max_limit; // C(2d,d)/4^d
    double min_limit; // d!/(2^2d ((d/2)!)^2), odd-d analogue otherwise
};
DbitExtremes dbit_identical_extremes(std::uint32_t m, std::uint32_t d);

// Monte Carlo probe of 2^-(2d-1) <= Pr[Y_d|X_d] <= 1/2 over random input
// tuples and random rule assignments.
struct SandwichReport {
    double lower_bound = 0.0;
    double upper_bound = 0.5;
    double min_observed = 0.0;
    double max_observed = 0.0;
    std::uint64_t cells_checked = 0;
    bool ok = false;
};
SandwichReport sandwich_bound_check(std::uint32_t m, std::uint32_t d, std::uint64_t trials,
                                    EntropySource& source);

// Full pipeline error rate: fraction of positions where the guess rule
// disagrees with the virtual measurement. trials >= 10^4.
double empirical_ber(const Params& params, std::uint64_t trials, EntropySource& source);

// Largest Bloch-average residual max(|sum cos|, |sum sin|)/m over the
// phase family 2*pi*j/m.
double mixed_state_check(std::uint32_t m);

// ---------------------------------------------------------------------------
// Reporting

struct CheckRow {
    std::string quantity;
    std::string m;
    std::string d;
    std::string pattern;
    std::string kind; // "exact" or "estimate"
    std::string value;
    std::string reference;
    double abs_error = 0.0;
    bool pass = false;
};

struct CheckReport {
    std::vector<CheckRow> rows;

    bool all_pass() const;
    void add_exact(std::string quantity, std::uint32_t m, std::string d, std::string pattern,
                   const Rational& value, const Rational& reference);
    void add_numeric(std::string quantity, std::string m, std::string d, std::string pattern,
                     double value, double reference, double tolerance, bool estimate);
    void write_csv(std::ostream& out) const;
    void print_table(std::ostream& out) const;
};

struct SuiteOptions {
    std::uint32_t m = 1024;
    std::uint32_t measure_bits = 12;
    std::uint64_t trials = 1000000;
    Seed256 seed{};
    bool seeded = false; // false: system entropy
};

void check_discrimination(CheckReport& report, const SuiteOptions& opt);
void check_joint(CheckReport& report, const SuiteOptions& opt);
void check_ber(CheckReport& report, const SuiteOptions& opt);
void check_entropy(CheckReport& report, const SuiteOptions& opt);

} // namespace pkd::stats

#endif
