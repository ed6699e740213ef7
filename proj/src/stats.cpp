#include "pkd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace pkd::stats {

using boost::multiprecision::cpp_int;

namespace {

cpp_int binomial(std::uint32_t n, std::uint32_t k) {
    if (k > n)
        return 0;
    cpp_int v = 1;
    for (std::uint32_t i = 0; i < k; ++i) {
        v *= n - i;
        v /= i + 1;
    }
    return v;
}

Rational falling_factorial(std::uint32_t m, int g) {
    Rational v = 1;
    for (int i = 0; i < g; ++i)
        v *= Rational(std::int64_t(m) - i);
    return v;
}

Rational pow_rational(const Rational& base, std::uint32_t e) {
    Rational v = 1;
    for (std::uint32_t i = 0; i < e; ++i)
        v *= base;
    return v;
}

} // namespace

EqualityPattern canonical_pattern(const EqualityPattern& pattern) {
    EqualityPattern out(pattern.size(), -1);
    std::vector<int> seen;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        auto it = std::find(seen.begin(), seen.end(), pattern[i]);
        if (it == seen.end()) {
            seen.push_back(pattern[i]);
            out[i] = int(seen.size()) - 1;
        } else {
            out[i] = int(it - seen.begin());
        }
    }
    return out;
}

int pattern_classes(const EqualityPattern& pattern) {
    int g = 0;
    for (int c : canonical_pattern(pattern))
        g = std::max(g, c + 1);
    return g;
}

std::vector<EqualityPattern> all_patterns(std::uint32_t d) {
    if (d == 0 || d > 3)
        throw std::invalid_argument("all_patterns: d must be in 1..3");
    std::vector<EqualityPattern> out;
    EqualityPattern cur(d, 0);
    // Restricted growth strings: c[0] = 0, c[i] <= max(c[0..i-1]) + 1.
    auto rec = [&](auto&& self, std::uint32_t i, int max_class) -> void {
        if (i == d) {
            out.push_back(cur);
            return;
        }
        for (int c = 0; c <= max_class + 1; ++c) {
            cur[i] = c;
            self(self, i + 1, std::max(max_class, c));
        }
    };
    cur[0] = 0;
    rec(rec, 1, 0);
    return out;
}

std::string pattern_name(const EqualityPattern& pattern) {
    std::string s;
    for (int c : canonical_pattern(pattern))
        s += char('a' + c);
    return s;
}

Rational pattern_tuple_count(std::uint32_t m, const EqualityPattern& pattern) {
    return falling_factorial(m, pattern_classes(pattern));
}

Rational pattern_prior(std::uint32_t m, const EqualityPattern& pattern) {
    return pattern_tuple_count(m, pattern) /
           pow_rational(Rational(m), std::uint32_t(pattern.size()));
}

Rational cosine_power_sum(std::uint32_t m, std::uint32_t k) {
    if (m < 1)
        throw std::invalid_argument("cosine_power_sum: m must be >= 1");
    // cos^k t = 2^-k sum_j C(k,j) e^{i(k-2j)t}; the full-period sum of
    // e^{i q 2 pi i / m} is m when m | q and 0 otherwise.
    cpp_int num = 0;
    for (std::uint32_t j = 0; j <= k; ++j) {
        std::int64_t q = std::int64_t(k) - 2 * std::int64_t(j);
        if (q % std::int64_t(m) == 0)
            num += binomial(k, j) * m;
    }
    cpp_int den = cpp_int(1) << k;
    return Rational(num, den);
}

namespace {

using Poly = std::vector<Rational>; // coefficient of x^k at index k

// Product over one class's positions of (1 + sign * x)/2.
Poly class_polynomial(const std::vector<int>& signs) {
    Poly poly = {1};
    for (int s : signs) {
        Poly next(poly.size() + 1, Rational(0));
        for (std::size_t k = 0; k < poly.size(); ++k) {
            Rational half = poly[k] / 2;
            next[k] += half;
            next[k + 1] += s > 0 ? half : Rational(-half);
        }
        poly = std::move(next);
    }
    return poly;
}

// Sum over injective index tuples (one index per class) of the product
// of per-class polynomials, reduced to cosine power sums by
// inclusion-exclusion. Supports up to three classes.
Rational injective_sum(const std::vector<Poly>& polys, std::uint32_t m) {
    auto p = [m](std::size_t k) { return cosine_power_sum(m, std::uint32_t(k)); };
    switch (polys.size()) {
    case 1: {
        Rational total = 0;
        for (std::size_t k = 0; k < polys[0].size(); ++k)
            total += polys[0][k] * p(k);
        return total;
    }
    case 2: {
        Rational total = 0;
        for (std::size_t k = 0; k < polys[0].size(); ++k)
            for (std::size_t l = 0; l < polys[1].size(); ++l)
                total += polys[0][k] * polys[1][l] * (p(k) * p(l) - p(k + l));
        return total;
    }
    case 3: {
        Rational total = 0;
        for (std::size_t k = 0; k < polys[0].size(); ++k)
            for (std::size_t l = 0; l < polys[1].size(); ++l)
                for (std::size_t q = 0; q < polys[2].size(); ++q) {
                    Rational s = p(k) * p(l) * p(q);
                    s -= p(k + l) * p(q);
                    s -= p(k + q) * p(l);
                    s -= p(l + q) * p(k);
                    s += 2 * p(k + l + q);
                    total += polys[0][k] * polys[1][l] * polys[2][q] * s;
                }
        return total;
    }
    default:
        throw std::invalid_argument("injective_sum: more than three classes unsupported");
    }
}

void check_joint_args(std::uint32_t m, std::uint32_t d, const EqualityPattern& pattern,
                      std::uint32_t output_bits) {
    if (d < 1 || d > 3)
        throw std::invalid_argument("joint analysis supports d in 1..3");
    if (m < 4)
        throw std::invalid_argument("joint analysis requires m >= 4");
    if (pattern.size() != d)
        throw std::invalid_argument("pattern length must equal d");
    if (output_bits >> d)
        throw std::invalid_argument("output bits out of range");
}

} // namespace

Rational joint_conditional_probability(std::uint32_t m, std::uint32_t d,
                                       const EqualityPattern& pattern,
                                       std::uint32_t output_bits) {
    check_joint_args(m, d, pattern, output_bits);
    EqualityPattern canon = canonical_pattern(pattern);
    int g = pattern_classes(canon);
    std::vector<std::vector<int>> signs(g);
    for (std::uint32_t pos = 0; pos < d; ++pos) {
        int bit = (output_bits >> (d - 1 - pos)) & 1;
        signs[canon[pos]].push_back(bit == 0 ? +1 : -1);
    }
    std::vector<Poly> polys;
    polys.reserve(g);
    for (const auto& s : signs)
        polys.push_back(class_polynomial(s));
    return injective_sum(polys, m) / falling_factorial(m, g);
}

Rational posterior_probability(std::uint32_t m, std::uint32_t d,
                               const EqualityPattern& pattern, std::uint32_t output_bits) {
    Rational cond = joint_conditional_probability(m, d, pattern, output_bits);
    // Pr[X|Y] = Pr[Y|X] Pr[X] / Pr[Y] with Pr[X] = m^-d and Pr[Y] = 2^-d.
    return cond * pow_rational(Rational(2), d) / pow_rational(Rational(m), d);
}

Rational output_marginal(std::uint32_t m, std::uint32_t d, std::uint32_t output_bits) {
    Rational total = 0;
    for (const auto& pattern : all_patterns(d))
        total += pattern_prior(m, pattern) *
                 joint_conditional_probability(m, d, pattern, output_bits);
    return total;
}

Rational closed_form_conditional(std::uint32_t m, std::uint32_t d,
                                 const EqualityPattern& pattern, std::uint32_t output_bits) {
    check_joint_args(m, d, pattern, output_bits);
    EqualityPattern canon = canonical_pattern(pattern);
    int g = pattern_classes(canon);
    Rational M(m);
    if (d == 1)
        return Rational(1, 2);
    if (d == 2) {
        bool outputs_equal = output_bits == 0 || output_bits == 3;
        if (g == 1)
            return outputs_equal ? Rational(3, 8) : Rational(1, 8);
        return outputs_equal ? Rational(2 * std::int64_t(m) - 3, 8 * (std::int64_t(m) - 1))
                             : Rational(2 * std::int64_t(m) - 1, 8 * (std::int64_t(m) - 1));
    }
    // d == 3
    int y[3] = {int(output_bits >> 2) & 1, int(output_bits >> 1) & 1, int(output_bits) & 1};
    bool all_outputs_equal = (y[0] == y[1] && y[1] == y[2]);
    if (g == 1)
        return all_outputs_equal ? Rational(5, 16) : Rational(1, 16);
    if (g == 3) {
        std::int64_t mm = m;
        if (all_outputs_equal)
            return Rational(2 * mm * mm - 9 * mm + 10, 16 * (mm - 1) * (mm - 2));
        return Rational(2 * mm * mm - 5 * mm + 2, 16 * (mm - 1) * (mm - 2));
    }
    // One equal pair plus a singleton: find them.
    int pair_a = -1, pair_b = -1, lone = -1;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (canon[std::size_t(i)] == canon[std::size_t(j)]) {
                pair_a = i;
                pair_b = j;
                lone = 3 - i - j;
            }
    std::int64_t mm = m;
    if (y[pair_a] != y[pair_b])
        return Rational(1, 16);
    if (y[pair_a] == y[lone])
        return Rational(3 * mm - 5, 16 * (mm - 1));
    return Rational(3 * mm - 1, 16 * (mm - 1));
}

Rational closed_form_posterior(std::uint32_t m, std::uint32_t d,
                               const EqualityPattern& pattern, std::uint32_t output_bits) {
    return closed_form_conditional(m, d, pattern, output_bits) * pow_rational(Rational(2), d) /
           pow_rational(Rational(m), d);
}

double conditional_entropy_joint(std::uint32_t m, std::uint32_t d, std::uint32_t output_bits) {
    double h = 0.0;
    for (const auto& pattern : all_patterns(d)) {
        Rational post = posterior_probability(m, d, pattern, output_bits);
        double p = double(post);
        double count = double(pattern_tuple_count(m, pattern));
        if (p > 0.0)
            h -= count * p * std::log2(p);
    }
    return h;
}

GramSpectrum gram_spectrum(std::uint32_t m) {
    if (m < 2)
        throw std::invalid_argument("gram_spectrum: m must be >= 2");
    using C = std::complex<long double>;
    const long double tau = 2.0L * std::numbers::pi_v<long double>;
    GramSpectrum spec;
    spec.m = m;
    spec.eigenvalues.resize(m);
    // lambda_r = sum_k c_k w^{kr}, c_k = (1 + e^{i 2 pi k / m}) / 2.
    for (std::uint32_t r = 0; r < m; ++r) {
        C acc(0.0L, 0.0L);
        for (std::uint32_t k = 0; k < m; ++k) {
            long double phase_c = tau * k / m;
            long double phase_w = tau * (std::uint64_t(k) * r % m) / m;
            C ck = (C(1.0L, 0.0L) + C(std::cos(phase_c), std::sin(phase_c))) / 2.0L;
            acc += ck * C(std::cos(phase_w), std::sin(phase_w));
        }
        spec.eigenvalues[r] = acc;
    }
    return spec;
}

long double GramSpectrum::trace() const {
    long double t = 0.0L;
    for (const auto& ev : eigenvalues)
        t += ev.real();
    return t;
}

double min_error_probability(std::uint32_t m) {
    GramSpectrum spec = gram_spectrum(m);
    std::complex<long double> root_sum(0.0L, 0.0L);
    for (const auto& ev : spec.eigenvalues)
        root_sum += std::sqrt(ev);
    long double mm = m;
    return double(1.0L - std::norm(root_sum) / (mm * mm));
}

DbitExtremes dbit_identical_extremes(std::uint32_t m, std::uint32_t d) {
    if (m < 2 || d < 1)
        throw std::invalid_argument("dbit_identical_extremes: need m >= 2, d >= 1");
    const long double tau = 2.0L * std::numbers::pi_v<long double>;
    long double max_sum = 0.0L, min_sum = 0.0L;
    std::uint32_t up = (d + 1) / 2, down = d / 2;
    for (std::uint32_t i = 0; i < m; ++i) {
        long double c = std::cos(tau * i / m);
        long double p0 = (1.0L + c) / 2.0L;
        long double p1 = (1.0L - c) / 2.0L;
        max_sum += std::pow(p0, (long double)d);
        min_sum += std::pow(p0, (long double)up) * std::pow(p1, (long double)down);
    }
    DbitExtremes out{};
    out.max_prob = double(max_sum / m);
    out.min_prob = double(min_sum / m);
    out.max_limit = double(binomial(2 * d, d)) / std::ldexp(1.0, int(2 * d));
    if (d % 2 == 0) {
        double num = double(binomial(d, d / 2)); // d!/((d/2)!)^2
        out.min_limit = num / std::ldexp(1.0, int(2 * d));
    } else {
        double num = double(binomial(d - 1, (d - 1) / 2));
        out.min_limit = num / std::ldexp(1.0, int(2 * d - 1));
    }
    return out;
}

SandwichReport sandwich_bound_check(std::uint32_t m, std::uint32_t d, std::uint64_t trials,
                                    EntropySource& source) {
    if (d < 1 || d > 12)
        throw std::invalid_argument("sandwich_bound_check: d must be in 1..12");
    if (m < 2 * d)
        throw std::invalid_argument("sandwich_bound_check: m too small for d");
    if (trials < 100)
        throw std::invalid_argument("sandwich_bound_check: too few trials");

    // Representative input tuples: the all-identical worst case plus
    // random tuples (duplicates allowed).
    std::vector<std::vector<std::uint32_t>> tuples;
    tuples.emplace_back(d, std::uint32_t(source.draw_uniform_index(m)));
    for (int r = 0; r < 7; ++r) {
        std::vector<std::uint32_t> tup(d);
        for (auto& v : tup)
            v = std::uint32_t(source.draw_uniform_index(m));
        tuples.push_back(std::move(tup));
    }

    std::vector<std::uint32_t> outputs = {0u, (1u << d) - 1};
    std::uint32_t alternating = 0;
    for (std::uint32_t i = 0; i < d; i += 2)
        alternating |= 1u << i;
    outputs.push_back(alternating);
    outputs.push_back(std::uint32_t(source.draw_uniform_index(std::uint64_t(1) << d)));

    SandwichReport report;
    report.lower_bound = d == 1 ? 0.5 : std::ldexp(1.0, -int(2 * d - 1));
    report.upper_bound = 0.5;
    report.min_observed = 1.0;
    report.max_observed = 0.0;
    report.ok = true;

    const double tau = 2.0 * std::numbers::pi;
    std::uint64_t per_tuple = std::max<std::uint64_t>(trials / tuples.size(), 100);
    for (const auto& tup : tuples) {
        // Distinct substring values; a uniform permutation restricted to
        // them is a uniform injective assignment.
        std::vector<std::uint32_t> classes;
        std::vector<std::size_t> class_of(d);
        for (std::uint32_t pos = 0; pos < d; ++pos) {
            auto it = std::find(classes.begin(), classes.end(), tup[pos]);
            if (it == classes.end()) {
                classes.push_back(tup[pos]);
                class_of[pos] = classes.size() - 1;
            } else {
                class_of[pos] = std::size_t(it - classes.begin());
            }
        }
        std::size_t g = classes.size();

        std::vector<double> sum(outputs.size(), 0.0), sumsq(outputs.size(), 0.0);
        std::vector<double> p0(g);
        std::vector<std::uint32_t> image(g);
        for (std::uint64_t t = 0; t < per_tuple; ++t) {
            for (std::size_t c = 0; c < g; ++c) {
                for (;;) {
                    auto v = std::uint32_t(source.draw_uniform_index(m));
                    bool dup = false;
                    for (std::size_t prev = 0; prev < c; ++prev)
                        if (image[prev] == v)
                            dup = true;
                    if (!dup) {
                        image[c] = v;
                        break;
                    }
                }
                p0[c] = (1.0 + std::cos(tau * image[c] / m)) / 2.0;
            }
            for (std::size_t oi = 0; oi < outputs.size(); ++oi) {
                double prod = 1.0;
                for (std::uint32_t pos = 0; pos < d; ++pos) {
                    double q = p0[class_of[pos]];
                    prod *= ((outputs[oi] >> (d - 1 - pos)) & 1) ? 1.0 - q : q;
                }
                sum[oi] += prod;
                sumsq[oi] += prod * prod;
            }
        }
        for (std::size_t oi = 0; oi < outputs.size(); ++oi) {
            double n = double(per_tuple);
            double mean = sum[oi] / n;
            double var = std::max(0.0, (sumsq[oi] - n * mean * mean) / (n - 1));
            double stderr_ = std::sqrt(var / n);
            report.min_observed = std::min(report.min_observed, mean);
            report.max_observed = std::max(report.max_observed, mean);
            ++report.cells_checked;
            if (mean < report.lower_bound - 3 * stderr_ - 1e-12 ||
                mean > report.upper_bound + 3 * stderr_ + 1e-12)
                report.ok = false;
        }
    }
    return report;
}

double empirical_ber(const Params& params, std::uint64_t trials, EntropySource& source) {
    if (trials < 10000)
        throw std::invalid_argument("empirical_ber: need at least 10^4 trials");
    params.validate();
    MappingRule rule = sample_mapping_rule(source, params.alphabet_size);
    BitString x = source.draw_bits(trials * params.symbol_width());
    BitString x_prime = apply_mapping(rule, x);
    Params p = params;
    p.symbols = trials;
    BitString y = virtual_measure(x_prime, source, p);
    BitString z = guess_output(x_prime, params.alphabet_size);
    return double(y.hamming_distance(z)) / double(trials);
}

double mixed_state_check(std::uint32_t m) {
    if (m < 2)
        throw std::invalid_argument("mixed_state_check: m must be >= 2");
    const long double tau = 2.0L * std::numbers::pi_v<long double>;
    long double sum_cos = 0.0L, sum_sin = 0.0L;
    for (std::uint32_t j = 0; j < m; ++j) {
        sum_cos += std::cos(tau * j / m);
        sum_sin += std::sin(tau * j / m);
    }
    long double residual = std::max(std::fabs(sum_cos), std::fabs(sum_sin)) / m;
    return double(residual);
}

// ---------------------------------------------------------------------------
// Reporting

bool CheckReport::all_pass() const {
    for (const auto& row : rows)
        if (!row.pass)
            return false;
    return true;
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

} // namespace

void CheckReport::add_exact(std::string quantity, std::uint32_t m, std::string d,
                            std::string pattern, const Rational& value,
                            const Rational& reference) {
    CheckRow row;
    row.quantity = std::move(quantity);
    row.m = std::to_string(m);
    row.d = std::move(d);
    row.pattern = std::move(pattern);
    row.kind = "exact";
    row.value = value.str();
    row.reference = reference.str();
    row.pass = value == reference;
    row.abs_error = row.pass ? 0.0 : std::fabs(double(value) - double(reference));
    rows.push_back(std::move(row));
}

void CheckReport::add_numeric(std::string quantity, std::string m, std::string d,
                              std::string pattern, double value, double reference,
                              double tolerance, bool estimate) {
    CheckRow row;
    row.quantity = std::move(quantity);
    row.m = std::move(m);
    row.d = std::move(d);
    row.pattern = std::move(pattern);
    row.kind = estimate ? "estimate" : "exact";
    row.value = fmt_double(value);
    row.reference = fmt_double(reference);
    row.abs_error = std::fabs(value - reference);
    row.pass = row.abs_error <= tolerance;
    rows.push_back(std::move(row));
}

void CheckReport::write_csv(std::ostream& out) const {
    out << "quantity,m,d,pattern,exact_or_estimate,reference_value,abs_error,pass\n";
    for (const auto& row : rows) {
        out << row.quantity << ',' << row.m << ',' << row.d << ',' << row.pattern << ','
            << row.value << ',' << row.reference << ',' << fmt_double(row.abs_error) << ','
            << (row.pass ? "1" : "0") << '\n';
    }
}

void CheckReport::print_table(std::ostream& out) const {
    for (const auto& row : rows) {
        out << (row.pass ? "PASS " : "FAIL ") << row.quantity;
        if (!row.m.empty())
            out << "  m=" << row.m;
        if (!row.d.empty())
            out << " d=" << row.d;
        if (!row.pattern.empty())
            out << " pattern=" << row.pattern;
        out << "  value=" << row.value << "  reference=" << row.reference
            << "  abs_error=" << fmt_double(row.abs_error) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Suites

namespace {

EntropySource make_source(const SuiteOptions& opt) {
    return opt.seeded ? EntropySource::seeded(opt.seed) : EntropySource::system();
}

std::string bits_name(std::uint32_t output_bits, std::uint32_t d) {
    std::string s;
    for (std::uint32_t i = d; i-- > 0;)
        s += char('0' + ((output_bits >> i) & 1));
    return s;
}

} // namespace

void check_discrimination(CheckReport& report, const SuiteOptions& opt) {
    std::vector<std::uint32_t> ms = {2, 4, 8, 16, 64, 1024};
    if (std::find(ms.begin(), ms.end(), opt.m) == ms.end())
        ms.push_back(opt.m);
    for (std::uint32_t m : ms) {
        GramSpectrum spec = gram_spectrum(m);
        report.add_numeric("gram_trace", std::to_string(m), "", "", double(spec.trace()),
                           double(m), 1e-9, false);
        // Exactly two eigenvalues carry m/2 (coincident for m = 2).
        std::vector<long double> mags;
        for (const auto& ev : spec.eigenvalues)
            mags.push_back(std::abs(ev));
        std::sort(mags.begin(), mags.end(), std::greater<>());
        report.add_numeric("gram_top_eigenvalue", std::to_string(m), "", "", double(mags[0]),
                           m / 2.0, 1e-9, false);
        report.add_numeric("gram_second_eigenvalue", std::to_string(m), "", "", double(mags[1]),
                           m / 2.0, 1e-9, false);
        double residual = m > 2 ? double(mags[2]) : 0.0;
        report.add_numeric("gram_null_residual", std::to_string(m), "", "", residual, 0.0, 1e-9,
                           false);
        report.add_numeric("min_error_probability", std::to_string(m), "", "",
                           min_error_probability(m), 1.0 - 2.0 / m, 1e-9, false);
        report.add_numeric("mixed_state_residual", std::to_string(m), "", "",
                           mixed_state_check(m), 0.0, 1e-12, false);
    }
}

void check_joint(CheckReport& report, const SuiteOptions& opt) {
    EntropySource source = make_source(opt);

    std::vector<std::uint32_t> ms = {4, 8};
    if (std::find(ms.begin(), ms.end(), opt.m) == ms.end())
        ms.push_back(opt.m);
    for (std::uint32_t m : ms) {
        for (std::uint32_t d = 1; d <= 3; ++d) {
            for (const auto& pattern : all_patterns(d)) {
                for (std::uint32_t y = 0; y < (1u << d); ++y) {
                    report.add_exact("joint_conditional", m, std::to_string(d),
                                     pattern_name(pattern) + "/" + bits_name(y, d),
                                     joint_conditional_probability(m, d, pattern, y),
                                     closed_form_conditional(m, d, pattern, y));
                    report.add_exact("posterior", m, std::to_string(d),
                                     pattern_name(pattern) + "/" + bits_name(y, d),
                                     posterior_probability(m, d, pattern, y),
                                     closed_form_posterior(m, d, pattern, y));
                }
            }
        }
    }

    for (std::uint32_t m : {4u, 8u, 16u})
        for (std::uint32_t d = 1; d <= 3; ++d)
            for (std::uint32_t y = 0; y < (1u << d); ++y)
                report.add_exact("output_marginal", m, std::to_string(d), bits_name(y, d),
                                 output_marginal(m, d, y),
                                 Rational(1, std::int64_t(1) << d));

    // Posterior within a 2^(d-1) factor of the prior on both sides.
    for (std::uint32_t d = 1; d <= 3; ++d) {
        Rational lo(1, std::int64_t(1) << (d - 1));
        Rational hi(std::int64_t(1) << (d - 1));
        Rational worst_lo = 1, worst_hi = 1;
        for (const auto& pattern : all_patterns(d)) {
            for (std::uint32_t y = 0; y < (1u << d); ++y) {
                Rational ratio = posterior_probability(opt.m, d, pattern, y) *
                                 pow_rational(Rational(opt.m), d);
                worst_lo = std::min(worst_lo, ratio);
                worst_hi = std::max(worst_hi, ratio);
            }
        }
        bool ok = worst_lo >= lo && worst_hi <= hi;
        report.add_numeric("posterior_prior_ratio_bounds", std::to_string(opt.m),
                           std::to_string(d), "", ok ? 1.0 : 0.0, 1.0, 0.0, false);
        report.add_numeric("posterior_prior_ratio_min", std::to_string(opt.m),
                           std::to_string(d), "", double(worst_lo), 1.0,
                           1.0 - double(lo), false);
        report.add_numeric("posterior_prior_ratio_max", std::to_string(opt.m),
                           std::to_string(d), "", double(worst_hi), 1.0,
                           double(hi) - 1.0, false);
    }

    for (std::uint32_t d : {2u, 4u, 6u}) {
        DbitExtremes ext = dbit_identical_extremes(1u << 16, d);
        report.add_numeric("dbit_max_vs_central_binomial", "65536", std::to_string(d), "",
                           ext.max_prob, ext.max_limit, 1e-4, false);
        report.add_numeric("dbit_max_below_half", "65536", std::to_string(d), "",
                           std::max(ext.max_prob - 0.5, 0.0), 0.0, 0.0, false);
        report.add_numeric("dbit_min_vs_factorial_form", "65536", std::to_string(d), "",
                           ext.min_prob, ext.min_limit, 1e-4, false);
        // The sandwich floor must lie at or below the balanced-output
        // minimum (equality at d = 2).
        double sandwich_floor = std::ldexp(1.0, -int(2 * d - 1));
        report.add_numeric("dbit_min_above_sandwich_floor", "65536", std::to_string(d), "",
                           std::max(sandwich_floor - ext.min_prob, 0.0), 0.0, 1e-9, false);
    }

    for (std::uint32_t d : {2u, 6u}) {
        SandwichReport sw = sandwich_bound_check(opt.m, d, opt.trials, source);
        report.add_numeric("sandwich_bound_holds", std::to_string(opt.m), std::to_string(d),
                           "", sw.ok ? 1.0 : 0.0, 1.0, 0.0, true);
        report.add_numeric("sandwich_max_observed", std::to_string(opt.m), std::to_string(d),
                           "", sw.max_observed, sw.upper_bound, sw.upper_bound, true);
        report.add_numeric("sandwich_min_observed", std::to_string(opt.m), std::to_string(d),
                           "", sw.min_observed, sw.lower_bound, sw.upper_bound, true);
    }
}

void check_ber(CheckReport& report, const SuiteOptions& opt) {
    EntropySource source = make_source(opt);
    Params params;
    params.alphabet_size = opt.m;
    params.measure_bits = opt.measure_bits;
    std::uint64_t trials = std::max<std::uint64_t>(opt.trials, 10000);

    double predicted = guess_error_probability(opt.m, opt.measure_bits);
    double quant = std::ldexp(1.0, -int(opt.measure_bits));
    report.add_numeric("ber_exact_vs_half_minus_inv_pi", std::to_string(opt.m), "", "",
                       predicted, kRawErrorRate, quant + 4.0 / (double(opt.m) * opt.m),
                       false);

    double estimate = empirical_ber(params, trials, source);
    double sigma = std::sqrt(predicted * (1.0 - predicted) / double(trials));
    report.add_numeric("ber_empirical_vs_exact", std::to_string(opt.m), "", "", estimate,
                       predicted, 3.0 * sigma, true);
    report.add_numeric("ber_empirical_vs_limit", std::to_string(opt.m), "", "", estimate,
                       kRawErrorRate, 3.0 * sigma + quant, true);
}

void check_entropy(CheckReport& report, const SuiteOptions& opt) {
    std::uint32_t m = opt.m;
    double log2m = std::log2(double(m));

    // d = 2 closed forms.
    double h2_eq = 2 * log2m -
                   (1.0 - 3.0 / (2.0 * m)) * std::log2((2.0 * m - 3.0) / (2.0 * (m - 1.0))) -
                   (3.0 / (2.0 * m)) * std::log2(1.5);
    double h2_ne = 2 * log2m -
                   (1.0 - 1.0 / (2.0 * m)) * std::log2((2.0 * m - 1.0) / (2.0 * (m - 1.0))) +
                   1.0 / (2.0 * m);
    report.add_numeric("entropy_closed_form", std::to_string(m), "2", "00",
                       conditional_entropy_joint(m, 2, 0), h2_eq, 1e-9, false);
    report.add_numeric("entropy_closed_form", std::to_string(m), "2", "01",
                       conditional_entropy_joint(m, 2, 1), h2_ne, 1e-9, false);

    // d = 3 closed forms.
    double mm = m;
    double h3_000 =
        -((2 * mm * mm - 9 * mm + 10) / (2 * mm * mm)) *
            std::log2((2 * mm * mm - 9 * mm + 10) / (2 * (mm - 1) * (mm - 2) * mm * mm * mm)) -
        (3 * (3 * mm - 5) / (2 * mm * mm)) *
            std::log2((3 * mm - 5) / (2 * (mm - 1) * mm * mm * mm)) -
        (5 / (2 * mm * mm)) * std::log2(5 / (2 * mm * mm * mm));
    double h3_001 =
        -((2 * mm * mm - 5 * mm + 2) / (2 * mm * mm)) *
            std::log2((2 * mm * mm - 5 * mm + 2) / (2 * (mm - 1) * (mm - 2) * mm * mm * mm)) -
        ((3 * mm - 1) / (2 * mm * mm)) *
            std::log2((3 * mm - 1) / (2 * (mm - 1) * mm * mm * mm)) -
        ((2 * mm - 1) / (2 * mm * mm)) * std::log2(1 / (2 * mm * mm * mm));
    report.add_numeric("entropy_closed_form", std::to_string(m), "3", "000",
                       conditional_entropy_joint(m, 3, 0), h3_000, 1e-9, false);
    report.add_numeric("entropy_closed_form", std::to_string(m), "3", "001",
                       conditional_entropy_joint(m, 3, 1), h3_001, 1e-9, false);

    // Approach to d * log2(m).
    for (std::uint32_t d = 1; d <= 3; ++d) {
        double tol = d <= 2 ? 0.01 : 0.02;
        for (std::uint32_t y = 0; y < (1u << d); ++y)
            report.add_numeric("entropy_vs_d_log2m", std::to_string(m), std::to_string(d),
                               bits_name(y, d), conditional_entropy_joint(m, d, y),
                               d * log2m, tol, false);
    }
}

} // namespace pkd::stats
