#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <thread>

#include "pkd/reconcile.hpp"

using namespace pkd;

namespace {

struct ReconcileOutcome {
    BitString corrected;
    LeakageLedger alice;
    LeakageLedger bob;
};

ReconcileOutcome run_pair(const BitString& reference, const BitString& noisy,
                          const CascadeConfig& cfg, const PadSource& alice_pad = nullptr,
                          const PadSource& bob_pad = nullptr) {
    auto [a_ch, b_ch] = make_loopback_pair();
    ReconcileOutcome out;
    std::thread alice([&] { out.alice = reconcile_reference(reference, *a_ch, cfg, alice_pad); });
    std::tie(out.corrected, out.bob) = reconcile_noisy(noisy, *b_ch, cfg, bob_pad);
    alice.join();
    return out;
}

BitString with_errors(const BitString& key, double rate, EntropySource& src) {
    BitString noisy = key;
    for (std::size_t i = 0; i < key.size(); ++i)
        if (double(src.draw_uniform_index(1u << 20)) / double(1u << 20) < rate)
            noisy.flip_bit(i);
    return noisy;
}

} // namespace

TEST_CASE("default block size tracks the design error rate") {
    CHECK(CascadeConfig::default_block_size(kRawErrorRate) == 4);
    CHECK(CascadeConfig::default_block_size(0.01) == 73);
    CHECK(CascadeConfig::default_block_size(0.49) == 2);
    CascadeConfig cfg;
    CHECK(cfg.effective_block_size() == 4);
}

TEST_CASE("identical keys leak only top-level parities") {
    auto src = EntropySource::seeded({});
    const std::uint64_t n = 4096;
    BitString key = src.draw_bits(n);
    CascadeConfig cfg;
    cfg.shuffle_seed = src.draw_seed();
    auto out = run_pair(key, key, cfg);
    CHECK(out.corrected == key);
    std::uint64_t expect = 0;
    for (std::uint32_t p = 0; p < cfg.passes; ++p) {
        std::uint64_t block = std::uint64_t(cfg.effective_block_size()) << p;
        expect += (n + block - 1) / block;
    }
    CHECK(out.alice.parity_bits_disclosed == expect);
    CHECK(out.alice == out.bob);
}

TEST_CASE("single error in one 8-bit block costs 1 + 3 parities") {
    auto src = EntropySource::seeded({});
    BitString key = src.draw_bits(8);
    for (std::size_t wrong = 0; wrong < 8; ++wrong) {
        BitString noisy = key;
        noisy.flip_bit(wrong);
        CascadeConfig cfg;
        cfg.passes = 1;
        cfg.initial_block_size = 8;
        auto out = run_pair(key, noisy, cfg);
        CHECK(out.corrected == key);
        CHECK(out.alice.parity_bits_disclosed == 4);
        CHECK(out.alice == out.bob);
    }
}

TEST_CASE("ledgers agree and are deterministic") {
    auto src = EntropySource::seeded({});
    const std::uint64_t n = 2048;
    BitString key = src.draw_bits(n);
    BitString noisy = with_errors(key, kRawErrorRate, src);
    CascadeConfig cfg;
    cfg.shuffle_seed = src.draw_seed();

    auto first = run_pair(key, noisy, cfg);
    auto second = run_pair(key, noisy, cfg);
    CHECK(first.alice == first.bob);
    CHECK(first.alice == second.alice);
    CHECK(first.corrected == second.corrected);
}

TEST_CASE("cascade corrects 18.2% noise at n = 10^4") {
    Seed256 master{};
    master[0] = 0x5a;
    auto src = EntropySource::seeded(master);
    const std::uint64_t n = 10000;
    int successes = 0;
    double f_min = 1e9, f_max = 0.0;
    const int runs = 100;
    for (int run = 0; run < runs; ++run) {
        BitString key = src.draw_bits(n);
        BitString noisy = with_errors(key, kRawErrorRate, src);
        CascadeConfig cfg;
        cfg.shuffle_seed = src.draw_seed();
        auto out = run_pair(key, noisy, cfg);
        if (out.corrected == key)
            ++successes;
        double f = realized_efficiency(out.alice, n, kRawErrorRate);
        f_min = std::min(f_min, f);
        f_max = std::max(f_max, f);
    }
    // Residual failures are caught by the verification tag at the
    // protocol layer; the batch itself should nearly always converge.
    CHECK(successes >= 99);
    // Realized regression values for this seeded batch: 100/100
    // converged, f in [1.2671, 1.3432], mean 1.2965. Assert the
    // surrounding band so a leakage regression trips loudly while the
    // acceptance band stays [1.0, 1.6].
    CHECK(f_min >= 1.15);
    CHECK(f_max <= 1.45);
}

TEST_CASE("realized efficiency formula") {
    LeakageLedger ledger;
    const std::uint64_t n = 10000;
    ledger.parity_bits_disclosed = std::uint64_t(n * binary_entropy(kRawErrorRate));
    CHECK(realized_efficiency(ledger, n, kRawErrorRate) == doctest::Approx(1.0).epsilon(1e-3));
    ledger.parity_bits_disclosed = 0;
    CHECK(realized_efficiency(ledger, n, kRawErrorRate) == 0.0);
    CHECK_THROWS_AS(realized_efficiency(ledger, 0, kRawErrorRate), std::invalid_argument);
}

TEST_CASE("reference side rejects malformed parity requests") {
    auto src = EntropySource::seeded({});
    BitString key = src.draw_bits(64);
    CascadeConfig cfg;

    auto bad_request = [&](std::vector<std::uint8_t> payload) {
        auto [a_ch, b_ch] = make_loopback_pair();
        b_ch->send(MessageType::parity_request, payload);
        CHECK_THROWS_AS(reconcile_reference(key, *a_ch, cfg), DecodeError);
    };
    // Count not matching the body.
    std::vector<std::uint8_t> wrong_count;
    put_u32(wrong_count, 3);
    bad_request(wrong_count);
    // Pass index out of range.
    std::vector<std::uint8_t> bad_pass;
    put_u32(bad_pass, 1);
    put_u32(bad_pass, 99);
    put_u64(bad_pass, 0);
    put_u32(bad_pass, 0);
    put_u32(bad_pass, 1);
    bad_request(bad_pass);
    // Sub-range past the block end.
    std::vector<std::uint8_t> bad_range;
    put_u32(bad_range, 1);
    put_u32(bad_range, 0);
    put_u64(bad_range, 0);
    put_u32(bad_range, 0);
    put_u32(bad_range, 99);
    bad_request(bad_range);
}

TEST_CASE("one-time-pad parity mode still converges when pads match") {
    auto src = EntropySource::seeded({});
    const std::uint64_t n = 2048;
    BitString key = src.draw_bits(n);
    BitString noisy = with_errors(key, kRawErrorRate, src);
    CascadeConfig cfg;
    cfg.shuffle_seed = src.draw_seed();

    Seed256 pad_seed{};
    pad_seed[1] = 0x77;
    auto alice_pool = EntropySource::seeded(pad_seed);
    auto bob_pool = EntropySource::seeded(pad_seed);
    std::uint64_t alice_pad_bits = 0, bob_pad_bits = 0;
    auto out = run_pair(
        key, noisy, cfg,
        [&](std::size_t c) { alice_pad_bits += c; return alice_pool.draw_bits(c); },
        [&](std::size_t c) { bob_pad_bits += c; return bob_pool.draw_bits(c); });
    CHECK(out.corrected == key);
    CHECK(alice_pad_bits == bob_pad_bits);
    CHECK(alice_pad_bits == out.alice.parity_bits_disclosed);
    CHECK(out.alice == out.bob);
}
