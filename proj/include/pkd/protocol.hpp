#ifndef PKD_PROTOCOL_HPP
#define PKD_PROTOCOL_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "pkd/bitstring.hpp"
#include "pkd/entropy.hpp"
#include "pkd/gowf.hpp"
#include "pkd/reconcile.hpp"
#include "pkd/transport.hpp"

namespace pkd {

enum class AbortReason : std::uint8_t {
    correctness = 1,   // verification tag mismatch
    efficiency = 2,    // realized reconciliation f above f_max
    transport = 3,     // channel failure or timeout
    decode = 4,        // malformed frame or corrupted rule transfer
    desync = 5,        // parameter or state-machine disagreement
    key_exhausted = 6, // pre-shared pool cannot cover the session
    reuse_limit = 7,   // masking seed used beyond its configured budget
    length = 8,        // key-length bound came out non-positive
};

const char* to_string(AbortReason r);

enum class ReconcileMode : std::uint8_t {
    clear = 0, // parities sent in clear, counted as leakage
    otp = 1,   // parities and tag one-time-padded from the pool; leakage term 0
};

struct SessionConfig {
    Params params;
    ReconcileMode mode = ReconcileMode::clear;
    std::uint32_t cascade_passes = 4;
    std::uint32_t cascade_block_size = 0; // 0: derived from the design error rate
};

// Pre-shared secret state. The masking seed is reused across sessions up
// to reuse_limit; K and the rule pad are cut fresh from the reserve pool
// each session and never reused.
struct KeyMaterial {
    BitString k_fix;            // s + t - 1 bits, long-lived Toeplitz seed
    BitString reserve;          // pool feeding per-session K and rule pad
    std::uint64_t reserve_consumed = 0; // bits already cut from the pool
    std::uint64_t k_fix_uses = 0;
    std::uint64_t reuse_limit = 1000;
    std::uint64_t sessions_completed = 0;
    Params params;              // sizing the material was generated for

    std::uint64_t reserve_remaining() const { return reserve.size() - reserve_consumed; }
    bool can_cover(std::uint64_t bits) const { return reserve_remaining() >= bits; }
    BitString take(std::uint64_t bits); // throws KeyExhausted
};

struct KeyExhausted : std::runtime_error {
    KeyExhausted() : std::runtime_error("key material exhausted") {}
};

// Builds material sized for `sessions` sessions. Clear-mode sessions
// consume s + m*log2(m) bits each; with otp_sized the pool additionally
// covers the worst-case parity pads (2n, the reconcile cap) and the tag
// pad per session.
KeyMaterial generate_key_material(const Params& params, std::uint64_t sessions,
                                  EntropySource& source, std::uint64_t reuse_limit = 1000,
                                  bool otp_sized = false);

// "PKD1" container with length-prefixed sections.
void save_key_material(const KeyMaterial& keys, const std::string& path);
KeyMaterial load_key_material(const std::string& path);

struct SessionResult {
    BitString gamma;                     // final key, ell bits (empty on abort)
    std::int64_t ell = 0;                // key-length bound, may be negative
    std::uint64_t lambda_actual = 0;     // leakage charged in the bound
    double f_actual = 0.0;
    std::uint64_t consumed_bits = 0;     // pre-shared bits spent this session
    std::int64_t net_gain = 0;           // ell - s - m*log2(m)
    std::optional<AbortReason> aborted;
    std::uint64_t transcript_digest = 0; // FNV-1a over every frame, in order
    std::uint64_t parity_bits_disclosed = 0;
    std::uint64_t raw_error_count = 0;   // Bob only: corrections applied
};

// ell = floor(n - lambda - log2(2/eps_cor) - 2*log2(3/(2*eps_sec))).
// Negative values signal an aborted session.
std::int64_t secret_key_length(std::uint64_t n, std::uint64_t lambda, double eps_correct,
                               double eps_secret);

std::int64_t net_key_gain(std::int64_t ell, std::uint64_t s, std::uint32_t m);

// One session in each role. Both parties must hold identical KeyMaterial
// and configuration; the channel carries exactly one session.
SessionResult run_alice(const SessionConfig& cfg, KeyMaterial& keys, MessageChannel& channel,
                        EntropySource& source);
SessionResult run_bob(const SessionConfig& cfg, KeyMaterial& keys, MessageChannel& channel,
                      EntropySource& source);

} // namespace pkd

#endif
