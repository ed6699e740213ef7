#ifndef PKD_RECONCILE_HPP
#define PKD_RECONCILE_HPP

#include <cstdint>
#include <functional>
#include <utility>

#include "pkd/bitstring.hpp"
#include "pkd/entropy.hpp"
#include "pkd/gowf.hpp"
#include "pkd/transport.hpp"

namespace pkd {

// Exact accounting of what reconciliation reveals. Each disclosed parity
// is one bit; the ledger feeds the secret-key-length bound directly.
struct LeakageLedger {
    std::uint64_t parity_bits_disclosed = 0;
    std::uint64_t messages_exchanged = 0;

    bool operator==(const LeakageLedger&) const = default;
};

// Cascade configuration. Both parties must use identical values; the
// shuffle seed is shared and non-secret so transcripts stay replayable.
struct CascadeConfig {
    std::uint32_t passes = 4;
    std::uint32_t initial_block_size = 0; // 0: derive from design_error_rate
    double design_error_rate = kRawErrorRate;
    Seed256 shuffle_seed{};

    std::uint32_t effective_block_size() const;
    static std::uint32_t default_block_size(double error_rate);
};

// Optional one-time-pad hook: when set, parity payloads are XORed with
// pad bits drawn from the pre-shared pool on both sides, and the
// disclosed parities stop counting as leakage in the key-length bound.
using PadSource = std::function<BitString(std::size_t)>;

// Reference side (Alice): answers parity queries about `key` until the
// peer signals completion. Returns the leakage ledger.
LeakageLedger reconcile_reference(const BitString& key, MessageChannel& channel,
                                  const CascadeConfig& cfg, const PadSource& pad = nullptr);

// Noisy side (Bob): corrects `key` toward the reference via batched
// binary parity searches with inter-pass shuffles and back-corrections.
std::pair<BitString, LeakageLedger> reconcile_noisy(const BitString& key,
                                                    MessageChannel& channel,
                                                    const CascadeConfig& cfg,
                                                    const PadSource& pad = nullptr);

// f = disclosed parities / (n * h(E)).
double realized_efficiency(const LeakageLedger& ledger, std::uint64_t n, double error_rate);

} // namespace pkd

#endif
