#include "pkd/reconcile.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

namespace pkd {

std::uint32_t CascadeConfig::default_block_size(double error_rate) {
    if (!(error_rate > 0.0 && error_rate < 0.5))
        throw std::invalid_argument("cascade: error rate out of (0, 0.5)");
    return std::max<std::uint32_t>(2, std::uint32_t(std::lround(0.73 / error_rate)));
}

std::uint32_t CascadeConfig::effective_block_size() const {
    if (passes < 1)
        throw std::invalid_argument("cascade: need at least one pass");
    return initial_block_size != 0 ? initial_block_size : default_block_size(design_error_rate);
}

double realized_efficiency(const LeakageLedger& ledger, std::uint64_t n, double error_rate) {
    if (n < 1)
        throw std::invalid_argument("realized_efficiency: n must be >= 1");
    if (!(error_rate > 0.0 && error_rate < 0.5))
        throw std::invalid_argument("realized_efficiency: error rate out of (0, 0.5)");
    return double(ledger.parity_bits_disclosed) / (double(n) * binary_entropy(error_rate));
}

namespace {

struct RequestEntry {
    std::uint32_t pass;
    std::uint64_t block;
    std::uint32_t lo; // offsets within the block, permuted order
    std::uint32_t hi;
};

std::vector<std::uint8_t> encode_request(const std::vector<RequestEntry>& entries) {
    std::vector<std::uint8_t> payload;
    payload.reserve(4 + entries.size() * 20);
    put_u32(payload, std::uint32_t(entries.size()));
    for (const auto& e : entries) {
        put_u32(payload, e.pass);
        put_u64(payload, e.block);
        put_u32(payload, e.lo);
        put_u32(payload, e.hi);
    }
    return payload;
}

std::vector<RequestEntry> decode_request(std::span<const std::uint8_t> payload) {
    PayloadReader reader(payload);
    std::uint32_t count = reader.get_u32();
    if (payload.size() != 4 + std::size_t(count) * 20)
        throw DecodeError("reconcile: request size does not match its count");
    std::vector<RequestEntry> entries(count);
    for (auto& e : entries) {
        e.pass = reader.get_u32();
        e.block = reader.get_u64();
        e.lo = reader.get_u32();
        e.hi = reader.get_u32();
    }
    reader.expect_exhausted();
    return entries;
}

// Per-pass view of the key: block geometry plus the key bits rearranged
// into shuffle order so range parities are word-level.
struct PassView {
    std::uint64_t block_size = 0;
    std::uint64_t num_blocks = 0;
    std::vector<std::uint32_t> perm;     // shuffled position -> key position; empty = identity
    BitString shuffled;                  // key in shuffled order

    std::uint64_t block_len(std::uint64_t b, std::uint64_t n) const {
        std::uint64_t start = b * block_size;
        return std::min(block_size, n - start);
    }
    std::uint64_t to_key_pos(std::uint64_t shuffled_pos) const {
        return perm.empty() ? shuffled_pos : perm[shuffled_pos];
    }
};

std::vector<PassView> build_passes(const BitString& key, const CascadeConfig& cfg) {
    std::uint64_t n = key.size();
    if (n == 0)
        throw std::invalid_argument("cascade: empty key");
    if (n > 0xFFFFFFFFull)
        throw std::invalid_argument("cascade: key longer than 2^32 bits not supported");
    std::uint32_t k1 = cfg.effective_block_size();

    auto shuffle_source = EntropySource::seeded(cfg.shuffle_seed);
    std::vector<PassView> passes(cfg.passes);
    for (std::uint32_t p = 0; p < cfg.passes; ++p) {
        auto& view = passes[p];
        view.block_size = std::min<std::uint64_t>(n, std::uint64_t(k1) << p);
        view.num_blocks = (n + view.block_size - 1) / view.block_size;
        if (p == 0) {
            view.shuffled = key;
        } else {
            view.perm.resize(n);
            for (std::uint64_t i = 0; i < n; ++i)
                view.perm[i] = std::uint32_t(i);
            for (std::uint64_t i = n - 1; i >= 1; --i) {
                std::uint64_t j = shuffle_source.draw_uniform_index(i + 1);
                std::swap(view.perm[i], view.perm[j]);
            }
            view.shuffled = BitString(n);
            for (std::uint64_t i = 0; i < n; ++i)
                if (key.bit(view.perm[i]))
                    view.shuffled.set_bit(i, true);
        }
    }
    return passes;
}

} // namespace

LeakageLedger reconcile_reference(const BitString& key, MessageChannel& channel,
                                  const CascadeConfig& cfg, const PadSource& pad) {
    auto passes = build_passes(key, cfg);
    std::uint64_t n = key.size();
    LeakageLedger ledger;
    for (;;) {
        auto [type, payload] = channel.recv();
        if (type == MessageType::abort)
            throw PeerAborted(payload.empty() ? 0 : payload[0]);
        if (type != MessageType::parity_request)
            throw DecodeError("reconcile: expected ParityRequest");
        auto entries = decode_request(payload);
        if (entries.empty()) {
            ++ledger.messages_exchanged; // completion marker
            break;
        }
        BitString parities(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            if (e.pass >= passes.size())
                throw DecodeError("reconcile: pass index out of range");
            const auto& view = passes[e.pass];
            if (e.block >= view.num_blocks || e.lo >= e.hi ||
                e.hi > view.block_len(e.block, n))
                throw DecodeError("reconcile: bad parity range");
            std::uint64_t start = e.block * view.block_size;
            parities.set_bit(i, view.shuffled.parity_range(start + e.lo, start + e.hi));
        }
        ledger.parity_bits_disclosed += entries.size();
        if (ledger.parity_bits_disclosed > 2 * n)
            throw DecodeError("reconcile: disclosed parities exceed twice the key length");
        if (pad)
            parities ^= pad(parities.size());
        channel.send_bits(MessageType::parity_response, parities);
        ledger.messages_exchanged += 2;
    }
    return ledger;
}

namespace {

// Bob's working state: the corrected key plus every pass view kept in
// sync bit-for-bit, with per-block parities of both sides once a pass
// has started.
class NoisySession {
public:
    NoisySession(const BitString& key, MessageChannel& channel, const CascadeConfig& cfg,
                 const PadSource& pad)
        : channel_(channel), pad_(pad), key_(key), passes_(build_passes(key, cfg)) {
        n_ = key_.size();
        my_parity_.resize(passes_.size());
        ref_parity_.resize(passes_.size());
        inv_.resize(passes_.size());
    }

    std::pair<BitString, LeakageLedger> run() {
        for (std::uint32_t p = 0; p < passes_.size(); ++p) {
            start_pass(p);
            drain_odd_blocks();
        }
        // Completion marker.
        channel_.send(MessageType::parity_request, encode_request({}));
        ++ledger_.messages_exchanged;
        return {key_, ledger_};
    }

private:
    struct Search {
        std::uint64_t block;
        std::uint64_t lo;
        std::uint64_t hi;
    };

    BitString roundtrip(const std::vector<RequestEntry>& entries) {
        channel_.send(MessageType::parity_request, encode_request(entries));
        auto [type, payload] = channel_.recv();
        if (type == MessageType::abort)
            throw PeerAborted(payload.empty() ? 0 : payload[0]);
        if (type != MessageType::parity_response)
            throw DecodeError("reconcile: expected ParityResponse");
        BitString bits = decode_bitstring_payload(payload);
        if (bits.size() != entries.size())
            throw DecodeError("reconcile: parity count mismatch");
        if (pad_)
            bits ^= pad_(bits.size());
        ledger_.parity_bits_disclosed += bits.size();
        if (ledger_.parity_bits_disclosed > 2 * n_)
            throw DecodeError("reconcile: disclosed parities exceed twice the key length");
        ledger_.messages_exchanged += 2;
        return bits;
    }

    void start_pass(std::uint32_t p) {
        auto& view = passes_[p];
        if (!view.perm.empty()) {
            inv_[p].resize(n_);
            for (std::uint64_t i = 0; i < n_; ++i)
                inv_[p][view.perm[i]] = std::uint32_t(i);
        }
        // Corrections from earlier passes are not in this view yet;
        // resync it with the current key before taking parities.
        if (view.perm.empty()) {
            view.shuffled = key_;
        } else {
            view.shuffled = BitString(n_);
            for (std::uint64_t i = 0; i < n_; ++i)
                if (key_.bit(view.perm[i]))
                    view.shuffled.set_bit(i, true);
        }
        std::vector<RequestEntry> entries;
        entries.reserve(view.num_blocks);
        for (std::uint64_t b = 0; b < view.num_blocks; ++b)
            entries.push_back({p, b, 0, std::uint32_t(view.block_len(b, n_))});
        BitString ref = roundtrip(entries);

        my_parity_[p].assign(view.num_blocks, 0);
        ref_parity_[p].assign(view.num_blocks, 0);
        for (std::uint64_t b = 0; b < view.num_blocks; ++b) {
            std::uint64_t start = b * view.block_size;
            bool mine = view.shuffled.parity_range(start, start + view.block_len(b, n_));
            my_parity_[p][b] = mine;
            ref_parity_[p][b] = ref.bit(b);
            if (mine != ref.bit(b))
                odd_.insert({p, b});
        }
        started_ = p + 1;
    }

    // Repeatedly takes every odd block of one pass (disjoint by
    // construction) and binary-searches them in lockstep waves.
    void drain_odd_blocks() {
        while (!odd_.empty()) {
            std::uint32_t p = odd_.begin()->first;
            std::vector<Search> searches;
            for (const auto& [q, b] : odd_) {
                if (q != p)
                    continue;
                searches.push_back({b, 0, passes_[p].block_len(b, n_)});
            }
            run_searches(p, std::move(searches));
        }
    }

    void run_searches(std::uint32_t p, std::vector<Search> searches) {
        const auto& view = passes_[p];
        while (!searches.empty()) {
            // Resolve every interval that shrank to one position.
            for (auto it = searches.begin(); it != searches.end();) {
                if (it->hi - it->lo == 1) {
                    flip(view.to_key_pos(it->block * view.block_size + it->lo));
                    it = searches.erase(it);
                } else {
                    ++it;
                }
            }
            if (searches.empty())
                break;
            std::vector<RequestEntry> entries;
            entries.reserve(searches.size());
            for (const auto& s : searches) {
                std::uint64_t mid = s.lo + (s.hi - s.lo) / 2;
                entries.push_back({p, s.block, std::uint32_t(s.lo), std::uint32_t(mid)});
            }
            BitString ref = roundtrip(entries);
            for (std::size_t i = 0; i < searches.size(); ++i) {
                auto& s = searches[i];
                std::uint64_t start = s.block * view.block_size;
                std::uint64_t mid = s.lo + (s.hi - s.lo) / 2;
                bool mine = view.shuffled.parity_range(start + s.lo, start + mid);
                if (mine != ref.bit(i))
                    s.hi = mid; // odd difference sits in the left half
                else
                    s.lo = mid;
            }
        }
    }

    void flip(std::uint64_t key_pos) {
        key_.flip_bit(key_pos);
        for (std::uint32_t q = 0; q < started_; ++q) {
            auto& view = passes_[q];
            std::uint64_t pos = view.perm.empty() ? key_pos : inv_[q][key_pos];
            view.shuffled.flip_bit(pos);
            std::uint64_t b = pos / view.block_size;
            my_parity_[q][b] ^= 1;
            if (my_parity_[q][b] != ref_parity_[q][b])
                odd_.insert({q, b});
            else
                odd_.erase({q, b});
        }
    }

    MessageChannel& channel_;
    const PadSource& pad_;
    BitString key_;
    std::vector<PassView> passes_;
    std::vector<std::vector<std::uint32_t>> inv_;
    std::vector<std::vector<std::uint8_t>> my_parity_;
    std::vector<std::vector<std::uint8_t>> ref_parity_;
    std::set<std::pair<std::uint32_t, std::uint64_t>> odd_;
    std::uint64_t n_ = 0;
    std::uint32_t started_ = 0;
    LeakageLedger ledger_;
};

} // namespace

std::pair<BitString, LeakageLedger> reconcile_noisy(const BitString& key,
                                                    MessageChannel& channel,
                                                    const CascadeConfig& cfg,
                                                    const PadSource& pad) {
    NoisySession session(key, channel, cfg, pad);
    return session.run();
}

} // namespace pkd
