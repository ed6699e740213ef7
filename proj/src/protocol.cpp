#include "pkd/protocol.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "pkd/toeplitz.hpp"

namespace pkd {

const char* to_string(AbortReason r) {
    switch (r) {
    case AbortReason::correctness: return "correctness";
    case AbortReason::efficiency: return "efficiency";
    case AbortReason::transport: return "transport";
    case AbortReason::decode: return "decode";
    case AbortReason::desync: return "desync";
    case AbortReason::key_exhausted: return "key material exhausted";
    case AbortReason::reuse_limit: return "reuse limit";
    case AbortReason::length: return "length";
    }
    return "unknown";
}

BitString KeyMaterial::take(std::uint64_t bits) {
    if (!can_cover(bits))
        throw KeyExhausted();
    BitString out = reserve.slice(reserve_consumed, bits);
    reserve_consumed += bits;
    return out;
}

KeyMaterial generate_key_material(const Params& params, std::uint64_t sessions,
                                  EntropySource& source, std::uint64_t reuse_limit,
                                  bool otp_sized) {
    params.validate();
    KeyMaterial keys;
    keys.params = params;
    keys.reuse_limit = reuse_limit;
    keys.k_fix = source.draw_bits(params.mask_key_bits + params.input_bits() - 1);
    std::uint64_t per_session = params.mask_key_bits + params.rule_bits();
    if (otp_sized)
        per_session += 2 * params.symbols + tag_bits_for(params.eps_correct);
    keys.reserve = source.draw_bits(sessions * per_session);
    return keys;
}

namespace {

constexpr char kMagic[4] = {'P', 'K', 'D', '1'};
constexpr std::uint8_t kVersion = 1;

enum SectionTag : std::uint8_t {
    section_params = 1,
    section_k_fix = 2,
    section_reserve = 3,
    section_counters = 4,
};

void put_section(std::vector<std::uint8_t>& out, std::uint8_t tag,
                 const std::vector<std::uint8_t>& body) {
    out.push_back(tag);
    put_u64(out, body.size());
    out.insert(out.end(), body.begin(), body.end());
}

} // namespace

void save_key_material(const KeyMaterial& keys, const std::string& path) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    out.push_back(kVersion);

    std::vector<std::uint8_t> body;
    put_u32(body, keys.params.alphabet_size);
    put_u32(body, keys.params.measure_bits);
    put_u64(body, keys.params.symbols);
    put_u64(body, keys.params.mask_key_bits);
    put_f64(body, keys.params.eps_correct);
    put_f64(body, keys.params.eps_secret);
    put_f64(body, keys.params.max_efficiency);
    put_section(out, section_params, body);

    body.clear();
    put_bitstring(body, keys.k_fix);
    put_section(out, section_k_fix, body);

    body.clear();
    put_bitstring(body, keys.reserve);
    put_section(out, section_reserve, body);

    body.clear();
    put_u64(body, keys.reserve_consumed);
    put_u64(body, keys.k_fix_uses);
    put_u64(body, keys.reuse_limit);
    put_u64(body, keys.sessions_completed);
    put_section(out, section_counters, body);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw std::runtime_error("cannot open key file for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!f)
        throw std::runtime_error("write failed: " + path);
}

KeyMaterial load_key_material(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open key file: " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (data.size() < 5 || std::memcmp(data.data(), kMagic, 4) != 0)
        throw std::runtime_error("not a PKD1 key file: " + path);
    if (data[4] != kVersion)
        throw std::runtime_error("unsupported key file version");

    KeyMaterial keys;
    bool have[5] = {};
    std::size_t pos = 5;
    while (pos < data.size()) {
        if (pos + 9 > data.size())
            throw std::runtime_error("truncated key file section header");
        std::uint8_t tag = data[pos];
        PayloadReader len_reader(std::span<const std::uint8_t>(data.data() + pos + 1, 8));
        std::uint64_t len = len_reader.get_u64();
        pos += 9;
        if (pos + len > data.size())
            throw std::runtime_error("truncated key file section");
        PayloadReader reader(std::span<const std::uint8_t>(data.data() + pos, std::size_t(len)));
        switch (tag) {
        case section_params:
            keys.params.alphabet_size = reader.get_u32();
            keys.params.measure_bits = reader.get_u32();
            keys.params.symbols = reader.get_u64();
            keys.params.mask_key_bits = reader.get_u64();
            keys.params.eps_correct = reader.get_f64();
            keys.params.eps_secret = reader.get_f64();
            keys.params.max_efficiency = reader.get_f64();
            break;
        case section_k_fix:
            keys.k_fix = reader.get_bitstring();
            break;
        case section_reserve:
            keys.reserve = reader.get_bitstring();
            break;
        case section_counters:
            keys.reserve_consumed = reader.get_u64();
            keys.k_fix_uses = reader.get_u64();
            keys.reuse_limit = reader.get_u64();
            keys.sessions_completed = reader.get_u64();
            break;
        default:
            throw std::runtime_error("unknown key file section");
        }
        if (tag <= 4)
            have[tag] = true;
        pos += len;
    }
    if (!(have[1] && have[2] && have[3] && have[4]))
        throw std::runtime_error("key file missing a required section");
    if (keys.reserve_consumed > keys.reserve.size())
        throw std::runtime_error("key file counters inconsistent with pool size");
    return keys;
}

std::int64_t secret_key_length(std::uint64_t n, std::uint64_t lambda, double eps_correct,
                               double eps_secret) {
    double penalty = std::log2(2.0 / eps_correct) + 2.0 * std::log2(3.0 / (2.0 * eps_secret));
    return std::int64_t(std::floor(double(n) - double(lambda) - penalty));
}

std::int64_t net_key_gain(std::int64_t ell, std::uint64_t s, std::uint32_t m) {
    auto w = std::uint64_t(std::bit_width(std::uint64_t(m)) - 1);
    return ell - std::int64_t(s) - std::int64_t(std::uint64_t(m) * w);
}

// ---------------------------------------------------------------------------
// Session state machines

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

// Hashes every frame in processing order; both endpoints see the same
// sequence, so matching digests mean matching transcripts.
class DigestingChannel final : public MessageChannel {
public:
    explicit DigestingChannel(MessageChannel& inner) : inner_(inner) {
        timeout = inner.timeout;
    }

    void send(MessageType type, std::span<const std::uint8_t> payload) override {
        absorb(type, payload);
        inner_.send(type, payload);
    }

    std::pair<MessageType, std::vector<std::uint8_t>> recv() override {
        auto frame = inner_.recv();
        absorb(frame.first, frame.second);
        return frame;
    }

    void close() override { inner_.close(); }

    std::uint64_t digest() const { return digest_; }

private:
    void absorb(MessageType type, std::span<const std::uint8_t> payload) {
        auto mix = [this](std::uint8_t byte) {
            digest_ ^= byte;
            digest_ *= kFnvPrime;
        };
        auto len = std::uint32_t(payload.size());
        mix(std::uint8_t(len >> 24));
        mix(std::uint8_t(len >> 16));
        mix(std::uint8_t(len >> 8));
        mix(std::uint8_t(len));
        mix(std::uint8_t(type));
        for (std::uint8_t b : payload)
            mix(b);
    }

    MessageChannel& inner_;
    std::uint64_t digest_ = kFnvOffset;
};

struct LocalAbort {
    AbortReason reason;
};

AbortReason reason_from_byte(std::uint8_t b) {
    if (b >= 1 && b <= 8)
        return AbortReason(b);
    return AbortReason::desync;
}

std::vector<std::uint8_t> encode_init(const SessionConfig& cfg, std::uint64_t session_index,
                                      const Seed256& shuffle_seed) {
    std::vector<std::uint8_t> out;
    put_u32(out, cfg.params.alphabet_size);
    put_u32(out, cfg.params.measure_bits);
    put_u64(out, cfg.params.symbols);
    put_u64(out, cfg.params.mask_key_bits);
    put_f64(out, cfg.params.eps_correct);
    put_f64(out, cfg.params.eps_secret);
    put_f64(out, cfg.params.max_efficiency);
    put_u32(out, cfg.cascade_passes);
    put_u32(out, cfg.cascade_block_size);
    out.push_back(std::uint8_t(cfg.mode));
    put_u64(out, session_index);
    out.insert(out.end(), shuffle_seed.begin(), shuffle_seed.end());
    return out;
}

Seed256 check_init(const std::vector<std::uint8_t>& payload, const SessionConfig& cfg,
                   std::uint64_t session_index) {
    // Comparing against our own encoding reads every field exactly once
    // and catches any disagreement, including NaN-safe double bits.
    Seed256 seed{};
    if (payload.size() < seed.size())
        throw DecodeError("session init too short");
    std::memcpy(seed.data(), payload.data() + payload.size() - seed.size(), seed.size());
    auto expected = encode_init(cfg, session_index, seed);
    if (payload != expected)
        throw LocalAbort{AbortReason::desync};
    return seed;
}

// Runs before any traffic. Material/config mismatch is a desync; the
// reuse-limit and exhaustion checks happen after K/K0 are cut so that
// aborted sessions still consume them.
void preflight(const SessionConfig& cfg, const KeyMaterial& keys) {
    cfg.params.validate();
    if (keys.k_fix.size() != cfg.params.mask_key_bits + cfg.params.input_bits() - 1)
        throw LocalAbort{AbortReason::desync};
}

CascadeConfig make_cascade(const SessionConfig& cfg, const Seed256& shuffle_seed) {
    CascadeConfig cascade;
    cascade.passes = cfg.cascade_passes;
    cascade.initial_block_size = cfg.cascade_block_size;
    cascade.design_error_rate = kRawErrorRate;
    cascade.shuffle_seed = shuffle_seed;
    return cascade;
}

void send_abort(MessageChannel& ch, AbortReason reason) {
    std::uint8_t byte = std::uint8_t(reason);
    try {
        ch.send(MessageType::abort, std::span(&byte, 1));
    } catch (const TransportError&) {
        // Peer already gone; local reason stands.
    }
}

std::pair<MessageType, std::vector<std::uint8_t>> recv_expect(MessageChannel& ch,
                                                              MessageType want) {
    auto frame = ch.recv();
    if (frame.first == MessageType::abort)
        throw PeerAborted(frame.second.empty() ? 0 : frame.second[0]);
    if (frame.first != want)
        throw LocalAbort{AbortReason::desync};
    return frame;
}

BitString recv_bits(MessageChannel& ch, MessageType want, std::uint64_t expected_bits) {
    auto [type, payload] = recv_expect(ch, want);
    BitString bits = decode_bitstring_payload(payload);
    if (bits.size() != expected_bits)
        throw DecodeError("unexpected bit-string length");
    return bits;
}

// Shared wrapper: runs `body`, translating every failure mode into an
// aborted SessionResult and closing out consumption accounting.
template <typename Body>
SessionResult run_session(const SessionConfig& cfg, KeyMaterial& keys, MessageChannel& channel,
                          Body&& body) {
    SessionResult result;
    DigestingChannel dch(channel);
    std::uint64_t consumed_start = keys.reserve_consumed;
    try {
        body(dch, result);
        keys.sessions_completed += 1;
    } catch (const LocalAbort& a) {
        result.aborted = a.reason;
        send_abort(dch, a.reason);
    } catch (const PeerAborted& p) {
        result.aborted = reason_from_byte(p.reason);
    } catch (const KeyExhausted&) {
        result.aborted = AbortReason::key_exhausted;
        send_abort(dch, AbortReason::key_exhausted);
    } catch (const TransportError&) {
        result.aborted = AbortReason::transport;
    } catch (const DecodeError&) {
        result.aborted = AbortReason::decode;
        send_abort(dch, AbortReason::decode);
    } catch (const std::invalid_argument&) {
        result.aborted = AbortReason::decode;
        send_abort(dch, AbortReason::decode);
    } catch (const std::out_of_range&) {
        result.aborted = AbortReason::decode;
        send_abort(dch, AbortReason::decode);
    }
    result.consumed_bits = keys.reserve_consumed - consumed_start;
    result.transcript_digest = dch.digest();
    if (!result.aborted)
        result.net_gain = net_key_gain(result.ell, cfg.params.mask_key_bits,
                                       cfg.params.alphabet_size);
    return result;
}

} // namespace

SessionResult run_alice(const SessionConfig& cfg, KeyMaterial& keys, MessageChannel& channel,
                        EntropySource& source) {
    return run_session(cfg, keys, channel, [&](MessageChannel& ch, SessionResult& result) {
        const Params& p = cfg.params;
        preflight(cfg, keys);
        std::uint64_t session_index = keys.sessions_completed;
        BitString k = keys.take(p.mask_key_bits);
        BitString rule_pad = keys.take(p.rule_bits());
        keys.k_fix_uses += 1;
        if (keys.k_fix_uses > keys.reuse_limit)
            throw LocalAbort{AbortReason::reuse_limit};

        Seed256 shuffle_seed = source.draw_seed();
        auto init = encode_init(cfg, session_index, shuffle_seed);
        ch.send(MessageType::session_init, init);
        auto [echo_type, echo] = recv_expect(ch, MessageType::session_init);
        if (echo != init)
            throw LocalAbort{AbortReason::desync};

        MappingRule rule = sample_mapping_rule(source, p.alphabet_size);
        ch.send_bits(MessageType::mapping_rule_ciphertext, serialize_mapping_rule(rule) ^ rule_pad);

        BitString x = source.draw_bits(p.input_bits());
        ToeplitzSpec mask_spec{p.mask_key_bits, p.input_bits(), keys.k_fix};
        ch.send_bits(MessageType::masked_input, x ^ mask_vector(k, mask_spec));

        BitString x_prime = apply_mapping(rule, x);
        BitString y = virtual_measure(x_prime, source, p);
        BitString raw_key = source.draw_bits(p.symbols);
        ch.send_bits(MessageType::masked_key, y ^ raw_key);

        PadSource pad;
        if (cfg.mode == ReconcileMode::otp)
            pad = [&keys](std::size_t count) { return keys.take(count); };
        LeakageLedger ledger = reconcile_reference(raw_key, ch, make_cascade(cfg, shuffle_seed), pad);
        result.parity_bits_disclosed = ledger.parity_bits_disclosed;
        result.f_actual = realized_efficiency(ledger, p.symbols, kRawErrorRate);
        if (result.f_actual > p.max_efficiency)
            throw LocalAbort{AbortReason::efficiency};

        result.lambda_actual =
            cfg.mode == ReconcileMode::otp ? 0 : ledger.parity_bits_disclosed;
        result.ell = secret_key_length(p.symbols, result.lambda_actual, p.eps_correct,
                                       p.eps_secret);

        std::uint64_t tag_len = tag_bits_for(p.eps_correct);
        BitString tag_seed = source.draw_bits(tag_len + p.symbols - 1);
        BitString tag = verification_tag(raw_key, ToeplitzSpec{tag_len, p.symbols, tag_seed});
        if (cfg.mode == ReconcileMode::otp)
            tag ^= keys.take(tag_len);
        std::vector<std::uint8_t> tag_payload;
        put_bitstring(tag_payload, tag_seed);
        put_bitstring(tag_payload, tag);
        ch.send(MessageType::verify_tag, tag_payload);
        recv_expect(ch, MessageType::finished);

        if (result.ell <= 0)
            throw LocalAbort{AbortReason::length};

        auto ell = std::uint64_t(result.ell);
        BitString pa_seed = source.draw_bits(ell + p.symbols - 1);
        std::vector<std::uint8_t> pa_payload;
        put_u64(pa_payload, ell);
        put_bitstring(pa_payload, pa_seed);
        ch.send(MessageType::pa_seed, pa_payload);
        result.gamma = privacy_amplify(raw_key, ToeplitzSpec{ell, p.symbols, pa_seed});
        recv_expect(ch, MessageType::finished);
    });
}

SessionResult run_bob(const SessionConfig& cfg, KeyMaterial& keys, MessageChannel& channel,
                      EntropySource& source) {
    (void)source; // all session randomness is the initiator's
    return run_session(cfg, keys, channel, [&](MessageChannel& ch, SessionResult& result) {
        const Params& p = cfg.params;
        preflight(cfg, keys);
        std::uint64_t session_index = keys.sessions_completed;
        BitString k = keys.take(p.mask_key_bits);
        BitString rule_pad = keys.take(p.rule_bits());
        keys.k_fix_uses += 1;
        if (keys.k_fix_uses > keys.reuse_limit)
            throw LocalAbort{AbortReason::reuse_limit};

        auto [init_type, init] = recv_expect(ch, MessageType::session_init);
        Seed256 shuffle_seed = check_init(init, cfg, session_index);
        ch.send(MessageType::session_init, init);

        BitString rule_ct = recv_bits(ch, MessageType::mapping_rule_ciphertext, p.rule_bits());
        MappingRule rule = deserialize_mapping_rule(rule_ct ^ rule_pad, p.alphabet_size);

        BitString masked = recv_bits(ch, MessageType::masked_input, p.input_bits());
        ToeplitzSpec mask_spec{p.mask_key_bits, p.input_bits(), keys.k_fix};
        BitString x = masked ^ mask_vector(k, mask_spec);

        BitString x_prime = apply_mapping(rule, x);
        BitString guess = guess_output(x_prime, p.alphabet_size);
        BitString masked_y = recv_bits(ch, MessageType::masked_key, p.symbols);
        BitString raw_key = masked_y ^ guess;

        PadSource pad;
        if (cfg.mode == ReconcileMode::otp)
            pad = [&keys](std::size_t count) { return keys.take(count); };
        auto [corrected, ledger] =
            reconcile_noisy(raw_key, ch, make_cascade(cfg, shuffle_seed), pad);
        result.raw_error_count = raw_key.hamming_distance(corrected);
        result.parity_bits_disclosed = ledger.parity_bits_disclosed;
        result.f_actual = realized_efficiency(ledger, p.symbols, kRawErrorRate);
        result.lambda_actual =
            cfg.mode == ReconcileMode::otp ? 0 : ledger.parity_bits_disclosed;

        auto [tag_type, tag_payload] = recv_expect(ch, MessageType::verify_tag);
        PayloadReader reader(tag_payload);
        BitString tag_seed = reader.get_bitstring();
        BitString their_tag = reader.get_bitstring();
        reader.expect_exhausted();
        std::uint64_t tag_len = tag_bits_for(p.eps_correct);
        if (tag_seed.size() != tag_len + p.symbols - 1 || their_tag.size() != tag_len)
            throw DecodeError("verification tag payload sized wrong");
        if (cfg.mode == ReconcileMode::otp)
            their_tag ^= keys.take(tag_len);
        BitString my_tag = verification_tag(corrected, ToeplitzSpec{tag_len, p.symbols, tag_seed});
        result.ell = secret_key_length(p.symbols, result.lambda_actual, p.eps_correct,
                                       p.eps_secret);
        if (my_tag != their_tag)
            throw LocalAbort{AbortReason::correctness};
        ch.send(MessageType::finished, {});

        auto [pa_type, pa_payload] = recv_expect(ch, MessageType::pa_seed);
        PayloadReader pa_reader(pa_payload);
        std::uint64_t ell = pa_reader.get_u64();
        BitString pa_seed = pa_reader.get_bitstring();
        pa_reader.expect_exhausted();
        if (result.ell <= 0 || ell != std::uint64_t(result.ell) ||
            pa_seed.size() != ell + p.symbols - 1)
            throw LocalAbort{AbortReason::desync};
        result.gamma = privacy_amplify(corrected, ToeplitzSpec{ell, p.symbols, pa_seed});
        ch.send(MessageType::finished, {});
    });
}

} // namespace pkd
