#ifndef PKD_TRANSPORT_HPP
#define PKD_TRANSPORT_HPP

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pkd/bitstring.hpp"

namespace pkd {

// Wire frame: 4-byte big-endian payload length, 1-byte message type,
// payload. Frames are processed strictly in order.
enum class MessageType : std::uint8_t {
    session_init = 0x01,
    mapping_rule_ciphertext = 0x02,
    masked_input = 0x03,
    masked_key = 0x04,
    parity_request = 0x05,
    parity_response = 0x06,
    verify_tag = 0x07,
    pa_seed = 0x08,
    finished = 0x09,
    abort = 0x0A,
};

bool is_known_message_type(std::uint8_t code);
const char* message_type_name(MessageType t);

struct TransportError : std::runtime_error {
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};
struct DecodeError : std::runtime_error {
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};
// Raised when the peer sends an Abort frame while we expected protocol
// traffic; carries the peer's reason byte so both sides end the session
// with the same verdict.
struct PeerAborted : std::runtime_error {
    explicit PeerAborted(std::uint8_t r) : std::runtime_error("peer aborted"), reason(r) {}
    std::uint8_t reason;
};

std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> payload);
// Decodes one complete frame; throws DecodeError on truncation, unknown
// type, or trailing bytes.
std::pair<MessageType, std::vector<std::uint8_t>> decode_frame(std::span<const std::uint8_t> buf);

// Bit-string payload layout: 1-byte count of zero-padding bits in the
// final byte, then the bits packed MSB-first.
std::vector<std::uint8_t> encode_bitstring_payload(const BitString& bits);
BitString decode_bitstring_payload(std::span<const std::uint8_t> payload);

// Big-endian scalar helpers for composite payloads.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);
// Appends a length-prefixed bit string (u64 bit count + packed bytes).
void put_bitstring(std::vector<std::uint8_t>& out, const BitString& bits);

// Cursor-style reader; throws DecodeError past the end.
class PayloadReader {
public:
    explicit PayloadReader(std::span<const std::uint8_t> data) : data_(data) {}
    std::uint32_t get_u32();
    std::uint64_t get_u64();
    double get_f64();
    std::uint8_t get_u8();
    BitString get_bitstring();
    bool exhausted() const { return pos_ == data_.size(); }
    void expect_exhausted() const;

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

// Reliable, ordered, typed message channel. One endpoint is single-owner;
// send and recv must not race with themselves.
class MessageChannel {
public:
    virtual ~MessageChannel() = default;
    virtual void send(MessageType type, std::span<const std::uint8_t> payload) = 0;
    virtual std::pair<MessageType, std::vector<std::uint8_t>> recv() = 0;
    virtual void close() = 0;

    void send_bits(MessageType type, const BitString& bits);
    BitString recv_bits_expect(MessageType type);

    std::chrono::milliseconds timeout = std::chrono::seconds(30);
};

// In-memory pair of connected endpoints for tests and `simulate`.
std::pair<std::unique_ptr<MessageChannel>, std::unique_ptr<MessageChannel>> make_loopback_pair();

// TCP stream transport. listen_accept blocks for one peer.
std::unique_ptr<MessageChannel> tcp_listen_accept(const std::string& host, std::uint16_t port);
std::unique_ptr<MessageChannel> tcp_connect(const std::string& host, std::uint16_t port,
                                            std::chrono::milliseconds retry_for =
                                                std::chrono::seconds(10));

} // namespace pkd

#endif
