#include "pkd/transport.hpp"

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

namespace pkd {

bool is_known_message_type(std::uint8_t code) {
    return code >= 0x01 && code <= 0x0A;
}

const char* message_type_name(MessageType t) {
    switch (t) {
    case MessageType::session_init: return "SessionInit";
    case MessageType::mapping_rule_ciphertext: return "MappingRuleCiphertext";
    case MessageType::masked_input: return "MaskedInput";
    case MessageType::masked_key: return "MaskedKey";
    case MessageType::parity_request: return "ParityRequest";
    case MessageType::parity_response: return "ParityResponse";
    case MessageType::verify_tag: return "VerifyTag";
    case MessageType::pa_seed: return "PASeed";
    case MessageType::finished: return "Finished";
    case MessageType::abort: return "Abort";
    }
    return "Unknown";
}

std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> payload) {
    if (payload.size() > 0xFFFFFFFFull)
        throw std::invalid_argument("encode_frame: payload too large");
    std::vector<std::uint8_t> out;
    out.reserve(5 + payload.size());
    auto len = std::uint32_t(payload.size());
    out.push_back(std::uint8_t(len >> 24));
    out.push_back(std::uint8_t(len >> 16));
    out.push_back(std::uint8_t(len >> 8));
    out.push_back(std::uint8_t(len));
    out.push_back(std::uint8_t(type));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

std::pair<MessageType, std::vector<std::uint8_t>> decode_frame(std::span<const std::uint8_t> buf) {
    if (buf.size() < 5)
        throw DecodeError("frame truncated: missing header");
    std::uint32_t len = std::uint32_t(buf[0]) << 24 | std::uint32_t(buf[1]) << 16 |
                        std::uint32_t(buf[2]) << 8 | std::uint32_t(buf[3]);
    if (!is_known_message_type(buf[4]))
        throw DecodeError("unknown message type");
    if (buf.size() < 5 + std::size_t(len))
        throw DecodeError("frame truncated: payload short");
    if (buf.size() > 5 + std::size_t(len))
        throw DecodeError("frame length mismatch: trailing bytes");
    return {MessageType(buf[4]), std::vector<std::uint8_t>(buf.begin() + 5, buf.end())};
}

std::vector<std::uint8_t> encode_bitstring_payload(const BitString& bits) {
    std::vector<std::uint8_t> out;
    auto bytes = bits.to_bytes();
    out.reserve(1 + bytes.size());
    out.push_back(std::uint8_t((8 - bits.size() % 8) % 8));
    out.insert(out.end(), bytes.begin(), bytes.end());
    return out;
}

BitString decode_bitstring_payload(std::span<const std::uint8_t> payload) {
    if (payload.empty())
        throw DecodeError("bit-string payload: missing pad prefix");
    unsigned pad = payload[0];
    if (pad > 7)
        throw DecodeError("bit-string payload: pad count out of range");
    std::size_t nbytes = payload.size() - 1;
    if (nbytes == 0 && pad != 0)
        throw DecodeError("bit-string payload: pad without data");
    std::size_t nbits = nbytes * 8 - pad;
    return BitString::from_bytes(payload.subspan(1), nbits);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    put_u32(out, std::uint32_t(v >> 32));
    put_u32(out, std::uint32_t(v));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

void put_bitstring(std::vector<std::uint8_t>& out, const BitString& bits) {
    put_u64(out, bits.size());
    auto bytes = bits.to_bytes();
    out.insert(out.end(), bytes.begin(), bytes.end());
}

std::uint8_t PayloadReader::get_u8() {
    if (pos_ + 1 > data_.size())
        throw DecodeError("payload: read past end");
    return data_[pos_++];
}

std::uint32_t PayloadReader::get_u32() {
    if (pos_ + 4 > data_.size())
        throw DecodeError("payload: read past end");
    std::uint32_t v = std::uint32_t(data_[pos_]) << 24 | std::uint32_t(data_[pos_ + 1]) << 16 |
                      std::uint32_t(data_[pos_ + 2]) << 8 | std::uint32_t(data_[pos_ + 3]);
    pos_ += 4;
    return v;
}

std::uint64_t PayloadReader::get_u64() {
    std::uint64_t hi = get_u32();
    return hi << 32 | get_u32();
}

double PayloadReader::get_f64() {
    std::uint64_t bits = get_u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

BitString PayloadReader::get_bitstring() {
    std::uint64_t nbits = get_u64();
    std::size_t nbytes = std::size_t((nbits + 7) / 8);
    if (pos_ + nbytes > data_.size())
        throw DecodeError("payload: bit string past end");
    BitString out = BitString::from_bytes(data_.subspan(pos_, nbytes), std::size_t(nbits));
    pos_ += nbytes;
    return out;
}

void PayloadReader::expect_exhausted() const {
    if (!exhausted())
        throw DecodeError("payload: trailing bytes");
}

void MessageChannel::send_bits(MessageType type, const BitString& bits) {
    auto payload = encode_bitstring_payload(bits);
    send(type, payload);
}

BitString MessageChannel::recv_bits_expect(MessageType type) {
    auto [t, payload] = recv();
    if (t != type)
        throw DecodeError(std::string("expected ") + message_type_name(type) + ", got " +
                          message_type_name(t));
    return decode_bitstring_payload(payload);
}

// ---------------------------------------------------------------------------
// Loopback

namespace {

struct LoopbackState {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<MessageType, std::vector<std::uint8_t>>> queue[2];
    bool closed = false;
};

class LoopbackChannel final : public MessageChannel {
public:
    LoopbackChannel(std::shared_ptr<LoopbackState> state, int side)
        : state_(std::move(state)), side_(side) {}

    ~LoopbackChannel() override { close(); }

    void send(MessageType type, std::span<const std::uint8_t> payload) override {
        std::lock_guard lock(state_->mu);
        if (state_->closed)
            throw TransportError("loopback: channel closed");
        state_->queue[1 - side_].emplace_back(type,
                                              std::vector<std::uint8_t>(payload.begin(), payload.end()));
        state_->cv.notify_all();
    }

    std::pair<MessageType, std::vector<std::uint8_t>> recv() override {
        std::unique_lock lock(state_->mu);
        auto& q = state_->queue[side_];
        if (!state_->cv.wait_for(lock, timeout, [&] { return !q.empty() || state_->closed; }))
            throw TransportError("loopback: recv timeout");
        if (q.empty())
            throw TransportError("loopback: channel closed");
        auto frame = std::move(q.front());
        q.pop_front();
        return frame;
    }

    void close() override {
        std::lock_guard lock(state_->mu);
        state_->closed = true;
        state_->cv.notify_all();
    }

private:
    std::shared_ptr<LoopbackState> state_;
    int side_;
};

} // namespace

std::pair<std::unique_ptr<MessageChannel>, std::unique_ptr<MessageChannel>> make_loopback_pair() {
    auto state = std::make_shared<LoopbackState>();
    return {std::make_unique<LoopbackChannel>(state, 0),
            std::make_unique<LoopbackChannel>(state, 1)};
}

// ---------------------------------------------------------------------------
// TCP

namespace {

class TcpChannel final : public MessageChannel {
public:
    explicit TcpChannel(int fd) : fd_(fd) {}
    ~TcpChannel() override { close(); }

    void send(MessageType type, std::span<const std::uint8_t> payload) override {
        auto frame = encode_frame(type, payload);
        std::size_t sent = 0;
        while (sent < frame.size()) {
            ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
            if (n <= 0)
                throw TransportError("tcp: send failed");
            sent += std::size_t(n);
        }
    }

    std::pair<MessageType, std::vector<std::uint8_t>> recv() override {
        apply_timeout();
        std::uint8_t header[5];
        read_exact(header, 5);
        std::uint32_t len = std::uint32_t(header[0]) << 24 | std::uint32_t(header[1]) << 16 |
                            std::uint32_t(header[2]) << 8 | std::uint32_t(header[3]);
        if (!is_known_message_type(header[4]))
            throw DecodeError("tcp: unknown message type");
        std::vector<std::uint8_t> payload(len);
        if (len > 0)
            read_exact(payload.data(), len);
        return {MessageType(header[4]), std::move(payload)};
    }

    void close() override {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    void apply_timeout() {
        timeval tv{};
        tv.tv_sec = long(timeout.count() / 1000);
        tv.tv_usec = long(timeout.count() % 1000) * 1000;
        setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    }

    void read_exact(std::uint8_t* dst, std::size_t len) {
        std::size_t got = 0;
        while (got < len) {
            ssize_t n = ::recv(fd_, dst + got, len - got, 0);
            if (n == 0)
                throw TransportError("tcp: peer closed");
            if (n < 0)
                throw TransportError("tcp: recv failed or timed out");
            got += std::size_t(n);
        }
    }

    int fd_ = -1;
};

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host.empty() || host == "*") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        return addr;
    }
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1)
        return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
        throw TransportError("tcp: cannot resolve host " + host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return addr;
}

} // namespace

std::unique_ptr<MessageChannel> tcp_listen_accept(const std::string& host, std::uint16_t port) {
    int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0)
        throw TransportError("tcp: socket failed");
    int one = 1;
    setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = resolve(host, port);
    if (bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listener);
        throw TransportError("tcp: bind failed");
    }
    if (listen(listener, 1) != 0) {
        ::close(listener);
        throw TransportError("tcp: listen failed");
    }
    int fd = accept(listener, nullptr, nullptr);
    ::close(listener);
    if (fd < 0)
        throw TransportError("tcp: accept failed");
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return std::make_unique<TcpChannel>(fd);
}

std::unique_ptr<MessageChannel> tcp_connect(const std::string& host, std::uint16_t port,
                                            std::chrono::milliseconds retry_for) {
    sockaddr_in addr = resolve(host, port);
    auto deadline = std::chrono::steady_clock::now() + retry_for;
    for (;;) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0)
            throw TransportError("tcp: socket failed");
        if (connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
            int one = 1;
            setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            return std::make_unique<TcpChannel>(fd);
        }
        ::close(fd);
        if (std::chrono::steady_clock::now() >= deadline)
            throw TransportError("tcp: connect failed");
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}

} // namespace pkd
