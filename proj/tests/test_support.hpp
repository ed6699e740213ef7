#ifndef PKD_TEST_SUPPORT_HPP
#define PKD_TEST_SUPPORT_HPP

#include <memory>
#include <utility>

#include "pkd/transport.hpp"

namespace pkd::testing {

// Wraps an endpoint and flips one payload bit of the first frame of the
// chosen type passing through send(). Stands in for an on-path adversary.
class TamperingChannel final : public MessageChannel {
public:
    TamperingChannel(std::unique_ptr<MessageChannel> inner, MessageType target,
                     std::size_t bit_index)
        : inner_(std::move(inner)), target_(target), bit_index_(bit_index) {
        timeout = inner_->timeout;
    }

    void send(MessageType type, std::span<const std::uint8_t> payload) override {
        if (!done_ && type == target_ && payload.size() * 8 > bit_index_) {
            std::vector<std::uint8_t> copy(payload.begin(), payload.end());
            copy[bit_index_ / 8] ^= std::uint8_t(0x80u >> (bit_index_ % 8));
            done_ = true;
            inner_->send(type, copy);
            return;
        }
        inner_->send(type, payload);
    }

    std::pair<MessageType, std::vector<std::uint8_t>> recv() override { return inner_->recv(); }
    void close() override { inner_->close(); }

    bool fired() const { return done_; }

private:
    std::unique_ptr<MessageChannel> inner_;
    MessageType target_;
    std::size_t bit_index_;
    bool done_ = false;
};

} // namespace pkd::testing

#endif
