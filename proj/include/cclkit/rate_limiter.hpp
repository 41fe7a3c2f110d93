#pragma once

#include <chrono>
#include <mutex>
#include <thread>

#include "cclkit/errors.hpp"

namespace cclkit {

/// Paces callers to at most `per_second` acquisitions per second. The first
/// call passes immediately; later calls are spaced 1/rate apart, shared
/// across threads.
class RateLimiter {
public:
    explicit RateLimiter(double per_second) {
        if (!(per_second > 0.0)) throw ValidationError("rate limit must be positive");
        interval_ = std::chrono::duration<double>(1.0 / per_second);
    }

    void acquire() {
        std::chrono::steady_clock::time_point wait_until;
        {
            std::lock_guard lock(mutex_);
            auto now = std::chrono::steady_clock::now();
            if (next_slot_ < now) next_slot_ = now;
            wait_until = next_slot_;
            next_slot_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval_);
        }
        std::this_thread::sleep_until(wait_until);
    }

private:
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_slot_{};
    std::chrono::duration<double> interval_{};
};

} // namespace cclkit
