#pragma once

#include <exception>
#include <mutex>

namespace deepbasket {

// Exceptions must not escape an OpenMP region. Loop bodies run through
// `run`, which keeps the first failure; `rethrow` raises it after the region.
class ParallelErrors {
public:
    template <typename F>
    void run(F&& body) noexcept {
        try {
            body();
        } catch (...) {
            std::lock_guard<std::mutex> lock(mutex_);
            if (!first_) first_ = std::current_exception();
        }
    }

    void rethrow() const {
        if (first_) std::rethrow_exception(first_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr first_;
};

}  // namespace deepbasket
