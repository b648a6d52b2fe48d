#include "depthbench/worker_pool.hpp"

#include <algorithm>

namespace depthbench {
namespace {

std::pair<std::size_t, std::size_t> chunk(std::size_t count, std::size_t parts, std::size_t index) {
    const std::size_t base = count / parts;
    const std::size_t extra = count % parts;
    const std::size_t begin = index * base + std::min(index, extra);
    return {begin, begin + base + (index < extra ? 1 : 0)};
}

} // namespace

WorkerPool::WorkerPool(std::size_t threads) {
    const std::size_t n = std::max<std::size_t>(threads, 1);
    workers_.reserve(n - 1);
    for (std::size_t i = 1; i < n; ++i) {
        workers_.emplace_back([this, i] { worker_loop(i); });
    }
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        stop_ = true;
    }
    start_cv_.notify_all();
    for (auto& t : workers_) {
        t.join();
    }
}

void WorkerPool::parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
    if (workers_.empty() || count < 2) {
        if (count > 0) {
            body(0, count);
        }
        return;
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        body_ = &body;
        count_ = count;
        pending_ = workers_.size();
        ++generation_;
    }
    start_cv_.notify_all();

    const auto [begin, end] = chunk(count, size(), 0);
    if (begin < end) {
        body(begin, end);
    }

    std::unique_lock<std::mutex> lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    body_ = nullptr;
}

void WorkerPool::worker_loop(std::size_t index) {
    std::size_t seen = 0;
    for (;;) {
        const std::function<void(std::size_t, std::size_t)>* body = nullptr;
        std::size_t count = 0;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) {
                return;
            }
            seen = generation_;
            body = body_;
            count = count_;
        }
        const auto [begin, end] = chunk(count, size(), index);
        if (begin < end) {
            (*body)(begin, end);
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --pending_;
        }
        done_cv_.notify_one();
    }
}

} // namespace depthbench
