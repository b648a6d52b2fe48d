#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace depthbench {

/// Fixed set of threads executing range-partitioned loops. The calling thread
/// takes part, so a pool of size 1 spawns nothing.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t threads);
    ~WorkerPool();

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    std::size_t size() const { return workers_.size() + 1; }

    /// Splits [0, count) into contiguous chunks, one per thread, and blocks
    /// until all of them finish. Chunk boundaries depend only on count and size().
    void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

private:
    void worker_loop(std::size_t index);

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable start_cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::size_t, std::size_t)>* body_ = nullptr;
    std::size_t count_ = 0;
    std::size_t generation_ = 0;
    std::size_t pending_ = 0;
    bool stop_ = false;
};

} // namespace depthbench
