#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mbd {

// Persistent worker pool for data-parallel loops. Work items are indexed
// blocks; each block writes only block-local state, so results do not depend
// on which thread picks up which block.
class ThreadPool {
 public:
  explicit ThreadPool(int threads = 0);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int thread_count() const { return static_cast<int>(workers_.size()) + 1; }

  // Runs fn(block) for block in [0, count). Blocks are claimed atomically;
  // the calling thread participates. Returns after all blocks finish.
  void run_blocks(int count, const std::function<void(int)>& fn);

  // Pool shared by the whole process; size taken from MBD_THREADS or the
  // hardware concurrency on first use.
  static ThreadPool& global();

 private:
  void worker_loop();

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::mutex submit_mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(int)>* job_ = nullptr;
  std::atomic<int> next_block_{0};
  int block_count_ = 0;
  std::atomic<int> in_flight_{0};
  uint64_t generation_ = 0;
  bool stop_ = false;
};

inline void parallel_blocks(int count, const std::function<void(int)>& fn) {
  ThreadPool::global().run_blocks(count, fn);
}

}  // namespace mbd
