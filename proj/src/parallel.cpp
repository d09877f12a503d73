#include "mbd/parallel.hpp"

#include <cstdlib>
#include <string>

namespace mbd {

ThreadPool::ThreadPool(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("MBD_THREADS")) {
      threads = std::atoi(env);
    }
  }
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
  }
  if (threads < 1) threads = 1;
  for (int i = 0; i < threads - 1; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& w : workers_) w.join();
}

namespace {
thread_local bool tls_in_pool_job = false;
}  // namespace

void ThreadPool::worker_loop() {
  uint64_t seen = 0;
  tls_in_pool_job = true;
  for (;;) {
    const std::function<void(int)>* job = nullptr;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      job = job_;
    }
    for (;;) {
      const int block = next_block_.fetch_add(1, std::memory_order_relaxed);
      if (block >= block_count_) break;
      (*job)(block);
    }
    if (in_flight_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      std::lock_guard lock(mutex_);
      done_.notify_all();
    }
  }
}

void ThreadPool::run_blocks(int count, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  // Nested or concurrent submissions run inline; the pool serves one job at
  // a time and a worker must never wait on its own pool.
  if (workers_.empty() || count == 1 || tls_in_pool_job ||
      !submit_mutex_.try_lock()) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::lock_guard submit_guard(submit_mutex_, std::adopt_lock);
  {
    std::lock_guard lock(mutex_);
    job_ = &fn;
    block_count_ = count;
    next_block_.store(0, std::memory_order_relaxed);
    in_flight_.store(static_cast<int>(workers_.size()), std::memory_order_relaxed);
    ++generation_;
  }
  wake_.notify_all();
  for (;;) {
    const int block = next_block_.fetch_add(1, std::memory_order_relaxed);
    if (block >= count) break;
    fn(block);
  }
  std::unique_lock lock(mutex_);
  done_.wait(lock, [&] { return in_flight_.load(std::memory_order_acquire) == 0; });
  job_ = nullptr;
}

ThreadPool& ThreadPool::global() {
  static ThreadPool pool(0);
  return pool;
}

}  // namespace mbd
