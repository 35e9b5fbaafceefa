#include "stlane/parallel.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace stlane {
namespace {

thread_local bool in_parallel_region = false;

int resolve_threads() {
  if (const char* env = std::getenv("STLANE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return std::min(n, 16);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return std::clamp<int>(static_cast<int>(hw ? hw : 1), 1, 16);
}

int g_threads = 0;

struct Chunk {
  int64_t begin, end;
};

class Pool {
public:
  explicit Pool(int workers) {
    for (int t = 0; t < workers; ++t) workers_.emplace_back([this] { worker_loop(); });
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lk(m_);
      stop_ = true;
    }
    cv_task_.notify_all();
    for (auto& w : workers_) w.join();
  }

  void run(const std::vector<Chunk>& chunks, const std::function<void(int64_t, int64_t)>& body) {
    {
      std::unique_lock<std::mutex> lk(m_);
      chunks_ = &chunks;
      body_ = &body;
      next_ = 0;
      remaining_ = chunks.size();
      ++epoch_;
    }
    cv_task_.notify_all();
    drain();
    std::unique_lock<std::mutex> lk(m_);
    cv_done_.wait(lk, [&] { return remaining_ == 0; });
  }

private:
  void drain() {
    for (;;) {
      const Chunk* chunk = nullptr;
      const std::function<void(int64_t, int64_t)>* body = nullptr;
      {
        std::unique_lock<std::mutex> lk(m_);
        if (!chunks_ || next_ >= chunks_->size()) return;
        chunk = &(*chunks_)[next_++];
        body = body_;
      }
      in_parallel_region = true;
      (*body)(chunk->begin, chunk->end);
      in_parallel_region = false;
      {
        std::unique_lock<std::mutex> lk(m_);
        if (--remaining_ == 0) {
          chunks_ = nullptr;
          body_ = nullptr;
          cv_done_.notify_all();
        }
      }
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_task_.wait(lk, [&] { return stop_ || epoch_ != seen; });
        if (stop_) return;
        seen = epoch_;
      }
      drain();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable cv_task_, cv_done_;
  const std::vector<Chunk>* chunks_ = nullptr;
  const std::function<void(int64_t, int64_t)>* body_ = nullptr;
  size_t next_ = 0;
  size_t remaining_ = 0;
  uint64_t epoch_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p(num_threads() - 1);
  return p;
}

}  // namespace

int num_threads() {
  if (g_threads == 0) g_threads = resolve_threads();
  return g_threads;
}

void set_num_threads(int n) {
  if (n >= 1) g_threads = std::min(n, 16);
}

void parallel_for(int64_t begin, int64_t end, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& body) {
  const int64_t span = end - begin;
  if (span <= 0) return;
  const int nt = num_threads();
  if (nt == 1 || span < std::max<int64_t>(grain, 2) || in_parallel_region) {
    body(begin, end);
    return;
  }
  const int64_t parts = std::min<int64_t>(nt, span);
  std::vector<Chunk> chunks;
  chunks.reserve(static_cast<size_t>(parts));
  const int64_t base = span / parts, rem = span % parts;
  int64_t at = begin;
  for (int64_t p = 0; p < parts; ++p) {
    const int64_t len = base + (p < rem ? 1 : 0);
    chunks.push_back({at, at + len});
    at += len;
  }
  pool().run(chunks, body);
}

}  // namespace stlane
