#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

#include "replicant/types.h"

namespace replicant {

// Clock and timer source injected into the consensus engine and the
// transports. Tasks never run synchronously inside After().
class Scheduler {
 public:
  virtual ~Scheduler() = default;

  virtual Nanos Now() const = 0;
  virtual void After(Nanos delay, std::function<void()> task) = 0;
};

// Wall-clock scheduler backed by one timer thread. Tasks run on that thread
// and must not block for long.
class ThreadScheduler final : public Scheduler {
 public:
  ThreadScheduler();
  ~ThreadScheduler() override;

  ThreadScheduler(ThreadScheduler const&) = delete;
  ThreadScheduler& operator=(ThreadScheduler const&) = delete;

  Nanos Now() const override;
  void After(Nanos delay, std::function<void()> task) override;

  // Stops the timer thread; pending tasks are discarded.
  void Shutdown();

 private:
  struct Timer {
    Nanos due;
    std::uint64_t seq;
    std::function<void()> task;
  };
  struct Later {
    bool operator()(Timer const& a, Timer const& b) const {
      return a.due != b.due ? a.due > b.due : a.seq > b.seq;
    }
  };

  void Loop();

  std::mutex mu_;
  std::condition_variable cv_;
  std::priority_queue<Timer, std::vector<Timer>, Later> timers_;
  std::uint64_t next_seq_ = 0;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace replicant
