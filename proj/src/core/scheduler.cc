#include "replicant/scheduler.h"

namespace replicant {

ThreadScheduler::ThreadScheduler() : thread_([this] { Loop(); }) {}

ThreadScheduler::~ThreadScheduler() {
  Shutdown();
}

Nanos ThreadScheduler::Now() const {
  return std::chrono::duration_cast<Nanos>(
      std::chrono::steady_clock::now().time_since_epoch());
}

void ThreadScheduler::After(Nanos delay, std::function<void()> task) {
  auto due = Now() + delay;
  {
    std::scoped_lock lock(mu_);
    if (stopping_)
      return;
    timers_.push({due, next_seq_++, std::move(task)});
  }
  cv_.notify_one();
}

void ThreadScheduler::Shutdown() {
  {
    std::scoped_lock lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id())
    thread_.join();
  std::scoped_lock lock(mu_);
  timers_ = {};
}

void ThreadScheduler::Loop() {
  std::unique_lock lock(mu_);
  while (!stopping_) {
    if (timers_.empty()) {
      cv_.wait(lock);
      continue;
    }
    auto now = Now();
    if (timers_.top().due > now) {
      auto wait = timers_.top().due - now;
      cv_.wait_for(lock, wait);
      continue;
    }
    auto task = std::move(const_cast<Timer&>(timers_.top()).task);
    timers_.pop();
    lock.unlock();
    task();
    lock.lock();
  }
}

}  // namespace replicant
