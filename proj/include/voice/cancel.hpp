#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

namespace voice {

// Cooperative cancellation flag shared between a turn's stages. Copies share
// state. Callbacks
// registered with on_cancel() run once, on the cancelling thread; they are
// used to shut down blocking network reads.
class CancelToken {
 public:
  bool cancelled() const noexcept {
    return state_->flag.load(std::memory_order_acquire);
  }

  void cancel() {
    std::vector<std::function<void()>> callbacks;
    {
      std::lock_guard lock(state_->mutex);
      if (state_->flag.exchange(true, std::memory_order_acq_rel)) return;
      callbacks.swap(state_->callbacks);
    }
    for (auto& cb : callbacks) cb();
  }

  // Returns an id for remove(). If already cancelled the callback runs now.
  std::size_t on_cancel(std::function<void()> cb) const {
    {
      std::lock_guard lock(state_->mutex);
      if (!state_->flag.load(std::memory_order_acquire)) {
        state_->callbacks.push_back(std::move(cb));
        return state_->callbacks.size() - 1;
      }
    }
    cb();
    return static_cast<std::size_t>(-1);
  }

  void remove(std::size_t id) const {
    std::lock_guard lock(state_->mutex);
    if (id < state_->callbacks.size()) state_->callbacks[id] = [] {};
  }

 private:
  struct State {
    std::atomic<bool> flag{false};
    std::mutex mutex;
    std::vector<std::function<void()>> callbacks;
  };
  std::shared_ptr<State> state_ = std::make_shared<State>();
};

// RAII registration of a cancel callback for the duration of a scope.
class CancelScope {
 public:
  CancelScope(const CancelToken* token, std::function<void()> cb)
      : token_(token) {
    if (token_) id_ = token_->on_cancel(std::move(cb));
  }
  ~CancelScope() {
    if (token_) token_->remove(id_);
  }
  CancelScope(const CancelScope&) = delete;
  CancelScope& operator=(const CancelScope&) = delete;

 private:
  const CancelToken* token_;
  std::size_t id_ = static_cast<std::size_t>(-1);
};

}  // namespace voice
