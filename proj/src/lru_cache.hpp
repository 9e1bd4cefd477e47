// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <future>
#include <list>
#include <mutex>
#include <string>
#include <unordered_map>

namespace factrie::detail {

/// Byte-bounded LRU keyed by string. Concurrent callers asking for the same
/// missing key wait on a single load.
template <typename V>
class SingleFlightLru {
 public:
  explicit SingleFlightLru(std::size_t capacity_bytes) : capacity_(capacity_bytes) {}

  template <typename Load, typename Cost>
  V get_or_load(const std::string& key, Load&& load, Cost&& cost) {
    std::promise<V> promise;
    std::shared_future<V> pending;
    {
      std::lock_guard lock(mu_);
      auto it = map_.find(key);
      if (it != map_.end()) {
        order_.splice(order_.begin(), order_, it->second.pos);
        pending = it->second.value;
      } else {
        order_.push_front(key);
        map_.emplace(key, Entry{promise.get_future().share(), 0, order_.begin()});
      }
    }
    if (pending.valid()) return pending.get();
    try {
      V v = load();
      std::size_t c = cost(v) + key.size() + 64;
      promise.set_value(v);
      std::lock_guard lock(mu_);
      auto it = map_.find(key);
      if (it != map_.end()) {
        it->second.cost = c;
        used_ += c;
      }
      evict(key);
      return v;
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard lock(mu_);
      auto it = map_.find(key);
      if (it != map_.end()) {
        order_.erase(it->second.pos);
        map_.erase(it);
      }
      throw;
    }
  }

  std::size_t used_bytes() const {
    std::lock_guard lock(mu_);
    return used_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }

 private:
  struct Entry {
    std::shared_future<V> value;
    std::size_t cost;
    typename std::list<std::string>::iterator pos;
  };

  void evict(const std::string& keep) {
    while (used_ > capacity_ && !order_.empty()) {
      const std::string& victim = order_.back();
      if (victim == keep) break;
      auto it = map_.find(victim);
      used_ -= it->second.cost;
      map_.erase(it);
      order_.pop_back();
    }
  }

  mutable std::mutex mu_;
  std::size_t capacity_;
  std::size_t used_ = 0;
  std::list<std::string> order_;
  std::unordered_map<std::string, Entry> map_;
};

}  // namespace factrie::detail
