#pragma once

#include <stdexcept>
#include <vector>

#include "icql/env.hpp"
#include "icql/rng.hpp"

namespace icql {

enum class Controller { Decentralized, Central };

inline const char* controller_name(Controller c) {
  return c == Controller::Central ? "central" : "decentralized";
}

struct StepRecord {
  std::vector<Observation> obs;  // one per agent, at decision time t
  StateFeatures state;           // global features at time t
  JointAction actions;           // executed joint action u_t
  float reward = 0.0f;           // environment reward r_t
  float bonus = 0.0f;            // intrinsic reward r+_t, >= 0
  bool terminated = false;
  bool truncated = false;
};

struct EpisodeRecord {
  std::vector<StepRecord> steps;
  Controller controller = Controller::Decentralized;

  int length() const { return static_cast<int>(steps.size()); }
  double env_return() const {
    double r = 0;
    for (const auto& s : steps) r += s.reward;
    return r;
  }
};

// Ring buffer of whole episodes, FIFO eviction, uniform sampling with
// replacement once at least one batch is stored.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::logic_error("ReplayBuffer: capacity must be >= 1");
    episodes_.reserve(static_cast<size_t>(capacity));
  }

  void push(EpisodeRecord&& ep) {
    if (static_cast<int>(episodes_.size()) < capacity_) {
      episodes_.push_back(std::move(ep));
    } else {
      episodes_[next_] = std::move(ep);
    }
    next_ = (next_ + 1) % static_cast<size_t>(capacity_);
  }

  int size() const { return static_cast<int>(episodes_.size()); }
  bool ready(int batch_size) const { return size() >= batch_size; }
  const EpisodeRecord& operator[](int i) const { return episodes_[static_cast<size_t>(i)]; }
  EpisodeRecord& operator[](int i) { return episodes_[static_cast<size_t>(i)]; }

  std::vector<const EpisodeRecord*> sample(int batch_size, Rng& rng) const {
    if (!ready(batch_size)) throw std::logic_error("ReplayBuffer::sample before ready");
    std::vector<const EpisodeRecord*> out;
    out.reserve(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i)
      out.push_back(&episodes_[static_cast<size_t>(rng.uniform_int(size()))]);
    return out;
  }

 private:
  int capacity_;
  std::vector<EpisodeRecord> episodes_;
  size_t next_ = 0;
};

}  // namespace icql
