#pragma once

#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <deque>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "onepath/transcript.hpp"

namespace onepath {

class LocalTransport;

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual void on_frame(const Frame& frame, LocalTransport& transport) = 0;
};

struct TransportOptions {
  // Pick the next delivering (sender, receiver) pair at random instead of
  // global FIFO. Per-pair order is preserved either way.
  bool random_schedule = false;
  std::string schedule_seed = "schedule";
  // Round-trip every frame through a socketpair before delivery.
  bool socket_loopback = false;
  bool keep_payloads = true;
  bool zero_timestamps = false;
};

// In-process message bus. Frames are queued per (sender, receiver) pair and
// delivered one at a time; handler time is charged to the receiving entity.
class LocalTransport {
 public:
  explicit LocalTransport(TransportOptions opts = {})
      : opts_(std::move(opts)),
        transcript_(opts_.keep_payloads, opts_.zero_timestamps),
        sched_(Rng::from_seed(opts_.schedule_seed)),
        start_(std::chrono::steady_clock::now()) {}

  LocalTransport(const LocalTransport&) = delete;
  LocalTransport& operator=(const LocalTransport&) = delete;

  void attach(EntityId id, Endpoint* ep) { endpoints_[entity_slot(id)] = ep; }

  Transcript& transcript() { return transcript_; }
  const Transcript& transcript() const { return transcript_; }

  // Logs the frame and queues it. `records` is the number of tree-node
  // records the payload carries.
  void send(Frame f, std::uint32_t records = 0) {
    if (endpoints_[entity_slot(f.to)] == nullptr)
      throw ProtocolError(std::string("no entity registered as ") + entity_name(f.to));
    if (f.from == f.to) throw ProtocolError("entity cannot message itself");
    const std::uint32_t depth = clock(f.session, f.from) + 1;
    const std::uint64_t seq = transcript_.append(f, records, depth, elapsed_ns()).seq;
    auto& c = transcript_.counters(f.session);
    c.rounds = std::max<std::uint64_t>(c.rounds, depth);
    queues_[{f.from, f.to}].push_back(Pending{std::move(f), depth, seq});
    ++pending_;
  }

  // Runs `fn` and charges its monotonic duration to (session, entity).
  // Nested calls charge only the outermost.
  template <class F>
  decltype(auto) timed(EntityId e, const SessionId& s, F&& fn) {
    if (in_timed_) return fn();
    in_timed_ = true;
    const auto t0 = std::chrono::steady_clock::now();
    struct Guard {
      LocalTransport* self;
      EntityId e;
      const SessionId& s;
      std::chrono::steady_clock::time_point t0;
      ~Guard() {
        self->in_timed_ = false;
        self->transcript_.add_time(
            s, e,
            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count());
      }
    } guard{this, e, s, t0};
    return fn();
  }

  std::size_t pending() const { return pending_; }
  // Transcript sequence numbers in the order frames were handed to receivers.
  const std::vector<std::uint64_t>& delivery_log() const { return delivered_; }

  // Delivers one frame; false when idle.
  bool step() {
    if (pending_ == 0) return false;
    auto it = pick();
    Pending p = std::move(it->second.front());
    it->second.pop_front();
    if (it->second.empty()) queues_.erase(it);
    --pending_;

    if (opts_.socket_loopback) p.frame = loopback(p.frame);
    delivered_.push_back(p.seq);
    auto& clk = clocks_[p.frame.session][entity_slot(p.frame.to)];
    clk = std::max(clk, p.depth);
    timed(p.frame.to, p.frame.session, [&] { endpoints_[entity_slot(p.frame.to)]->on_frame(p.frame, *this); });
    return true;
  }

  std::size_t run(std::size_t max_steps = std::numeric_limits<std::size_t>::max()) {
    std::size_t n = 0;
    while (n < max_steps && step()) ++n;
    return n;
  }

 private:
  struct Pending {
    Frame frame;
    std::uint32_t depth;
    std::uint64_t seq;
  };
  using PairKey = std::pair<EntityId, EntityId>;

  std::uint32_t clock(const SessionId& s, EntityId e) {
    auto it = clocks_.find(s);
    return it == clocks_.end() ? 0 : it->second[entity_slot(e)];
  }

  std::map<PairKey, std::deque<Pending>>::iterator pick() {
    if (opts_.random_schedule) {
      auto it = queues_.begin();
      std::advance(it, static_cast<long>(sched_.uniform(queues_.size())));
      return it;
    }
    auto best = queues_.begin();
    for (auto it = queues_.begin(); it != queues_.end(); ++it)
      if (it->second.front().seq < best->second.front().seq) best = it;
    return best;
  }

  std::int64_t elapsed_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_).count();
  }

  static Frame loopback(const Frame& f) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) throw Error("socketpair failed");
    std::exception_ptr write_error;
    std::thread writer([&] {
      try {
        write_frame_fd(fds[0], f);
      } catch (...) {
        write_error = std::current_exception();
      }
      ::close(fds[0]);
    });
    std::optional<Frame> got;
    try {
      got = read_frame_fd(fds[1]);
    } catch (...) {
      writer.join();
      ::close(fds[1]);
      throw;
    }
    writer.join();
    ::close(fds[1]);
    if (write_error) std::rethrow_exception(write_error);
    if (!got) throw FormatError("socket closed before a frame arrived");
    return *got;
  }

  TransportOptions opts_;
  Transcript transcript_;
  Rng sched_;
  std::chrono::steady_clock::time_point start_;
  std::array<Endpoint*, 5> endpoints_{};
  std::map<PairKey, std::deque<Pending>> queues_;
  std::map<SessionId, std::array<std::uint32_t, 5>> clocks_;
  std::vector<std::uint64_t> delivered_;
  std::size_t pending_ = 0;
  bool in_timed_ = false;
};

}  // namespace onepath
