#pragma once

// Discrete-event scheduler plus the fibre quantum channel and the classical
// message channel, both with speed-of-light-in-fibre delays.

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "rvq/common.hpp"

namespace rvq::simkernel {

enum class EventKind { photon_arrival, classical_message, timer };

struct Event {
  micros time = 0.0;
  EventKind kind = EventKind::timer;
  // photon_arrival: whether the photon survived the channel; the window
  // opens either way (dark counts can still click on a lost photon).
  bool photon_arrived = false;
  // Free-form tag routed back to the handler (e.g. photon handle, message
  // id, or cutoff generation counter).
  std::int64_t tag = 0;
};

struct ChannelSpec {
  double length = 50.0;            // km
  double loss = 0.2;               // dB/km
  double refractive_index = 1.5;
  double light_speed = 3.0e5;      // km/s, vacuum

  void validate() const;
};

double transmission_probability(const ChannelSpec& ch);
micros one_way_delay(const ChannelSpec& ch);

// A single-round event queue. Events fire in nondecreasing time order with
// insertion-order tie-breaking; the handler receives each event and may
// schedule more.
class EventQueue {
 public:
  using Handler = std::function<void(const Event&)>;

  micros now() const { return now_; }

  // Schedule an event; its time must not precede the current clock.
  void schedule(Event e);

  // Decide photon survival (server efficiency x fibre transmission) and
  // schedule the arrival window at now + one_way_delay. Returns the
  // scheduled event (survival already resolved).
  Event send_photon(std::int64_t handle, const ChannelSpec& ch,
                    double server_efficiency, RngStream& rng);

  // Schedule a classical message (never lost) after the channel delay.
  Event send_classical(std::int64_t tag, const ChannelSpec& ch);

  // Pop-and-handle until the queue drains. The handler may schedule.
  void run_until_idle(const Handler& handle);

  bool empty() const { return heap_.empty(); }

 private:
  struct Entry {
    Event event;
    std::uint64_t order;  // insertion tie-break
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.event.time != b.event.time) return a.event.time > b.event.time;
      return a.order > b.order;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t next_order_ = 0;
  micros now_ = 0.0;
};

}  // namespace rvq::simkernel
