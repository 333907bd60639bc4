#pragma once

// Event-driven simulation of the transmitter-driven band-hopping handshake.
//
// Per band: both nodes exchange measurement packets for the capture window,
// then the transmitter sends a control packet naming the next band and the
// receiver answers with an ACK and retunes. Control packets are retried
// every slot until ack_timeout; after that the transmitter reverts to the
// default band. A receiver that hears nothing for rx_watchdog reverts too.
// On the default band the transmitter retries without a deadline. The sweep
// ends when every band is captured and both nodes are parked on default.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "mbtof/band_plan.hpp"
#include "mbtof/core.hpp"

namespace mbtof {

struct ProtocolConfig {
  double dwell = 2.4e-3;          // s per band, handshake included
  double airtime = 100e-6;        // s per control or ACK packet
  double ack_turnaround = 50e-6;  // s between control reception and ACK
  double ack_timeout = 3e-3;      // s from the first control attempt
  double rx_watchdog = 3e-3;      // s of silence before the receiver reverts
  double retune_latency = 0.0;    // s
  int default_band = 0;           // band index
  double loss_probability = 0.0;  // per packet

  double handshake() const { return 2.0 * airtime + ack_turnaround; }
  double capture_window() const { return dwell - handshake(); }
};

inline void validate(const ProtocolConfig& cfg) {
  if (!(cfg.dwell > 0.0) || !(cfg.airtime > 0.0) || cfg.ack_turnaround < 0.0 ||
      cfg.retune_latency < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "protocol times must be positive");
  }
  if (cfg.capture_window() < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "dwell shorter than one control/ACK exchange");
  }
  if (!(cfg.ack_timeout > cfg.handshake()) || !(cfg.rx_watchdog > cfg.handshake())) {
    throw Error(ErrorCode::InvalidArgument, "timeouts must exceed one control/ACK exchange");
  }
  if (!(cfg.loss_probability >= 0.0 && cfg.loss_probability < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "loss probability must be in [0, 1)");
  }
}

enum class Node { Tx, Rx };

struct TraceEvent {
  double time = 0.0;
  Node node = Node::Tx;
  std::string type;
  int band = 0;
};

struct BandCapture {
  int band_index = 0;
  double time = 0.0;
};

struct SweepTrace {
  std::vector<BandCapture> captures;  // ascending time
  double total_duration = 0.0;
  int timeouts = 0;        // transmitter ACK timeouts
  int rx_timeouts = 0;     // receiver watchdog expiries
  bool reverted_to_default = false;
  bool completed = false;     // every band captured
  bool synchronized = false;  // both nodes parked on the default band at the end
  int safety_violations = 0;
  std::uint64_t transmissions = 0;
  std::vector<TraceEvent> events;
};

// Decides, per transmission ordinal, whether that packet is lost.
using LossOracle = std::function<bool(std::uint64_t ordinal)>;

namespace detail {

class HopSimulation {
 public:
  HopSimulation(const BandPlan& plan, const ProtocolConfig& cfg, LossOracle lost,
                std::uint64_t max_events)
      : cfg_(cfg), lost_(std::move(lost)), max_events_(max_events) {
    for (const auto& b : plan.bands) order_.push_back(b.index);
    captured_.assign(order_.size(), false);
    (void)plan.band(cfg.default_band);
  }

  SweepTrace run() {
    tx_.band = rx_.band = order_.front();
    rx_.mode = RxMode::Listening;
    start_capture(0.0);
    std::uint64_t processed = 0;
    while (!queue_.empty() && processed++ < max_events_) {
      const Event e = queue_.top();
      queue_.pop();
      now_ = e.time;
      dispatch(e);
      check_safety();
    }
    trace_.completed = std::all_of(captured_.begin(), captured_.end(), [](bool c) { return c; });
    trace_.synchronized = trace_.completed && tx_.mode == TxMode::Done &&
                          rx_.mode == RxMode::Listening && tx_.band == cfg_.default_band &&
                          rx_.band == cfg_.default_band;
    trace_.total_duration = std::max(tx_done_at_, rx_parked_at_);
    return trace_;
  }

 private:
  enum class Kind {
    TxCaptureEnd,
    ControlArrive,
    RxSendAck,
    AckArrive,
    TxAckDeadline,
    TxArrive,
    RxArrive,
    RxWatchdog
  };
  enum class TxMode { Capturing, AwaitAck, Retuning, Done };
  enum class RxMode { Listening, Retuning };

  struct Event {
    double time;
    int priority;  // lower first at equal time
    std::uint64_t seq;
    Kind kind;
    int band = 0;
    int target = 0;
    bool lost = false;
    bool reverted = false;
    std::uint64_t generation = 0;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.priority != b.priority) return a.priority > b.priority;
      return a.seq > b.seq;
    }
  };

  struct TxState {
    int band = 0;
    TxMode mode = TxMode::Capturing;
    int target = 0;
    bool fallback = false;  // on default band after a timeout: retry without deadline
    double first_attempt = 0.0;
    std::uint64_t generation = 0;
  };
  struct RxState {
    int band = 0;
    RxMode mode = RxMode::Listening;
    bool watchdog_armed = false;
    std::uint64_t generation = 0;
  };

  void push(Event e) {
    e.seq = seq_++;
    queue_.push(e);
  }
  Event make(double t, Kind k, int priority = 1) { return Event{t, priority, 0, k}; }

  void log(Node node, const char* type, int band) {
    trace_.events.push_back({now_, node, type, band});
  }

  bool next_transmission_lost() { return lost_(trace_.transmissions++); }

  // Next band still to capture in sweep order, or the default band when done.
  int next_target() const {
    for (std::size_t i = 0; i < order_.size(); ++i) {
      if (!captured_[i]) return order_[i];
    }
    return cfg_.default_band;
  }
  bool all_captured() const {
    return std::all_of(captured_.begin(), captured_.end(), [](bool c) { return c; });
  }
  void mark_captured(int band) {
    for (std::size_t i = 0; i < order_.size(); ++i) {
      if (order_[i] == band) captured_[i] = true;
    }
  }
  bool is_captured(int band) const {
    for (std::size_t i = 0; i < order_.size(); ++i) {
      if (order_[i] == band) return captured_[i];
    }
    return true;
  }

  void arm_watchdog(double from) {
    ++rx_.generation;
    rx_.watchdog_armed = true;
    auto e = make(from + cfg_.rx_watchdog, Kind::RxWatchdog, 2);
    e.generation = rx_.generation;
    push(e);
  }
  void disarm_watchdog() {
    ++rx_.generation;
    rx_.watchdog_armed = false;
  }

  void start_capture(double t) {
    tx_.mode = TxMode::Capturing;
    const bool rx_present = rx_.mode == RxMode::Listening && rx_.band == tx_.band;
    if (rx_present && !is_captured(tx_.band)) {
      mark_captured(tx_.band);
      trace_.captures.push_back({tx_.band, t});
      log(Node::Tx, "capture", tx_.band);
    }
    if (rx_present && rx_.band != cfg_.default_band) arm_watchdog(t + cfg_.capture_window());
    push(make(t + cfg_.capture_window(), Kind::TxCaptureEnd));
  }

  void send_control() {
    auto e = make(now_ + cfg_.airtime, Kind::ControlArrive);
    e.band = tx_.band;
    e.target = tx_.target;
    e.lost = next_transmission_lost();
    push(e);
    log(Node::Tx, e.lost ? "control_lost" : "control", tx_.band);
    ++tx_.generation;
    auto deadline = make(now_ + cfg_.handshake(), Kind::TxAckDeadline, 2);
    deadline.generation = tx_.generation;
    push(deadline);
  }

  void tx_retune(int band, bool reverted) {
    tx_.mode = TxMode::Retuning;
    auto e = make(now_ + cfg_.retune_latency, Kind::TxArrive, 0);
    e.band = band;
    e.reverted = reverted;
    push(e);
  }
  void rx_retune(double leave_at, int band) {
    rx_.mode = RxMode::Retuning;
    disarm_watchdog();
    auto e = make(leave_at + cfg_.retune_latency, Kind::RxArrive, 0);
    e.band = band;
    push(e);
  }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case Kind::TxCaptureEnd:
        tx_.mode = TxMode::AwaitAck;
        tx_.target = next_target();
        tx_.first_attempt = now_;
        send_control();
        break;
      case Kind::ControlArrive:
        if (!e.lost && rx_.mode == RxMode::Listening && rx_.band == e.band) {
          log(Node::Rx, "control_received", e.band);
          disarm_watchdog();
          auto ack = make(now_ + cfg_.ack_turnaround, Kind::RxSendAck);
          ack.band = e.band;
          ack.target = e.target;
          push(ack);
        }
        break;
      case Kind::RxSendAck: {
        auto arrive = make(now_ + cfg_.airtime, Kind::AckArrive);
        arrive.band = e.band;
        arrive.target = e.target;
        arrive.lost = next_transmission_lost();
        push(arrive);
        log(Node::Rx, arrive.lost ? "ack_lost" : "ack", e.band);
        // The receiver retunes as soon as its ACK is off the air.
        rx_retune(now_ + cfg_.airtime, e.target);
        break;
      }
      case Kind::AckArrive:
        if (!e.lost && tx_.mode == TxMode::AwaitAck && tx_.band == e.band && tx_.target == e.target) {
          log(Node::Tx, "ack_received", e.band);
          ++tx_.generation;
          tx_retune(e.target, false);
        }
        break;
      case Kind::TxAckDeadline:
        if (tx_.mode != TxMode::AwaitAck || e.generation != tx_.generation) break;
        if (tx_.fallback || now_ - tx_.first_attempt + cfg_.handshake() <= cfg_.ack_timeout) {
          send_control();
        } else {
          ++trace_.timeouts;
          trace_.reverted_to_default = true;
          log(Node::Tx, "timeout", tx_.band);
          tx_retune(cfg_.default_band, true);
        }
        break;
      case Kind::TxArrive:
        tx_.band = e.band;
        log(Node::Tx, "arrive", e.band);
        if (e.reverted) {
          if (all_captured()) {
            finish_tx();
          } else {
            tx_.fallback = true;
            tx_.mode = TxMode::AwaitAck;
            tx_.target = next_target();
            tx_.first_attempt = now_;
            send_control();
          }
        } else if (all_captured() && e.band == cfg_.default_band) {
          finish_tx();
        } else {
          tx_.fallback = false;
          start_capture(now_);
        }
        break;
      case Kind::RxArrive:
        rx_.band = e.band;
        rx_.mode = RxMode::Listening;
        log(Node::Rx, "arrive", e.band);
        if (e.band == cfg_.default_band) {
          disarm_watchdog();
          rx_parked_at_ = now_;
        } else {
          arm_watchdog(now_);
        }
        break;
      case Kind::RxWatchdog:
        if (!rx_.watchdog_armed || e.generation != rx_.generation) break;
        ++trace_.rx_timeouts;
        trace_.reverted_to_default = true;
        log(Node::Rx, "watchdog", rx_.band);
        rx_retune(now_, cfg_.default_band);
        break;
    }
  }

  void finish_tx() {
    tx_.mode = TxMode::Done;
    tx_.band = cfg_.default_band;
    tx_done_at_ = now_;
    log(Node::Tx, "done", tx_.band);
  }

  // Outside retune windows the nodes share a band, or one of them is parked
  // on the default band or holds an armed revert timer.
  void check_safety() {
    if (tx_.mode == TxMode::Retuning || rx_.mode == RxMode::Retuning) return;
    if (tx_.band == rx_.band) return;
    const bool tx_safe = tx_.band == cfg_.default_band || tx_.mode == TxMode::AwaitAck;
    const bool rx_safe = rx_.band == cfg_.default_band || rx_.watchdog_armed;
    if (!tx_safe && !rx_safe) ++trace_.safety_violations;
  }

  ProtocolConfig cfg_;
  LossOracle lost_;
  std::uint64_t max_events_;
  std::vector<int> order_;
  std::vector<bool> captured_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  double tx_done_at_ = 0.0;
  double rx_parked_at_ = 0.0;
  TxState tx_;
  RxState rx_;
  SweepTrace trace_;
};

}  // namespace detail

inline SweepTrace run_sweep(const BandPlan& plan, const ProtocolConfig& cfg, LossOracle lost,
                            std::uint64_t max_events = 10'000'000) {
  validate(cfg);
  if (plan.empty()) throw Error(ErrorCode::InvalidArgument, "empty band plan");
  return detail::HopSimulation(plan, cfg, std::move(lost), max_events).run();
}

// Independent Bernoulli losses at cfg.loss_probability.
inline SweepTrace run_sweep(const BandPlan& plan, const ProtocolConfig& cfg, std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  const double p = cfg.loss_probability;
  return run_sweep(plan, cfg, [rng, p](std::uint64_t) {
    return p > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(*rng) < p;
  });
}

// Sorted sweep durations over seeds seed, seed + 1, ...
inline std::vector<double> sweep_duration_cdf(const BandPlan& plan, const ProtocolConfig& cfg,
                                              int trials, std::uint64_t seed = 1) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "need at least one trial");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(trials));
  for (int i = 0; i < trials; ++i) {
    out.push_back(run_sweep(plan, cfg, seed + static_cast<std::uint64_t>(i)).total_duration);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline const char* to_string(Node n) { return n == Node::Tx ? "tx" : "rx"; }

// event_time,node,event_type,band
inline void write_trace_csv(std::ostream& os, const SweepTrace& trace) {
  os << "event_time,node,event_type,band\n";
  for (const auto& e : trace.events) {
    os << e.time << ',' << to_string(e.node) << ',' << e.type << ',' << e.band << '\n';
  }
}

}  // namespace mbtof
