#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "waferflow/config.hpp"
#include "waferflow/types.hpp"

namespace waferflow {

// In-port / out-port directions, in the fixed polling order.
enum Port : int { kWest = 0, kNorth = 1, kEast = 2, kSouth = 3 };

// Debug-only wavelet classification; carries no behavioral weight.
enum class WaveletTag : std::uint8_t { Raw = 0, Index, Value, Sentinel };

struct Wavelet {
  Word word = 0;
  WaveletTag tag = WaveletTag::Raw;
};

class PeContext;

// A task program loaded onto one PE. A handler runs when a frame (a single
// wavelet or an index/value wavelet pair) is ready on an enabled port; it
// emits wavelets and charges compute cycles through the context.
class Program {
 public:
  virtual ~Program() = default;
  virtual void on_frame(PeContext& ctx, Port port, const Word* words,
                        int len) = 0;
  virtual const char* name() const = 0;
  // Declared buffer bytes, checked against the PE budget at load time.
  virtual std::uint64_t memory_bytes() const { return 0; }

  // Bit i enables in-port i. Handlers may change this as the program moves
  // between phases; disabled ports back-pressure their senders.
  std::uint8_t port_mask = 0;
};

namespace detail {

// One link slot: a frame of one or two wavelets. A two-word frame spends
// two cycles on the wire and two words of FIFO capacity, so timing and
// back-pressure stay word-accurate.
struct Frame {
  Word w0, w1;
  std::uint32_t ready;  // first cycle the frame may be consumed
  std::uint8_t len;
  WaveletTag tag;
};

// Receiver-side link FIFO. Capacity is enforced in words on push; senders
// that find it full fall back to their egress queue and retry.
struct Fifo {
  static constexpr int kSlots = 8;
  Frame buf[kSlots];
  std::uint8_t head = 0;
  std::uint8_t count = 0;
  std::uint8_t words = 0;

  bool empty() const { return count == 0; }
  const Frame& peek() const { return buf[head]; }
  void push(const Frame& f) {
    buf[(head + count) & (kSlots - 1)] = f;
    ++count;
    words = std::uint8_t(words + f.len);
  }
  Frame pop() {
    Frame f = buf[head];
    head = (head + 1) & (kSlots - 1);
    --count;
    words = std::uint8_t(words - f.len);
    return f;
  }
};

// Unbounded staged output per out-port: the PE's asynchronous send engine.
// Drains at link speed (one word per cycle) while the PE is not busy.
struct Egress {
  std::vector<Frame> frames;
  std::size_t head = 0;

  bool empty() const { return head == frames.size(); }
  void clear_if_drained() {
    if (empty() && !frames.empty()) {
      frames.clear();
      head = 0;
    }
  }
};

struct Pe {
  Fifo in[4];
  Egress out[4];
  std::uint64_t port_free_at[4] = {0, 0, 0, 0};
  std::uint64_t busy_until = 0;
  std::uint64_t busy_cycles = 0;
  std::uint64_t fmacs = 0;
  std::uint64_t queued_stamp = ~0ull;
  bool in_egress_list = false;
  bool egress_pending = false;
  std::unique_ptr<Program> prog;
};

}  // namespace detail

// One host-side streaming copy (or barrier wait) in the script.
struct CopyOp {
  enum class Kind { kH2D, kD2H, kWaitSignal };

  struct Stream {  // host-to-device payload for one row lane
    std::uint32_t row = 0;
    bool pair_framed = false;  // words stream as interleaved (index, value)
    std::vector<Word> words;
  };
  struct Drain {  // device-to-host expectation for one row lane
    std::uint32_t row = 0;
    std::uint64_t expect = 0;
  };

  Kind kind = Kind::kH2D;
  bool nonblock = false;
  std::vector<Stream> streams;
  std::vector<Drain> drains;

  // Filled by the run: words received per drain, in arrival order.
  std::vector<std::vector<Word>> received;

  static CopyOp h2d(std::vector<Stream> s, bool nb) {
    CopyOp op;
    op.kind = Kind::kH2D;
    op.streams = std::move(s);
    op.nonblock = nb;
    return op;
  }
  static CopyOp d2h(std::vector<Drain> d, bool nb) {
    CopyOp op;
    op.kind = Kind::kD2H;
    op.drains = std::move(d);
    op.nonblock = nb;
    return op;
  }
  static CopyOp wait_signal(std::uint32_t row) {
    CopyOp op;
    op.kind = Kind::kWaitSignal;
    op.drains.push_back(Drain{row, 1});
    return op;
  }
};

using HostScript = std::vector<CopyOp>;

struct PeBusy {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint64_t busy_cycles = 0;
  std::uint64_t fmacs = 0;
};

struct SimReport {
  std::uint64_t total_cycles = 0;
  std::uint64_t h2d_words = 0;
  std::uint64_t d2h_words = 0;
  std::uint64_t signal_words = 0;
  std::uint64_t stream_in_cycles = 0;
  std::uint64_t compute_drain_cycles = 0;
  std::uint64_t stream_out_cycles = 0;
  std::uint64_t fmacs = 0;
  std::uint64_t words_enqueued = 0;
  std::uint64_t words_dequeued = 0;
  std::uint64_t peak_pe_memory_bytes = 0;
  std::vector<PeBusy> pe_stats;  // only PEs with a loaded program

  std::string to_json(bool include_pe_stats = false) const;
};

struct TraceEvent {
  std::uint64_t cycle;
  std::uint32_t pe_row;
  std::uint32_t pe_col;
  int port;  // -1 for host lane events
  Word word;
  WaveletTag tag;
  const char* task;
};
using TraceFn = std::function<void(const TraceEvent&)>;

// Placement: program instances keyed by grid coordinate.
struct Placement {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  struct Cell {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    std::unique_ptr<Program> prog;
  };
  std::vector<Cell> cells;

  void place(std::uint32_t r, std::uint32_t c, std::unique_ptr<Program> p) {
    cells.push_back(Cell{r, c, std::move(p)});
  }
};

class Fabric;

// Handler-side API: emit wavelets, charge compute, count FMACs.
class PeContext {
 public:
  // Sends one wavelet out of `port`; it arrives at the neighbor (or the
  // host staging on the east edge) one cycle after it leaves. Links move
  // one word per cycle; excess queues on the egress engine.
  inline void emit(Port port, Word w, WaveletTag tag = WaveletTag::Raw);
  // Sends an (index, value) wavelet pair: two words of link time.
  inline void emit_pair(Port port, Word w0, Word w1,
                        WaveletTag tag = WaveletTag::Index);
  // Queues a whole buffer on the egress engine (asynchronous send).
  inline void emit_slab(Port port, const Word* words, std::size_t n,
                        WaveletTag tag = WaveletTag::Raw);
  // Charges additional compute cycles for this task.
  void charge_compute(std::uint64_t ops) { compute_ops_ += ops; }
  // Counts FMAC operations at one cycle each.
  inline void count_fmacs(std::uint64_t n);

  inline std::uint32_t row() const;
  inline std::uint32_t col() const;
  inline std::uint64_t now() const;

 private:
  friend class Fabric;
  Fabric* fab_ = nullptr;
  std::uint32_t pe_ = 0;
  std::uint64_t compute_ops_ = 0;
};

// The simulated PE grid. Single-threaded and deterministic: one instance
// must not be driven from two threads, but independent instances may run
// concurrently.
class Fabric {
 public:
  Fabric(std::uint32_t rows, std::uint32_t cols, FabricParams params = {});

  // Loads every program in the placement, enforcing the per-PE memory
  // budget. Throws PlacementError naming the PE and overage on violation.
  void load_program(Placement placement);

  // Runs the host script to completion and returns the report. The script
  // is mutated: drain ops receive their words. Throws SimError on deadlock
  // or invariant violation.
  SimReport run(HostScript& script);

  void set_trace(TraceFn fn) { trace_ = std::move(fn); }

  std::uint32_t rows() const { return rows_; }
  std::uint32_t cols() const { return cols_; }
  const FabricParams& params() const { return params_; }

 private:
  friend class PeContext;

  struct LaneBinding {
    bool active = false;
    bool staged = false;  // first word of a pair is on the wire
    std::uint32_t op = 0;
    std::uint32_t index = 0;  // stream/drain index within the op
    std::uint64_t cursor = 0;
  };

  std::uint32_t pe_id(std::uint32_t r, std::uint32_t c) const {
    return r * cols_ + c;
  }

  inline void wake(std::uint32_t pe, std::uint64_t cycle);
  inline void push_frame(std::uint32_t from_pe, Port port, Word w0, Word w1,
                         int len, WaveletTag tag);
  inline bool try_send(std::uint32_t pe, Port port, detail::Frame& f);
  void evaluate_pe(std::uint32_t pe);
  void drain_egress(std::uint32_t pe);
  bool op_may_start(const HostScript& script, std::size_t i) const;
  void start_op(HostScript& script, std::size_t i);
  void bind_free_lanes();
  void run_h2d_lanes(HostScript& script);
  void run_d2h_lanes(HostScript& script);
  [[noreturn]] void deadlock_diagnostic(const HostScript& script) const;

  std::uint32_t rows_, cols_;
  FabricParams params_;
  std::vector<detail::Pe> pes_;
  std::vector<detail::Fifo> host_out_;  // east staging per row

  // Scheduling state (valid during run()).
  std::uint64_t now_ = 0;
  std::vector<std::uint32_t> ready_[4];  // cycle buckets, indexed cycle & 3
  std::priority_queue<std::pair<std::uint64_t, std::uint32_t>,
                      std::vector<std::pair<std::uint64_t, std::uint32_t>>,
                      std::greater<>>
      wake_heap_;
  std::vector<std::uint32_t> egress_list_;
  std::vector<LaneBinding> h2d_lanes_;
  std::vector<LaneBinding> d2h_lanes_;
  std::uint32_t active_h2d_lanes_ = 0;
  std::uint32_t active_d2h_lanes_ = 0;
  std::vector<std::uint32_t> pending_h2d_;  // op<<16|stream, FIFO order
  std::size_t pending_h2d_head_ = 0;
  std::vector<std::uint32_t> pending_d2h_;
  std::size_t pending_d2h_head_ = 0;
  std::vector<std::uint8_t> op_started_, op_done_;
  std::vector<std::uint64_t> op_remaining_;
  std::vector<std::vector<std::uint32_t>> op_rows_;  // sorted lane rows
  bool start_dirty_ = false;
  std::uint64_t in_flight_ = 0;
  bool progress_ = false;
  bool h2d_active_this_cycle_ = false;
  bool d2h_active_this_cycle_ = false;
  bool trace_on_ = false;

  SimReport report_;
  TraceFn trace_;
  PeContext ctx_;
};

// Convenience: fabric sized for the placement, with programs loaded.
Fabric make_fabric(Placement placement, const FabricParams& params);

inline void Fabric::wake(std::uint32_t pe, std::uint64_t cycle) {
  detail::Pe& p = pes_[pe];
  if (p.queued_stamp == cycle) return;
  p.queued_stamp = cycle;
  if (cycle <= now_ + 2)
    ready_[cycle & 3].push_back(pe);
  else
    wake_heap_.push({cycle, pe});
}

inline bool Fabric::try_send(std::uint32_t pe, Port port, detail::Frame& f) {
  detail::Pe& sender = pes_[pe];
  if (sender.port_free_at[port] > now_) return false;
  detail::Fifo* target;
  std::uint32_t target_pe = UINT32_MAX;
  switch (port) {
    case kEast: {
      const std::uint32_t c = pe % cols_;
      if (c + 1 < cols_) {
        target_pe = pe + 1;
        target = &pes_[target_pe].in[kWest];
      } else {
        if (f.len != 1)
          throw SimError("host staging accepts single wavelets only");
        target = &host_out_[pe / cols_];
      }
      break;
    }
    case kWest:
      if (pe % cols_ == 0)
        throw SimError("PE (" + std::to_string(pe / cols_) +
                       ", 0) emitted west off grid");
      target_pe = pe - 1;
      target = &pes_[target_pe].in[kEast];
      break;
    case kSouth:
      if (pe / cols_ + 1 >= rows_)
        throw SimError("PE (" + std::to_string(pe / cols_) + ", " +
                       std::to_string(pe % cols_) + ") emitted south off grid");
      target_pe = pe + cols_;
      target = &pes_[target_pe].in[kNorth];
      break;
    default:
      if (pe < cols_)
        throw SimError("PE (0, " + std::to_string(pe % cols_) +
                       ") emitted north off grid");
      target_pe = pe - cols_;
      target = &pes_[target_pe].in[kSouth];
      break;
  }
  if (target->words + f.len > params_.fifo_capacity) return false;
  f.ready = std::uint32_t(now_ + f.len);  // one word per cycle per hop
  target->push(f);
  sender.port_free_at[port] = now_ + f.len;
  if (target_pe != UINT32_MAX) wake(target_pe, f.ready);
  return true;
}

inline void Fabric::push_frame(std::uint32_t from_pe, Port port, Word w0,
                               Word w1, int len, WaveletTag tag) {
  report_.words_enqueued += len;
  in_flight_ += len;
  detail::Pe& pe = pes_[from_pe];
  detail::Egress& eq = pe.out[port];
  detail::Frame f{w0, w1, 0, std::uint8_t(len), tag};
  if (eq.empty() && try_send(from_pe, port, f)) return;
  eq.frames.push_back(f);
  pe.egress_pending = true;
  if (!pe.in_egress_list) {
    pe.in_egress_list = true;
    egress_list_.push_back(from_pe);
  }
}

inline void PeContext::emit(Port port, Word w, WaveletTag tag) {
  fab_->push_frame(pe_, port, w, 0, 1, tag);
}

inline void PeContext::emit_pair(Port port, Word w0, Word w1,
                                 WaveletTag tag) {
  fab_->push_frame(pe_, port, w0, w1, 2, tag);
}

inline void PeContext::emit_slab(Port port, const Word* words, std::size_t n,
                                 WaveletTag tag) {
  for (std::size_t i = 0; i < n; ++i)
    fab_->push_frame(pe_, port, words[i], 0, 1, tag);
}

inline void PeContext::count_fmacs(std::uint64_t n) {
  fab_->pes_[pe_].fmacs += n;
  fab_->report_.fmacs += n;
  compute_ops_ += n;  // one cycle per FMAC
}

inline std::uint32_t PeContext::row() const { return pe_ / fab_->cols_; }
inline std::uint32_t PeContext::col() const { return pe_ % fab_->cols_; }
inline std::uint64_t PeContext::now() const { return fab_->now_; }

}  // namespace waferflow
