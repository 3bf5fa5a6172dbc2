#include "waferflow/fabric.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

namespace waferflow {

namespace {

const char* port_name(int p) {
  static const char* names[4] = {"west", "north", "east", "south"};
  return p >= 0 && p < 4 ? names[p] : "host";
}

}  // namespace

// ----------------------------------------------------------------- fabric

Fabric::Fabric(std::uint32_t rows, std::uint32_t cols, FabricParams params)
    : rows_(rows), cols_(cols), params_(params) {
  if (rows == 0 || cols == 0) throw PlacementError("fabric: empty grid");
  if (rows > params_.max_grid_rows || cols > params_.max_grid_cols)
    throw PlacementError("fabric: grid " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " exceeds the " +
                         std::to_string(params_.max_grid_rows) + "x" +
                         std::to_string(params_.max_grid_cols) + " cap");
  if (params_.fifo_capacity == 0 ||
      params_.fifo_capacity > detail::Fifo::kSlots)
    throw PlacementError("fabric: fifo capacity must be in [1, 8]");
  pes_.resize(std::size_t(rows) * cols);
  host_out_.resize(rows);
}

Fabric make_fabric(Placement placement, const FabricParams& params) {
  Fabric f(placement.rows, placement.cols, params);
  f.load_program(std::move(placement));
  return f;
}

void Fabric::load_program(Placement placement) {
  std::uint64_t peak = 0;
  for (auto& cell : placement.cells) {
    if (cell.row >= rows_ || cell.col >= cols_)
      throw PlacementError("load_program: cell (" + std::to_string(cell.row) +
                           ", " + std::to_string(cell.col) +
                           ") outside the grid");
    const std::uint64_t need = cell.prog->memory_bytes();
    if (need > params_.pe_memory_bytes)
      throw PlacementError(
          "load_program: PE (" + std::to_string(cell.row) + ", " +
          std::to_string(cell.col) + ") program '" + cell.prog->name() +
          "' declares " + std::to_string(need) + " B, budget " +
          std::to_string(params_.pe_memory_bytes) + " B (over by " +
          std::to_string(need - params_.pe_memory_bytes) + " B)");
    peak = std::max(peak, need);
    detail::Pe& pe = pes_[pe_id(cell.row, cell.col)];
    if (pe.prog)
      throw PlacementError("load_program: PE (" + std::to_string(cell.row) +
                           ", " + std::to_string(cell.col) +
                           ") already has a program");
    pe.prog = std::move(cell.prog);
  }
  report_.peak_pe_memory_bytes = std::max(report_.peak_pe_memory_bytes, peak);
}

void Fabric::drain_egress(std::uint32_t id) {
  detail::Pe& pe = pes_[id];
  if (pe.busy_until > now_) return;  // the send engine waits out compute
  bool pending = false;
  for (int p = 0; p < 4; ++p) {
    detail::Egress& eq = pe.out[p];
    while (!eq.empty() && try_send(id, Port(p), eq.frames[eq.head])) {
      ++eq.head;
      progress_ = true;
    }
    eq.clear_if_drained();
    if (!eq.empty()) pending = true;
  }
  pe.egress_pending = pending;
}

void Fabric::evaluate_pe(std::uint32_t id) {
  detail::Pe& pe = pes_[id];
  if (pe.busy_until > now_) {
    wake(id, pe.busy_until);
    return;
  }
  Program* prog = pe.prog.get();
  if (!prog) return;
  if (pe.egress_pending) return;  // gated until the egress engine drains

  int best = -1;
  const std::uint8_t mask = prog->port_mask;
  if ((mask & (mask - 1)) == 0) {
    // Single enabled port: the overwhelmingly common case.
    if (mask == 0) return;
    const int p = __builtin_ctz(mask);
    const detail::Fifo& f = pe.in[p];
    if (f.empty() || f.peek().ready > now_) return;
    best = p;
  } else {
    std::uint32_t best_ready = 0;
    for (int p = 0; p < 4; ++p) {
      if (!(mask & (1u << p))) continue;
      const detail::Fifo& f = pe.in[p];
      if (f.empty()) continue;
      const std::uint32_t ready = f.peek().ready;
      if (ready > now_) continue;
      if (best == -1 || ready < best_ready) {
        best = p;
        best_ready = ready;
      }
    }
    if (best == -1) return;
  }

  const detail::Frame frame = pe.in[best].pop();
  if (trace_on_) {
    TraceEvent ev{now_,     id / cols_, id % cols_, best,
                  frame.w0, frame.tag,  prog->name()};
    trace_(ev);
    if (frame.len == 2) {
      ev.word = frame.w1;
      ev.tag = WaveletTag::Value;
      trace_(ev);
    }
  }
  report_.words_dequeued += frame.len;
  in_flight_ -= frame.len;

  ctx_.pe_ = id;
  ctx_.compute_ops_ = 0;
  const Word words[2] = {frame.w0, frame.w1};
  prog->on_frame(ctx_, Port(best), words, frame.len);

  const std::uint64_t cost =
      std::max<std::uint64_t>(frame.len, ctx_.compute_ops_);
  pe.busy_until = now_ + cost;
  pe.busy_cycles += cost;
  wake(id, pe.busy_until);
  progress_ = true;
}

namespace {

bool rows_overlap(const std::vector<std::uint32_t>& a,
                  const std::vector<std::uint32_t>& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j])
      ++i;
    else
      ++j;
  }
  return false;
}

bool is_h2d(const CopyOp& op) { return op.kind == CopyOp::Kind::kH2D; }

}  // namespace

// Copies issue in script order. A copy may run concurrently with an active
// copy only when both are non-blocking and they target disjoint channel
// sets (west h2d lanes and east d2h lanes are always disjoint). A
// device-to-host copy blocks every later host-to-device copy until it has
// fully drained; same-direction copies on shared rows keep script order.
bool Fabric::op_may_start(const HostScript& script, std::size_t i) const {
  const CopyOp& oi = script[i];
  for (std::size_t j = 0; j < i; ++j) {
    if (op_done_[j]) continue;
    const CopyOp& oj = script[j];
    if (is_h2d(oi) && !is_h2d(oj)) return false;  // d2h drains block h2d
    if (!op_started_[j] && is_h2d(oi) == is_h2d(oj) &&
        rows_overlap(op_rows_[i], op_rows_[j]))
      return false;  // keep issue order on shared lanes
  }
  for (std::size_t j = 0; j < script.size(); ++j) {
    if (j == i || !op_started_[j] || op_done_[j]) continue;
    const CopyOp& oj = script[j];
    if (!(oi.nonblock && oj.nonblock)) return false;
    if (is_h2d(oi) == is_h2d(oj) && rows_overlap(op_rows_[i], op_rows_[j]))
      return false;
  }
  return true;
}

void Fabric::start_op(HostScript& script, std::size_t i) {
  CopyOp& op = script[i];
  op_started_[i] = 1;
  progress_ = true;
  if (op.kind == CopyOp::Kind::kH2D) {
    for (std::uint32_t s = 0; s < op.streams.size(); ++s) {
      if (op.streams[s].row >= rows_)
        throw SimError("h2d stream row outside the grid");
      pending_h2d_.push_back(std::uint32_t(i) << 16 | s);
    }
  } else {
    op.received.assign(op.drains.size(), {});
    for (std::uint32_t d = 0; d < op.drains.size(); ++d) {
      if (op.drains[d].row >= rows_)
        throw SimError("d2h drain row outside the grid");
      pending_d2h_.push_back(std::uint32_t(i) << 16 | d);
    }
  }
  bind_free_lanes();
}

void Fabric::bind_free_lanes() {
  for (auto& lane : h2d_lanes_) {
    if (pending_h2d_head_ >= pending_h2d_.size()) break;
    if (lane.active) continue;
    const std::uint32_t key = pending_h2d_[pending_h2d_head_++];
    lane = LaneBinding{true, false, key >> 16, key & 0xFFFF, 0};
    ++active_h2d_lanes_;
  }
  for (auto& lane : d2h_lanes_) {
    if (pending_d2h_head_ >= pending_d2h_.size()) break;
    if (lane.active) continue;
    const std::uint32_t key = pending_d2h_[pending_d2h_head_++];
    lane = LaneBinding{true, false, key >> 16, key & 0xFFFF, 0};
    ++active_d2h_lanes_;
  }
}

void Fabric::run_h2d_lanes(HostScript& script) {
  bool rebind = false;
  for (auto& lane : h2d_lanes_) {
    if (!lane.active) continue;
    CopyOp& op = script[lane.op];
    const CopyOp::Stream& st = op.streams[lane.index];
    if (lane.cursor >= st.words.size()) {
      lane.active = false;
      --active_h2d_lanes_;
      rebind = true;
      continue;
    }
    const std::uint32_t pe = pe_id(st.row, 0);
    detail::Fifo& fifo = pes_[pe].in[kWest];
    const bool pair = st.pair_framed;
    if (pair && !lane.staged) {
      // First word of the pair goes on the wire this cycle; the frame
      // lands when its second word arrives next cycle.
      if (fifo.words + 2 > params_.fifo_capacity) continue;
      lane.staged = true;
    } else {
      detail::Frame f;
      if (pair) {
        f = detail::Frame{st.words[lane.cursor - 1], st.words[lane.cursor],
                          std::uint32_t(now_ + 1), 2, WaveletTag::Index};
        lane.staged = false;
      } else {
        if (fifo.words + 1 > params_.fifo_capacity) continue;
        f = detail::Frame{st.words[lane.cursor], 0, std::uint32_t(now_ + 1),
                          1, WaveletTag::Raw};
      }
      fifo.push(f);
      in_flight_ += f.len;
      report_.words_enqueued += f.len;
      wake(pe, f.ready);
    }
    if (trace_on_) {
      TraceEvent ev{now_, st.row, 0, -1, st.words[lane.cursor],
                    WaveletTag::Raw, "h2d"};
      trace_(ev);
    }
    ++lane.cursor;
    ++report_.h2d_words;
    --op_remaining_[lane.op];
    progress_ = true;
    h2d_active_this_cycle_ = true;
    if (lane.cursor >= st.words.size()) {
      lane.active = false;
      --active_h2d_lanes_;
      rebind = true;
    }
  }
  if (rebind) bind_free_lanes();
}

void Fabric::run_d2h_lanes(HostScript& script) {
  bool rebind = false;
  for (auto& lane : d2h_lanes_) {
    if (!lane.active) continue;
    CopyOp& op = script[lane.op];
    const CopyOp::Drain& dr = op.drains[lane.index];
    detail::Fifo& f = host_out_[dr.row];
    if (!f.empty() && f.peek().ready <= now_) {
      if (trace_on_) {
        TraceEvent ev{now_, dr.row, cols_ - 1, -1, f.peek().w0, f.peek().tag,
                      op.kind == CopyOp::Kind::kWaitSignal ? "signal" : "d2h"};
        trace_(ev);
      }
      const Word w = f.pop().w0;
      op.received[lane.index].push_back(w);
      ++report_.words_dequeued;
      --in_flight_;
      if (op.kind == CopyOp::Kind::kWaitSignal)
        ++report_.signal_words;
      else
        ++report_.d2h_words;
      ++lane.cursor;
      --op_remaining_[lane.op];
      progress_ = true;
      d2h_active_this_cycle_ = true;
    }
    if (lane.cursor >= dr.expect) {
      lane.active = false;
      --active_d2h_lanes_;
      rebind = true;
    }
  }
  if (rebind) bind_free_lanes();
}

void Fabric::deadlock_diagnostic(const HostScript& script) const {
  std::ostringstream os;
  os << "deadlock at cycle " << now_ << ": no wavelet moved and no host copy "
     << "progressed while work remains; in-flight words = " << in_flight_;
  for (std::size_t i = 0; i < script.size(); ++i)
    if (!op_done_[i])
      os << "; op " << i << (op_started_[i] ? " active" : " not started")
         << " remaining " << op_remaining_[i];
  int listed = 0;
  for (std::uint32_t id = 0; id < pes_.size() && listed < 8; ++id) {
    for (int p = 0; p < 4; ++p) {
      if (pes_[id].in[p].count > 0) {
        os << "; PE(" << id / cols_ << "," << id % cols_ << ")."
           << port_name(p) << " holds " << int(pes_[id].in[p].words)
           << " words, head 0x" << std::hex << pes_[id].in[p].peek().w0
           << std::dec;
        ++listed;
        break;
      }
    }
  }
  throw SimError(os.str());
}

SimReport Fabric::run(HostScript& script) {
  // Reset scheduling state; program state persists from load.
  ctx_.fab_ = this;
  trace_on_ = bool(trace_);
  now_ = 0;
  in_flight_ = 0;
  for (auto& b : ready_) b.clear();
  while (!wake_heap_.empty()) wake_heap_.pop();
  egress_list_.clear();
  pending_h2d_.clear();
  pending_h2d_head_ = 0;
  pending_d2h_.clear();
  pending_d2h_head_ = 0;
  h2d_lanes_.assign(params_.io_channels, {});
  d2h_lanes_.assign(params_.io_channels, {});
  active_h2d_lanes_ = active_d2h_lanes_ = 0;
  op_started_.assign(script.size(), 0);
  op_done_.assign(script.size(), 0);
  op_remaining_.assign(script.size(), 0);
  const std::uint64_t peak_mem = report_.peak_pe_memory_bytes;
  report_ = SimReport{};
  report_.peak_pe_memory_bytes = peak_mem;

  op_rows_.assign(script.size(), {});
  for (std::size_t i = 0; i < script.size(); ++i) {
    const CopyOp& op = script[i];
    if (op.kind == CopyOp::Kind::kH2D) {
      if (!op.drains.empty()) throw SimError("h2d op must not carry drains");
      for (const auto& s : op.streams) {
        if (s.pair_framed && s.words.size() % 2 != 0)
          throw SimError("pair-framed stream with an odd word count");
        op_remaining_[i] += s.words.size();
        op_rows_[i].push_back(s.row);
      }
    } else {
      if (!op.streams.empty()) throw SimError("d2h op must not carry streams");
      for (const auto& d : op.drains) {
        op_remaining_[i] += d.expect;
        op_rows_[i].push_back(d.row);
      }
    }
    std::sort(op_rows_[i].begin(), op_rows_[i].end());
  }

  start_dirty_ = true;
  std::size_t ops_done = 0;

  for (;;) {
    const bool buckets_empty = ready_[0].empty() && ready_[1].empty() &&
                               ready_[2].empty() && wake_heap_.empty();
    if (ops_done == script.size() && in_flight_ == 0 && buckets_empty &&
        egress_list_.empty())
      break;
    if (params_.max_cycles && now_ >= params_.max_cycles)
      throw SimError("cycle cap " + std::to_string(params_.max_cycles) +
                     " exceeded");

    progress_ = false;
    h2d_active_this_cycle_ = false;
    d2h_active_this_cycle_ = false;

    while (!wake_heap_.empty() && wake_heap_.top().first <= now_) {
      ready_[now_ & 3].push_back(wake_heap_.top().second);
      wake_heap_.pop();
    }

    if (start_dirty_) {
      start_dirty_ = false;
      for (std::size_t i = 0; i < script.size(); ++i)
        if (!op_started_[i] && op_may_start(script, i)) start_op(script, i);
    }

    if (active_h2d_lanes_ > 0) run_h2d_lanes(script);

    if (!egress_list_.empty()) {
      std::size_t w = 0;
      for (std::size_t i = 0; i < egress_list_.size(); ++i) {
        const std::uint32_t id = egress_list_[i];
        drain_egress(id);
        if (pes_[id].egress_pending) {
          egress_list_[w++] = id;
        } else {
          pes_[id].in_egress_list = false;
          wake(id, now_ + 1);
        }
      }
      egress_list_.resize(w);
    }

    {  // PE tasks
      auto& bucket = ready_[now_ & 3];
      for (std::size_t i = 0; i < bucket.size(); ++i) evaluate_pe(bucket[i]);
      bucket.clear();
    }

    if (active_d2h_lanes_ > 0) run_d2h_lanes(script);

    if (progress_) {
      for (std::size_t i = 0; i < script.size(); ++i) {
        if (op_started_[i] && !op_done_[i] && op_remaining_[i] == 0) {
          op_done_[i] = 1;
          ++ops_done;
          start_dirty_ = true;
        }
      }
    }

    if (!progress_) {
      const bool future = !wake_heap_.empty() ||
                          !ready_[(now_ + 1) & 3].empty() ||
                          !ready_[(now_ + 2) & 3].empty();
      if (!future) {
        if (ops_done == script.size() && in_flight_ == 0 &&
            egress_list_.empty())
          break;  // quiescent; the idle probe cycle is not counted
        deadlock_diagnostic(script);
      }
    }

    if (h2d_active_this_cycle_)
      ++report_.stream_in_cycles;
    else if (d2h_active_this_cycle_)
      ++report_.stream_out_cycles;
    else
      ++report_.compute_drain_cycles;

    if (!progress_ && ready_[(now_ + 1) & 3].empty() &&
        ready_[(now_ + 2) & 3].empty() && !wake_heap_.empty() &&
        wake_heap_.top().first > now_ + 1) {
      // Only compute remains pending; fast-forward to the next wake.
      const std::uint64_t jump = wake_heap_.top().first;
      report_.compute_drain_cycles += jump - now_ - 1;
      now_ = jump;
    } else {
      ++now_;
    }
  }

  report_.total_cycles = now_;
  if (params_.check_invariants) {
    if (report_.words_enqueued != report_.words_dequeued || in_flight_ != 0)
      throw SimError("conservation violated: enqueued " +
                     std::to_string(report_.words_enqueued) + ", dequeued " +
                     std::to_string(report_.words_dequeued));
  }
  for (std::uint32_t id = 0; id < pes_.size(); ++id) {
    if (!pes_[id].prog) continue;
    report_.pe_stats.push_back(
        PeBusy{id / cols_, id % cols_, pes_[id].busy_cycles, pes_[id].fmacs});
  }
  return report_;
}

std::string SimReport::to_json(bool include_pe_stats) const {
  nlohmann::json j;
  j["total_cycles"] = total_cycles;
  j["cycles"] = {{"in", stream_in_cycles},
                 {"compute", compute_drain_cycles},
                 {"out", stream_out_cycles},
                 {"total", total_cycles}};
  j["h2d_words"] = h2d_words;
  j["d2h_words"] = d2h_words;
  j["signal_words"] = signal_words;
  j["fmacs"] = fmacs;
  j["words_enqueued"] = words_enqueued;
  j["words_dequeued"] = words_dequeued;
  j["peak_pe_memory_bytes"] = peak_pe_memory_bytes;
  if (include_pe_stats) {
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& s : pe_stats)
      stats.push_back({{"row", s.row},
                       {"col", s.col},
                       {"busy_cycles", s.busy_cycles},
                       {"fmacs", s.fmacs}});
    j["pe_stats"] = std::move(stats);
  }
  return j.dump();
}

}  // namespace waferflow
