#include <doctest.h>

#include <string>
#include <vector>

#include "waferflow/fabric.hpp"
#include "waferflow/random_gen.hpp"
#include "waferflow/spmm.hpp"

using namespace waferflow;

namespace {

// Consumes one word per cycle and remembers arrival times.
class Sink final : public Program {
 public:
  explicit Sink(std::vector<std::uint64_t>* times = nullptr)
      : times_(times) {
    port_mask = 1u << kWest;
  }
  const char* name() const override { return "sink"; }
  void on_frame(PeContext& ctx, Port, const Word*, int) override {
    if (times_) times_->push_back(ctx.now());
  }
  std::vector<std::uint64_t>* times_;
};

// Forwards west words east, recording when each one was handled.
class Hop final : public Program {
 public:
  explicit Hop(std::vector<std::uint64_t>* times = nullptr) : times_(times) {
    port_mask = 1u << kWest;
  }
  const char* name() const override { return "hop"; }
  void on_frame(PeContext& ctx, Port, const Word* w, int) override {
    if (times_) times_->push_back(ctx.now());
    ctx.emit(kEast, w[0]);
  }
  std::vector<std::uint64_t>* times_;
};

class DeafPe final : public Program {
 public:
  DeafPe() { port_mask = 0; }
  const char* name() const override { return "deaf"; }
  void on_frame(PeContext&, Port, const Word*, int) override {}
};

class Hog final : public Program {
 public:
  explicit Hog(std::uint64_t declared) : declared_(declared) {
    port_mask = 1u << kWest;
  }
  const char* name() const override { return "hog"; }
  std::uint64_t memory_bytes() const override { return declared_; }
  void on_frame(PeContext&, Port, const Word*, int) override {}
  std::uint64_t declared_;
};

KernelConfig worker_cfg(std::uint32_t myc) {
  KernelConfig cfg;
  cfg.n = 128;
  cfg.d = 1;
  cfg.max_y_chunk = myc;
  cfg.max_v_per_pe = 64;
  cfg.max_col_per_pe = 1;
  return cfg;
}

}  // namespace

TEST_CASE("empty placement and empty script are no-ops") {
  Fabric f(1, 1);
  f.load_program(Placement{1, 1, {}});
  HostScript script;
  SimReport rep = f.run(script);
  CHECK(rep.total_cycles == 0);
  CHECK(rep.h2d_words == 0);
}

TEST_CASE("a 10-word copy on one lane streams at one word per cycle") {
  Fabric f(1, 1);
  Placement p{1, 1, {}};
  p.place(0, 0, std::make_unique<Sink>());
  f.load_program(std::move(p));

  CopyOp::Stream st;
  st.row = 0;
  st.words.assign(10, 7u);
  HostScript script{CopyOp::h2d({st}, false)};
  SimReport rep = f.run(script);
  CHECK(rep.stream_in_cycles == 10);
  CHECK(rep.h2d_words == 10);
  CHECK(rep.total_cycles == 11);  // one trailing consume after the last word
  CHECK(rep.stream_in_cycles + rep.compute_drain_cycles +
            rep.stream_out_cycles ==
        rep.total_cycles);
}

TEST_CASE("a forwarded wavelet arrives exactly one cycle later") {
  std::vector<std::uint64_t> hop_times, sink_times;
  Fabric f(1, 2);
  Placement p{1, 2, {}};
  p.place(0, 0, std::make_unique<Hop>(&hop_times));
  p.place(0, 1, std::make_unique<Sink>(&sink_times));
  f.load_program(std::move(p));

  CopyOp::Stream st;
  st.row = 0;
  st.words = {1, 2, 3};
  HostScript script{CopyOp::h2d({st}, false)};
  f.run(script);
  REQUIRE(hop_times.size() == 3);
  REQUIRE(sink_times.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(sink_times[i] == hop_times[i] + 1);
}

TEST_CASE("memory budget: a 2048-row chunk buffer loads, 16384 does not") {
  DenseMatrix h(128, 1);
  CsrMatrix a(128, 128);

  Placement ok = build_spmm_placement(SpmmVariant::kV1, worker_cfg(2048), a,
                                      h, 0);
  Fabric f_ok(ok.rows, ok.cols);
  CHECK_NOTHROW(f_ok.load_program(std::move(ok)));

  Placement over = build_spmm_placement(SpmmVariant::kV1, worker_cfg(16384),
                                        a, h, 0);
  Fabric f_over(over.rows, over.cols);
  try {
    f_over.load_program(std::move(over));
    FAIL("expected a memory budget rejection");
  } catch (const PlacementError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("65792") != std::string::npos);
    CHECK(msg.find("47104") != std::string::npos);
  }
}

TEST_CASE("a grid beyond the wafer cap is rejected") {
  CHECK_THROWS_AS(Fabric(1173, 1), PlacementError);
  CHECK_THROWS_AS(Fabric(1, 763), PlacementError);
}

TEST_CASE("an undeliverable word is reported as a deadlock") {
  Fabric f(1, 1);
  Placement p{1, 1, {}};
  p.place(0, 0, std::make_unique<DeafPe>());
  f.load_program(std::move(p));

  CopyOp::Stream st;
  st.row = 0;
  st.words = {1};
  HostScript script{CopyOp::h2d({st}, false)};
  try {
    f.run(script);
    FAIL("expected a deadlock diagnostic");
  } catch (const SimError& e) {
    CHECK(std::string(e.what()).find("deadlock") != std::string::npos);
  }
}

TEST_CASE("per-PE memory declarations are enforced and reported") {
  Fabric f(1, 1, FabricParams{});
  Placement p{1, 1, {}};
  p.place(0, 0, std::make_unique<Hog>(46 * 1024 + 1));
  try {
    f.load_program(std::move(p));
    FAIL("expected rejection");
  } catch (const PlacementError& e) {
    CHECK(std::string(e.what()).find("(0, 0)") != std::string::npos);
    CHECK(std::string(e.what()).find("over by 1") != std::string::npos);
  }
}

TEST_CASE("identical runs produce identical reports") {
  KernelConfig cfg;
  cfg.n = 256;
  cfg.d = 4;
  cfg.max_y_chunk = 64;
  cfg.max_v_per_pe = 64;
  cfg.io_channels = 4;
  CsrMatrix a = random_sparse(256, 0.05, 42);
  DenseMatrix h = random_dense(256, 4, 43);

  SpmmRun r1 = spmm(SpmmVariant::kV2, a, h, cfg);
  SpmmRun r2 = spmm(SpmmVariant::kV2, a, h, cfg);
  CHECK(r1.report.to_json(true) == r2.report.to_json(true));
  CHECK(r1.y.data == r2.y.data);
  CHECK(r1.report.words_enqueued == r1.report.words_dequeued);
}

TEST_CASE("phases partition total cycles on a real kernel run") {
  KernelConfig cfg;
  cfg.n = 128;
  cfg.d = 2;
  cfg.max_y_chunk = 32;
  cfg.max_v_per_pe = 32;
  cfg.io_channels = 4;
  CsrMatrix a = random_sparse(128, 0.1, 9);
  DenseMatrix h = random_dense(128, 2, 10);
  SpmmRun r = spmm(SpmmVariant::kV1, a, h, cfg);
  CHECK(r.report.stream_in_cycles + r.report.compute_drain_cycles +
            r.report.stream_out_cycles ==
        r.report.total_cycles);
  CHECK(r.report.h2d_words == 2 * (a.nnz() + 128));
  CHECK(r.report.d2h_words == 128ull * cfg.d);
}

TEST_CASE("trace emits cycle-stamped events when enabled") {
  Fabric f(1, 1);
  Placement p{1, 1, {}};
  p.place(0, 0, std::make_unique<Sink>());
  f.load_program(std::move(p));
  std::vector<TraceEvent> events;
  f.set_trace([&](const TraceEvent& ev) { events.push_back(ev); });

  CopyOp::Stream st;
  st.row = 0;
  st.words = {0xABCD, 0x1234};
  HostScript script{CopyOp::h2d({st}, false)};
  f.run(script);
  CHECK(events.size() == 4);  // two lane deliveries, two consumed frames
  CHECK(events[0].task == std::string("h2d"));
}
