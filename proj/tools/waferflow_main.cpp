// waferflow: experiment harness for streamed sparse-matrix kernels on a
// simulated wafer-scale PE grid.
//
//   footprint   stream-encoding size sweeps and the CSR/dense formulas
//   spmm        run SpMM kernel variants, optionally against the oracle
//   sddmm       run the SDDMM kernel, optionally against the oracle
//   sweep       cross-product parameter sweeps over both kernels

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "waferflow/footprint.hpp"
#include "waferflow/mmio.hpp"
#include "waferflow/random_gen.hpp"
#include "waferflow/reference.hpp"
#include "waferflow/sddmm.hpp"
#include "waferflow/sellpack.hpp"
#include "waferflow/spmm.hpp"

using json = nlohmann::ordered_json;
using namespace waferflow;

namespace {

std::uint64_t fnv1a(const void* data, std::size_t bytes) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::string resolve_out_path(const std::string& out) {
  if (out.empty() || out == "-") return out;
  const char* dir = std::getenv("WAFERFLOW_OUTDIR");
  if (dir && *dir && out.front() != '/')
    return std::string(dir) + "/" + out;
  return out;
}

class RecordWriter {
 public:
  RecordWriter(const std::string& out, const std::string& format)
      : format_(format) {
    const std::string path = resolve_out_path(out);
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw Error("cannot open output file " + path);
    }
  }

  void add(json rec) { records_.push_back(std::move(rec)); }

  void flush() {
    std::ostream& os = file_.is_open() ? file_ : std::cout;
    if (format_ == "json") {
      for (const auto& r : records_) os << r.dump() << "\n";
      return;
    }
    if (records_.empty()) return;
    std::vector<std::string> cols;
    for (auto it = records_[0].begin(); it != records_[0].end(); ++it) {
      if (it.value().is_object())
        for (auto jt = it.value().begin(); jt != it.value().end(); ++jt)
          cols.push_back(it.key() + "_" + jt.key());
      else
        cols.push_back(it.key());
    }
    for (std::size_t i = 0; i < cols.size(); ++i)
      os << cols[i] << (i + 1 < cols.size() ? "," : "\n");
    for (const auto& r : records_) {
      bool first = true;
      for (auto it = r.begin(); it != r.end(); ++it) {
        auto emit = [&](const json& v) {
          if (!first) os << ",";
          first = false;
          if (v.is_string())
            os << v.get<std::string>();
          else
            os << v.dump();
        };
        if (it.value().is_object())
          for (auto jt = it.value().begin(); jt != it.value().end(); ++jt)
            emit(jt.value());
        else
          emit(it.value());
      }
      os << "\n";
    }
  }

 private:
  std::string format_;
  std::ofstream file_;
  std::vector<json> records_;
};

void trace_to_stderr(const TraceEvent& ev) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%llu,%u,%u,%d,%08x,%s\n",
                static_cast<unsigned long long>(ev.cycle), ev.pe_row,
                ev.pe_col, ev.port, ev.word, ev.task);
  std::fputs(buf, stderr);
}

json cycles_json(const SimReport& r) {
  return json{{"in", r.stream_in_cycles},
              {"compute", r.compute_drain_cycles},
              {"out", r.stream_out_cycles},
              {"total", r.total_cycles}};
}

// One simulation point of a sweep.
struct Point {
  std::string variant;  // v1, v2, v3 or sddmm
  std::uint32_t n = 0, d = 0, myc = 0, mvpp = 0, mcpp = 0, mnz = 0;
  std::uint32_t lw = 0, lh = 0, io = 0;
  std::uint64_t seed = 0;
  double density = 0.0;
};

KernelConfig point_config(const Point& pt) {
  KernelConfig cfg;
  cfg.n = pt.n;
  cfg.d = pt.d;
  cfg.max_y_chunk = pt.myc;
  cfg.max_v_per_pe = pt.mvpp;
  cfg.max_col_per_pe = pt.mcpp;
  cfg.max_nonzeros = pt.mnz;
  cfg.local_width = pt.lw;
  cfg.local_height = pt.lh;
  cfg.io_channels = pt.io;
  return cfg;
}

void validate_point(const Point& pt) {
  KernelConfig cfg = point_config(pt);
  if (pt.variant == "sddmm") {
    cfg.validate_sddmm();
    return;
  }
  (void)spmm_variant_from_string(pt.variant);
  cfg.validate_spmm();
}

json run_point(const Point& pt, bool verify, bool trace) {
  KernelConfig cfg = point_config(pt);
  CsrMatrix a = random_sparse(pt.n, pt.density, pt.seed);
  const TraceFn tracer = trace ? TraceFn(trace_to_stderr) : TraceFn();

  json rec;
  rec["variant"] = pt.variant;
  rec["n"] = pt.n;
  rec["d"] = pt.d;
  rec["density"] = pt.density;
  rec["seed"] = pt.seed;
  rec["nnz"] = a.nnz();

  if (pt.variant == "sddmm") {
    DenseMatrix b = random_dense(pt.n, pt.d, pt.seed + 1);
    DenseMatrix c = random_dense(pt.d, pt.n, pt.seed + 2);
    SddmmRun run = sddmm(a, b, c, cfg, {}, tracer);
    rec["mnz"] = pt.mnz;
    rec["local_width"] = pt.lw;
    rec["local_height"] = pt.lh;
    rec["cycles"] = cycles_json(run.report);
    rec["h2d_words"] = run.report.h2d_words;
    rec["d2h_words"] = run.report.d2h_words;
    rec["signal_words"] = run.report.signal_words;
    rec["fmacs"] = run.report.fmacs;
    if (verify) {
      CsrMatrix ref = sddmm_ref(a, b, c);
      DenseMatrix got(1, std::uint32_t(run.y.values.size()));
      got.data = run.y.values;
      DenseMatrix want = got;
      want.data = ref.values;
      rec["oracle_pass"] = compare(got, want, 1e-4f, 1e-6f).pass;
    }
    rec["checksum"] = fnv1a(run.y.values.data(), run.y.values.size() * 4);
    return rec;
  }

  const SpmmVariant v = spmm_variant_from_string(pt.variant);
  DenseMatrix h = random_dense(pt.n, pt.d, pt.seed + 1);
  SpmmRun run = spmm(v, a, h, cfg, {}, tracer);
  rec["myc"] = pt.myc;
  rec["mvpp"] = pt.mvpp;
  rec["mcpp"] = pt.mcpp;
  rec["io_channels"] = pt.io;
  rec["panels"] = run.panels;
  rec["cycles"] = cycles_json(run.report);
  rec["h2d_words"] = run.report.h2d_words;
  rec["d2h_words"] = run.report.d2h_words;
  rec["fmacs"] = run.report.fmacs;
  if (verify)
    rec["oracle_pass"] = compare(run.y, spmm_ref(a, h), 1e-4f, 1e-6f).pass;
  rec["checksum"] = fnv1a(run.y.data.data(), run.y.data.size() * 4);
  return rec;
}

// Cross product of the sweep axes, ordered for stable CSV diffs.
std::vector<Point> build_points(std::vector<std::string> variants,
                                std::vector<std::uint32_t> ns,
                                std::vector<double> densities,
                                std::vector<std::uint32_t> mycs,
                                std::vector<std::uint32_t> mvpps,
                                std::vector<std::uint32_t> mcpps,
                                std::vector<std::uint32_t> mnzs,
                                std::vector<std::uint32_t> ds,
                                std::uint32_t lw, std::uint32_t lh,
                                std::uint32_t io, std::uint64_t seed,
                                std::uint32_t repeat) {
  std::sort(ns.begin(), ns.end());
  std::sort(densities.begin(), densities.end());
  std::sort(mycs.begin(), mycs.end());
  std::vector<Point> points;
  for (std::uint32_t n : ns)
    for (double density : densities)
      for (std::uint32_t myc : mycs)
        for (std::uint32_t mvpp : mvpps)
          for (std::uint32_t d : ds)
            for (const std::string& variant : variants)
              for (std::uint32_t r = 0; r < repeat; ++r) {
                if (variant == "sddmm") {
                  for (std::uint32_t mnz : mnzs) {
                    Point pt;
                    pt.variant = variant;
                    pt.n = n;
                    pt.d = d;
                    pt.density = density;
                    pt.mnz = mnz;
                    pt.lw = lw;
                    pt.lh = lh;
                    pt.io = io;
                    pt.myc = myc;
                    pt.mvpp = mvpp;
                    pt.mcpp = 1;
                    pt.seed = seed + r;
                    points.push_back(pt);
                  }
                } else {
                  for (std::uint32_t mcpp : mcpps) {
                    Point pt;
                    pt.variant = variant;
                    pt.n = n;
                    pt.d = d;
                    pt.density = density;
                    pt.myc = myc;
                    pt.mvpp = mvpp;
                    pt.mcpp = mcpp;
                    pt.mnz = mnzs.empty() ? 512 : mnzs[0];
                    pt.lw = lw;
                    pt.lh = lh;
                    pt.io = io;
                    pt.seed = seed + r;
                    points.push_back(pt);
                  }
                }
              }
  return points;
}

int run_points(const std::vector<Point>& points, bool verify, bool trace,
               std::uint32_t jobs, RecordWriter& writer) {
  for (const Point& pt : points) validate_point(pt);

  std::vector<json> results(points.size());
  std::vector<std::string> errors(points.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        results[i] = run_point(points[i], verify, trace);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (jobs <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::uint32_t t = 0; t < jobs; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  int rc = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "error: " << errors[i] << "\n";
      rc = 1;
      continue;
    }
    if (verify && results[i].contains("oracle_pass") &&
        !results[i]["oracle_pass"].get<bool>()) {
      std::cerr << "verification failed: " << results[i].dump() << "\n";
      rc = 1;
    }
    writer.add(std::move(results[i]));
  }
  writer.flush();
  return rc;
}

struct Table1Row {
  const char* graph;
  std::uint64_t nodes;
  std::uint64_t edges;
};

// The four benchmark graphs used for the byte-formula check.
constexpr Table1Row kTable1[] = {
    {"cora", 2710, 10900},
    {"pubmed", 19700, 108000},
    {"arxiv", 169000, 1170000},
    {"products", 2450000, 61900000},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"waferflow: sparse matmul kernels on a simulated PE grid"};
  app.require_subcommand(1);

  std::string out;
  std::string format = "json";
  bool verify = false;
  bool trace = false;
  std::uint32_t jobs = 1;
  std::uint64_t seed = 1;
  std::uint32_t repeat = 1;
  std::uint32_t io = 16;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out, "output path (default stdout)");
    cmd->add_option("--format", format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", seed, "base RNG seed");
    cmd->add_option("--repeat", repeat, "runs per point (seed, seed+1, ...)");
    cmd->add_option("--jobs", jobs, "worker threads for sweep points");
    cmd->add_flag("--trace", trace, "log fabric events to stderr");
    cmd->add_option("--io", io, "host I/O channels per edge");
  };

  // ---- footprint ----------------------------------------------------
  auto* fp = app.add_subcommand(
      "footprint", "stream-format size census and byte formulas");
  std::vector<std::uint32_t> fp_n{16384};
  std::vector<double> fp_density{1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<std::uint32_t> fp_myc{256, 1024};
  std::uint32_t fp_mvpp = 64;
  std::uint32_t granule = 128;
  bool table1 = false;
  fp->add_option("--n", fp_n, "matrix dimensions")->delimiter(',');
  fp->add_option("--density", fp_density, "density values")->delimiter(',');
  fp->add_option("--myc", fp_myc, "max_y_chunk values")->delimiter(',');
  fp->add_option("--mvpp", fp_mvpp, "max_v_per_pe");
  fp->add_option("--granule", granule,
                 "host transfer granularity in pairs (1 = none)");
  fp->add_flag("--table1", table1, "emit the benchmark-graph byte formulas");
  add_common(fp);

  // ---- spmm ----------------------------------------------------------
  auto* sp = app.add_subcommand("spmm", "run SpMM kernel variants");
  std::vector<std::string> sp_variants{"v1"};
  std::vector<std::uint32_t> sp_n{1024};
  std::vector<double> sp_density{0.05};
  std::vector<std::uint32_t> sp_myc{512};
  std::vector<std::uint32_t> sp_mvpp{64};
  std::vector<std::uint32_t> sp_mcpp{1};
  std::vector<std::uint32_t> sp_d{256};
  sp->add_option("--variant", sp_variants, "v1,v2,v3")->delimiter(',');
  sp->add_option("--n", sp_n, "matrix dimensions")->delimiter(',');
  sp->add_option("--density", sp_density, "density values")->delimiter(',');
  sp->add_option("--myc", sp_myc, "max_y_chunk values")->delimiter(',');
  sp->add_option("--mvpp", sp_mvpp, "max_v_per_pe values")->delimiter(',');
  sp->add_option("--mcpp", sp_mcpp, "max_col_per_pe values")->delimiter(',');
  sp->add_option("--d", sp_d, "feature widths")->delimiter(',');
  sp->add_flag("--verify", verify, "compare against the dense oracle");
  add_common(sp);

  // ---- sddmm ---------------------------------------------------------
  auto* sd = app.add_subcommand("sddmm", "run the SDDMM kernel");
  std::vector<std::uint32_t> sd_n{1024};
  std::vector<double> sd_density{0.05};
  std::vector<std::uint32_t> sd_mnz{512};
  std::vector<std::uint32_t> sd_d{2};
  std::uint32_t sd_lw = 64, sd_lh = 64;
  sd->add_option("--n", sd_n, "matrix dimensions")->delimiter(',');
  sd->add_option("--density", sd_density, "density values")->delimiter(',');
  sd->add_option("--mnz", sd_mnz, "max_nonzeros values")->delimiter(',');
  sd->add_option("--d", sd_d, "feature widths")->delimiter(',');
  sd->add_option("--lw", sd_lw, "tile width");
  sd->add_option("--lh", sd_lh, "tile height");
  sd->add_flag("--verify", verify, "compare against the dense oracle");
  add_common(sd);

  // ---- sweep ---------------------------------------------------------
  auto* sw = app.add_subcommand("sweep", "cross-product parameter sweep");
  std::string config_path;
  std::vector<std::string> sw_variants{"v1", "v2", "v3"};
  std::vector<std::uint32_t> sw_n{2048, 4096, 8192, 16384, 32768, 65536};
  std::vector<double> sw_density{1e-4, 1e-3, 1e-2, 1e-1, 0.3};
  std::vector<std::uint32_t> sw_myc{512};
  std::vector<std::uint32_t> sw_mvpp{64};
  std::vector<std::uint32_t> sw_mcpp{1};
  std::vector<std::uint32_t> sw_mnz{512};
  std::vector<std::uint32_t> sw_d{256};
  std::uint32_t sw_lw = 64, sw_lh = 64;
  sw->add_option("--config", config_path, "JSON sweep spec");
  sw->add_option("--variant", sw_variants, "v1,v2,v3,sddmm")->delimiter(',');
  sw->add_option("--n", sw_n, "matrix dimensions")->delimiter(',');
  sw->add_option("--density", sw_density, "density values")->delimiter(',');
  sw->add_option("--myc", sw_myc, "max_y_chunk values")->delimiter(',');
  sw->add_option("--mvpp", sw_mvpp, "max_v_per_pe values")->delimiter(',');
  sw->add_option("--mcpp", sw_mcpp, "max_col_per_pe values")->delimiter(',');
  sw->add_option("--mnz", sw_mnz, "max_nonzeros values")->delimiter(',');
  sw->add_option("--d", sw_d, "feature widths")->delimiter(',');
  sw->add_option("--lw", sw_lw, "sddmm tile width");
  sw->add_option("--lh", sw_lh, "sddmm tile height");
  sw->add_flag("--verify", verify, "compare against the dense oracle");
  add_common(sw);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(fp)) {
      RecordWriter writer(out, format);
      if (table1) {
        for (const Table1Row& row : kTable1) {
          json rec;
          rec["graph"] = row.graph;
          rec["nodes"] = row.nodes;
          rec["edges"] = row.edges;
          rec["dense_gb"] = dense_footprint_bytes(row.nodes) / kBytesPerGiB;
          rec["csr_gb"] =
              csr_footprint_bytes(row.nodes, row.edges) / kBytesPerGiB;
          writer.add(std::move(rec));
        }
        writer.flush();
        return 0;
      }
      std::sort(fp_n.begin(), fp_n.end());
      std::sort(fp_density.begin(), fp_density.end());
      std::sort(fp_myc.begin(), fp_myc.end());
      for (std::uint32_t n : fp_n) {
        for (double density : fp_density) {
          for (std::uint32_t r = 0; r < repeat; ++r) {
            CsrMatrix a = random_sparse(n, density, seed + r);
            for (std::uint32_t myc : fp_myc) {
              KernelConfig cfg;
              cfg.n = n;
              cfg.d = 1;
              cfg.max_y_chunk = myc;
              cfg.max_v_per_pe = fp_mvpp;
              StreamStats st = sellpack_stream_stats(a, cfg);
              json rec;
              rec["n"] = n;
              rec["density"] = density;
              rec["myc"] = myc;
              rec["mvpp"] = fp_mvpp;
              rec["seed"] = seed + r;
              rec["nnz"] = a.nnz();
              rec["total_pairs"] = st.total_pairs;
              rec["nnz_pairs"] = st.nnz_pairs;
              rec["endrow_pairs"] = st.endrow_pairs;
              rec["null_pairs"] = st.null_pairs;
              rec["ratio"] = double(st.total_pairs) / double(std::max<
                  std::uint64_t>(1, a.nnz()));
              rec["bytes"] = st.total_bytes();
              rec["granule"] = granule;
              rec["transfer_bytes"] = st.transfer_bytes(granule);
              rec["csr_bytes"] = csr_footprint_bytes(n, a.nnz());
              rec["csr_bytes_with_values"] =
                  csr_footprint_bytes_with_values(n, a.nnz());
              rec["dense_bytes"] = dense_footprint_bytes(n);
              writer.add(std::move(rec));
            }
          }
        }
      }
      writer.flush();
      return 0;
    }

    std::vector<Point> points;
    if (app.got_subcommand(sp)) {
      points = build_points(sp_variants, sp_n, sp_density, sp_myc, sp_mvpp,
                            sp_mcpp, {}, sp_d, 64, 64, io, seed, repeat);
    } else if (app.got_subcommand(sd)) {
      points = build_points({"sddmm"}, sd_n, sd_density, {512}, {64}, {1},
                            sd_mnz, sd_d, sd_lw, sd_lh, io, seed, repeat);
    } else {
      if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw Error("cannot open config file " + config_path);
        json cfg = json::parse(f);
        auto load = [&cfg](const char* key, auto& target) {
          if (cfg.contains(key)) target = cfg[key].get<std::decay_t<
              decltype(target)>>();
        };
        load("variants", sw_variants);
        load("n", sw_n);
        load("density", sw_density);
        load("myc", sw_myc);
        load("mvpp", sw_mvpp);
        load("mcpp", sw_mcpp);
        load("mnz", sw_mnz);
        load("d", sw_d);
        load("local_width", sw_lw);
        load("local_height", sw_lh);
        load("io_channels", io);
        load("jobs", jobs);
        load("repeat", repeat);
        load("out", out);
        load("format", format);
        if (cfg.contains("seeds")) seed = cfg["seeds"][0].get<std::uint64_t>();
        if (cfg.contains("verify")) verify = cfg["verify"].get<bool>();
      }
      points = build_points(sw_variants, sw_n, sw_density, sw_myc, sw_mvpp,
                            sw_mcpp, sw_mnz, sw_d, sw_lw, sw_lh, io, seed,
                            repeat);
    }
    RecordWriter writer(out, format);
    return run_points(points, verify, trace, jobs, writer);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
