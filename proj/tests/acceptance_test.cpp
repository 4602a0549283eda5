// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Tolerances are fixed here and must not be loosened to make a run pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "t2sgrid/error.hpp"
#include "t2sgrid/frame_ingest.hpp"
#include "t2sgrid/gridify.hpp"
#include "t2sgrid/grounding_eval.hpp"
#include "t2sgrid/log.hpp"
#include "t2sgrid/model_client.hpp"
#include "t2sgrid/pipeline.hpp"
#include "t2sgrid/prompt.hpp"
#include "t2sgrid/synthetic.hpp"

using namespace t2sgrid;
using t2sgrid::testing::TempDir;
namespace fs = std::filesystem;

namespace {

constexpr double kRoundTripBudgetS = 30.0;
constexpr double kEndToEndBudgetS = 60.0;
constexpr double kIouTolerance = 1e-9;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure only; later checks still run so timing stays honest.
struct Check {
  Outcome out;
  void expect(bool ok, const std::string& what) {
    if (!ok && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const char* kGridConfigs[] = {"g11_s1", "g22_s4", "g32_s6", "g33_s9", "g43_s12", "g43_s7"};

Outcome criterion_roundtrip() {
  Check c;
  std::mt19937_64 rng(20240602);
  const Resolution sizes[] = {{64, 48}, {96, 64}, {128, 96}, {224, 224}, {320, 240}, {448, 336}, {448, 448}};
  const auto t0 = std::chrono::steady_clock::now();
  long long cells = 0;
  for (int v = 0; v < 100 && c.out.pass; ++v) {
    const int T = std::uniform_int_distribution<int>(1, 60)(rng);
    const Resolution res = sizes[rng() % std::size(sizes)];
    GridConfig cfg = parse_grid_config(kGridConfigs[v % std::size(kGridConfigs)]);
    cfg.gutter_px = static_cast<int>(rng() % 3);
    const FrameSequence seq = t2sgrid::testing::random_sequence("v" + std::to_string(v), T, res, rng);
    const auto grids = compose_all(seq, cfg);
    for (std::size_t g = 0; g < grids.size(); ++g) {
      const GridImage& grid = grids[g];
      // The lossless path includes the PNG codec; check it on each video's first grid.
      const GridImage* subject = &grid;
      GridImage decoded;
      if (g == 0) {
        decoded = grid;
        decoded.image = decode_png(encode_png(grid.image));
        c.expect(decoded.image == grid.image, "PNG round trip changed pixels");
        subject = &decoded;
      }
      for (int r = 0; r < cfg.rows; ++r) {
        for (int col = 0; col < cfg.cols; ++col) {
          const int local = r * cfg.cols + col;
          const int src = grid.plan.frame_indices[local];
          const Image cell = extract_cell(*subject, r, col, cfg);
          ++cells;
          if (!(cell == seq.frames[src].image)) {
            c.expect(false, "video " + std::to_string(v) + " " + cfg.to_string() + " cell (" + std::to_string(r) +
                                "," + std::to_string(col) + ") differs from frame " + std::to_string(src));
          }
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < kRoundTripBudgetS, "runtime " + std::to_string(elapsed) + " s over budget");
  if (c.out.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%lld cells byte-equal, %.1f s (< %.0f s)", cells, elapsed, kRoundTripBudgetS);
    c.out.detail = buf;
  }
  return c.out;
}

Outcome criterion_index_algebra() {
  Check c;
  long long patches = 0;
  for (int cols = 1; cols <= 5; ++cols) {
    for (int rows = 1; rows <= 5; ++rows) {
      for (int ph = 1; ph <= 16; ++ph) {
        for (int pw = 1; pw <= 16; ++pw) {
          for (int pr = 0; pr < rows * ph; ++pr) {
            for (int pc = 0; pc < cols * pw; ++pc) {
              ++patches;
              const int got = frame_index_of_patch(pr, pc, ph, pw, cols);
              const int want = frame_index_of_cell(pr / ph, pc / pw, cols);
              if (got != want) {
                std::ostringstream os;
                os << "cols=" << cols << " rows=" << rows << " patch grid " << ph << "x" << pw << " at (" << pr
                   << "," << pc << "): " << got << " vs " << want;
                c.expect(false, os.str());
              }
            }
          }
        }
      }
    }
  }
  if (c.out.pass) c.out.detail = std::to_string(patches) + " patches agree";
  return c.out;
}

Outcome criterion_window_plan() {
  Check c;
  long long plans = 0;
  for (int k : {1, 4, 6, 9, 12, 16}) {
    for (int s = 1; s <= k; ++s) {
      // k = rows * cols; a single row keeps every k representable.
      const GridConfig cfg{k, 1, s, 0};
      for (int T = 1; T <= 200; ++T) {
        ++plans;
        const std::string tag = "T=" + std::to_string(T) + " k=" + std::to_string(k) + " s=" + std::to_string(s);
        const auto plan = plan_windows(T, cfg);
        const auto brute = oracle::enumerate_windows(T, k, s);
        bool same = plan.size() == brute.size();
        for (std::size_t i = 0; same && i < plan.size(); ++i) {
          same = plan[i].start_frame == brute[i].start && plan[i].frame_indices == brute[i].cells &&
                 plan[i].pad_count == brute[i].pad;
        }
        c.expect(same, tag + ": plan differs from enumerator");

        std::vector<int> hits(T, 0);
        for (const auto& w : plan)
          for (int f : w.frame_indices) ++hits[f];
        c.expect(std::all_of(hits.begin(), hits.end(), [](int h) { return h > 0; }), tag + ": frame uncovered");

        for (std::size_t i = 0; i + 1 < plan.size(); ++i) {
          const bool unclamped = plan[i + 1].start_frame == static_cast<int>(i + 1) * s;
          if (s < k && unclamped) {
            std::vector<int> shared;
            std::set_intersection(plan[i].frame_indices.begin(), plan[i].frame_indices.end(),
                                  plan[i + 1].frame_indices.begin(), plan[i + 1].frame_indices.end(),
                                  std::back_inserter(shared));
            c.expect(static_cast<int>(shared.size()) == k - s, tag + ": overlap is not k - s");
          }
        }
        if (s == k && T % k == 0) {
          c.expect(static_cast<int>(plan.size()) == T / k, tag + ": partition has wrong window count");
          c.expect(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }), tag + ": not a partition");
        }
      }
    }
  }
  if (c.out.pass) c.out.detail = std::to_string(plans) + " plans match the enumerator";
  return c.out;
}

Outcome criterion_metrics() {
  Check c;
  std::mt19937_64 rng(77);
  // Endpoints on a 1/8 lattice so the rasterized reference is exact.
  constexpr double kCell = 0.125;
  std::uniform_int_distribution<int> tick(0, 8 * 40);
  auto random_interval = [&] {
    int a = tick(rng), b = tick(rng);
    if (rng() % 10 == 0) b = a;  // some zero-length intervals
    if (a > b) std::swap(a, b);
    return TemporalInterval{a * kCell, b * kCell, TimeUnit::kSeconds};
  };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    TemporalInterval a = random_interval();
    TemporalInterval b = rng() % 20 == 0 ? a : random_interval();
    const double err = std::fabs(iou(a, b) - oracle::rasterized_iou(a, b, kCell));
    worst = std::max(worst, err);
  }
  c.expect(worst <= kIouTolerance, "iou deviates from rasterization by " + std::to_string(worst));

  // evaluate against a direct count over the same pairs.
  std::vector<GroundingSample> samples;
  PredictionMap preds;
  std::vector<double> brute_iou;
  for (int i = 0; i < 300; ++i) {
    GroundingSample s;
    s.id = "s" + std::to_string(i);
    s.video_id = "v";
    s.gt = random_interval();
    samples.push_back(s);
    if (rng() % 15 == 0) {
      preds[s.id] = std::nullopt;
      brute_iou.push_back(0.0);
    } else if (rng() % 15 == 0) {
      brute_iou.push_back(0.0);  // missing prediction
    } else {
      const TemporalInterval p = random_interval();
      preds[s.id] = p;
      brute_iou.push_back(iou(p, s.gt));
    }
  }
  const std::vector<double> thresholds = {0.1, 0.3, 0.5, 0.7, 0.9};
  const EvalReport report = evaluate(samples, preds, thresholds);
  for (double m : thresholds) {
    std::size_t hits = 0;
    for (double v : brute_iou)
      if (v >= m) ++hits;
    c.expect(report.recall_at.at(m) == static_cast<double>(hits) / brute_iou.size(),
             "R@" + threshold_key(m) + " disagrees with brute-force count");
  }
  c.expect(report.per_sample_iou == brute_iou, "per-sample IoU differs");

  // Worked example.
  const TemporalInterval gt{0, 10, TimeUnit::kSeconds};
  const TemporalInterval worked_preds[] = {
      {0, 10, TimeUnit::kSeconds}, {0, 6, TimeUnit::kSeconds}, {0, 4, TimeUnit::kSeconds}, {20, 30, TimeUnit::kSeconds}};
  std::vector<GroundingSample> ws;
  PredictionMap wp;
  for (int i = 0; i < 4; ++i) {
    ws.push_back({"w" + std::to_string(i), "v", "q", gt, 30});
    wp[ws.back().id] = worked_preds[i];
  }
  const EvalReport w = evaluate(ws, wp);
  c.expect(w.per_sample_iou == std::vector<double>{1.0, 0.6, 0.4, 0.0}, "worked example IoUs");
  c.expect(std::fabs(w.recall_at.at(0.3) - 0.75) <= kIouTolerance, "worked example R@0.3");
  c.expect(std::fabs(w.recall_at.at(0.5) - 0.5) <= kIouTolerance, "worked example R@0.5");
  c.expect(std::fabs(w.recall_at.at(0.7) - 0.25) <= kIouTolerance, "worked example R@0.7");
  c.expect(std::fabs(w.miou - 0.5) <= kIouTolerance, "worked example mIoU");

  if (c.out.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "max |iou - raster| = %.3g (<= %.0e); R@m exact; worked example 0.75/0.5/0.25/0.5",
                  worst, kIouTolerance);
    c.out.detail = buf;
  }
  return c.out;
}

Outcome criterion_end_to_end() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  TempDir dir("t2sgrid_accept");
  CorpusOptions opts;
  opts.videos = 50;
  opts.min_frames = 1;
  opts.max_frames = 60;
  opts.resolution = {32, 24};
  opts.fps = 2.0;
  opts.seed = 6;
  const SyntheticCorpus corpus = write_marker_corpus(dir / "corpus", opts);

  RunConfig run;
  run.frames_root = corpus.frames_root;
  run.dataset = DatasetKind::kCharadesSta;
  run.annotations = corpus.annotations;
  run.out_dir = dir / "out";
  run.backend = BackendKind::kMock;
  EvalReport report;
  // Exercise both overlapping and tiling windows.
  for (const char* spec : {"g43_s12", "g43_s7"}) {
    run.grid_spec = spec;
    run.out_dir = dir / spec;
    try {
      cmd_gridify(run);
      cmd_run(run);
      report = cmd_evaluate(run);
    } catch (const std::exception& e) {
      c.expect(false, std::string(spec) + ": " + e.what());
      break;
    }
    c.expect(report.n == 50, std::string(spec) + ": sample count " + std::to_string(report.n));
    c.expect(report.n_failed_parse == 0, std::string(spec) + ": parse failures");
    c.expect(report.miou == 1.0, std::string(spec) + ": mIoU " + std::to_string(report.miou));
    c.expect(report.recall_at.at(0.7) == 1.0, std::string(spec) + ": R@0.7 below 1");
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < kEndToEndBudgetS, "runtime " + std::to_string(elapsed) + " s over budget");
  if (c.out.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "50 videos, mIoU=1 R@0.7=1 for g43_s12 and g43_s7, %.1f s (< %.0f s)", elapsed,
                  kEndToEndBudgetS);
    c.out.detail = buf;
  }
  return c.out;
}

long long ceil_div(long long a, long long b) { return (a + b - 1) / b; }

Outcome criterion_tokens() {
  Check c;
  std::mt19937_64 rng(144);
  for (int i = 0; i < 200; ++i) {
    const int cols = 1 + static_cast<int>(rng() % 5);
    const int rows = 1 + static_cast<int>(rng() % 5);
    const int k = cols * rows;
    const int s = 1 + static_cast<int>(rng() % k);
    const int cw = 8 + static_cast<int>(rng() % 300);
    const int ch = 8 + static_cast<int>(rng() % 300);
    const int gutter = static_cast<int>(rng() % 4);
    const int T = 1 + static_cast<int>(rng() % 120);
    TokenizerModel model;
    model.merge_px = 14 + static_cast<int>(rng() % 30);
    model.overhead = static_cast<int>(rng() % 5);
    const GridConfig cfg{cols, rows, s, gutter};

    std::vector<GridRecord> records;
    for (const auto& w : plan_windows(T, cfg)) {
      GridRecord r;
      r.video_id = "v";
      r.window_index = w.window_index;
      r.start_frame = w.start_frame;
      r.end_frame = w.end_frame();
      r.end_time_s = w.end_frame();
      r.start_time_s = w.start_frame;
      r.cols = cols;
      r.rows = rows;
      r.cell_w = cw;
      r.cell_h = ch;
      r.gutter_px = gutter;
      r.width = cols * cw + (cols - 1) * gutter;
      r.height = rows * ch + (rows - 1) * gutter;
      records.push_back(r);
    }
    const TokenBudget b = estimate_tokens(std::span<const GridRecord>(records), model, TimeUnit::kFrames);
    const long long per = oracle::tile_count(records[0].width, records[0].height, model.merge_px) + model.overhead;
    c.expect(per == ceil_div(records[0].width, model.merge_px) * ceil_div(records[0].height, model.merge_px) +
                        model.overhead,
             "tile oracle disagrees with ceil division");
    c.expect(b.total_visual_tokens == per * static_cast<long long>(records.size()),
             "geometry " + std::to_string(i) + ": visual tokens " + std::to_string(b.total_visual_tokens) +
                 " vs oracle " + std::to_string(per * static_cast<long long>(records.size())));
  }

  // Overlap versus tiling at T = 144 and a fixed frame size; with and without overhead.
  for (int overhead : {0, 5}) {
    TokenizerModel model;
    model.overhead = overhead;
    TempDir dir("t2sgrid_tokens");
    long long visual[2];
    std::size_t windows[2];
    long long total[2];
    int idx = 0;
    for (const char* spec : {"g43_s7", "g43_s12"}) {
      const GridConfig cfg = parse_grid_config(spec);
      const auto plan = plan_windows(144, cfg);
      std::vector<GridRecord> recs;
      for (const auto& w : plan) {
        GridRecord r;
        r.window_index = w.window_index;
        r.start_frame = w.start_frame;
        r.end_frame = w.end_frame();
        r.cols = cfg.cols;
        r.rows = cfg.rows;
        r.cell_w = 448;
        r.cell_h = 336;
        r.width = 4 * 448;
        r.height = 3 * 336;
        recs.push_back(r);
      }
      const TokenBudget b = estimate_tokens(std::span<const GridRecord>(recs), model, TimeUnit::kFrames);
      visual[idx] = b.total_visual_tokens;
      total[idx] = b.grand_total;
      windows[idx] = plan.size();
      ++idx;
    }
    c.expect(visual[0] * static_cast<long long>(windows[1]) == visual[1] * static_cast<long long>(windows[0]),
             "visual token ratio differs from window-count ratio (o=" + std::to_string(overhead) + ")");
    c.expect(total[0] > total[1], "overlapping windows are not more expensive");
    if (c.out.pass && overhead == 0) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "200 geometries exact; T=144: %zu vs %zu windows, %lld vs %lld visual tokens (s7 > s12)",
                    windows[0], windows[1], visual[0], visual[1]);
      c.out.detail = buf;
    }
  }
  return c.out;
}

Outcome criterion_dataset_roundtrip() {
  Check c;
  std::mt19937_64 rng(8);
  std::vector<GroundingSample> annotations;
  std::map<std::string, Timeline> timelines;
  for (int i = 0; i < 200; ++i) {
    const std::string vid = "vid" + std::to_string(i % 37);
    if (!timelines.count(vid)) {
      Timeline tl;
      tl.video_id = vid;
      const int T = 1 + static_cast<int>(rng() % 300);
      const double fps = std::uniform_real_distribution<double>(0.25, 5.0)(rng);
      tl.sample_fps = fps;
      for (int f = 0; f < T; ++f) tl.times.push_back(f / fps);
      timelines[vid] = tl;
    }
    const Timeline& tl = timelines[vid];
    const double span = tl.times.back() + 1.0;
    std::uniform_real_distribution<double> at(-0.5, span + 0.5);  // includes out-of-range times
    double a = at(rng), b = at(rng);
    if (a > b) std::swap(a, b);
    GroundingSample s;
    s.video_id = vid;
    s.id = vid + "#" + std::to_string(i);
    s.query = "query " + std::to_string(i);
    s.gt = {a, b, TimeUnit::kSeconds};
    s.duration = span;
    annotations.push_back(s);
  }
  const int saved = static_cast<int>(log::level());
  log::set_level(log::Level::kOff);
  const auto records = emit_instruction_dataset(annotations, timelines, parse_grid_config("g43_s12"), "grids");
  log::set_level(static_cast<log::Level>(saved));
  c.expect(records.size() == annotations.size(), "record count");
  for (const auto& r : records) {
    const auto parsed = try_parse_grounding_answer(r.answer);
    if (!parsed) {
      c.expect(false, "unparseable answer: " + r.answer);
      continue;
    }
    c.expect(parsed->unit == TimeUnit::kFrames && parsed->start == r.gt_start_frame && parsed->end == r.gt_end_frame,
             "answer '" + r.answer + "' does not match gt_interval_frames");
  }
  if (c.out.pass) c.out.detail = "200 answers re-parse to gt_interval_frames";
  return c.out;
}

// Optional live smoke run; only when an endpoint and data are configured.
Outcome live_smoke(bool* ran) {
  *ran = false;
  const char* endpoint = std::getenv("T2SGRID_LIVE_ENDPOINT");
  const char* ann = std::getenv("T2SGRID_LIVE_ANNOTATIONS");
  const char* frames = std::getenv("T2SGRID_LIVE_FRAMES");
  const char* model = std::getenv("T2SGRID_LIVE_MODEL");
  if (!endpoint || !ann || !frames) return {};
  *ran = true;
  Check c;
  TempDir dir("t2sgrid_live");
  // Keep only the first 5 annotation lines.
  {
    std::ifstream in(ann);
    std::ofstream out(dir / "ann.txt");
    std::string line;
    for (int n = 0; n < 5 && std::getline(in, line);) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      out << line << '\n';
      ++n;
    }
  }
  RunConfig run;
  run.dataset = DatasetKind::kCharadesSta;
  run.annotations = dir / "ann.txt";
  run.frames_root = frames;
  run.out_dir = dir / "out";
  run.sample_count = 24;
  run.backend = BackendKind::kHttp;
  run.backend_config.endpoint_url = endpoint;
  if (model) run.backend_config.model_name = model;
  run.failure_budget = 5;
  try {
    cmd_run(run);
    std::size_t parsed = 0;
    for (const auto& p : read_predictions(run.predictions_path()))
      if (p.raw) ++parsed;
    c.expect(parsed >= 3, std::to_string(parsed) + " parseable replies (< 3)");
    if (c.out.pass) c.out.detail = std::to_string(parsed) + "/5 parseable replies";
  } catch (const std::exception& e) {
    c.expect(false, e.what());
  }
  return c.out;
}

}  // namespace

int main() {
  log::set_level(log::Level::kWarn);
  struct Entry {
    int number;
    const char* name;
    std::function<Outcome()> fn;
    Outcome result;
  };
  std::vector<Entry> entries = {
      {2, "gridification round trip", criterion_roundtrip, {}},
      {3, "patch index algebra", criterion_index_algebra, {}},
      {4, "window plan properties", criterion_window_plan, {}},
      {5, "metric oracle", criterion_metrics, {}},
      {6, "end-to-end losslessness", criterion_end_to_end, {}},
      {7, "token accounting", criterion_tokens, {}},
      {8, "dataset answer round trip", criterion_dataset_roundtrip, {}},
  };
  bool all = true;
  for (auto& e : entries) {
    try {
      e.result = e.fn();
    } catch (const std::exception& ex) {
      e.result = {false, std::string("exception: ") + ex.what()};
    }
    all = all && e.result.pass;
  }

  // Criterion 1 stands on the property suite above plus the optional live run.
  bool live_ran = false;
  const Outcome live = live_smoke(&live_ran);
  const bool c1 = all && live.pass;
  std::string d1 = all ? "substitute property suite (criteria 2-8) passes" : "substitute property suite has failures";
  d1 += live_ran ? "; live smoke: " + live.detail : "; live smoke SKIPPED (set T2SGRID_LIVE_ENDPOINT, "
                                                    "T2SGRID_LIVE_ANNOTATIONS, T2SGRID_LIVE_FRAMES)";
  std::printf("[%s] criterion 1: accuracy substitute: %s\n", c1 ? "PASS" : "FAIL", d1.c_str());
  for (const auto& e : entries) {
    std::printf("[%s] criterion %d: %s: %s\n", e.result.pass ? "PASS" : "FAIL", e.number, e.name,
                e.result.detail.c_str());
  }
  return c1 ? 0 : 1;
}
