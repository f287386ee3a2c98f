// Acceptance checks. Each criterion prints exactly one line:
//
//   PASS <id> <title>: <details>
//   FAIL <id> <title>: <details>
//
// Exit status is 0 on PASS, 1 on FAIL and 77 on a FAIL caused by the
// environment (dataset not obtainable, CPU budget of this machine).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lrnet/app/checkpoint.hpp"
#include "lrnet/app/commands.hpp"
#include "lrnet/app/train.hpp"
#include "lrnet/core/error.hpp"
#include "lrnet/data/dataset.hpp"
#include "lrnet/model/lrnet.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace lrnet;
using lrnet::testing::gradcheck;
using lrnet::testing::gradcheck_params;
using lrnet::testing::random_tensor;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kEnvFail = 77;

struct Outcome {
  int code = kPass;
  std::string details;
};

struct Context {
  std::string lrnet;  // CLI binary
  fs::path work;
  std::string cache;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int run(const std::string& cmd) {
  std::cout.flush();
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

constexpr double kFdEps = 1e-4;
constexpr double kFdTolerance = 1e-4;
constexpr std::size_t kFdSeeds = 20;
constexpr double kFdBudgetSeconds = 120;

using Leaves = std::vector<Node64>;

Outcome gradients(const Context&) {
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  std::size_t checked = 0;
  auto note = [&](const std::string& op, const testing::GradCheckResult& r) {
    worst[op] = std::max(worst[op], r.max_rel_error);
    checked += r.checked;
  };

  for (std::uint64_t seed = 0; seed < kFdSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    auto dim = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    auto rt = [&](Shape s, double lo = -1, double hi = 1) { return random_tensor<double>(std::move(s), rng(), lo, hi); };

    const std::size_t n = dim(1, 3), h = dim(3, 6), w = dim(3, 6), c = dim(1, 3), o = dim(1, 3);
    const Tensor64 mask2d = rt({n, c * 4});

    note("add/mul/scale/sum", gradcheck({rt({n, c * 4}), rt({n, c * 4})}, [&](Graph<double>&, const Leaves& l) {
           return ag::sum(ag::scale(ag::mul(ag::add(l[0], l[1]), l[1]), 0.7));
         }, kFdEps));
    note("relu", gradcheck({rt({n, c * 4})}, [&](Graph<double>& g, const Leaves& l) {
           return ag::sum(ag::mul(ag::relu(l[0]), g.input(mask2d)));
         }, kFdEps));
    note("sigmoid", gradcheck({rt({n, c * 4}, -4, 4)}, [&](Graph<double>& g, const Leaves& l) {
           return ag::sum(ag::mul(ag::sigmoid(l[0]), g.input(mask2d)));
         }, kFdEps));
    note("softmax", gradcheck({rt({n, c * 4}, -3, 3)}, [&](Graph<double>& g, const Leaves& l) {
           return ag::sum(ag::mul(ag::softmax(l[0]), g.input(mask2d)));
         }, kFdEps));

    const Tensor64 dense_mask = rt({n, o});
    note("flatten/matmul/bias_add",
         gradcheck({rt({n, h, w, c}), rt({h * w * c, o}), rt({o})}, [&](Graph<double>& g, const Leaves& l) {
           auto y = ag::bias_add(ag::matmul(ag::flatten(l[0]), l[1]), l[2]);
           return ag::sum(ag::mul(y, g.input(dense_mask)));
         }, kFdEps));

    for (std::size_t k : {1, 3, 5, 7}) {
      const std::size_t hk = std::max(h, k), wk = std::max(w, k);
      const Tensor64 conv_mask = rt({n, hk, wk, o});
      note("conv2d k=" + std::to_string(k),
           gradcheck({rt({n, hk, wk, c}), rt({k, k, c, o}), rt({o})}, [&](Graph<double>& g, const Leaves& l) {
             return ag::sum(ag::mul(ag::conv2d(l[0], l[1], l[2]), g.input(conv_mask)));
           }, kFdEps));
    }

    const Tensor64 pool_mask = rt({n, (h - 2) / 2 + 1, (w - 2) / 2 + 1, c});
    note("maxpool2d", gradcheck({rt({n, h, w, c})}, [&](Graph<double>& g, const Leaves& l) {
           return ag::sum(ag::mul(ag::maxpool2d(l[0]), g.input(pool_mask)));
         }, kFdEps));

    const std::size_t c2 = dim(1, 3), c3 = dim(1, 3);
    const Tensor64 cat_mask = rt({n, h, w, c + c2 + c3});
    note("concat", gradcheck({rt({n, h, w, c}), rt({n, h, w, c2}), rt({n, h, w, c3})},
                             [&](Graph<double>& g, const Leaves& l) {
                               auto y = ag::concat(std::vector<Node64>{l[0], l[1], l[2]});
                               return ag::sum(ag::mul(y, g.input(cat_mask)));
                             }, kFdEps));

    const Tensor64 res_mask = rt({n, h, w, o});
    note("residual_add", gradcheck({rt({n, h, w, o}), rt({n, h, w, c}), rt({1, 1, c, o}), rt({o})},
                                   [&](Graph<double>& g, const Leaves& l) {
                                     auto y = nn::residual_add<double>(l[0], l[1], nn::Projection<double>{l[2], l[3]});
                                     return ag::sum(ag::mul(y, g.input(res_mask)));
                                   }, kFdEps));

    std::vector<std::int32_t> labels(n);
    for (auto& y : labels) y = static_cast<std::int32_t>(dim(0, 9));
    note("softmax_cross_entropy", gradcheck({rt({n, 10}, -3, 3)}, [&](Graph<double>&, const Leaves& l) {
           return ag::softmax_cross_entropy(l[0], labels);
         }, kFdEps));
    note("sigmoid_bce", gradcheck({rt({n, 10}, -3, 3)}, [&](Graph<double>&, const Leaves& l) {
           return ag::sigmoid_bce(l[0], labels);
         }, kFdEps));

    // One composed multi-kernel block, every parameter coordinate.
    std::vector<Parameter<double>> params;
    const std::size_t cin = dim(1, 3);
    model::MKBlock<double> block("blk", cin, model::BlockSpec{3, 2, 1, 4}, params, rng);
    for (auto& p : params) {
      if (p.value.rank() == 1) p.value = rt(p.value.shape(), -0.1, 0.1);
    }
    const std::size_t bh = dim(7, 9), bw = dim(7, 9);
    const Tensor64 x = rt({1, bh, bw, cin});
    const Tensor64 bmask = rt({1, (bh - 2) / 2 + 1, (bw - 2) / 2 + 1, 4});
    note("mk_block", gradcheck_params(params, [&](Graph<double>& g, std::vector<Parameter<double>>& ps) {
           return ag::sum(ag::mul(block.forward(g.input(x), ps), g.input(bmask)));
         }, 0, kFdEps));
  }

  const double seconds = since(t0);
  Outcome out;
  std::string bad;
  double max_err = 0;
  for (const auto& [op, e] : worst) {
    max_err = std::max(max_err, e);
    if (!(e < kFdTolerance)) bad += " " + op + "=" + fmt("%.3g", e);
  }
  if (!bad.empty()) out.code = kFail;
  if (seconds >= kFdBudgetSeconds) out.code = kFail;
  out.details = std::to_string(worst.size()) + " ops x " + std::to_string(kFdSeeds) + " seeds, " +
                std::to_string(checked) + " coordinates, max rel error " + fmt("%.3g", max_err) + " (< 1e-4), " +
                fmt("%.1f", seconds) + "s (< 120s)" + (bad.empty() ? "" : "; over tolerance:" + bad);
  return out;
}

// ---------------------------------------------------------------------------
// 2. Shape and topology

std::size_t producing_kernel(const Graph<float>& g, std::size_t id) {
  const auto* r = &g.record_at(id);
  if (r->op == Op::relu) r = &g.record_at(r->inputs[0]);
  if (r->op != Op::conv2d) return 0;
  return g.record_at(r->inputs[1]).value.dim(0);
}

Outcome topology(const Context&) {
  const auto t0 = Clock::now();
  std::vector<std::string> problems;
  model::ModelSpec spec;
  const auto trace = spec.spatial_trace();
  if (trace != std::vector<std::size_t>{35, 17, 8, 4}) problems.push_back("spatial trace differs");

  model::Model<float> m(spec, 0);
  Graph<float> g;
  m.forward(g.input(Tensor(Shape{1, 35, 35, 1})));

  std::size_t pools = 0, concats = 0, flatten_width = 0;
  std::vector<std::size_t> pool_extents;
  for (std::size_t id = 0; id < g.size(); ++id) {
    const auto& r = g.record_at(id);
    if (r.op == Op::maxpool2d) {
      ++pools;
      pool_extents.push_back(r.value.dim(1));
    } else if (r.op == Op::flatten) {
      flatten_width = r.value.dim(1);
    } else if (r.op == Op::concat) {
      ++concats;
      std::multiset<std::size_t> kernels;
      for (auto in : r.inputs) {
        if (const std::size_t k = producing_kernel(g, in)) kernels.insert(k);
      }
      if (kernels == std::multiset<std::size_t>{3, 7}) problems.push_back("concat of 3x3 and 7x7 only at node " + std::to_string(id));
    }
  }
  if (pool_extents != std::vector<std::size_t>{17, 8, 4}) problems.push_back("pooled extents differ from 17,8,4");
  if (pools != 3 || m.blocks().size() != 3) problems.push_back("expected exactly 3 MK-blocks");
  if (model::describe(m).blocks != 3) problems.push_back("describe does not report 3 blocks");
  const std::size_t f_out = spec.blocks.back().f_out;
  if (flatten_width != 4 * 4 * f_out || spec.flatten_width() != 4 * 4 * f_out) problems.push_back("flatten width is not 4*4*f_out");

  Outcome out;
  out.code = problems.empty() ? kPass : kFail;
  out.details = "trace 35->17->8->4, " + std::to_string(pools) + " blocks, " + std::to_string(concats) +
                " concats without a 3x3+7x7-only pair, flatten width " + std::to_string(flatten_width) + ", " +
                fmt("%.2f", since(t0)) + "s";
  for (const auto& p : problems) out.details += "; " + p;
  return out;
}

// ---------------------------------------------------------------------------
// 3. Data fidelity

struct ExpectedSizes {
  std::size_t train, test;
};

const std::map<std::string, ExpectedSizes> kSetSizes = {
    {"mnist", {60000, 10000}}, {"fashion", {60000, 10000}}, {"oracle", {27222, 3000}}};

constexpr std::size_t kResizeSamples = 200;
constexpr double kResizeTolerance = 1e-6;

Outcome data_fidelity(const Context& ctx, const std::string& dataset) {
  Outcome out;
  const auto manifest = data::load_manifest(data::default_manifest_path());
  std::map<std::string, data::Bytes> raw;
  try {
    for (const auto& f : manifest.files(dataset)) raw[f.role] = data::read_verified(ctx.cache, dataset, f);
  } catch (const Error& e) {
    data::FetchOptions opt{ctx.cache, "", {}};
    data::CurlTransport curl;
    try {
      data::fetch(dataset, manifest, opt, curl);
      for (const auto& f : manifest.files(dataset)) raw[f.role] = data::read_verified(ctx.cache, dataset, f);
    } catch (const Error& fe) {
      out.code = kEnvFail;
      out.details = "dataset not obtainable: " + std::string(fe.kind()) + ": " + fe.what();
      return out;
    }
  }

  std::vector<std::string> problems;
  for (const auto& [role, bytes] : raw) {
    if (data::encode_idx(data::parse_idx(bytes)) != bytes) problems.push_back(role + " IDX round trip differs");
  }

  const auto exp = kSetSizes.at(dataset);
  const auto train = data::from_idx(dataset, data::Split::train, data::parse_idx(raw.at("train_images")),
                                    data::parse_idx(raw.at("train_labels")));
  const auto test = data::from_idx(dataset, data::Split::test, data::parse_idx(raw.at("test_images")),
                                   data::parse_idx(raw.at("test_labels")));
  if (train.size() != exp.train) problems.push_back("train size " + std::to_string(train.size()));
  if (test.size() != exp.test) problems.push_back("test size " + std::to_string(test.size()));

  double resize_err = 0;
  const std::size_t px = data::kSourceExtent * data::kSourceExtent;
  for (std::size_t i = 0; i < std::min(kResizeSamples, train.size()); ++i) {
    const float* src = train.images.data().data() + i * px;
    std::vector<double> ref_in(src, src + px);
    const auto ref = testing::bilinear_reference(ref_in, 28, 28, 35, 35);
    Tensor img(Shape{28, 28});
    std::copy(src, src + px, img.data().begin());
    const Tensor got = data::resize_bilinear_28_to_35(img);
    for (std::size_t j = 0; j < ref.size(); ++j) resize_err = std::max(resize_err, std::abs(got[j] - ref[j]));
  }
  if (!(resize_err < kResizeTolerance)) problems.push_back("resize error " + fmt("%.3g", resize_err));

  out.code = problems.empty() ? kPass : kFail;
  out.details = dataset + ": IDX round trip byte-equal for " + std::to_string(raw.size()) + " files, sizes " +
                std::to_string(train.size()) + "/" + std::to_string(test.size()) + " (expected " +
                std::to_string(exp.train) + "/" + std::to_string(exp.test) + "), resize max error " +
                fmt("%.3g", resize_err) + " over " + std::to_string(std::min(kResizeSamples, train.size())) + " images";
  for (const auto& p : problems) out.details += "; " + p;
  return out;
}

// ---------------------------------------------------------------------------
// 4. Determinism

constexpr std::size_t kDeterminismSubset = 5000;
constexpr std::size_t kDeterminismEpochs = 1;
constexpr double kDeterminismBudgetSeconds = 600;

Outcome determinism(const Context& ctx) {
  const auto t0 = Clock::now();
  Outcome out;
  const fs::path dir = ctx.work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  // Same relative output paths, so both runs embed the same config.
  std::vector<std::string> names{"run1", "run2"};
  for (const auto& name : names) {
    const fs::path d = dir / name;
    fs::create_directories(d);
    const std::string cmd = "cd '" + d.string() + "' && " + ctx.lrnet + " train --seed 7 --train-limit " +
                            std::to_string(kDeterminismSubset) + " --max-epochs " +
                            std::to_string(kDeterminismEpochs) + " --no-record-time --cache '" + ctx.cache +
                            "' --metrics metrics.csv --checkpoint model.ckpt > train.log 2>&1";
    if (const int rc = run(cmd); rc != 0) {
      out.code = kFail;
      out.details = name + " exited with " + std::to_string(rc) + ", see " + (d / "train.log").string();
      return out;
    }
  }
  std::vector<std::string> diffs;
  for (const std::string file : {"metrics.csv", "model.ckpt", "model.ckpt.best"}) {
    const std::string a = slurp(dir / "run1" / file), b = slurp(dir / "run2" / file);
    if (a.empty() || a != b) diffs.push_back(file);
  }
  const double seconds = since(t0);
  out.code = diffs.empty() && seconds < kDeterminismBudgetSeconds ? kPass : kFail;
  out.details = "two seed-7 runs, " + std::to_string(kDeterminismEpochs) + " epoch on the first " +
                std::to_string(kDeterminismSubset) + " samples: metrics CSV, final and best checkpoints " +
                (diffs.empty() ? "byte-identical" : "differ") + ", " + fmt("%.0f", seconds) + "s (< 600s)";
  for (const auto& d : diffs) out.details += "; " + d + " differs";
  return out;
}

// ---------------------------------------------------------------------------
// 5. Scaled training accuracy

struct AccuracyTarget {
  std::size_t epochs;
  double min_accuracy;           // percent
  double budget_seconds;         // 0: none
};

const std::map<std::string, AccuracyTarget> kAccuracyTargets = {
    {"mnist", {5, 98.0, 3600}}, {"fashion", {5, 88.0, 0}}, {"oracle", {10, 85.0, 0}}};

// Reuses a completed run in the work directory when its embedded config
// matches; training is deterministic, so the artifacts are the same.
Outcome accuracy(const Context& ctx, const std::string& dataset) {
  Outcome out;
  const auto target = kAccuracyTargets.at(dataset);
  const auto manifest = data::load_manifest(data::default_manifest_path());

  try {
    data::FetchOptions opt{ctx.cache, "", {}};
    data::CurlTransport curl;
    data::fetch(dataset, manifest, opt, curl);
  } catch (const Error& e) {
    out.code = kEnvFail;
    out.details = dataset + ": dataset not obtainable: " + std::string(e.kind()) + ": " + e.what();
    return out;
  }

  const fs::path dir = ctx.work / ("accuracy-" + dataset);
  fs::create_directories(dir);
  app::RunConfig config;
  config.dataset = dataset;
  config.max_epochs = target.epochs;
  config.cache_dir = ctx.cache;
  config.metrics = (dir / "metrics.csv").string();
  config.checkpoint = (dir / "final.ckpt").string();
  const fs::path config_path = dir / "config.json";

  bool reused = false;
  if (fs::exists(config.checkpoint)) {
    try {
      const auto ckpt = app::load_checkpoint(config.checkpoint);
      reused = ckpt.config_json == config.to_json() && ckpt.epochs_completed == target.epochs;
    } catch (const Error&) {
    }
  }
  if (!reused) {
    spit(config_path, config.to_json());
    const std::string cmd =
        ctx.lrnet + " train --config '" + config_path.string() + "' > '" + (dir / "train.log").string() + "' 2>&1";
    if (const int rc = run(cmd); rc != 0) {
      out.code = kFail;
      out.details = dataset + ": train exited with " + std::to_string(rc) + ", see " + (dir / "train.log").string();
      return out;
    }
  }

  const auto rows = app::parse_metrics(slurp(config.metrics));
  double train_seconds = 0;
  for (const auto& r : rows) train_seconds += r.seconds;

  const auto ckpt = app::load_checkpoint(config.checkpoint);
  model::Model<float> m(config.model, config.seed);
  app::restore_parameters(m, ckpt.parameters);
  const auto test = data::load_dataset(dataset, data::Split::test, ctx.cache, manifest);
  const auto r = app::evaluate(m, test, config.model.output_activation, config.micro_batch);
  const double acc = 100.0 * r.accuracy;

  const bool acc_ok = acc >= target.min_accuracy;
  const bool budget_ok = target.budget_seconds == 0 || train_seconds <= target.budget_seconds;
  out.code = !acc_ok ? kFail : (budget_ok ? kPass : kEnvFail);
  out.details = dataset + ": " + std::to_string(rows.size()) + " epochs, test accuracy " + fmt("%.2f", acc) +
                "% (>= " + fmt("%.1f", target.min_accuracy) + "%), training time " + fmt("%.0f", train_seconds) + "s";
  if (target.budget_seconds > 0) {
    out.details += " (budget " + fmt("%.0f", target.budget_seconds) + "s" + (budget_ok ? ")" : ", exceeded)");
  }
  if (reused) out.details += ", reused run in " + dir.string();
  return out;
}

// ---------------------------------------------------------------------------
// 6. Early stopping

// Independent statement of the rule: stop at the first epoch where the
// number of epochs since the last strict improvement reaches patience.
std::size_t expected_stop(const std::vector<double>& losses, std::size_t patience) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_at = 0;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    if (losses[e] < best) {
      best = losses[e];
      best_at = e;
    }
    if (e - best_at >= patience) return e + 1;
  }
  return 0;
}

std::size_t simulated_stop(const std::vector<double>& losses, std::size_t patience) {
  nn::EarlyStopState s;
  s.patience = patience;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    if (nn::early_stop_update(s, losses[e]) == nn::EarlyStopDecision::stop) return e + 1;
  }
  return 0;
}

Outcome early_stopping(const Context&) {
  const auto t0 = Clock::now();
  std::size_t cases = 0;
  std::vector<std::string> problems;
  auto check = [&](const std::string& name, const std::vector<double>& losses, std::size_t patience,
                   std::size_t want) {
    ++cases;
    const std::size_t got = simulated_stop(losses, patience);
    if (got != want) problems.push_back(name + ": stopped at " + std::to_string(got) + ", want " + std::to_string(want));
  };

  const std::size_t p = nn::EarlyStopState{}.patience;
  if (p != 30) problems.push_back("default patience is " + std::to_string(p));

  std::vector<double> flat(200, 1.0);
  check("constant", flat, p, 31);
  std::vector<double> down(200);
  for (std::size_t i = 0; i < down.size(); ++i) down[i] = 1.0 / static_cast<double>(i + 1);
  check("strictly decreasing", down, p, 0);
  std::vector<double> plateau = down;
  for (std::size_t i = 10; i < plateau.size(); ++i) plateau[i] = plateau[9];
  check("plateau after 10", plateau, p, 40);
  std::vector<double> late = plateau;
  late[38] = 0.01;
  check("improvement at 39", late, p, 69);

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    const std::size_t patience = 1 + rng() % 40;
    std::vector<double> losses(1 + rng() % 250);
    double level = 1.0;
    for (auto& l : losses) {
      if (u(rng) < 0.1) level *= 0.9;
      l = level + (u(rng) < 0.2 ? u(rng) * 0.01 : 0.0);
    }
    check("random#" + std::to_string(t), losses, patience, expected_stop(losses, patience));
  }

  Outcome out;
  out.code = problems.empty() ? kPass : kFail;
  out.details = std::to_string(cases) + " validation-loss sequences stop where the patience rule says (patience " +
                std::to_string(p) + " default), " + fmt("%.2f", since(t0)) + "s";
  for (std::size_t i = 0; i < std::min<std::size_t>(problems.size(), 3); ++i) out.details += "; " + problems[i];
  return out;
}

// ---------------------------------------------------------------------------
// 7. Parameter accounting

std::size_t conv_count(std::size_t k, std::size_t cin, std::size_t cout) { return k * k * cin * cout + cout; }

std::size_t closed_form_total(const model::ModelSpec& s) {
  std::size_t total = 0, cin = s.input_channels, extent = s.input_size;
  for (const auto& b : s.blocks) {
    total += conv_count(3, cin, b.f3) + conv_count(5, cin, b.f5) + conv_count(7, cin, b.f7);
    total += conv_count(5, b.f5 + b.f7, b.f5) + conv_count(3, b.f3 + b.f5, b.f3) + conv_count(3, b.f3, b.f3);
    total += conv_count(1, 2 * b.f3 + 2 * b.f5 + b.f7, b.f_out);
    if (cin != b.f_out) total += conv_count(1, cin, b.f_out);
    cin = b.f_out;
    extent = (extent - 2) / 2 + 1;
  }
  std::size_t width = extent * extent * cin;
  for (std::size_t w : s.dense_widths) {
    total += width * w + w;
    width = w;
  }
  return total + width * s.num_classes + s.num_classes;
}

constexpr std::size_t kParameterCeiling = 2000000;

Outcome parameters(const Context& ctx) {
  const auto t0 = Clock::now();
  const std::size_t expected = closed_form_total(model::ModelSpec{});
  std::set<std::size_t> totals;
  for (std::uint64_t seed : {0, 1, 7, 12345}) {
    app::RunConfig c;
    c.seed = seed;
    const fs::path cfg = ctx.work / ("inspect-seed" + std::to_string(seed) + ".json");
    spit(cfg, c.to_json());
    std::ostringstream os, es;
    app::InspectArgs args;
    args.config = cfg.string();
    args.json = true;
    if (app::cmd_inspect(args, os, es) != app::kExitOk) return {kFail, "inspect failed: " + es.str()};
    totals.insert(nlohmann::json::parse(os.str())["total_parameters"].get<std::size_t>());
  }
  Outcome out;
  const std::size_t total = *totals.begin();
  out.code = totals.size() == 1 && total == expected && total < kParameterCeiling ? kPass : kFail;
  out.details = "inspect total " + std::to_string(total) + " across 4 seeds" +
                (totals.size() == 1 ? "" : " (varies)") + ", closed form " + std::to_string(expected) +
                ", ceiling " + std::to_string(kParameterCeiling) + ", reference delta " +
                std::to_string(static_cast<long long>(total) - static_cast<long long>(app::kReferenceParameterTotal)) +
                ", " + fmt("%.2f", since(t0)) + "s";
  return out;
}

struct Criterion {
  std::string id;
  std::string title;
  std::function<Outcome(const Context&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"c1", "gradient correctness", gradients},
      {"c2", "shape and topology", topology},
      {"c3-mnist", "data fidelity", [](const Context& c) { return data_fidelity(c, "mnist"); }},
      {"c3-fashion", "data fidelity", [](const Context& c) { return data_fidelity(c, "fashion"); }},
      {"c3-oracle", "data fidelity", [](const Context& c) { return data_fidelity(c, "oracle"); }},
      {"c4", "determinism", determinism},
      {"c5-mnist", "scaled training accuracy", [](const Context& c) { return accuracy(c, "mnist"); }},
      {"c5-fashion", "scaled training accuracy", [](const Context& c) { return accuracy(c, "fashion"); }},
      {"c5-oracle", "scaled training accuracy", [](const Context& c) { return accuracy(c, "oracle"); }},
      {"c6", "early stopping", early_stopping},
      {"c7", "parameter accounting", parameters},
  };

  CLI::App app{"acceptance checks"};
  std::vector<std::string> ids;
  Context ctx;
  std::string work = "acceptance-work";
  app.add_option("criteria", ids, "criterion ids, or 'all'")->required();
  app.add_option("--lrnet", ctx.lrnet, "path to the lrnet executable")->required();
  app.add_option("--work", work, "scratch directory for training runs");
  app.add_option("--cache", ctx.cache, "dataset cache (default $LRNET_CACHE or ~/.cache/lrnet)");
  CLI11_PARSE(app, argc, argv);
  ctx.work = fs::absolute(work);
  ctx.lrnet = fs::absolute(ctx.lrnet).string();
  fs::create_directories(ctx.work);
  if (ctx.cache.empty()) ctx.cache = data::default_cache_dir();

  if (ids.size() == 1 && ids[0] == "all") {
    ids.clear();
    for (const auto& c : criteria) ids.push_back(c.id);
  }

  int worst = kPass;
  for (const auto& id : ids) {
    auto it = std::find_if(criteria.begin(), criteria.end(), [&](const Criterion& c) { return c.id == id; });
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = it->fn(ctx);
    } catch (const std::exception& e) {
      o = {kFail, std::string("exception: ") + e.what()};
    }
    std::cout << (o.code == kPass ? "PASS " : "FAIL ") << it->id << " " << it->title << ": " << o.details
              << std::endl;
    if (o.code == kFail || (o.code == kEnvFail && worst == kPass)) worst = o.code;
  }
  return worst;
}
