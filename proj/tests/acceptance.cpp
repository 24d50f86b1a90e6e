// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include "cala/checkpoint.hpp"
#include "cala/commands.hpp"
#include "cala/hca.hpp"
#include "cala/tac.hpp"
#include "support/cases.hpp"
#include "support/reference.hpp"

using namespace cala;
namespace fs = std::filesystem;
using testing_support::LossCase;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failing check of a criterion.
struct Checks {
  bool ok = true;
  std::string first_failure;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) first_failure = what;
    ok = ok && cond;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / fmt::format("cala_acceptance_{}_{}", ::getpid(), name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig in_dir(const fs::path& dir) {
  RunConfig cfg;
  cfg.data_dir = (dir / "data").string();
  cfg.checkpoint = (dir / "checkpoint.json").string();
  cfg.train_log = (dir / "train_log.jsonl").string();
  cfg.report = (dir / "report").string();
  return cfg;
}

std::vector<TbiaInputs> tbia_inputs(const LossCase& c) {
  std::vector<TbiaInputs> in;
  for (std::size_t i = 0; i < c.f_c.size(); ++i) {
    in.push_back({ref::to_tensor(c.f_r_bar[i]), ref::to_tensor(c.f_c[i]), ref::to_tensor(c.f_t[i])});
  }
  return in;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// ---------------------------------------------------------------------------

Outcome gradients() {
  const RunConfig small = gradcheck_config(RunConfig{});
  const GradcheckReport r = cmd_gradcheck(RunConfig{});
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& g : r.groups) {
    if (g.frozen) continue;
    worst = std::max(worst, g.max_rel_error);
    ++checked;
  }
  const bool shape = small.dim == 8 && small.batch_size == 3 && small.tac_layers == 2;
  return {r.passed && shape && worst < 1e-4 && r.seconds < 60.0 && checked > 0,
          fmt::format("{} trainable groups, max rel err {:.2e}, {:.1f}s (d={}, B={}, M={})", checked, worst,
                      r.seconds, small.dim, small.batch_size, small.tac_layers)};
}

Outcome loss_oracles() {
  std::mt19937_64 rng(20240611);
  double worst[3] = {0.0, 0.0, 0.0};
  for (int i = 0; i < 20; ++i) {
    const std::size_t batch = 1 + rng() % 4, dim = 2 + rng() % 7, layers = 1 + rng() % 3;
    const LossCase c = testing_support::random_loss_case(rng(), batch, dim, layers, rng() % 2 == 0);
    worst[0] = std::max(worst[0], std::abs(testing_support::engine_tbia(c) - testing_support::oracle_tbia(c)));
    worst[1] = std::max(worst[1], std::abs(testing_support::engine_ctr(c) - testing_support::oracle_ctr(c)));
    worst[2] = std::max(worst[2], std::abs(testing_support::engine_qtm(c) - testing_support::oracle_qtm(c)));
  }
  return {std::max({worst[0], worst[1], worst[2]}) < 1e-9,
          fmt::format("20 batches, max |diff| tbia {:.1e} ctr {:.1e} qtm {:.1e}", worst[0], worst[1], worst[2])};
}

Outcome invariants() {
  Checks c;
  std::mt19937_64 rng(77);

  // Softmax rows, cosine bounds, permutation and temperature checks on random batches.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LossCase lc = testing_support::random_loss_case(seed, 4, 6, 2, seed % 2 == 0);
    for (std::size_t i = 0; i < 4; ++i) {
      const Tensor a_r2c = attend_ref_to_text(ref::to_tensor(lc.f_r_bar[i]), ref::to_tensor(lc.f_c[i]), lc.hca);
      const Tensor a_c2t = attend_text_to_target(ref::to_tensor(lc.f_c[i]), ref::to_tensor(lc.f_t[i]), lc.hca);
      for (const Tensor* a : {&a_r2c, &a_c2t})
        for (double v : a->data()) c.expect(v >= -1.0 - 1e-12 && v <= 1.0 + 1e-12, "cosine bound");
      const Tensor a_r2t = hinge_attention(a_r2c, a_c2t, 6);
      for (std::size_t r = 0; r < a_r2t.rows(); ++r) {
        double sum = 0.0;
        for (std::size_t k = 0; k < a_r2t.cols(); ++k) sum += a_r2t.at(r, k);
        c.expect(std::abs(sum - 1.0) < 1e-12, "hinge attention row sum");
      }
    }
    const Tensor x = ref::to_tensor(ref::random(rng, 5, 7, 3.0));
    const Tensor sm = softmax_rows(x);
    for (std::size_t r = 0; r < 5; ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k < 7; ++k) sum += sm.at(r, k);
      c.expect(std::abs(sum - 1.0) < 1e-12, "softmax row sum");
    }

    std::vector<std::size_t> order(4);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const LossCase p = testing_support::permuted(lc, order);
    c.expect(std::abs(testing_support::engine_tbia(lc) - testing_support::engine_tbia(p)) < 1e-9, "tbia permutation");
    c.expect(std::abs(testing_support::engine_ctr(lc) - testing_support::engine_ctr(p)) < 1e-9, "ctr permutation");
    c.expect(std::abs(testing_support::engine_qtm(lc) - testing_support::engine_qtm(p)) < 1e-9, "qtm permutation");

    const Tensor s = tbia_similarities(tbia_inputs(lc), lc.hca);
    for (double tau : {0.01, 0.1, 1.0, 10.0}) {
      const Tensor prob = softmax_rows(scale(s, 1.0 / tau));
      for (std::size_t r = 0; r < 4; ++r) {
        std::size_t best_s = 0, best_p = 0;
        for (std::size_t k = 1; k < 4; ++k) {
          if (s.at(r, k) > s.at(r, best_s)) best_s = k;
          if (prob.at(r, k) > prob.at(r, best_p)) best_p = k;
        }
        c.expect(best_s == best_p, "temperature argmax");
      }
    }

    const LossCase one = testing_support::random_loss_case(seed + 100, 1, 5);
    c.expect(testing_support::engine_tbia(one) == 0.0, "tbia B=1");
    c.expect(testing_support::engine_ctr(one) == 0.0, "ctr B=1");
    c.expect(testing_support::engine_qtm(one) == 0.0, "qtm B=1");
  }

  // Frozen parameters after training.
  RunConfig cfg;
  cfg.n_train = 64;
  cfg.n_val = 16;
  cfg.epochs = 2;
  CalaModel model(cfg);
  std::vector<std::vector<double>> frozen_before;
  for (const auto& p : model.params().params())
    if (p.frozen) frozen_before.push_back(values(p.value));
  train(model, generate(cfg.synth_spec()).train);
  std::size_t k = 0;
  for (const auto& p : model.params().params())
    if (p.frozen) c.expect(values(p.value) == frozen_before[k++], "frozen parameter " + p.name);
  c.expect(k > 0, "no frozen parameters found");

  // Compositor parameter count across depths.
  std::size_t count_m1 = 0;
  for (std::size_t m = 1; m <= 6; ++m) {
    RunConfig mc;
    mc.tac_layers = m;
    CalaModel mm(mc);
    const std::size_t n = mm.params().scalar_count("tac.");
    if (m == 1) count_m1 = n;
    c.expect(n == count_m1, fmt::format("tac parameter count at M={}", m));
  }

  return {c.ok, c.ok ? "softmax, cosine bounds, permutation, B=1, temperature, frozen, TAC count"
                     : "failed: " + c.first_failure};
}

struct PipelineRun {
  fs::path dir;
  RunConfig cfg;
  MetricReport report;
  double baseline_r1 = 0.0;
  double seconds = 0.0;
};

PipelineRun run_pipeline(const std::string& name) {
  PipelineRun run;
  run.dir = fresh_dir(name);
  run.cfg = in_dir(run.dir);
  const auto t0 = Clock::now();
  cmd_synth(run.cfg);
  {
    CalaModel untrained(run.cfg);
    run.baseline_r1 = evaluate_retrieval(untrained, read_jsonl(run.cfg.val_path())).metrics.at("recall@1");
  }
  cmd_train(run.cfg);
  run.report = cmd_eval(run.cfg);
  run.seconds = seconds_since(t0);
  return run;
}

Outcome retrieval(const PipelineRun& run) {
  const double r1 = run.report.at("recall@1") / 100.0, rsub1 = run.report.at("recall_subset@1") / 100.0;
  return {r1 >= 0.90 && rsub1 >= 0.95 && run.baseline_r1 < 0.05 && run.seconds < 300.0,
          fmt::format("R@1 {:.4f}, R_sub@1 {:.4f}, untrained R@1 {:.4f}, {:.1f}s", r1, rsub1, run.baseline_r1,
                      run.seconds)};
}

Outcome ablation() {
  struct Row {
    std::string name;
    double alpha, beta;
    double r1 = 0.0, rsub1 = 0.0;
  };
  std::vector<Row> rows{{"baseline", 0.0, 0.0}, {"+TBIA", 0.45, 0.0}, {"+CTR", 0.0, 0.1}, {"full", 0.45, 0.1}};
  RunConfig base;
  const SynthDataset ds = generate(base.synth_spec());
  for (auto& row : rows) {
    RunConfig cfg = base;
    cfg.alpha = row.alpha;
    cfg.beta = row.beta;
    CalaModel model(cfg);
    train(model, ds.train);
    const EvalResult r = evaluate_retrieval(model, ds.val);
    row.r1 = r.metrics.at("recall@1");
    row.rsub1 = r.metrics.at("recall_subset@1");
  }
  fmt::print("  {:<10} {:>6} {:>6} {:>8} {:>10}\n", "config", "alpha", "beta", "R@1", "R_sub@1");
  for (const auto& row : rows) {
    fmt::print("  {:<10} {:>6.2f} {:>6.2f} {:>8.4f} {:>10.4f}\n", row.name, row.alpha, row.beta, row.r1, row.rsub1);
  }
  const double full = rows[3].r1, baseline = rows[0].r1;
  return {full >= baseline - 0.02, fmt::format("full R@1 {:.4f} vs baseline {:.4f}", full, baseline)};
}

Outcome metric_oracles() {
  Checks c;
  std::mt19937_64 rng(5150);
  std::uniform_int_distribution<int> level(0, 3);
  for (int m = 0; m < 100; ++m) {
    const std::size_t n = 2 + rng() % 25, queries = 1 + rng() % 5;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(fmt::format("id{:03d}", i));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<RankingResult> results;
    std::vector<std::vector<std::string>> subsets;
    std::vector<std::string> targets;
    std::size_t hits[2] = {0, 0}, sub_hits[2] = {0, 0};
    for (std::size_t q = 0; q < queries; ++q) {
      std::vector<double> scores(n);
      for (double& s : scores) s = 0.5 * level(rng);
      const std::string target = ids[rng() % n];
      std::vector<std::string> subset{target};
      std::vector<double> sub_scores{scores[static_cast<std::size_t>(
          std::find(ids.begin(), ids.end(), target) - ids.begin())]};
      for (std::size_t i = 0; i < n && subset.size() < 5; ++i) {
        if (ids[i] == target || rng() % 2) continue;
        subset.push_back(ids[i]);
        sub_scores.push_back(scores[i]);
      }
      const std::size_t full = ref::brute_rank(scores, ids, target);
      const std::size_t sub = ref::brute_rank(sub_scores, subset, target);
      hits[0] += full <= 1;
      hits[1] += full <= 3;
      sub_hits[0] += sub <= 1;
      sub_hits[1] += sub <= 2;
      results.push_back(rank_gallery("q", scores, ids, target));
      c.expect(results.back().rank_of_target == full, "full rank");
      subsets.push_back(subset);
      targets.push_back(target);
    }
    const double nq = static_cast<double>(queries);
    c.expect(recall_at_k(results, 1) == hits[0] / nq, "recall@1");
    c.expect(recall_at_k(results, 3) == hits[1] / nq, "recall@3");
    c.expect(recall_subset_at_k(results, subsets, targets, 1) == sub_hits[0] / nq, "recall_subset@1");
    c.expect(recall_subset_at_k(results, subsets, targets, 2) == sub_hits[1] / nq, "recall_subset@2");
  }
  const double avg = avg_metric(81.21, 76.27), cm = challenge_metric(0.4657, 0.6922);
  c.expect(std::abs(avg - 78.74) < 1e-9, "avg metric");
  c.expect(std::abs(cm - 0.57895) < 1e-9, "challenge metric");
  return {c.ok, c.ok ? fmt::format("100 tied matrices agree; avg {:.2f}, CM {:.5f}", avg, cm)
                     : "failed: " + c.first_failure};
}

Outcome determinism(const PipelineRun& first) {
  const PipelineRun second = run_pipeline("repeat");
  Checks c;
  const std::vector<std::pair<std::string, std::string>> files{
      {first.cfg.train_path().string(), second.cfg.train_path().string()},
      {first.cfg.val_path().string(), second.cfg.val_path().string()},
      {first.cfg.checkpoint, second.cfg.checkpoint},
      {first.cfg.train_log, second.cfg.train_log},
      {first.cfg.report + ".json", second.cfg.report + ".json"},
      {first.cfg.report + ".txt", second.cfg.report + ".txt"},
  };
  for (const auto& [a, b] : files) {
    const std::string x = slurp(a), y = slurp(b);
    c.expect(!x.empty() && x == y, fs::path(a).filename().string());
  }
  fs::remove_all(second.dir);
  return {c.ok, c.ok ? "datasets, checkpoint, log and reports byte-identical" : "differs: " + c.first_failure};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  int failures = 0;
  auto report = [&](int n, const std::string& title, const std::function<Outcome()>& fn) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    fmt::print("criterion {} {}: {} ({}; {:.1f}s)\n", n, title, o.pass ? "PASS" : "FAIL", o.detail,
               seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "gradient check", gradients);
  report(2, "loss oracles", loss_oracles);
  report(3, "invariants", invariants);
  PipelineRun run;
  report(4, "synthetic retrieval", [&] {
    run = run_pipeline("default");
    return retrieval(run);
  });
  report(5, "ablation no-harm", ablation);
  report(6, "metric oracles", metric_oracles);
  report(7, "determinism", [&] {
    if (run.dir.empty()) return Outcome{false, "no first pipeline run"};
    return determinism(run);
  });
  if (!run.dir.empty()) fs::remove_all(run.dir);

  fmt::print("acceptance: {} of 7 criteria passed\n", 7 - failures);
  return failures == 0 ? 0 : 1;
}
