#include "cala/commands.hpp"

#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cala/checkpoint.hpp"

namespace cala {

namespace fs = std::filesystem;

namespace {

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

}  // namespace

SynthSummary cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  const SynthDataset ds = generate(cfg.synth_spec());
  fs::create_directories(cfg.data_dir);
  write_jsonl(cfg.train_path(), ds.train);
  write_jsonl(cfg.val_path(), ds.val);
  spdlog::info("wrote {} train and {} val triplets to {}", ds.train.size(), ds.val.size(), cfg.data_dir);
  return {ds.train.size(), ds.val.size()};
}

std::vector<EpochLog> cmd_train(const RunConfig& cfg) {
  const auto records = read_jsonl(cfg.train_path());
  CalaModel model(cfg);
  ensure_parent(cfg.train_log);
  std::ofstream log(cfg.train_log, std::ios::binary | std::ios::trunc);
  if (!log) throw std::runtime_error("cannot open training log: " + cfg.train_log);
  const auto logs = train(model, records, [&](const EpochLog& e) { log << e.to_json_line() << '\n'; });
  ensure_parent(cfg.checkpoint);
  save_checkpoint(model.params(), cfg.checkpoint);
  spdlog::info("saved checkpoint to {}", cfg.checkpoint);
  return logs;
}

MetricReport cmd_eval(const RunConfig& cfg) {
  if (!fs::exists(cfg.checkpoint)) throw std::runtime_error("checkpoint not found: " + cfg.checkpoint);
  const auto records = read_jsonl(cfg.val_path());
  CalaModel model(cfg);
  load_checkpoint(model.params(), cfg.checkpoint);
  const EvalResult result = evaluate_retrieval(model, records);

  MetricReport percent;
  nlohmann::ordered_json j;
  for (const auto& name : report_metric_names()) {
    percent[name] = 100.0 * result.metrics.at(name);
    j[name] = percent[name];
  }
  ensure_parent(cfg.report);
  {
    std::ofstream out(cfg.report + ".json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report: " + cfg.report + ".json");
    out << j.dump(2) << '\n';
  }
  {
    std::ofstream out(cfg.report + ".txt", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report: " + cfg.report + ".txt");
    out << format_report_table(percent);
  }
  return percent;
}

RunConfig gradcheck_config(const RunConfig& cfg) {
  RunConfig small = cfg;
  small.dim = 8;
  small.batch_size = 3;
  small.n_train = 3;
  small.tac_layers = std::min<std::size_t>(cfg.tac_layers, 2);
  if (small.dim % small.tac_heads != 0) small.tac_heads = 1;
  if (small.dim % small.attn_heads != 0) small.attn_heads = 1;
  return small;
}

GradcheckReport cmd_gradcheck(const RunConfig& cfg, const GradcheckOptions& opts) {
  const RunConfig small = gradcheck_config(cfg);
  SynthSpec spec = small.synth_spec();
  spec.n_val = spec.subset_size;
  const SynthDataset ds = generate(spec);
  CalaModel model(small);
  return check_gradients(model, ds.train, opts);
}

}  // namespace cala
