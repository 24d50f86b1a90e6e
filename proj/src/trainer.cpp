#include "cala/trainer.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cala/optim.hpp"

namespace cala {

std::string EpochLog::to_json_line() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["qtm"] = qtm;
  j["tbia"] = tbia ? nlohmann::ordered_json(*tbia) : nlohmann::ordered_json(nullptr);
  j["ctr"] = ctr ? nlohmann::ordered_json(*ctr) : nlohmann::ordered_json(nullptr);
  j["total"] = total;
  return j.dump();
}

namespace {

std::vector<const TripletRecord*> gather(const std::vector<TripletRecord>& records,
                                         const std::vector<std::size_t>& idx) {
  std::vector<const TripletRecord*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&records[i]);
  return out;
}

struct Accumulator {
  double qtm = 0.0, tbia = 0.0, ctr = 0.0, total = 0.0;
  bool has_tbia = false, has_ctr = false;
  std::size_t n = 0;

  void add(const LossBreakdown& l) {
    qtm += l.qtm.item();
    total += l.total.item();
    if (l.tbia) {
      tbia += l.tbia->item();
      has_tbia = true;
    }
    if (l.ctr) {
      ctr += l.ctr->item();
      has_ctr = true;
    }
    ++n;
  }

  EpochLog finish(std::size_t epoch) const {
    const double k = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
    EpochLog log;
    log.epoch = epoch;
    log.qtm = qtm * k;
    log.total = total * k;
    if (has_tbia) log.tbia = tbia * k;
    if (has_ctr) log.ctr = ctr * k;
    return log;
  }
};

}  // namespace

EpochLog evaluate_losses(const CalaModel& model, const std::vector<TripletRecord>& records,
                         const std::vector<std::vector<std::size_t>>& batches) {
  NoGradGuard no_grad;
  Accumulator acc;
  for (const auto& b : batches) acc.add(model.forward(gather(records, b)));
  return acc.finish(0);
}

std::vector<EpochLog> train(CalaModel& model, const std::vector<TripletRecord>& records,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  const RunConfig& cfg = model.config();
  BatchSampler sampler(records.size(), cfg.batch_size, cfg.seed);
  Adam adam(model.params(), {.lr = cfg.lr});
  std::vector<EpochLog> logs;

  auto emit = [&](const EpochLog& log) {
    spdlog::info("epoch {:>3}  total {:.6f}  qtm {:.6f}", log.epoch, log.total, log.qtm);
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  };

  try {
    emit(evaluate_losses(model, records, sampler.epoch(1)));
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      Accumulator acc;
      const auto batches = sampler.epoch(epoch);
      for (std::size_t b = 0; b < batches.size(); ++b) {
        model.params().zero_grad();
        LossBreakdown loss = model.forward(gather(records, batches[b]));
        loss.total.backward();
        adam.step();
        acc.add(loss);
        spdlog::debug("epoch {} batch {} total {:.6f}", epoch, b, loss.total.item());
      }
      emit(acc.finish(epoch));
    }
  } catch (const NonFiniteError& e) {
    throw TrainingDiverged(fmt::format("training diverged after {} epochs: {}", logs.size(), e.what()));
  }
  model.params().zero_grad();
  return logs;
}

EvalResult evaluate_retrieval(const CalaModel& model, const std::vector<TripletRecord>& records) {
  if (records.empty()) throw DataError("evaluation needs at least one record");
  NoGradGuard no_grad;
  std::vector<std::string> gallery_ids;
  std::vector<Tensor> gallery_rows;
  for (const auto& r : records) {
    gallery_ids.push_back(r.id);
    gallery_rows.push_back(model.encode_gallery_item(r.target_tokens));
  }
  const Tensor gallery = concat_rows(gallery_rows);

  EvalResult out;
  std::vector<std::vector<std::string>> subsets;
  for (const auto& r : records) {
    const Tensor scores = score_query_against_gallery(model.encode_query(r.ref_tokens, r.text_tokens), gallery);
    out.rankings.push_back(rank_gallery(r.id, scores.data(), gallery_ids, r.id));
    subsets.push_back(r.subset_ids ? *r.subset_ids : gallery_ids);
  }

  auto& m = out.metrics;
  for (std::size_t k : {1, 5, 10, 50}) m[fmt::format("recall@{}", k)] = recall_at_k(out.rankings, k);
  for (std::size_t k : {1, 2, 3}) {
    m[fmt::format("recall_subset@{}", k)] = recall_subset_at_k(out.rankings, subsets, gallery_ids, k);
  }
  m["avg(r@5,r_subset@1)"] = avg_metric(m["recall@5"], m["recall_subset@1"]);
  m["challenge_metric"] = challenge_metric(m["recall@10"], m["recall@50"]);
  return out;
}

}  // namespace cala
