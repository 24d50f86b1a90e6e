#include "cala/metrics.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <numeric>
#include <stdexcept>

#include "cala/data.hpp"

namespace cala {

RankingResult rank_gallery(const std::string& query_id, std::span<const double> scores,
                           std::span<const std::string> gallery_ids, const std::string& target_id) {
  if (scores.size() != gallery_ids.size()) {
    throw std::invalid_argument(
        fmt::format("rank_gallery: {} scores for {} gallery ids", scores.size(), gallery_ids.size()));
  }
  if (scores.empty()) throw std::invalid_argument("rank_gallery: empty gallery");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return gallery_ids[a] < gallery_ids[b];
  });
  RankingResult out;
  out.query_id = query_id;
  out.ordered_ids.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.ordered_ids.push_back(gallery_ids[order[i]]);
    if (gallery_ids[order[i]] == target_id) out.rank_of_target = i + 1;
  }
  if (out.rank_of_target == 0) throw DataError("target " + target_id + " not in gallery");
  return out;
}

double recall_at_k(std::span<const RankingResult> results, std::size_t k) {
  if (results.empty()) throw std::invalid_argument("recall_at_k: no results");
  if (k == 0) throw std::invalid_argument("recall_at_k: k must be at least 1");
  const auto hits = std::count_if(results.begin(), results.end(),
                                  [k](const RankingResult& r) { return r.rank_of_target <= k; });
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

std::size_t subset_rank(const RankingResult& result, std::span<const std::string> subset,
                        const std::string& target_id) {
  if (std::find(subset.begin(), subset.end(), target_id) == subset.end()) {
    throw DataError("subset of query " + result.query_id + " does not contain its target " + target_id);
  }
  std::size_t rank = 0;
  for (const auto& id : result.ordered_ids) {
    if (std::find(subset.begin(), subset.end(), id) == subset.end()) continue;
    ++rank;
    if (id == target_id) return rank;
  }
  throw DataError("target " + target_id + " missing from ranking of " + result.query_id);
}

double recall_subset_at_k(std::span<const RankingResult> results,
                          std::span<const std::vector<std::string>> subsets,
                          std::span<const std::string> target_ids, std::size_t k) {
  if (results.empty()) throw std::invalid_argument("recall_subset_at_k: no results");
  if (k == 0) throw std::invalid_argument("recall_subset_at_k: k must be at least 1");
  if (subsets.size() != results.size() || target_ids.size() != results.size()) {
    throw std::invalid_argument("recall_subset_at_k: results, subsets and targets differ in length");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (subset_rank(results[i], subsets[i], target_ids[i]) <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double challenge_metric(double r10, double r50) { return (r10 + r50) / 2.0; }

double avg_metric(double r5, double rsub1) { return (r5 + rsub1) / 2.0; }

const std::vector<std::string>& report_metric_names() {
  static const std::vector<std::string> names{
      "recall@1",        "recall@5",        "recall@10",          "recall@50",
      "recall_subset@1", "recall_subset@2", "recall_subset@3",    "avg(r@5,r_subset@1)",
      "challenge_metric"};
  return names;
}

std::string format_report_table(const MetricReport& report) {
  std::size_t width = 6;
  for (const auto& [name, _] : report) width = std::max(width, name.size());
  std::string out = fmt::format("{:<{}}  {:>8}\n", "metric", width, "value");
  out += std::string(width + 10, '-') + "\n";
  const auto& standard = report_metric_names();
  for (const auto& name : standard) {
    if (auto it = report.find(name); it != report.end()) {
      out += fmt::format("{:<{}}  {:>8.2f}\n", name, width, it->second);
    }
  }
  for (const auto& [name, value] : report) {
    if (std::find(standard.begin(), standard.end(), name) == standard.end()) {
      out += fmt::format("{:<{}}  {:>8.2f}\n", name, width, value);
    }
  }
  return out;
}

}  // namespace cala
