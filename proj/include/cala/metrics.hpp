#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cala {

/// Ranking of one query over the gallery.
struct RankingResult {
  std::string query_id;
  std::vector<std::string> ordered_ids;  // descending score, ties by ascending id
  std::size_t rank_of_target = 0;        // 1-based
};

/// Orders the gallery by descending score; equal scores fall back to
/// ascending gallery id. Throws if target_id is not in the gallery.
RankingResult rank_gallery(const std::string& query_id, std::span<const double> scores,
                           std::span<const std::string> gallery_ids, const std::string& target_id);

/// Fraction of queries whose target rank is <= k.
double recall_at_k(std::span<const RankingResult> results, std::size_t k);

/// Rank of the target when only the subset candidates compete. The relative
/// order of the subset within the full ranking is preserved.
std::size_t subset_rank(const RankingResult& result, std::span<const std::string> subset,
                        const std::string& target_id);

/// Recall@k after restricting each query's ranking to its subset. subsets[i]
/// and target_ids[i] belong to results[i].
double recall_subset_at_k(std::span<const RankingResult> results,
                          std::span<const std::vector<std::string>> subsets,
                          std::span<const std::string> target_ids, std::size_t k);

/// Challenge metric, (R@10 + R@50) / 2.
double challenge_metric(double r10, double r50);

/// Average of R@5 and R_subset@1.
double avg_metric(double r5, double rsub1);

/// Ordered name -> value map of a metric report.
using MetricReport = std::map<std::string, double>;

/// Names of the standard retrieval report, in display order.
const std::vector<std::string>& report_metric_names();

/// Fixed-width two-column table of a report, standard metrics first.
std::string format_report_table(const MetricReport& report);

}  // namespace cala
