#include <algorithm>
#include <fmt/format.h>
#include <gtest/gtest.h>
#include <random>

#include "cala/data.hpp"
#include "cala/metrics.hpp"
#include "support/reference.hpp"

using namespace cala;

namespace {

RankingResult with_rank(std::size_t rank) {
  RankingResult r;
  r.rank_of_target = rank;
  return r;
}

// Gallery ids in shuffled order so id order and index order disagree.
std::vector<std::string> shuffled_ids(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(fmt::format("g{:03d}", i));
  std::shuffle(ids.begin(), ids.end(), rng);
  return ids;
}

// Coarse integer scores so ties are common.
std::vector<double> tied_scores(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> level(0, 4);
  std::vector<double> s(n);
  for (double& v : s) v = 0.25 * level(rng);
  return s;
}

std::size_t brute_subset_rank(const std::vector<double>& scores, const std::vector<std::string>& ids,
                              const std::vector<std::string>& subset, const std::string& target) {
  std::vector<double> s;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (std::find(subset.begin(), subset.end(), ids[i]) == subset.end()) continue;
    s.push_back(scores[i]);
    kept.push_back(ids[i]);
  }
  return ref::brute_rank(s, kept, target);
}

}  // namespace

TEST(RecallAtK, Examples) {
  const std::vector<RankingResult> all_first{with_rank(1), with_rank(1), with_rank(1)};
  EXPECT_EQ(recall_at_k(all_first, 1), 1.0);
  const std::vector<RankingResult> mixed{with_rank(1), with_rank(3), with_rank(7)};
  EXPECT_DOUBLE_EQ(recall_at_k(mixed, 5), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(recall_at_k(mixed, 1), 1.0 / 3.0);
  EXPECT_THROW(recall_at_k(std::vector<RankingResult>{}, 1), std::invalid_argument);
  EXPECT_THROW(recall_at_k(mixed, 0), std::invalid_argument);
}

TEST(RankGallery, TiesBreakByAscendingId) {
  const std::vector<std::string> ids{"e", "b", "d", "a", "c"};
  const std::vector<double> scores(5, 0.3);
  const RankingResult r = rank_gallery("q", scores, ids, "c");
  EXPECT_EQ(r.ordered_ids, (std::vector<std::string>{"a", "b", "c", "d", "e"}));
  EXPECT_EQ(r.rank_of_target, 3u);
  EXPECT_EQ(subset_rank(r, std::vector<std::string>{"e", "c", "d"}, "c"), 1u);
}

TEST(RankGallery, RejectsBadInput) {
  const std::vector<std::string> ids{"a", "b"};
  EXPECT_THROW(rank_gallery("q", std::vector<double>{1.0}, ids, "a"), std::invalid_argument);
  EXPECT_THROW(rank_gallery("q", std::vector<double>{}, std::vector<std::string>{}, "a"), std::invalid_argument);
  EXPECT_THROW(rank_gallery("q", std::vector<double>{1.0, 2.0}, ids, "z"), DataError);
}

TEST(RankGallery, MatchesBruteForceOnRandomTiedMatrices) {
  std::mt19937_64 rng(2024);
  for (int m = 0; m < 100; ++m) {
    const std::size_t n = 2 + rng() % 30;
    const auto ids = shuffled_ids(n, rng);
    const std::size_t queries = 1 + rng() % 6;
    std::vector<RankingResult> results;
    std::vector<std::vector<std::string>> subsets;
    std::vector<std::string> targets;
    std::size_t hits1 = 0, hits5 = 0, sub_hits1 = 0, sub_hits2 = 0;
    for (std::size_t q = 0; q < queries; ++q) {
      const auto scores = tied_scores(n, rng);
      const std::string target = ids[rng() % n];
      const RankingResult r = rank_gallery("q", scores, ids, target);

      ASSERT_EQ(r.ordered_ids.size(), n);
      for (std::size_t pos = 0; pos < n; ++pos)
        EXPECT_EQ(ref::brute_rank(scores, ids, r.ordered_ids[pos]), pos + 1);
      const std::size_t want = ref::brute_rank(scores, ids, target);
      EXPECT_EQ(r.rank_of_target, want);

      std::vector<std::string> subset{target};
      for (const auto& id : ids)
        if (id != target && subset.size() < std::min<std::size_t>(5, n) && rng() % 2) subset.push_back(id);
      const std::size_t want_sub = brute_subset_rank(scores, ids, subset, target);
      EXPECT_EQ(subset_rank(r, subset, target), want_sub);

      hits1 += want <= 1;
      hits5 += want <= 5;
      sub_hits1 += want_sub <= 1;
      sub_hits2 += want_sub <= 2;
      results.push_back(r);
      subsets.push_back(subset);
      targets.push_back(target);
    }
    const double nq = static_cast<double>(queries);
    EXPECT_EQ(recall_at_k(results, 1), hits1 / nq);
    EXPECT_EQ(recall_at_k(results, 5), hits5 / nq);
    EXPECT_EQ(recall_subset_at_k(results, subsets, targets, 1), sub_hits1 / nq);
    EXPECT_EQ(recall_subset_at_k(results, subsets, targets, 2), sub_hits2 / nq);
  }
}

TEST(RecallAtK, MonotoneAndFullAtGallerySize) {
  std::mt19937_64 rng(9);
  const std::size_t n = 20;
  const auto ids = shuffled_ids(n, rng);
  std::vector<RankingResult> results;
  for (int q = 0; q < 15; ++q) results.push_back(rank_gallery("q", tied_scores(n, rng), ids, ids[rng() % n]));
  double prev = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double r = recall_at_k(results, k);
    EXPECT_GE(r, prev);
    prev = r;
  }
  EXPECT_EQ(recall_at_k(results, n), 1.0);
}

TEST(RecallSubset, NeverBelowFullRecallOnGeneratedData) {
  SynthSpec spec;
  spec.n_train = 4;
  spec.n_val = 40;
  const auto val = generate(spec).val;
  std::vector<std::string> ids;
  for (const auto& r : val) ids.push_back(r.id);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise;
  std::vector<RankingResult> results;
  std::vector<std::vector<std::string>> subsets;
  for (const auto& r : val) {
    std::vector<double> scores(ids.size());
    for (double& s : scores) s = noise(rng);
    results.push_back(rank_gallery(r.id, scores, ids, r.id));
    subsets.push_back(*r.subset_ids);
  }
  for (std::size_t k = 1; k <= 5; ++k)
    EXPECT_GE(recall_subset_at_k(results, subsets, ids, k), recall_at_k(results, k));
}

TEST(RecallSubset, TargetMissingFromSubsetIsDataError) {
  const std::vector<std::string> ids{"a", "b", "c"};
  const RankingResult r = rank_gallery("q", std::vector<double>{0.1, 0.2, 0.3}, ids, "a");
  EXPECT_THROW(subset_rank(r, std::vector<std::string>{"b", "c"}, "a"), DataError);
  const std::vector<RankingResult> rs{r};
  const std::vector<std::vector<std::string>> subsets{{"b", "c"}};
  const std::vector<std::string> targets{"a"};
  EXPECT_THROW(recall_subset_at_k(rs, subsets, targets, 1), DataError);
}

TEST(SummaryMetrics, ChallengeMetric) {
  EXPECT_EQ(challenge_metric(0.4, 0.6), 0.5);
  EXPECT_EQ(challenge_metric(0.0, 0.0), 0.0);
  EXPECT_NEAR(challenge_metric(0.4657, 0.6922), 0.57895, 1e-12);
}

TEST(SummaryMetrics, ChallengeMetricOfCategoryMeans) {
  // Three categories; the mean CM is 57.955, printed as 57.96.
  const double r10[] = {42.38, 46.76, 50.93}, r50[] = {66.08, 68.16, 73.42};
  double cm = 0.0, m10 = 0.0, m50 = 0.0;
  for (int c = 0; c < 3; ++c) {
    cm += challenge_metric(r10[c], r50[c]) / 3.0;
    m10 += r10[c] / 3.0;
    m50 += r50[c] / 3.0;
  }
  EXPECT_NEAR(m10, 46.69, 5e-3);
  EXPECT_NEAR(m50, 69.22, 5e-3);
  EXPECT_NEAR(challenge_metric(m10, m50), cm, 1e-12);
  EXPECT_NEAR(cm, 57.955, 1e-9);
}

TEST(SummaryMetrics, AvgMetric) {
  EXPECT_NEAR(avg_metric(81.21, 76.27), 78.74, 1e-12);
  EXPECT_EQ(avg_metric(0.0, 0.0), 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const double a = u(rng), b = u(rng);
    EXPECT_EQ(avg_metric(a, b), (a + b) / 2.0);
  }
}

TEST(Report, TableListsStandardMetricsFirst) {
  MetricReport report;
  for (const auto& name : report_metric_names()) report[name] = 12.5;
  report["aaa_extra"] = 1.0;
  const std::string table = format_report_table(report);
  EXPECT_LT(table.find("recall@1 "), table.find("aaa_extra"));
  EXPECT_NE(table.find("12.50"), std::string::npos);
}
