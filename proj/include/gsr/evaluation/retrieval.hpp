#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsr/numcore/tensor.hpp"

namespace gsr {

class GoldIndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class EmptyRanksError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RetrievalResult {
  std::map<int, double> recall_at;  ///< N -> fraction of queries with rank <= N
  double median_rank = 0;
  std::vector<std::size_t> per_query_rank;

  double recall(int n) const { return recall_at.at(n); }
};

inline constexpr int kRecallCutoffs[] = {1, 5, 10};

/// Cosine distance 1 - u.i, accumulated in double.
template <class T>
double cosine_distance(std::span<const T> u, std::span<const T> i) {
  if (u.size() != i.size())
    throw DimensionError("cosine_distance: lengths " + std::to_string(u.size()) + " and " + std::to_string(i.size()));
  double d = 0;
  for (std::size_t c = 0; c < u.size(); ++c) d += double(u[c]) * double(i[c]);
  return 1.0 - d;
}

/// 1-based rank of each query's gold image. rank = 1 + #images strictly closer
/// + #equidistant images with a smaller index. `gold` is 0-based.
template <class T>
std::vector<std::size_t> rank_images(const std::vector<std::vector<T>>& utts, const std::vector<std::vector<T>>& imgs,
                                     const std::vector<std::size_t>& gold) {
  if (gold.size() != utts.size())
    throw DimensionError("rank_images: " + std::to_string(utts.size()) + " queries but " +
                         std::to_string(gold.size()) + " gold entries");
  if (imgs.empty()) throw DimensionError("rank_images: no images");
  const std::size_t h = imgs.front().size();
  for (const auto& v : imgs)
    if (v.size() != h) throw DimensionError("rank_images: ragged image embeddings");
  for (const auto& v : utts)
    if (v.size() != h)
      throw DimensionError("rank_images: utterance embedding of width " + std::to_string(v.size()) +
                           ", images have " + std::to_string(h));

  std::vector<std::size_t> ranks(utts.size());
  for (std::size_t q = 0; q < utts.size(); ++q) {
    if (gold[q] >= imgs.size())
      throw GoldIndexError("rank_images: gold image " + std::to_string(gold[q]) + " of query " + std::to_string(q) +
                           " outside " + std::to_string(imgs.size()) + " images");
    const std::span<const T> u(utts[q]);
    const double dg = cosine_distance(u, std::span<const T>(imgs[gold[q]]));
    std::size_t rank = 1;
    for (std::size_t m = 0; m < imgs.size(); ++m) {
      if (m == gold[q]) continue;
      const double d = cosine_distance(u, std::span<const T>(imgs[m]));
      if (d < dg || (d == dg && m < gold[q])) ++rank;
    }
    ranks[q] = rank;
  }
  return ranks;
}

inline RetrievalResult summarize(std::vector<std::size_t> ranks) {
  if (ranks.empty()) throw EmptyRanksError("summarize: no ranks");
  RetrievalResult r;
  for (int n : kRecallCutoffs) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [n](std::size_t x) { return x <= std::size_t(n); });
    r.recall_at[n] = double(hits) / double(ranks.size());
  }
  r.per_query_rank = ranks;
  std::sort(ranks.begin(), ranks.end());
  const std::size_t n = ranks.size();
  r.median_rank = n % 2 ? double(ranks[n / 2]) : 0.5 * double(ranks[n / 2 - 1] + ranks[n / 2]);
  return r;
}

inline constexpr const char* kMetricsHeader = "epoch,loss,R@1,R@5,R@10,medr";

/// One comma-separated record in the training-log layout.
inline std::string format_record(const std::string& epoch, double loss, const RetrievalResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%g", epoch.c_str(), loss, r.recall(1), r.recall(5),
                r.recall(10), r.median_rank);
  return buf;
}

/// Evaluation report: header plus one record with the epoch field set to "eval".
inline void write_report(std::ostream& os, const RetrievalResult& r, double loss) {
  os << kMetricsHeader << '\n' << format_record("eval", loss, r) << '\n';
}

/// "id,rank" lines, one per query.
inline void write_rank_dump(std::ostream& os, const std::vector<std::string>& ids, const RetrievalResult& r) {
  if (ids.size() != r.per_query_rank.size()) throw DimensionError("write_rank_dump: id count mismatch");
  os << "id,rank\n";
  for (std::size_t q = 0; q < ids.size(); ++q) os << ids[q] << ',' << r.per_query_rank[q] << '\n';
}

}  // namespace gsr
