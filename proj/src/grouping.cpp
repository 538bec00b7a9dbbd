#include "obswin/grouping.hpp"

#include "obswin/metrics.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace obswin {

namespace {

std::mt19937_64 run_engine(std::uint64_t seed, int n, int init) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(init)};
  return std::mt19937_64(seq);
}

double squared_distance(const MatrixXd& rows, Eigen::Index r, const MatrixXd& centers, Eigen::Index c) {
  return (rows.row(r) - centers.row(c)).squaredNorm();
}

}  // namespace

RowPartition canonicalize(const std::vector<int>& labels, int n_clusters) {
  RowPartition clusters(static_cast<std::size_t>(n_clusters));
  for (std::size_t i = 0; i < labels.size(); ++i) clusters.at(static_cast<std::size_t>(labels[i])).push_back(i);
  std::erase_if(clusters, [](const auto& c) { return c.empty(); });
  std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return clusters;
}

CorrelationMatrix behavior_correlation_matrix(const Corpus& corpus) {
  if (corpus.size() < 4) throw Error(ErrorKind::TooFewSamples, "correlation matrix needs >= 4 interactions");
  const auto& ratings = corpus.rating_matrix();
  const auto m = static_cast<Eigen::Index>(corpus.behaviors().size());
  CorrelationMatrix out{corpus.behaviors(), MatrixXd::Identity(m, m), MatrixXd::Zero(m, m)};
  std::vector<VectorXd> ranks;
  for (Eigen::Index b = 0; b < m; ++b) {
    const VectorXd col = ratings.col(b);
    if ((col.array() == col(0)).all()) {
      throw Error(ErrorKind::DegenerateInput,
                  "behavior '" + corpus.behaviors()[static_cast<std::size_t>(b)] + "' has constant ratings");
    }
    ranks.push_back(average_ranks(col));
  }
  const long n = static_cast<long>(corpus.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double rho = pearson(ranks[static_cast<std::size_t>(i)], ranks[static_cast<std::size_t>(j)]);
      out.values(i, j) = out.values(j, i) = rho;
      out.p_values(i, j) = out.p_values(j, i) = spearman_p(rho, n);
    }
  }
  return out;
}

std::vector<int> kmeans_labels(const MatrixXd& rows, int n, std::uint64_t seed, int max_iterations) {
  const Eigen::Index m = rows.rows();
  if (n < 1 || n > m) throw Error(ErrorKind::InvalidArgument, "cluster count must lie in [1, rows]");
  auto rng = run_engine(seed, n, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // k-means++ seeding.
  MatrixXd centers(n, rows.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
  centers.row(0) = rows.row(pick(rng));
  VectorXd nearest(m);
  for (Eigen::Index r = 0; r < m; ++r) nearest(r) = squared_distance(rows, r, centers, 0);
  for (int c = 1; c < n; ++c) {
    const double total = nearest.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      double u = unit(rng) * total;
      chosen = m - 1;
      for (Eigen::Index r = 0; r < m; ++r) {
        u -= nearest(r);
        if (u < 0.0 && nearest(r) > 0.0) {
          chosen = r;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = rows.row(chosen);
    for (Eigen::Index r = 0; r < m; ++r) nearest(r) = std::min(nearest(r), squared_distance(rows, r, centers, c));
  }

  std::vector<int> labels(static_cast<std::size_t>(m), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index r = 0; r < m; ++r) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < n; ++c) {
        const double d = squared_distance(rows, r, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[static_cast<std::size_t>(r)] != best) {
        labels[static_cast<std::size_t>(r)] = best;
        changed = true;
      }
    }

    // An empty cluster claims the point farthest from its current center.
    std::vector<int> sizes(static_cast<std::size_t>(n), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (int c = 0; c < n; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index r = 0; r < m; ++r) {
        const int own = labels[static_cast<std::size_t>(r)];
        if (sizes[static_cast<std::size_t>(own)] <= 1) continue;
        const double d = squared_distance(rows, r, centers, own);
        if (d > far_d) {
          far_d = d;
          far = r;
        }
      }
      if (far < 0) break;
      --sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
      labels[static_cast<std::size_t>(far)] = c;
      sizes[static_cast<std::size_t>(c)] = 1;
      changed = true;
    }

    for (int c = 0; c < n; ++c) {
      VectorXd sum = VectorXd::Zero(rows.cols());
      int count = 0;
      for (Eigen::Index r = 0; r < m; ++r) {
        if (labels[static_cast<std::size_t>(r)] == c) {
          sum += rows.row(r).transpose();
          ++count;
        }
      }
      if (count > 0) centers.row(c) = (sum / count).transpose();
    }
    if (!changed) break;
  }
  return labels;
}

RowPartition kmeans_rows(const MatrixXd& rows, int n, std::uint64_t seed) {
  return canonicalize(kmeans_labels(rows, n, seed), n);
}

int default_n_max(std::size_t behavior_count) {
  return std::max(2, std::min(8, static_cast<int>(behavior_count) - 1));
}

GroupingResult select_grouping(const CorrelationMatrix& matrix, int n_min, int n_max, int d_inits,
                               std::uint64_t seed) {
  const auto m = static_cast<int>(matrix.behaviors.size());
  if (d_inits < 1) throw Error(ErrorKind::InvalidArgument, "d_inits must be >= 1");
  if (n_min < 1 || n_max < n_min || n_max > m) {
    throw Error(ErrorKind::InvalidArgument, "cluster range [" + std::to_string(n_min) + ", " +
                                                std::to_string(n_max) + "] invalid for " + std::to_string(m) +
                                                " behaviors");
  }
  GroupingResult result;
  int best = -1;
  for (int n = n_min; n <= n_max; ++n) {
    GroupingCandidate cand;
    cand.n = n;
    for (int init = 0; init < d_inits; ++init) {
      auto rng = run_engine(seed, n, init + 1);
      const auto labels = kmeans_labels(matrix.values, n, rng());
      ++cand.tally[canonicalize(labels, n)];
    }
    // std::map iterates partitions in lexicographic order, so equal votes
    // resolve to the smallest partition.
    for (const auto& [partition, count] : cand.tally) {
      if (count > cand.votes) {
        cand.votes = count;
        cand.modal = partition;
      }
    }
    cand.distinct = static_cast<int>(cand.tally.size());
    std::size_t lo = cand.modal.front().size(), hi = lo;
    for (const auto& c : cand.modal) {
      lo = std::min(lo, c.size());
      hi = std::max(hi, c.size());
    }
    cand.size_disparity = static_cast<int>(hi - lo);
    if (best < 0 || cand.size_disparity < result.candidates[static_cast<std::size_t>(best)].size_disparity) {
      best = static_cast<int>(result.candidates.size());
    }
    result.candidates.push_back(std::move(cand));
  }
  const auto& win = result.candidates[static_cast<std::size_t>(best)];
  result.chosen_n = win.n;
  result.size_disparity = win.size_disparity;
  for (const auto& cluster : win.modal) {
    std::vector<std::string> names;
    for (auto r : cluster) names.push_back(matrix.behaviors[r]);
    result.partition.push_back(std::move(names));
  }
  return result;
}

}  // namespace obswin
