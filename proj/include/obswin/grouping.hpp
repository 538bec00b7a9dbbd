#pragma once

#include "obswin/corpus.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace obswin {

struct CorrelationMatrix {
  std::vector<std::string> behaviors;
  MatrixXd values;    // Spearman rho, unit diagonal
  MatrixXd p_values;  // zero diagonal
};

// Clusters of row indices; each cluster sorted, clusters ordered by their
// smallest member. Two clusterings equal up to relabeling compare equal.
using RowPartition = std::vector<std::vector<std::size_t>>;

RowPartition canonicalize(const std::vector<int>& labels, int n_clusters);

CorrelationMatrix behavior_correlation_matrix(const Corpus& corpus);

// Lloyd's algorithm on the matrix rows with k-means++ seeding. Returns one
// label per row in [0, n).
std::vector<int> kmeans_labels(const MatrixXd& rows, int n, std::uint64_t seed, int max_iterations = 300);
RowPartition kmeans_rows(const MatrixXd& rows, int n, std::uint64_t seed);

struct GroupingCandidate {
  int n = 0;
  RowPartition modal;
  int votes = 0;         // runs that produced the modal partition
  int distinct = 0;      // distinct partitions seen
  int size_disparity = 0;
  std::map<RowPartition, int> tally;
};

struct GroupingResult {
  int chosen_n = 0;
  std::vector<std::vector<std::string>> partition;
  int size_disparity = 0;
  std::vector<GroupingCandidate> candidates;  // one per N, ascending
};

// Default upper bound on the cluster count: min(8, behaviors - 1).
int default_n_max(std::size_t behavior_count);

GroupingResult select_grouping(const CorrelationMatrix& matrix, int n_min, int n_max, int d_inits,
                               std::uint64_t seed);

}  // namespace obswin
