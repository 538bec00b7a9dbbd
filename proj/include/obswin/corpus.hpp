#pragma once

#include "obswin/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace obswin {

// Ratings live on the closed interval [1, k_max].
struct RatingScale {
  int k_max = 9;

  bool contains(double rating) const { return rating >= 1.0 && rating <= k_max; }
  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

enum class Speaker { A, B };

// One speaker's concatenated transcript for one session, with that speaker's
// averaged ratings.
struct Interaction {
  std::string id;
  std::string couple_id;
  Speaker speaker = Speaker::A;
  std::vector<std::string> tokens;
  std::map<std::string, double> ratings;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

class Corpus {
 public:
  // Validates every invariant; throws Error on violation.
  Corpus(RatingScale scale, std::vector<std::string> behaviors,
         std::vector<Interaction> interactions);

  const RatingScale& scale() const { return scale_; }
  const std::vector<std::string>& behaviors() const { return behaviors_; }
  const std::vector<Interaction>& interactions() const { return interactions_; }
  std::size_t size() const { return interactions_.size(); }

  std::size_t behavior_index(std::string_view behavior) const;

  // Row per interaction, column per behavior.
  const MatrixXd& rating_matrix() const { return ratings_; }
  VectorXd ratings(std::string_view behavior) const;

  // Couple ids in order of first appearance.
  std::vector<std::string> couples() const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.scale_ == b.scale_ && a.behaviors_ == b.behaviors_ &&
           a.interactions_ == b.interactions_;
  }

 private:
  RatingScale scale_;
  std::vector<std::string> behaviors_;
  std::vector<Interaction> interactions_;
  MatrixXd ratings_;
};

// Lowercases, splits on whitespace and strips punctuation from token edges.
// Apostrophes survive only inside a word ("it's").
std::vector<std::string> tokenize(std::string_view raw);

Corpus parse_corpus(std::istream& in, RatingScale scale);
Corpus load_corpus(const std::filesystem::path& path, RatingScale scale);
void write_corpus(const Corpus& corpus, std::ostream& out);

struct FoldScheme {
  enum class Kind { LeaveOneCoupleOut, KFold };
  Kind kind = Kind::LeaveOneCoupleOut;
  int k = 0;

  static FoldScheme leave_one_couple_out() { return {Kind::LeaveOneCoupleOut, 0}; }
  static FoldScheme kfold(int k) { return {Kind::KFold, k}; }
};

struct FoldPlan {
  FoldScheme scheme;
  int fold_count = 0;
  std::map<std::string, int> assignment;  // interaction id -> fold
  std::vector<int> fold_of;               // aligned with corpus.interactions()

  std::vector<std::size_t> members(int fold) const;
};

FoldPlan assign_folds(const Corpus& corpus, FoldScheme scheme);

}  // namespace obswin
