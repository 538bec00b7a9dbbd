#pragma once

#include "obswin/common.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace obswin {

using WordId = std::uint32_t;

// String <-> id table. Ids 0..2 are reserved for <unk>, <s> and </s>.
class Vocabulary {
 public:
  static constexpr WordId kUnk = 0;
  static constexpr WordId kBos = 1;
  static constexpr WordId kEos = 2;
  static constexpr WordId kMaxSize = WordId{1} << 21;

  Vocabulary();

  WordId intern(std::string_view word);
  // kUnk when the word was never interned.
  WordId lookup(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }

  std::vector<WordId> encode(std::span<const std::string> words) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

inline constexpr int kMaxNgramOrder = 6;
// Natural-log floor applied to every queried probability.
inline constexpr double kLogFloor = -99.0;

// Up to kMaxNgramOrder ids of 21 bits, packed into 128 bits.
struct NgramKey {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  static NgramKey of(std::span<const WordId> ids);
  WordId at(int i) const {
    const std::uint64_t word = i < 3 ? lo : hi;
    return static_cast<WordId>((word >> (21 * (i % 3))) & 0x1FFFFF);
  }
  friend bool operator==(const NgramKey&, const NgramKey&) = default;
};

struct NgramKeyHash {
  std::size_t operator()(const NgramKey& k) const noexcept {
    std::uint64_t x = k.lo * 0x9E3779B97F4A7C15ULL ^ (k.hi + 0x632BE59BD9B4E019ULL);
    x ^= x >> 31;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 29;
    return static_cast<std::size_t>(x);
  }
};

template <typename V>
using NgramMap = std::unordered_map<NgramKey, V, NgramKeyHash>;

// Raw n-gram counts for orders 1..order. Sequences are padded with order-1
// <s> markers and one </s>; only positions that predict a real token or </s>
// are counted, so every k-gram count equals the number of times its last word
// was predicted after its k-1 word history.
class NgramCounts {
 public:
  explicit NgramCounts(int order);

  int order() const { return order_; }
  void add_sequence(std::span<const WordId> tokens);

  NgramCounts& operator+=(const NgramCounts& other);
  NgramCounts& operator-=(const NgramCounts& other);

  // k is 1-based.
  const NgramMap<std::int64_t>& table(int k) const { return tables_.at(k - 1); }
  std::int64_t count(std::span<const WordId> ngram) const;
  bool empty() const { return tables_.front().empty(); }

 private:
  int order_;
  std::vector<NgramMap<std::int64_t>> tables_;
};

// Backoff language model with Good-Turing discounted counts (1..5) and Katz
// backoff weights, stored in natural-log space. Immutable once estimated.
class NgramModel {
 public:
  static constexpr int kMaxDiscountedCount = 5;

  static NgramModel estimate(const NgramCounts& counts, std::shared_ptr<const Vocabulary> vocab);

  int order() const { return order_; }
  const Vocabulary& vocabulary() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> shared_vocabulary() const { return vocab_; }

  // True when the word occurred in training (as a predicted token).
  bool knows(WordId word) const;

  // ln P(word | context), using at most the last order-1 context words.
  // Unknown words and context words are mapped to <unk>; never below kLogFloor.
  double log_prob(WordId word, std::span<const WordId> context) const;
  double log_prob(std::string_view word, std::span<const std::string> context) const;

  // Every word the model can predict: training words, </s> and <unk>.
  std::vector<WordId> support() const;

  // Good-Turing multiplier applied to k-grams seen r times (1 when undiscounted).
  double discount(int k, int r) const;

  // Stored (k-gram -> ln prob) entries and (context -> ln backoff) entries,
  // exposed for inspection and tests.
  const NgramMap<double>& log_probs(int k) const { return log_probs_.at(k - 1); }
  const NgramMap<double>& log_backoffs(int context_length) const {
    return log_backoff_.at(context_length - 1);
  }

  // ARPA-style text table: log10 probability, n-gram, log10 backoff; entries
  // sorted by n-gram text so the output is byte-stable.
  void write_arpa(std::ostream& out) const;
  static NgramModel read_arpa(std::istream& in, std::shared_ptr<Vocabulary> vocab);

 private:
  NgramModel() = default;
  double raw_log_prob(WordId word, const WordId* context, int context_length) const;

  int order_ = 0;
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<NgramMap<double>> log_probs_;    // index k-1
  std::vector<NgramMap<double>> log_backoff_;  // index context length - 1
  std::vector<std::array<double, kMaxDiscountedCount + 1>> discounts_;
};

NgramModel train_lm(const std::vector<std::vector<std::string>>& sequences, int order);

// Sum of ln P(w_j | history) over the tokens; optionally preceded by order-1
// <s> markers and followed by a </s> prediction.
double sequence_log_prob(const NgramModel& model, std::span<const WordId> tokens, bool pad_start,
                         bool pad_end);
double sequence_log_prob(const NgramModel& model, std::span<const std::string> tokens,
                         bool pad_start, bool pad_end);

}  // namespace obswin
