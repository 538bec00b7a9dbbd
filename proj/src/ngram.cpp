#include "obswin/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace obswin {

namespace {

constexpr double kMassEpsilon = 1e-12;

std::array<WordId, kMaxNgramOrder> unpack(const NgramKey& key, int len) {
  std::array<WordId, kMaxNgramOrder> ids{};
  for (int i = 0; i < len; ++i) ids[static_cast<std::size_t>(i)] = key.at(i);
  return ids;
}


std::string format_log10(double ln_value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", ln_value / std::numbers::ln10);
  return buf;
}

}  // namespace

Vocabulary::Vocabulary() {
  intern("<unk>");
  intern("<s>");
  intern("</s>");
}

WordId Vocabulary::intern(std::string_view word) {
  auto it = index_.find(std::string(word));
  if (it != index_.end()) return it->second;
  if (words_.size() >= kMaxSize) throw Error(ErrorKind::InvalidArgument, "vocabulary exceeds 2^21 words");
  const auto id = static_cast<WordId>(words_.size());
  words_.emplace_back(word);
  index_.emplace(words_.back(), id);
  return id;
}

WordId Vocabulary::lookup(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<WordId> Vocabulary::encode(std::span<const std::string> words) const {
  std::vector<WordId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(lookup(w));
  return ids;
}

NgramKey NgramKey::of(std::span<const WordId> ids) {
  NgramKey key;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto shift = 21 * (i % 3);
    if (i < 3) {
      key.lo |= static_cast<std::uint64_t>(ids[i]) << shift;
    } else {
      key.hi |= static_cast<std::uint64_t>(ids[i]) << shift;
    }
  }
  return key;
}

NgramCounts::NgramCounts(int order) : order_(order) {
  if (order < 1 || order > kMaxNgramOrder) {
    throw Error(ErrorKind::InvalidArgument, "n-gram order must lie in [1, 6]");
  }
  tables_.resize(static_cast<std::size_t>(order));
}

void NgramCounts::add_sequence(std::span<const WordId> tokens) {
  const auto pad = static_cast<std::size_t>(order_ - 1);
  std::vector<WordId> padded(pad, Vocabulary::kBos);
  padded.insert(padded.end(), tokens.begin(), tokens.end());
  padded.push_back(Vocabulary::kEos);
  for (std::size_t j = pad; j < padded.size(); ++j) {
    for (int k = 1; k <= order_; ++k) {
      const std::span<const WordId> gram(padded.data() + j + 1 - static_cast<std::size_t>(k),
                                         static_cast<std::size_t>(k));
      ++tables_[static_cast<std::size_t>(k - 1)][NgramKey::of(gram)];
    }
  }
}

NgramCounts& NgramCounts::operator+=(const NgramCounts& other) {
  if (other.order_ != order_) throw Error(ErrorKind::InvalidArgument, "n-gram order mismatch");
  for (std::size_t k = 0; k < tables_.size(); ++k) {
    for (const auto& [key, c] : other.tables_[k]) tables_[k][key] += c;
  }
  return *this;
}

NgramCounts& NgramCounts::operator-=(const NgramCounts& other) {
  if (other.order_ != order_) throw Error(ErrorKind::InvalidArgument, "n-gram order mismatch");
  for (std::size_t k = 0; k < tables_.size(); ++k) {
    for (const auto& [key, c] : other.tables_[k]) {
      auto it = tables_[k].find(key);
      if (it == tables_[k].end() || it->second < c) {
        throw Error(ErrorKind::InvalidArgument, "subtracting counts that were never added");
      }
      it->second -= c;
      if (it->second == 0) tables_[k].erase(it);
    }
  }
  return *this;
}

std::int64_t NgramCounts::count(std::span<const WordId> ngram) const {
  if (ngram.empty() || ngram.size() > tables_.size()) return 0;
  const auto& t = tables_[ngram.size() - 1];
  auto it = t.find(NgramKey::of(ngram));
  return it == t.end() ? 0 : it->second;
}

NgramModel NgramModel::estimate(const NgramCounts& counts, std::shared_ptr<const Vocabulary> vocab) {
  if (counts.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no n-gram counts to estimate from");
  NgramModel m;
  m.order_ = counts.order();
  m.vocab_ = std::move(vocab);
  const auto n = static_cast<std::size_t>(m.order_);
  m.log_probs_.resize(n);
  m.log_backoff_.resize(n > 1 ? n - 1 : 0);
  m.discounts_.resize(n);

  for (int k = 1; k <= m.order_; ++k) {
    const auto& table = counts.table(k);
    const auto ki = static_cast<std::size_t>(k - 1);

    // Count-of-counts N_1..N_6 decide the Good-Turing multipliers for r = 1..5.
    std::array<std::int64_t, kMaxDiscountedCount + 2> n_r{};
    for (const auto& [key, c] : table) {
      if (c <= kMaxDiscountedCount + 1) ++n_r[static_cast<std::size_t>(c)];
    }
    auto& disc = m.discounts_[ki];
    disc.fill(1.0);
    for (int r = 1; r <= kMaxDiscountedCount; ++r) {
      const auto nr = n_r[static_cast<std::size_t>(r)];
      const auto nr1 = n_r[static_cast<std::size_t>(r + 1)];
      if (nr == 0 || nr1 == 0) continue;
      const double d = static_cast<double>(r + 1) * static_cast<double>(nr1) /
                       (static_cast<double>(r) * static_cast<double>(nr));
      if (d > 0.0 && d < 1.0) disc[static_cast<std::size_t>(r)] = d;
    }
    auto discounted = [&](std::int64_t c) {
      return c <= kMaxDiscountedCount ? disc[static_cast<std::size_t>(c)] * static_cast<double>(c)
                                      : static_cast<double>(c);
    };

    auto& probs = m.log_probs_[ki];
    probs.reserve(table.size() + 1);

    if (k == 1) {
      std::int64_t total = 0;
      for (const auto& [key, c] : table) total += c;
      double mass = 0.0;
      for (const auto& [key, c] : table) {
        const double p = discounted(c) / static_cast<double>(total);
        probs.emplace(key, std::log(p));
        mass += p;
      }
      const double leftover = 1.0 - mass;
      if (leftover > kMassEpsilon) {
        const WordId unk = Vocabulary::kUnk;
        probs.emplace(NgramKey::of(std::span<const WordId>(&unk, 1)), std::log(leftover));
      }
      continue;
    }

    struct ContextStats {
      std::int64_t total = 0;
      double seen_mass = 0.0;
      double lower_mass = 0.0;
    };
    NgramMap<ContextStats> contexts;
    for (const auto& [key, c] : table) {
      const auto ids = unpack(key, k);
      contexts[NgramKey::of(std::span<const WordId>(ids.data(), ki))].total += c;
    }
    for (const auto& [key, c] : table) {
      const auto ids = unpack(key, k);
      auto& ctx = contexts[NgramKey::of(std::span<const WordId>(ids.data(), ki))];
      const double p = discounted(c) / static_cast<double>(ctx.total);
      probs.emplace(key, std::log(p));
      ctx.seen_mass += p;
      ctx.lower_mass += std::exp(m.raw_log_prob(ids[ki], ids.data() + 1, k - 2));
    }

    auto& backoff = m.log_backoff_[ki - 1];
    backoff.reserve(contexts.size());
    NgramMap<double> renormalize;
    for (const auto& [ctx_key, ctx] : contexts) {
      const double numerator = 1.0 - ctx.seen_mass;
      const double denominator = 1.0 - ctx.lower_mass;
      if (numerator <= kMassEpsilon) {
        backoff.emplace(ctx_key, kLogFloor);
      } else if (denominator <= kMassEpsilon) {
        // Every lower-order word already follows this context: give the
        // leftover back to the seen words.
        backoff.emplace(ctx_key, kLogFloor);
        renormalize.emplace(ctx_key, -std::log(ctx.seen_mass));
      } else {
        backoff.emplace(ctx_key, std::max(std::log(numerator / denominator), kLogFloor));
      }
    }
    if (!renormalize.empty()) {
      for (auto& [key, lp] : probs) {
        const auto ids = unpack(key, k);
        auto hit = renormalize.find(NgramKey::of(std::span<const WordId>(ids.data(), ki)));
        if (hit != renormalize.end()) lp += hit->second;
      }
    }
  }
  return m;
}

bool NgramModel::knows(WordId word) const {
  if (word == Vocabulary::kUnk) return false;
  return log_probs_.front().contains(NgramKey::of(std::span<const WordId>(&word, 1)));
}

double NgramModel::raw_log_prob(WordId word, const WordId* context, int context_length) const {
  double acc = 0.0;
  for (int m = context_length; m >= 1; --m) {
    const WordId* ctx = context + (context_length - m);
    std::array<WordId, kMaxNgramOrder> gram{};
    std::copy(ctx, ctx + m, gram.begin());
    gram[static_cast<std::size_t>(m)] = word;
    const auto& level = log_probs_[static_cast<std::size_t>(m)];
    auto hit = level.find(NgramKey::of(std::span<const WordId>(gram.data(), static_cast<std::size_t>(m + 1))));
    if (hit != level.end()) return acc + hit->second;
    const auto& bo = log_backoff_[static_cast<std::size_t>(m - 1)];
    auto b = bo.find(NgramKey::of(std::span<const WordId>(ctx, static_cast<std::size_t>(m))));
    if (b != bo.end()) acc += b->second;
  }
  const auto& uni = log_probs_.front();
  auto hit = uni.find(NgramKey::of(std::span<const WordId>(&word, 1)));
  if (hit == uni.end() && word != Vocabulary::kUnk) {
    const WordId unk = Vocabulary::kUnk;
    hit = uni.find(NgramKey::of(std::span<const WordId>(&unk, 1)));
  }
  return hit == uni.end() ? kLogFloor : acc + hit->second;
}

double NgramModel::log_prob(WordId word, std::span<const WordId> context) const {
  const auto m = std::min<std::size_t>(context.size(), static_cast<std::size_t>(order_ - 1));
  std::array<WordId, kMaxNgramOrder> ctx{};
  for (std::size_t i = 0; i < m; ++i) {
    const WordId c = context[context.size() - m + i];
    ctx[i] = (c == Vocabulary::kBos || knows(c)) ? c : Vocabulary::kUnk;
  }
  const WordId w = knows(word) ? word : Vocabulary::kUnk;
  return std::max(raw_log_prob(w, ctx.data(), static_cast<int>(m)), kLogFloor);
}

double NgramModel::log_prob(std::string_view word, std::span<const std::string> context) const {
  const auto ids = vocab_->encode(context);
  return log_prob(vocab_->lookup(word), ids);
}

std::vector<WordId> NgramModel::support() const {
  std::vector<WordId> out;
  for (const auto& [key, lp] : log_probs_.front()) out.push_back(key.at(0));
  if (std::find(out.begin(), out.end(), Vocabulary::kUnk) == out.end()) out.push_back(Vocabulary::kUnk);
  std::sort(out.begin(), out.end());
  return out;
}

double NgramModel::discount(int k, int r) const {
  if (r < 1 || r > kMaxDiscountedCount) return 1.0;
  return discounts_.at(static_cast<std::size_t>(k - 1))[static_cast<std::size_t>(r)];
}

void NgramModel::write_arpa(std::ostream& out) const {
  struct Line {
    std::string gram;
    std::string text;
  };
  std::vector<std::vector<Line>> sections(static_cast<std::size_t>(order_));
  auto gram_text = [&](const NgramKey& key, int len) {
    std::string s;
    for (int i = 0; i < len; ++i) {
      if (i) s += ' ';
      s += vocab_->word(key.at(i));
    }
    return s;
  };
  for (int k = 1; k <= order_; ++k) {
    const auto ki = static_cast<std::size_t>(k - 1);
    const NgramMap<double>* bo = k < order_ ? &log_backoff_[ki] : nullptr;
    for (const auto& [key, lp] : log_probs_[ki]) {
      std::string text = format_log10(lp) + '\t' + gram_text(key, k);
      if (bo) {
        auto b = bo->find(key);
        if (b != bo->end()) text += '\t' + format_log10(b->second);
      }
      sections[ki].push_back({gram_text(key, k), std::move(text)});
    }
    if (bo) {
      // Contexts ending in <s> are never predicted; they carry only a backoff.
      for (const auto& [key, b] : *bo) {
        if (log_probs_[ki].contains(key)) continue;
        std::string text = format_log10(kLogFloor * std::numbers::ln10) + '\t' + gram_text(key, k) +
                           '\t' + format_log10(b);
        sections[ki].push_back({gram_text(key, k), std::move(text)});
      }
    }
    std::sort(sections[ki].begin(), sections[ki].end(),
              [](const Line& a, const Line& b) { return a.gram < b.gram; });
  }

  out << "\n\\data\\\n";
  for (int k = 1; k <= order_; ++k) out << "ngram " << k << '=' << sections[static_cast<std::size_t>(k - 1)].size() << '\n';
  for (int k = 1; k <= order_; ++k) {
    out << "\n\\" << k << "-grams:\n";
    for (const auto& line : sections[static_cast<std::size_t>(k - 1)]) out << line.text << '\n';
  }
  out << "\n\\end\\\n";
}

NgramModel NgramModel::read_arpa(std::istream& in, std::shared_ptr<Vocabulary> vocab) {
  NgramModel m;
  std::string line;
  int section = 0;
  std::vector<int> declared;
  auto fail = [](const std::string& why) { throw Error(ErrorKind::MalformedRecord, "ARPA: " + why); };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "\\data\\") continue;
    if (line == "\\end\\") break;
    if (line.rfind("ngram ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail("bad count line: " + line);
      declared.push_back(std::stoi(line.substr(eq + 1)));
      continue;
    }
    if (line.front() == '\\') {
      section = std::stoi(line.substr(1));
      if (section < 1 || section > kMaxNgramOrder) fail("bad section header: " + line);
      if (section > m.order_) {
        m.order_ = section;
        m.log_probs_.resize(static_cast<std::size_t>(section));
      }
      continue;
    }
    if (section == 0) fail("entry outside a section");
    std::istringstream fields(line);
    double lp10 = 0.0;
    if (!(fields >> lp10)) fail("bad probability in: " + line);
    std::array<WordId, kMaxNgramOrder> ids{};
    for (int i = 0; i < section; ++i) {
      std::string w;
      if (!(fields >> w)) fail("short n-gram in: " + line);
      ids[static_cast<std::size_t>(i)] = vocab->intern(w);
    }
    const auto key = NgramKey::of(std::span<const WordId>(ids.data(), static_cast<std::size_t>(section)));
    if (ids[static_cast<std::size_t>(section - 1)] != Vocabulary::kBos) {
      m.log_probs_[static_cast<std::size_t>(section - 1)].emplace(key, lp10 * std::numbers::ln10);
    }
    double bo10 = 0.0;
    if (fields >> bo10) {
      if (m.log_backoff_.size() < static_cast<std::size_t>(section)) {
        m.log_backoff_.resize(static_cast<std::size_t>(section));
      }
      m.log_backoff_[static_cast<std::size_t>(section - 1)].emplace(key, bo10 * std::numbers::ln10);
    }
  }
  if (m.order_ == 0) fail("no n-gram sections");
  if (!declared.empty() && declared.size() != static_cast<std::size_t>(m.order_)) {
    fail("declared order does not match sections");
  }
  m.log_backoff_.resize(static_cast<std::size_t>(m.order_ - 1));
  m.discounts_.assign(static_cast<std::size_t>(m.order_), {});
  for (auto& d : m.discounts_) d.fill(1.0);
  m.vocab_ = std::move(vocab);
  return m;
}

NgramModel train_lm(const std::vector<std::vector<std::string>>& sequences, int order) {
  auto vocab = std::make_shared<Vocabulary>();
  NgramCounts counts(order);
  for (const auto& seq : sequences) {
    if (seq.empty()) continue;
    std::vector<WordId> ids;
    ids.reserve(seq.size());
    for (const auto& w : seq) ids.push_back(vocab->intern(w));
    counts.add_sequence(ids);
  }
  if (counts.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no non-empty training sequence");
  return NgramModel::estimate(counts, std::move(vocab));
}

double sequence_log_prob(const NgramModel& model, std::span<const WordId> tokens, bool pad_start,
                         bool pad_end) {
  if (tokens.empty()) throw Error(ErrorKind::InvalidArgument, "cannot score an empty sequence");
  const auto hist_len = static_cast<std::size_t>(model.order() - 1);
  std::vector<WordId> history;
  if (pad_start) history.assign(hist_len, Vocabulary::kBos);
  double total = 0.0;
  for (const WordId w : tokens) {
    total += model.log_prob(w, history);
    history.push_back(w);
    if (history.size() > hist_len) history.erase(history.begin());
  }
  if (pad_end) total += model.log_prob(Vocabulary::kEos, history);
  return total;
}

double sequence_log_prob(const NgramModel& model, std::span<const std::string> tokens,
                         bool pad_start, bool pad_end) {
  const auto ids = model.vocabulary().encode(tokens);
  return sequence_log_prob(model, ids, pad_start, pad_end);
}

}  // namespace obswin
