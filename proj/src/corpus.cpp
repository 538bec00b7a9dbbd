#include "obswin/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace obswin {

namespace {

using ordered_json = nlohmann::ordered_json;

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string speaker_name(Speaker s) { return s == Speaker::A ? "A" : "B"; }

}  // namespace

Corpus::Corpus(RatingScale scale, std::vector<std::string> behaviors,
               std::vector<Interaction> interactions)
    : scale_(scale), behaviors_(std::move(behaviors)), interactions_(std::move(interactions)) {
  if (scale_.k_max < 3) {
    throw Error(ErrorKind::ScaleTooSmall, "rating scale needs K >= 3, got " + std::to_string(scale_.k_max));
  }
  if (interactions_.empty()) throw Error(ErrorKind::EmptyCorpus, "corpus has no interactions");

  std::set<std::string> unique(behaviors_.begin(), behaviors_.end());
  if (unique.size() != behaviors_.size()) {
    throw Error(ErrorKind::InconsistentBehaviorSet, "duplicate behavior ids");
  }

  std::set<std::string> ids;
  ratings_.resize(static_cast<Eigen::Index>(interactions_.size()),
                  static_cast<Eigen::Index>(behaviors_.size()));
  for (std::size_t i = 0; i < interactions_.size(); ++i) {
    const Interaction& it = interactions_[i];
    if (!ids.insert(it.id).second) {
      throw Error(ErrorKind::MalformedRecord, "duplicate interaction id '" + it.id + "'");
    }
    if (it.tokens.empty()) {
      throw Error(ErrorKind::MalformedRecord, "interaction '" + it.id + "' has no tokens");
    }
    if (it.ratings.size() != behaviors_.size()) {
      throw Error(ErrorKind::InconsistentBehaviorSet,
                  "interaction '" + it.id + "' rates " + std::to_string(it.ratings.size()) +
                      " behaviors, corpus has " + std::to_string(behaviors_.size()));
    }
    for (std::size_t b = 0; b < behaviors_.size(); ++b) {
      auto found = it.ratings.find(behaviors_[b]);
      if (found == it.ratings.end()) {
        throw Error(ErrorKind::InconsistentBehaviorSet,
                    "interaction '" + it.id + "' lacks behavior '" + behaviors_[b] + "'");
      }
      if (!std::isfinite(found->second) || !scale_.contains(found->second)) {
        std::ostringstream msg;
        msg << "interaction '" << it.id << "' rates '" << behaviors_[b] << "' at "
            << found->second << ", outside [1, " << scale_.k_max << "]";
        throw Error(ErrorKind::RatingOutOfRange, msg.str());
      }
      ratings_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = found->second;
    }
  }
}

std::size_t Corpus::behavior_index(std::string_view behavior) const {
  auto it = std::find(behaviors_.begin(), behaviors_.end(), behavior);
  if (it == behaviors_.end()) {
    throw Error(ErrorKind::InvalidArgument, "unknown behavior '" + std::string(behavior) + "'");
  }
  return static_cast<std::size_t>(it - behaviors_.begin());
}

VectorXd Corpus::ratings(std::string_view behavior) const {
  return ratings_.col(static_cast<Eigen::Index>(behavior_index(behavior)));
}

std::vector<std::string> Corpus::couples() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& it : interactions_) {
    if (seen.insert(it.couple_id).second) out.push_back(it.couple_id);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view raw) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    while (pos < raw.size() && std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
    std::size_t end = pos;
    while (end < raw.size() && !std::isspace(static_cast<unsigned char>(raw[end]))) ++end;
    std::size_t b = pos, e = end;
    while (b < e && is_punct(raw[b])) ++b;
    while (e > b && is_punct(raw[e - 1])) --e;
    if (b < e) {
      std::string tok(raw.substr(b, e - b));
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      tokens.push_back(std::move(tok));
    }
    pos = end;
  }
  return tokens;
}

Corpus parse_corpus(std::istream& in, RatingScale scale) {
  if (scale.k_max < 3) {
    throw Error(ErrorKind::ScaleTooSmall, "rating scale needs K >= 3, got " + std::to_string(scale.k_max));
  }
  std::vector<std::string> behaviors;
  std::vector<Interaction> interactions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no) + ": " + why);
    };
    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(e.what());
    }
    if (!rec.is_object()) fail("record is not a JSON object");
    for (const char* key : {"id", "couple_id", "speaker", "text"}) {
      if (!rec.contains(key) || !rec[key].is_string()) fail(std::string("missing string field '") + key + "'");
    }
    if (!rec.contains("ratings") || !rec["ratings"].is_object()) fail("missing object field 'ratings'");

    Interaction it;
    it.id = rec["id"].get<std::string>();
    it.couple_id = rec["couple_id"].get<std::string>();
    const auto speaker = rec["speaker"].get<std::string>();
    if (speaker == "A") {
      it.speaker = Speaker::A;
    } else if (speaker == "B") {
      it.speaker = Speaker::B;
    } else {
      fail("speaker must be \"A\" or \"B\"");
    }
    it.tokens = tokenize(rec["text"].get<std::string>());
    if (it.tokens.empty()) fail("text has no tokens");

    std::vector<std::string> keys;
    for (const auto& [behavior, value] : rec["ratings"].items()) {
      if (!value.is_number()) fail("rating for '" + behavior + "' is not a number");
      const double r = value.get<double>();
      if (!scale.contains(r)) {
        std::ostringstream msg;
        msg << "line " << line_no << ": rating " << r << " for '" << behavior
            << "' outside [1, " << scale.k_max << "]";
        throw Error(ErrorKind::RatingOutOfRange, msg.str());
      }
      it.ratings.emplace(behavior, r);
      keys.push_back(behavior);
    }
    if (interactions.empty()) {
      behaviors = keys;
    } else {
      std::vector<std::string> a = behaviors, b = keys;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) {
        throw Error(ErrorKind::InconsistentBehaviorSet,
                    "line " + std::to_string(line_no) + ": behavior keys differ from the first record");
      }
    }
    interactions.push_back(std::move(it));
  }
  if (interactions.empty()) throw Error(ErrorKind::EmptyCorpus, "no records");
  return Corpus(scale, std::move(behaviors), std::move(interactions));
}

Corpus load_corpus(const std::filesystem::path& path, RatingScale scale) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open corpus file " + path.string());
  return parse_corpus(in, scale);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& it : corpus.interactions()) {
    ordered_json rec;
    rec["id"] = it.id;
    rec["couple_id"] = it.couple_id;
    rec["speaker"] = speaker_name(it.speaker);
    std::string text;
    for (const auto& tok : it.tokens) {
      if (!text.empty()) text += ' ';
      text += tok;
    }
    rec["text"] = text;
    ordered_json ratings = ordered_json::object();
    for (const auto& b : corpus.behaviors()) ratings[b] = it.ratings.at(b);
    rec["ratings"] = std::move(ratings);
    out << rec.dump() << '\n';
  }
}

std::vector<std::size_t> FoldPlan::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan assign_folds(const Corpus& corpus, FoldScheme scheme) {
  const auto couples = corpus.couples();
  if (couples.size() < 2) {
    throw Error(ErrorKind::TooFewCouples, "fold assignment needs at least 2 couples");
  }
  std::unordered_map<std::string, int> couple_fold;
  FoldPlan plan;
  plan.scheme = scheme;

  if (scheme.kind == FoldScheme::Kind::LeaveOneCoupleOut) {
    for (std::size_t c = 0; c < couples.size(); ++c) couple_fold[couples[c]] = static_cast<int>(c);
    plan.fold_count = static_cast<int>(couples.size());
  } else {
    if (scheme.k < 2) throw Error(ErrorKind::InvalidArgument, "k-fold needs k >= 2");
    if (couples.size() < static_cast<std::size_t>(scheme.k)) {
      throw Error(ErrorKind::TooFewCouples, std::to_string(couples.size()) + " couples cannot fill " +
                                                std::to_string(scheme.k) + " folds");
    }
    std::unordered_map<std::string, int> count;
    for (const auto& it : corpus.interactions()) ++count[it.couple_id];
    std::vector<std::string> order = couples;
    std::stable_sort(order.begin(), order.end(),
                     [&](const auto& a, const auto& b) { return count[a] > count[b]; });
    for (std::size_t c = 0; c < order.size(); ++c) {
      couple_fold[order[c]] = static_cast<int>(c % static_cast<std::size_t>(scheme.k));
    }
    plan.fold_count = scheme.k;
  }

  plan.fold_of.reserve(corpus.size());
  for (const auto& it : corpus.interactions()) {
    const int f = couple_fold.at(it.couple_id);
    plan.fold_of.push_back(f);
    plan.assignment.emplace(it.id, f);
  }
  return plan;
}

}  // namespace obswin
