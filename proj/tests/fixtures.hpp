#pragma once

#include "obswin/metrics.hpp"
#include "obswin/synth.hpp"

#include <functional>

namespace fixture {

// Small planted corpus that trains in well under a second.
inline obswin::SynthSpec small_spec(std::uint64_t seed = 5, int sessions = 60, int couples = 6) {
  obswin::SynthSpec s;
  s.behaviors = {{"blame", 3, 2.0, 1}, {"warmth", 3, 2.0, -1}};
  s.vocab_size = 12;
  s.zipf_exponent = 0.0;
  s.sessions = sessions;
  s.couples = couples;
  s.words_min = 20;
  s.words_max = 60;
  s.variants = 1;
  s.seed = seed;
  return s;
}

inline obswin::Corpus small_corpus(std::uint64_t seed = 5, int sessions = 60, int couples = 6) {
  return obswin::generate_corpus(small_spec(seed, sessions, couples)).corpus;
}

// Flat trajectory: every functional returns value.
inline obswin::VectorXd plateau(double value, std::size_t windows) {
  return obswin::VectorXd::Constant(static_cast<Eigen::Index>(windows), value);
}

// Store holding plateau(value(b, l, i)) for every behavior, grid length index and interaction.
inline obswin::ScoreStore store_by_length(
    const obswin::Corpus& corpus, const std::function<double(std::size_t, std::size_t, std::size_t)>& value) {
  const obswin::WindowGrid grid;
  obswin::ScoreStore store(corpus.behaviors(), grid.lengths, corpus.size());
  for (std::size_t b = 0; b < corpus.behaviors().size(); ++b) {
    for (std::size_t l = 0; l < grid.lengths.size(); ++l) {
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto n = obswin::window_bounds(corpus.interactions()[i].tokens.size(), grid.lengths[l]).size();
        store.set(b, l, i, plateau(value(b, l, i), n));
      }
    }
  }
  return store;
}

inline obswin::ScoreStore store_from(const obswin::Corpus& corpus,
                                     const std::function<double(std::size_t, std::size_t)>& value) {
  return store_by_length(corpus, [&](std::size_t b, std::size_t, std::size_t i) { return value(b, i); });
}

}  // namespace fixture
