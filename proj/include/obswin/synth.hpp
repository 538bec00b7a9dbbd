#pragma once

#include "obswin/corpus.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace obswin {

struct SynthBehavior {
  std::string id;
  int planted_span = 3;          // words in one expression peak
  double expression_rate = 0.2;  // episodes per 100 words; 0 plants nothing
  int polarity = 1;              // -1: higher ratings push the charge down
};

// Behaviors sharing a block draw their latents from one common factor.
struct SynthBlock {
  std::vector<std::string> members;
  double within = 0.7;  // latent correlation between members
};

struct SynthSpec {
  std::vector<SynthBehavior> behaviors;
  int vocab_size = 2000;
  int sessions = 200;
  int words_min = 50;
  int words_max = 2500;
  int couples = 20;
  std::vector<SynthBlock> blocks;
  MatrixXd block_correlation;  // empty: independent block factors
  std::uint64_t seed = 1;
  int k_max = 9;
  double rating_noise = 0.5;
  int levels = 9;              // charge levels per behavior
  int variants = 3;            // interchangeable tokens per level
  double charge_noise = 0.4;   // per-token charge noise at span 3
  double noise_growth = 0.5;   // charge noise scales with (span / 3)^noise_growth
  double zipf_exponent = 1.0;

  void validate() const;
};

SynthSpec synth_spec_from_json(std::string_view text);
std::string synth_spec_to_json(const SynthSpec& spec);

struct PlantedTruth {
  std::vector<std::string> behaviors;
  std::vector<int> planted_span;  // 0 for behaviors with nothing planted
  MatrixXd latent;                // row per interaction, column per behavior, in [0, 1]
};

struct SynthResult {
  Corpus corpus;
  PlantedTruth truth;
};

// Each session is one interaction. An expression episode is a peak of
// planted_span tokens whose charge tracks the session latent, between two
// flanks of the same length whose charge is uniform noise. Episodes never
// overlap; background words from a Zipf distribution fill the gaps. Windows
// shorter than the peak see a noisy fragment, longer ones average in flank noise.
SynthResult generate_corpus(const SynthSpec& spec);

std::string truth_to_json(const PlantedTruth& truth, const Corpus& corpus);

}  // namespace obswin
