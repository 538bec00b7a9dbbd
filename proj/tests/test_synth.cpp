#include "obswin/pipeline.hpp"
#include "obswin/synth.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace obswin;

namespace {

std::string jsonl(const Corpus& c) {
  std::ostringstream out;
  write_corpus(c, out);
  return out.str();
}

ErrorKind kind_of(const SynthSpec& s) {
  try {
    s.validate();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

SynthSpec span_spec() {
  SynthSpec s;
  s.behaviors = {{"quick", 3, 6.0, 1}, {"slow", 50, 0.3, 1}, {"null", 3, 0.0, 1}};
  s.vocab_size = 8;
  s.zipf_exponent = 0.0;
  s.variants = 1;
  s.charge_noise = 0.2;
  s.sessions = 240;
  s.couples = 24;
  s.words_min = 400;
  s.words_max = 800;
  s.seed = 3;
  return s;
}

}  // namespace

TEST(Synth, SameSeedSameBytes) {
  const auto spec = fixture::small_spec(77);
  const auto a = generate_corpus(spec);
  const auto b = generate_corpus(spec);
  EXPECT_EQ(jsonl(a.corpus), jsonl(b.corpus));
  EXPECT_EQ(truth_to_json(a.truth, a.corpus), truth_to_json(b.truth, b.corpus));
  EXPECT_NE(jsonl(a.corpus), jsonl(generate_corpus(fixture::small_spec(78)).corpus));
}

TEST(Synth, SessionsRespectTheConfiguredShape) {
  auto spec = fixture::small_spec(5, 90, 9);
  spec.behaviors.push_back({"silent", 4, 0.0, 1});
  const auto g = generate_corpus(spec);
  ASSERT_EQ(g.corpus.size(), 90u);
  EXPECT_EQ(g.corpus.couples().size(), 9u);
  EXPECT_EQ(g.truth.planted_span, (std::vector<int>{3, 3, 0}));
  EXPECT_GE(g.truth.latent.minCoeff(), 0.0);
  EXPECT_LE(g.truth.latent.maxCoeff(), 1.0);
  EXPECT_GE(g.corpus.rating_matrix().minCoeff(), 1.0);
  EXPECT_LE(g.corpus.rating_matrix().maxCoeff(), 9.0);
  for (const auto& it : g.corpus.interactions()) {
    EXPECT_GE(it.tokens.size(), 20u);
    EXPECT_LE(it.tokens.size(), 60u);
    std::size_t blame = 0, warmth = 0;
    for (const auto& t : it.tokens) {
      EXPECT_EQ(t.rfind("silent", 0), std::string::npos);
      blame += t.rfind("blame_", 0) == 0;
      warmth += t.rfind("warmth_", 0) == 0;
    }
    // Every episode is a peak plus two flanks of planted_span tokens each.
    EXPECT_EQ(blame % 9, 0u);
    EXPECT_EQ(warmth % 9, 0u);
  }
}

TEST(Synth, SpecJsonRoundTrip) {
  auto spec = fixture::small_spec(12);
  spec.blocks = {{{"blame", "warmth"}, 0.6}};
  spec.block_correlation = MatrixXd::Identity(1, 1);
  const auto text = synth_spec_to_json(spec);
  const auto back = synth_spec_from_json(text);
  EXPECT_EQ(synth_spec_to_json(back), text);
  EXPECT_EQ(jsonl(generate_corpus(back).corpus), jsonl(generate_corpus(spec).corpus));
  EXPECT_THROW(synth_spec_from_json("{"), Error);
  EXPECT_THROW(synth_spec_from_json(R"({"behaviors": [{"id": "a", "planted_span": 3}]})"), Error);
  EXPECT_THROW(synth_spec_from_json(R"({"behaviors": [{"id": "a"}], "sesions": 10})"), Error);
}

TEST(Synth, InvalidSpecs) {
  auto s = fixture::small_spec();
  s.behaviors[1].id = "blame";
  EXPECT_EQ(kind_of(s), ErrorKind::SpecInvalid);
  s = fixture::small_spec();
  s.behaviors[0].planted_span = 0;
  EXPECT_EQ(kind_of(s), ErrorKind::SpecInvalid);
  s = fixture::small_spec();
  s.couples = s.sessions + 1;
  EXPECT_EQ(kind_of(s), ErrorKind::SpecInvalid);
  s = fixture::small_spec();
  s.words_max = s.words_min - 1;
  EXPECT_EQ(kind_of(s), ErrorKind::SpecInvalid);
  s = fixture::small_spec();
  s.blocks = {{{"blame", "ghost"}, 0.5}};
  EXPECT_EQ(kind_of(s), ErrorKind::SpecInvalid);
  s = fixture::small_spec();
  s.blocks = {{{"blame"}, 0.5}, {{"warmth"}, 0.5}};
  s.block_correlation = (MatrixXd(2, 2) << 1.0, 1.5, 1.5, 1.0).finished();
  EXPECT_EQ(kind_of(s), ErrorKind::SpecInvalid);
}

TEST(Synth, PlantedSpansShapeTheBcsCurve) {
  const auto g = generate_corpus(span_spec());
  PipelineConfig c;
  c.folds = FoldScheme::kfold(6);
  c.grouping = false;
  const auto r = run_analysis(g.corpus, c);
  const double n = static_cast<double>(g.corpus.size());

  const auto& quick = r.verdicts[0];
  EXPECT_TRUE(quick.stage == Stage::Reference || quick.stage == Stage::BcsPeak) << to_string(quick.stage);
  EXPECT_EQ(quick.chosen_length, 3);

  // Extreme-value functionals isolate single episodes. The median instead
  // counts informative tokens over the whole session and favors short windows.
  for (auto f : {FunctionalKind::Minimum, FunctionalKind::Maximum}) {
    EXPECT_LT(r.bcs.at({"slow", 3, f}).rho, r.bcs.at({"slow", 50, f}).rho) << to_string(f);
  }

  for (int l : r.lengths) {
    EXPECT_LT(std::abs(r.bcs.at({"null", l, FunctionalKind::Median}).rho), 2.0 / std::sqrt(n)) << "L=" << l;
  }
}
