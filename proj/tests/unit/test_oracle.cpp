#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "attrevo/error.hpp"
#include "attrevo/fitness.hpp"
#include "attrevo/mutation.hpp"
#include "attrevo/oracle.hpp"
#include "test_support.hpp"

namespace attrevo {
namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

TEST(OracleWorld, DefaultShape) {
  const auto w = OracleWorld::build({});
  EXPECT_EQ(w.vocab().size(), 500u);
  std::size_t gt = 0;
  for (const auto& v : w.vocab()) gt += w.is_ground_truth(v);
  EXPECT_EQ(gt, 25u);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(w.ground_truth(c).size(), 5u);
    for (const auto& t : w.ground_truth(c)) {
      EXPECT_TRUE(w.is_ground_truth(t));
      EXPECT_NEAR(dot(w.attribute_vector(t), w.attribute_vector(t)), 1.0, 1e-5);
    }
  }
  EXPECT_FALSE(w.is_ground_truth("not a vocab entry"));
}

TEST(OracleWorld, CrossClassTruthVectorsNearOrthogonal) {
  const auto w = OracleWorld::build({});
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = a + 1; b < 5; ++b) {
      for (const auto& ta : w.ground_truth(a)) {
        for (const auto& tb : w.ground_truth(b)) {
          EXPECT_LT(std::abs(dot(w.attribute_vector(ta), w.attribute_vector(tb))), 0.2);
        }
      }
    }
  }
}

TEST(OracleWorld, VocabIsDistinctTriples) {
  const auto w = OracleWorld::build({});
  std::set<std::string> seen(w.vocab().begin(), w.vocab().end());
  EXPECT_EQ(seen.size(), w.vocab().size());
  for (const auto& v : w.vocab()) EXPECT_EQ(std::count(v.begin(), v.end(), ' '), 2) << v;
}

TEST(OracleWorld, RejectsInconsistentParams) {
  OracleWorldParams p;
  p.classes = 1;
  EXPECT_THROW((void)OracleWorld::build(p), Error);
  p = {};
  p.vocab_size = 10;
  EXPECT_THROW((void)OracleWorld::build(p), Error);
  p = {};
  p.coherence = 1.0;
  EXPECT_THROW((void)OracleWorld::build(p), Error);
  p = {};
  p.min_margin = 5.0;
  EXPECT_THROW((void)OracleWorld::build(p), Error);
}

TEST(OracleGenerate, ZeroNoiseGivesIdenticalImagesPerClass) {
  OracleWorldParams p;
  p.noise_sigma = 0.0;
  const auto w = OracleWorld::build(p);
  const auto s = w.generate(6, SplitTag::Train);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t first = static_cast<std::size_t>(s.label(i)) * 6;
    for (std::size_t j = 0; j < s.dim(); ++j) EXPECT_EQ(s.row(i)[j], s.row(first)[j]);
  }
}

TEST(OracleGenerate, DeterministicPerSeedAndSplit) {
  const auto w = OracleWorld::build({});
  EXPECT_EQ(w.generate(10, SplitTag::Train), w.generate(10, SplitTag::Train));
  EXPECT_NE(w.generate(10, SplitTag::Train).data(), w.generate(10, SplitTag::Test).data());
  OracleWorldParams p;
  p.seed = 2;
  EXPECT_NE(OracleWorld::build(p).generate(10, SplitTag::Train).data(), w.generate(10, SplitTag::Train).data());
}

TEST(OracleGenerate, RowsAreUnitAndDistractorsUnlabeled) {
  const auto w = OracleWorld::build({});
  const auto s = w.generate(8, SplitTag::Test);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(l2_norm(s.row(i)), 1.0, 1e-6);
  const auto d = w.generate(4, SplitTag::Distractor);
  EXPECT_EQ(d.size(), 20u);
  for (int l : d.labels()) EXPECT_EQ(l, kDistractorLabel);
}

// Class score of each truth set, own images minus other images, measured with
// plain dot products on a fresh sample.
TEST(OracleGenerate, TruthSetMarginOnOwnImages) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    OracleWorldParams p;
    p.seed = seed;
    const auto w = OracleWorld::build(p);
    const auto s = w.generate(50, SplitTag::Test);
    for (std::size_t c = 0; c < 5; ++c) {
      double own = 0, other = 0;
      std::size_t no = 0, nt = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        double f = 0;
        for (const auto& t : w.ground_truth(c)) f += dot(w.attribute_vector(t), s.row(i));
        f /= 5.0;
        if (s.label(i) == static_cast<int>(c)) {
          own += f;
          ++no;
        } else {
          other += f;
          ++nt;
        }
      }
      EXPECT_GE(own / no - other / nt, 0.3) << "seed " << seed << " class " << c;
    }
  }
}

TEST(OracleGenerate, TruthBeatsRandomSetsOnJointLoss) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    OracleWorldParams p;
    p.seed = seed;
    const auto w = OracleWorld::build(p);
    OracleEmbeddingBackend backend(w);
    TextEmbedder embedder(backend, TemplateSet::single_default());
    const auto s = w.generate(20, SplitTag::Train);
    Scorer scorer(s, embedder);
    const JointObjective obj(scorer, 0.01);
    const double truth = obj.loss(w.truth_classifier());
    Rng rng(seed);
    for (int n = 0; n < 10; ++n) {
      std::vector<AttributeSet> sets;
      for (int c = 0; c < 5; ++c) {
        std::vector<std::string> raw;
        for (int k = 0; k < 10; ++k) raw.push_back(w.vocab()[rng.below(w.vocab().size())]);
        sets.push_back(dedup_raw(raw, c));
      }
      EXPECT_LT(truth, obj.loss(Classifier(sets)));
    }
  }
}

TEST(OracleWorld, SaveLoadRoundTrip) {
  testing::TempDir dir;
  OracleWorldParams p;
  p.seed = 4;
  p.dim = 48;
  const auto w = OracleWorld::build(p);
  w.save(dir / "world.json");
  const auto back = OracleWorld::load(dir / "world.json");
  EXPECT_EQ(back.vocab(), w.vocab());
  EXPECT_EQ(back.generate(3, SplitTag::Train), w.generate(3, SplitTag::Train));
  EXPECT_EQ(back.to_json(), w.to_json());
}

TEST(OracleBackend, TemplateTextMapsToContainedPhrase) {
  const auto w = OracleWorld::build({});
  OracleEmbeddingBackend backend(w);
  const std::string v = w.vocab()[3];
  const std::vector<std::string> in{"a photo of " + v, v, "a close-up photo showing " + v + "."};
  const auto out = backend.embed(in);
  const auto expected = w.attribute_vector(v);
  for (const auto& e : out) EXPECT_EQ(e, expected);
  // Unknown text is deterministic but unrelated.
  const std::vector<std::string> unk{"glowing violet fronds of mystery", "glowing violet fronds of mystery"};
  const auto u = backend.embed(unk);
  EXPECT_EQ(u[0], u[1]);
  EXPECT_NEAR(l2_norm(u[0]), 1.0, 1e-5);
}

std::string prompt_with(const std::vector<std::vector<std::string>>& sets) {
  std::vector<ScoredSet> h;
  double loss = static_cast<double>(sets.size());
  for (const auto& s : sets) h.push_back({dedup_raw(s, 0), loss--});
  return build_prompt(h, {}).text;
}

TEST(MockCompletion, FullKeepEchoesBestSet) {
  const auto w = OracleWorld::build({});
  MockCompletionClient mock(w.vocab(), MockPolicy::SampleBest, 1.0);
  std::vector<std::string> best(w.vocab().begin(), w.vocab().begin() + 10);
  const std::string prompt = prompt_with({{"other thing"}, best});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_EQ(mock.mock_complete(prompt, seed), testing::numbered(best));
  }
}

TEST(MockCompletion, DeterministicForPromptAndSeed) {
  const auto w = OracleWorld::build({});
  MockCompletionClient mock(w.vocab(), MockPolicy::SampleBest);
  const std::string prompt = prompt_with({{w.vocab()[0], w.vocab()[1]}});
  EXPECT_EQ(mock.mock_complete(prompt, 7), mock.mock_complete(prompt, 7));
  bool differs = false;
  for (std::uint64_t s = 8; s < 20; ++s) differs |= mock.mock_complete(prompt, s) != mock.mock_complete(prompt, 7);
  EXPECT_TRUE(differs);
}

TEST(MockCompletion, OutputIsAValidBoundedList) {
  const auto w = OracleWorld::build({});
  for (MockPolicy policy : {MockPolicy::KeepBestLines, MockPolicy::SampleBest, MockPolicy::InContext}) {
    MockCompletionClient mock(w.vocab(), policy, 0.7, 10);
    const std::string prompt = prompt_with({{w.vocab()[5]}, {w.vocab()[0], w.vocab()[1], w.vocab()[2]}});
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto attrs = parse_attributes(mock.mock_complete(prompt, seed));
      EXPECT_GE(attrs.size(), 1u);
      EXPECT_LE(attrs.size(), 10u);
      for (const auto& a : attrs) EXPECT_NE(std::find(w.vocab().begin(), w.vocab().end(), a.text()), w.vocab().end());
    }
  }
}

TEST(MockCompletion, ProposesAGivenTruthAttributeWithin1000Calls) {
  const auto w = OracleWorld::build({});
  MockCompletionClient mock(w.vocab(), MockPolicy::SampleBest);
  const std::string target = w.ground_truth(3)[2];
  const std::string prompt = prompt_with({{"dull", "plain"}});
  std::size_t hits = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::string out = mock.mock_complete(prompt, seed);
    hits += out.find(". " + target + "\n") != std::string::npos;
  }
  EXPECT_GE(hits, 1u);
}

TEST(MockCompletion, InContextKeepsLinesSeenInMoreSets) {
  const auto w = OracleWorld::build({});
  MockCompletionClient mock(w.vocab(), MockPolicy::InContext, 0.5);
  const std::string common = w.vocab()[0], rare = w.vocab()[1];
  const std::string prompt =
      prompt_with({{common, w.vocab()[10]}, {common, w.vocab()[11]}, {common, w.vocab()[12]}, {common, rare}});
  std::size_t keep_common = 0, keep_rare = 0;
  const int n = 4000;
  for (int seed = 0; seed < n; ++seed) {
    const auto attrs = parse_attributes(mock.mock_complete(prompt, static_cast<std::uint64_t>(seed)));
    // Kept lines come first; fresh samples can also hit these words, but only rarely.
    keep_common += !attrs.empty() && attrs[0].text() == common;
    keep_rare += std::find_if(attrs.begin(), attrs.end(), [&](const Attribute& a) { return a.text() == rare; }) !=
                 attrs.end();
  }
  // 1 - 0.5^4 = 0.9375 versus 0.5.
  EXPECT_NEAR(static_cast<double>(keep_common) / n, 0.9375, 0.02);
  EXPECT_NEAR(static_cast<double>(keep_rare) / n, 0.5, 0.03);
}

TEST(MockCompletion, PolicyNamesRoundTrip) {
  for (MockPolicy p : {MockPolicy::KeepBestLines, MockPolicy::SampleBest, MockPolicy::InContext}) {
    EXPECT_EQ(mock_policy_from_string(to_string(p)), p);
  }
  EXPECT_THROW((void)mock_policy_from_string("oracle"), Error);
}

}  // namespace
}  // namespace attrevo
