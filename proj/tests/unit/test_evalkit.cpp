#include <gtest/gtest.h>

#include <cmath>

#include "attrevo/error.hpp"
#include "attrevo/evalkit.hpp"
#include "attrevo/oracle.hpp"
#include "test_support.hpp"

namespace attrevo {
namespace {

using testing::set_of;

ScoreTable table_of(const std::vector<std::vector<double>>& rows, double t = 0.01) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return ScoreTable::create(rows.size(), rows.empty() ? 0 : rows[0].size(), flat, t);
}

TEST(Accuracy, PerfectAndTieBreak) {
  const auto perfect = table_of({{0.9, 0.1}, {0.2, 0.8}, {0.7, 0.3}});
  EXPECT_DOUBLE_EQ(accuracy(perfect, std::vector<int>{0, 1, 0}), 1.0);
  std::vector<std::vector<double>> flat(10, std::vector<double>(5, 0.25));
  std::vector<int> labels;
  for (int i = 0; i < 10; ++i) labels.push_back(i % 5);
  EXPECT_DOUBLE_EQ(accuracy(table_of(flat), labels), 0.2);
}

TEST(Accuracy, EmptyStoreThrows) {
  EXPECT_THROW((void)accuracy(ScoreTable::create(0, 2, {}, 0.01), std::vector<int>{}), Error);
}

TEST(Accuracy, InvariantUnderIncreasingTransform) {
  Rng rng(21);
  for (int n = 0; n < 100; ++n) {
    std::vector<std::vector<double>> rows(20, std::vector<double>(4));
    std::vector<std::vector<double>> warped = rows;
    std::vector<int> labels;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < 4; ++c) {
        rows[i][c] = rng.uniform() * 2 - 1;
        warped[i][c] = std::exp(3 * rows[i][c]) + 0.5;
      }
      labels.push_back(static_cast<int>(rng.below(4)));
    }
    EXPECT_DOUBLE_EQ(accuracy(table_of(rows), labels), accuracy(table_of(warped), labels));
  }
}

TEST(PerClass, CountsAndConfusion) {
  const auto t = table_of({{0.9, 0.1}, {0.6, 0.4}, {0.2, 0.8}});
  const std::vector<int> labels{0, 1, 1};
  const auto pc = per_class_accuracy(t, labels);
  EXPECT_DOUBLE_EQ(pc[0], 1.0);
  EXPECT_DOUBLE_EQ(pc[1], 0.5);
  const auto cm = confusion_matrix(t, labels);
  EXPECT_EQ(cm[0][0], 1u);
  EXPECT_EQ(cm[0][1], 0u);
  EXPECT_EQ(cm[1][0], 1u);
  EXPECT_EQ(cm[1][1], 1u);
  EXPECT_EQ(confusion_csv(cm), "label,pred_0,pred_1\n0,1,0\n1,1,1\n");
}

TEST(PerClass, ClassWithoutRowsIsNaN) {
  const auto pc = per_class_accuracy(table_of({{0.9, 0.1, 0.0}}), std::vector<int>{0});
  EXPECT_TRUE(std::isnan(pc[1]));
  EXPECT_TRUE(std::isnan(pc[2]));
}

TEST(Margin, HandCases) {
  const std::vector<double> p{0.5, 0.3, 0.2};
  std::vector<double> logits;
  for (double v : p) logits.push_back(std::log(v));
  EXPECT_NEAR(probability_margin(logits, 1.0), 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(probability_margin(std::vector<double>{0.4, 0.4, 0.4}, 0.01), 0.0);
  EXPECT_DOUBLE_EQ(probability_margin(std::vector<double>{1.0, -1.0}, 1e-4), 1.0);
  EXPECT_NEAR(margin(table_of({{std::log(0.5), std::log(0.3), std::log(0.2)}}, 1.0)), 0.2, 1e-12);
}

TEST(Margin, NonNegativeAndZeroOnlyOnTies) {
  Rng rng(31);
  for (int n = 0; n < 1000; ++n) {
    const std::size_t c = 2 + rng.below(6);
    std::vector<std::vector<double>> rows(1 + rng.below(8), std::vector<double>(c));
    for (auto& r : rows) {
      for (auto& v : r) v = rng.uniform() * 2 - 1;
    }
    const double m = margin(table_of(rows, 0.01 + rng.uniform()));
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
    EXPECT_GT(m, 0.0);
  }
}

TEST(Margin, NeedsTwoClasses) {
  EXPECT_THROW((void)margin(table_of({{0.3}})), Error);
}

class OracleAudit : public ::testing::Test {
 protected:
  OracleAudit()
      : world(OracleWorld::build({})),
        backend(world),
        embedder(backend, TemplateSet::single_default()),
        store(world.generate(30, SplitTag::Test)),
        scorer(store, embedder) {}
  OracleWorld world;
  OracleEmbeddingBackend backend;
  TextEmbedder embedder;
  EmbeddingStore store;
  Scorer scorer;
};

TEST_F(OracleAudit, TruthClassifierAccuracy) {
  EXPECT_GE(accuracy(world.truth_classifier(), scorer), 0.95);
  EXPECT_GT(margin(world.truth_classifier(), scorer, 0.01), 0.0);
}

TEST_F(OracleAudit, SharesSumToOneAndSingletonsGetAll) {
  std::vector<AttributeSet> sets;
  for (int c = 0; c < 5; ++c) {
    if (c == 0) {
      sets.push_back(dedup_raw(std::vector<std::string>{world.vocab()[100]}, 0));
    } else {
      sets.push_back(world.truth_set(static_cast<std::size_t>(c)));
    }
  }
  const auto audit = audit_report(Classifier(sets), scorer);
  ASSERT_EQ(audit.size(), 5u);
  EXPECT_DOUBLE_EQ(audit[0].attributes[0].share, 1.0);
  for (const auto& cls : audit) {
    double sum = 0;
    for (const auto& a : cls.attributes) {
      sum += a.share;
      EXPECT_NEAR(a.gap, a.own_mean - a.other_mean, 1e-12);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST_F(OracleAudit, OwnAndOtherMeansMatchDirectComputation) {
  const auto audit = audit_report(world.truth_classifier(), scorer);
  const auto& a = audit[2].attributes[1];
  const auto v = embedder.embed_text(a.text);
  double own = 0, other = 0;
  std::size_t no = 0, nt = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const double s = attribute_score(v, store.row(i));
    if (store.label(i) == 2) {
      own += s;
      ++no;
    } else {
      other += s;
      ++nt;
    }
  }
  EXPECT_NEAR(a.own_mean, own / no, 1e-9);
  EXPECT_NEAR(a.other_mean, other / nt, 1e-9);
}

TEST_F(OracleAudit, EqualOwnAndOtherMeansGiveZeroGap) {
  // Images identical across two classes make every attribute's gap zero.
  const auto one = testing::make_store(2, 2, SplitTag::Test, {{1, 1}, {1, 1}}, {0, 1});
  testing::TableBackend tb({{"a photo of p", {1, 0}}, {"a photo of q", {0.3f, 1}}});
  TextEmbedder e(tb, TemplateSet::single_default());
  Scorer s(one, e);
  const auto audit = audit_report(Classifier({set_of(0, {"p"}), set_of(1, {"q"})}), s);
  EXPECT_NEAR(audit[0].attributes[0].gap, 0.0, 1e-12);
  EXPECT_NEAR(audit[1].attributes[0].gap, 0.0, 1e-12);
}

TEST_F(OracleAudit, TruthAttributesOutDiscriminateInjectedDistractors) {
  for (std::size_t c = 0; c < 5; ++c) {
    std::vector<std::string> raw = world.ground_truth(c);
    std::vector<std::string> distractors;
    for (std::size_t i = 0; distractors.size() < 5; ++i) {
      if (!world.is_ground_truth(world.vocab()[i])) distractors.push_back(world.vocab()[i]);
    }
    raw.insert(raw.end(), distractors.begin(), distractors.end());
    std::vector<AttributeSet> sets;
    for (std::size_t k = 0; k < 5; ++k) {
      sets.push_back(k == c ? dedup_raw(raw, static_cast<int>(k)) : world.truth_set(k));
    }
    const auto audit = audit_report(Classifier(sets), scorer);
    double min_truth = INFINITY, max_distractor = -INFINITY;
    for (const auto& a : audit[c].attributes) {
      if (world.is_ground_truth(a.text)) {
        min_truth = std::min(min_truth, a.gap);
      } else {
        max_distractor = std::max(max_distractor, a.gap);
      }
    }
    EXPECT_GT(min_truth, max_distractor) << "class " << c;
  }
}

TEST_F(OracleAudit, JsonShape) {
  const auto j = audit_to_json(audit_report(world.truth_classifier(), scorer));
  const auto& classes = j.at("classes");
  ASSERT_EQ(classes.size(), 5u);
  const auto& first = classes[0].at("attributes")[0];
  for (const char* key : {"text", "own_mean", "other_mean", "gap", "share"}) EXPECT_TRUE(first.contains(key)) << key;
}

}  // namespace
}  // namespace attrevo
