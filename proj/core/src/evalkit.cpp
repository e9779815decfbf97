#include "attrevo/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attrevo/error.hpp"

namespace attrevo {

namespace {

void check_labels(const ScoreTable& table, std::span<const int> labels) {
  if (table.rows() == 0) throw Error(Errc::EmptyDataset, "no rows to evaluate");
  if (labels.size() != table.rows()) throw Error(Errc::ShapeMismatch, "labels do not match score rows");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= table.classes()) {
      throw Error(Errc::LabelOutOfRange, "evaluation needs labels in [0, C)");
    }
  }
}

}  // namespace

double accuracy(const ScoreTable& table, std::span<const int> labels) {
  check_labels(table, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    correct += argmax(table.row(i)) == static_cast<std::size_t>(labels[i]) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(table.rows());
}

double accuracy(const Classifier& classifier, const Scorer& scorer) {
  return accuracy(scorer.score_table(classifier, kDefaultScoreTemperature), scorer.store().labels());
}

std::vector<double> per_class_accuracy(const ScoreTable& table, std::span<const int> labels) {
  const auto confusion = confusion_matrix(table, labels);
  std::vector<double> out;
  for (std::size_t y = 0; y < confusion.size(); ++y) {
    std::size_t total = 0;
    for (std::size_t n : confusion[y]) total += n;
    out.push_back(total == 0 ? std::numeric_limits<double>::quiet_NaN()
                             : static_cast<double>(confusion[y][y]) / static_cast<double>(total));
  }
  return out;
}

std::vector<std::vector<std::size_t>> confusion_matrix(const ScoreTable& table, std::span<const int> labels) {
  check_labels(table, labels);
  std::vector<std::vector<std::size_t>> m(table.classes(), std::vector<std::size_t>(table.classes(), 0));
  for (std::size_t i = 0; i < table.rows(); ++i) {
    ++m[static_cast<std::size_t>(labels[i])][argmax(table.row(i))];
  }
  return m;
}

std::string confusion_csv(const std::vector<std::vector<std::size_t>>& confusion) {
  std::string out = "label";
  for (std::size_t p = 0; p < confusion.size(); ++p) out += ",pred_" + std::to_string(p);
  out += "\n";
  for (std::size_t y = 0; y < confusion.size(); ++y) {
    out += std::to_string(y);
    for (std::size_t n : confusion[y]) out += "," + std::to_string(n);
    out += "\n";
  }
  return out;
}

double probability_margin(std::span<const double> scores, double temperature) {
  if (scores.size() < 2) throw Error(Errc::InvalidArgument, "margin needs at least two classes");
  auto p = class_probabilities(scores, temperature);
  std::partial_sort(p.begin(), p.begin() + 2, p.end(), std::greater<>());
  return std::max(0.0, p[0] - p[1]);
}

double margin(const ScoreTable& table) {
  if (table.classes() < 2) throw Error(Errc::InvalidArgument, "margin needs at least two classes");
  if (table.rows() == 0) throw Error(Errc::EmptyDataset, "no rows to evaluate");
  std::vector<double> gaps(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) gaps[i] = probability_margin(table.row(i), table.temperature());
  return mean(gaps);
}

double margin(const Classifier& classifier, const Scorer& scorer, double temperature) {
  return margin(scorer.score_table(classifier, temperature));
}

std::vector<ClassAudit> audit_report(const Classifier& classifier, const Scorer& scorer) {
  const EmbeddingStore& store = scorer.store();
  std::vector<ClassAudit> report;
  for (std::size_t c = 0; c < classifier.class_count(); ++c) {
    ClassAudit audit;
    audit.class_id = static_cast<int>(c);
    double positive_total = 0.0;
    for (const Attribute& a : classifier.set(c).attributes()) {
      const auto column = scorer.attribute_scores(a);
      std::vector<double> own, other;
      for (std::size_t i = 0; i < store.size(); ++i) {
        (store.label(i) == static_cast<int>(c) ? own : other).push_back((*column)[i]);
      }
      AttributeAudit entry;
      entry.text = a.text();
      entry.own_mean = own.empty() ? 0.0 : mean(own);
      entry.other_mean = other.empty() ? 0.0 : mean(other);
      entry.gap = entry.own_mean - entry.other_mean;
      positive_total += std::max(0.0, entry.own_mean);
      audit.attributes.push_back(entry);
    }
    const double n = static_cast<double>(audit.attributes.size());
    for (auto& entry : audit.attributes) {
      entry.share = positive_total > 0.0 ? std::max(0.0, entry.own_mean) / positive_total : 1.0 / n;
    }
    report.push_back(std::move(audit));
  }
  return report;
}

nlohmann::json audit_to_json(const std::vector<ClassAudit>& audit) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : audit) {
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& a : c.attributes) {
      attrs.push_back({{"text", a.text},
                       {"own_mean", a.own_mean},
                       {"other_mean", a.other_mean},
                       {"gap", a.gap},
                       {"share", a.share}});
    }
    classes.push_back({{"class_id", c.class_id}, {"attributes", attrs}});
  }
  return nlohmann::json{{"classes", classes}};
}

}  // namespace attrevo
