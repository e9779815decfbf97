#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrevo/domain.hpp"
#include "attrevo/fitness.hpp"

namespace attrevo {

/// Fraction of rows whose predicted class equals the label (argmax, lowest
/// id on ties). Throws Error{EmptyDataset}.
double accuracy(const ScoreTable& table, std::span<const int> labels);
double accuracy(const Classifier& classifier, const Scorer& scorer);

/// Per class: correct / rows of that class (NaN for a class without rows).
std::vector<double> per_class_accuracy(const ScoreTable& table, std::span<const int> labels);

/// confusion[y][p]: rows with label y predicted as p.
std::vector<std::vector<std::size_t>> confusion_matrix(const ScoreTable& table, std::span<const int> labels);
std::string confusion_csv(const std::vector<std::vector<std::size_t>>& confusion);

/// Top-1 minus top-2 class probability for one score row.
double probability_margin(std::span<const double> scores, double temperature);

/// Mean top-1 minus runner-up class probability over rows; in [0, 1].
/// Throws Error{InvalidArgument} for fewer than two classes,
/// Error{EmptyDataset} for no rows.
double margin(const ScoreTable& table);
double margin(const Classifier& classifier, const Scorer& scorer, double temperature);

struct AttributeAudit {
  std::string text;
  double own_mean = 0.0;    // mean score on the class's own images
  double other_mean = 0.0;  // mean score on every other image
  double gap = 0.0;         // own_mean - other_mean
  double share = 0.0;       // normalized contribution to the class score
};

struct ClassAudit {
  int class_id = 0;
  std::vector<AttributeAudit> attributes;
};

/// Per-class attribute breakdown. Shares are each attribute's positive part
/// of own_mean over the set's total (uniform if no attribute scores above
/// zero), so they sum to 1.
std::vector<ClassAudit> audit_report(const Classifier& classifier, const Scorer& scorer);
nlohmann::json audit_to_json(const std::vector<ClassAudit>& audit);

}  // namespace attrevo
