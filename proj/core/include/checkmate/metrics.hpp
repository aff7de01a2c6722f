#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "checkmate/dataset.hpp"

namespace checkmate {

// Binary confusion counts with class 1 as the positive class.
struct ConfusionMatrix {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;

  long total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Exact counts over aligned 0/1 label sequences. ShapeError on length
// mismatch, ValueError on empty input or labels outside {0, 1}.
ConfusionMatrix confusion(const std::vector<int>& gold,
                          const std::vector<int>& pred);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// P/R/F1 for the chosen class view (0 or 1). Any zero denominator
// yields 0.0 for that quantity.
ClassMetrics prf1(const ConfusionMatrix& cm, int positive_class);

// Support-weighted mean of the two class F1 scores, supports from gold.
double weighted_f1(const ConfusionMatrix& cm);

struct EvalReport {
  double accuracy = 0.0;
  ClassMetrics check_worthy;      // class 1
  ClassMetrics non_check_worthy;  // class 0
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  // Weighted F1 of each auxiliary label's binary task over the records
  // that carry auxiliary gold; absent when no record does.
  std::array<std::optional<double>, 6> aux_weighted_f1;
};

// Full evaluation: primary accuracy, both class views, macro/weighted
// F1 (support-weighted from gold), and per-label auxiliary weighted F1
// restricted to rows with auxiliary gold.
EvalReport report(const std::vector<int>& gold_primary,
                  const std::vector<int>& pred_primary,
                  const std::vector<std::optional<LabelSet>>& gold_aux,
                  const std::vector<LabelSet>& pred_aux);

// Machine-readable rendering. Fields: accuracy, macro_f1, weighted_f1,
// per_class.{check_worthy,non_check_worthy}.{precision,recall,f1},
// aux_weighted_f1.{L1..L6} (absent labels omitted).
std::string report_json(const EvalReport& report);

// Fixed-width table for terminals, one row per class plus a line of
// auxiliary weighted F1 scores.
std::string report_table(const EvalReport& report);

}  // namespace checkmate
