#include "checkmate/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <string>

#include "checkmate/error.hpp"
#include "json.hpp"

namespace checkmate {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_binary(const std::vector<int>& labels, const char* what) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ValueError(std::string(what) + " label at index " +
                       std::to_string(i) + " is " +
                       std::to_string(labels[i]) + ", expected 0 or 1");
    }
  }
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

ConfusionMatrix confusion(const std::vector<int>& gold,
                          const std::vector<int>& pred) {
  if (gold.size() != pred.size()) {
    throw ShapeError("confusion: " + std::to_string(gold.size()) +
                     " gold labels vs " + std::to_string(pred.size()) +
                     " predictions");
  }
  if (gold.empty()) throw ValueError("confusion: no samples");
  check_binary(gold, "gold");
  check_binary(pred, "predicted");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == 1) {
      (pred[i] == 1 ? cm.tp : cm.fn) += 1;
    } else {
      (pred[i] == 1 ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

ClassMetrics prf1(const ConfusionMatrix& cm, int positive_class) {
  if (positive_class != 0 && positive_class != 1) {
    throw ValueError("prf1: class " + std::to_string(positive_class) +
                     " is not 0 or 1");
  }
  // Relabeling 0 as the positive class swaps tp<->tn and fp<->fn.
  long tp = positive_class == 1 ? cm.tp : cm.tn;
  long fp = positive_class == 1 ? cm.fp : cm.fn;
  long fn = positive_class == 1 ? cm.fn : cm.fp;
  ClassMetrics m;
  m.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
  m.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
  m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

double weighted_f1(const ConfusionMatrix& cm) {
  long pos = cm.tp + cm.fn;
  long neg = cm.tn + cm.fp;
  double f1_pos = prf1(cm, 1).f1;
  double f1_neg = prf1(cm, 0).f1;
  return safe_div(static_cast<double>(pos) * f1_pos +
                      static_cast<double>(neg) * f1_neg,
                  static_cast<double>(pos + neg));
}

EvalReport report(const std::vector<int>& gold_primary,
                  const std::vector<int>& pred_primary,
                  const std::vector<std::optional<LabelSet>>& gold_aux,
                  const std::vector<LabelSet>& pred_aux) {
  ConfusionMatrix cm = confusion(gold_primary, pred_primary);
  if (gold_aux.size() != gold_primary.size() ||
      pred_aux.size() != gold_primary.size()) {
    throw ShapeError("report: auxiliary rows (" +
                     std::to_string(gold_aux.size()) + " gold, " +
                     std::to_string(pred_aux.size()) +
                     " predicted) must match the " +
                     std::to_string(gold_primary.size()) + " primary labels");
  }

  EvalReport rep;
  rep.accuracy = static_cast<double>(cm.tp + cm.tn) /
                 static_cast<double>(cm.total());
  rep.check_worthy = prf1(cm, 1);
  rep.non_check_worthy = prf1(cm, 0);
  rep.macro_f1 = 0.5 * (rep.check_worthy.f1 + rep.non_check_worthy.f1);
  rep.weighted_f1 = weighted_f1(cm);

  for (std::size_t l = 0; l < kNumAuxLabels; ++l) {
    std::vector<int> g;
    std::vector<int> p;
    for (std::size_t i = 0; i < gold_aux.size(); ++i) {
      if (!gold_aux[i].has_value()) continue;
      g.push_back((*gold_aux[i])[l]);
      p.push_back(pred_aux[i][l]);
    }
    if (g.empty()) continue;  // no annotated rows: stays absent
    rep.aux_weighted_f1[l] = weighted_f1(confusion(g, p));
  }
  return rep;
}

std::string report_json(const EvalReport& report) {
  ordered_json obj;
  obj["accuracy"] = report.accuracy;
  obj["macro_f1"] = report.macro_f1;
  obj["weighted_f1"] = report.weighted_f1;
  ordered_json per_class;
  auto class_obj = [](const ClassMetrics& m) {
    ordered_json c;
    c["precision"] = m.precision;
    c["recall"] = m.recall;
    c["f1"] = m.f1;
    return c;
  };
  per_class["check_worthy"] = class_obj(report.check_worthy);
  per_class["non_check_worthy"] = class_obj(report.non_check_worthy);
  obj["per_class"] = per_class;
  ordered_json aux = ordered_json::object();
  for (std::size_t l = 0; l < kNumAuxLabels; ++l) {
    if (report.aux_weighted_f1[l].has_value()) {
      aux["L" + std::to_string(l + 1)] = *report.aux_weighted_f1[l];
    }
  }
  obj["aux_weighted_f1"] = aux;
  return obj.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "accuracy     " << fixed3(report.accuracy) << "\n";
  out << "macro F1     " << fixed3(report.macro_f1) << "\n";
  out << "weighted F1  " << fixed3(report.weighted_f1) << "\n";
  out << "\n";
  out << "class             precision  recall  f1\n";
  auto row = [&out](const char* name, const ClassMetrics& m) {
    out << name << fixed3(m.precision) << "      " << fixed3(m.recall)
        << "   " << fixed3(m.f1) << "\n";
  };
  row("check-worthy      ", report.check_worthy);
  row("non-check-worthy  ", report.non_check_worthy);
  bool any_aux = false;
  for (const auto& v : report.aux_weighted_f1) any_aux |= v.has_value();
  if (any_aux) {
    out << "\nauxiliary weighted F1\n";
    for (std::size_t l = 0; l < kNumAuxLabels; ++l) {
      out << "  L" << (l + 1) << "  ";
      if (report.aux_weighted_f1[l].has_value()) {
        out << fixed3(*report.aux_weighted_f1[l]);
      } else {
        out << "absent";
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace checkmate
