// Copyright 2026 The cytocascade Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cytocascade/common/io.hpp"
#include "cytocascade/eval/metrics.hpp"
#include "cytocascade/eval/plot.hpp"
#include "cytocascade/slide_store/png_codec.hpp"

namespace cyto::eval {

// Ground truth joined with one prediction record. Non-diagnostic slides
// carry no score and are left out of every metric.
struct SlideOutcome {
  std::string slide_id;
  int malignant = 0;
  int tbs = 2;
  bool diagnostic = true;
  double g_bar = 0.0;
  int tbs_hat = 2;
};

struct EvalReport {
  std::size_t slides = 0;
  std::size_t non_diagnostic = 0;
  std::optional<RocCurve> roc;  // absent when the diagnostic slides hold one class only
  std::optional<PrCurve> pr;
  ConfusionMatrix confusion;
  PuritySummary purity;
};

inline EvalReport evaluate(const std::vector<SlideOutcome>& outcomes) {
  EvalReport rep;
  rep.slides = outcomes.size();
  std::vector<double> scores;
  std::vector<int> labels, assigned, predicted;
  std::vector<LabeledPrediction> preds;
  std::map<std::string, int> truth;
  for (const auto& o : outcomes) {
    if (!o.diagnostic) {
      ++rep.non_diagnostic;
      continue;
    }
    scores.push_back(o.g_bar);
    labels.push_back(o.malignant);
    assigned.push_back(o.tbs);
    predicted.push_back(o.tbs_hat);
    preds.push_back({o.slide_id, o.tbs_hat});
    truth[o.slide_id] = o.malignant;
  }
  std::size_t pos = 0;
  for (int l : labels) pos += static_cast<std::size_t>(l);
  if (pos > 0 && pos < labels.size()) rep.roc = roc_auc(scores, labels);
  if (pos > 0) rep.pr = pr_ap(scores, labels);
  rep.confusion = tbs_confusion(assigned, predicted);
  rep.purity = screening_purity(preds, truth);
  return rep;
}

inline std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string("absent"); };
  os << "# cytocascade evaluation report\n"
     << "slides " << r.slides << "\n"
     << "non_diagnostic " << r.non_diagnostic << "\n"
     << "diagnostic " << (r.slides - r.non_diagnostic) << "\n"
     << "roc_auc " << (r.roc ? format_real(r.roc->auc) : "absent") << "\n"
     << "pr_ap " << (r.pr ? format_real(r.pr->ap) : "absent") << "\n"
     << "block_diagonal_mass " << format_real(r.confusion.block_diagonal_mass()) << "\n"
     << "purity_benign_tbs2 " << opt(r.purity.benign_at_2.purity) << "\n"
     << "purity_benign_tbs2_count " << r.purity.benign_at_2.count << "\n"
     << "purity_malignant_tbs6 " << opt(r.purity.malignant_at_6.purity) << "\n"
     << "purity_malignant_tbs6_count " << r.purity.malignant_at_6.count << "\n";
  for (int a = kTbsLow; a <= kTbsHigh; ++a) {
    os << "confusion_row_" << a;
    for (int p = kTbsLow; p <= kTbsHigh; ++p) os << " " << r.confusion.counts[a - kTbsLow][p - kTbsLow];
    os << "\n";
  }
  return os.str();
}

// Writes report.txt, roc.csv, pr.csv, confusion.csv, slides.csv and the
// roc.png / pr.png / confusion.png plots into `dir`.
inline void write_report(const fs::path& dir, const EvalReport& r, const std::vector<SlideOutcome>& outcomes) {
  fs::create_directories(dir);
  write_text_file(dir / "report.txt", format_report(r));

  std::ostringstream roc;
  roc << "fpr,tpr,threshold\n";
  if (r.roc) {
    for (std::size_t i = 0; i < r.roc->fpr.size(); ++i) {
      roc << format_real(r.roc->fpr[i]) << "," << format_real(r.roc->tpr[i]) << ","
          << (i == 0 ? std::string("inf") : format_real(r.roc->thresholds[i - 1])) << "\n";
    }
  }
  write_text_file(dir / "roc.csv", roc.str());

  std::ostringstream pr;
  pr << "recall,precision,threshold\n";
  if (r.pr) {
    for (std::size_t i = 0; i < r.pr->recall.size(); ++i) {
      pr << format_real(r.pr->recall[i]) << "," << format_real(r.pr->precision[i]) << ","
         << format_real(r.pr->thresholds[i]) << "\n";
    }
  }
  write_text_file(dir / "pr.csv", pr.str());

  std::ostringstream cm;
  cm << "assigned,predicted,count,column_normalized\n";
  const auto norm = r.confusion.column_normalized();
  for (int a = 0; a < kTbsCount; ++a) {
    for (int p = 0; p < kTbsCount; ++p) {
      cm << a + kTbsLow << "," << p + kTbsLow << "," << r.confusion.counts[a][p] << "," << format_real(norm[a][p])
         << "\n";
    }
  }
  write_text_file(dir / "confusion.csv", cm.str());

  std::ostringstream sl;
  sl << "slide_id,Y,S,status,g_bar,S_hat\n";
  for (const auto& o : outcomes) {
    sl << o.slide_id << "," << o.malignant << "," << o.tbs << ",";
    if (o.diagnostic) {
      sl << "ok," << format_real(o.g_bar) << "," << o.tbs_hat << "\n";
    } else {
      sl << "non-diagnostic,,\n";
    }
  }
  write_text_file(dir / "slides.csv", sl.str());

  write_png(dir / "roc.png", r.roc ? render_roc(*r.roc) : render_curve({"ROC  ABSENT", "FALSE POSITIVE RATE", "TPR", {}, true}));
  write_png(dir / "pr.png", r.pr ? render_pr(*r.pr) : render_curve({"PR  ABSENT", "RECALL", "PRECISION", {}, false}));
  write_png(dir / "confusion.png", render_confusion(r.confusion));
}

}  // namespace cyto::eval
