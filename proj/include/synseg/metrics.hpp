#pragma once

// Confusion matrices and intersection-over-union scores.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synseg/pcdcore.hpp"
#include "synseg/taxonomy.hpp"

namespace synseg {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(Taxonomy taxonomy);

  const Taxonomy& taxonomy() const { return taxonomy_; }
  std::size_t classes() const { return n_; }
  // Points with ground truth g predicted as p.
  std::uint64_t at(LabelId g, LabelId p) const { return counts_[g * n_ + p]; }
  std::uint64_t& at(LabelId g, LabelId p) { return counts_[g * n_ + p]; }

  // Points whose ground truth is unlabelled are skipped. Throws
  // InvalidArgument on length mismatch or out-of-range ids.
  void Accumulate(std::span<const LabelId> predicted, std::span<const LabelId> ground_truth);
  // Throws InvalidArgument if the taxonomies differ.
  void Merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    return a.taxonomy_.name() == b.taxonomy_.name() && a.counts_ == b.counts_;
  }

 private:
  Taxonomy taxonomy_;
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

// TP / (TP + FP + FN); nullopt when the denominator is zero. Class 0 is an
// InvalidArgument.
std::optional<double> Iou(const ConfusionMatrix& cm, LabelId c);

struct IouReport {
  std::string taxonomy;
  std::vector<LabelId> requested;
  // Parallel to `requested`.
  std::vector<std::optional<double>> per_class;
  // Classes with a defined IoU, i.e. those averaged into miou.
  std::vector<LabelId> scored;
  double miou = 0.0;
};

// Mean IoU over the defined members of `classes`. Throws DataError when none
// is defined and InvalidArgument for an empty or invalid class list.
IouReport MeanIou(const ConfusionMatrix& cm, std::span<const LabelId> classes);
// All classes except unlabelled.
IouReport MeanIou(const ConfusionMatrix& cm);

// Aligned text table.
std::string FormatReport(const IouReport& report, const Taxonomy& taxonomy);
// "class,iou" lines (empty iou for undefined) followed by "miou,<value>".
std::string FormatReportCsv(const IouReport& report, const Taxonomy& taxonomy);

// Resolves comma-separated class names (or ids) against a taxonomy.
std::vector<LabelId> ParseClassList(const std::string& text, const Taxonomy& taxonomy);

}  // namespace synseg
