#include "synseg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "synseg/errors.hpp"

namespace synseg {

ConfusionMatrix::ConfusionMatrix(Taxonomy taxonomy)
    : taxonomy_(std::move(taxonomy)), n_(taxonomy_.size()), counts_(n_ * n_, 0) {
  if (n_ == 0) throw InvalidArgument("confusion matrix needs a non-empty taxonomy");
}

void ConfusionMatrix::Accumulate(std::span<const LabelId> predicted, std::span<const LabelId> ground_truth) {
  if (predicted.size() != ground_truth.size()) {
    throw InvalidArgument("prediction/ground-truth length mismatch: " + std::to_string(predicted.size()) + " vs " +
                          std::to_string(ground_truth.size()));
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const LabelId g = ground_truth[i], p = predicted[i];
    if (g >= n_ || p >= n_) {
      throw InvalidArgument("label id " + std::to_string(std::max(g, p)) + " outside taxonomy '" + taxonomy_.name() +
                            "'");
    }
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (ground_truth[i] == kUnlabelled) continue;
    ++counts_[ground_truth[i] * n_ + predicted[i]];
  }
}

void ConfusionMatrix::Merge(const ConfusionMatrix& other) {
  if (other.taxonomy_ != taxonomy_) throw InvalidArgument("cannot merge confusion matrices of different taxonomies");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::optional<double> Iou(const ConfusionMatrix& cm, LabelId c) {
  if (c == kUnlabelled) throw InvalidArgument("the unlabelled class is never scored");
  if (c >= cm.classes()) throw InvalidArgument("class id " + std::to_string(c) + " outside taxonomy");
  const std::uint64_t tp = cm.at(c, c);
  std::uint64_t fp = 0, fn = 0;
  for (LabelId k = 0; k < cm.classes(); ++k) {
    if (k == c) continue;
    fp += cm.at(k, c);
    fn += cm.at(c, k);
  }
  const std::uint64_t denom = tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

IouReport MeanIou(const ConfusionMatrix& cm, std::span<const LabelId> classes) {
  if (classes.empty()) throw InvalidArgument("mIoU needs at least one class");
  IouReport r;
  r.taxonomy = cm.taxonomy().name();
  double sum = 0.0;
  for (LabelId c : classes) {
    const auto v = Iou(cm, c);
    r.requested.push_back(c);
    r.per_class.push_back(v);
    if (v) {
      r.scored.push_back(c);
      sum += *v;
    }
  }
  if (r.scored.empty()) throw DataError("mIoU undefined: no scored class occurs in ground truth or predictions");
  r.miou = sum / static_cast<double>(r.scored.size());
  return r;
}

IouReport MeanIou(const ConfusionMatrix& cm) {
  std::vector<LabelId> all;
  for (LabelId c = 1; c < cm.classes(); ++c) all.push_back(c);
  return MeanIou(cm, all);
}

std::string FormatReport(const IouReport& report, const Taxonomy& taxonomy) {
  std::size_t width = 5;
  for (LabelId c : report.requested) width = std::max(width, taxonomy.at(c).name.size());
  std::ostringstream out;
  char buf[64];
  out << "class" << std::string(width - 5 + 2, ' ') << "IoU\n";
  for (std::size_t i = 0; i < report.requested.size(); ++i) {
    const std::string& name = taxonomy.at(report.requested[i]).name;
    out << name << std::string(width - name.size() + 2, ' ');
    if (report.per_class[i]) {
      std::snprintf(buf, sizeof buf, "%.4f", *report.per_class[i]);
      out << buf << "\n";
    } else {
      out << "undefined (excluded)\n";
    }
  }
  std::snprintf(buf, sizeof buf, "%.4f", report.miou);
  out << "mIoU" << std::string(width - 4 + 2, ' ') << buf << "  (" << report.scored.size() << " of "
      << report.requested.size() << " classes)\n";
  return out.str();
}

std::string FormatReportCsv(const IouReport& report, const Taxonomy& taxonomy) {
  std::ostringstream out;
  char buf[64];
  for (std::size_t i = 0; i < report.requested.size(); ++i) {
    out << taxonomy.at(report.requested[i]).name << ",";
    if (report.per_class[i]) {
      std::snprintf(buf, sizeof buf, "%.17g", *report.per_class[i]);
      out << buf;
    }
    out << "\n";
  }
  std::snprintf(buf, sizeof buf, "%.17g", report.miou);
  out << "miou," << buf << "\n";
  return out.str();
}

std::vector<LabelId> ParseClassList(const std::string& text, const Taxonomy& taxonomy) {
  std::vector<LabelId> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
    if (std::all_of(item.begin(), item.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      const unsigned long id = std::stoul(item);
      if (id >= taxonomy.size()) throw InvalidArgument("class id " + item + " outside taxonomy '" + taxonomy.name() + "'");
      out.push_back(static_cast<LabelId>(id));
    } else {
      out.push_back(taxonomy.IdOf(item));
    }
  }
  if (out.empty()) throw InvalidArgument("empty class list");
  return out;
}

}  // namespace synseg
