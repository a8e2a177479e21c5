#include "cpgm/metrics.hpp"

#include <cmath>

#include "cpgm/errors.hpp"

namespace cpgm {

double openness(int n_train, int n_test, int n_target) {
  if (n_train < 1) throw DomainError("openness: n_train >= 1 required");
  if (n_test + n_target <= 0) throw DomainError("openness: n_test + n_target must be positive");
  return 1.0 - std::sqrt(2.0 * n_train / static_cast<double>(n_test + n_target));
}

ConfusionMatrix::ConfusionMatrix(int num_known) : num_known_(num_known) {
  if (num_known < 1) throw ContractError("ConfusionMatrix: at least one known class");
  counts_ = Eigen::MatrixXi::Zero(num_known + 1, num_known + 1);
}

int ConfusionMatrix::index_of(int label) const {
  if (label == -1) return num_known_;
  if (label < 0 || label > num_known_) {
    throw ContractError("ConfusionMatrix: label " + std::to_string(label) + " out of range");
  }
  return label;
}

void ConfusionMatrix::add(int truth, int predicted) {
  counts_(index_of(truth), index_of(predicted)) += 1;
}

F1Result macro_f1(const Eigen::MatrixXi& confusion) {
  if (confusion.rows() != confusion.cols() || confusion.rows() < 1) {
    throw ContractError("macro_f1: square confusion matrix required");
  }
  if ((confusion.array() < 0).any()) {
    throw ContractError("macro_f1: negative confusion counts");
  }
  const Eigen::Index k = confusion.rows();
  F1Result out;
  out.per_class.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    const double tp = confusion(c, c);
    const double fp = confusion.col(c).sum() - tp;
    const double fn = confusion.row(c).sum() - tp;
    double f1 = 0.0;
    if (tp + fp > 0.0 && tp + fn > 0.0) {
      const double precision = tp / (tp + fp);
      const double recall = tp / (tp + fn);
      if (precision + recall > 0.0) f1 = 2.0 * precision * recall / (precision + recall);
    }
    out.per_class.push_back(f1);
    out.macro += f1;
  }
  out.macro /= static_cast<double>(k);
  return out;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& truth) {
  if (predictions.size() != truth.size() || predictions.empty()) {
    throw ContractError("accuracy: prediction/truth size mismatch or empty");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace cpgm
