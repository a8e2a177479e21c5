#pragma once

#include <Eigen/Core>
#include <vector>

namespace cpgm {

// 1 - sqrt(2*n_train / (n_test + n_target)); the open-set difficulty measure.
double openness(int n_train, int n_test, int n_target);

// Square confusion matrix over K known classes plus a trailing unknown class.
// Rows are ground truth, columns predictions; label -1 maps to index K.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_known);
  void add(int truth, int predicted);
  const Eigen::MatrixXi& counts() const { return counts_; }
  int num_known() const { return num_known_; }

 private:
  int index_of(int label) const;
  int num_known_;
  Eigen::MatrixXi counts_;
};

struct F1Result {
  double macro = 0.0;
  std::vector<double> per_class;
};

// Unweighted mean of per-class F1 over all rows/columns (unknown included);
// a class with no predictions or no ground truth contributes F1 = 0.
F1Result macro_f1(const Eigen::MatrixXi& confusion);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& truth);

}  // namespace cpgm
