#pragma once

#include <cstdint>
#include <vector>

namespace spg::eval {

// Multinomial logistic regression on frozen feature vectors, full-batch
// Adam. Measures how linearly decodable a property is from the features.
struct ProbeResult {
  double accuracy = 0.0;
  double majority_baseline = 0.0;  // best constant-prediction accuracy on eval
  int train_count = 0, eval_count = 0;
};

ProbeResult train_linear_probe(const std::vector<std::vector<float>>& x_train,
                               const std::vector<int>& y_train,
                               const std::vector<std::vector<float>>& x_eval,
                               const std::vector<int>& y_eval, int classes, uint64_t seed,
                               int steps = 300, double lr = 0.05);

// Quartile edges (3 cut points) of a sample; used to bin F0 into classes.
std::vector<double> quartile_edges(std::vector<double> values);
int quartile_class(double v, const std::vector<double>& edges);

}  // namespace spg::eval
