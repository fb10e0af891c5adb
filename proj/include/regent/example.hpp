#pragma once

#include <vector>

namespace regent {

// One encoded training example: feature activations in [0,1] (in practice
// 0/1 after one-hot encoding) plus a class index.
struct Example {
  std::vector<double> features;
  int label = 0;
};

using Examples = std::vector<Example>;

}  // namespace regent
