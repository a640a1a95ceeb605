#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace ntks {

// Mixes a base seed with a stream index so that independent consumers
// (MC chunks, per-trial generators) get decorrelated engines.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  double normal();
  double uniform();                 // [0, 1)
  int uniform_int(int lo, int hi);  // inclusive bounds
  double rademacher();

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Eigen::VectorXd normal_vector(Eigen::Index size);
  Eigen::VectorXd unit_vector(Eigen::Index size);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ntks
