#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ntks/errors.hpp"
#include "ntks/spectral.hpp"

namespace ntks {

enum class ActivationKind { Softplus, Identity, Tanh };

// Scalar nonlinearity together with a constant B bounding |phi'| and |phi''|.
struct Activation {
  ActivationKind kind = ActivationKind::Softplus;
  double B = 1.0;

  static Activation softplus() { return {ActivationKind::Softplus, 1.0}; }
  static Activation identity() { return {ActivationKind::Identity, 1.0}; }
  static Activation tanh() { return {ActivationKind::Tanh, 2.0}; }
  static Activation parse(const std::string& name);

  std::string name() const;
  double phi(double z) const;
  double dphi(double z) const;
  double ddphi(double z) const;
};

// f(x) = V phi(W x) with W: k x d, V: K x k.
struct ShallowNet {
  Mat W;
  Mat V;
  Activation activation;

  Index k() const { return W.rows(); }
  Index d() const { return W.cols(); }
  Index K() const { return V.rows(); }
};

// Output vectors are laid out in per-class blocks: entry (l, i) sits at l * n + i.
Vec forward_concat(const ShallowNet& net, const Mat& X);
// K x n matrix of outputs, column i = f(x_i).
Mat forward_matrix(const ShallowNet& net, const Mat& X);

// Rows follow the per-class layout; columns follow vect(W), the rows of W
// concatenated (column s * d + j holds W(s, j)).
Mat jacobian_dense(const ShallowNet& net, const Mat& X);
// mat(J^T u) = sum_l diag(v_l) phi'(W X^T) diag(u_l) X, without forming J.
Mat vjp(const ShallowNet& net, const Mat& X, const Vec& u);
// J vect(dW).
Vec jvp(const ShallowNet& net, const Mat& X, const Mat& dW);
// Jacobian with respect to vect(V) (rows of V concatenated): K x K block
// diagonal with blocks phi(X W^T).
Mat output_jacobian(const ShallowNet& net, const Mat& X);
// [J(V) J(W)].
Mat combined_jacobian(const ShallowNet& net, const Mat& X);

double loss(const ShallowNet& net, const Mat& X, const Vec& y);
ShallowNet gd_step(const ShallowNet& net, const Mat& X, const Vec& y, double eta);

// Matrix phi'(X W^T), n x k.
Mat activation_derivatives(const ShallowNet& net, const Mat& X);

struct TrajectoryRecord {
  int iter = 0;
  double loss = 0.0;
  double residual_norm = 0.0;
  double dist_fro = 0.0;
  double dist_2inf = 0.0;
  std::optional<double> proj_info;
  std::optional<double> proj_nuisance;
  std::optional<double> heldout_error;
};

struct TrajectoryLog {
  std::vector<TrajectoryRecord> records;
};

using TrainObserver = std::function<void(int iter, const ShallowNet& net, const Vec& residual)>;

struct TrainOptions {
  int stride = 1;
  const InfoNuisanceSplit* split = nullptr;
  std::function<double(const ShallowNet&)> heldout_error;
  std::vector<TrainObserver> observers;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, TrajectoryLog partial)
      : Error(ErrorCode::Divergence, what), log_(std::move(partial)) {}
  const TrajectoryLog& partial_log() const { return log_; }

 private:
  TrajectoryLog log_;
};

// Runs T full-batch steps on W. Records iteration 0, every stride-th
// iteration and the final one; observers see every logged iteration.
// Throws DivergenceError once ||r_t|| exceeds 1e8 ||r_0||.
std::pair<ShallowNet, TrajectoryLog> train(const ShallowNet& net, const Mat& X, const Vec& y,
                                           double eta, int T, const TrainOptions& opts = {});

// V entries are +-nu/sqrt(kK) with random signs; W entries are N(0, 1).
ShallowNet init_random(Index k, Index d, Index K, double nu, std::uint64_t seed,
                       Activation act = Activation::softplus());

// Output scale that bounds the initial output by nu * ||y|| with high
// probability: nu ||y|| / (50 B sqrt(log(2K) n)), for use with init_random.
double bounded_output_scale(double nu, double y_norm, double B, Index K, Index n);

double max_row_norm(const Mat& A);

// Reorders a per-class vector (l * n + i) to per-sample layout (i * K + l) and back.
Vec per_class_to_per_sample(const Vec& v, Index n, Index K);
Vec per_sample_to_per_class(const Vec& v, Index n, Index K);

}  // namespace ntks
