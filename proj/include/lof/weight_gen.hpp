#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lof/common.hpp"
#include "lof/gaussian.hpp"

namespace lof {

/// Likelihood of an innovation under N(0, S).
double exact_likelihood(const Eigen::Vector2d& innovation,
                        const Eigen::Matrix2d& s);

/// Parameters of the 3 -> 32 -> 32 -> 1 weight generator (tanh hidden
/// layers, softplus output). Biases are stored as n x 1 matrices so every
/// tensor is handled uniformly.
struct MlpParams {
  Eigen::MatrixXd w1, b1, w2, b2, w3, b3;

  static constexpr int kIn = 3;
  static constexpr int kHidden = 32;

  static MlpParams zeros();
  /// Glorot-uniform weights, zero biases, seeded.
  static MlpParams glorot(std::uint64_t seed);

  std::array<Eigen::MatrixXd*, 6> tensors() {
    return {&w1, &b1, &w2, &b2, &w3, &b3};
  }
  std::array<const Eigen::MatrixXd*, 6> tensors() const {
    return {&w1, &b1, &w2, &b2, &w3, &b3};
  }
  static std::array<const char*, 6> tensor_names() {
    return {"w1", "b1", "w2", "b2", "w3", "b3"};
  }

  void set_zero();
  bool same_shape(const MlpParams& o) const;
  double squared_norm() const;
};

/// Reverse-mode tape over vector-valued nodes. Node values are recorded at
/// execution; backward() accumulates parameter adjoints into the gradient
/// sinks registered with param(). A tape belongs to one thread.
class GradTape {
 public:
  enum class Op {
    kConstant,
    kParam,
    kAdd,
    kMul,
    kTanh,
    kSigmoid,
    kSoftplus,
    kLog,
    kReciprocal,
    kMatVec,
    kLogDet2x2,
    kQuadForm2x2,
  };

  int constant(const Eigen::VectorXd& v);
  int scalar(double v);
  /// Parameter leaf; `grad` may be null when gradients are not needed.
  int param(const Eigen::MatrixXd& value, Eigen::MatrixXd* grad);

  int add(int a, int b);
  int mul(int a, int b);
  int tanh_node(int a);
  int sigmoid_node(int a);
  int softplus_node(int a);
  int log_node(int a);
  int reciprocal_node(int a);
  /// y = W x where `w` is a param node holding a rows x cols matrix.
  int matvec(int w, int x);
  /// log det of a 2x2 matrix given row-major as a 4-vector node.
  int logdet2x2(int m);
  /// v^T M^-1 v for a 2-vector node and a row-major 2x2 matrix node.
  int quadform2x2(int v, int m);

  const Eigen::VectorXd& value(int id) const { return nodes_[id].value; }
  double scalar_value(int id) const { return nodes_[id].value(0); }
  int size() const { return static_cast<int>(nodes_.size()); }
  bool empty() const { return nodes_.empty(); }
  void clear();

  /// Reverse sweep from a single output node.
  void backward(int output, const Eigen::VectorXd& upstream);
  void backward(int output, double upstream);
  /// Reverse sweep with several seeded outputs (one pass).
  void backward_multi(const std::vector<std::pair<int, double>>& seeds);

  /// Recomputes every node from the leaves and checks bit-identity with the
  /// recorded values.
  bool replay_matches() const;

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int rows = 0;  // for kParam / kMatVec weight shape
    int cols = 0;
    Eigen::VectorXd value;
    Eigen::VectorXd adjoint;
    Eigen::MatrixXd* grad_sink = nullptr;
  };

  int push(Node n);
  Eigen::VectorXd compute(const Node& n,
                          const std::vector<Eigen::VectorXd>& vals) const;
  void sweep();

  std::vector<Node> nodes_;
};

/// Param nodes for one forward pass; lets several forwards in a step share
/// the same parameter leaves.
struct MlpTapeBindings {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1, w3 = -1, b3 = -1;
};

MlpTapeBindings bind_mlp_params(GradTape& tape, const MlpParams& params,
                                MlpParams* grads);

/// Records the network forward pass on the tape and returns the output
/// node id (a strictly positive scalar).
int mlp_forward_node(GradTape& tape, const MlpTapeBindings& binds,
                     double pdf_value, const Eigen::Vector2d& innovation);

/// Convenience forward: binds, records and evaluates in one call. When
/// pass_through is true the tape is not touched and pdf_value is returned
/// unchanged (test harness contract).
double mlp_forward(const MlpParams& params, double pdf_value,
                   const Eigen::Vector2d& innovation, GradTape& tape,
                   bool pass_through = false);

/// Local weight: learned likelihood times the previous fusion weight.
double local_weight(double likelihood, double prev_fusion_weight);

/// Checkpoint serialization (text, 17 significant digits). The header
/// records the architecture and a configuration hash.
void save_checkpoint(const std::string& path, const MlpParams& params,
                     const std::string& config_hash);
struct Checkpoint {
  MlpParams params;
  std::string config_hash;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lof
