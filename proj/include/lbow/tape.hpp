#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lbow::ad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// A named trainable array with its gradient and Adam moments.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)),
        value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)),
        adam_m(Mat::Zero(rows, cols)),
        adam_v(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

// Owns parameters in registration order. Registration order is the
// serialization and optimization order, so runs are reproducible.
class ParameterStore {
 public:
  Parameter* create(const std::string& name, int rows, int cols);
  Parameter* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  size_t scalar_count() const;
  void zero_grads();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool ok() const { return id >= 0; }
};

// Reverse-mode tape over Eigen matrices. One tape is built per training
// step (or per generated sentence), backward() runs once, then reset().
class Tape {
 public:
  // ---- leaves ----
  Var constant(Mat v);                    // no gradient
  Var scalar(double v);                   // 1x1 constant
  Var variable(Mat v);                    // free leaf that receives a gradient
  Var leaf(Parameter* p);                 // gradient accumulates into p->grad

  // ---- elementwise / arithmetic ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);                 // Hadamard product
  Var scale(Var a, double c);
  Var smul(Var s, Var a);                 // 1x1 scalar times matrix
  Var neg(Var a);
  Var tanh_(Var a);
  Var sigmoid_(Var a);
  Var log_eps(Var a, double eps);         // log(a + eps) elementwise

  // ---- linear algebra ----
  Var matmul(Var a, Var b);
  Var affine(Var w, Var x, Var b);        // w*x + b
  Var affine2(Var w, Var x, Var u, Var h, Var b);  // w*x + u*h + b
  Var mat_t_vec(Var m, Var v);            // m^T * v
  Var colwise_add(Var m, Var v);          // add column vector v to every column

  // ---- shape ----
  Var rows(Var a, int start, int n);      // row block
  Var column(Var a, int j);               // single column (embedding lookup)
  Var vconcat(Var a, Var b);
  Var hconcat(std::span<const Var> parts);

  // ---- reductions / indexing ----
  Var sum(Var a);                         // 1x1
  Var mean(Var a);                        // 1x1
  Var dot(Var a, Var b);                  // 1x1
  Var pick(Var a, int i);                 // element i of a column vector, 1x1
  Var gather(Var a, const std::vector<int>& ids);  // rows of a column vector

  // ---- softmax family ----
  Var softmax(Var a);                     // column vector
  Var log_softmax(Var a);

  // ---- composite ops ----
  Var average(std::span<const Var> xs);   // (1/n) * sum of same-shaped vars
  Var add_many(std::span<const Var> xs);
  // -sum_j log(a[ids_j] + eps); touches only the listed entries.
  Var nll_of_set(Var a, const std::vector<int>& ids, double eps);
  // gate*gen + (1-gate)*scatter(copy_probs onto ids); gate is 1x1.
  Var copy_mix(Var gen, Var copy_probs, const std::vector<int>& ids, Var gate);
  Var stop_gradient(Var a);

  // ---- execution ----
  void backward(Var loss);                // loss must be 1x1
  const Mat& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  const Mat& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }
  size_t node_count() const { return nodes_.size(); }
  void reset();

 private:
  enum class Op : uint8_t {
    kConst, kVariable, kLeaf,
    kAdd, kSub, kCMul, kScale, kSMul, kNeg, kTanh, kSigmoid, kLogEps,
    kMatMul, kAffine, kAffine2, kMatTVec, kColwiseAdd,
    kRows, kColumn, kVConcat, kHConcat,
    kSum, kMean, kDot, kPick, kGather,
    kSoftmax, kLogSoftmax,
    kAverage, kAddMany, kNllSet, kCopyMix, kStopGrad,
  };

  struct Node {
    Mat value;
    Mat grad;
    Op op = Op::kConst;
    int p0 = -1, p1 = -1, p2 = -1, p3 = -1, p4 = -1;
    double x = 0.0;
    std::vector<int> extra;     // variadic parents or index payloads
    Parameter* par = nullptr;
    bool rg = false;            // requires gradient
  };

  Var push(Node&& n);
  bool rg(Var v) const { return nodes_[static_cast<size_t>(v.id)].rg; }
  void backprop_node(size_t i);
  Mat& g(int id) { return nodes_[static_cast<size_t>(id)].grad; }
  const Mat& v(int id) const { return nodes_[static_cast<size_t>(id)].value; }

  std::vector<Node> nodes_;
};

}  // namespace lbow::ad
