#include "lbow/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace lbow::ad {

Parameter* ParameterStore::create(const std::string& name, int rows, int cols) {
  if (by_name_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(name, rows, cols));
  Parameter* p = params_.back().get();
  by_name_[name] = p;
  return p;
}

Parameter* ParameterStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

size_t ParameterStore::scalar_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += static_cast<size_t>(p->value.size());
  return n;
}

void ParameterStore::zero_grads() {
  for (const auto& p : params_) p->zero_grad();
}

Var Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat m) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(m);
  return push(std::move(n));
}

Var Tape::scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Tape::variable(Mat m) {
  Node n;
  n.op = Op::kVariable;
  n.value = std::move(m);
  n.rg = true;
  return push(std::move(n));
}

Var Tape::leaf(Parameter* p) {
  Node n;
  n.op = Op::kLeaf;
  n.value = p->value;
  n.par = p;
  n.rg = true;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::kAdd;
  n.p0 = a.id;
  n.p1 = b.id;
  n.value = v(a.id) + v(b.id);
  n.rg = rg(a) || rg(b);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  Node n;
  n.op = Op::kSub;
  n.p0 = a.id;
  n.p1 = b.id;
  n.value = v(a.id) - v(b.id);
  n.rg = rg(a) || rg(b);
  return push(std::move(n));
}

Var Tape::cmul(Var a, Var b) {
  Node n;
  n.op = Op::kCMul;
  n.p0 = a.id;
  n.p1 = b.id;
  n.value = v(a.id).cwiseProduct(v(b.id));
  n.rg = rg(a) || rg(b);
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::kScale;
  n.p0 = a.id;
  n.x = c;
  n.value = c * v(a.id);
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::smul(Var s, Var a) {
  Node n;
  n.op = Op::kSMul;
  n.p0 = s.id;
  n.p1 = a.id;
  n.value = v(s.id)(0, 0) * v(a.id);
  n.rg = rg(s) || rg(a);
  return push(std::move(n));
}

Var Tape::neg(Var a) {
  Node n;
  n.op = Op::kNeg;
  n.p0 = a.id;
  n.value = -v(a.id);
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::tanh_(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.p0 = a.id;
  n.value = v(a.id).array().tanh();
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::sigmoid_(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.p0 = a.id;
  n.value = (1.0 / (1.0 + (-v(a.id).array()).exp())).matrix();
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::log_eps(Var a, double eps) {
  Node n;
  n.op = Op::kLogEps;
  n.p0 = a.id;
  n.x = eps;
  n.value = (v(a.id).array() + eps).log();
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::kMatMul;
  n.p0 = a.id;
  n.p1 = b.id;
  n.value = v(a.id) * v(b.id);
  n.rg = rg(a) || rg(b);
  return push(std::move(n));
}

Var Tape::affine(Var w, Var x, Var b) {
  Node n;
  n.op = Op::kAffine;
  n.p0 = w.id;
  n.p1 = x.id;
  n.p2 = b.id;
  n.value = v(w.id) * v(x.id) + v(b.id);
  n.rg = rg(w) || rg(x) || rg(b);
  return push(std::move(n));
}

Var Tape::affine2(Var w, Var x, Var u, Var h, Var b) {
  Node n;
  n.op = Op::kAffine2;
  n.p0 = w.id;
  n.p1 = x.id;
  n.p2 = u.id;
  n.p3 = h.id;
  n.p4 = b.id;
  n.value = v(w.id) * v(x.id) + v(u.id) * v(h.id) + v(b.id);
  n.rg = rg(w) || rg(x) || rg(u) || rg(h) || rg(b);
  return push(std::move(n));
}

Var Tape::mat_t_vec(Var m, Var vv) {
  Node n;
  n.op = Op::kMatTVec;
  n.p0 = m.id;
  n.p1 = vv.id;
  n.value = v(m.id).transpose() * v(vv.id);
  n.rg = rg(m) || rg(vv);
  return push(std::move(n));
}

Var Tape::colwise_add(Var m, Var vv) {
  Node n;
  n.op = Op::kColwiseAdd;
  n.p0 = m.id;
  n.p1 = vv.id;
  n.value = v(m.id).colwise() + Eigen::VectorXd(v(vv.id).col(0));
  n.rg = rg(m) || rg(vv);
  return push(std::move(n));
}

Var Tape::rows(Var a, int start, int count) {
  Node n;
  n.op = Op::kRows;
  n.p0 = a.id;
  n.extra = {start, count};
  n.value = v(a.id).middleRows(start, count);
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::column(Var a, int j) {
  Node n;
  n.op = Op::kColumn;
  n.p0 = a.id;
  n.extra = {j};
  n.value = v(a.id).col(j);
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::vconcat(Var a, Var b) {
  Node n;
  n.op = Op::kVConcat;
  n.p0 = a.id;
  n.p1 = b.id;
  const Mat& A = v(a.id);
  const Mat& B = v(b.id);
  Mat out(A.rows() + B.rows(), A.cols());
  out.topRows(A.rows()) = A;
  out.bottomRows(B.rows()) = B;
  n.value = std::move(out);
  n.rg = rg(a) || rg(b);
  return push(std::move(n));
}

Var Tape::hconcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hconcat: empty");
  Node n;
  n.op = Op::kHConcat;
  Eigen::Index total_cols = 0;
  for (Var p : parts) total_cols += v(p.id).cols();
  Mat out(v(parts[0].id).rows(), total_cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    const Mat& m = v(p.id);
    out.middleCols(c, m.cols()) = m;
    c += m.cols();
    n.extra.push_back(p.id);
    n.rg = n.rg || rg(p);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.p0 = a.id;
  Mat m(1, 1);
  m(0, 0) = v(a.id).sum();
  n.value = std::move(m);
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  Node n;
  n.op = Op::kMean;
  n.p0 = a.id;
  Mat m(1, 1);
  m(0, 0) = v(a.id).mean();
  n.value = std::move(m);
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::dot(Var a, Var b) {
  Node n;
  n.op = Op::kDot;
  n.p0 = a.id;
  n.p1 = b.id;
  Mat m(1, 1);
  m(0, 0) = (v(a.id).array() * v(b.id).array()).sum();
  n.value = std::move(m);
  n.rg = rg(a) || rg(b);
  return push(std::move(n));
}

Var Tape::pick(Var a, int i) {
  Node n;
  n.op = Op::kPick;
  n.p0 = a.id;
  n.extra = {i};
  Mat m(1, 1);
  m(0, 0) = v(a.id)(i, 0);
  n.value = std::move(m);
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::gather(Var a, const std::vector<int>& ids) {
  Node n;
  n.op = Op::kGather;
  n.p0 = a.id;
  n.extra = ids;
  Mat m(static_cast<Eigen::Index>(ids.size()), 1);
  for (size_t j = 0; j < ids.size(); ++j) m(static_cast<Eigen::Index>(j), 0) = v(a.id)(ids[j], 0);
  n.value = std::move(m);
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  Node n;
  n.op = Op::kSoftmax;
  n.p0 = a.id;
  Eigen::ArrayXd x = v(a.id).col(0).array();
  double mx = x.maxCoeff();
  Eigen::ArrayXd e = (x - mx).exp();
  n.value = (e / e.sum()).matrix();
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::log_softmax(Var a) {
  Node n;
  n.op = Op::kLogSoftmax;
  n.p0 = a.id;
  Eigen::ArrayXd x = v(a.id).col(0).array();
  double mx = x.maxCoeff();
  double lse = mx + std::log((x - mx).exp().sum());
  n.value = (x - lse).matrix();
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::average(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("average: empty");
  Node n;
  n.op = Op::kAverage;
  Mat acc = v(xs[0].id);
  n.extra.push_back(xs[0].id);
  n.rg = rg(xs[0]);
  for (size_t i = 1; i < xs.size(); ++i) {
    acc += v(xs[i].id);
    n.extra.push_back(xs[i].id);
    n.rg = n.rg || rg(xs[i]);
  }
  n.value = acc / static_cast<double>(xs.size());
  return push(std::move(n));
}

Var Tape::add_many(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("add_many: empty");
  Node n;
  n.op = Op::kAddMany;
  Mat acc = v(xs[0].id);
  n.extra.push_back(xs[0].id);
  n.rg = rg(xs[0]);
  for (size_t i = 1; i < xs.size(); ++i) {
    acc += v(xs[i].id);
    n.extra.push_back(xs[i].id);
    n.rg = n.rg || rg(xs[i]);
  }
  n.value = std::move(acc);
  return push(std::move(n));
}

Var Tape::nll_of_set(Var a, const std::vector<int>& ids, double eps) {
  Node n;
  n.op = Op::kNllSet;
  n.p0 = a.id;
  n.extra = ids;
  n.x = eps;
  double acc = 0.0;
  for (int i : ids) acc -= std::log(v(a.id)(i, 0) + eps);
  Mat m(1, 1);
  m(0, 0) = acc;
  n.value = std::move(m);
  n.rg = rg(a);
  return push(std::move(n));
}

Var Tape::copy_mix(Var gen, Var copy_probs, const std::vector<int>& ids, Var gate) {
  Node n;
  n.op = Op::kCopyMix;
  n.p0 = gen.id;
  n.p1 = copy_probs.id;
  n.p2 = gate.id;
  n.extra = ids;
  double p = v(gate.id)(0, 0);
  Mat out = p * v(gen.id);
  for (size_t j = 0; j < ids.size(); ++j)
    out(ids[j], 0) += (1.0 - p) * v(copy_probs.id)(static_cast<Eigen::Index>(j), 0);
  n.value = std::move(out);
  n.rg = rg(gen) || rg(copy_probs) || rg(gate);
  return push(std::move(n));
}

Var Tape::stop_gradient(Var a) {
  Node n;
  n.op = Op::kStopGrad;
  n.p0 = a.id;
  n.value = v(a.id);
  n.rg = false;
  return push(std::move(n));
}

void Tape::reset() { nodes_.clear(); }

void Tape::backward(Var loss) {
  Node& top = nodes_[static_cast<size_t>(loss.id)];
  if (top.value.rows() != 1 || top.value.cols() != 1)
    throw std::logic_error("backward: loss must be a 1x1 node");
  for (size_t i = 0; i <= static_cast<size_t>(loss.id); ++i) {
    Node& n = nodes_[i];
    if (n.rg) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  top.grad(0, 0) = 1.0;
  for (size_t i = static_cast<size_t>(loss.id) + 1; i-- > 0;) {
    if (!nodes_[i].rg) continue;
    backprop_node(i);
  }
}

void Tape::backprop_node(size_t i) {
  Node& n = nodes_[i];
  const Mat& G = n.grad;
  auto rgp = [&](int id) { return id >= 0 && nodes_[static_cast<size_t>(id)].rg; };
  switch (n.op) {
    case Op::kConst:
    case Op::kVariable:
    case Op::kStopGrad:
      break;
    case Op::kLeaf:
      n.par->grad += G;
      break;
    case Op::kAdd:
      if (rgp(n.p0)) g(n.p0) += G;
      if (rgp(n.p1)) g(n.p1) += G;
      break;
    case Op::kSub:
      if (rgp(n.p0)) g(n.p0) += G;
      if (rgp(n.p1)) g(n.p1) -= G;
      break;
    case Op::kCMul:
      if (rgp(n.p0)) g(n.p0) += G.cwiseProduct(v(n.p1));
      if (rgp(n.p1)) g(n.p1) += G.cwiseProduct(v(n.p0));
      break;
    case Op::kScale:
      if (rgp(n.p0)) g(n.p0) += n.x * G;
      break;
    case Op::kSMul: {
      double s = v(n.p0)(0, 0);
      if (rgp(n.p0)) g(n.p0)(0, 0) += (G.array() * v(n.p1).array()).sum();
      if (rgp(n.p1)) g(n.p1) += s * G;
      break;
    }
    case Op::kNeg:
      if (rgp(n.p0)) g(n.p0) -= G;
      break;
    case Op::kTanh:
      if (rgp(n.p0)) g(n.p0).array() += G.array() * (1.0 - n.value.array().square());
      break;
    case Op::kSigmoid:
      if (rgp(n.p0)) g(n.p0).array() += G.array() * n.value.array() * (1.0 - n.value.array());
      break;
    case Op::kLogEps:
      if (rgp(n.p0)) g(n.p0).array() += G.array() / (v(n.p0).array() + n.x);
      break;
    case Op::kMatMul:
      if (rgp(n.p0)) g(n.p0) += G * v(n.p1).transpose();
      if (rgp(n.p1)) g(n.p1) += v(n.p0).transpose() * G;
      break;
    case Op::kAffine:
      if (rgp(n.p0)) g(n.p0) += G * v(n.p1).transpose();
      if (rgp(n.p1)) g(n.p1) += v(n.p0).transpose() * G;
      if (rgp(n.p2)) g(n.p2) += G;
      break;
    case Op::kAffine2:
      if (rgp(n.p0)) g(n.p0) += G * v(n.p1).transpose();
      if (rgp(n.p1)) g(n.p1) += v(n.p0).transpose() * G;
      if (rgp(n.p2)) g(n.p2) += G * v(n.p3).transpose();
      if (rgp(n.p3)) g(n.p3) += v(n.p2).transpose() * G;
      if (rgp(n.p4)) g(n.p4) += G;
      break;
    case Op::kMatTVec:
      if (rgp(n.p0)) g(n.p0) += v(n.p1) * G.transpose();
      if (rgp(n.p1)) g(n.p1) += v(n.p0) * G;
      break;
    case Op::kColwiseAdd:
      if (rgp(n.p0)) g(n.p0) += G;
      if (rgp(n.p1)) g(n.p1) += G.rowwise().sum();
      break;
    case Op::kRows:
      if (rgp(n.p0)) g(n.p0).middleRows(n.extra[0], n.extra[1]) += G;
      break;
    case Op::kColumn:
      if (rgp(n.p0)) g(n.p0).col(n.extra[0]) += G;
      break;
    case Op::kVConcat: {
      Eigen::Index ra = v(n.p0).rows();
      if (rgp(n.p0)) g(n.p0) += G.topRows(ra);
      if (rgp(n.p1)) g(n.p1) += G.bottomRows(G.rows() - ra);
      break;
    }
    case Op::kHConcat: {
      Eigen::Index c = 0;
      for (int pid : n.extra) {
        Eigen::Index w = v(pid).cols();
        if (rgp(pid)) g(pid) += G.middleCols(c, w);
        c += w;
      }
      break;
    }
    case Op::kSum:
      if (rgp(n.p0)) g(n.p0).array() += G(0, 0);
      break;
    case Op::kMean:
      if (rgp(n.p0)) g(n.p0).array() += G(0, 0) / static_cast<double>(v(n.p0).size());
      break;
    case Op::kDot:
      if (rgp(n.p0)) g(n.p0) += G(0, 0) * v(n.p1);
      if (rgp(n.p1)) g(n.p1) += G(0, 0) * v(n.p0);
      break;
    case Op::kPick:
      if (rgp(n.p0)) g(n.p0)(n.extra[0], 0) += G(0, 0);
      break;
    case Op::kGather:
      if (rgp(n.p0)) {
        for (size_t j = 0; j < n.extra.size(); ++j)
          g(n.p0)(n.extra[j], 0) += G(static_cast<Eigen::Index>(j), 0);
      }
      break;
    case Op::kSoftmax:
      if (rgp(n.p0)) {
        double d = (n.value.array() * G.array()).sum();
        g(n.p0).array() += n.value.array() * (G.array() - d);
      }
      break;
    case Op::kLogSoftmax:
      if (rgp(n.p0)) {
        double gs = G.sum();
        g(n.p0).array() += G.array() - n.value.array().exp() * gs;
      }
      break;
    case Op::kAverage: {
      double inv = 1.0 / static_cast<double>(n.extra.size());
      for (int pid : n.extra)
        if (rgp(pid)) g(pid) += inv * G;
      break;
    }
    case Op::kAddMany:
      for (int pid : n.extra)
        if (rgp(pid)) g(pid) += G;
      break;
    case Op::kNllSet:
      if (rgp(n.p0)) {
        double gs = G(0, 0);
        for (int idx : n.extra) g(n.p0)(idx, 0) -= gs / (v(n.p0)(idx, 0) + n.x);
      }
      break;
    case Op::kCopyMix: {
      double p = v(n.p2)(0, 0);
      if (rgp(n.p0)) g(n.p0) += p * G;
      if (rgp(n.p1)) {
        for (size_t j = 0; j < n.extra.size(); ++j)
          g(n.p1)(static_cast<Eigen::Index>(j), 0) += (1.0 - p) * G(n.extra[j], 0);
      }
      if (rgp(n.p2)) {
        double d = (G.array() * v(n.p0).array()).sum();
        for (size_t j = 0; j < n.extra.size(); ++j)
          d -= G(n.extra[j], 0) * v(n.p1)(static_cast<Eigen::Index>(j), 0);
        g(n.p2)(0, 0) += d;
      }
      break;
    }
  }
}

}  // namespace lbow::ad
