#include "lof/weight_gen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lof/rng.hpp"

namespace lof {

double exact_likelihood(const Eigen::Vector2d& innovation,
                        const Eigen::Matrix2d& s) {
  GaussianBelief b{Eigen::Vector2d::Zero(), s};
  return pdf(innovation, b);
}

MlpParams MlpParams::zeros() {
  MlpParams p;
  p.w1 = Eigen::MatrixXd::Zero(kHidden, kIn);
  p.b1 = Eigen::MatrixXd::Zero(kHidden, 1);
  p.w2 = Eigen::MatrixXd::Zero(kHidden, kHidden);
  p.b2 = Eigen::MatrixXd::Zero(kHidden, 1);
  p.w3 = Eigen::MatrixXd::Zero(1, kHidden);
  p.b3 = Eigen::MatrixXd::Zero(1, 1);
  return p;
}

MlpParams MlpParams::glorot(std::uint64_t seed) {
  MlpParams p = zeros();
  RngStream rng(seed);
  const auto fill = [&rng](Eigen::MatrixXd& w) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
  };
  fill(p.w1);
  fill(p.w2);
  fill(p.w3);
  return p;
}

void MlpParams::set_zero() {
  for (auto* t : tensors()) t->setZero();
}

bool MlpParams::same_shape(const MlpParams& o) const {
  const auto a = tensors();
  const auto b = o.tensors();
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols())
      return false;
  }
  return true;
}

double MlpParams::squared_norm() const {
  double s = 0.0;
  for (const auto* t : tensors()) s += t->squaredNorm();
  return s;
}

// ---------------------------------------------------------------------------
// GradTape

namespace {

double softplus_fn(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_fn(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int GradTape::push(Node n) {
  n.adjoint = Eigen::VectorXd::Zero(n.value.size());
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int GradTape::constant(const Eigen::VectorXd& v) {
  Node n;
  n.op = Op::kConstant;
  n.value = v;
  return push(std::move(n));
}

int GradTape::scalar(double v) {
  Eigen::VectorXd x(1);
  x(0) = v;
  return constant(x);
}

int GradTape::param(const Eigen::MatrixXd& value, Eigen::MatrixXd* grad) {
  Node n;
  n.op = Op::kParam;
  n.rows = static_cast<int>(value.rows());
  n.cols = static_cast<int>(value.cols());
  Eigen::VectorXd flat(value.size());
  int k = 0;
  for (int i = 0; i < n.rows; ++i)
    for (int j = 0; j < n.cols; ++j) flat(k++) = value(i, j);
  n.value = std::move(flat);
  n.grad_sink = grad;
  return push(std::move(n));
}

Eigen::VectorXd GradTape::compute(const Node& n,
                                  const std::vector<Eigen::VectorXd>& v) const {
  switch (n.op) {
    case Op::kConstant:
    case Op::kParam:
      return n.value;
    case Op::kAdd:
      return v[n.a] + v[n.b];
    case Op::kMul:
      return v[n.a].cwiseProduct(v[n.b]);
    case Op::kTanh:
      return v[n.a].array().tanh().matrix();
    case Op::kSigmoid: {
      Eigen::VectorXd y = v[n.a];
      for (int i = 0; i < y.size(); ++i) y(i) = sigmoid_fn(y(i));
      return y;
    }
    case Op::kSoftplus: {
      Eigen::VectorXd y = v[n.a];
      for (int i = 0; i < y.size(); ++i) y(i) = softplus_fn(y(i));
      return y;
    }
    case Op::kLog:
      return v[n.a].array().log().matrix();
    case Op::kReciprocal:
      return v[n.a].cwiseInverse();
    case Op::kMatVec: {
      const Node& w = nodes_[n.a];
      const Eigen::VectorXd& x = v[n.b];
      Eigen::VectorXd y = Eigen::VectorXd::Zero(w.rows);
      for (int i = 0; i < w.rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < w.cols; ++j) acc += v[n.a](i * w.cols + j) * x(j);
        y(i) = acc;
      }
      return y;
    }
    case Op::kLogDet2x2: {
      const Eigen::VectorXd& m = v[n.a];
      const double det = m(0) * m(3) - m(1) * m(2);
      if (det <= 0.0) throw SingularCovariance("log det of non-PD 2x2 matrix");
      Eigen::VectorXd y(1);
      y(0) = std::log(det);
      return y;
    }
    case Op::kQuadForm2x2: {
      const Eigen::VectorXd& d = v[n.a];
      const Eigen::VectorXd& m = v[n.b];
      const double det = m(0) * m(3) - m(1) * m(2);
      if (det == 0.0)
        throw SingularCovariance("quadratic form of singular 2x2 matrix");
      const double w0 = (m(3) * d(0) - m(1) * d(1)) / det;
      const double w1 = (-m(2) * d(0) + m(0) * d(1)) / det;
      Eigen::VectorXd y(1);
      y(0) = d(0) * w0 + d(1) * w1;
      return y;
    }
  }
  throw Error("unknown tape op");
}

int GradTape::add(int a, int b) {
  if (nodes_[a].value.size() != nodes_[b].value.size())
    throw ShapeMismatch("add operands differ in length");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value + nodes_[b].value;
  return push(std::move(n));
}

int GradTape::mul(int a, int b) {
  if (nodes_[a].value.size() != nodes_[b].value.size())
    throw ShapeMismatch("mul operands differ in length");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value.cwiseProduct(nodes_[b].value);
  return push(std::move(n));
}

int GradTape::tanh_node(int a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = nodes_[a].value.array().tanh().matrix();
  return push(std::move(n));
}

int GradTape::sigmoid_node(int a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.value = nodes_[a].value;
  for (int i = 0; i < n.value.size(); ++i) n.value(i) = sigmoid_fn(n.value(i));
  return push(std::move(n));
}

int GradTape::softplus_node(int a) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = a;
  n.value = nodes_[a].value;
  for (int i = 0; i < n.value.size(); ++i) n.value(i) = softplus_fn(n.value(i));
  return push(std::move(n));
}

int GradTape::log_node(int a) {
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.value = nodes_[a].value.array().log().matrix();
  return push(std::move(n));
}

int GradTape::reciprocal_node(int a) {
  Node n;
  n.op = Op::kReciprocal;
  n.a = a;
  n.value = nodes_[a].value.cwiseInverse();
  return push(std::move(n));
}

int GradTape::matvec(int w, int x) {
  const Node& wn = nodes_[w];
  if (wn.op != Op::kParam)
    throw ShapeMismatch("matvec weight must be a param node");
  if (wn.cols != nodes_[x].value.size())
    throw ShapeMismatch("matvec shape mismatch");
  Node n;
  n.op = Op::kMatVec;
  n.a = w;
  n.b = x;
  n.rows = wn.rows;
  n.cols = wn.cols;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(wn.rows);
  for (int i = 0; i < wn.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < wn.cols; ++j)
      acc += wn.value(i * wn.cols + j) * nodes_[x].value(j);
    y(i) = acc;
  }
  n.value = std::move(y);
  return push(std::move(n));
}

int GradTape::logdet2x2(int m) {
  if (nodes_[m].value.size() != 4)
    throw ShapeMismatch("logdet2x2 expects a 4-entry node");
  Node n;
  n.op = Op::kLogDet2x2;
  n.a = m;
  const Eigen::VectorXd& mm = nodes_[m].value;
  const double det = mm(0) * mm(3) - mm(1) * mm(2);
  if (det <= 0.0) throw SingularCovariance("log det of non-PD 2x2 matrix");
  Eigen::VectorXd y(1);
  y(0) = std::log(det);
  n.value = std::move(y);
  return push(std::move(n));
}

int GradTape::quadform2x2(int v, int m) {
  if (nodes_[v].value.size() != 2 || nodes_[m].value.size() != 4)
    throw ShapeMismatch("quadform2x2 expects a 2-vector and a 2x2 matrix");
  Node n;
  n.op = Op::kQuadForm2x2;
  n.a = v;
  n.b = m;
  const Eigen::VectorXd& d = nodes_[v].value;
  const Eigen::VectorXd& mm = nodes_[m].value;
  const double det = mm(0) * mm(3) - mm(1) * mm(2);
  if (det == 0.0)
    throw SingularCovariance("quadratic form of singular 2x2 matrix");
  const double w0 = (mm(3) * d(0) - mm(1) * d(1)) / det;
  const double w1 = (-mm(2) * d(0) + mm(0) * d(1)) / det;
  Eigen::VectorXd y(1);
  y(0) = d(0) * w0 + d(1) * w1;
  n.value = std::move(y);
  return push(std::move(n));
}

void GradTape::clear() { nodes_.clear(); }

void GradTape::backward(int output, const Eigen::VectorXd& upstream) {
  if (nodes_.empty()) throw EmptyTape("backward on an empty tape");
  if (upstream.size() != nodes_[output].value.size())
    throw ShapeMismatch("upstream gradient shape mismatch");
  for (auto& n : nodes_) n.adjoint.setZero();
  nodes_[output].adjoint = upstream;
  sweep();
}

void GradTape::backward(int output, double upstream) {
  Eigen::VectorXd u(1);
  u(0) = upstream;
  backward(output, u);
}

void GradTape::backward_multi(const std::vector<std::pair<int, double>>& seeds) {
  if (nodes_.empty()) throw EmptyTape("backward on an empty tape");
  for (auto& n : nodes_) n.adjoint.setZero();
  for (const auto& [id, g] : seeds) {
    if (nodes_[id].value.size() != 1)
      throw ShapeMismatch("scalar seed on a non-scalar node");
    nodes_[id].adjoint(0) += g;
  }
  sweep();
}

void GradTape::sweep() {
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[id];
    const Eigen::VectorXd& g = n.adjoint;
    if (g.isZero(0.0)) continue;
    switch (n.op) {
      case Op::kConstant:
        break;
      case Op::kParam:
        if (n.grad_sink) {
          int k = 0;
          for (int i = 0; i < n.rows; ++i)
            for (int j = 0; j < n.cols; ++j) (*n.grad_sink)(i, j) += g(k++);
        }
        break;
      case Op::kAdd:
        nodes_[n.a].adjoint += g;
        nodes_[n.b].adjoint += g;
        break;
      case Op::kMul:
        nodes_[n.a].adjoint += g.cwiseProduct(nodes_[n.b].value);
        nodes_[n.b].adjoint += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::kTanh:
        nodes_[n.a].adjoint.array() +=
            g.array() * (1.0 - n.value.array().square());
        break;
      case Op::kSigmoid:
        nodes_[n.a].adjoint.array() +=
            g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::kSoftplus:
        for (int i = 0; i < g.size(); ++i)
          nodes_[n.a].adjoint(i) += g(i) * sigmoid_fn(nodes_[n.a].value(i));
        break;
      case Op::kLog:
        nodes_[n.a].adjoint.array() += g.array() / nodes_[n.a].value.array();
        break;
      case Op::kReciprocal:
        nodes_[n.a].adjoint.array() -= g.array() * n.value.array().square();
        break;
      case Op::kMatVec: {
        Node& w = nodes_[n.a];
        Node& x = nodes_[n.b];
        for (int i = 0; i < n.rows; ++i) {
          const double gi = g(i);
          if (gi == 0.0) continue;
          for (int j = 0; j < n.cols; ++j) {
            w.adjoint(i * n.cols + j) += gi * x.value(j);
            x.adjoint(j) += gi * w.value(i * n.cols + j);
          }
        }
        break;
      }
      case Op::kLogDet2x2: {
        const Eigen::VectorXd& m = nodes_[n.a].value;
        const double det = m(0) * m(3) - m(1) * m(2);
        const double s = g(0) / det;
        nodes_[n.a].adjoint(0) += s * m(3);
        nodes_[n.a].adjoint(1) -= s * m(2);
        nodes_[n.a].adjoint(2) -= s * m(1);
        nodes_[n.a].adjoint(3) += s * m(0);
        break;
      }
      case Op::kQuadForm2x2: {
        const Eigen::VectorXd& d = nodes_[n.a].value;
        const Eigen::VectorXd& m = nodes_[n.b].value;
        const double det = m(0) * m(3) - m(1) * m(2);
        const double w0 = (m(3) * d(0) - m(1) * d(1)) / det;
        const double w1 = (-m(2) * d(0) + m(0) * d(1)) / det;
        const double s = g(0);
        nodes_[n.a].adjoint(0) += 2.0 * s * w0;
        nodes_[n.a].adjoint(1) += 2.0 * s * w1;
        nodes_[n.b].adjoint(0) -= s * w0 * w0;
        nodes_[n.b].adjoint(1) -= s * w0 * w1;
        nodes_[n.b].adjoint(2) -= s * w1 * w0;
        nodes_[n.b].adjoint(3) -= s * w1 * w1;
        break;
      }
    }
  }
}

bool GradTape::replay_matches() const {
  std::vector<Eigen::VectorXd> vals;
  vals.reserve(nodes_.size());
  for (const auto& n : nodes_) {
    Eigen::VectorXd v = compute(n, vals);
    vals.push_back(std::move(v));
  }
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (vals[i].size() != nodes_[i].value.size()) return false;
    for (int k = 0; k < vals[i].size(); ++k) {
      if (vals[i](k) != nodes_[i].value(k)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// MLP forward

MlpTapeBindings bind_mlp_params(GradTape& tape, const MlpParams& params,
                                MlpParams* grads) {
  MlpTapeBindings b;
  b.w1 = tape.param(params.w1, grads ? &grads->w1 : nullptr);
  b.b1 = tape.param(params.b1, grads ? &grads->b1 : nullptr);
  b.w2 = tape.param(params.w2, grads ? &grads->w2 : nullptr);
  b.b2 = tape.param(params.b2, grads ? &grads->b2 : nullptr);
  b.w3 = tape.param(params.w3, grads ? &grads->w3 : nullptr);
  b.b3 = tape.param(params.b3, grads ? &grads->b3 : nullptr);
  return b;
}

int mlp_forward_node(GradTape& tape, const MlpTapeBindings& binds,
                     double pdf_value, const Eigen::Vector2d& innovation) {
  if (!std::isfinite(pdf_value) || !innovation.allFinite())
    throw NonFiniteInput("non-finite weight generator input");
  Eigen::VectorXd in(3);
  in << pdf_value, innovation(0), innovation(1);
  const int x = tape.constant(in);
  const int h1 = tape.tanh_node(tape.add(tape.matvec(binds.w1, x), binds.b1));
  const int h2 = tape.tanh_node(tape.add(tape.matvec(binds.w2, h1), binds.b2));
  return tape.softplus_node(tape.add(tape.matvec(binds.w3, h2), binds.b3));
}

double mlp_forward(const MlpParams& params, double pdf_value,
                   const Eigen::Vector2d& innovation, GradTape& tape,
                   bool pass_through) {
  if (!std::isfinite(pdf_value) || !innovation.allFinite())
    throw NonFiniteInput("non-finite weight generator input");
  if (pass_through) return pdf_value;
  const MlpTapeBindings b = bind_mlp_params(tape, params, nullptr);
  return tape.scalar_value(mlp_forward_node(tape, b, pdf_value, innovation));
}

double local_weight(double likelihood, double prev_fusion_weight) {
  return likelihood * prev_fusion_weight;
}

// ---------------------------------------------------------------------------
// Checkpoint io

void save_checkpoint(const std::string& path, const MlpParams& params,
                     const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << "# lof mlp checkpoint v1\n";
  out << "# arch 3-32-32-1 tanh softplus\n";
  out << "# config_hash " << config_hash << "\n";
  const auto tensors = params.tensors();
  const auto names = MlpParams::tensor_names();
  char buf[64];
  for (size_t t = 0; t < tensors.size(); ++t) {
    const Eigen::MatrixXd& m = *tensors[t];
    out << "tensor " << names[t] << " " << m.rows() << " " << m.cols() << "\n";
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
        out << buf << (j + 1 == m.cols() ? "" : " ");
      }
      out << "\n";
    }
  }
  if (!out.good()) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  Checkpoint ck;
  ck.params = MlpParams::zeros();
  std::string line;
  Eigen::MatrixXd* current = nullptr;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# config_hash ", 0) == 0) {
      ck.config_hash = line.substr(14);
      continue;
    }
    if (line[0] == '#') continue;
    std::istringstream ss(line);
    if (line.rfind("tensor ", 0) == 0) {
      std::string kw, name;
      int rows = 0, cols = 0;
      ss >> kw >> name >> rows >> cols;
      current = nullptr;
      const auto names = MlpParams::tensor_names();
      const auto tensors = ck.params.tensors();
      for (size_t t = 0; t < names.size(); ++t) {
        if (name == names[t]) current = tensors[t];
      }
      if (!current || current->rows() != rows || current->cols() != cols)
        throw IoError("unexpected tensor block '" + name + "' in " + path);
      row = 0;
      continue;
    }
    if (!current) throw IoError("value line outside a tensor block in " + path);
    if (row >= current->rows()) throw IoError("too many rows in " + path);
    for (int j = 0; j < current->cols(); ++j) {
      if (!(ss >> (*current)(row, j)))
        throw IoError("malformed value line in " + path);
    }
    ++row;
  }
  return ck;
}

}  // namespace lof
