#include "cablecal/networks.hpp"

#include <cmath>

#include "cablecal/error.hpp"

namespace cablecal::nn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::Map<const MatrixXd> view(const VectorXd& p, const ParamBlock& b) {
  return {p.data() + b.offset, b.rows, b.cols};
}
Eigen::Map<MatrixXd> view(VectorXd& p, const ParamBlock& b) { return {p.data() + b.offset, b.rows, b.cols}; }

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

/// Dense stack: tanh on hidden layers, identity on the last.
class DenseStack {
 public:
  DenseStack() = default;
  DenseStack(std::vector<ParamBlock> w, std::vector<ParamBlock> b) : w_(std::move(w)), b_(std::move(b)) {}

  /// Pushes the input and each hidden activation onto `acts` when given.
  MatrixXd forward(const VectorXd& p, const MatrixXd& x, std::vector<MatrixXd>* acts) const {
    MatrixXd a = x;
    for (std::size_t k = 0; k < w_.size(); ++k) {
      if (acts) acts->push_back(a);
      MatrixXd z = view(p, w_[k]) * a;
      z.colwise() += view(p, b_[k]).col(0);
      a = k + 1 < w_.size() ? MatrixXd(z.array().tanh().matrix()) : z;
    }
    return a;
  }

  /// `acts` as filled by forward(); returns d(loss)/d(input).
  MatrixXd backward(const VectorXd& p, const MatrixXd* acts, MatrixXd d, VectorXd& grad) const {
    for (std::size_t k = w_.size(); k-- > 0;) {
      const MatrixXd& in = acts[k];
      view(grad, w_[k]).noalias() += d * in.transpose();
      view(grad, b_[k]).col(0) += d.rowwise().sum();
      MatrixXd back = view(p, w_[k]).transpose() * d;
      if (k > 0) back.array() *= 1.0 - in.array().square();
      d = std::move(back);
    }
    return d;
  }

  std::size_t depth() const { return w_.size(); }

 private:
  std::vector<ParamBlock> w_, b_;
};

class DenseNetwork final : public Network {
 public:
  DenseNetwork(int in, int out, int hidden, int layers, const std::string& prefix) : in_(in), out_(out) {
    std::vector<int> sizes{in};
    for (int l = 0; l < layers; ++l) sizes.push_back(hidden);
    sizes.push_back(out);
    std::vector<ParamBlock> w, b;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
      w.push_back(add_block(prefix + std::to_string(k) + ".weight", sizes[k + 1], sizes[k]));
      b.push_back(add_block(prefix + std::to_string(k) + ".bias", sizes[k + 1], 1));
    }
    stack_ = DenseStack(std::move(w), std::move(b));
  }

  int input_size() const override { return in_; }
  int output_size() const override { return out_; }

  MatrixXd forward(const VectorXd& p, const MatrixXd& x, Tape* tape) const override {
    if (tape) tape->values.clear();
    return stack_.forward(p, x, tape ? &tape->values : nullptr);
  }

  void backward(const VectorXd& p, const Tape& tape, const MatrixXd& d_out, VectorXd& grad) const override {
    stack_.backward(p, tape.values.data(), d_out, grad);
  }

 private:
  int in_, out_;
  DenseStack stack_;
};

/// Single-layer LSTM over the window, oldest entry first, followed by a
/// dense head on the final hidden state. Gate order in the stacked
/// matrices: input, forget, cell, output.
class LstmNetwork final : public Network {
 public:
  explicit LstmNetwork(const NetworkShape& s) : shape_(s) {
    const int h = s.hidden;
    wx_ = add_block("lstm.weight_ih", 4 * h, s.step_size);
    wh_ = add_block("lstm.weight_hh", 4 * h, h);
    b_ = add_block("lstm.bias", 4 * h, 1);
    std::vector<int> sizes{h};
    for (int l = 0; l < s.layers; ++l) sizes.push_back(h);
    sizes.push_back(s.outputs);
    std::vector<ParamBlock> w, b;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
      w.push_back(add_block("head." + std::to_string(k) + ".weight", sizes[k + 1], sizes[k]));
      b.push_back(add_block("head." + std::to_string(k) + ".bias", sizes[k + 1], 1));
    }
    head_ = DenseStack(std::move(w), std::move(b));
  }

  int input_size() const override { return shape_.step_size * shape_.steps; }
  int output_size() const override { return shape_.outputs; }

  VectorXd init(Rng& rng) const override {
    VectorXd p = Network::init(rng);
    // recurrent blocks use the hidden size as fan-in
    const double bound = 1.0 / std::sqrt(static_cast<double>(shape_.hidden));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (const auto* blk : {&wx_, &wh_, &b_})
      for (Index i = 0; i < blk->size(); ++i) p[blk->offset + i] = u(rng);
    return p;
  }

  // Tape layout: per step [x, i, f, g, o, c, tanh(c), h], then head activations.
  MatrixXd forward(const VectorXd& p, const MatrixXd& x, Tape* tape) const override {
    const int h = shape_.hidden, m = shape_.step_size, steps = shape_.steps;
    const Index batch = x.cols();
    const auto wx = view(p, wx_);
    const auto wh = view(p, wh_);
    const auto bias = view(p, b_).col(0);
    MatrixXd hs = MatrixXd::Zero(h, batch), cs = MatrixXd::Zero(h, batch);
    if (tape) {
      tape->values.clear();
      tape->values.reserve(static_cast<std::size_t>(8 * steps + head_.depth()));
    }
    for (int s = 0; s < steps; ++s) {
      const int block = steps - 1 - s;
      const MatrixXd xs = x.middleRows(static_cast<Index>(block) * m, m);
      MatrixXd z = wx * xs;
      z.noalias() += wh * hs;
      z.colwise() += bias;
      MatrixXd i = sigmoid(z.topRows(h));
      MatrixXd f = sigmoid(z.middleRows(h, h));
      MatrixXd g = z.middleRows(2 * h, h).array().tanh().matrix();
      MatrixXd o = sigmoid(z.bottomRows(h));
      cs = (f.array() * cs.array() + i.array() * g.array()).matrix();
      MatrixXd tc = cs.array().tanh().matrix();
      hs = (o.array() * tc.array()).matrix();
      if (tape) {
        auto& v = tape->values;
        v.push_back(xs);
        v.push_back(std::move(i));
        v.push_back(std::move(f));
        v.push_back(std::move(g));
        v.push_back(std::move(o));
        v.push_back(cs);
        v.push_back(std::move(tc));
        v.push_back(hs);
      }
    }
    return head_.forward(p, hs, tape ? &tape->values : nullptr);
  }

  void backward(const VectorXd& p, const Tape& tape, const MatrixXd& d_out, VectorXd& grad) const override {
    const int h = shape_.hidden, steps = shape_.steps;
    const auto& v = tape.values;
    MatrixXd dh = head_.backward(p, v.data() + 8 * steps, d_out, grad);
    const Index batch = dh.cols();
    MatrixXd dc = MatrixXd::Zero(h, batch);
    auto gwx = view(grad, wx_);
    auto gwh = view(grad, wh_);
    auto gb = view(grad, b_);
    const auto wh = view(p, wh_);
    MatrixXd dz(4 * h, batch);
    const MatrixXd zero = MatrixXd::Zero(h, batch);
    for (int s = steps; s-- > 0;) {
      const MatrixXd* st = v.data() + 8 * s;
      const MatrixXd& xs = st[0];
      const auto i = st[1].array(), f = st[2].array(), g = st[3].array(), o = st[4].array();
      const auto tc = st[6].array();
      const MatrixXd& c_prev = s > 0 ? v[static_cast<std::size_t>(8 * (s - 1) + 5)] : zero;
      const MatrixXd& h_prev = s > 0 ? v[static_cast<std::size_t>(8 * (s - 1) + 7)] : zero;

      dc.array() += dh.array() * o * (1.0 - tc.square());
      dz.topRows(h) = (dc.array() * g * i * (1.0 - i)).matrix();
      dz.middleRows(h, h) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
      dz.middleRows(2 * h, h) = (dc.array() * i * (1.0 - g.square())).matrix();
      dz.bottomRows(h) = (dh.array() * tc * o * (1.0 - o)).matrix();
      dc.array() *= f;

      gwx.noalias() += dz * xs.transpose();
      gwh.noalias() += dz * h_prev.transpose();
      gb.col(0) += dz.rowwise().sum();
      dh.noalias() = wh.transpose() * dz;
    }
  }

 private:
  NetworkShape shape_;
  ParamBlock wx_, wh_, b_;
  DenseStack head_;
};

}  // namespace

Eigen::Index Network::num_params() const {
  return blocks_.empty() ? 0 : blocks_.back().offset + blocks_.back().size();
}

ParamBlock Network::add_block(std::string name, Eigen::Index rows, Eigen::Index cols) {
  ParamBlock b{std::move(name), rows, cols, num_params()};
  blocks_.push_back(b);
  return b;
}

VectorXd Network::init(Rng& rng) const {
  VectorXd p(num_params());
  // a bias shares the bound of the weight block registered just before it
  double bound = 1.0;
  for (const auto& b : blocks_) {
    if (b.cols > 1 || b.name.find("weight") != std::string::npos) bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index i = 0; i < b.size(); ++i) p[b.offset + i] = u(rng);
  }
  return p;
}

std::unique_ptr<Network> make_network(const NetworkShape& s) {
  if (s.step_size < 1 || s.steps < 1 || s.outputs < 1)
    throw Error(Errc::invalid_argument, "network dimensions must be positive");
  switch (s.arch) {
    case Arch::linear: return std::make_unique<DenseNetwork>(s.step_size * s.steps, s.outputs, 0, 0, "linear.");
    case Arch::ff:
      if (s.hidden < 1 || s.layers < 1) throw Error(Errc::invalid_argument, "ff needs hidden units and layers");
      return std::make_unique<DenseNetwork>(s.step_size * s.steps, s.outputs, s.hidden, s.layers, "ff.");
    case Arch::rnn:
      if (s.hidden < 1) throw Error(Errc::invalid_argument, "rnn needs hidden units");
      return std::make_unique<LstmNetwork>(s);
  }
  throw Error(Errc::invalid_argument, "unknown architecture");
}

}  // namespace cablecal::nn
