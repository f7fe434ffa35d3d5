#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cablecal/formats.hpp"
#include "cablecal/rng.hpp"

namespace cablecal::nn {

/// A named matrix stored column-major inside the flat parameter vector.
struct ParamBlock {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;

  Eigen::Index size() const { return rows * cols; }
};

/// Intermediate values saved by forward() for backward().
struct Tape {
  std::vector<Eigen::MatrixXd> values;
};

/// Differentiable regressor over column batches: x is (inputs x batch),
/// the result is (outputs x batch). Parameters live in one flat vector.
class Network {
 public:
  virtual ~Network() = default;

  virtual int input_size() const = 0;
  virtual int output_size() const = 0;
  virtual Eigen::MatrixXd forward(const Eigen::VectorXd& params, const Eigen::MatrixXd& x, Tape* tape) const = 0;
  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  virtual void backward(const Eigen::VectorXd& params, const Tape& tape, const Eigen::MatrixXd& d_out,
                        Eigen::VectorXd& grad) const = 0;

  /// Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  virtual Eigen::VectorXd init(Rng& rng) const;

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  Eigen::Index num_params() const;

 protected:
  ParamBlock add_block(std::string name, Eigen::Index rows, Eigen::Index cols);
  std::vector<ParamBlock> blocks_;
};

struct NetworkShape {
  Arch arch = Arch::rnn;
  int step_size = 3;   ///< features per time step
  int steps = 1;       ///< H + 1
  int outputs = 3;
  int hidden = 256;
  int layers = 2;      ///< hidden layers of the feed-forward part
};

std::unique_ptr<Network> make_network(const NetworkShape& shape);

}  // namespace cablecal::nn
