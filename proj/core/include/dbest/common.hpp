#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace dbest {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using BoolVec = Eigen::Array<bool, Eigen::Dynamic, 1>;
using BoolMat = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

using Rng = std::mt19937_64;

// Independent stream for (seed, index). Replication r of a run always draws
// from stream(seed, r), whichever worker executes it.
Rng make_stream(std::uint64_t seed, std::uint64_t index);

class SupportTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotEnumerable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotIdentified : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dbest
