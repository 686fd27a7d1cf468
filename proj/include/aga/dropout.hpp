#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aga/random.hpp"
#include "aga/tensor.hpp"

namespace aga {

enum class DropoutKind { kNone, kVanilla, kLeaky };
enum class Mode { kTrain, kEval };

std::string to_string(DropoutKind kind);
DropoutKind parse_dropout_kind(const std::string& text);

struct DropoutSpec {
  DropoutKind kind = DropoutKind::kLeaky;
  double beta = 0.5;     // drop probability
  double c_sup = 500.0;  // suppression constant, >= 1

  // Throws ContractError unless 0 <= beta < 1 and c_sup >= 1.
  void validate() const;
  // Value given to suppressed units: (1 - beta) / c_sup^2 for leaky, 0 for vanilla.
  double suppressed_value() const;
  double preserved_value() const { return 1.0 / (1.0 - beta); }
};

// Analytic E[m_i]: exactly 1 for vanilla and none, 1 + beta * gamma for leaky.
double expected_mask_mean(const DropoutSpec& spec);

// Owns the random stream that masks are drawn from. One per training run.
class DropoutSampler {
 public:
  DropoutSampler(DropoutSpec spec, std::uint64_t seed);

  const DropoutSpec& spec() const noexcept { return spec_; }

  // Element i is kept (z_i = 1) with probability 1 - beta.
  std::vector<double> sample_mask(std::size_t n);

  template <typename T>
  BasicTensor<T> apply(Tape<T>& tape, const BasicTensor<T>& x, Mode mode);

 private:
  DropoutSpec spec_;
  Rng rng_;
};

extern template BasicTensor<float> DropoutSampler::apply(Tape<float>&, const BasicTensor<float>&, Mode);
extern template BasicTensor<double> DropoutSampler::apply(Tape<double>&, const BasicTensor<double>&, Mode);

}  // namespace aga
