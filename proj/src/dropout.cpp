#include "aga/dropout.hpp"

#include "aga/errors.hpp"

namespace aga {

std::string to_string(DropoutKind kind) {
  switch (kind) {
    case DropoutKind::kNone: return "none";
    case DropoutKind::kVanilla: return "vanilla";
    case DropoutKind::kLeaky: return "leaky";
  }
  return "none";
}

DropoutKind parse_dropout_kind(const std::string& text) {
  if (text == "none") return DropoutKind::kNone;
  if (text == "vanilla") return DropoutKind::kVanilla;
  if (text == "leaky") return DropoutKind::kLeaky;
  throw ContractError("unknown dropout kind '" + text + "' (expected none, vanilla or leaky)");
}

void DropoutSpec::validate() const {
  if (!(beta >= 0.0 && beta < 1.0)) throw ContractError("dropout rate beta must lie in [0, 1), got " + std::to_string(beta));
  if (!(c_sup >= 1.0)) throw ContractError("suppression constant must be >= 1, got " + std::to_string(c_sup));
}

double DropoutSpec::suppressed_value() const {
  return kind == DropoutKind::kLeaky ? (1.0 - beta) / (c_sup * c_sup) : 0.0;
}

double expected_mask_mean(const DropoutSpec& spec) {
  spec.validate();
  if (spec.kind != DropoutKind::kLeaky) return 1.0;
  // (1 - beta) * 1/(1 - beta) + beta * gamma
  return 1.0 + spec.beta * spec.suppressed_value();
}

DropoutSampler::DropoutSampler(DropoutSpec spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
  spec_.validate();
}

std::vector<double> DropoutSampler::sample_mask(std::size_t n) {
  const double keep = 1.0 - spec_.beta;
  const double preserved = spec_.preserved_value();
  const double suppressed = spec_.suppressed_value();
  std::vector<double> mask(n);
  for (double& v : mask) v = rng_.bernoulli(keep) ? preserved : suppressed;
  return mask;
}

template <typename T>
BasicTensor<T> DropoutSampler::apply(Tape<T>& tape, const BasicTensor<T>& x, Mode mode) {
  if (mode == Mode::kEval || spec_.kind == DropoutKind::kNone) return x;
  const auto drawn = sample_mask(x.numel());
  auto mask = BasicTensor<T>::from(x.shape(), std::vector<T>(drawn.begin(), drawn.end()));
  return tape.mul(x, mask);
}

template BasicTensor<float> DropoutSampler::apply(Tape<float>&, const BasicTensor<float>&, Mode);
template BasicTensor<double> DropoutSampler::apply(Tape<double>&, const BasicTensor<double>&, Mode);

}  // namespace aga
