#include "memflow/workload.hpp"

#include <stdexcept>

namespace memflow {

namespace {
constexpr std::array<std::string_view, kNumDims> kDimNames = {"B", "K", "C", "OY", "OX", "FY", "FX"};
constexpr std::array<std::string_view, kNumOperands> kOperandNames = {"W", "I", "O"};
}  // namespace

std::string_view to_string(LoopDim d) { return kDimNames[index(d)]; }
std::string_view to_string(Operand op) { return kOperandNames[index(op)]; }

std::string_view to_string(Relevance r) {
  switch (r) {
    case Relevance::r: return "r";
    case Relevance::ir: return "ir";
    case Relevance::pr: return "pr";
  }
  return "?";
}

std::optional<LoopDim> parse_dim(std::string_view s) {
  for (auto d : kAllDims)
    if (kDimNames[index(d)] == s) return d;
  return std::nullopt;
}

std::optional<Operand> parse_operand(std::string_view s) {
  for (auto op : kAllOperands)
    if (kOperandNames[index(op)] == s) return op;
  return std::nullopt;
}

std::int64_t LayerSpec::total_macs() const {
  std::int64_t n = 1;
  for (auto v : dims) n *= v;
  return n;
}

void validate_layer(const LayerSpec& spec) {
  for (auto d : kAllDims)
    if (spec.dim(d) < 1)
      throw std::invalid_argument("dimension " + std::string(to_string(d)) + " must be >= 1");
  if (spec.stride_x < 1 || spec.stride_y < 1) throw std::invalid_argument("strides must be >= 1");
  const auto& p = spec.precision;
  if (p.weight < 1 || p.input < 1 || p.output_partial < 1 || p.output_final < 1)
    throw std::invalid_argument("precisions must be >= 1");
  if (p.output_partial < p.output_final)
    throw std::invalid_argument("partial-sum precision must not be below final-output precision");
}

std::vector<std::int64_t> prime_factors(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("prime_factors: n must be >= 1");
  std::vector<std::int64_t> out;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    while (n % p == 0) {
      out.push_back(p);
      n /= p;
    }
  }
  if (n > 1) out.push_back(n);
  return out;
}

std::vector<LoopFactor> lpf_factorize(const DimSizes& dims) {
  std::vector<LoopFactor> out;
  for (auto d : kAllDims)
    for (auto p : prime_factors(dims[index(d)])) out.push_back({d, p});
  return out;
}

std::int64_t operand_size(const LayerSpec& spec, Operand op) {
  const auto dim = [&](LoopDim d) { return spec.dim(d); };
  switch (op) {
    case Operand::W: return dim(LoopDim::K) * dim(LoopDim::C) * dim(LoopDim::FY) * dim(LoopDim::FX);
    case Operand::O: return dim(LoopDim::B) * dim(LoopDim::K) * dim(LoopDim::OY) * dim(LoopDim::OX);
    case Operand::I: return dim(LoopDim::B) * dim(LoopDim::C) * spec.input_x() * spec.input_y();
  }
  return 0;
}

std::int64_t footprint(Operand op, const DimSizes& e, std::int64_t stride_x, std::int64_t stride_y) {
  const auto x = [&](LoopDim d) { return e[index(d)]; };
  switch (op) {
    case Operand::W: return x(LoopDim::K) * x(LoopDim::C) * x(LoopDim::FY) * x(LoopDim::FX);
    case Operand::O: return x(LoopDim::B) * x(LoopDim::K) * x(LoopDim::OY) * x(LoopDim::OX);
    case Operand::I:
      return x(LoopDim::B) * x(LoopDim::C) * sliding_span(stride_x, x(LoopDim::OX), x(LoopDim::FX)) *
             sliding_span(stride_y, x(LoopDim::OY), x(LoopDim::FY));
  }
  return 0;
}

}  // namespace memflow
