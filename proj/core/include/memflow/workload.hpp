#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memflow {

/// The seven loop dimensions of a 2D convolutional layer.
enum class LoopDim : std::uint8_t { B, K, C, OY, OX, FY, FX };

inline constexpr std::array<LoopDim, 7> kAllDims = {
    LoopDim::B, LoopDim::K, LoopDim::C, LoopDim::OY, LoopDim::OX, LoopDim::FY, LoopDim::FX};
inline constexpr std::size_t kNumDims = 7;

enum class Operand : std::uint8_t { W, I, O };

inline constexpr std::array<Operand, 3> kAllOperands = {Operand::W, Operand::I, Operand::O};
inline constexpr std::size_t kNumOperands = 3;

enum class Relevance : std::uint8_t { r, ir, pr };

constexpr std::size_t index(LoopDim d) { return static_cast<std::size_t>(d); }
constexpr std::size_t index(Operand op) { return static_cast<std::size_t>(op); }

std::string_view to_string(LoopDim d);
std::string_view to_string(Operand op);
std::string_view to_string(Relevance r);
std::optional<LoopDim> parse_dim(std::string_view s);
std::optional<Operand> parse_operand(std::string_view s);

/// Fixed relevance table: W = {K,C,FY,FX}, O = {B,K,OY,OX}, I = {B,C} plus
/// the pr pairs (OX,FX) and (OY,FY).
constexpr Relevance classify(LoopDim dim, Operand op) {
  switch (op) {
    case Operand::W:
      return (dim == LoopDim::K || dim == LoopDim::C || dim == LoopDim::FY || dim == LoopDim::FX)
                 ? Relevance::r
                 : Relevance::ir;
    case Operand::O:
      return (dim == LoopDim::B || dim == LoopDim::K || dim == LoopDim::OY || dim == LoopDim::OX)
                 ? Relevance::r
                 : Relevance::ir;
    case Operand::I:
      if (dim == LoopDim::B || dim == LoopDim::C) return Relevance::r;
      if (dim == LoopDim::K) return Relevance::ir;
      return Relevance::pr;
  }
  return Relevance::ir;
}

constexpr bool is_irrelevant(LoopDim dim, Operand op) { return classify(dim, op) == Relevance::ir; }

/// Per-dimension integer vector, indexed by LoopDim.
using DimSizes = std::array<std::int64_t, kNumDims>;

inline DimSizes unit_dims() { return {1, 1, 1, 1, 1, 1, 1}; }

struct Precision {
  int weight = 8;
  int input = 8;
  int output_partial = 24;
  int output_final = 8;

  /// Bits per element of an operand. Output elements use the partial or
  /// final width depending on where they sit relative to the final-sum level.
  int bits(Operand op, bool final_output = false) const {
    switch (op) {
      case Operand::W: return weight;
      case Operand::I: return input;
      case Operand::O: return final_output ? output_final : output_partial;
    }
    return 0;
  }

  bool operator==(const Precision&) const = default;
};

struct LayerSpec {
  std::string name = "layer";
  DimSizes dims = unit_dims();
  std::int64_t stride_x = 1;
  std::int64_t stride_y = 1;
  Precision precision;

  std::int64_t dim(LoopDim d) const { return dims[index(d)]; }
  std::int64_t& dim(LoopDim d) { return dims[index(d)]; }

  std::int64_t input_x() const { return stride_x * (dim(LoopDim::OX) - 1) + dim(LoopDim::FX); }
  std::int64_t input_y() const { return stride_y * (dim(LoopDim::OY) - 1) + dim(LoopDim::FY); }

  std::int64_t total_macs() const;

  bool operator==(const LayerSpec&) const = default;
};

/// Throws std::invalid_argument describing the first violated invariant.
void validate_layer(const LayerSpec& spec);

/// One loop of a given dimension and size.
struct LoopFactor {
  LoopDim dim;
  std::int64_t factor;

  bool operator==(const LoopFactor&) const = default;
  auto operator<=>(const LoopFactor&) const = default;
};

/// Prime factorization of a single positive integer, ascending.
std::vector<std::int64_t> prime_factors(std::int64_t n);

/// Loop prime factors of every dimension (dimension order B,K,C,OY,OX,FY,FX,
/// factors ascending). Unit bounds contribute nothing.
std::vector<LoopFactor> lpf_factorize(const DimSizes& dims);
inline std::vector<LoopFactor> lpf_factorize(const LayerSpec& spec) { return lpf_factorize(spec.dims); }

/// Element count of an operand's full tensor.
std::int64_t operand_size(const LayerSpec& spec, Operand op);

/// Number of distinct values of stride*a + b for contiguous ranges
/// a in [0, outputs) and b in [0, filters).
constexpr std::int64_t sliding_span(std::int64_t stride, std::int64_t outputs, std::int64_t filters) {
  if (outputs <= 0 || filters <= 0) return 0;
  if (filters >= stride) return stride * (outputs - 1) + filters;
  return outputs * filters;
}

/// Distinct elements of `op` touched by a loop box whose per-dimension
/// extents are `extent`. Input uses the sliding-window span for the pr pairs;
/// W and O multiply their relevant extents.
std::int64_t footprint(Operand op, const DimSizes& extent, std::int64_t stride_x, std::int64_t stride_y);

}  // namespace memflow
