#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowsub/basis.hpp"
#include "flowsub/core.hpp"

// Binary readers and writers for flow (.flo), float maps (PFM, grayscale),
// 8-bit images (PGM binary, PNG for RGB visualizations), plus the on-disk
// basis and embedding stack layouts. Little-endian is the write default
// for .flo and PFM. All writers go through a write-temp-then-rename step.

namespace flowsub::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BadMagic : public IoError {
 public:
  using IoError::IoError;
};

class TruncatedPayload : public IoError {
 public:
  using IoError::IoError;
};

class DimensionOverflow : public IoError {
 public:
  using IoError::IoError;
};

inline constexpr float kFloMagic = 202021.25f;  // the bytes "PIEH"
inline constexpr int kMaxFloDimension = 32768;

FlowField read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowField& flow);

ScalarField read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const ScalarField& field);

struct GrayImage {
  ImageShape shape;
  std::vector<std::uint8_t> pixels;  // row-major
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Masks as 8-bit PGM: 0 outside, 255 inside; reading binarizes nonzero.
ObjectMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const ObjectMask& mask);

struct RgbImage {
  ImageShape shape;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel
};

/// Hue from flow direction, saturation from magnitude / max (zero flow is
/// white). Pass a max magnitude to fix the scale across frames.
RgbImage colorize_flow(const FlowField& flow,
                       std::optional<double> max_magnitude = std::nullopt);

void write_png(const std::filesystem::path& path, const RgbImage& image);

/// Basis stacks on disk: one .flo per field plus basis.json naming labels,
/// kinds and template norms in order.
struct BasisStackInfo {
  std::string family;  // "camera6", "camera8", "embedding", ...
  int embed_dim = 0;
  std::optional<double> disparity_median;
};

void write_basis(const std::filesystem::path& dir, const FlowBasis& basis,
                 const BasisStackInfo& info = {});

struct LoadedBasis {
  FlowBasis basis;
  BasisStackInfo info;
};

LoadedBasis read_basis(const std::filesystem::path& dir);

/// Embedding stacks: one grayscale PFM per channel plus embedding.json.
void write_embedding(const std::filesystem::path& dir, const ObjectEmbedding& phi);
ObjectEmbedding read_embedding(const std::filesystem::path& dir, bool renormalize_input = false);

/// Write-temp-then-rename; used by every writer above.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace flowsub::io
