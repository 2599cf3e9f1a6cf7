#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sneurod/tensor.hpp"

namespace sneurod {

inline constexpr int kLabelMCI = 0;
inline constexpr int kLabelAD = 1;

enum class Plane { kMidsagittal, kParasagittal };

std::string plane_name(Plane plane);
/// Accepts "midsagittal" or "parasagittal".
Plane parse_plane(const std::string& name);

/// sMCI and pMCI both map to the MCI class; AD is the positive class.
int label_from_name(const std::string& name);

/// One labeled grayscale slice.
struct SliceRecord {
  Tensor image;  // [1, H, W], values in [0, 1]
  int label = kLabelMCI;
  std::string subject_id;
  Plane plane = Plane::kMidsagittal;
  std::filesystem::path source_path;
};

using Dataset = std::vector<SliceRecord>;

/// Stacks the selected records into a [B, 1, H, W] batch.
Tensor stack_images(const Dataset& data, std::span<const std::size_t> indices);
std::vector<int> gather_labels(const Dataset& data, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Gamma correction: x -> x^gamma on normalized intensities.

struct GammaSpec {
  double gamma = 0.2;
};

double gamma_correct(double x, const GammaSpec& spec);
Tensor gamma_correct(const Tensor& image, const GammaSpec& spec);
/// 8-bit path: normalize by 255, transform, rescale, round half away from zero.
std::uint8_t gamma_correct(std::uint8_t pixel, const GammaSpec& spec);
std::vector<std::uint8_t> gamma_correct(std::span<const std::uint8_t> pixels, const GammaSpec& spec);

void apply_gamma(Dataset& data, const GammaSpec& spec);

// ---------------------------------------------------------------------------
// Netpbm I/O: binary PGM (P5) and PPM (P6), maxval 255.

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved RGB
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

/// round(v * 255) half away from zero, clamped to [0, 255].
std::uint8_t quantize_unit(double v);

/// Pixels scaled by 1/255 into a [1, H, W] tensor.
Tensor load_pgm(const std::filesystem::path& path);
/// Accepts [H, W] or [1, H, W] tensors with values in [0, 1].
void save_pgm(const Tensor& image, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manifest CSV: header path,label,subject_id,plane.

struct ManifestRow {
  std::string path;
  std::string label;  // sMCI, pMCI or AD
  std::string subject_id;
  std::string plane;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& csv_path);
void write_manifest(std::span<const ManifestRow> rows, const std::filesystem::path& csv_path);

/// Records in file order, image paths resolved against `image_root`.
Dataset load_manifest(const std::filesystem::path& csv_path, const std::filesystem::path& image_root);

// ---------------------------------------------------------------------------
// Synthetic structural slices.

/// Pixel rectangle [top, top+height) x [left, left+width).
struct Region {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Where class-1 images carry the thinned boundary band.
Region cue_region(std::size_t height, std::size_t width);
/// Equal-area region mirrored across the vertical midline; never carries the cue.
Region control_region(std::size_t height, std::size_t width);

double region_mean(const Tensor& image, const Region& region);

struct SynthSpec {
  std::uint64_t seed = 7;
  std::size_t n = 200;
  std::size_t height = 96;
  std::size_t width = 96;
  double cue_strength = 0.8;
  double brightness = 1.0;  // global intensity scale, < 1 darkens
  Plane plane = Plane::kMidsagittal;
};

/// In-memory generation; images are already quantized to 8-bit levels.
Dataset synth_dataset(const SynthSpec& spec);

/// Generates, then writes <root>/images/*.pgm and <root>/manifest.csv.
Dataset synth_generate(const SynthSpec& spec, const std::filesystem::path& root);

}  // namespace sneurod
