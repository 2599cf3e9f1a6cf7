#include "sneurod/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace sneurod {
namespace fs = std::filesystem;

std::string plane_name(Plane plane) {
  return plane == Plane::kMidsagittal ? "midsagittal" : "parasagittal";
}

Plane parse_plane(const std::string& name) {
  if (name == "midsagittal") return Plane::kMidsagittal;
  if (name == "parasagittal") return Plane::kParasagittal;
  throw DataError("unknown plane '" + name + "' (expected midsagittal or parasagittal)");
}

int label_from_name(const std::string& name) {
  if (name == "sMCI" || name == "pMCI") return kLabelMCI;
  if (name == "AD") return kLabelAD;
  throw DataError("unknown label '" + name + "' (expected sMCI, pMCI or AD)");
}

Tensor stack_images(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("cannot stack an empty batch");
  const Shape& first = data.at(indices[0]).image.shape();
  const std::size_t per = data[indices[0]].image.size();
  Tensor batch({indices.size(), first[0], first[1], first[2]});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Tensor& img = data.at(indices[k]).image;
    if (img.shape() != first) {
      throw ShapeError("image " + data[indices[k]].source_path.string() + " has shape " + shape_string(img.shape()) +
                       ", batch expects " + shape_string(first));
    }
    std::copy(img.data(), img.data() + per, batch.data() + k * per);
  }
  return batch;
}

std::vector<int> gather_labels(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) labels.push_back(data.at(i).label);
  return labels;
}

// ---------------------------------------------------------------------------

namespace {

void check_gamma(const GammaSpec& spec) {
  if (!(spec.gamma > 0.0) || !std::isfinite(spec.gamma)) {
    throw ParameterError("gamma must be a positive finite exponent, got " + std::to_string(spec.gamma));
  }
}

}  // namespace

double gamma_correct(double x, const GammaSpec& spec) {
  check_gamma(spec);
  return std::pow(std::clamp(x, 0.0, 1.0), spec.gamma);
}

Tensor gamma_correct(const Tensor& image, const GammaSpec& spec) {
  check_gamma(spec);
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = std::pow(std::clamp(image[i], 0.0, 1.0), spec.gamma);
  return out;
}

std::uint8_t gamma_correct(std::uint8_t pixel, const GammaSpec& spec) {
  return quantize_unit(gamma_correct(double(pixel) / 255.0, spec));
}

std::vector<std::uint8_t> gamma_correct(std::span<const std::uint8_t> pixels, const GammaSpec& spec) {
  check_gamma(spec);
  std::array<std::uint8_t, 256> lut{};
  for (int v = 0; v < 256; ++v) lut[v] = gamma_correct(std::uint8_t(v), spec);
  std::vector<std::uint8_t> out(pixels.size());
  std::transform(pixels.begin(), pixels.end(), out.begin(), [&](std::uint8_t p) { return lut[p]; });
  return out;
}

void apply_gamma(Dataset& data, const GammaSpec& spec) {
  for (auto& rec : data) rec.image = gamma_correct(rec.image, spec);
}

// ---------------------------------------------------------------------------

std::uint8_t quantize_unit(double v) {
  const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(scaled);
}

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError(ImageError::Kind::kIo, "cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Netpbm header tokenizer: whitespace separated, '#' comments to end of line.
class HeaderReader {
 public:
  HeaderReader(const std::vector<std::uint8_t>& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  std::size_t number() {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (++digits > 9) throw ImageError(ImageError::Kind::kUnsupportedFormat, "header value too large in " + path_.string());
    }
    if (digits == 0) {
      if (pos_ >= bytes_.size()) throw ImageError(ImageError::Kind::kTruncated, "truncated header in " + path_.string());
      throw ImageError(ImageError::Kind::kUnsupportedFormat, "malformed header in " + path_.string());
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size()) throw ImageError(ImageError::Kind::kTruncated, "missing raster in " + path_.string());
    return pos_ + 1;
  }

  void seek(std::size_t p) { pos_ = p; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

void write_netpbm(const char* magic, std::size_t w, std::size_t h, const std::vector<std::uint8_t>& raster,
                  const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError(ImageError::Kind::kIo, "cannot write image " + path.string());
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.data()), std::streamsize(raster.size()));
  if (!out) throw ImageError(ImageError::Kind::kIo, "failed writing image " + path.string());
}

}  // namespace

GrayImage read_pgm(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw ImageError(ImageError::Kind::kUnsupportedFormat,
                     "unsupported image format in " + path.string() + " (only binary PGM 'P5' is accepted)");
  }
  HeaderReader header(bytes, path);
  header.seek(2);
  GrayImage img;
  img.width = header.number();
  img.height = header.number();
  const std::size_t maxval = header.number();
  if (img.width == 0 || img.height == 0) {
    throw ImageError(ImageError::Kind::kUnsupportedFormat, "zero image extent in " + path.string());
  }
  if (maxval != 255) {
    throw ImageError(ImageError::Kind::kBadMaxval, "maxval " + std::to_string(maxval) + " in " + path.string() +
                                                       " (only 255 is supported)");
  }
  const std::size_t start = header.raster_offset();
  const std::size_t need = img.width * img.height;
  if (bytes.size() < start + need) {
    throw ImageError(ImageError::Kind::kTruncated, "pixel payload of " + path.string() + " has " +
                                                       std::to_string(bytes.size() - std::min(start, bytes.size())) +
                                                       " bytes, expected " + std::to_string(need));
  }
  img.pixels.assign(bytes.begin() + std::ptrdiff_t(start), bytes.begin() + std::ptrdiff_t(start + need));
  return img;
}

void write_pgm(const GrayImage& image, const fs::path& path) {
  if (image.pixels.size() != image.width * image.height) throw ShapeError("write_pgm: pixel count mismatch");
  write_netpbm("P5", image.width, image.height, image.pixels, path);
}

void write_ppm(const RgbImage& image, const fs::path& path) {
  if (image.pixels.size() != 3 * image.width * image.height) throw ShapeError("write_ppm: pixel count mismatch");
  write_netpbm("P6", image.width, image.height, image.pixels, path);
}

Tensor load_pgm(const fs::path& path) {
  const GrayImage img = read_pgm(path);
  Tensor t({1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) t[i] = double(img.pixels[i]) / 255.0;
  return t;
}

void save_pgm(const Tensor& image, const fs::path& path) {
  std::size_t h = 0, w = 0;
  if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else if (image.rank() == 3 && image.dim(0) == 1) {
    h = image.dim(1);
    w = image.dim(2);
  } else {
    throw ShapeError("save_pgm: expected [H, W] or [1, H, W], got " + shape_string(image.shape()));
  }
  GrayImage img{h, w, std::vector<std::uint8_t>(h * w)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = quantize_unit(image[i]);
  write_pgm(img, path);
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kManifestHeader = "path,label,subject_id,plane";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

}  // namespace

std::vector<ManifestRow> read_manifest(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open manifest " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest " + csv_path.string() + " is missing its header");
  strip_cr(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kManifestHeader) {
    throw DataError("manifest header must be '" + std::string(kManifestHeader) + "', got '" + line + "'");
  }
  std::vector<ManifestRow> rows;
  std::set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 4) throw ManifestError(row, "expected 4 fields, got " + std::to_string(f.size()));
    ManifestRow r{f[0], f[1], f[2], f[3]};
    try {
      label_from_name(r.label);
      parse_plane(r.plane);
    } catch (const DataError& e) {
      throw ManifestError(row, e.what());
    }
    if (!seen.insert(r.path).second) throw ManifestError(row, "duplicate path '" + r.path + "'");
    rows.push_back(std::move(r));
    ++row;
  }
  return rows;
}

void write_manifest(std::span<const ManifestRow> rows, const fs::path& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + csv_path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : rows) out << r.path << ',' << r.label << ',' << r.subject_id << ',' << r.plane << '\n';
  if (!out) throw DataError("failed writing manifest " + csv_path.string());
}

Dataset load_manifest(const fs::path& csv_path, const fs::path& image_root) {
  const auto rows = read_manifest(csv_path);
  Dataset data;
  data.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const fs::path file = image_root / r.path;
    if (!fs::exists(file)) throw ManifestError(i, "image file not found: " + file.string());
    SliceRecord rec;
    try {
      rec.image = load_pgm(file);
    } catch (const DataError& e) {
      throw ManifestError(i, e.what());
    }
    rec.label = label_from_name(r.label);
    rec.subject_id = r.subject_id;
    rec.plane = parse_plane(r.plane);
    rec.source_path = file;
    data.push_back(std::move(rec));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Synthetic slices: a smooth elliptical "brain" with textured interior and a
// bright boundary band. Class 1 loses the outer three quarters of the band
// inside the cue region, with contrast proportional to cue_strength.

namespace {

constexpr double kBackground = 0.05;
constexpr double kInterior = 0.5;
constexpr double kBand = 0.9;
constexpr double kBandWidth = 0.16;  // in normalized blob radius
constexpr double kCueDepth = 0.75;   // fraction of the band thinned by the cue
constexpr double kCueX = 0.74, kCueY = 0.26, kCueHalf = 0.11;

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

Region region_around(double cx, double cy, std::size_t height, std::size_t width) {
  const auto lo = [](double c, std::size_t n) { return std::size_t(std::floor((c - kCueHalf) * double(n))); };
  const auto hi = [](double c, std::size_t n) { return std::size_t(std::ceil((c + kCueHalf) * double(n))); };
  const std::size_t top = lo(cy, height), left = lo(cx, width);
  return {top, left, std::min(hi(cy, height), height) - top, std::min(hi(cx, width), width) - left};
}

struct Bump {
  double x, y, sigma, amp;
};

Tensor synth_image(Prng& rng, const SynthSpec& spec, int label) {
  const std::size_t h = spec.height, w = spec.width;
  const double cx = 0.5 + rng.uniform(-0.01, 0.01);
  const double cy = 0.5 + rng.uniform(-0.01, 0.01);
  const double rx = 0.34 * rng.uniform(0.98, 1.02);
  const double ry = 0.38 * rng.uniform(0.98, 1.02);
  std::array<double, 3> amp{}, phase{};
  for (std::size_t k = 0; k < amp.size(); ++k) {
    amp[k] = rng.uniform(0.0, 0.015);
    phase[k] = rng.uniform(0.0, 2.0 * M_PI);
  }
  std::vector<Bump> bumps(6);
  for (auto& b : bumps) {
    b = {cx + rng.uniform(-0.2, 0.2), cy + rng.uniform(-0.2, 0.2), rng.uniform(0.04, 0.09), rng.uniform(-0.12, 0.12)};
  }
  const Region cue = cue_region(h, w);
  const double edge = 1.5 / double(std::min(h, w));

  Tensor img({1, h, w});
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double y = (double(i) + 0.5) / double(h), x = (double(j) + 0.5) / double(w);
      const double dx = (x - cx) / rx, dy = (y - cy) / ry;
      const double theta = std::atan2(dy, dx);
      double boundary = 1.0;
      for (std::size_t k = 0; k < amp.size(); ++k) boundary += amp[k] * std::cos(double(k + 2) * theta + phase[k]);
      const double rho = std::sqrt(dx * dx + dy * dy) / boundary;
      const double soft = edge / std::min(rx, ry);

      double texture = 0.0;
      for (const auto& b : bumps) {
        const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
        texture += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
      }
      const double inside = 1.0 - smoothstep(1.0 - soft, 1.0 + soft, rho);
      const double in_band = smoothstep(1.0 - kBandWidth - soft, 1.0 - kBandWidth + soft, rho);
      double tissue = kInterior + texture + (kBand - kInterior - texture) * in_band;

      const bool in_cue = i >= cue.top && i < cue.top + cue.height && j >= cue.left && j < cue.left + cue.width;
      if (label == kLabelAD && in_cue) {
        const double cut = 1.0 - kCueDepth * kBandWidth;
        const double outer = smoothstep(cut - soft, cut + soft, rho);
        tissue -= spec.cue_strength * outer * (tissue - kBackground);
      }
      double v = kBackground + (tissue - kBackground) * inside;
      v += 0.02 * rng.normal();
      img(0, i, j) = double(quantize_unit(spec.brightness * v)) / 255.0;
    }
  }
  return img;
}

void check_synth(const SynthSpec& spec) {
  if (spec.n % 2 != 0) throw ParameterError("synthetic sample count must be even, got " + std::to_string(spec.n));
  if (!(spec.cue_strength > 0.0 && spec.cue_strength <= 1.0)) {
    throw ParameterError("cue_strength must lie in (0, 1]");
  }
  if (!(spec.brightness > 0.0 && spec.brightness <= 1.0)) throw ParameterError("brightness must lie in (0, 1]");
  if (spec.height < 16 || spec.width < 16) throw ParameterError("synthetic images must be at least 16x16");
}

std::string synth_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%05zu", i);
  return buf;
}

}  // namespace

Region cue_region(std::size_t height, std::size_t width) { return region_around(kCueX, kCueY, height, width); }

Region control_region(std::size_t height, std::size_t width) {
  const Region cue = cue_region(height, width);
  return {cue.top, width - cue.left - cue.width, cue.height, cue.width};
}

double region_mean(const Tensor& image, const Region& r) {
  const std::size_t h = image.dim(image.rank() - 2), w = image.dim(image.rank() - 1);
  if (r.height == 0 || r.width == 0 || r.top + r.height > h || r.left + r.width > w) {
    throw ShapeError("region outside image");
  }
  double sum = 0.0;
  for (std::size_t i = r.top; i < r.top + r.height; ++i)
    for (std::size_t j = r.left; j < r.left + r.width; ++j) sum += image[i * w + j];
  return sum / double(r.height * r.width);
}

Dataset synth_dataset(const SynthSpec& spec) {
  check_synth(spec);
  Prng rng(spec.seed);
  std::vector<int> labels(spec.n, kLabelMCI);
  std::fill(labels.begin() + std::ptrdiff_t(spec.n / 2), labels.end(), kLabelAD);
  const auto order = shuffle_indices(rng, spec.n);
  Dataset data;
  data.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    SliceRecord rec;
    rec.label = labels[order[i]];
    rec.image = synth_image(rng, spec, rec.label);
    rec.subject_id = "S" + synth_name(i).substr(6);
    rec.plane = spec.plane;
    rec.source_path = fs::path("images") / (synth_name(i) + ".pgm");
    data.push_back(std::move(rec));
  }
  return data;
}

Dataset synth_generate(const SynthSpec& spec, const fs::path& root) {
  Dataset data = synth_dataset(spec);
  fs::create_directories(root / "images");
  std::vector<ManifestRow> rows;
  rows.reserve(data.size());
  std::size_t mci_seen = 0;
  for (auto& rec : data) {
    const fs::path rel = rec.source_path;
    save_pgm(rec.image, root / rel);
    std::string label = "AD";
    if (rec.label == kLabelMCI) label = (mci_seen++ % 2 == 0) ? "sMCI" : "pMCI";
    rows.push_back({rel.generic_string(), label, rec.subject_id, plane_name(rec.plane)});
    rec.source_path = root / rel;
  }
  write_manifest(rows, root / "manifest.csv");
  return data;
}

}  // namespace sneurod
