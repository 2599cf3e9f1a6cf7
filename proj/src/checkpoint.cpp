#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "sneurod/config.hpp"
#include "sneurod/model.hpp"

namespace sneurod {
namespace fs = std::filesystem;
using Kind = CheckpointError::Kind;

namespace {

constexpr char kMagic[4] = {'S', 'N', 'D', 'C'};
constexpr std::size_t kPreamble = 4 + 4 + 8;

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(char((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const SNeurodCNNModel& model, const fs::path& path, const CheckpointMeta& meta) {
  nlohmann::ordered_json header;
  header["config"] = model_config_to_json(model.config());
  header["training"] = {{"epoch", meta.epoch}};
  if (std::isfinite(meta.best_val_loss)) {
    header["training"]["best_val_loss"] = meta.best_val_loss;
  } else {
    header["training"]["best_val_loss"] = nullptr;
  }
  auto tensors = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for_each_param(model.params(), [&](const std::string& name, const Tensor& t, bool) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(double);
  });
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::string preamble(kMagic, 4);
  put_le<std::uint32_t>(preamble, kCheckpointVersion);
  put_le<std::uint64_t>(preamble, text.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(Kind::kIo, "cannot write checkpoint " + path.string());
  out.write(preamble.data(), std::streamsize(preamble.size()));
  out.write(text.data(), std::streamsize(text.size()));
  std::string payload;
  for_each_param(model.params(), [&](const std::string&, const Tensor& t, bool) {
    payload.clear();
    payload.reserve(t.size() * 8);
    for (double v : t.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_le<std::uint64_t>(payload, bits);
    }
    out.write(payload.data(), std::streamsize(payload.size()));
  });
  if (!out) throw CheckpointError(Kind::kIo, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kIo, "cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(Kind::kBadMagic, path.string() + " is not a checkpoint (bad magic)");
  }
  if (bytes.size() < kPreamble) throw CheckpointError(Kind::kTruncated, path.string() + ": truncated preamble");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersionMismatch, path.string() + ": checkpoint version " + std::to_string(version) +
                                                      ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto header_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (header_len > bytes.size() - kPreamble) throw CheckpointError(Kind::kTruncated, path.string() + ": truncated header");

  nlohmann::json header;
  ModelConfig cfg;
  CheckpointMeta meta;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPreamble, bytes.begin() + std::ptrdiff_t(kPreamble + header_len));
    cfg = model_config_from_json(header.at("config"));
    const auto& training = header.at("training");
    meta.epoch = training.at("epoch").get<std::int64_t>();
    meta.best_val_loss = training.at("best_val_loss").is_null() ? std::numeric_limits<double>::infinity()
                                                                : training.at("best_val_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kBadHeader, path.string() + ": malformed header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::kBadHeader, path.string() + ": invalid model config: " + e.what());
  }

  ModelParams params = zero_params(cfg);
  std::vector<Tensor*> slots;
  std::vector<std::string> names;
  for_each_param(params, [&](const std::string& name, Tensor& t, bool) {
    slots.push_back(&t);
    names.push_back(name);
  });
  if (!header.contains("tensors") || !header["tensors"].is_array()) {
    throw CheckpointError(Kind::kBadHeader, path.string() + ": header has no tensor list");
  }
  const auto& descriptors = header["tensors"];
  if (descriptors.size() != slots.size()) {
    throw CheckpointError(Kind::kSizeMismatch, path.string() + ": expected " + std::to_string(slots.size()) +
                                                   " tensor descriptors");
  }
  const std::size_t payload_start = kPreamble + header_len;
  std::uint64_t expected_offset = 0;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    Shape shape;
    std::uint64_t offset = 0;
    std::string name;
    try {
      name = descriptors[k].at("name").get<std::string>();
      shape = descriptors[k].at("shape").get<Shape>();
      offset = descriptors[k].at("offset").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(Kind::kBadHeader, path.string() + ": malformed tensor descriptor: " + e.what());
    }
    if (name != names[k]) {
      throw CheckpointError(Kind::kBadHeader, path.string() + ": descriptor " + std::to_string(k) + " is '" + name +
                                                  "', expected '" + names[k] + "'");
    }
    if (shape != slots[k]->shape() || offset != expected_offset) {
      throw CheckpointError(Kind::kSizeMismatch, path.string() + ": tensor " + name + " declared " +
                                                     shape_string(shape) + " at offset " + std::to_string(offset) +
                                                     ", config implies " + shape_string(slots[k]->shape()) +
                                                     " at offset " + std::to_string(expected_offset));
    }
    expected_offset += slots[k]->size() * sizeof(double);
  }
  if (bytes.size() - payload_start < expected_offset) {
    throw CheckpointError(Kind::kTruncated, path.string() + ": payload has " +
                                                std::to_string(bytes.size() - payload_start) + " bytes, expected " +
                                                std::to_string(expected_offset));
  }
  if (bytes.size() - payload_start > expected_offset) {
    throw CheckpointError(Kind::kSizeMismatch, path.string() + ": trailing bytes after payload");
  }
  const unsigned char* p = bytes.data() + payload_start;
  for (Tensor* t : slots) {
    for (double& v : t->values()) {
      const auto bits = get_le<std::uint64_t>(p);
      std::memcpy(&v, &bits, sizeof v);
      p += 8;
    }
  }
  return {SNeurodCNNModel(cfg, std::move(params)), meta};
}

}  // namespace sneurod
