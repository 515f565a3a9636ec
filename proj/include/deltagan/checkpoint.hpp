#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "deltagan/discriminator.hpp"
#include "deltagan/generator.hpp"

namespace deltagan {

inline constexpr std::uint32_t kArchiveVersion = 1;

/// Single-file model archive: a format version, a JSON block with the
/// configuration and bookkeeping, and named arrays (layer path -> tensor).
///
/// Layout (little endian):
///   "DGANARCH" | u32 version | u64 meta length | meta bytes (UTF-8 JSON)
///   | u64 array count | per array, sorted by name:
///     u32 name length | name | u8 dtype | u32 rank | i64 dims[rank] | raw data
///
/// Encoding is a pure function of the contents, so decode followed by encode
/// reproduces the input bytes.
struct Archive {
  std::uint32_t version = kArchiveVersion;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::map<std::string, torch::Tensor> arrays;
};

std::vector<unsigned char> encode_archive(const Archive& archive);
Archive decode_archive(const std::vector<unsigned char>& bytes);

void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

/// Copies parameters and buffers of `module` under "<prefix>/<path>".
void store_module(Archive& archive, const std::string& prefix, const torch::nn::Module& module);
/// Loads parameters and buffers back; InvalidCheckpoint on missing names or
/// shape disagreement.
void restore_module(const Archive& archive, const std::string& prefix, torch::nn::Module& module);

nlohmann::ordered_json to_json(const GeneratorConfig& config);
GeneratorConfig generator_config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const DiscriminatorConfig& config);
DiscriminatorConfig discriminator_config_from_json(const nlohmann::ordered_json& j);

/// Generator rebuilt from meta["generator"] with weights under "generator/".
Generator load_generator(const Archive& archive);

std::vector<std::string> category_names(const Archive& archive);

/// 64-bit FNV-1a digest as 16 hex characters.
std::string content_id(const std::vector<unsigned char>& bytes);

}  // namespace deltagan
