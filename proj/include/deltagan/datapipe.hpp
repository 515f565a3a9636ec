#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <torch/torch.h>

#include "deltagan/condmap.hpp"
#include "deltagan/rng.hpp"

namespace deltagan {

struct ImageRecord {
  std::string stem;
  std::filesystem::path image_path;
  std::optional<AnnotationRecord> annotation;

  /// Pairing key: images pair only within the same subject and scene.
  std::string group_key() const;
};

/// Dataset root layout:
///   images/<stem>.{png,jpg,jpeg}
///   annotations/<stem>.json
///   maps/<map type>/<stem>.png   (optional, written by `annotate`)
///   splits/<name>.json
///   categories.json              (optional list of category names)
struct DatasetIndex {
  std::filesystem::path root;
  std::vector<ImageRecord> records;
  std::vector<std::string> category_names;

  std::optional<std::size_t> find(const std::string& stem) const;
  int category_count() const;
};

/// Scans images/ in lexicographic order and attaches annotations/<stem>.json
/// where present.
DatasetIndex load_index(const std::filesystem::path& root);

enum class SplitTag { Unassigned, Train, Test };

struct SamplePair {
  std::size_t source = 0;  // record indices
  std::size_t target = 0;
  SplitTag split = SplitTag::Unassigned;
  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

/// All pairs within each subject-and-scene group, in index order. With
/// `unique` only (a, b) with a before b is produced; direction is then
/// recovered by augmentation.
std::vector<SamplePair> build_pairs(const DatasetIndex& index, bool unique = true);

enum class SplitMode { Normal, Challenging };

std::string to_string(SplitMode mode);
SplitMode parse_split_mode(const std::string& name);

struct SplitSpec {
  SplitMode mode = SplitMode::Normal;
  std::uint64_t seed = 0;
  double test_ratio = 0.1;
};

struct Split {
  std::vector<SamplePair> train;
  std::vector<SamplePair> test;
};

/// Normal: random pair-level split. Challenging: whole target images are
/// assigned to one side, so every pair ending in a given image lands on the
/// same side.
Split split(const std::vector<SamplePair>& pairs, const SplitSpec& spec);

std::string split_to_json(const Split& s, const SplitSpec& spec, const DatasetIndex& index);
Split split_from_json(const std::string& text, const DatasetIndex& index);

struct Sample {
  torch::Tensor source;         // [3,H,W]
  torch::Tensor source_map;     // [1,H,W]
  std::int64_t source_category = 0;
  torch::Tensor target;
  torch::Tensor target_map;
  std::int64_t target_category = 0;
};

struct AugmentChoice {
  bool flip = false;
  bool swap = false;
};

Sample augment(const Sample& s, AugmentChoice choice);
/// Flip and direction swap, each with probability 0.5.
Sample augment(const Sample& s, Rng& rng);

struct Batch {
  torch::Tensor source;           // [B,3,H,W]
  torch::Tensor source_map;       // [B,1,H,W]
  torch::Tensor source_category;  // [B] int64
  torch::Tensor target;
  torch::Tensor target_map;
  torch::Tensor target_category;

  std::int64_t size() const { return source.size(0); }
};

Batch collate(const std::vector<Sample>& samples);

/// Loads images resized to the training resolution and their conditional
/// maps. Decoded records are cached.
class SampleLoader {
 public:
  SampleLoader(const DatasetIndex& index, MapType map_type, int height, int width);

  Sample load(const SamplePair& pair);
  torch::Tensor image(std::size_t record);
  torch::Tensor map(std::size_t record);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

 private:
  struct Entry {
    torch::Tensor image;
    torch::Tensor map;
  };
  const Entry& entry(std::size_t record);

  const DatasetIndex& index_;
  MapType map_type_;
  int height_;
  int width_;
  std::unordered_map<std::size_t, Entry> cache_;
};

/// Stroke width used when rasterizing boundary and skeleton maps at a
/// given resolution.
double default_stroke(int height, int width);

/// History of generated images replayed to the discriminator.
class ImageBuffer {
 public:
  explicit ImageBuffer(std::size_t capacity = 50) : capacity_(capacity) {}

  /// Below capacity: store and return the input. At capacity: with
  /// probability 0.5 return the input, otherwise swap it with a random
  /// stored image and return that one.
  torch::Tensor push_sample(const torch::Tensor& generated, Rng& rng);

  /// Deterministic core: `swap_slot` empty returns the input (or stores it
  /// while filling), otherwise exchanges with that slot.
  torch::Tensor push_sample(const torch::Tensor& generated, std::optional<std::size_t> swap_slot);

  /// Applies push_sample to every element along dim 0.
  torch::Tensor query(const torch::Tensor& batch, Rng& rng);

  std::size_t size() const noexcept { return images_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool full() const noexcept { return images_.size() >= capacity_; }
  const std::vector<torch::Tensor>& contents() const noexcept { return images_; }

 private:
  std::size_t capacity_;
  std::vector<torch::Tensor> images_;
};

}  // namespace deltagan
