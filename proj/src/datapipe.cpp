#include "deltagan/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <cctype>

#include "json.hpp"

#include "deltagan/error.hpp"
#include "deltagan/image_io.hpp"

namespace deltagan {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

template <typename T>
void shuffle_with(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.index(i)]);
  }
}

bool pair_less(const SamplePair& a, const SamplePair& b) {
  return std::tie(a.source, a.target) < std::tie(b.source, b.target);
}

}  // namespace

std::string ImageRecord::group_key() const {
  if (!annotation) return {};
  return annotation->subject + '\x1f' + annotation->scene;
}

std::optional<std::size_t> DatasetIndex::find(const std::string& stem) const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].stem == stem) return i;
  }
  return std::nullopt;
}

int DatasetIndex::category_count() const {
  int count = static_cast<int>(category_names.size());
  for (const auto& r : records) {
    if (r.annotation) count = std::max(count, r.annotation->category + 1);
  }
  return count;
}

DatasetIndex load_index(const fs::path& root) {
  DatasetIndex index;
  index.root = root;
  const auto image_dir = root / "images";
  if (!fs::is_directory(image_dir)) {
    throw Error(ErrorKind::Io, "missing images directory under " + root.string());
  }
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(image_dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  for (const auto& path : images) {
    ImageRecord rec;
    rec.stem = path.stem().string();
    rec.image_path = path;
    const auto ann = root / "annotations" / (rec.stem + ".json");
    if (fs::exists(ann)) rec.annotation = parse_annotation_record(read_text(ann));
    index.records.push_back(std::move(rec));
  }
  const auto cats = root / "categories.json";
  if (fs::exists(cats)) {
    for (const auto& n : nlohmann::json::parse(read_text(cats))) {
      index.category_names.push_back(n.get<std::string>());
    }
  }
  return index;
}

std::vector<SamplePair> build_pairs(const DatasetIndex& index, bool unique) {
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < index.records.size(); ++i) {
    const auto& r = index.records[i];
    if (!r.annotation) {
      throw Error(ErrorKind::MissingAnnotation, "image '" + r.stem + "' has no annotation");
    }
    auto key = r.group_key();
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(i);
  }
  std::vector<SamplePair> pairs;
  for (const auto& key : order) {
    const auto& members = groups.at(key);
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = 0; b < members.size(); ++b) {
        if (a == b || (unique && b < a)) continue;
        pairs.push_back({members[a], members[b], SplitTag::Unassigned});
      }
    }
  }
  return pairs;
}

std::string to_string(SplitMode mode) {
  return mode == SplitMode::Normal ? "normal" : "challenging";
}

SplitMode parse_split_mode(const std::string& name) {
  if (name == "normal") return SplitMode::Normal;
  if (name == "challenging") return SplitMode::Challenging;
  throw Error(ErrorKind::InvalidShape, "unknown split mode '" + name + "'");
}

Split split(const std::vector<SamplePair>& pairs, const SplitSpec& spec) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyDataset, "no pairs to split");
  if (!(spec.test_ratio >= 0.0 && spec.test_ratio <= 1.0)) {
    throw Error(ErrorKind::InvalidShape, "test ratio must lie in [0, 1]");
  }
  Rng rng(spec.seed);
  const auto wanted =
      static_cast<std::size_t>(std::llround(spec.test_ratio * static_cast<double>(pairs.size())));
  std::vector<bool> is_test(pairs.size(), false);

  if (spec.mode == SplitMode::Normal) {
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle_with(order, rng);
    for (std::size_t i = 0; i < wanted; ++i) is_test[order[i]] = true;
  } else {
    std::map<std::size_t, std::vector<std::size_t>> by_target;
    for (std::size_t i = 0; i < pairs.size(); ++i) by_target[pairs[i].target].push_back(i);
    std::vector<std::size_t> targets;
    for (const auto& [t, _] : by_target) targets.push_back(t);
    shuffle_with(targets, rng);
    std::size_t taken = 0;
    for (auto t : targets) {
      if (taken >= wanted) break;
      for (auto i : by_target.at(t)) is_test[i] = true;
      taken += by_target.at(t).size();
    }
  }

  Split out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    SamplePair p = pairs[i];
    p.split = is_test[i] ? SplitTag::Test : SplitTag::Train;
    (is_test[i] ? out.test : out.train).push_back(p);
  }
  std::sort(out.train.begin(), out.train.end(), pair_less);
  std::sort(out.test.begin(), out.test.end(), pair_less);
  return out;
}

std::string split_to_json(const Split& s, const SplitSpec& spec, const DatasetIndex& index) {
  auto encode = [&](const std::vector<SamplePair>& pairs) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : pairs) {
      arr.push_back({index.records.at(p.source).stem, index.records.at(p.target).stem});
    }
    return arr;
  };
  nlohmann::ordered_json j;
  j["mode"] = to_string(spec.mode);
  j["seed"] = spec.seed;
  j["test_ratio"] = spec.test_ratio;
  j["train"] = encode(s.train);
  j["test"] = encode(s.test);
  return j.dump(1) + "\n";
}

Split split_from_json(const std::string& text, const DatasetIndex& index) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("malformed split file: ") + e.what());
  }
  auto decode = [&](const char* key, SplitTag tag) {
    std::vector<SamplePair> out;
    for (const auto& p : j.value(key, nlohmann::json::array())) {
      const auto a = index.find(p.at(0).get<std::string>());
      const auto b = index.find(p.at(1).get<std::string>());
      if (!a || !b) {
        throw Error(ErrorKind::MissingAnnotation, "split references an unknown image");
      }
      out.push_back({*a, *b, tag});
    }
    return out;
  };
  return {decode("train", SplitTag::Train), decode("test", SplitTag::Test)};
}

Sample augment(const Sample& s, AugmentChoice choice) {
  Sample out = s;
  if (choice.flip) {
    out.source = s.source.flip({2});
    out.source_map = s.source_map.flip({2});
    out.target = s.target.flip({2});
    out.target_map = s.target_map.flip({2});
  }
  if (choice.swap) {
    std::swap(out.source, out.target);
    std::swap(out.source_map, out.target_map);
    std::swap(out.source_category, out.target_category);
  }
  return out;
}

Sample augment(const Sample& s, Rng& rng) {
  AugmentChoice choice;
  choice.flip = rng.bernoulli(0.5);
  choice.swap = rng.bernoulli(0.5);
  return augment(s, choice);
}

Batch collate(const std::vector<Sample>& samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptyDataset, "empty batch");
  std::vector<torch::Tensor> src, src_map, tgt, tgt_map;
  std::vector<std::int64_t> src_cat, tgt_cat;
  for (const auto& s : samples) {
    src.push_back(s.source);
    src_map.push_back(s.source_map);
    tgt.push_back(s.target);
    tgt_map.push_back(s.target_map);
    src_cat.push_back(s.source_category);
    tgt_cat.push_back(s.target_category);
  }
  Batch b;
  b.source = torch::stack(src);
  b.source_map = torch::stack(src_map);
  b.target = torch::stack(tgt);
  b.target_map = torch::stack(tgt_map);
  b.source_category = torch::tensor(src_cat, torch::kInt64);
  b.target_category = torch::tensor(tgt_cat, torch::kInt64);
  return b;
}

double default_stroke(int height, int width) {
  return std::max(1.0, std::ceil(0.01 * std::max(height, width)));
}

SampleLoader::SampleLoader(const DatasetIndex& index, MapType map_type, int height, int width)
    : index_(index), map_type_(map_type), height_(height), width_(width) {}

const SampleLoader::Entry& SampleLoader::entry(std::size_t record) {
  if (auto it = cache_.find(record); it != cache_.end()) return it->second;
  const auto& rec = index_.records.at(record);
  if (!rec.annotation) {
    throw Error(ErrorKind::MissingAnnotation, "image '" + rec.stem + "' has no annotation");
  }
  auto full = load_image(rec.image_path);
  const int src_h = static_cast<int>(full.size(1));
  const int src_w = static_cast<int>(full.size(2));
  Entry e;
  e.image = resize_bilinear(full, height_, width_);
  const auto stored = index_.root / "maps" / to_string(map_type_) / (rec.stem + ".png");
  if (!index_.root.empty() && fs::exists(stored)) {
    e.map = resize_nearest(decode_map_png(read_file(stored)).to_tensor(), height_, width_);
  } else {
    auto ann = rescale(rec.annotation->select(map_type_), src_h, src_w, height_, width_);
    e.map = rasterize(ann, height_, width_, default_stroke(height_, width_)).to_tensor();
  }
  return cache_.emplace(record, std::move(e)).first->second;
}

torch::Tensor SampleLoader::image(std::size_t record) { return entry(record).image; }
torch::Tensor SampleLoader::map(std::size_t record) { return entry(record).map; }

Sample SampleLoader::load(const SamplePair& pair) {
  Sample s;
  const auto& a = entry(pair.source);
  s.source = a.image;
  s.source_map = a.map;
  s.source_category = index_.records.at(pair.source).annotation->category;
  const auto& b = entry(pair.target);
  s.target = b.image;
  s.target_map = b.map;
  s.target_category = index_.records.at(pair.target).annotation->category;
  return s;
}

torch::Tensor ImageBuffer::push_sample(const torch::Tensor& generated,
                                       std::optional<std::size_t> swap_slot) {
  auto img = generated.detach();
  if (capacity_ == 0) return img;
  if (!full()) {
    images_.push_back(img.clone());
    return img;
  }
  if (!swap_slot) return img;
  auto& slot = images_.at(*swap_slot);
  auto previous = slot;
  slot = img.clone();
  return previous;
}

torch::Tensor ImageBuffer::push_sample(const torch::Tensor& generated, Rng& rng) {
  if (capacity_ == 0 || !full()) return push_sample(generated, std::nullopt);
  if (rng.bernoulli(0.5)) return push_sample(generated, std::nullopt);
  return push_sample(generated, rng.index(images_.size()));
}

torch::Tensor ImageBuffer::query(const torch::Tensor& batch, Rng& rng) {
  std::vector<torch::Tensor> out;
  out.reserve(static_cast<std::size_t>(batch.size(0)));
  for (std::int64_t i = 0; i < batch.size(0); ++i) out.push_back(push_sample(batch[i], rng));
  return torch::stack(out);
}

}  // namespace deltagan
