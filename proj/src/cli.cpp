#include "deltagan/cli.hpp"

#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "deltagan/checkpoint.hpp"
#include "deltagan/condmap.hpp"
#include "deltagan/datapipe.hpp"
#include "deltagan/error.hpp"
#include "deltagan/evaluation.hpp"
#include "deltagan/image_io.hpp"
#include "deltagan/service.hpp"
#include "deltagan/trainer.hpp"

namespace deltagan {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

nlohmann::json scalar_value(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  try {
    std::size_t used = 0;
    const long long i = std::stoll(text, &used);
    if (used == text.size()) return i;
    const double d = std::stod(text, &used);
    if (used == text.size()) return d;
  } catch (const std::exception&) {
  }
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    return text.substr(1, text.size() - 2);
  }
  return text;
}

fs::path resolve_split(const fs::path& root, const std::string& split) {
  if (fs::exists(split)) return split;
  const auto named = root / "splits" / (split + ".json");
  if (fs::exists(named)) return named;
  throw Error(ErrorKind::Io, "split '" + split + "' not found");
}

MapType archive_map_type(const Archive& a) {
  if (a.meta.contains("train") && a.meta.at("train").contains("map_type")) {
    return parse_map_type(a.meta.at("train").at("map_type").get<std::string>());
  }
  return MapType::Triangle;
}

bool archive_rolling(const Archive& a) {
  if (a.meta.contains("train") && a.meta.at("train").contains("rolling")) {
    return a.meta.at("train").at("rolling").get<bool>();
  }
  return true;
}

// +1 for --rolling, -1 for --no-rolling, 0 when neither was given.
bool rolling_choice(int flag, bool fallback) { return flag == 0 ? fallback : flag > 0; }

struct Options {
  std::string data_root;
  std::string split;
  std::string config;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  int rolling = 0;
  std::string map_type;
  std::string fid_mode = "correct";
  std::string mode = "normal";
  double ratio = 0.1;
  std::string name;
  std::string subset = "test";
  int classifier_epochs = 30;
  std::string image;
  std::string annotation;
  std::int64_t category = 0;
  std::string mask_out;
  std::string host = "0.0.0.0";
  int port = 8080;
  std::size_t max_image_bytes = 8u << 20;
};

int cmd_annotate(const Options& o, std::ostream& out, std::ostream& err) {
  const auto index = load_index(o.data_root);
  const auto type = parse_map_type(o.map_type.empty() ? "triangle" : o.map_type);
  const fs::path dir = o.out.empty() ? index.root / "maps" / to_string(type) : fs::path(o.out);
  std::size_t written = 0;
  std::size_t skipped = 0;
  for (const auto& rec : index.records) {
    if (!rec.annotation) {
      ++skipped;
      continue;
    }
    Annotation a;
    try {
      a = rec.annotation->select(type);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvalidAnnotation) throw;
      err << "skipping " << rec.stem << ": " << e.what() << "\n";
      ++skipped;
      continue;
    }
    const auto image = load_image(rec.image_path);
    const int h = static_cast<int>(image.size(1));
    const int w = static_cast<int>(image.size(2));
    write_file(dir / (rec.stem + ".png"), encode_map_png(rasterize(a, h, w, default_stroke(h, w))));
    ++written;
  }
  out << "wrote " << written << " " << to_string(type) << " maps to " << dir.string() << " ("
      << skipped << " skipped)\n";
  return 0;
}

int cmd_split(const Options& o, std::ostream& out) {
  const auto index = load_index(o.data_root);
  SplitSpec spec;
  spec.mode = parse_split_mode(o.mode);
  spec.seed = o.seed.value_or(0);
  spec.test_ratio = o.ratio;
  out << "seed " << spec.seed << "\n";
  const auto pairs = build_pairs(index);
  const auto s = split(pairs, spec);
  const std::string name = o.name.empty() ? to_string(spec.mode) : o.name;
  const fs::path path = o.out.empty() ? index.root / "splits" / (name + ".json") : fs::path(o.out);
  write_file(path, split_to_json(s, spec, index));
  out << "split " << path.string() << ": " << s.train.size() << " train, " << s.test.size()
      << " test pairs\n";
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto index = load_index(o.data_root);
  nlohmann::json cfg = o.config.empty() ? nlohmann::json::object() : read_config_file(o.config);
  auto tc = train_config_from_json(cfg);
  if (o.seed) tc.seed = *o.seed;
  tc.rolling = rolling_choice(o.rolling, tc.rolling);
  if (!o.map_type.empty()) tc.map_type = parse_map_type(o.map_type);
  const int size = cfg.value("image_size", 256);
  const int divisor = cfg.value("width_divisor", 1);
  const int n_c = index.category_count();
  out << "seed " << tc.seed << "\n";

  std::vector<SamplePair> pairs;
  if (o.split.empty()) {
    pairs = build_pairs(index);
  } else {
    pairs = split_from_json(read_text(resolve_split(index.root, o.split)), index).train;
  }
  Trainer trainer(tc, scaled_generator_config(size, size, n_c, divisor),
                  scaled_discriminator_config(size, size, n_c, divisor));
  trainer.set_category_names(index.category_names);
  if (!o.checkpoint.empty()) {
    trainer.resume(load_archive(o.checkpoint));
    out << "resuming at epoch " << trainer.start_epoch() << "\n";
  }
  const fs::path dir = o.out.empty() ? fs::path("runs") : fs::path(o.out);
  const auto result = trainer.fit(index, pairs, dir);
  out << "trained " << result.steps << " steps; best validation PSNR "
      << result.best_validation_psnr << " dB; best checkpoint " << result.best_checkpoint.string()
      << "\n";
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  const auto index = load_index(o.data_root);
  const auto archive = load_archive(o.checkpoint);
  auto generator = load_generator(archive);
  const auto& gc = generator->config();
  const auto type = o.map_type.empty() ? archive_map_type(archive) : parse_map_type(o.map_type);
  const bool rolling = rolling_choice(o.rolling, archive_rolling(archive));
  const std::uint64_t seed = o.seed.value_or(0);
  out << "seed " << seed << "\n";

  Split s;
  if (o.split.empty()) {
    s.train = build_pairs(index);
    s.test = s.train;
  } else {
    s = split_from_json(read_text(resolve_split(index.root, o.split)), index);
  }
  if (o.subset != "test" && o.subset != "train") {
    throw Error(ErrorKind::InvalidShape, "subset must be test or train");
  }
  const auto& pairs = o.subset == "test" ? s.test : s.train;
  SampleLoader loader(index, type, gc.height, gc.width);

  // The recogniser learns from the real images on the training side.
  std::optional<GestureClassifier> classifier;
  {
    std::vector<std::size_t> records;
    for (const auto& p : s.train) {
      records.push_back(p.source);
      records.push_back(p.target);
    }
    std::sort(records.begin(), records.end());
    records.erase(std::unique(records.begin(), records.end()), records.end());
    std::vector<torch::Tensor> images;
    std::vector<std::int64_t> labels;
    for (auto r : records) {
      images.push_back(loader.image(r));
      labels.push_back(index.records[r].annotation->category);
    }
    ClassifierOptions co;
    co.seed = seed;
    co.epochs = o.classifier_epochs;
    try {
      if (images.empty()) throw Error(ErrorKind::InsufficientSamples, "no training images");
      classifier =
          train_gesture_classifier(torch::stack(images), labels, gc.category_count, co).classifier;
    } catch (const Error& e) {
      err << "classifier unavailable, IS and F1 omitted: " << e.what() << "\n";
    }
  }
  SmallConvExtractor extractor;
  EvalOptions eo;
  eo.rolling = rolling;
  eo.fid_mode = parse_fid_mode(o.fid_mode);
  const auto report =
      evaluate(generator, index, loader, pairs, extractor, classifier ? &*classifier : nullptr, eo);
  out << report.table();
  if (!o.out.empty()) write_file(o.out, report.to_json());
  return 0;
}

int cmd_translate(const Options& o, std::ostream& out) {
  const auto bytes = read_file(o.checkpoint);
  const auto archive = decode_archive(bytes);
  TranslationService service;
  service.load(archive, content_id(bytes));
  TranslateRequest request;
  request.image = read_file(o.image);
  request.annotation = read_text(o.annotation);
  // A full annotation record may carry several kinds; keep the one the model was trained on.
  {
    auto j = nlohmann::json::parse(request.annotation, nullptr, false);
    const auto key = to_string(archive_map_type(archive));
    if (j.is_object() && j.contains(key)) request.annotation = nlohmann::json{{key, j.at(key)}}.dump();
  }
  request.category = o.category;
  request.rolling = rolling_choice(o.rolling, archive_rolling(archive));
  request.return_mask = !o.mask_out.empty();
  const auto result = service.translate(request);
  write_file(o.out, result.image_png);
  if (result.mask_png) write_file(o.mask_out, *result.mask_png);
  out << "wrote " << o.out << " in " << result.inference_ms << " ms\n";
  return 0;
}

int cmd_serve(const Options& o, std::ostream& out) {
  ServiceConfig sc;
  sc.max_image_bytes = o.max_image_bytes;
  TranslationService service(sc);
  service.load_file(o.checkpoint);
  out << "serving " << o.checkpoint << " on " << o.host << ":" << o.port << std::endl;
  return serve(service, o.host, o.port);
}

}  // namespace

nlohmann::json parse_key_value_config(const std::string& text) {
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidShape, "config line " + std::to_string(number) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::InvalidShape, "config line " + std::to_string(number) + ": empty key");
    nlohmann::json::json_pointer ptr;
    std::size_t start = 0;
    for (auto dot = key.find('.'); ; dot = key.find('.', start)) {
      ptr /= key.substr(start, dot - start);
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    j[ptr] = scalar_value(value);
  }
  return j;
}

nlohmann::json read_config_file(const std::string& path) {
  const auto text = read_text(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidShape, std::string("malformed config: ") + e.what());
    }
  }
  return parse_key_value_config(text);
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gesture-to-gesture translation toolkit", "deltagan"};
  app.require_subcommand(1);
  Options o;

  auto data_root = [&](CLI::App* c) { c->add_option("--data-root", o.data_root, "Dataset root")->required(); };
  auto seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed"); };
  auto rolling = [&](CLI::App* c) {
    c->add_flag("--rolling,!--no-rolling", o.rolling, "Two-stage generation on/off");
  };
  auto map_type = [&](CLI::App* c) {
    c->add_option("--map-type", o.map_type, "triangle, boundary or skeleton")
        ->check(CLI::IsMember({"triangle", "boundary", "skeleton"}));
  };

  auto* annotate = app.add_subcommand("annotate", "Rasterise annotation JSON into map PNGs");
  data_root(annotate);
  map_type(annotate);
  annotate->add_option("--out", o.out, "Output directory (default <root>/maps/<type>)");

  auto* split_cmd = app.add_subcommand("split", "Write a train/test pair split");
  data_root(split_cmd);
  seed(split_cmd);
  split_cmd->add_option("--mode", o.mode, "normal or challenging")
      ->check(CLI::IsMember({"normal", "challenging"}));
  split_cmd->add_option("--ratio", o.ratio, "Test fraction")->check(CLI::Range(0.0, 1.0));
  split_cmd->add_option("--name", o.name, "Split name (default: the mode)");
  split_cmd->add_option("--out", o.out, "Output file (default <root>/splits/<name>.json)");

  auto* train = app.add_subcommand("train", "Train a model");
  data_root(train);
  seed(train);
  rolling(train);
  map_type(train);
  train->add_option("--split", o.split, "Split name or file; training uses its train side");
  train->add_option("--config", o.config, "Config file (JSON or key = value)");
  train->add_option("--checkpoint", o.checkpoint, "Resume from this checkpoint");
  train->add_option("--out", o.out, "Run directory");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a split");
  data_root(evaluate_cmd);
  seed(evaluate_cmd);
  rolling(evaluate_cmd);
  map_type(evaluate_cmd);
  evaluate_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint")->required();
  evaluate_cmd->add_option("--split", o.split, "Split name or file (default: all pairs)");
  evaluate_cmd->add_option("--subset", o.subset, "test or train")
      ->check(CLI::IsMember({"test", "train"}));
  evaluate_cmd->add_option("--fid-mode", o.fid_mode, "correct or legacy")
      ->check(CLI::IsMember({"correct", "legacy"}));
  evaluate_cmd->add_option("--classifier-epochs", o.classifier_epochs, "Recogniser epochs");
  evaluate_cmd->add_option("--out", o.out, "Write the report JSON here");

  auto* translate = app.add_subcommand("translate", "Translate one image offline");
  rolling(translate);
  translate->add_option("--checkpoint", o.checkpoint, "Checkpoint")->required();
  translate->add_option("--image", o.image, "Source image")->required();
  translate->add_option("--annotation", o.annotation, "Annotation JSON file")->required();
  translate->add_option("--category", o.category, "Target category")->required();
  translate->add_option("--out", o.out, "Output PNG")->required();
  translate->add_option("--mask-out", o.mask_out, "Also write the attention mask");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP inference service");
  serve_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint")
      ->required()
      ->envname("DELTAGAN_CHECKPOINT");
  serve_cmd->add_option("--port", o.port, "Port")->envname("DELTAGAN_PORT");
  serve_cmd->add_option("--host", o.host, "Bind address")->envname("DELTAGAN_HOST");
  serve_cmd->add_option("--max-image-bytes", o.max_image_bytes, "Upload size limit")
      ->envname("DELTAGAN_MAX_IMAGE_BYTES");

  std::vector<char*> args;
  std::vector<std::string> storage(argv.begin(), argv.end());
  if (storage.empty()) storage.emplace_back("deltagan");
  for (auto& a : storage) args.push_back(a.data());
  try {
    app.parse(static_cast<int>(args.size()), args.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    if (annotate->parsed()) return cmd_annotate(o, out, err);
    if (split_cmd->parsed()) return cmd_split(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(o, out, err);
    if (translate->parsed()) return cmd_translate(o, out);
    if (serve_cmd->parsed()) return cmd_serve(o, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace deltagan
