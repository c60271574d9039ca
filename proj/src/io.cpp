#include "udg/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binary_util.hpp"

namespace udg {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

FileFormat parse_format(const std::string& name) {
  if (name == "auto") return FileFormat::Auto;
  if (name == "binary") return FileFormat::Binary;
  if (name == "jsonl") return FileFormat::Jsonl;
  throw ConfigError("unknown format '" + name + "'");
}

namespace {

constexpr char kEmbeddingMagic[4] = {'U', 'D', 'G', 'B'};
constexpr std::uint32_t kEmbeddingVersion = 1;

// Vectors are persisted in single precision in both formats; rounding
// through float here keeps binary and JSONL interconvertible bit-for-bit.
double to_storage(double x) { return static_cast<double>(static_cast<float>(x)); }

void check_finite(const EmbeddingRecord& rec, std::size_t index) {
  for (double x : rec.body) {
    if (!std::isfinite(x)) {
      throw DataError("record " + std::to_string(index) +
                      ": non-finite body component");
    }
  }
  if (rec.head) {
    for (double x : *rec.head) {
      if (!std::isfinite(x)) {
        throw DataError("record " + std::to_string(index) +
                        ": non-finite head component");
      }
    }
  }
}

void finish_record(EmbeddingSet& set, EmbeddingRecord rec, std::size_t index,
                   const LoadOptions& opts) {
  check_finite(rec, index);
  if (rec.head && rec.score < opts.min_head_score) rec.head.reset();
  if (opts.normalize) {
    l2_normalize_inplace(rec.body);
    if (rec.head) l2_normalize_inplace(*rec.head);
  }
  try {
    set.add(std::move(rec));
  } catch (const DimensionError& e) {
    throw FormatError("record " + std::to_string(index) + ": " + e.what());
  }
}

void save_binary(const EmbeddingSet& set, const std::filesystem::path& path) {
  detail::BinaryWriter w(path.string());
  w.bytes(kEmbeddingMagic, 4);
  w.u32(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(set.size()));
  w.u32(static_cast<std::uint32_t>(set.body_dim()));
  w.u32(static_cast<std::uint32_t>(set.head_dim()));
  for (const auto& rec : set.records()) {
    w.u64(rec.record_id);
    w.u64(rec.frame_id);
    w.i64(rec.label ? *rec.label : -1);
    w.i64(rec.clothing_id ? *rec.clothing_id : -1);
    w.u8(rec.head ? 1 : 0);
    w.u8(rec.box ? 1 : 0);
    if (rec.box) {
      w.f32(static_cast<float>(rec.box->x1));
      w.f32(static_cast<float>(rec.box->y1));
      w.f32(static_cast<float>(rec.box->x2));
      w.f32(static_cast<float>(rec.box->y2));
    }
    w.f32(static_cast<float>(rec.score));
    for (double x : rec.body) w.f32(static_cast<float>(x));
    if (rec.head) {
      for (double x : *rec.head) w.f32(static_cast<float>(x));
    }
  }
  w.close();
}

EmbeddingSet load_binary(const std::filesystem::path& path,
                         const LoadOptions& opts) {
  detail::BinaryReader r(path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw FormatError("'" + path.string() +
                      "': bad magic, not an embedding file");
  }
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingVersion) {
    throw FormatError("'" + path.string() + "': unsupported version " +
                      std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  const std::uint32_t body_dim = r.u32();
  const std::uint32_t head_dim = r.u32();
  EmbeddingSet set(body_dim, head_dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.record_id = r.u64();
    rec.frame_id = r.u64();
    const std::int64_t label = r.i64();
    if (label >= 0) rec.label = static_cast<int>(label);
    const std::int64_t clothing = r.i64();
    if (clothing >= 0) rec.clothing_id = static_cast<int>(clothing);
    const bool has_head = r.u8() != 0;
    const bool has_box = r.u8() != 0;
    if (has_box) {
      Box box;
      box.x1 = r.f32();
      box.y1 = r.f32();
      box.x2 = r.f32();
      box.y2 = r.f32();
      rec.box = box;
    }
    rec.score = r.f32();
    rec.body.resize(body_dim);
    for (auto& x : rec.body) x = r.f32();
    if (has_head) {
      std::vector<double> head(head_dim);
      for (auto& x : head) x = r.f32();
      rec.head = std::move(head);
    }
    finish_record(set, std::move(rec), i, opts);
  }
  return set;
}

json record_to_json(const EmbeddingRecord& rec) {
  ordered_json j;
  j["id"] = rec.record_id;
  j["frame"] = rec.frame_id;
  j["label"] = rec.label ? json(*rec.label) : json(nullptr);
  j["clothing"] = rec.clothing_id ? json(*rec.clothing_id) : json(nullptr);
  if (rec.box) {
    j["box"] = {to_storage(rec.box->x1), to_storage(rec.box->y1),
                to_storage(rec.box->x2), to_storage(rec.box->y2)};
  } else {
    j["box"] = nullptr;
  }
  j["score"] = to_storage(rec.score);
  json body = json::array();
  for (double x : rec.body) body.push_back(to_storage(x));
  j["body"] = std::move(body);
  if (rec.head) {
    json head = json::array();
    for (double x : *rec.head) head.push_back(to_storage(x));
    j["head"] = std::move(head);
  } else {
    j["head"] = nullptr;
  }
  return j;
}

void save_jsonl(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot open '" + path.string() + "' for writing");
  }
  for (const auto& rec : set.records()) {
    out << record_to_json(rec).dump() << '\n';
  }
  if (!out) throw FormatError("write failure on '" + path.string() + "'");
}

EmbeddingSet load_jsonl(const std::filesystem::path& path,
                        const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open '" + path.string() + "' for reading");
  }
  // Dimensions come from the first record.
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw FormatError("'" + path.string() + "': malformed JSON at line " +
                        std::to_string(line_no));
    }
    rows.push_back(std::move(j));
  }
  std::size_t body_dim = 0, head_dim = 0;
  if (!rows.empty()) {
    body_dim = rows.front().at("body").size();
    for (const auto& j : rows) {
      if (!j.at("head").is_null()) {
        head_dim = j.at("head").size();
        break;
      }
    }
  }
  EmbeddingSet set(body_dim, head_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& j = rows[i];
    try {
      EmbeddingRecord rec;
      rec.record_id = j.at("id").get<std::uint64_t>();
      rec.frame_id = j.at("frame").get<std::uint64_t>();
      if (!j.at("label").is_null()) rec.label = j.at("label").get<int>();
      if (!j.at("clothing").is_null()) {
        rec.clothing_id = j.at("clothing").get<int>();
      }
      if (!j.at("box").is_null()) {
        const auto& b = j.at("box");
        if (b.size() != 4) {
          throw FormatError("record " + std::to_string(i) +
                            ": box needs 4 coordinates");
        }
        rec.box = Box{b[0].get<double>(), b[1].get<double>(),
                      b[2].get<double>(), b[3].get<double>()};
      }
      rec.score = j.at("score").get<double>();
      rec.body = j.at("body").get<std::vector<double>>();
      if (!j.at("head").is_null()) {
        rec.head = j.at("head").get<std::vector<double>>();
      }
      finish_record(set, std::move(rec), i, opts);
    } catch (const json::exception& e) {
      throw FormatError("'" + path.string() + "' record " + std::to_string(i) +
                        ": " + e.what());
    }
  }
  return set;
}

FileFormat sniff_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open '" + path.string() + "' for reading");
  }
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, kEmbeddingMagic, 4) == 0) {
    return FileFormat::Binary;
  }
  return FileFormat::Jsonl;
}

}  // namespace

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                     FileFormat format) {
  switch (format) {
    case FileFormat::Binary:
      save_binary(set, path);
      break;
    case FileFormat::Jsonl:
      save_jsonl(set, path);
      break;
    case FileFormat::Auto:
      throw ConfigError("save_embeddings: format must be binary or jsonl");
  }
}

EmbeddingSet load_embeddings(const std::filesystem::path& path,
                             FileFormat format, const LoadOptions& opts) {
  if (format == FileFormat::Auto) format = sniff_format(path);
  return format == FileFormat::Binary ? load_binary(path, opts)
                                      : load_jsonl(path, opts);
}

namespace {

std::vector<BoxRecord> load_boxes(const std::filesystem::path& path,
                                  bool want_identity) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open '" + path.string() + "' for reading");
  }
  std::vector<BoxRecord> boxes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw FormatError("'" + path.string() + "': malformed JSON at line " +
                        std::to_string(line_no));
    }
    try {
      BoxRecord rec;
      rec.frame_id = j.at("frame").get<std::uint64_t>();
      const auto& b = j.at("box");
      if (b.size() != 4) {
        throw FormatError("'" + path.string() + "' line " +
                          std::to_string(line_no) + ": box needs 4 coordinates");
      }
      rec.box = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                    b[3].get<double>()};
      if (!rec.box.valid()) {
        throw BoxError("'" + path.string() + "' line " +
                       std::to_string(line_no) + ": degenerate box");
      }
      if (want_identity) {
        rec.identity = j.at("identity").get<int>();
      } else {
        rec.score = j.at("score").get<double>();
        if (!(rec.score >= 0.0 && rec.score <= 1.0)) {
          throw DataError("'" + path.string() + "' line " +
                          std::to_string(line_no) + ": score outside [0,1]");
        }
      }
      boxes.push_back(rec);
    } catch (const json::exception& e) {
      throw FormatError("'" + path.string() + "' line " +
                        std::to_string(line_no) + ": " + e.what());
    }
  }
  return boxes;
}

}  // namespace

std::vector<BoxRecord> load_detection_boxes(const std::filesystem::path& path) {
  return load_boxes(path, false);
}

std::vector<BoxRecord> load_ground_truth_boxes(
    const std::filesystem::path& path) {
  return load_boxes(path, true);
}

void save_rankings(const std::vector<RankedList>& rankings,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot open '" + path.string() + "' for writing");
  }
  for (const auto& list : rankings) {
    ordered_json j;
    j["query_id"] = list.query_id;
    j["ranked_gallery_ids"] = list.gallery_ids;
    j["scores"] = list.scores;
    out << j.dump() << '\n';
  }
  if (!out) throw FormatError("write failure on '" + path.string() + "'");
}

std::vector<RankedList> load_rankings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open '" + path.string() + "' for reading");
  }
  std::vector<RankedList> rankings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw FormatError("'" + path.string() + "': malformed JSON at line " +
                        std::to_string(line_no));
    }
    try {
      RankedList list;
      list.query_id = j.at("query_id").get<std::uint64_t>();
      list.gallery_ids =
          j.at("ranked_gallery_ids").get<std::vector<std::uint64_t>>();
      if (j.contains("scores")) {
        list.scores = j.at("scores").get<std::vector<double>>();
        if (list.scores.size() != list.gallery_ids.size()) {
          throw FormatError("'" + path.string() + "' line " +
                            std::to_string(line_no) +
                            ": scores/ids length mismatch");
        }
      }
      rankings.push_back(std::move(list));
    } catch (const json::exception& e) {
      throw FormatError("'" + path.string() + "' line " +
                        std::to_string(line_no) + ": " + e.what());
    }
  }
  return rankings;
}

std::vector<RankedResult> to_ranked_results(
    const std::vector<RankedList>& rankings, const EmbeddingSet& query,
    const EmbeddingSet& gallery) {
  std::vector<RankedResult> results;
  results.reserve(rankings.size());
  for (const auto& list : rankings) {
    const auto qidx = query.index_of(list.query_id);
    if (!qidx) {
      throw DataError("ranking references unknown query id " +
                      std::to_string(list.query_id));
    }
    const auto& qlabel = query[*qidx].label;
    RankedResult result;
    result.query_id = list.query_id;
    result.gallery_ids = list.gallery_ids;
    result.relevant.reserve(list.gallery_ids.size());
    for (std::uint64_t gid : list.gallery_ids) {
      const auto gidx = gallery.index_of(gid);
      if (!gidx) {
        throw DataError("ranking references unknown gallery id " +
                        std::to_string(gid));
      }
      const auto& glabel = gallery[*gidx].label;
      result.relevant.push_back(qlabel && glabel && *qlabel == *glabel ? 1 : 0);
    }
    results.push_back(std::move(result));
  }
  return results;
}

std::string retrieval_metrics_json(const RetrievalMetrics& metrics) {
  ordered_json j;
  j["mAP"] = metrics.map;
  for (const auto& [k, acc] : metrics.rank_at) {
    j["rank" + std::to_string(k)] = acc;
  }
  j["excluded_queries"] = metrics.excluded_queries;
  return j.dump();
}

std::string detection_metrics_json(const DetectionMetrics& metrics) {
  ordered_json j;
  j["detection_ap"] = metrics.ap;
  j["detection_recall"] = metrics.recall;
  return j.dump();
}

namespace {

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + value + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': bad boolean '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path.string() + "'");
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("'" + path.string() + "' line " +
                        std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "k") cfg.k = to_int(key, value);
    else if (key == "lambda") cfg.lambda = to_double(key, value);
    else if (key == "transfer_mode") cfg.transfer_mode = value;
    else if (key == "powers") cfg.powers = value;
    else if (key == "depth") cfg.depth = to_int(key, value);
    else if (key == "hidden_width") cfg.hidden_width = to_int(key, value);
    else if (key == "lr") cfg.lr = to_double(key, value);
    else if (key == "epochs") cfg.epochs = to_int(key, value);
    else if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "min_head_score") cfg.min_head_score = to_double(key, value);
    else if (key == "iou_threshold") cfg.iou_threshold = to_double(key, value);
    else if (key == "graph") cfg.graph = value;
    else if (key == "metric") cfg.metric = value;
    else if (key == "missing_head_policy") cfg.missing_head_policy = value;
    else if (key == "normalize") cfg.normalize = to_bool(key, value);
    else if (key == "exclude_same_frame") cfg.exclude_same_frame = to_bool(key, value);
    else if (key == "format") cfg.format = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "identities") cfg.identities = to_int(key, value);
    else if (key == "clothes") cfg.clothes = to_int(key, value);
    else if (key == "samples_per_clothing") cfg.samples_per_clothing = to_int(key, value);
    else if (key == "body_dim") cfg.body_dim = to_int(key, value);
    else if (key == "head_dim") cfg.head_dim = to_int(key, value);
    else if (key == "body_sigma") cfg.body_sigma = to_double(key, value);
    else if (key == "head_sigma") cfg.head_sigma = to_double(key, value);
    else if (key == "confusion") cfg.confusion = to_double(key, value);
    else if (key == "head_missing_rate") cfg.head_missing_rate = to_double(key, value);
    else if (key == "train_fraction") cfg.train_fraction = to_double(key, value);
    else {
      throw ConfigError("'" + path.string() + "' line " +
                        std::to_string(line_no) + ": unknown key '" + key +
                        "'");
    }
  }
}

std::vector<int> parse_powers(const std::string& csv) {
  std::vector<int> powers;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    powers.push_back(to_int("powers", token));
  }
  if (powers.empty()) throw ConfigError("powers: empty list");
  return powers;
}

PipelineConfig pipeline_config_from(const RunConfig& cfg) {
  // Every field is range-checked here, before any file is touched.
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) {
    throw ConfigError("lambda must lie in [0,1]");
  }
  if (cfg.depth < 1) throw ConfigError("depth must be >= 1");
  if (cfg.hidden_width < 1) throw ConfigError("hidden_width must be >= 1");
  if (cfg.lr <= 0.0) throw ConfigError("lr must be > 0");
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.min_head_score < 0.0 || cfg.min_head_score > 1.0) {
    throw ConfigError("min_head_score must lie in [0,1]");
  }

  PipelineConfig p;
  p.k = cfg.k;
  p.metric = parse_metric(cfg.metric);
  p.transfer_mode = parse_transfer_mode(cfg.transfer_mode);
  p.graph_source = parse_graph_source(cfg.graph);
  p.net.depth = cfg.depth;
  p.net.powers = parse_powers(cfg.powers);
  p.net.hidden_width = cfg.hidden_width;
  p.learning_rate = cfg.lr;
  p.epochs = cfg.epochs;
  p.seed = cfg.seed;
  p.fusion.lambda = cfg.lambda;
  p.fusion.missing_head_policy =
      parse_missing_head_policy(cfg.missing_head_policy);
  p.exclude_same_frame = cfg.exclude_same_frame;
  return p;
}

ScenarioConfig scenario_config_from(const RunConfig& cfg) {
  ScenarioConfig s;
  s.n_identities = cfg.identities;
  s.clothes_per_identity = cfg.clothes;
  s.samples_per_clothing = cfg.samples_per_clothing;
  s.body_dim = cfg.body_dim;
  s.head_dim = cfg.head_dim;
  s.body_noise_sigma = cfg.body_sigma;
  s.head_noise_sigma = cfg.head_sigma;
  s.clothing_confusion = cfg.confusion;
  s.head_missing_rate = cfg.head_missing_rate;
  s.train_fraction = cfg.train_fraction;
  s.seed = cfg.seed;
  return s;
}

}  // namespace udg
