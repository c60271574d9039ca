// Command-line frontend: synthetic data generation, graph construction,
// graph-network training, re-ranking, retrieval/detection evaluation,
// hyperparameter sweeps and gradient checking. Every run is reproducible
// from its inputs, flags and --seed.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "udg/eval.hpp"
#include "udg/gradcheck.hpp"
#include "udg/io.hpp"
#include "udg/mixhop.hpp"
#include "udg/rerank.hpp"
#include "udg/synth.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct CliPaths {
  std::string embeddings, train, query, gallery;
  std::string detections, ground_truth, rankings;
  std::string net_in, net_out, edges_out, out_file;
  std::string ks = "1,5,10";
  std::string lambdas = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
  std::string sweep_ks = "3,5,10";
  std::string channel = "body";
};

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    out.push_back(std::stod(token));
  }
  if (out.empty()) throw udg::ConfigError("empty numeric list");
  return out;
}

std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

udg::LoadOptions load_options(const udg::RunConfig& cfg) {
  udg::LoadOptions opts;
  opts.normalize = cfg.normalize;
  opts.min_head_score = cfg.min_head_score;
  return opts;
}

fs::path out_path(const udg::RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / name;
}

// Explicit output paths get their parent directory created too.
fs::path prepared(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  return path;
}

void emit(const ordered_json& j, const std::string& out_file) {
  const std::string text = j.dump();
  std::cout << text << "\n";
  if (!out_file.empty()) {
    std::ofstream out(prepared(out_file));
    out << text << "\n";
    if (!out) throw udg::FormatError("cannot write '" + out_file + "'");
  }
}

std::string embedding_extension(udg::FileFormat format) {
  return format == udg::FileFormat::Jsonl ? ".jsonl" : ".udgb";
}

int cmd_synth(const udg::RunConfig& cfg) {
  const udg::FileFormat format = udg::parse_format(cfg.format);
  if (format == udg::FileFormat::Auto) {
    throw udg::ConfigError("synth: --format must be binary or jsonl");
  }
  udg::Scenario scenario = udg::generate_scenario(scenario_config_from(cfg));
  const std::string ext = embedding_extension(format);
  const fs::path train_path = out_path(cfg, "train" + ext);
  const fs::path query_path = out_path(cfg, "query" + ext);
  const fs::path gallery_path = out_path(cfg, "gallery" + ext);
  udg::save_embeddings(scenario.train, train_path, format);
  udg::save_embeddings(scenario.query, query_path, format);
  udg::save_embeddings(scenario.gallery, gallery_path, format);

  ordered_json j;
  j["train_records"] = scenario.train.size();
  j["query_records"] = scenario.query.size();
  j["gallery_records"] = scenario.gallery.size();
  j["body_dim"] = scenario.train.body_dim();
  j["head_dim"] = scenario.train.head_dim();
  j["seed"] = cfg.seed;
  j["train_file"] = train_path.string();
  j["query_file"] = query_path.string();
  j["gallery_file"] = gallery_path.string();
  emit(j, "");
  return 0;
}

int cmd_knn(const udg::RunConfig& cfg, const CliPaths& paths) {
  const udg::EmbeddingSet set = udg::load_embeddings(
      paths.embeddings, udg::FileFormat::Auto, load_options(cfg));
  const udg::Channel channel =
      paths.channel == "head" ? udg::Channel::Head : udg::Channel::Body;
  const udg::KnnGraph graph =
      udg::build_knn_graph(set, channel, cfg.k, udg::parse_metric(cfg.metric));

  ordered_json j;
  j["nodes"] = graph.n_nodes;
  std::size_t carriers = 0;
  for (auto c : graph.has_channel) carriers += c;
  j["channel_nodes"] = carriers;
  j["channel"] = paths.channel;
  j["k"] = cfg.k;
  j["metric"] = cfg.metric;
  j["edges"] = graph.edge_count();
  try {
    j["purity"] = udg::neighbor_purity(graph, udg::labels_of(set));
  } catch (const udg::DegenerateGraphError&) {
    j["purity"] = nullptr;
  }
  if (!paths.edges_out.empty()) {
    std::ofstream out(prepared(paths.edges_out));
    if (!out) {
      throw udg::FormatError("cannot write '" + paths.edges_out + "'");
    }
    for (const auto& [src, dst] : graph.edge_list()) {
      ordered_json edge;
      edge["src"] = set[src].record_id;
      edge["dst"] = set[dst].record_id;
      out << edge.dump() << "\n";
    }
    j["edges_file"] = paths.edges_out;
  }
  emit(j, paths.out_file);
  return 0;
}

int cmd_train_gcn(const udg::RunConfig& cfg, const CliPaths& paths) {
  const udg::PipelineConfig pcfg = pipeline_config_from(cfg);
  const udg::EmbeddingSet train = udg::load_embeddings(
      paths.train, udg::FileFormat::Auto, load_options(cfg));
  const udg::PipelineTrainResult result = udg::train_pipeline_net(train, pcfg);

  const fs::path net_path = paths.net_out.empty()
                                ? out_path(cfg, "net.udgn")
                                : prepared(paths.net_out);
  udg::save_net(result.net, net_path);

  ordered_json j;
  j["train_records"] = train.size();
  j["epochs"] = cfg.epochs;
  j["initial_loss"] = result.loss_history.empty()
                          ? ordered_json(nullptr)
                          : ordered_json(result.loss_history.front());
  j["final_loss" ] = result.loss_history.empty()
                         ? ordered_json(nullptr)
                         : ordered_json(result.loss_history.back());
  j["train_accuracy"] = result.train_accuracy;
  j["net_file"] = net_path.string();
  emit(j, paths.out_file);
  return 0;
}

int cmd_rerank(const udg::RunConfig& cfg, const CliPaths& paths) {
  const udg::PipelineConfig pcfg = pipeline_config_from(cfg);
  const udg::LoadOptions opts = load_options(cfg);
  const udg::EmbeddingSet query =
      udg::load_embeddings(paths.query, udg::FileFormat::Auto, opts);
  const udg::EmbeddingSet gallery =
      udg::load_embeddings(paths.gallery, udg::FileFormat::Auto, opts);

  udg::MixhopNet net;
  if (!paths.net_in.empty()) {
    net = udg::load_net(paths.net_in);
  } else if (!paths.train.empty()) {
    const udg::EmbeddingSet train =
        udg::load_embeddings(paths.train, udg::FileFormat::Auto, opts);
    net = udg::train_pipeline_net(train, pcfg).net;
    if (!paths.net_out.empty()) udg::save_net(net, prepared(paths.net_out));
  } else {
    throw udg::ConfigError("rerank: need --train or --net");
  }

  const udg::PipelineResult result =
      udg::rerank_with_net(net, query, gallery, pcfg);
  const fs::path rankings_path = out_path(cfg, "rankings.jsonl");
  udg::save_rankings(result.rankings, rankings_path);

  ordered_json j;
  j["queries"] = query.size();
  j["gallery_records"] = gallery.size();
  j["k"] = cfg.k;
  j["lambda"] = cfg.lambda;
  j["graph"] = cfg.graph;
  j["transfer_mode"] = cfg.transfer_mode;
  j["seed"] = cfg.seed;
  j["rankings_file"] = rankings_path.string();
  emit(j, paths.out_file);
  return 0;
}

int cmd_eval_retrieval(const udg::RunConfig& cfg, const CliPaths& paths) {
  const udg::LoadOptions opts = load_options(cfg);
  const auto rankings = udg::load_rankings(paths.rankings);
  const udg::EmbeddingSet query =
      udg::load_embeddings(paths.query, udg::FileFormat::Auto, opts);
  const udg::EmbeddingSet gallery =
      udg::load_embeddings(paths.gallery, udg::FileFormat::Auto, opts);

  std::vector<int> ks;
  for (double k : parse_double_list(paths.ks)) {
    ks.push_back(static_cast<int>(k));
  }
  const udg::RetrievalMetrics metrics =
      udg::map_and_cmc(udg::to_ranked_results(rankings, query, gallery), ks);

  const std::string text = udg::retrieval_metrics_json(metrics);
  std::cout << text << "\n";
  if (!paths.out_file.empty()) {
    std::ofstream out(prepared(paths.out_file));
    out << text << "\n";
    if (!out) throw udg::FormatError("cannot write '" + paths.out_file + "'");
  }
  return 0;
}

int cmd_eval_detection(const udg::RunConfig& cfg, const CliPaths& paths) {
  if (cfg.iou_threshold <= 0.0 || cfg.iou_threshold > 1.0) {
    throw udg::ConfigError("iou_threshold must lie in (0,1]");
  }
  const auto dets = udg::load_detection_boxes(paths.detections);
  const auto gts = udg::load_ground_truth_boxes(paths.ground_truth);
  const udg::DetectionMetrics metrics =
      udg::detection_ap_recall(dets, gts, cfg.iou_threshold);
  const std::string text = udg::detection_metrics_json(metrics);
  std::cout << text << "\n";
  if (!paths.out_file.empty()) {
    std::ofstream out(prepared(paths.out_file));
    out << text << "\n";
    if (!out) throw udg::FormatError("cannot write '" + paths.out_file + "'");
  }
  return 0;
}

// One CSV row of retrieval metrics per swept value.
void write_sweep_csv(
    const fs::path& path, const std::string& param_name,
    const std::vector<std::pair<double, udg::RetrievalMetrics>>& rows,
    const std::vector<int>& ks) {
  std::ofstream out(path);
  if (!out) throw udg::FormatError("cannot write '" + path.string() + "'");
  out << param_name << ",mAP";
  for (int k : ks) out << ",rank" << k;
  out << ",excluded_queries\n";
  for (const auto& [value, metrics] : rows) {
    out << format_double(value) << "," << format_double(metrics.map);
    for (const auto& [k, acc] : metrics.rank_at) {
      (void)k;
      out << "," << format_double(acc);
    }
    out << "," << metrics.excluded_queries << "\n";
  }
  if (!out) throw udg::FormatError("write failure on '" + path.string() + "'");
}

int cmd_sweep_lambda(const udg::RunConfig& cfg, const CliPaths& paths) {
  udg::PipelineConfig pcfg = pipeline_config_from(cfg);
  const udg::LoadOptions opts = load_options(cfg);
  const udg::EmbeddingSet query =
      udg::load_embeddings(paths.query, udg::FileFormat::Auto, opts);
  const udg::EmbeddingSet gallery =
      udg::load_embeddings(paths.gallery, udg::FileFormat::Auto, opts);

  udg::MixhopNet net;
  if (!paths.net_in.empty()) {
    net = udg::load_net(paths.net_in);
  } else if (!paths.train.empty()) {
    const udg::EmbeddingSet train =
        udg::load_embeddings(paths.train, udg::FileFormat::Auto, opts);
    net = udg::train_pipeline_net(train, pcfg).net;
  } else {
    throw udg::ConfigError("sweep-lambda: need --train or --net");
  }

  // The similarity matrices are lambda-independent; only fusion reruns.
  const udg::PipelineResult base =
      udg::rerank_with_net(net, query, gallery, pcfg);
  std::vector<int> ks;
  for (double k : parse_double_list(paths.ks)) {
    ks.push_back(static_cast<int>(k));
  }

  std::vector<std::pair<double, udg::RetrievalMetrics>> rows;
  for (double lambda : parse_double_list(paths.lambdas)) {
    udg::FusionConfig fusion = pcfg.fusion;
    fusion.lambda = lambda;
    auto rankings = udg::rank_by_similarity(udg::fuse_similarities(
        base.head_similarity, base.update_similarity, fusion));
    if (pcfg.exclude_same_frame) {
      rankings = udg::exclude_same_frame_entries(rankings, query, gallery);
    }
    rows.emplace_back(lambda,
                      udg::map_and_cmc(
                          udg::to_ranked_results(rankings, query, gallery), ks));
  }

  const fs::path csv_path = paths.out_file.empty()
                                ? out_path(cfg, "sweep_lambda.csv")
                                : prepared(paths.out_file);
  write_sweep_csv(csv_path, "lambda", rows, ks);
  ordered_json j;
  j["rows"] = rows.size();
  j["csv_file"] = csv_path.string();
  emit(j, "");
  return 0;
}

int cmd_sweep_k(const udg::RunConfig& cfg, const CliPaths& paths) {
  pipeline_config_from(cfg);  // validate before touching files
  const udg::LoadOptions opts = load_options(cfg);
  const udg::EmbeddingSet train =
      udg::load_embeddings(paths.train, udg::FileFormat::Auto, opts);
  const udg::EmbeddingSet query =
      udg::load_embeddings(paths.query, udg::FileFormat::Auto, opts);
  const udg::EmbeddingSet gallery =
      udg::load_embeddings(paths.gallery, udg::FileFormat::Auto, opts);

  std::vector<int> ks;
  for (double k : parse_double_list(paths.ks)) {
    ks.push_back(static_cast<int>(k));
  }

  std::vector<std::pair<double, udg::RetrievalMetrics>> rows;
  for (double k_value : parse_double_list(paths.sweep_ks)) {
    udg::PipelineConfig pcfg = pipeline_config_from(cfg);
    pcfg.k = static_cast<int>(k_value);
    const udg::PipelineResult result =
        udg::rerank_pipeline(train, query, gallery, pcfg);
    rows.emplace_back(
        k_value, udg::map_and_cmc(
                     udg::to_ranked_results(result.rankings, query, gallery),
                     ks));
  }

  const fs::path csv_path = paths.out_file.empty()
                                ? out_path(cfg, "sweep_k.csv")
                                : prepared(paths.out_file);
  write_sweep_csv(csv_path, "k", rows, ks);
  ordered_json j;
  j["rows"] = rows.size();
  j["csv_file"] = csv_path.string();
  emit(j, "");
  return 0;
}

int cmd_gradcheck(const udg::RunConfig& cfg, const CliPaths& paths) {
  const auto reports = udg::run_all_gradchecks(cfg.seed);
  ordered_json j = ordered_json::array();
  bool all_pass = true;
  for (const auto& report : reports) {
    ordered_json entry;
    entry["name"] = report.name;
    entry["max_rel_error"] = report.max_rel_error;
    entry["parameters"] = report.n_parameters;
    entry["pass"] = report.pass;
    j.push_back(entry);
    all_pass = all_pass && report.pass;
  }
  emit(j, paths.out_file);
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  udg::RunConfig cfg;
  CliPaths paths;

  // The config file seeds the defaults; explicitly passed flags then win.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        udg::apply_config_file(cfg, argv[i + 1]);
      } catch (const udg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
    }
  }

  CLI::App app{"Head/body graph re-ranking toolkit"};
  app.require_subcommand(1);
  std::string config_path;

  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--out-dir", cfg.out_dir, "output directory");
    sub->add_option("--format", cfg.format, "embedding format: binary|jsonl");
  };
  auto add_load = [&](CLI::App* sub) {
    sub->add_flag(
        "--no-normalize",
        [&cfg](std::int64_t) { cfg.normalize = false; },
        "keep vectors un-normalized on load");
    sub->add_option("--min-head-score", cfg.min_head_score,
                    "drop heads of records scored below this");
  };
  auto add_pipeline = [&](CLI::App* sub) {
    sub->add_option("--k", cfg.k, "neighbors per node");
    sub->add_option("--metric", cfg.metric, "cosine|euclidean");
    sub->add_option("--transfer-mode", cfg.transfer_mode, "replace|union");
    sub->add_option("--graph", cfg.graph, "head|body driven graph");
    sub->add_option("--depth", cfg.depth, "graph layers");
    sub->add_option("--powers", cfg.powers, "adjacency powers, e.g. 0,1,2");
    sub->add_option("--hidden", cfg.hidden_width, "hidden width per power");
    sub->add_option("--lr", cfg.lr, "learning rate");
    sub->add_option("--epochs", cfg.epochs, "training epochs");
    sub->add_option("--lambda", cfg.lambda, "head similarity weight");
    sub->add_option("--missing-head-policy", cfg.missing_head_policy,
                    "fallback|drop-query");
    sub->add_flag(
        "--keep-same-frame",
        [&cfg](std::int64_t) { cfg.exclude_same_frame = false; },
        "keep same-frame gallery entries in rankings");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scenario");
  add_shared(synth);
  synth->add_option("--identities", cfg.identities, "identity count");
  synth->add_option("--clothes", cfg.clothes, "clothes per identity");
  synth->add_option("--samples-per-clothing", cfg.samples_per_clothing,
                    "samples per clothing");
  synth->add_option("--body-dim", cfg.body_dim, "body dimension");
  synth->add_option("--head-dim", cfg.head_dim, "head dimension");
  synth->add_option("--body-sigma", cfg.body_sigma, "body noise sigma");
  synth->add_option("--head-sigma", cfg.head_sigma, "head noise sigma");
  synth->add_option("--confusion", cfg.confusion,
                    "clothing confusion probability");
  synth->add_option("--head-missing-rate", cfg.head_missing_rate,
                    "head drop probability");
  synth->add_option("--train-fraction", cfg.train_fraction,
                    "identity share for training");

  CLI::App* knn = app.add_subcommand("knn", "build a k-NN graph and report it");
  add_shared(knn);
  add_load(knn);
  knn->add_option("--embeddings", paths.embeddings, "embedding file")
      ->required();
  knn->add_option("--channel", paths.channel, "body|head");
  knn->add_option("--k", cfg.k, "neighbors per node");
  knn->add_option("--metric", cfg.metric, "cosine|euclidean");
  knn->add_option("--edges-out", paths.edges_out, "edge list JSONL");
  knn->add_option("--out", paths.out_file, "JSON report file");

  CLI::App* train = app.add_subcommand("train-gcn", "train the graph network");
  add_shared(train);
  add_load(train);
  add_pipeline(train);
  train->add_option("--train", paths.train, "training embedding file")
      ->required();
  train->add_option("--net-out", paths.net_out, "trained net file");
  train->add_option("--out", paths.out_file, "JSON report file");

  CLI::App* rerank = app.add_subcommand("rerank", "run the re-ranking pipeline");
  add_shared(rerank);
  add_load(rerank);
  add_pipeline(rerank);
  rerank->add_option("--train", paths.train, "training embedding file");
  rerank->add_option("--net", paths.net_in, "pre-trained net file");
  rerank->add_option("--net-out", paths.net_out, "save the trained net");
  rerank->add_option("--query", paths.query, "query embedding file")
      ->required();
  rerank->add_option("--gallery", paths.gallery, "gallery embedding file")
      ->required();
  rerank->add_option("--out", paths.out_file, "JSON report file");

  CLI::App* evalr =
      app.add_subcommand("eval-retrieval", "mAP and rank-k of rankings");
  add_shared(evalr);
  add_load(evalr);
  evalr->add_option("--rankings", paths.rankings, "rankings JSONL")->required();
  evalr->add_option("--query", paths.query, "query embedding file")->required();
  evalr->add_option("--gallery", paths.gallery, "gallery embedding file")
      ->required();
  evalr->add_option("--ks", paths.ks, "rank-k list");
  evalr->add_option("--out", paths.out_file, "metrics JSON file");

  CLI::App* evald =
      app.add_subcommand("eval-detection", "detection AP and recall");
  add_shared(evald);
  evald->add_option("--detections", paths.detections, "detections JSONL")
      ->required();
  evald->add_option("--ground-truth", paths.ground_truth, "ground truth JSONL")
      ->required();
  evald->add_option("--iou-threshold", cfg.iou_threshold, "match threshold");
  evald->add_option("--out", paths.out_file, "metrics JSON file");

  CLI::App* sweepl =
      app.add_subcommand("sweep-lambda", "retrieval metrics across lambda");
  add_shared(sweepl);
  add_load(sweepl);
  add_pipeline(sweepl);
  sweepl->add_option("--train", paths.train, "training embedding file");
  sweepl->add_option("--net", paths.net_in, "pre-trained net file");
  sweepl->add_option("--query", paths.query, "query embedding file")
      ->required();
  sweepl->add_option("--gallery", paths.gallery, "gallery embedding file")
      ->required();
  sweepl->add_option("--lambdas", paths.lambdas, "lambda values");
  sweepl->add_option("--ks", paths.ks, "rank-k list");
  sweepl->add_option("--out", paths.out_file, "CSV file");

  CLI::App* sweepk =
      app.add_subcommand("sweep-k", "retrieval metrics across graph k");
  add_shared(sweepk);
  add_load(sweepk);
  add_pipeline(sweepk);
  sweepk->add_option("--train", paths.train, "training embedding file")
      ->required();
  sweepk->add_option("--query", paths.query, "query embedding file")
      ->required();
  sweepk->add_option("--gallery", paths.gallery, "gallery embedding file")
      ->required();
  sweepk->add_option("--k-values", paths.sweep_ks, "k values to sweep");
  sweepk->add_option("--ks", paths.ks, "rank-k list");
  sweepk->add_option("--out", paths.out_file, "CSV file");

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_shared(gradcheck);
  gradcheck->add_option("--out", paths.out_file, "JSON report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(cfg);
    if (knn->parsed()) return cmd_knn(cfg, paths);
    if (train->parsed()) return cmd_train_gcn(cfg, paths);
    if (rerank->parsed()) return cmd_rerank(cfg, paths);
    if (evalr->parsed()) return cmd_eval_retrieval(cfg, paths);
    if (evald->parsed()) return cmd_eval_detection(cfg, paths);
    if (sweepl->parsed()) return cmd_sweep_lambda(cfg, paths);
    if (sweepk->parsed()) return cmd_sweep_k(cfg, paths);
    if (gradcheck->parsed()) return cmd_gradcheck(cfg, paths);
  } catch (const udg::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const udg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
