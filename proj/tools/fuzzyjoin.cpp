#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fuzzyjoin/ann_index.hpp"
#include "fuzzyjoin/data_pipeline.hpp"
#include "fuzzyjoin/error.hpp"
#include "fuzzyjoin/join.hpp"
#include "fuzzyjoin/mining.hpp"
#include "fuzzyjoin/name_encoding.hpp"
#include "fuzzyjoin/trainer.hpp"

using namespace fuzzyjoin;
using json = nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::size_t trees = kDefaultTrees;
  std::size_t threads = 1;
};

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

std::vector<std::string> read_column(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

std::vector<EntityRecord> read_entity_file(const std::string& path) {
  auto in = open_in(path);
  return read_entities(in);
}

Model read_model(const std::string& path) {
  auto in = open_in(path, true);
  return load_model(in);
}

// Character table from a file, or random over the entity charset.
struct CharSource {
  std::string path;
  std::size_t dim = 32;

  CharEmbeddingTable load(std::span<const EntityRecord> entities, std::uint64_t seed) const {
    if (!path.empty()) {
      auto in = open_in(path);
      return load_char_embeddings(in);
    }
    std::vector<std::string> names;
    for (const auto& e : entities) names.insert(names.end(), e.names.begin(), e.names.end());
    return random_char_embeddings(charset_of(names), dim, seed);
  }

  void add_options(CLI::App* cmd) {
    auto* chars = cmd->add_option("--chars", path, "Character embedding file");
    cmd->add_option("--char-dim", dim, "Dimension of random character embeddings")
        ->capture_default_str()
        ->excludes(chars);
  }
};

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoul(part, &used);
      if (used != part.size() || v == 0) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad layer size '" + part + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no layer sizes given");
  return out;
}

json to_json(const EvalReport& r) {
  return {{"k", r.k},
          {"recall", r.recall},
          {"precision_at_1", r.precision_at_1},
          {"precision_all", r.precision_all},
          {"anchors_evaluated", r.anchors_evaluated}};
}

json to_json(const EpochRecord& e) {
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"validation_accuracy", e.validation_accuracy},
          {"grad_norm", e.grad_norm}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuzzy joins over learned name embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--trees", g.trees, "Trees in the ANN index")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str();

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Cleanse raw records into entities");
  std::string raw_path, prep_out, report_path, kind_name = "person";
  prepare->add_option("--in", raw_path, "Raw JSON-lines records")->required();
  prepare->add_option("--kind", kind_name, "person or company")->capture_default_str();
  prepare->add_option("--out", prep_out, "Entities JSON-lines output")->required();
  prepare->add_option("--report", report_path, "Cleansing report JSON");
  prepare->callback([&] {
    auto in = open_in(raw_path);
    const auto records = read_raw_records(in);
    const auto res = finalize_dataset(records, parse_entity_kind(kind_name));
    auto out = open_out(prep_out);
    write_entities(res.entities, out);
    finish(out, prep_out);
    if (!report_path.empty()) {
      auto rep = open_out(report_path);
      write_report(res.report, rep);
      finish(rep, report_path);
    }
    std::cerr << res.report.entities_out << " of " << res.report.records_in
              << " records kept\n";
  });

  // stats
  auto* stats = app.add_subcommand("stats", "Input-space retrieval baseline");
  std::string stats_entities;
  std::size_t stats_k = 20;
  CharSource stats_chars;
  stats->add_option("--entities", stats_entities, "Entities JSON-lines")->required();
  stats->add_option("--k", stats_k, "Neighborhood size")->capture_default_str();
  stats_chars.add_options(stats);
  stats->callback([&] {
    const auto ents = read_entity_file(stats_entities);
    const auto table = stats_chars.load(ents, g.seed);
    const auto catalog = ItemCatalog::from_entities(ents, table);
    const auto forest =
        build_forest(catalog.indexed_vectors(), g.trees, kDefaultLeafSize, g.seed, g.threads);
    const auto s = baseline_stats(catalog, forest, stats_k, g.threads);
    std::cout << json{{"k", s.k},
                      {"recall_at_k", s.recall_at_k},
                      {"mean_pos_dist", s.mean_pos_dist},
                      {"std_pos_dist", s.std_pos_dist},
                      {"mean_neg_dist", s.mean_neg_dist},
                      {"std_neg_dist", s.std_neg_dist}}
                     .dump(2)
              << '\n';
  });

  // mine
  auto* mine_cmd = app.add_subcommand("mine", "Mine training triplets");
  std::string mine_entities, mine_out, strategy_name = "hard";
  MiningConfig mcfg;
  CharSource mine_chars;
  mine_cmd->add_option("--entities", mine_entities, "Entities JSON-lines")->required();
  mine_cmd->add_option("--strategy", strategy_name, "hard or semi-hard")->capture_default_str();
  mine_cmd->add_option("--k", mcfg.k, "Neighborhood size")->capture_default_str();
  mine_cmd->add_option("--cap", mcfg.max_triplets_per_anchor, "Triplets per anchor")
      ->capture_default_str();
  mine_cmd->add_option("--budget", mcfg.search_budget, "ANN search budget");
  mine_cmd->add_option("--out", mine_out, "Triplet TSV output")->required();
  mine_chars.add_options(mine_cmd);
  mine_cmd->callback([&] {
    mcfg.strategy = parse_mining_strategy(strategy_name);
    mcfg.seed = g.seed;
    mcfg.threads = g.threads;
    const auto ents = read_entity_file(mine_entities);
    const auto table = mine_chars.load(ents, g.seed);
    const auto catalog = ItemCatalog::from_entities(ents, table);
    const auto forest =
        build_forest(catalog.indexed_vectors(), g.trees, kDefaultLeafSize, g.seed, g.threads);
    const auto triplets = mine(catalog, forest, mcfg);
    auto out = open_out(mine_out);
    write_triplets(triplets, out);
    finish(out, mine_out);
    std::cerr << triplets.size() << " triplets from " << catalog.size() << " items\n";
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an encoder on mined triplets");
  std::string train_entities, triplet_path, model_out, log_path, layers_csv = "32,32";
  std::string loss_name = "adapted", split_name = "identity";
  std::optional<double> margin;
  std::vector<double> margins;
  TrainConfig tcfg;
  CharSource train_chars;
  train_cmd->add_option("--entities", train_entities, "Entities JSON-lines")->required();
  train_cmd->add_option("--triplets", triplet_path, "Triplet TSV")->required();
  train_cmd->add_option("--out", model_out, "Model output (.ejm)")->required();
  train_cmd->add_option("--layers", layers_csv, "GRU hidden sizes, comma separated")
      ->capture_default_str();
  train_cmd->add_option("--loss", loss_name, "triplet, improved, angular or adapted")
      ->capture_default_str();
  auto* margin_opt = train_cmd->add_option("--margin", margin, "Loss margin");
  train_cmd->add_option("--margins", margins, "Margin grid; trains once per value")
      ->delimiter(',')
      ->excludes(margin_opt);
  train_cmd->add_option("--batch", tcfg.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr", tcfg.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", tcfg.max_epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--patience", tcfg.patience, "Early stopping patience")
      ->capture_default_str();
  train_cmd->add_option("--clip", tcfg.grad_clip_norm, "Gradient norm clip")->capture_default_str();
  train_cmd->add_option("--split-level", split_name, "identity or triplet")->capture_default_str();
  train_cmd->add_option("--log", log_path, "Per-epoch JSON-lines log");
  train_chars.add_options(train_cmd);
  train_cmd->callback([&] {
    tcfg.seed = g.seed;
    tcfg.threads = g.threads;
    tcfg.loss = LossParams::defaults(parse_loss_kind(loss_name));
    if (margin) tcfg.loss.margin = *margin;
    tcfg.validate();
    tcfg.loss.validate();

    const auto ents = read_entity_file(train_entities);
    auto table = train_chars.load(ents, g.seed);
    const auto catalog = ItemCatalog::from_entities(ents, table);
    auto tin = open_in(triplet_path);
    const auto triplets = read_triplets(tin);

    TripletPartition parts;
    if (parse_split_level(split_name) == SplitLevel::Identity) {
      std::vector<std::uint64_t> ids;
      for (const auto& e : ents) ids.push_back(e.identity_id);
      parts = partition_by_identity(triplets, catalog, split_dataset(ids, {0.6, 0.2, 0.2}, g.seed));
    } else {
      parts = partition_by_triplet(triplets, {0.6, 0.2, 0.2}, g.seed);
    }
    std::cerr << parts.train.size() << " train / " << parts.validation.size()
              << " validation triplets\n";

    std::optional<std::ofstream> log;
    if (!log_path.empty()) log.emplace(open_out(log_path));
    const auto layers = parse_sizes(layers_csv);
    const auto init = init_params(layers, table.dim, g.seed);

    EncoderParams params;
    if (margins.empty()) {
      auto res = train_partitioned(parts.train, parts.validation, catalog, tcfg, init,
                                   [&](const EpochRecord& e) {
                                     auto j = to_json(e);
                                     j["margin"] = tcfg.loss.margin;
                                     if (log) *log << j.dump() << std::endl;
                                     std::cerr << j.dump() << '\n';
                                   });
      std::cerr << "best epoch " << res.report.best_epoch << ", validation accuracy "
                << res.report.best_validation_accuracy << ", stopped by "
                << to_string(res.report.stop_reason) << '\n';
      params = std::move(res.params);
    } else {
      auto grid = grid_search_margin(margins, parts.train, parts.validation, catalog, tcfg, init);
      for (const auto& run : grid.runs) {
        for (const auto& e : run.report.epochs) {
          auto j = to_json(e);
          j["margin"] = run.margin;
          if (log) *log << j.dump() << '\n';
        }
        std::cerr << "margin " << run.margin << ": best validation accuracy "
                  << run.report.best_validation_accuracy << '\n';
      }
      std::cerr << "selected margin " << grid.best_margin << '\n';
      tcfg.loss.margin = grid.best_margin;
      params = std::move(grid.best_params);
    }
    const auto model = Model::make(std::move(table), std::move(params), tcfg.loss);
    auto out = open_out(model_out, true);
    save_model(model, out);
    finish(out, model_out);
  });

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Embed one name per line");
  std::string embed_model, embed_in, embed_out;
  embed_cmd->add_option("--model", embed_model, "Model (.ejm)")->required();
  embed_cmd->add_option("--in", embed_in, "Names, one per line")->required();
  embed_cmd->add_option("--out", embed_out, "TSV output: row, name, vector components")
      ->required();
  embed_cmd->callback([&] {
    const auto model = read_model(embed_model);
    const auto names = read_column(embed_in);
    const auto col = embed_column(names, model, g.threads);
    auto out = open_out(embed_out);
    char buf[32];
    for (std::size_t i = 0; i < col.rows.size(); ++i) {
      out << col.rows[i] << '\t' << names[col.rows[i]];
      for (double x : col.vectors[i]) {
        std::snprintf(buf, sizeof buf, "%.9g", x);
        out << '\t' << buf;
      }
      out << '\n';
    }
    finish(out, embed_out);
    if (!col.skipped.empty()) std::cerr << col.skipped.size() << " blank rows skipped\n";
  });

  // index
  auto* index_cmd = app.add_subcommand("index", "Build and save an ANN index over a column");
  std::string index_model, index_in, index_out;
  std::size_t leaf_size = kDefaultLeafSize;
  index_cmd->add_option("--model", index_model, "Model (.ejm)")->required();
  index_cmd->add_option("--in", index_in, "Names, one per line; ids are row numbers")->required();
  index_cmd->add_option("--out", index_out, "Index output (.ajf)")->required();
  index_cmd->add_option("--leaf-size", leaf_size, "Maximum leaf size")->capture_default_str();
  index_cmd->callback([&] {
    const auto model = read_model(index_model);
    const auto col = embed_column(read_column(index_in), model, g.threads);
    std::vector<IndexedVector> items;
    for (std::size_t i = 0; i < col.rows.size(); ++i) {
      items.push_back({col.rows[i], {col.vectors[i].begin(), col.vectors[i].end()}});
    }
    const auto forest = build_forest(items, g.trees, leaf_size, g.seed, g.threads);
    auto out = open_out(index_out, true);
    save_index(forest, out);
    finish(out, index_out);
  });

  // join
  auto* join_cmd = app.add_subcommand("join", "Match each right value to its nearest left values");
  std::string left_path, right_path, join_model, join_out;
  JoinConfig jcfg;
  join_cmd->add_option("--left", left_path, "Left column, one value per line")->required();
  join_cmd->add_option("--right", right_path, "Right column, one value per line")->required();
  join_cmd->add_option("--model", join_model, "Model (.ejm)")->required();
  join_cmd->add_option("--k", jcfg.k, "Matches per right value")->capture_default_str();
  join_cmd->add_option("--budget", jcfg.search_budget, "ANN search budget");
  join_cmd->add_option("--out", join_out, "TSV output; stdout when omitted");
  join_cmd->callback([&] {
    jcfg.n_trees = g.trees;
    jcfg.seed = g.seed;
    jcfg.threads = g.threads;
    const auto model = read_model(join_model);
    const auto matches = join(read_column(left_path), read_column(right_path), model, jcfg);
    std::optional<std::ofstream> file;
    if (!join_out.empty()) file.emplace(open_out(join_out));
    std::ostream& out = file ? static_cast<std::ostream&>(*file) : std::cout;
    char buf[32];
    for (const auto& m : matches) {
      std::snprintf(buf, sizeof buf, "%.9g", m.distance);
      out << m.right_value << '\t' << m.left_value << '\t' << m.rank << '\t' << buf << '\n';
    }
    if (file) finish(*file, join_out);
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Retrieval metrics of a model on entities");
  std::string eval_entities, eval_model;
  EvalConfig ecfg;
  eval_cmd->add_option("--entities", eval_entities, "Entities JSON-lines")->required();
  eval_cmd->add_option("--model", eval_model, "Model (.ejm)")->required();
  eval_cmd->add_option("--k", ecfg.k, "Neighborhood size")->capture_default_str();
  eval_cmd->callback([&] {
    ecfg.n_trees = g.trees;
    ecfg.seed = g.seed;
    ecfg.threads = g.threads;
    const auto report = evaluate(read_entity_file(eval_entities), read_model(eval_model), ecfg);
    std::cout << to_json(report).dump(2) << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
