#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "euph/checkpoint.hpp"
#include "euph/corpus.hpp"
#include "euph/curation.hpp"
#include "euph/experiments.hpp"
#include "euph/imagery.hpp"
#include "euph/io.hpp"
#include "euph/metrics.hpp"
#include "euph/stats.hpp"
#include "euph/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace euph::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return kExitUsage;
    case ErrorKind::kBackend: return kExitBackend;
    default: return kExitData;
  }
}

namespace {

std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

struct ImageryFlags {
  std::string cache;
  std::string backend = "stub";
  std::string encoder = "stub";
  std::size_t encoder_dim = 64;
  int k = kDefaultImageryK;
  std::uint64_t seed = 0;
  bool normalize = false;
};

void add_imagery_flags(CLI::App* cmd, ImageryFlags& f) {
  cmd->add_option("--cache", f.cache, "Imagery cache directory");
  cmd->add_option("--backend", f.backend, "Text-to-image backend id")->capture_default_str();
  cmd->add_option("--encoder", f.encoder, "Visual encoder id")->capture_default_str();
  cmd->add_option("--encoder-dim", f.encoder_dim, "Visual embedding dimension")->capture_default_str();
  cmd->add_option("--k", f.k, "Images per text")->capture_default_str();
  cmd->add_option("--imagery-seed", f.seed, "Generator seed")->capture_default_str();
  cmd->add_flag("--normalize", f.normalize, "L2-normalise mean embeddings");
}

std::unique_ptr<ImageryStore> open_store(const ImageryFlags& f) {
  if (f.cache.empty()) throw UsageError("--cache is required");
  return std::make_unique<ImageryStore>(ImageryCache(f.cache), make_t2i_backend(f.backend),
                                        make_visual_encoder(f.encoder, f.encoder_dim),
                                        ImageryOptions{f.k, f.seed, f.normalize, 64});
}

std::unique_ptr<ImageryStore> open_store(const ImageryProvenance& p, const std::string& cache) {
  if (cache.empty()) throw UsageError("checkpoint uses imagery; pass --cache <dir>");
  return std::make_unique<ImageryStore>(ImageryCache(cache), make_t2i_backend(p.t2i_backend),
                                        make_visual_encoder(p.encoder_backend, p.encoder_dim),
                                        ImageryOptions{p.k, p.seed, p.normalize, 64});
}

// Accepts raw or prepared files; preprocessing is idempotent.
std::vector<Example> load_data(const std::string& path, SplitKind split) {
  if (path.empty()) throw UsageError("--data is required");
  return preprocess_all(load_examples(path, split));
}

std::string predictions_jsonl(const std::vector<std::string>& ids, const std::vector<double>& p,
                              const std::vector<int>& y) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += json{{"id", ids[i]}, {"p_hat", p[i]}, {"y_hat", y[i]}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<int> labels_of(const std::vector<Example>& examples) {
  std::vector<int> out;
  for (const auto& ex : examples) {
    if (!ex.label) throw DataError("example " + ex.id + " has no label");
    out.push_back(*ex.label);
  }
  return out;
}

bool all_labeled(const std::vector<Example>& examples) {
  for (const auto& ex : examples)
    if (!ex.label) return false;
  return !examples.empty();
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string lexicon, out;
  SyntheticCorpusSpec spec;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  const Lexicon lexicon = load_lexicon(a.lexicon, LexiconMode::kStrict);
  const auto corpus = make_synthetic_corpus(lexicon, a.spec);
  const fs::path dir(a.out);
  write_file_atomic(dir / "labeled.jsonl", raw_examples_to_jsonl(corpus.labeled));
  write_file_atomic(dir / "unlabeled.jsonl", raw_examples_to_jsonl(corpus.unlabeled));
  out << "wrote " << corpus.labeled.size() << " labeled and " << corpus.unlabeled.size()
      << " unlabeled synthetic examples to " << dir.string() << "\n";
  return kExitOk;
}

// --- prepare -------------------------------------------------------------

struct PrepareArgs {
  std::string data, unlabeled, lexicon, out;
  int folds = kDefaultFolds;
  std::uint64_t seed = 0;
  bool lenient = false;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  const auto mode = a.lenient ? LexiconMode::kLenient : LexiconMode::kStrict;
  const Lexicon lexicon = load_lexicon(a.lexicon, mode);
  const auto labeled = load_data(a.data, SplitKind::kLabeled);
  const auto cov = lexicon_coverage(labeled, lexicon);
  if (!cov.missing.empty()) {
    std::string msg = a.data + ": " + std::to_string(cov.missing.size()) + " PET(s) missing from " + a.lexicon + ":";
    for (const auto& id : cov.missing) msg += " " + id;
    throw DataError(msg);
  }
  if (!cov.empty_description.empty()) {
    std::string msg = std::to_string(cov.empty_description.size()) + " PET(s) have no description:";
    for (const auto& id : cov.empty_description) msg += " " + id;
    if (mode == LexiconMode::kStrict) throw DataError(msg);
    err << "warning: " << msg << "\n";
  }
  const auto folds = make_folds(labeled, a.folds, a.seed);

  const fs::path dir(a.out);
  write_file_atomic(dir / "train.jsonl", examples_to_jsonl(labeled));
  write_file_atomic(dir / "folds.json", folds_to_json(folds, a.seed));
  std::size_t n_unlabeled = 0;
  if (!a.unlabeled.empty()) {
    const auto test = load_data(a.unlabeled, SplitKind::kUnlabeled);
    n_unlabeled = test.size();
    write_file_atomic(dir / "test.jsonl", examples_to_jsonl(test));
  }
  std::size_t positives = 0;
  for (const auto& ex : labeled) positives += *ex.label == 1;
  out << "prepared " << labeled.size() << " labeled (" << positives << " euphemistic), " << n_unlabeled
      << " unlabeled, " << cov.distinct_pets << " PETs, " << folds.size() << " folds -> " << dir.string() << "\n";
  return kExitOk;
}

// --- imagery -------------------------------------------------------------

struct ImageryArgs {
  std::string lexicon;
  ImageryFlags imagery;
  bool sheets = false;
};

int cmd_imagery(const ImageryArgs& a, std::ostream& out, std::ostream& err) {
  const Lexicon lexicon = load_lexicon(a.lexicon, LexiconMode::kStrict);
  auto store = open_store(a.imagery);
  const auto table = build_imagery_table(lexicon, *store);
  if (a.sheets) {
    for (const auto& e : lexicon.entries()) {
      store->sheet_for(e.term);
      store->sheet_for(e.description);
    }
  }
  err << "computed " << store->computations() << " new embeddings\n";
  out << "imagery for " << table.size() << " PETs (K=" << a.imagery.k << ", D_v=" << store->encoder_dim()
      << ") in " << a.imagery.cache << "\n";
  return kExitOk;
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data, lexicon, folds_file, test, out, name, lm = "tiny", lm_size, variant = "desc";
  int n_folds = kDefaultFolds;
  std::vector<int> only_folds;
  std::uint64_t seed = 0;
  std::uint64_t fold_seed = 0;
  int epochs = 50;
  double lr = 5e-6;
  int batch = 16;
  double weight_decay = 0.01;
  std::size_t hidden = 32;
  std::size_t max_tokens = 128;
  std::size_t buckets = 4096;
  double threshold = kDefaultThreshold;
  std::string separator = " ";
  int jobs = 1;
  std::string ensemble = "mean";
  ImageryFlags imagery;
};

EnsembleRule parse_rule(const std::string& s) {
  if (s == "mean") return EnsembleRule::kMeanProbability;
  if (s == "vote") return EnsembleRule::kMajorityVote;
  throw UsageError("--ensemble must be 'mean' or 'vote', got '" + s + "'");
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig train;
  train.variant = parse_variant(a.variant);
  train.seed = a.seed;
  train.max_epochs = a.epochs;
  train.learning_rate = a.lr;
  train.batch_size = a.batch;
  train.weight_decay = a.weight_decay;
  train.n_folds = a.n_folds;
  train.validate();
  const auto rule = parse_rule(a.ensemble);

  ClassifierConfig model;
  model.variant = train.variant;
  model.lm_backend_id = a.lm;
  model.hidden_size = a.hidden;
  model.max_tokens = a.max_tokens;
  model.threshold = a.threshold;
  model.seed = a.seed;
  model.prompt_template.separator = a.separator;
  model.imagery_dim = a.imagery.encoder_dim;
  model.validate();

  const Lexicon lexicon = load_lexicon(a.lexicon, LexiconMode::kStrict);
  const auto data = load_data(a.data, SplitKind::kLabeled);
  std::vector<Fold> folds =
      a.folds_file.empty() ? make_folds(data, a.n_folds, a.fold_seed) : parse_folds(read_file(a.folds_file));
  if (!a.only_folds.empty()) {
    const std::set<int> keep(a.only_folds.begin(), a.only_folds.end());
    std::vector<Fold> kept;
    for (auto& f : folds)
      if (keep.count(f.index)) kept.push_back(std::move(f));
    if (kept.size() != keep.size()) throw UsageError("--fold names an index outside the fold file");
    folds = std::move(kept);
  }
  std::optional<std::vector<Example>> test;
  if (!a.test.empty()) test = load_data(a.test, SplitKind::kUnlabeled);

  // Imagery is read from the cache only: `euph imagery` must run first.
  std::unique_ptr<ImageryStore> store;
  std::optional<ImageryTable> table;
  std::optional<ImageryProvenance> provenance;
  if (train.variant == Variant::kDescImag) {
    if (a.imagery.cache.empty())
      throw UsageError("desc_imag needs --cache <dir> populated by `euph imagery`");
    store = open_store(a.imagery);
    table = load_imagery_table(lexicon, *store);
    provenance = ImageryProvenance{make_t2i_backend(a.imagery.backend)->id(),
                                   make_visual_encoder(a.imagery.encoder, a.imagery.encoder_dim)->id(),
                                   a.imagery.encoder_dim, a.imagery.k, a.imagery.seed, a.imagery.normalize};
  }

  const fs::path dir(a.out);
  const std::string name = a.name.empty() ? std::string(to_string(train.variant)) : a.name;
  if (name == "checkpoints" || name.find_first_of("/\\") != std::string::npos || name == "." || name == "..")
    throw UsageError("--name must be a plain directory name other than 'checkpoints': " + name);
  const std::string ddigest = data_digest(data);
  const std::string cdigest = config_digest(train, model, ddigest);
  std::string log;

  CvOptions opts;
  opts.jobs = a.jobs;
  opts.buckets = a.buckets;
  opts.on_fold = [&](const Fold& fold, FoldResult& r) {
    CheckpointManifest m;
    m.classifier = r.best.config();
    m.buckets = a.buckets;
    m.fold_index = fold.index;
    m.val_ids = fold.val_ids;
    m.best_epoch = r.best_epoch;
    m.best_val_f1 = r.best_val_f1;
    m.train_seed = train.seed;
    m.data_digest = ddigest;
    m.config_digest = cdigest;
    m.imagery = provenance;
    save_checkpoint(dir / "checkpoints" / name / ("fold-" + std::to_string(fold.index)), r.best, m);
    for (const auto& e : r.log)
      log += json{{"fold", fold.index}, {"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_f1", e.val_f1},
                  {"optimizer_steps", e.optimizer_steps}}
                 .dump() +
             "\n";
    err << "fold " << fold.index << ": best epoch " << r.best_epoch << ", validation F1 " << fixed(r.best_val_f1)
        << "\n";
  };

  MetricsArtifact metrics;
  metrics.name = name;
  metrics.lm_size = a.lm_size.empty() ? a.lm : a.lm_size;
  metrics.variant = train.variant;
  metrics.result =
      run_cv(train, model, folds, data, lexicon, table ? &*table : nullptr, test ? &*test : nullptr, opts);
  // Per-run files sit next to, not inside, the shared checkpoints tree.
  const fs::path run_dir = dir / name;
  write_file_atomic(run_dir / "train_log.jsonl", log);

  if (test) {
    const auto probs = column_means(metrics.result.per_fold_test_probs);
    metrics.ensemble_predictions = ensemble(metrics.result.per_fold_test_probs, model.threshold, rule);
    write_file_atomic(run_dir / "test_predictions.jsonl",
                      predictions_jsonl(metrics.result.test_ids, probs, metrics.ensemble_predictions));
    if (all_labeled(*test)) metrics.test_f1 = f1(metrics.ensemble_predictions, labels_of(*test));
  }
  write_file_atomic(run_dir / "metrics.json", metrics_to_json(metrics));
  out << name << ": validation F1 " << fixed(metrics.result.mean_f1) << " +- " << fixed(metrics.result.std_f1)
      << " over " << folds.size() << " fold(s)";
  if (metrics.test_f1) out << ", test F1 " << fixed(*metrics.test_f1);
  out << "\n";
  return kExitOk;
}

// --- predict / evaluate --------------------------------------------------

struct ScoringArgs {
  std::string data, lexicon, cache, out, predictions, ensemble = "mean";
  std::vector<std::string> checkpoints;
};

struct Scored {
  std::vector<std::string> ids;
  std::vector<double> p_hat;
  std::vector<int> y_hat;
};

Scored score_checkpoints(const ScoringArgs& a, const std::vector<Example>& data, std::ostream& err) {
  if (a.checkpoints.empty()) throw UsageError("--checkpoint is required");
  if (a.lexicon.empty()) throw UsageError("--lexicon is required");
  const Lexicon lexicon = load_lexicon(a.lexicon, LexiconMode::kStrict);
  std::vector<std::vector<double>> rows;
  double threshold = kDefaultThreshold;
  for (const auto& path : a.checkpoints) {
    auto ckpt = load_checkpoint(path);
    threshold = ckpt.model.config().threshold;
    std::unique_ptr<ImageryStore> store;
    std::optional<ImageryTable> table;
    if (ckpt.model.config().variant == Variant::kDescImag) {
      if (!ckpt.manifest.imagery) throw DataError(path + ": desc_imag checkpoint without imagery provenance");
      store = open_store(*ckpt.manifest.imagery, a.cache);
      table = load_imagery_table(lexicon, *store);
    }
    rows.push_back(predict_probabilities(ckpt.model, data, lexicon, table ? &*table : nullptr));
    err << "scored " << data.size() << " examples with " << path << "\n";
  }
  Scored s;
  for (const auto& ex : data) s.ids.push_back(ex.id);
  s.p_hat = column_means(rows);
  s.y_hat = ensemble(rows, threshold, parse_rule(a.ensemble));
  return s;
}

int cmd_predict(const ScoringArgs& a, std::ostream& out, std::ostream& err) {
  const auto data = load_data(a.data, SplitKind::kUnlabeled);
  const auto s = score_checkpoints(a, data, err);
  const auto text = predictions_jsonl(s.ids, s.p_hat, s.y_hat);
  if (a.out.empty() || a.out == "-") {
    out << text;
  } else {
    write_file_atomic(a.out, text);
    out << "wrote " << s.ids.size() << " predictions to " << a.out << "\n";
  }
  return kExitOk;
}

std::map<std::string, int> read_predictions(const std::string& path) {
  std::map<std::string, int> out;
  std::istringstream lines(read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      const int y = j.at("y_hat").get<int>();
      if (y != 0 && y != 1) throw DataError("y_hat must be 0 or 1");
      if (!out.emplace(j.at("id").get<std::string>(), y).second) throw DataError("duplicate id");
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

int cmd_evaluate(const ScoringArgs& a, std::ostream& out, std::ostream& err) {
  const auto data = load_data(a.data, SplitKind::kLabeled);
  const auto labels = labels_of(data);
  std::vector<int> preds;
  if (!a.predictions.empty()) {
    if (!a.checkpoints.empty()) throw UsageError("pass either --predictions or --checkpoint, not both");
    const auto by_id = read_predictions(a.predictions);
    for (const auto& ex : data) {
      auto it = by_id.find(ex.id);
      if (it == by_id.end()) throw DataError(a.predictions + ": no prediction for example " + ex.id);
      preds.push_back(it->second);
    }
  } else {
    preds = score_checkpoints(a, data, err).y_hat;
  }
  const auto c = confusion(preds, labels);
  const double score = f1(preds, labels);
  out << "F1 = " << fixed(score) << " (n=" << data.size() << ", tp=" << c.tp << ", fp=" << c.fp << ", fn=" << c.fn
      << ", tn=" << c.tn << ")\n";
  if (!a.out.empty()) {
    write_file_atomic(a.out, json{{"f1", score}, {"n", data.size()}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn},
                                  {"tn", c.tn}}
                                 .dump(2) +
                                 "\n");
  }
  return kExitOk;
}

// --- significance --------------------------------------------------------

struct SignificanceArgs {
  std::string a, b, out;
  std::vector<double> a_scores, b_scores;
  bool update = false;
};

int cmd_significance(const SignificanceArgs& s, std::ostream& out, std::ostream&) {
  std::vector<double> xa = s.a_scores, xb = s.b_scores;
  std::optional<MetricsArtifact> ma, mb;
  if (!s.a.empty()) {
    ma = parse_metrics(read_file(s.a));
    xa = ma->result.per_fold_f1;
  }
  if (!s.b.empty()) {
    mb = parse_metrics(read_file(s.b));
    xb = mb->result.per_fold_f1;
  }
  if (xa.empty() || xb.empty()) throw UsageError("need two score sets: --a/--b metrics files or --a-scores/--b-scores");
  const auto r = paired_t_test(xa, xb);
  out << "t = " << fixed(r.t_statistic) << ", p = " << fixed(r.p_value) << " (paired t-test, n = " << r.n_pairs
      << ", two-sided)\n";
  if (!s.out.empty()) write_file_atomic(s.out, significance_to_json(r));
  if (s.update) {
    if (!ma) throw UsageError("--update needs --a <metrics.json>");
    ma->significance = r;
    ma->significance_against = mb ? mb->name : "scores";
    write_file_atomic(s.a, metrics_to_json(*ma));
  }
  return kExitOk;
}

// --- report --------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> metrics, pets;
  std::string out, lexicon;
  ImageryFlags imagery;
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  std::vector<MetricsArtifact> runs;
  for (const auto& p : a.metrics) runs.push_back(parse_metrics(read_file(p)));
  std::string text = render_report(runs);
  if (!a.pets.empty()) {
    if (a.lexicon.empty()) throw UsageError("--pet needs --lexicon and --cache");
    const Lexicon lexicon = load_lexicon(a.lexicon, LexiconMode::kLenient);
    auto store = open_store(a.imagery);
    text += "\n| Term | Description | Term imagery | Description imagery |\n|---|---|---|---|\n";
    for (const auto& id : a.pets) {
      const auto& e = lexicon.at(id);
      text += "| " + e.term + " | " + e.description + " | " + store->sheet_for(e.term) + " | " +
              store->sheet_for(e.description) + " |\n";
    }
  }
  if (a.out.empty() || a.out == "-") out << text;
  else write_file_atomic(a.out, text);
  return kExitOk;
}

// --- serve ---------------------------------------------------------------

struct ServeArgs {
  std::string lexicon, data, checkpoints, state = "curation", host = "127.0.0.1";
  int port = 8080;
  ImageryFlags imagery;
};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream&) {
  const auto base = load_lexicon(a.lexicon, LexiconMode::kLenient).entries();
  const fs::path state(a.state);
  LexiconStore lexicon(base, state / "audit.jsonl", state / "lexicon.snapshot.json");
  std::vector<Example> examples;
  if (!a.data.empty()) examples = load_data(a.data, SplitKind::kUnlabeled);
  std::unique_ptr<ImageryStore> store;
  if (!a.imagery.cache.empty()) store = open_store(a.imagery);
  std::optional<CheckpointRegistry> registry;
  if (!a.checkpoints.empty()) registry.emplace(a.checkpoints);
  CurationService service(lexicon, std::move(examples), store.get(), registry ? &*registry : nullptr);
  CurationServer server(service);
  out << "serving " << base.size() << " PETs on http://" << a.host << ":" << a.port << "\n" << std::flush;
  server.listen(a.host, a.port);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Euphemism detection with term descriptions and visual imagery", "euph"};
  app.set_config("--config", "", "TOML/INI file with option defaults, one [section] per command");
  app.require_subcommand(1);

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Write a synthetic corpus shaped like the shared-task data");
  c_syn->add_option("--lexicon", syn.lexicon, "PET lexicon (JSON)")->required();
  c_syn->add_option("--out", syn.out, "Output directory")->required();
  c_syn->add_option("--labeled", syn.spec.n_labeled, "Labeled examples")->capture_default_str();
  c_syn->add_option("--unlabeled", syn.spec.n_unlabeled, "Unlabeled examples")->capture_default_str();
  c_syn->add_option("--positive-rate", syn.spec.positive_rate)->capture_default_str();
  c_syn->add_option("--seed", syn.spec.seed)->capture_default_str();

  PrepareArgs prep;
  auto* c_prep = app.add_subcommand("prepare", "Clean examples, check lexicon coverage, write folds");
  c_prep->add_option("--data", prep.data, "Labeled examples (JSON Lines)")->required();
  c_prep->add_option("--unlabeled", prep.unlabeled, "Unlabeled test examples (JSON Lines)");
  c_prep->add_option("--lexicon", prep.lexicon, "PET lexicon (JSON)")->required();
  c_prep->add_option("--out", prep.out, "Output directory")->required();
  c_prep->add_option("--folds", prep.folds, "Number of folds")->capture_default_str();
  c_prep->add_option("--seed", prep.seed, "Fold seed")->capture_default_str();
  c_prep->add_flag("--lenient", prep.lenient, "Warn instead of failing on empty descriptions");

  ImageryArgs img;
  auto* c_img = app.add_subcommand("imagery", "Generate and cache imagery embeddings for every PET");
  c_img->add_option("--lexicon", img.lexicon, "PET lexicon (JSON)")->required();
  add_imagery_flags(c_img, img.imagery);
  c_img->add_flag("--sheets", img.sheets, "Also render contact sheets");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Cross-validated fine-tuning");
  c_train->add_option("--data", tr.data, "Labeled examples")->required();
  c_train->add_option("--lexicon", tr.lexicon, "PET lexicon")->required();
  c_train->add_option("--out", tr.out, "Run directory")->required();
  c_train->add_option("--folds", tr.folds_file, "Fold file written by `euph prepare`");
  c_train->add_option("--n-folds", tr.n_folds, "Folds to create when --folds is absent")->capture_default_str();
  c_train->add_option("--fold-seed", tr.fold_seed, "Seed for folds created here")->capture_default_str();
  c_train->add_option("--fold", tr.only_folds, "Train only these fold indices");
  c_train->add_option("--variant", tr.variant, "vanilla | desc | desc_imag")->capture_default_str();
  c_train->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
  c_train->add_option("--epochs", tr.epochs, "Maximum epochs")->capture_default_str();
  c_train->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
  c_train->add_option("--batch", tr.batch, "Batch size")->capture_default_str();
  c_train->add_option("--weight-decay", tr.weight_decay, "Decoupled weight decay")->capture_default_str();
  c_train->add_option("--lm", tr.lm, "Language-model backend id")->capture_default_str();
  c_train->add_option("--lm-size", tr.lm_size, "Backend size label used in reports");
  c_train->add_option("--hidden", tr.hidden, "Hidden size")->capture_default_str();
  c_train->add_option("--max-tokens", tr.max_tokens, "Input length budget")->capture_default_str();
  c_train->add_option("--buckets", tr.buckets, "Tokenizer hash buckets")->capture_default_str();
  c_train->add_option("--threshold", tr.threshold, "Decision threshold")->capture_default_str();
  c_train->add_option("--separator", tr.separator, "Prompt segment separator");
  c_train->add_option("--test", tr.test, "Test examples to score with the fold ensemble");
  c_train->add_option("--ensemble", tr.ensemble, "mean | vote")->capture_default_str();
  c_train->add_option("--name", tr.name, "Run name (defaults to the variant)");
  c_train->add_option("--jobs", tr.jobs, "Folds trained in parallel")->capture_default_str();
  add_imagery_flags(c_train, tr.imagery);

  ScoringArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "F1 of predictions or checkpoints against labels");
  c_eval->add_option("--data", ev.data, "Labeled examples")->required();
  c_eval->add_option("--predictions", ev.predictions, "Prediction file (JSON Lines with id, y_hat)");
  c_eval->add_option("--checkpoint", ev.checkpoints, "Checkpoint directory (repeat to ensemble)");
  c_eval->add_option("--lexicon", ev.lexicon, "PET lexicon");
  c_eval->add_option("--cache", ev.cache, "Imagery cache for desc_imag checkpoints");
  c_eval->add_option("--ensemble", ev.ensemble, "mean | vote")->capture_default_str();
  c_eval->add_option("--out", ev.out, "Write the scores as JSON");

  ScoringArgs pr;
  auto* c_pred = app.add_subcommand("predict", "Score examples with one or more checkpoints");
  c_pred->add_option("--data", pr.data, "Examples (labels optional)")->required();
  c_pred->add_option("--checkpoint", pr.checkpoints, "Checkpoint directory (repeat to ensemble)")->required();
  c_pred->add_option("--lexicon", pr.lexicon, "PET lexicon")->required();
  c_pred->add_option("--cache", pr.cache, "Imagery cache for desc_imag checkpoints");
  c_pred->add_option("--ensemble", pr.ensemble, "mean | vote")->capture_default_str();
  c_pred->add_option("--out", pr.out, "Output JSON Lines (default stdout)");

  SignificanceArgs sig;
  auto* c_sig = app.add_subcommand("significance", "Paired t-test over per-fold scores");
  c_sig->add_option("--a", sig.a, "metrics.json of the first run");
  c_sig->add_option("--b", sig.b, "metrics.json of the second run");
  c_sig->add_option("--a-scores", sig.a_scores, "Comma-separated scores")->delimiter(',');
  c_sig->add_option("--b-scores", sig.b_scores, "Comma-separated scores")->delimiter(',');
  c_sig->add_option("--out", sig.out, "Write the result as JSON");
  c_sig->add_flag("--update", sig.update, "Store the result in the --a metrics file");

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Markdown results table");
  c_rep->add_option("--metrics", rep.metrics, "metrics.json (repeatable)")->required();
  c_rep->add_option("--out", rep.out, "Output file (default stdout)");
  c_rep->add_option("--lexicon", rep.lexicon, "PET lexicon, for --pet");
  c_rep->add_option("--pet", rep.pets, "Add a term/description/imagery row for this pet_id");
  add_imagery_flags(c_rep, rep.imagery);

  ServeArgs srv;
  auto* c_srv = app.add_subcommand("serve", "HTTP service for lexicon curation");
  c_srv->add_option("--lexicon", srv.lexicon, "Base PET lexicon")->required();
  c_srv->add_option("--data", srv.data, "Prepared examples shown next to each PET");
  c_srv->add_option("--checkpoints", srv.checkpoints, "Directory searched for checkpoints");
  c_srv->add_option("--state", srv.state, "Directory for the audit log and snapshot")->capture_default_str();
  c_srv->add_option("--host", srv.host)->capture_default_str();
  c_srv->add_option("--port", srv.port)->capture_default_str();
  add_imagery_flags(c_srv, srv.imagery);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_syn) return cmd_synth(syn, out, err);
    if (*c_prep) return cmd_prepare(prep, out, err);
    if (*c_img) return cmd_imagery(img, out, err);
    if (*c_train) return cmd_train(tr, out, err);
    if (*c_eval) return cmd_evaluate(ev, out, err);
    if (*c_pred) return cmd_predict(pr, out, err);
    if (*c_sig) return cmd_significance(sig, out, err);
    if (*c_rep) return cmd_report(rep, out, err);
    if (*c_srv) return cmd_serve(srv, out, err);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace euph::cli
