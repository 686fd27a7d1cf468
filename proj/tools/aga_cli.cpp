// Command-line harness: corpus generation, TCoL building, training,
// evaluation, gradient checking and the dropout sweep.
//
// Exit codes: 0 success, 1 check failure, 2 input or configuration error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aga/checkpoint.hpp"
#include "aga/config.hpp"
#include "aga/corpus.hpp"
#include "aga/errors.hpp"
#include "aga/gradcheck.hpp"
#include "aga/metrics.hpp"
#include "aga/synthetic.hpp"
#include "aga/tcol.hpp"
#include "aga/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInputError = 2;

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw aga::ContractError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string file_hash(const fs::path& path) { return fnv1a_hex(read_file(path)); }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw aga::ContractError("cannot write " + path.string());
  out << text;
}

void require_file(const fs::path& path, const std::string& role) {
  if (!fs::is_regular_file(path)) throw aga::ContractError(role + " file not found: " + path.string());
}

// Everything needed to repeat a command: argv, resolved config, and hashes
// of inputs and outputs.
class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv) : command_(std::move(command)) {
    for (int i = 0; i < argc; ++i) argv_ += (i ? " " : "") + std::string(argv[i]);
    started_ = std::chrono::steady_clock::now();
  }

  void set(const std::string& key, const std::string& value) { lines_.emplace_back(key, value); }
  void input(const fs::path& path) { lines_.emplace_back("input." + path.string(), file_hash(path)); }
  void output(const fs::path& path) { lines_.emplace_back("output." + path.string(), file_hash(path)); }
  void config(const aga::Settings& settings) {
    for (const auto& [k, v] : settings) lines_.emplace_back("config." + k, v);
  }

  void write(const fs::path& dir) const {
    std::ostringstream out;
    out << "command=" << command_ << "\nargv=" << argv_ << '\n';
    for (const auto& [k, v] : lines_) out << k << '=' << v << '\n';
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    out << "wall_seconds=" << aga::format_double(wall) << '\n';
    write_file(dir / "manifest.txt", out.str());
  }

 private:
  std::string command_;
  std::string argv_;
  std::vector<std::pair<std::string, std::string>> lines_;
  std::chrono::steady_clock::time_point started_;
};

// Flags shared by train and dropout-sweep. Unset flags leave the config
// file's values alone.
struct ModelFlags {
  std::string config_file;
  std::optional<std::string> extractor;
  std::optional<double> epsilon;
  bool no_gi = false;
  std::optional<std::string> dropout;
  std::optional<double> beta;
  std::optional<double> c_sup;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> seeds;
  std::optional<std::size_t> epochs;
  std::optional<std::string> embedding_file;
  bool freeze_embeddings = false;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key=value config file");
    app->add_option("--extractor", extractor, "cnn or lstm");
    app->add_option("--epsilon", epsilon, "valve half-width in [0, 0.5]");
    app->add_flag("--no-gi", no_gi, "replace the statistics branch with zeros");
    app->add_option("--dropout", dropout, "vanilla, leaky or none");
    app->add_option("--beta", beta, "drop rate");
    app->add_option("--c-sup", c_sup, "leaky suppression constant");
    app->add_option("--seed", seed, "base seed");
    app->add_option("--folds", folds, "cross-validation folds (>= 2 enables)");
    app->add_option("--seeds", seeds, "replicate runs per split");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--embedding-file", embedding_file, "word vector text file");
    app->add_flag("--freeze-embeddings", freeze_embeddings, "keep embeddings fixed");
    app->add_option("--set", overrides, "extra key=value setting (repeatable)");
  }

  aga::RunConfig resolve() const {
    aga::RunConfig config;
    if (!config_file.empty()) {
      if (!fs::is_regular_file(config_file)) throw aga::ConfigError("config", "file not found: " + config_file);
      config = aga::load_config(config_file);
    }
    const auto put = [&](const std::string& key, const std::string& value) {
      aga::apply_setting(config, key, value);
    };
    if (extractor) put("extractor", *extractor);
    if (epsilon) put("epsilon", aga::format_double(*epsilon));
    if (no_gi) put("gi", "false");
    if (dropout) put("dropout", *dropout);
    if (beta) put("beta", aga::format_double(*beta));
    if (c_sup) put("c_sup", aga::format_double(*c_sup));
    if (seed) put("seed", std::to_string(*seed));
    if (folds) put("folds", std::to_string(*folds));
    if (seeds) put("seeds", std::to_string(*seeds));
    if (epochs) put("epochs", std::to_string(*epochs));
    if (embedding_file) put("embedding_file", *embedding_file);
    if (freeze_embeddings) put("freeze_embeddings", "true");
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw aga::ConfigError(kv, "expected key=value");
      put(kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.model.validate();
    config.train.validate();
    return config;
  }
};

std::vector<aga::Record> load_corpus(const std::string& path, const std::string& role) {
  require_file(path, role);
  return aga::ingest(path);
}

void write_curves(const fs::path& path, std::span<const aga::RunReport> reports) {
  std::string csv = aga::curves_header(true);
  for (const auto& r : reports) csv += aga::format_curves(r, r.name);
  write_file(path, csv);
}

std::string ttest_record(const std::string& label, const aga::TTestResult& t, double mean_a, double mean_b) {
  return "record=ttest test=" + label + " mean_a=" + aga::format_double(mean_a) +
         " mean_b=" + aga::format_double(mean_b) + " t=" + aga::format_double(t.t) +
         " dof=" + aga::format_double(t.dof) + " p=" + aga::format_double(t.p) + "\n";
}

// ---------------------------------------------------------------------------

int cmd_gen_synthetic(const fs::path& out_dir, const aga::SyntheticSpec& spec, std::size_t embed_dim, double noise,
                      double train_fraction, Manifest& manifest) {
  fs::create_directories(out_dir);
  const auto records = aga::make_synthetic(spec);
  const auto cut = static_cast<std::size_t>(static_cast<double>(records.size()) * train_fraction);
  if (cut == 0 || cut >= records.size()) throw aga::ContractError("train fraction leaves an empty split");
  const std::span<const aga::Record> all(records);
  aga::write_tsv(out_dir / "synthetic.tsv", all);
  aga::write_tsv(out_dir / "train.tsv", all.first(cut));
  aga::write_tsv(out_dir / "test.tsv", all.subspan(cut));
  aga::write_masked_embeddings(out_dir / "masked_embeddings.txt", spec, embed_dim, noise, aga::derive_seed(spec.seed, 9));

  manifest.set("seed", std::to_string(spec.seed));
  for (const char* name : {"synthetic.tsv", "train.tsv", "test.tsv", "masked_embeddings.txt"}) {
    manifest.output(out_dir / name);
  }
  manifest.write(out_dir);
  std::cout << "wrote " << records.size() << " sentences (" << cut << " train) to " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_build_tcol(const std::string& train_path, const fs::path& out_dir, Manifest& manifest) {
  const auto records = load_corpus(train_path, "training");
  const auto labels = aga::label_set(records);
  const auto examples = aga::tokenize_records(records, labels);
  std::vector<std::vector<std::string>> sentences;
  for (const auto& e : examples) sentences.push_back(e.tokens);
  const aga::Vocab vocab = aga::Vocab::build(sentences);
  const aga::TCoLTable table = aga::build_tcol(examples, labels.size(), vocab.size());

  fs::create_directories(out_dir);
  vocab.save(out_dir / "vocab.txt");
  table.save(out_dir / "tcol.txt");
  manifest.input(train_path);
  manifest.output(out_dir / "vocab.txt");
  manifest.output(out_dir / "tcol.txt");
  manifest.write(out_dir);
  std::cout << "classes=" << labels.size() << " vocab=" << vocab.size() << " words=" << table.entries().size()
            << '\n';
  return kExitOk;
}

int cmd_train(const std::string& train_path, const std::string& test_path, const ModelFlags& flags,
              bool ablate_gi, const fs::path& out_dir, Manifest& manifest) {
  const aga::RunConfig config = flags.resolve();
  const auto train_records = load_corpus(train_path, "training");
  if (!config.train.embedding_file.empty()) require_file(config.train.embedding_file, "embedding");
  fs::create_directories(out_dir);
  manifest.input(train_path);
  if (!config.train.embedding_file.empty()) manifest.input(config.train.embedding_file);
  manifest.set("seed", std::to_string(config.model.seed));
  manifest.config(aga::run_settings(config));

  std::vector<aga::RunReport> reports;
  std::vector<aga::RunReport> ablation;
  std::vector<std::string> outputs;

  if (config.train.folds >= 2) {
    reports = aga::crossval_run(config, train_records, config.train.folds);
    if (ablate_gi) {
      aga::RunConfig off = config;
      off.model.epsilon = 0.0;
      ablation = aga::crossval_run(off, train_records, config.train.folds);
    }
  } else {
    if (test_path.empty()) throw aga::ContractError("--test is required unless --folds >= 2");
    const auto test_records = load_corpus(test_path, "test");
    manifest.input(test_path);
    const auto labels = aga::label_set(train_records);
    const aga::PreparedSplit split = aga::prepare_split(train_records, test_records, labels, config.model.max_len);
    split.vocab.save(out_dir / "vocab.txt");
    split.tcol.save(out_dir / "tcol.txt");
    const std::string vocab_hash = file_hash(out_dir / "vocab.txt");
    const std::string tcol_hash = file_hash(out_dir / "tcol.txt");
    outputs.insert(outputs.end(), {"vocab.txt", "tcol.txt"});

    std::string label_list;
    for (const auto& l : labels) label_list += (label_list.empty() ? "" : ",") + l;
    for (auto& result : aga::run_seeds(config, split)) {
      const std::string name = "checkpoint-seed" + std::to_string(result.report.seed) + ".bin";
      const std::map<std::string, std::string> meta{
          {"labels", label_list},
          {"vocab_hash", vocab_hash},
          {"tcol_hash", tcol_hash},
          {"best_epoch", std::to_string(result.report.best_epoch)},
          {"run", result.report.name},
      };
      aga::save_checkpoint(out_dir / name, result.model.config(), meta, result.model.params());
      outputs.push_back(name);
      reports.push_back(std::move(result.report));
    }
    if (ablate_gi) {
      aga::RunConfig off = config;
      off.model.epsilon = 0.0;
      for (auto& result : aga::run_seeds(off, split)) ablation.push_back(std::move(result.report));
    }
  }

  std::string report = aga::format_report(aga::run_settings(config), reports);
  if (ablate_gi) {
    for (auto& r : ablation) r.name = "nogi_" + r.name;
    write_file(out_dir / "ablation.txt", aga::format_report(aga::run_settings(config), ablation));
    outputs.push_back("ablation.txt");
    const auto a = aga::best_accuracies(reports);
    const auto b = aga::best_accuracies(ablation);
    if (a.size() >= 2) {
      try {
        const auto t = config.train.paired_ttest ? aga::paired_t_test(a, b) : aga::welch_t_test(a, b);
        report += ttest_record(config.train.paired_ttest ? "paired" : "welch", t, aga::mean(a), aga::mean(b));
      } catch (const aga::ContractError& e) {
        report += std::string("record=ttest skipped=") + "\"" + e.what() + "\"\n";
      }
    }
  }
  write_file(out_dir / "report.txt", report);
  write_curves(out_dir / "curves.csv", reports);
  outputs.insert(outputs.end(), {"report.txt", "curves.csv"});
  for (const auto& name : outputs) manifest.output(out_dir / name);
  manifest.write(out_dir);

  const aga::Aggregate agg = aga::aggregate(reports);
  std::cout << "runs=" << agg.runs << " accuracy=" << agg.accuracy_mean << " +- " << agg.accuracy_std
            << " macro_f1=" << agg.f1_mean << " +- " << agg.f1_std << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& test_path, const std::string& vocab_path,
             const std::string& tcol_path) {
  require_file(checkpoint_path, "checkpoint");
  require_file(vocab_path, "vocabulary");
  require_file(tcol_path, "TCoL");
  const aga::Checkpoint ckpt = aga::load_checkpoint(checkpoint_path);
  const auto expect = [&](const std::string& key, const std::string& actual, const std::string& what) {
    const auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) throw aga::ContractError("checkpoint lacks " + key);
    if (it->second != actual) throw aga::ContractError(what + " does not match the checkpoint");
  };
  expect("vocab_hash", file_hash(vocab_path), "vocabulary " + vocab_path);
  expect("tcol_hash", file_hash(tcol_path), "TCoL table " + tcol_path);

  std::vector<std::string> labels;
  {
    std::stringstream ss(ckpt.meta.at("labels"));
    std::string l;
    while (std::getline(ss, l, ',')) labels.push_back(l);
  }
  const auto records = load_corpus(test_path, "test");
  const aga::Vocab vocab = aga::Vocab::load(vocab_path);
  const aga::TCoLTable table = aga::TCoLTable::load(tcol_path);
  if (vocab.size() != ckpt.config.vocab_size || table.classes() != ckpt.config.classes) {
    throw aga::ContractError("vocabulary or TCoL shape does not match the checkpoint config");
  }
  std::vector<aga::LabeledExample> examples;
  std::vector<aga::Tensor> stats;
  aga::encode_examples(records, labels, vocab, table, ckpt.config.max_len, examples, stats);
  const aga::AgaModel<float> model(ckpt.config, ckpt.params);
  const aga::EvalResult r = aga::evaluate(model, examples, stats);
  std::cout << "examples=" << examples.size() << " accuracy=" << aga::format_double(r.accuracy)
            << " macro_f1=" << aga::format_double(r.f1) << " loss=" << aga::format_double(r.loss) << '\n';
  return kExitOk;
}

int cmd_gradcheck(const aga::GradCheckOptions& options, const std::string& out_dir, Manifest& manifest) {
  const aga::GradCheckReport report = aga::run_gradcheck(options);
  const std::string text = report.format();
  std::cout << text;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "gradcheck.txt", text);
    manifest.set("seed", std::to_string(options.seed));
    manifest.output(fs::path(out_dir) / "gradcheck.txt");
    manifest.write(out_dir);
  }
  if (!report.passed()) {
    for (const auto& e : report.entries) {
      if (!e.passed) std::cerr << "gradient check failed: " << e.op << '\n';
    }
    return kExitCheckFailed;
  }
  return kExitOk;
}

int cmd_dropout_sweep(const std::string& train_path, const std::string& test_path, const ModelFlags& flags,
                      const std::vector<std::string>& kinds, const std::vector<double>& c_list,
                      const fs::path& out_dir, Manifest& manifest) {
  aga::RunConfig base = flags.resolve();
  base.train.seeds = 1;
  const auto train_records = load_corpus(train_path, "training");
  const auto test_records = load_corpus(test_path, "test");
  const auto labels = aga::label_set(train_records);
  const auto split = aga::prepare_split(train_records, test_records, labels, base.model.max_len);

  std::vector<std::pair<std::string, aga::RunConfig>> cells;
  for (const auto& kind_name : kinds) {
    aga::RunConfig cell = base;
    aga::apply_setting(cell, "dropout", kind_name);
    if (cell.model.dropout.kind == aga::DropoutKind::kLeaky) {
      for (double c : c_list) {
        aga::RunConfig leaky = cell;
        leaky.model.dropout.c_sup = c;
        leaky.model.validate();
        char buf[48];
        std::snprintf(buf, sizeof buf, "leaky_c%g", c);
        cells.emplace_back(buf, leaky);
      }
    } else {
      cells.emplace_back(kind_name, cell);
    }
  }

  std::vector<aga::RunReport> reports;
  for (const auto& [name, cell] : cells) reports.push_back(aga::train(cell, split, name).report);

  fs::create_directories(out_dir);
  write_curves(out_dir / "sweep.csv", reports);
  write_file(out_dir / "report.txt", aga::format_report(aga::run_settings(base), reports));
  manifest.input(train_path);
  manifest.input(test_path);
  manifest.set("seed", std::to_string(base.model.seed));
  manifest.config(aga::run_settings(base));
  manifest.output(out_dir / "sweep.csv");
  manifest.output(out_dir / "report.txt");
  manifest.write(out_dir);
  for (const auto& r : reports) {
    std::cout << "cell=" << r.name << " best_epoch=" << r.best_epoch << " test_accuracy=" << r.best().test_accuracy
              << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AGA+GI text classifier"};
  app.require_subcommand(1);

  std::string out_dir;
  std::string train_path;
  std::string test_path;
  ModelFlags flags;

  auto* gen = app.add_subcommand("gen-synthetic", "write the bundled synthetic corpus and masked embeddings");
  aga::SyntheticSpec spec;
  std::size_t embed_dim = 32;
  double noise = 0.01;
  double train_fraction = 0.8;
  gen->add_option("--out-dir", out_dir, "output directory")->required();
  gen->add_option("--seed", spec.seed, "generator seed");
  gen->add_option("--sentences", spec.sentences, "corpus size");
  gen->add_option("--embed-dim", embed_dim, "masked embedding dimension");
  gen->add_option("--noise", noise, "cue-pair embedding noise");
  gen->add_option("--train-fraction", train_fraction, "leading fraction written to train.tsv");

  auto* build = app.add_subcommand("build-tcol", "build vocabulary and TCoL table from training data");
  build->add_option("--train", train_path, "training TSV")->required();
  build->add_option("--out-dir", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "train, or cross-validate with --folds");
  bool ablate_gi = false;
  train->add_option("--train", train_path, "training TSV")->required();
  train->add_option("--test", test_path, "test TSV");
  train->add_option("--out-dir", out_dir, "output directory")->required();
  train->add_flag("--ablate-gi", ablate_gi, "also run epsilon=0 and report a t-test");
  flags.attach(train);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint_path, vocab_path, tcol_path;
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval->add_option("--test", test_path, "test TSV")->required();
  eval->add_option("--vocab", vocab_path, "vocabulary written by train")->required();
  eval->add_option("--tcol", tcol_path, "TCoL table written by train")->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  aga::GradCheckOptions grad_options;
  grad->add_option("--seed", grad_options.seed, "toy instance seed");
  grad->add_option("--inject-fault", grad_options.inject_fault, "corrupt the named case (testing)");
  grad->add_option("--out-dir", out_dir, "optional output directory");

  auto* sweep = app.add_subcommand("dropout-sweep", "one run per (dropout kind, c) cell");
  std::vector<std::string> kinds{"vanilla", "leaky", "none"};
  std::vector<double> c_list{10, 500, 1000, 10000};
  sweep->add_option("--train", train_path, "training TSV")->required();
  sweep->add_option("--test", test_path, "test TSV")->required();
  sweep->add_option("--out-dir", out_dir, "output directory")->required();
  sweep->add_option("--kinds", kinds, "dropout kinds")->delimiter(',');
  sweep->add_option("--c-list", c_list, "suppression constants for leaky")->delimiter(',');
  flags.attach(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    Manifest manifest(command, argc, argv);
    if (*gen) return cmd_gen_synthetic(out_dir, spec, embed_dim, noise, train_fraction, manifest);
    if (*build) return cmd_build_tcol(train_path, out_dir, manifest);
    if (*train) return cmd_train(train_path, test_path, flags, ablate_gi, out_dir, manifest);
    if (*eval) return cmd_eval(checkpoint_path, test_path, vocab_path, tcol_path);
    if (*grad) return cmd_gradcheck(grad_options, out_dir, manifest);
    if (*sweep) return cmd_dropout_sweep(train_path, test_path, flags, kinds, c_list, out_dir, manifest);
  } catch (const aga::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}
