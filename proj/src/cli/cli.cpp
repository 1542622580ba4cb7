#include "latlm/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "latlm/data/lattice_io.hpp"
#include "latlm/data/synthetic.hpp"
#include "latlm/data/text_io.hpp"
#include "latlm/errors.hpp"
#include "latlm/numerics/gradcheck.hpp"
#include "latlm/pipeline/training.hpp"

namespace latlm::cli {

namespace fs = std::filesystem;

namespace {

std::string format_value(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
std::string format_value(std::size_t v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(const std::string& v) { return v; }

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

// Registers options on one subcommand and remembers how to echo them.
struct Options {
  CLI::App* app = nullptr;
  std::vector<std::pair<std::string, std::function<std::string()>>> echo;

  template <typename T>
  CLI::Option* add(const std::string& key, T& var, const std::string& help) {
    echo.emplace_back(key, [&var] { return format_value(var); });
    return app->add_option("--" + dashed(key), var, help)->capture_default_str();
  }
};

class RunLog {
 public:
  RunLog(std::ostream& out, const fs::path& path) : out_(out) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    file_.open(path, std::ios::trunc);
    if (!file_) throw IoError("cannot write run log " + path.string());
  }

  void config(const std::string& key, const std::string& value) {
    file_ << key << '=' << value << '\n';
  }

  // Intermediate metrics: stdout and a comment line in the log.
  void note(const std::string& line) {
    out_ << "# " << line << '\n';
    file_ << "# " << line << '\n';
    file_.flush();
  }

  void metric(const std::string& key, double value) {
    out_ << key << '=' << format_value(value) << '\n';
    file_ << "# " << key << '=' << format_value(value) << '\n';
    file_.flush();
  }

 private:
  std::ostream& out_;
  std::ofstream file_;
};

struct Common {
  std::string config;
  std::string out_dir;
  std::size_t seed = 1;
};

struct ModelDims {
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 256;
  std::size_t layers = 2;
  bool decoder_bias = true;

  void add_to(Options& o) {
    o.add("embed_dim", embed_dim, "word embedding width");
    o.add("hidden_dim", hidden_dim, "LM hidden size per direction");
    o.add("layers", layers, "LM layers");
    o.add("decoder_bias", decoder_bias, "next-word decoder has a bias");
  }

  model::LmConfig config(std::size_t vocab_size) const {
    model::LmConfig c;
    c.vocab_size = vocab_size;
    c.embed_dim = embed_dim;
    c.hidden_dim = hidden_dim;
    c.layers = layers;
    c.decoder_bias = decoder_bias;
    return c;
  }
};

struct Schedule {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::size_t patience = 5;

  void add_to(Options& o) {
    o.add("epochs", epochs, "training epochs");
    o.add("batch_size", batch_size, "examples per adam step");
    o.add("patience", patience, "epochs without validation improvement before stopping");
  }
};

pipeline::TrainConfig train_config(const Schedule& s, double lr, std::size_t seed, RunLog& log,
                                   const char* metric) {
  pipeline::TrainConfig c;
  c.lr = lr;
  c.epochs = s.epochs;
  c.batch_size = s.batch_size;
  c.patience = s.patience;
  c.seed = seed;
  c.on_epoch = [&log, metric](const pipeline::EpochReport& r) {
    log.note("epoch=" + std::to_string(r.epoch) + " train_loss=" + format_value(r.train_loss) +
             " valid_loss=" + format_value(r.valid_loss) + " valid_" + metric + "=" +
             format_value(r.valid_metric) + (r.improved ? " best" : ""));
  };
  return c;
}

fs::path resolve(const Common& common, const std::string& given, const char* fallback) {
  return given.empty() ? fs::path(common.out_dir) / fallback : fs::path(given);
}

void require_path(const std::string& value, const char* key) {
  if (value.empty()) throw CLI::RequiredError("--" + dashed(key));
}

struct LabeledSet {
  std::vector<lattice::Lattice> lattices;
  std::vector<std::string> label_names;  // per lattice
};

LabeledSet read_labeled(const std::string& lattice_path, const std::string& label_path) {
  LabeledSet set;
  set.lattices = data::read_lattice_file(lattice_path);
  std::map<std::string, std::string> by_id;
  for (auto& r : data::read_labels(label_path)) {
    if (!by_id.emplace(r.lattice_id, r.label).second) {
      throw DataError(label_path + ": duplicate label for " + r.lattice_id);
    }
  }
  for (const auto& l : set.lattices) {
    const auto it = by_id.find(l.id);
    if (it == by_id.end()) throw DataError(label_path + ": no label for lattice " + l.id);
    set.label_names.push_back(it->second);
  }
  return set;
}

std::vector<std::size_t> label_ids(const LabeledSet& set, const std::vector<std::string>& labels) {
  std::vector<std::size_t> ids;
  for (const auto& name : set.label_names) {
    const auto it = std::find(labels.begin(), labels.end(), name);
    if (it == labels.end()) throw DataError("label '" + name + "' is not a known label");
    ids.push_back(static_cast<std::size_t>(it - labels.begin()));
  }
  return ids;
}

std::vector<lattice::Lattice> default_gradcheck_lattices() {
  lattice::Lattice l;
  l.id = "diamond";
  l.num_nodes = 4;
  l.transitions = {{0, 1, "cat", 0.7}, {0, 2, "cap", 0.3}, {1, 3, "sat", 1.0},
                   {2, 3, "sat", 1.0}};
  return {l};
}

// Expands `--config FILE` into flags placed before the user's own flags, so
// explicit flags win (the last occurrence of an option is kept).
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string config_path;
  std::size_t sub_pos = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (sub_pos == args.size() && !args[i].empty() && args[i][0] != '-') sub_pos = i;
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty() || sub_pos == args.size()) return args;
  const auto kv = data::parse_key_values(data::read_text_file(config_path));
  std::vector<std::string> injected;
  for (const auto& [key, value] : kv) {
    if (key == "subcommand") {
      if (value != args[sub_pos]) {
        throw CLI::ValidationError("config file " + config_path + " is for subcommand " + value);
      }
      continue;
    }
    injected.push_back("--" + dashed(key));
    injected.push_back(value);
  }
  out.assign(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

int fail(std::ostream& err, const char* kind, int code, const std::string& message) {
  err << "error=" << kind << " code=" << code << " message=\"" << escape(message) << "\"\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lattice language-model toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    common.out_dir = env;
  } else {
    common.out_dir = "out";
  }

  std::map<std::string, Options> registry;
  auto subcommand = [&](const std::string& name, const std::string& help) -> Options& {
    Options& o = registry[name];
    o.app = app.add_subcommand(name, help);
    o.app->add_option("--config", common.config, "key=value file; flags override it");
    o.add("out_dir", common.out_dir, "directory for outputs and the run log");
    o.add("seed", common.seed, "random seed");
    return o;
  };

  // gen-data
  data::SplitSizes sizes;
  data::ConfusionModel confusion;
  std::size_t corpus_size = 500, corpus_valid_size = 100;
  {
    Options& o = subcommand("gen-data", "generate a synthetic lattice classification task");
    o.add("train_size", sizes.train, "training examples per label");
    o.add("valid_size", sizes.valid, "validation examples per label");
    o.add("test_size", sizes.test, "test examples per label");
    o.add("substitution_rate", confusion.substitution_rate, "probability a position is confused");
    o.add("branches", confusion.branches, "competing words at a confused position");
    o.add("deletion_rate", confusion.deletion_rate, "probability of a skip transition");
    o.add("concentration", confusion.concentration, "Dirichlet concentration of branch weights");
    o.add("corpus_size", corpus_size, "stage-1 training sentences");
    o.add("corpus_valid_size", corpus_valid_size, "stage-1 validation sentences");
  }

  // pretrain-seq / pretrain-lattice
  ModelDims dims;
  Schedule schedule;
  double lm_lr = 1e-4;
  std::size_t min_count = 1;
  std::string corpus, valid_corpus, vocab_lattices, init, lattices, valid_lattices, output;
  {
    Options& o = subcommand("pretrain-seq", "stage 1: bidirectional LM on text");
    o.add("corpus", corpus, "training sentences, one per line");
    o.add("valid_corpus", valid_corpus, "validation sentences");
    o.add("vocab_lattices", vocab_lattices, "lattice file whose words join the vocabulary");
    o.add("min_count", min_count, "minimum token count for the vocabulary");
    dims.add_to(o);
    o.add("lm_lr", lm_lr, "adam learning rate");
    schedule.add_to(o);
    o.add("output", output, "checkpoint path (default <out_dir>/seq-lm.ckpt)");
  }
  {
    Options& o = subcommand("pretrain-lattice", "stage 2: lattice LM initialized from stage 1");
    o.add("init", init, "seq-lm or lattice-lm checkpoint; random init when empty");
    o.add("lattices", lattices, "training lattices");
    o.add("valid_lattices", valid_lattices, "validation lattices");
    o.add("min_count", min_count, "vocabulary threshold when starting from random init");
    dims.add_to(o);
    o.add("lm_lr", lm_lr, "adam learning rate");
    schedule.add_to(o);
    o.add("output", output, "checkpoint path (default <out_dir>/lattice-lm.ckpt)");
  }

  // train-clf
  std::string lm_path, train_lattices, train_labels, valid_labels;
  pipeline::ClassifierShape shape;
  double clf_lr = 1e-3;
  {
    Options& o = subcommand("train-clf", "train the classifier on top of a frozen lattice LM");
    o.add("lm", lm_path, "lattice-lm checkpoint");
    o.add("train_lattices", train_lattices, "training lattices");
    o.add("train_labels", train_labels, "training labels");
    o.add("valid_lattices", valid_lattices, "validation lattices");
    o.add("valid_labels", valid_labels, "validation labels");
    o.add("clf_hidden", shape.hidden, "classifier hidden size");
    o.add("clf_layers", shape.layers, "classifier layers");
    o.add("clf_lr", clf_lr, "adam learning rate");
    schedule.add_to(o);
    o.add("output", output, "checkpoint path (default <out_dir>/classifier.ckpt)");
  }

  // eval / perplexity
  std::string checkpoint, labels, predictions;
  {
    Options& o = subcommand("eval", "classification accuracy of a classifier checkpoint");
    o.add("checkpoint", checkpoint, "classifier checkpoint");
    o.add("lattices", lattices, "lattices to classify");
    o.add("labels", labels, "gold labels");
    o.add("predictions", predictions, "per-example output (default <out_dir>/predictions.tsv)");
  }
  {
    Options& o = subcommand("perplexity", "LM perplexity on lattices or text");
    o.add("checkpoint", checkpoint, "any checkpoint carrying an LM");
    o.add("lattices", lattices, "evaluation lattices");
    o.add("corpus", corpus, "evaluation sentences (sequential LM)");
  }

  // gradcheck / inspect-lattice
  ModelDims gc_dims{4, 3, 2, true};
  std::size_t gc_samples = 8;
  double gc_step = 1e-3, gc_tolerance = 1e-4, gc_init_scale = 1.0;
  {
    Options& o = subcommand("gradcheck", "finite-difference check of the lattice LM gradient");
    o.add("lattices", lattices, "lattices for the loss (a built-in diamond when empty)");
    o.add("embed_dim", gc_dims.embed_dim, "word embedding width");
    o.add("hidden_dim", gc_dims.hidden_dim, "LM hidden size per direction");
    o.add("layers", gc_dims.layers, "LM layers");
    o.add("samples", gc_samples, "coordinates sampled per tensor");
    o.add("step", gc_step, "central-difference step");
    o.add("tolerance", gc_tolerance, "maximum accepted relative error");
    o.add("init_scale", gc_init_scale, "uniform init range");
  }
  std::string lattice_id;
  std::size_t max_paths = 200;
  {
    Options& o = subcommand("inspect-lattice", "validate and summarize lattices");
    o.add("lattices", lattices, "lattice file");
    o.add("id", lattice_id, "only this lattice");
    o.add("max_paths", max_paths, "enumerate paths when there are at most this many");
  }

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, "usage", kUsage, e.what());
  } catch (const IoError& e) {
    return fail(err, "io", kIo, e.what());
  } catch (const DataError& e) {
    return fail(err, "usage", kUsage, std::string("config file: ") + e.what());
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();

  try {
    RunLog log(out, fs::path(common.out_dir) / (name + ".log"));
    log.config("subcommand", name);
    for (const auto& [key, fn] : registry.at(name).echo) log.config(key, fn());

    if (name == "gen-data") {
      const auto templates = data::default_intent_templates();
      const auto task = data::make_synthetic_task(templates, sizes, confusion, common.seed);
      const fs::path dir(common.out_dir);
      auto write_split = [&](const char* split, const std::vector<data::TaskExample>& exs) {
        std::vector<lattice::Lattice> lats, chains;
        std::vector<data::LabelRecord> recs;
        std::vector<data::Sentence> clean;
        for (const auto& ex : exs) {
          lats.push_back(ex.lattice);
          chains.push_back(lattice::from_token_sequence(ex.one_best, ex.id));
          recs.push_back({ex.id, task.labels[ex.label]});
          clean.push_back(ex.clean);
        }
        const std::string s(split);
        data::write_lattice_file(dir / (s + ".lattices"), lats);
        data::write_lattice_file(dir / (s + ".onebest.lattices"), chains);
        data::write_text_file(dir / (s + ".labels"), data::format_labels(recs));
        data::write_text_file(dir / (s + ".clean.txt"), data::format_corpus(clean));
      };
      write_split("train", task.train);
      write_split("valid", task.valid);
      write_split("test", task.test);
      const auto text = data::sample_text_corpus(templates, corpus_size + corpus_valid_size,
                                                 common.seed + 1);
      const std::span<const data::Sentence> all(text);
      data::write_text_file(dir / "corpus.train.txt", data::format_corpus(all.first(corpus_size)));
      data::write_text_file(dir / "corpus.valid.txt",
                            data::format_corpus(all.subspan(corpus_size)));
      data::write_text_file(dir / "manifest.txt", data::format_key_values(task.manifest));
      for (const auto& [k, v] : task.manifest) {
        if (k == "one_best_wer" || k == "oracle_wer") log.note(k + "=" + v);
      }
      log.metric("achieved_corruption_rate",
                 std::stod(*data::find_value(task.manifest, "achieved_corruption_rate")));
    } else if (name == "pretrain-seq") {
      require_path(corpus, "corpus");
      require_path(valid_corpus, "valid_corpus");
      const auto train = data::read_corpus(corpus);
      const auto valid = data::read_corpus(valid_corpus);
      std::vector<lattice::Lattice> extra;
      if (!vocab_lattices.empty()) extra = data::read_lattice_file(vocab_lattices);
      const auto vocab = data::Vocabulary::build(train, extra, min_count);
      log.note("vocab_size=" + std::to_string(vocab.size()));
      const auto result = pipeline::pretrain_stage1(
          train, valid, vocab, dims.config(vocab.size()),
          train_config(schedule, lm_lr, common.seed, log, "perplexity"));
      pipeline::save_checkpoint(resolve(common, output, "seq-lm.ckpt"), result.checkpoint);
      log.note("initial_valid_perplexity=" + format_value(result.initial.perplexity));
      log.metric("perplexity", result.best.perplexity);
    } else if (name == "pretrain-lattice") {
      require_path(lattices, "lattices");
      require_path(valid_lattices, "valid_lattices");
      std::optional<pipeline::Checkpoint> start;
      if (!init.empty()) {
        start = pipeline::load_checkpoint(init);
        pipeline::require_stage(*start, {pipeline::Stage::kSeqLm, pipeline::Stage::kLatticeLm});
      }
      const auto train = data::read_lattice_file(lattices);
      const auto valid = data::read_lattice_file(valid_lattices);
      data::Vocabulary vocab;
      model::LmConfig config;
      if (start) {
        vocab = start->vocab;
        config = start->lm;
      } else {
        vocab = data::Vocabulary::build({}, train, min_count);
        config = dims.config(vocab.size());
      }
      const auto result = pipeline::pretrain_stage2(
          train, valid, vocab, config, start ? &*start : nullptr,
          train_config(schedule, lm_lr, common.seed, log, "perplexity"));
      pipeline::save_checkpoint(resolve(common, output, "lattice-lm.ckpt"), result.checkpoint);
      log.note("initial_valid_loss=" + format_value(result.initial.mean_loss));
      log.note("initial_valid_perplexity=" + format_value(result.initial.perplexity));
      log.metric("perplexity", result.best.perplexity);
    } else if (name == "train-clf") {
      require_path(lm_path, "lm");
      require_path(train_lattices, "train_lattices");
      require_path(train_labels, "train_labels");
      require_path(valid_lattices, "valid_lattices");
      require_path(valid_labels, "valid_labels");
      const auto lm = pipeline::load_checkpoint(lm_path);
      pipeline::require_stage(lm, {pipeline::Stage::kLatticeLm, pipeline::Stage::kSeqLm});
      const auto train = read_labeled(train_lattices, train_labels);
      const auto valid = read_labeled(valid_lattices, valid_labels);
      const std::set<std::string> distinct(train.label_names.begin(), train.label_names.end());
      const std::vector<std::string> label_list(distinct.begin(), distinct.end());
      const auto train_ex = pipeline::featurize(lm, train.lattices, label_ids(train, label_list));
      const auto valid_ex = pipeline::featurize(lm, valid.lattices, label_ids(valid, label_list));
      const auto result = pipeline::train_classifier(
          lm, train_ex, valid_ex, label_list, shape,
          train_config(schedule, clf_lr, common.seed, log, "accuracy"));
      pipeline::save_checkpoint(resolve(common, output, "classifier.ckpt"), result.checkpoint);
      log.note("lm_checksum_before=" + std::to_string(result.lm_checksum_before) +
               " lm_checksum_after=" + std::to_string(result.lm_checksum_after));
      const auto best = pipeline::evaluate(result.checkpoint, valid_ex);
      log.metric("valid_accuracy", best.accuracy);
    } else if (name == "eval") {
      require_path(checkpoint, "checkpoint");
      require_path(lattices, "lattices");
      require_path(labels, "labels");
      const auto ck = pipeline::load_checkpoint(checkpoint);
      pipeline::require_stage(ck, {pipeline::Stage::kClassifier});
      const auto set = read_labeled(lattices, labels);
      const auto examples = pipeline::featurize(ck, set.lattices, label_ids(set, ck.labels));
      const auto ev = pipeline::evaluate(ck, examples);
      std::vector<data::LabelRecord> recs;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        recs.push_back({examples[i].id, ck.labels[ev.predictions[i]]});
      }
      data::write_text_file(resolve(common, predictions, "predictions.tsv"),
                            data::format_labels(recs));
      for (std::size_t g = 0; g < ck.labels.size(); ++g) {
        std::string row = "confusion " + ck.labels[g] + ":";
        for (std::size_t c : ev.confusion[g]) row += " " + std::to_string(c);
        log.note(row);
      }
      log.metric("accuracy", ev.accuracy);
    } else if (name == "perplexity") {
      require_path(checkpoint, "checkpoint");
      if (lattices.empty() == corpus.empty()) {
        throw CLI::ValidationError("give exactly one of --lattices and --corpus");
      }
      const auto ck = pipeline::load_checkpoint(checkpoint);
      auto params = pipeline::lm_params_of(ck);
      pipeline::LmEvaluation ev;
      if (!lattices.empty()) {
        std::vector<pipeline::LmExample> exs;
        for (const auto& l : data::read_lattice_file(lattices)) {
          exs.push_back(pipeline::prepare_lm_example(l, ck.vocab));
        }
        ev = pipeline::evaluate_lattices(params, ck.lm, exs);
      } else {
        std::vector<std::vector<std::size_t>> seqs;
        for (const auto& s : data::read_corpus(corpus)) {
          seqs.push_back(pipeline::sequence_ids(s, ck.vocab));
        }
        ev = pipeline::evaluate_sequences(params, ck.lm, seqs);
      }
      log.note("forward_perplexity=" + format_value(ev.forward_perplexity));
      log.note("backward_perplexity=" + format_value(ev.backward_perplexity));
      log.note("mean_loss=" + format_value(ev.mean_loss));
      log.metric("perplexity", ev.perplexity);
    } else if (name == "gradcheck") {
      const auto lats =
          lattices.empty() ? default_gradcheck_lattices() : data::read_lattice_file(lattices);
      if (lats.empty()) throw DataError("no lattices to check");
      const auto vocab = data::Vocabulary::build({}, lats, 1);
      auto config = gc_dims.config(vocab.size());
      config.init_scale = gc_init_scale;
      auto params = model::init_lm_params(config, common.seed);
      std::vector<pipeline::LmExample> exs;
      for (const auto& l : lats) exs.push_back(pipeline::prepare_lm_example(l, vocab));
      num::GradCheckOptions opts;
      opts.step = gc_step;
      opts.samples_per_tensor = gc_samples;
      opts.seed = common.seed;
      const auto result = num::grad_check(
          [&](num::Tape& tape) {
            const auto lm = model::bind_lm(tape, params, config, true);
            std::vector<num::Var> losses;
            for (const auto& ex : exs) losses.push_back(pipeline::lattice_lm_loss(tape, lm, ex));
            return num::mean(losses);
          },
          params, opts);
      log.note("coordinates_checked=" + std::to_string(result.coordinates_checked));
      log.note("worst_param=" + result.worst_param + " worst_index=" +
               std::to_string(result.worst_index) + " analytic=" +
               format_value(result.worst_analytic) + " numeric=" +
               format_value(result.worst_numeric));
      log.metric("max_rel_error", result.max_rel_error);
      if (!(result.max_rel_error < gc_tolerance)) {
        return fail(err, "gradcheck", kModel,
                    "max relative error " + format_value(result.max_rel_error) +
                        " exceeds tolerance " + format_value(gc_tolerance));
      }
    } else if (name == "inspect-lattice") {
      require_path(lattices, "lattices");
      std::size_t shown = 0, valid_count = 0;
      for (const auto& l : data::read_lattice_file(lattices)) {
        if (!lattice_id.empty() && l.id != lattice_id) continue;
        ++shown;
        const auto report = lattice::validate(l);
        std::string line = "lattice=" + l.id + " nodes=" + std::to_string(l.num_nodes) +
                           " edges=" + std::to_string(l.transitions.size()) +
                           " valid=" + (report.valid() ? "true" : "false");
        if (report.valid()) {
          ++valid_count;
          const auto paths = lattice::count_paths(l);
          line += " paths=" + std::to_string(paths);
          std::string best;
          for (const auto& w : lattice::one_best_path(lattice::normalize_outgoing(l))) {
            best += (best.empty() ? "" : " ") + w;
          }
          line += " one_best=\"" + best + "\"";
        } else {
          line += " violations=\"" + report.summary() + "\"";
        }
        log.note(line);
        if (report.valid() && lattice::count_paths(l) <= max_paths) {
          for (const auto& p : lattice::enumerate_paths(lattice::normalize_outgoing(l), max_paths)) {
            std::string words;
            for (const auto& w : p.words) words += (words.empty() ? "" : " ") + w;
            log.note("  path prob=" + format_value(p.prob) + " words=\"" + words + "\"");
          }
        }
      }
      if (!lattice_id.empty() && shown == 0) throw DataError("no lattice with id " + lattice_id);
      log.metric("valid_lattices", static_cast<double>(valid_count));
    }
    return kOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, "usage", kUsage, e.what());
  } catch (const StageError& e) {
    return fail(err, "stage", kModel, e.what());
  } catch (const ModelError& e) {
    return fail(err, "model", kModel, e.what());
  } catch (const ParseError& e) {
    return fail(err, "parse", kData, e.what());
  } catch (const DataError& e) {
    return fail(err, "data", kData, e.what());
  } catch (const IoError& e) {
    return fail(err, "io", kIo, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(err, "io", kIo, e.what());
  } catch (const std::exception& e) {
    return fail(err, "internal", kUnexpected, e.what());
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace latlm::cli
