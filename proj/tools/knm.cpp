// knm: command-line front end for datastore building, completion, evaluation
// and hyper-parameter sweeps.
//
// Exit codes: 0 ok, 2 config error, 3 backend error, 4 data error.

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "knm/knm.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitData = 4;

struct ModelSpec {
  std::string lm;  // "ref:<model file>" or "url:<base url>"
  std::string vocab;
  std::size_t dim = 64;
  double timeout = 30.0;
};

std::unique_ptr<knm::LanguageModel> open_model(const ModelSpec& spec, const knm::Vocabulary& vocab) {
  if (spec.lm.rfind("ref:", 0) == 0) {
    auto lm = std::make_unique<knm::NgramLanguageModel>(knm::NgramLanguageModel::load(spec.lm.substr(4)));
    if (lm->vocab_size() != vocab.size()) {
      throw knm::VocabMismatch("model was trained with a vocabulary of " +
                               std::to_string(lm->vocab_size()) + " tokens, vocabulary file has " +
                               std::to_string(vocab.size()));
    }
    return lm;
  }
  if (spec.lm.rfind("url:", 0) == 0) {
    knm::RemoteOptions ro;
    ro.base_url = spec.lm.substr(4);
    ro.vocab_size = vocab.size();
    ro.dim = spec.dim;
    ro.timeout_seconds = spec.timeout;
    return std::make_unique<knm::RemoteLanguageModel>(ro);
  }
  throw knm::ConfigError("--lm must be ref:<model file> or url:<base url>");
}

void add_model_options(CLI::App* cmd, ModelSpec& spec) {
  cmd->add_option("--lm", spec.lm, "ref:<model file> or url:<base url>")->required();
  cmd->add_option("--vocab", spec.vocab, "vocabulary file (one token per line)")->required();
  cmd->add_option("--dim", spec.dim, "embedding dimension of a remote model")->capture_default_str();
  cmd->add_option("--timeout", spec.timeout, "remote request timeout in seconds")->capture_default_str();
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  for (const auto& item : knm::detail::split_list(text)) {
    values.push_back(knm::detail::parse_number<double>("--values", item));
  }
  if (values.empty()) throw knm::ConfigError("--values: empty list");
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kNM-LM: retrieval-augmented code completion over a black-box language model"};
  app.require_subcommand(1);

  // train-lm
  std::vector<std::string> train_corpora, vocab_corpora;
  std::string lm_out, vocab_out;
  knm::NgramOptions ngram;
  auto* train_cmd = app.add_subcommand("train-lm", "train the reference n-gram model");
  train_cmd->add_option("--corpus", train_corpora, "training corpus (JSONL {path,text})")->required();
  train_cmd->add_option("--vocab-corpus", vocab_corpora,
                        "extra corpora whose tokens join the vocabulary (e.g. the db corpus)");
  train_cmd->add_option("--order", ngram.order, "n-gram order (1-3)")->capture_default_str();
  train_cmd->add_option("--smoothing-k", ngram.smoothing_k, "add-k constant")->capture_default_str();
  train_cmd->add_option("--dim", ngram.dim, "embedding dimension")->capture_default_str();
  train_cmd->add_option("--seed", ngram.seed, "embedding projection seed")->capture_default_str();
  train_cmd->add_option("--out", lm_out, "model file")->required();
  train_cmd->add_option("--vocab-out", vocab_out, "vocabulary file")->required();

  // build-db
  ModelSpec build_model;
  std::string db_corpus, db_out, db_mode = "decoupled";
  auto* build_cmd = app.add_subcommand("build-db", "build a datastore from a corpus");
  build_cmd->add_option("--corpus", db_corpus, "corpus (JSONL {path,text})")->required();
  add_model_options(build_cmd, build_model);
  build_cmd->add_option("--mode", db_mode, "decoupled or full")->capture_default_str();
  build_cmd->add_option("--out", db_out, "datastore file")->required();

  // complete
  ModelSpec complete_model;
  std::string complete_db, context_file, complete_mode = "knm_bayesian";
  bool line = false;
  knm::CombinerConfig cc;
  std::size_t max_tokens = 32;
  auto* complete_cmd = app.add_subcommand("complete", "complete the next token or line");
  complete_cmd->add_option("--db", complete_db, "datastore file")->required();
  add_model_options(complete_cmd, complete_model);
  complete_cmd->add_option("--context-file", context_file, "source text to continue")->required();
  complete_cmd->add_flag("--line", line, "complete up to the end of the line");
  complete_cmd->add_option("--mode", complete_mode, "combination mode")->capture_default_str();
  complete_cmd->add_option("-k,--k", cc.k, "neighbors")->capture_default_str();
  complete_cmd->add_option("-N,--window", cc.window, "observation window")->capture_default_str();
  complete_cmd->add_option("--lambda", cc.fixed_lambda, "fixed lambda")->capture_default_str();
  complete_cmd->add_option("--max-tokens", max_tokens, "line length limit")->capture_default_str();

  // eval
  std::string eval_config;
  auto* eval_cmd = app.add_subcommand("eval", "run an experiment from a config file");
  eval_cmd->add_option("--config", eval_config, "key = value config file")->required();

  // sweep
  std::string sweep_config, sweep_axis, sweep_values, sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate one hyper-parameter over several values");
  sweep_cmd->add_option("--config", sweep_config, "key = value config file")->required();
  sweep_cmd->add_option("--axis", sweep_axis, "k, N or lambda")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma separated values")->required();
  sweep_cmd->add_option("--out", sweep_out, "CSV output (default: stdout)");

  // gen-suite
  std::string suite_dir;
  knm::ShiftSuiteOptions suite_opt;
  auto* suite_cmd = app.add_subcommand("gen-suite", "write the synthetic domain-shift suite");
  suite_cmd->add_option("--out-dir", suite_dir, "output directory")->required();
  suite_cmd->add_option("--seed", suite_opt.seed, "generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) {
      std::vector<knm::SourceRecord> records;
      for (const auto& path : train_corpora) {
        auto r = knm::read_corpus(path);
        records.insert(records.end(), r.begin(), r.end());
      }
      auto texts = knm::texts_of(records);
      for (const auto& path : vocab_corpora) {
        for (auto& r : knm::read_corpus(path)) texts.push_back(std::move(r.text));
      }
      const auto vocab = knm::build_vocabulary(texts);
      const auto seqs = knm::tokenize_corpus(records, vocab);
      const auto lm = knm::NgramLanguageModel::train(seqs, vocab.size(), ngram);
      lm.save(lm_out);
      vocab.save(vocab_out);
      std::cout << "vocabulary: " << vocab.size() << " tokens\n";
    } else if (*build_cmd) {
      const auto vocab = knm::Vocabulary::load(build_model.vocab);
      const auto lm = open_model(build_model, vocab);
      const auto seqs = knm::tokenize_corpus(knm::read_corpus(db_corpus), vocab);
      knm::BuildOptions bo;
      bo.dim = lm->embedding_dim();
      const auto store = knm::parse_datastore_mode(db_mode) == knm::DatastoreMode::full
                             ? knm::build_full(seqs, *lm, bo)
                             : knm::build_decoupled(seqs, *lm, bo);
      store.save(db_out);
      std::cout << "entries: " << store.size() << ", total tokens: " << store.total_tokens()
                << ", mistakes: " << store.mistake_tokens() << ", err: " << store.err()
                << ", bytes: " << store.serialized_size() << "\n";
    } else if (*complete_cmd) {
      const auto vocab = knm::Vocabulary::load(complete_model.vocab);
      const auto lm = open_model(complete_model, vocab);
      const auto store = knm::Datastore::load(complete_db);
      const knm::FlatIndex index(store);
      cc.mode = knm::parse_combine_mode(complete_mode);
      const knm::Completer completer(*lm, index, cc);
      const auto context = knm::tokenize(knm::binary::read_file(context_file), vocab);
      const double lam = completer.lambda(context);
      knm::TokenSequence out;
      if (line) {
        out = completer.complete_line_with_lambda(context, lam, max_tokens);
      } else {
        out.push_back(completer.step(context, lam).token);
      }
      std::cout << knm::render_line(out, vocab) << "\n";
      std::cerr << "lambda = " << lam << "\n";
    } else if (*eval_cmd) {
      const auto config = knm::ExperimentConfig::from_file(eval_config);
      const auto report = knm::run_experiment(config);
      std::cout << report.table();
    } else if (*sweep_cmd) {
      const auto config = knm::ExperimentConfig::from_file(sweep_config);
      const auto axis = knm::parse_sweep_axis(sweep_axis);
      const auto values = parse_values(sweep_values);
      for (double v : values) knm::with_axis_value(config, axis, v);
      const auto reports = knm::sweep(config, axis, values);
      const auto csv = knm::sweep_csv(axis, values, reports);
      if (sweep_out.empty()) {
        std::cout << csv;
      } else {
        knm::binary::write_file(sweep_out, csv);
      }
    } else if (*suite_cmd) {
      const auto suite = knm::make_shift_suite(suite_opt);
      const std::filesystem::path dir(suite_dir);
      knm::write_shift_suite(dir, suite, suite_opt.seed);
      std::cout << "wrote " << suite.train.size() << " train, " << suite.db.size() << " db, "
                << suite.test.size() << " test files to " << dir.string() << "\n";
    }
  } catch (const knm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const knm::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const knm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
