// Command-line front end for the dropout decoding library: `decode` runs
// the ensemble decoder against a model file, `uncertainty` emits the
// per-position uncertainty report, `eval` scores a caption corpus.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "dropdec/dropdec.hpp"
#include "dropdec/io.hpp"

namespace {

struct DecodeArgs {
  std::string model_path;
  std::string prompt_text;
  std::optional<std::size_t> ensemble_size;
  std::vector<double> gammas;
  double delta = 0.1;
  std::size_t k_top = 5;
  std::size_t max_new_tokens = 512;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool no_prelim = false;
  bool uniform_mask = false;
  bool parallel = false;
  std::string trace_path;
  std::string eos_token;
};

struct UncertaintyArgs {
  std::string model_path;
  std::string out_path;
};

struct EvalArgs {
  std::string corpus_path;
  std::vector<double> betas;
};

std::uint64_t seed_from_env_or_default() {
  const char* env = std::getenv("DROPOUT_DECODE_SEED");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  errno = 0;
  const unsigned long long value = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0') {
    throw dropdec::ParameterError(
        std::string("DROPOUT_DECODE_SEED is not a valid seed: '") + env +
        "'");
  }
  return static_cast<std::uint64_t>(value);
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

std::vector<dropdec::TokenId> resolve_tokens(const dropdec::Vocabulary& vocab,
                                             const std::string& text) {
  std::vector<dropdec::TokenId> ids;
  for (const std::string& word : split_whitespace(text)) {
    ids.push_back(vocab.id_of(word));
  }
  return ids;
}

dropdec::DropoutSchedule make_schedule(const DecodeArgs& args) {
  if (!args.gammas.empty()) {
    if (args.ensemble_size && *args.ensemble_size != args.gammas.size()) {
      throw dropdec::ParameterError(
          "--K = " + std::to_string(*args.ensemble_size) + " but " +
          std::to_string(args.gammas.size()) + " --gamma values were given");
    }
    return dropdec::DropoutSchedule::from_gammas(args.gammas, args.delta,
                                                 args.uniform_mask);
  }
  const std::size_t count = args.ensemble_size.value_or(3);
  return dropdec::DropoutSchedule::generated(count, args.delta,
                                             args.uniform_mask);
}

int run_decode(const DecodeArgs& args) {
  const dropdec::io::AnyModel model = dropdec::io::load_model(args.model_path);
  return std::visit(
      [&](const auto& backend) {
        const dropdec::Vocabulary& vocab = backend.vocabulary();
        dropdec::DecodeConfig config;
        config.schedule = make_schedule(args);
        config.k_top = args.k_top;
        config.max_new_tokens = args.max_new_tokens;
        config.seed = args.seed_given ? args.seed : seed_from_env_or_default();
        config.preliminary_pass = !args.no_prelim;
        config.parallel_candidates = args.parallel;
        if (!args.eos_token.empty()) {
          config.eos_token = vocab.id_of(args.eos_token);
        }
        const std::vector<dropdec::TokenId> prompt =
            resolve_tokens(vocab, args.prompt_text);
        const dropdec::DecodeResult result =
            dropdec::decode(backend, prompt, config);
        if (!args.trace_path.empty()) {
          dropdec::io::write_text_file(
              args.trace_path,
              dropdec::io::trace_to_json(result.trace, vocab).dump(2) + "\n");
        }
        std::cout << dropdec::io::join_tokens(vocab, result.tokens) << "\n";
        return 0;
      },
      model);
}

int run_uncertainty(const UncertaintyArgs& args) {
  const dropdec::io::AnyModel model = dropdec::io::load_model(args.model_path);
  return std::visit(
      [&](const auto& backend) {
        const dropdec::UncertaintySummary summary = dropdec::report_summary(
            dropdec::build_report(backend.project_visual()));
        const std::string doc =
            dropdec::io::summary_to_json(summary).dump(2) + "\n";
        if (args.out_path.empty()) {
          std::cout << doc;
        } else {
          dropdec::io::write_text_file(args.out_path, doc);
        }
        return 0;
      },
      model);
}

int run_eval(const EvalArgs& args) {
  const std::vector<dropdec::eval::CaptionRecord> corpus =
      dropdec::io::load_corpus(args.corpus_path);
  const dropdec::eval::ChairScores chair = dropdec::eval::chair_scores(corpus);
  const dropdec::eval::PrecisionRecall pr =
      dropdec::eval::precision_recall(corpus);
  if (!pr.precision_defined) {
    std::cerr << "warning: corpus has no mentions; precision reported as 0\n";
  }
  if (!pr.recall_defined) {
    std::cerr << "warning: corpus has no ground-truth objects; recall "
                 "reported as 0\n";
  }
  char buf[40];
  auto print = [&buf](const std::string& label, double value) {
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    std::cout << label << " " << buf << "\n";
  };
  print("chair_s", chair.chair_s);
  print("chair_i", chair.chair_i);
  print("p_all", pr.precision);
  print("r_all", pr.recall);
  for (double beta : args.betas) {
    std::snprintf(buf, sizeof(buf), "%.9g", beta);
    const std::string label = std::string("f_") + buf;
    print(label, dropdec::eval::f_beta(pr.precision, pr.recall, beta));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-guided dropout decoding"};
  app.require_subcommand(1);

  DecodeArgs decode_args;
  CLI::App* decode = app.add_subcommand(
      "decode", "Decode with an ensemble of masked forwards");
  decode->add_option("--model", decode_args.model_path, "Model file")
      ->required();
  decode->add_option("--prompt", decode_args.prompt_text,
                     "Whitespace-separated prompt tokens");
  decode->add_option("--K", decode_args.ensemble_size,
                     "Ensemble size (default 3, or the --gamma count)");
  decode->add_option("--gamma", decode_args.gammas,
                     "Dropout scale per candidate; repeatable");
  decode->add_option("--delta", decode_args.delta,
                     "Dropout floor (default 0.1)");
  decode->add_option("--k-top", decode_args.k_top,
                     "Relevant-set rank cutoff (default 5)");
  decode->add_option("--max-new-tokens", decode_args.max_new_tokens,
                     "Generation length limit (default 512)");
  CLI::Option* seed_opt =
      decode->add_option("--seed", decode_args.seed,
                         "Mask RNG seed (default $DROPOUT_DECODE_SEED or 0)");
  decode->add_flag("--no-prelim", decode_args.no_prelim,
                   "Skip the preliminary pass; no positions are retained");
  decode->add_flag("--uniform-mask", decode_args.uniform_mask,
                   "Drop every position with probability gamma (ablation)");
  decode->add_flag("--parallel", decode_args.parallel,
                   "Evaluate the candidate forwards concurrently");
  decode->add_option("--trace", decode_args.trace_path,
                     "Write the step-by-step trace document here");
  decode->add_option("--eos", decode_args.eos_token,
                     "Stop after emitting this token");

  UncertaintyArgs uncertainty_args;
  CLI::App* uncertainty = app.add_subcommand(
      "uncertainty", "Report per-position visual uncertainty");
  uncertainty
      ->add_option("--model", uncertainty_args.model_path, "Model file")
      ->required();
  uncertainty->add_option("--out", uncertainty_args.out_path,
                          "Report file (default: standard output)");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Score a caption corpus for object hallucination");
  eval->add_option("--corpus", eval_args.corpus_path,
                   "Corpus file, one record per line")
      ->required();
  eval->add_option("--beta", eval_args.betas,
                   "F-score beta; repeatable (default 1 and 0.5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*decode) {
      decode_args.seed_given = seed_opt->count() > 0;
      return run_decode(decode_args);
    }
    if (*uncertainty) {
      return run_uncertainty(uncertainty_args);
    }
    if (*eval) {
      if (eval_args.betas.empty()) eval_args.betas = {1.0, 0.5};
      return run_eval(eval_args);
    }
    std::cerr << "error: no subcommand selected\n";
    return 1;
  } catch (const dropdec::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
