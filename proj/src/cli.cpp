#include "samkit/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "samkit/errors.hpp"
#include "samkit/pipeline.hpp"
#include "samkit/util.hpp"

namespace samkit {

namespace {

void print_stage_stats(const char* stage, const StageStats& stats) {
  std::cout << stage << ": completed " << stats.completed << ", skipped " << stats.skipped
            << ", failed " << stats.failed << ", parked " << stats.permanent_failed;
  if (stats.aborted) std::cout << ", aborted";
  std::cout << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"synthetic twin pipeline for paired assignment corpora"};
  app.require_subcommand(1);

  std::string run_dir;
  std::string mode = "replay";
  std::string config_path;
  std::string templates_dir;
  std::uint64_t seed = 0;
  app.add_option("--run-dir", run_dir, "run directory holding all artifacts")->required();
  app.add_option("--mode", mode, "gateway mode")
      ->check(CLI::IsMember({"live", "record", "replay"}));
  auto* seed_opt = app.add_option("--seed", seed, "master sampling seed");
  app.add_option("--config", config_path, "config JSON file");
  auto* templates_opt =
      app.add_option("--templates", templates_dir, "prompt template directory");

  std::string corpus_root;
  std::size_t filter_threshold = 0;
  auto* ingest = app.add_subcommand("ingest", "convert and filter a corpus into a manifest");
  auto* corpus_opt = ingest->add_option("--corpus", corpus_root, "corpus root directory");
  auto* threshold_opt =
      ingest->add_option("--filter-threshold", filter_threshold, "max combined word count");

  int abort_after = 0;
  int parallelism = 0;
  auto* synthesize =
      app.add_subcommand("synthesize", "generate synthetic descriptions and submissions");
  synthesize->add_option("--abort-after", abort_after,
                         "stop after this many newly completed items (resume test aid)");
  auto* par_opt = synthesize->add_option("--parallelism", parallelism, "worker threads");

  auto* gate = app.add_subcommand("gate", "re-judge published pairs for identity leaks");

  auto* grade = app.add_subcommand("grade", "panel-grade real and synthetic submissions");

  std::string out_path;
  auto* eval_resemblance =
      app.add_subcommand("eval-resemblance", "similarity, length and mark fidelity");
  eval_resemblance->add_option("--out", out_path, "also copy the results JSON here");

  std::size_t per_model = 0;
  std::string registry_path;
  auto* eval_utility = app.add_subcommand("eval-utility", "feedback labeling study");
  auto* per_model_opt =
      eval_utility->add_option("--per-model", per_model, "submissions per feedback model");
  auto* registry_opt =
      eval_utility->add_option("--registry", registry_path, "dimension registry JSON");

  auto* ablate = app.add_subcommand("ablate-privacy", "privacy protection ablation grid");

  std::size_t matrix_sample = 0;
  bool matrix_parallel = false;
  auto* matrix = app.add_subcommand("matrix", "candidate generator comparison");
  auto* matrix_sample_opt =
      matrix->add_option("--sample", matrix_sample, "matrix sample size (0 = all)");
  matrix->add_flag("--parallel", matrix_parallel, "run candidate cells concurrently");

  auto* report = app.add_subcommand("report", "render tables and figures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunContext ctx;
    ctx.run_dir = run_dir;
    ctx.mode = parse_gateway_mode(mode);
    ctx.config = config_path.empty() ? default_run_config() : load_run_config(config_path);
    if (seed_opt->count() > 0) ctx.config.seed = seed;
    if (templates_opt->count() > 0) ctx.config.templates_dir = templates_dir;
    std::filesystem::create_directories(ctx.run_dir);

    if (app.got_subcommand(ingest)) {
      if (corpus_opt->count() > 0) ctx.config.corpus.root = corpus_root;
      if (threshold_opt->count() > 0) ctx.config.corpus.filter_threshold = filter_threshold;
      CorpusManifest manifest = run_ingest(ctx);
      std::cout << "ingest: " << manifest.assignments.size() << " assignments, "
                << manifest.submissions.size() << " submissions\n";
    } else if (app.got_subcommand(synthesize)) {
      if (par_opt->count() > 0) ctx.config.synthesis.parallelism = parallelism;
      SynthesizeOptions options;
      options.abort_after = abort_after;
      print_stage_stats("synthesize", run_synthesize(ctx, options));
    } else if (app.got_subcommand(gate)) {
      print_stage_stats("gate", run_gate(ctx));
    } else if (app.got_subcommand(grade)) {
      print_stage_stats("grade", run_grade(ctx));
    } else if (app.got_subcommand(eval_resemblance)) {
      run_eval_resemblance(ctx);
      std::filesystem::path result = ctx.run_dir / "eval" / "resemblance.json";
      if (!out_path.empty()) atomic_write_file(out_path, read_file(result));
      std::cout << "eval-resemblance: wrote " << result.string() << "\n";
    } else if (app.got_subcommand(eval_utility)) {
      if (per_model_opt->count() > 0) ctx.config.utility.per_model = per_model;
      if (registry_opt->count() > 0) ctx.config.utility.registry_file = registry_path;
      print_stage_stats("eval-utility", run_eval_utility(ctx));
    } else if (app.got_subcommand(ablate)) {
      run_ablate_privacy(ctx);
      std::cout << "ablate-privacy: wrote "
                << (ctx.run_dir / "eval" / "ablation.json").string() << "\n";
    } else if (app.got_subcommand(matrix)) {
      if (matrix_sample_opt->count() > 0) ctx.config.matrix.sample = matrix_sample;
      ctx.config.matrix.parallel_cells = matrix_parallel || ctx.config.matrix.parallel_cells;
      print_stage_stats("matrix", run_matrix(ctx));
    } else if (app.got_subcommand(report)) {
      run_report(ctx);
      std::cout << "report: wrote " << (ctx.run_dir / "report").string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace samkit
