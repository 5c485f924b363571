// anomale: run the flow-embedding anomaly pipeline stage by stage.
//
//   anomale run-all --config cfg.json [--seed N] [--out DIR] [--mode benchmark|deploy]
//   anomale embed --config cfg.json --input prev_out --output new_out
//
// Exit codes: 0 ok, 1 error, 2 missing stage artifact.

#include "anomale/log.hpp"
#include "anomale/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode;
  std::string input;
  std::string output;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Pipeline config (JSON)")->required();
  cmd->add_option("--seed", o.seed, "Override the master seed");
  cmd->add_option("--out", o.out, "Override the output directory");
  cmd->add_option("--mode", o.mode, "benchmark|deploy")->check(CLI::IsMember({"benchmark", "deploy"}));
  cmd->add_option("--input", o.input, "Stage input (dataset CSV for preprocess/run-all, artifact dir otherwise)");
  cmd->add_option("--output", o.output, "Stage output directory");
}

anomale::PipelineConfig resolve(const Options& o) {
  auto c = anomale::load_pipeline_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.split.rng_seed = *o.seed;
    c.train.seed = *o.seed;
  }
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.mode.empty()) c.mode = anomale::parse_pipeline_mode(o.mode);
  return c;
}

anomale::StageIo stage_io(const Options& o) {
  anomale::StageIo io;
  if (!o.input.empty()) io.input = o.input;
  if (!o.output.empty()) io.output = o.output;
  return io;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised flow-graph embeddings for network intrusion detection"};
  app.require_subcommand(1);
  Options opts;
  std::string stage;
  for (const char* name : {"preprocess", "train", "embed", "detect", "evaluate", "run-all"}) {
    auto* cmd = app.add_subcommand(name);
    add_common(cmd, opts);
    cmd->callback([&stage, name] { stage = name; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve(opts);
    const auto io = stage_io(opts);
    if (stage == "preprocess") {
      anomale::run_preprocess(config, io);
    } else if (stage == "train") {
      anomale::run_train(config, io);
    } else if (stage == "embed") {
      anomale::run_embed(config, io);
    } else if (stage == "detect") {
      anomale::run_detect(config, io);
    } else if (stage == "evaluate" || stage == "run-all") {
      const auto report = stage == "evaluate" ? anomale::run_evaluate(config, io) : anomale::run_all(config, io);
      if (!report.rows.empty()) {
        anomale::EvalReport raw, emb;
        for (const auto& r : report.rows) (r.input == anomale::InputKind::raw ? raw : emb).rows.push_back(r);
        anomale::write_comparison_table(std::cout, anomale::compare(raw, emb));
      }
    }
  } catch (const anomale::MissingArtifact& e) {
    std::fprintf(stderr, "anomale: %s\n", e.what());
    return 2;
  } catch (const anomale::ConfigError& e) {
    std::fprintf(stderr, "anomale: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "anomale %s: %s\n", stage.c_str(), e.what());
    return 1;
  }
  return 0;
}
