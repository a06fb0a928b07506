// Copyright 2026 The dialrl Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: train, evaluate, pretrain, generate-corpus, rate,
// compare, chat and plot-data.
//
// Exit codes: 0 success, 2 configuration error, 3 run error, 4 a compare
// expectation did not hold.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dialrl/corpus.h"
#include "dialrl/errors.h"
#include "dialrl/harness.h"
#include "json.hpp"

namespace fs = std::filesystem;
using dialrl::ExperimentConfig;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRun = 3;
constexpr int kExitExpectation = 4;

constexpr const char* kOutputRootEnv = "DIALRL_OUTPUT_ROOT";

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
};

void AddConfigOptions(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("-c,--config", args.path, "experiment configuration (JSON)");
  cmd->add_option("-s,--set", args.overrides, "override, e.g. env.space=summary or a2c.l2=1e-4");
}

// Loads the configuration, applies overrides and resolves the output
// directory against $DIALRL_OUTPUT_ROOT.
ExperimentConfig LoadConfig(const ConfigArgs& args) {
  json doc = json::object();
  if (!args.path.empty()) doc = dialrl::ReadJsonFile(args.path);
  for (const auto& o : args.overrides) dialrl::ApplyOverride(doc, o);
  ExperimentConfig cfg = dialrl::ExperimentConfigFromJson(doc);
  const char* root = std::getenv(kOutputRootEnv);
  if (cfg.output_dir.empty()) {
    cfg.output_dir = (fs::path(root && *root ? root : "runs") / cfg.name).string();
  } else if (root && *root && fs::path(cfg.output_dir).is_relative()) {
    cfg.output_dir = (fs::path(root) / cfg.output_dir).string();
  }
  cfg.Validate();
  return cfg;
}

// Accepts a run checkpoint (written by train) or a bare agent checkpoint
// (written by pretrain).
std::unique_ptr<dialrl::Agent> LoadAgent(const ExperimentConfig& cfg, const dialrl::World& world,
                                         const std::string& path, uint64_t seed) {
  auto agent = dialrl::MakeAgent(cfg, *world.ontology, seed);
  if (path.empty()) return agent;
  const json ck = dialrl::ReadJsonFile(path);
  agent->Restore(ck.value("schema", "") == "dialrl.run" ? ck.at("agent") : ck);
  return agent;
}

void PrintEval(const std::string& label, const dialrl::EvalResult& e) {
  std::cout << json{{"policy", label},
                    {"dialogues", e.dialogues},
                    {"success", e.success},
                    {"return", e.mean_return},
                    {"length", e.mean_length}}
                   .dump()
            << '\n';
}

// "a<b" or "a<=0.75*b" over median dialogues-to-threshold.
bool CheckExpectation(const dialrl::CompareReport& report, const std::string& expr) {
  static const std::regex kPattern(R"(^\s*([\w.-]+)\s*(<=|<)\s*(?:([0-9.eE+-]+)\s*\*\s*)?([\w.-]+)\s*$)");
  std::smatch m;
  if (!std::regex_match(expr, m, kPattern)) throw dialrl::ConfigError("cannot parse expectation '" + expr + "'");
  const double lhs = report.Find(m[1]).median;
  const double factor = m[3].matched ? std::stod(m[3]) : 1.0;
  const double rhs = factor * report.Find(m[4]).median;
  const bool ok = m[2] == "<" ? lhs < rhs : lhs <= rhs;
  std::cout << (ok ? "PASS " : "FAIL ") << expr << " (" << lhs << " vs " << rhs << ")\n";
  return ok;
}

std::vector<dialrl::RunCurves> LoadRuns(const std::vector<std::string>& dirs) {
  std::vector<dialrl::RunCurves> runs;
  for (const auto& d : dirs) runs.push_back(dialrl::LoadRunCurves(d));
  return runs;
}

int Run(int argc, char** argv) {
  CLI::App app{"Dialogue policy learning lab"};
  app.require_subcommand(1);

  ConfigArgs train_args;
  std::optional<uint64_t> train_seed;
  bool resume = false;
  auto* train = app.add_subcommand("train", "train every configured seed (or one with --seed)");
  AddConfigOptions(train, train_args);
  train->add_option("--seed", train_seed, "train only this seed");
  train->add_flag("--resume", resume, "continue from existing checkpoints");

  ConfigArgs eval_args;
  std::string eval_ckpt;
  std::string eval_policy = "agent";
  std::optional<int> eval_n;
  uint64_t eval_seed = 1;
  auto* evaluate = app.add_subcommand("evaluate", "greedy evaluation of a checkpoint or a reference policy");
  AddConfigOptions(evaluate, eval_args);
  evaluate->add_option("--checkpoint", eval_ckpt, "run or agent checkpoint");
  evaluate->add_option("--policy", eval_policy, "agent, handcrafted, random or repeat")
      ->check(CLI::IsMember({"agent", "handcrafted", "random", "repeat"}));
  evaluate->add_option("-n,--dialogues", eval_n, "number of test dialogues (default eval_dialogues)");
  evaluate->add_option("--seed", eval_seed, "evaluation stream seed");

  ConfigArgs pre_args;
  std::string pre_out;
  uint64_t pre_seed = 1;
  auto* pretrain = app.add_subcommand("pretrain", "run the configured pretraining stages and save the agent");
  AddConfigOptions(pretrain, pre_args);
  pretrain->add_option("-o,--out", pre_out, "agent checkpoint to write")->required();
  pretrain->add_option("--seed", pre_seed, "agent seed");

  ConfigArgs gen_args;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate-corpus", "log handcrafted dialogues with ratings");
  AddConfigOptions(generate, gen_args);
  generate->add_option("-o,--out", gen_out, "corpus file to write")->required();

  std::string rate_in;
  std::string rate_expert_out;
  auto* rate = app.add_subcommand("rate", "rating histogram of a corpus");
  rate->add_option("corpus", rate_in, "corpus file")->required();
  rate->add_option("--expert-out", rate_expert_out, "also write the rating-3 subset here");

  std::vector<std::string> cmp_dirs;
  double cmp_frac = 0.9;
  int cmp_min_seeds = 3;
  std::vector<std::string> cmp_expect;
  auto* compare = app.add_subcommand("compare", "dialogues-to-threshold across runs");
  compare->add_option("runs", cmp_dirs, "run directories holding seed_*/curve.csv")->required();
  compare->add_option("--frac", cmp_frac, "threshold as a fraction of the best mean success");
  compare->add_option("--min-seeds", cmp_min_seeds, "seeds required per run");
  compare->add_option("--expect", cmp_expect, "ordering on medians, e.g. 'da2c<ddqn' or 'da2c<=0.75*dqn'");

  ConfigArgs chat_args;
  std::string chat_ckpt;
  std::vector<std::string> chat_constraints;
  std::vector<std::string> chat_requests;
  uint64_t chat_seed = 1;
  auto* chat = app.add_subcommand("chat", "play the user against a trained agent");
  AddConfigOptions(chat, chat_args);
  chat->add_option("--checkpoint", chat_ckpt, "run or agent checkpoint")->required();
  chat->add_option("--constraint", chat_constraints, "declared goal constraint slot=value");
  chat->add_option("--request", chat_requests, "declared goal request slot");
  chat->add_option("--seed", chat_seed, "channel seed");

  std::vector<std::string> plot_dirs;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot-data", "mean/min/max success per eval point for plotting");
  plot->add_option("runs", plot_dirs, "run directories")->required();
  plot->add_option("-o,--out", plot_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto log = [](const std::string& line) { std::cerr << line << '\n'; };

  if (train->parsed()) {
    const ExperimentConfig cfg = LoadConfig(train_args);
    dialrl::TrainOptions opts{resume, log};
    if (train_seed) {
      dialrl::Train(cfg, *train_seed, cfg.output_dir + "/seed_" + std::to_string(*train_seed), opts);
    } else {
      dialrl::TrainAllSeeds(cfg, opts);
    }
    std::cout << cfg.output_dir << '\n';
  } else if (evaluate->parsed()) {
    const ExperimentConfig cfg = LoadConfig(eval_args);
    const dialrl::World world = dialrl::MakeWorld(cfg.env);
    dialrl::DialogueEnv env(cfg.env, world.ontology, world.database);
    const int n = eval_n.value_or(cfg.eval_dialogues);
    if (eval_policy == "agent") {
      if (eval_ckpt.empty()) throw dialrl::ConfigError("--checkpoint is required for --policy agent");
      const auto agent = LoadAgent(cfg, world, eval_ckpt, 1);
      PrintEval(agent->algorithm(), dialrl::Evaluate(*agent, env, n, eval_seed));
    } else if (eval_policy == "handcrafted") {
      dialrl::HandcraftedPolicy policy(cfg.handcrafted_threshold);
      PrintEval(eval_policy, dialrl::Evaluate(policy, env, n, eval_seed));
    } else if (eval_policy == "random") {
      dialrl::RandomPolicy policy;
      PrintEval(eval_policy, dialrl::Evaluate(policy, env, n, eval_seed));
    } else {
      dialrl::ConstantPolicy policy(dialrl::ParseActionName(cfg.env.space, "repeat"));
      PrintEval(eval_policy, dialrl::Evaluate(policy, env, n, eval_seed));
    }
  } else if (pretrain->parsed()) {
    const ExperimentConfig cfg = LoadConfig(pre_args);
    const dialrl::World world = dialrl::MakeWorld(cfg.env);
    auto agent = dialrl::MakeAgent(cfg, *world.ontology, pre_seed);
    dialrl::Rng rng(dialrl::DeriveSeed(pre_seed, 2));
    for (const auto& line : dialrl::RunPretraining(cfg, world, *agent, rng)) std::cout << line << '\n';
    dialrl::WriteJsonFile(pre_out, agent->Checkpoint());
  } else if (generate->parsed()) {
    ExperimentConfig cfg = LoadConfig(gen_args);
    cfg.corpus.path.clear();
    cfg.corpus.filter = "full";
    const dialrl::World world = dialrl::MakeWorld(cfg.env);
    const dialrl::Corpus corpus = dialrl::PrepareCorpus(cfg, world);
    dialrl::SaveCorpusFile(corpus, gen_out);
    const auto h = dialrl::RatingHistogram(corpus);
    std::cout << json{{"dialogues", corpus.dialogues.size()}, {"ratings", h}}.dump() << '\n';
  } else if (rate->parsed()) {
    const dialrl::Corpus corpus = dialrl::LoadCorpusFile(rate_in);
    const auto h = dialrl::RatingHistogram(corpus);
    std::cout << json{{"dialogues", corpus.dialogues.size()}, {"ratings", h}}.dump() << '\n';
    if (!rate_expert_out.empty()) dialrl::SaveCorpusFile(dialrl::FilterExpert(corpus), rate_expert_out);
  } else if (compare->parsed()) {
    const auto report = dialrl::Compare(LoadRuns(cmp_dirs), cmp_frac, cmp_min_seeds);
    std::cout << report.ToText();
    bool ok = true;
    for (const auto& e : cmp_expect) ok = CheckExpectation(report, e) && ok;
    if (!ok) return kExitExpectation;
  } else if (chat->parsed()) {
    const ExperimentConfig cfg = LoadConfig(chat_args);
    const dialrl::World world = dialrl::MakeWorld(cfg.env);
    const auto agent = LoadAgent(cfg, world, chat_ckpt, 1);
    std::optional<dialrl::UserGoal> goal;
    if (!chat_constraints.empty() || !chat_requests.empty()) {
      goal.emplace();
      for (const auto& c : chat_constraints) {
        const auto eq = c.find('=');
        if (eq == std::string::npos) throw dialrl::ConfigError("--constraint expects slot=value, got '" + c + "'");
        goal->constraints[c.substr(0, eq)] = c.substr(eq + 1);
      }
      goal->requests.insert(chat_requests.begin(), chat_requests.end());
    }
    dialrl::RunChat(cfg, world, *agent, goal, std::cin, std::cout, chat_seed);
  } else if (plot->parsed()) {
    const auto runs = LoadRuns(plot_dirs);
    if (plot_out.empty()) {
      dialrl::WritePlotData(runs, std::cout);
    } else {
      std::ofstream out(plot_out);
      if (!out) throw dialrl::UsageError("cannot write " + plot_out);
      dialrl::WritePlotData(runs, out);
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const dialrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dialrl::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRun;
  }
}
