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

#ifndef DIALRL_HARNESS_H_
#define DIALRL_HARNESS_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dialrl/actor_critic.h"
#include "dialrl/agent.h"
#include "dialrl/corpus.h"
#include "dialrl/environment.h"
#include "dialrl/gpsarsa.h"
#include "dialrl/value_agents.h"
#include "json.hpp"

namespace dialrl {

// ---------------------------------------------------------------------------
// Exploration schedule

struct EpsilonSchedule {
  enum class Mode { kGeometric, kLinear };
  enum class Unit { kTransition, kDialogue };

  Mode mode = Mode::kGeometric;
  Unit unit = Unit::kTransition;
  double start = 0.5;
  // Multiplicative factor (geometric) or decrement per step (linear).
  double rate = 0.99995;
  double floor = 0.05;

  void Validate() const;
  // geometric: max(floor, start rate^t); linear: max(floor, start - rate t).
  double At(int64_t t) const;
};

// ---------------------------------------------------------------------------
// Configuration

enum class Algorithm { kGpSarsa, kDqn, kDdqn, kDa2c, kTda2c };

std::string_view ToString(Algorithm a);
Algorithm ParseAlgorithm(std::string_view name);

// Where pretraining data comes from and which subset is used.
struct CorpusSettings {
  // Empty: generate with the handcrafted policy in the experiment environment.
  std::string path;
  int size = kDefaultCorpusSize;
  uint64_t seed = 11;
  // "full" or "expert".
  std::string filter = "full";
  BlunderSchedule schedule;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Algorithm algorithm = Algorithm::kDqn;
  EnvConfig env;
  QAgentConfig q;
  A2CConfig a2c;
  GpConfig gp;
  // Permits gpsarsa on the original space (slow; timing demonstrations only).
  bool gp_allow_original = false;
  // Action names never drawn by exploration; ["auto"] selects the select-*
  // actions in the original space and nothing in the summary space.
  std::vector<std::string> excluded_actions = {"auto"};
  EpsilonSchedule epsilon;
  // "none", "batch", "supervised" or "supervised+batch". tda2c defaults to
  // "supervised+batch" when left at "auto".
  std::string pretrain = "auto";
  PretrainConfig pretrain_options;
  CorpusSettings corpus;
  // Handcrafted rule threshold for generated corpora.
  double handcrafted_threshold = 0.7;

  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  int train_dialogues = 15000;
  int eval_period = 1000;
  int eval_dialogues = 500;
  // Checkpoint after every this many training dialogues (and at the end).
  int checkpoint_period = 1000;
  std::string output_dir;

  // Throws ConfigError naming the offending field.
  void Validate() const;
  // Pretraining mode after resolving "auto".
  std::string ResolvedPretrain() const;
};

nlohmann::json ToJson(const ExperimentConfig& cfg);
// Keys absent from j keep their defaults; a key that the configuration does
// not know is a ConfigError.
ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j);
ExperimentConfig LoadExperimentConfig(const std::string& path);

// Applies "a.b.c=value" overrides to a configuration document. The value is
// parsed as JSON when possible and taken as a string otherwise.
void ApplyOverride(nlohmann::json& doc, const std::string& assignment);

nlohmann::json ToJson(const EnvConfig& cfg);
EnvConfig EnvConfigFromJson(const nlohmann::json& j, EnvConfig base = {});

// Channel preset used by the comparison experiments.
ErrorModel ModerateNoise();

// ---------------------------------------------------------------------------
// Building blocks

struct World {
  std::shared_ptr<const Ontology> ontology;
  std::shared_ptr<const Database> database;
};

World MakeWorld(const EnvConfig& cfg);

std::unique_ptr<Agent> MakeAgent(const ExperimentConfig& cfg, const Ontology& ontology, uint64_t seed);

// Runs the agent's greedy policy.
class GreedyPolicy : public Policy {
 public:
  explicit GreedyPolicy(const Agent& agent) : agent_(agent) {}
  int Act(const PolicyInput& input, Rng& rng) override;

 private:
  const Agent& agent_;
};

class RandomPolicy : public Policy {
 public:
  int Act(const PolicyInput& input, Rng& rng) override;
};

class ConstantPolicy : public Policy {
 public:
  explicit ConstantPolicy(int action) : action_(action) {}
  int Act(const PolicyInput& /*input*/, Rng& /*rng*/) override { return action_; }

 private:
  int action_;
};

struct EvalResult {
  double success = 0.0;
  double mean_return = 0.0;
  double mean_length = 0.0;
  int dialogues = 0;
};

// Dialogue i runs on stream DeriveSeed(seed, i), so every call with the same
// seed sees the same test users.
EvalResult Evaluate(Policy& policy, DialogueEnv& env, int n, uint64_t seed);
EvalResult Evaluate(const Agent& agent, DialogueEnv& env, int n, uint64_t seed);

// Builds (or loads) the pretraining corpus of an experiment, filtered as configured.
Corpus PrepareCorpus(const ExperimentConfig& cfg, const World& world);

// Applies the configured pretraining stages. Returns the stage log lines.
std::vector<std::string> RunPretraining(const ExperimentConfig& cfg, const World& world, Agent& agent,
                                        Rng& rng);

// ---------------------------------------------------------------------------
// Training

struct CurveRow {
  int dialogues = 0;
  double success = 0.0;
  double mean_return = 0.0;
  double mean_length = 0.0;
  // Training time so far, evaluation excluded.
  double seconds = 0.0;
};

using LearningCurve = std::vector<CurveRow>;

inline constexpr const char* kCurveHeader = "dialogues,success,return,length,seconds";

void WriteCurveRow(std::ostream& out, const CurveRow& row);
LearningCurve ReadCurve(std::istream& in);
LearningCurve ReadCurveFile(const std::string& path);

struct TrainOptions {
  // Continue from <run_dir>/checkpoint.json when present.
  bool resume = false;
  // Optional progress sink, one line per eval row.
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  LearningCurve curve;
  std::vector<std::string> stage_log;
  std::unique_ptr<Agent> agent;
  int64_t transitions = 0;
};

// One seed of an experiment. When run_dir is non-empty it receives
// config.json, curve.csv (appended row by row), stages.log and checkpoints.
TrainResult Train(const ExperimentConfig& cfg, uint64_t seed, const std::string& run_dir,
                  const TrainOptions& options = {});

// Every seed under <output_dir>/seed_<s>.
void TrainAllSeeds(const ExperimentConfig& cfg, const TrainOptions& options = {});

// ---------------------------------------------------------------------------
// Comparison

inline constexpr double kNever = std::numeric_limits<double>::infinity();

// First row at or above the threshold, or kNever.
double DialoguesToThreshold(const LearningCurve& curve, double threshold);

struct RunCurves {
  std::string name;
  std::vector<LearningCurve> seeds;
};

// Across-seed means per eval row; throws ConfigError when seeds disagree on
// the eval points.
LearningCurve MeanCurve(const RunCurves& run);

struct RunSummary {
  std::string name;
  std::vector<double> to_threshold;
  double median = kNever;
  double min = kNever;
  double max = kNever;
  double final_success = 0.0;
  double initial_success = 0.0;
  double final_seconds = 0.0;
};

struct CompareReport {
  double threshold = 0.0;
  std::vector<RunSummary> runs;

  const RunSummary& Find(const std::string& name) const;
  std::string ToText() const;
};

// threshold = frac * max over runs of the best across-seed mean success.
// Each run needs at least min_seeds curves.
CompareReport Compare(const std::vector<RunCurves>& runs, double frac = 0.9, int min_seeds = 3);

double Median(std::vector<double> v);

// Reads <dir>/seed_*/curve.csv.
RunCurves LoadRunCurves(const std::string& dir);

// Plot-ready table: one row per eval point with mean, min and max success
// across seeds for every run.
void WritePlotData(const std::vector<RunCurves>& runs, std::ostream& out);

// ---------------------------------------------------------------------------
// Interactive session

struct ChatResult {
  int turns = 0;
  bool said_bye = false;
  // Set when a goal was declared.
  std::optional<bool> success;
};

// The operator plays the user: each input line holds user acts separated by
// ';' (an empty line is null()). Acts pass through the configured channel and
// tracker, and the agent answers greedily. Ends on bye, end of input or the
// turn limit.
ChatResult RunChat(const ExperimentConfig& cfg, const World& world, const Agent& agent,
                   const std::optional<UserGoal>& goal, std::istream& in, std::ostream& out, uint64_t seed);

// ---------------------------------------------------------------------------
// Files

void WriteJsonFile(const std::string& path, const nlohmann::json& j);
nlohmann::json ReadJsonFile(const std::string& path);

}  // namespace dialrl

#endif  // DIALRL_HARNESS_H_
