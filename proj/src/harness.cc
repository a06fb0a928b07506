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

#include "dialrl/harness.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "dialrl/errors.h"

namespace dialrl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Rejects keys of `doc` that do not occur in `defaults`.
void CheckKeys(const json& doc, const json& defaults, const std::string& path) {
  if (!doc.is_object()) return;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown configuration key '" + key + "'");
    if (defaults.at(it.key()).is_object()) CheckKeys(it.value(), defaults.at(it.key()), key);
  }
}

const json& Section(const json& j, const char* key) {
  static const json kEmpty = json::object();
  return j.contains(key) ? j.at(key) : kEmpty;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<int> ExcludedIndices(const ExperimentConfig& cfg) {
  std::vector<std::string> names = cfg.excluded_actions;
  if (names.size() == 1 && names[0] == "auto") {
    names.clear();
    if (cfg.env.space == ActionSpace::kOriginal) names = {"select-area", "select-food", "select-pricerange"};
  }
  std::vector<int> out;
  for (const auto& n : names) out.push_back(ParseActionName(cfg.env.space, n));
  return out;
}

json RowJson(const CurveRow& r) {
  return {{"dialogues", r.dialogues},
          {"success", r.success},
          {"return", r.mean_return},
          {"length", r.mean_length},
          {"seconds", r.seconds}};
}

CurveRow RowFromJson(const json& j) {
  return {j.at("dialogues").get<int>(), j.at("success").get<double>(), j.at("return").get<double>(),
          j.at("length").get<double>(), j.at("seconds").get<double>()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Exploration schedule

void EpsilonSchedule::Validate() const {
  if (!(start >= 0.0 && start <= 1.0)) throw ConfigError("epsilon.start outside [0,1]");
  if (!(floor >= 0.0 && floor <= start)) throw ConfigError("epsilon.floor outside [0, epsilon.start]");
  if (mode == Mode::kGeometric && !(rate > 0.0 && rate <= 1.0)) throw ConfigError("epsilon.rate outside (0,1]");
  if (mode == Mode::kLinear && !(rate >= 0.0)) throw ConfigError("epsilon.rate must be nonnegative");
}

double EpsilonSchedule::At(int64_t t) const {
  const double x = static_cast<double>(std::max<int64_t>(t, 0));
  const double e = mode == Mode::kGeometric ? start * std::pow(rate, x) : start - rate * x;
  return std::max(floor, e);
}

// ---------------------------------------------------------------------------
// Configuration

std::string_view ToString(Algorithm a) {
  switch (a) {
    case Algorithm::kGpSarsa:
      return "gpsarsa";
    case Algorithm::kDqn:
      return "dqn";
    case Algorithm::kDdqn:
      return "ddqn";
    case Algorithm::kDa2c:
      return "da2c";
    case Algorithm::kTda2c:
      return "tda2c";
  }
  return "dqn";
}

Algorithm ParseAlgorithm(std::string_view name) {
  for (auto a : {Algorithm::kGpSarsa, Algorithm::kDqn, Algorithm::kDdqn, Algorithm::kDa2c, Algorithm::kTda2c}) {
    if (ToString(a) == name) return a;
  }
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

ErrorModel ModerateNoise() {
  ErrorModel em;
  em.p_confuse = 0.15;
  em.p_drop = 0.05;
  return em;
}

std::string ExperimentConfig::ResolvedPretrain() const {
  if (pretrain != "auto") return pretrain;
  return algorithm == Algorithm::kTda2c ? "supervised+batch" : "none";
}

void ExperimentConfig::Validate() const {
  const Ontology ontology = DefaultOntology();
  env.Validate(ontology);
  const int n = NumActions(env.space);
  const auto excluded = ExcludedIndices(*this);
  const bool actor_critic = algorithm == Algorithm::kDa2c || algorithm == Algorithm::kTda2c;
  if (algorithm == Algorithm::kGpSarsa) {
    gp.Validate();
    if (env.space != ActionSpace::kSummary && !gp_allow_original) {
      throw ConfigError("gpsarsa runs on the summary space; set gp_allow_original to override");
    }
  } else if (actor_critic) {
    A2CConfig c = a2c;
    c.excluded = excluded;
    c.Validate(n);
  } else {
    QAgentConfig c = q;
    c.excluded = excluded;
    c.Validate(n);
  }
  epsilon.Validate();
  const std::string p = ResolvedPretrain();
  if (p != "none" && p != "batch" && p != "supervised" && p != "supervised+batch") {
    throw ConfigError("pretrain must be auto, none, batch, supervised or supervised+batch");
  }
  if (p != "none" && algorithm == Algorithm::kGpSarsa) throw ConfigError("gpsarsa does not support pretraining");
  if (p.find("supervised") != std::string::npos && !actor_critic) {
    throw ConfigError("supervised pretraining needs a policy network (da2c or tda2c)");
  }
  pretrain_options.Validate();
  if (corpus.size <= 0) throw ConfigError("corpus.size must be positive");
  if (corpus.filter != "full" && corpus.filter != "expert") throw ConfigError("corpus.filter must be full or expert");
  corpus.schedule.Validate();
  if (!(handcrafted_threshold > 0.0 && handcrafted_threshold <= 1.0)) {
    throw ConfigError("handcrafted_threshold outside (0,1]");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (train_dialogues < 0) throw ConfigError("train_dialogues must be nonnegative");
  if (eval_period <= 0) throw ConfigError("eval_period must be positive");
  if (eval_dialogues <= 0) throw ConfigError("eval_dialogues must be positive");
  if (checkpoint_period <= 0 || checkpoint_period % eval_period != 0) {
    throw ConfigError("checkpoint_period must be a positive multiple of eval_period");
  }
}

json ToJson(const EnvConfig& c) {
  return {{"space", std::string(ToString(c.space))},
          {"max_turns", c.max_turns},
          {"turn_penalty", c.turn_penalty},
          {"success_reward", c.success_reward},
          {"failure_reward", c.failure_reward},
          {"gamma", c.gamma},
          {"confirm_threshold", c.confirm_threshold},
          {"inform_request_threshold", c.inform_request_threshold},
          {"db_size", c.db_size},
          {"db_seed", c.db_seed},
          {"goal",
           {{"constraint_inclusion", c.goal.constraint_inclusion},
            {"request_count_probs", c.goal.request_count_probs},
            {"request_pool", c.goal.request_pool},
            {"satisfiable_frac", c.goal.satisfiable_frac}}},
          {"user",
           {{"p_multi_act", c.user.p_multi_act},
            {"p_null", c.user.p_null},
            {"p_reqalts_on_bad_offer", c.user.p_reqalts_on_bad_offer},
            {"p_reqmore", c.user.p_reqmore},
            {"p_restart", c.user.p_restart}}},
          {"error",
           {{"p_confuse", c.error.p_confuse},
            {"p_drop", c.error.p_drop},
            {"nbest_size", c.error.nbest_size},
            {"concentration", c.error.concentration}}}};
}

EnvConfig EnvConfigFromJson(const json& j, EnvConfig c) {
  if (j.contains("space")) c.space = ParseActionSpace(j.at("space").get<std::string>());
  c.max_turns = j.value("max_turns", c.max_turns);
  c.turn_penalty = j.value("turn_penalty", c.turn_penalty);
  c.success_reward = j.value("success_reward", c.success_reward);
  c.failure_reward = j.value("failure_reward", c.failure_reward);
  c.gamma = j.value("gamma", c.gamma);
  c.confirm_threshold = j.value("confirm_threshold", c.confirm_threshold);
  c.inform_request_threshold = j.value("inform_request_threshold", c.inform_request_threshold);
  c.db_size = j.value("db_size", c.db_size);
  c.db_seed = j.value("db_seed", c.db_seed);
  const json& g = Section(j, "goal");
  c.goal.constraint_inclusion = g.value("constraint_inclusion", c.goal.constraint_inclusion);
  c.goal.request_count_probs = g.value("request_count_probs", c.goal.request_count_probs);
  c.goal.request_pool = g.value("request_pool", c.goal.request_pool);
  c.goal.satisfiable_frac = g.value("satisfiable_frac", c.goal.satisfiable_frac);
  const json& u = Section(j, "user");
  c.user.p_multi_act = u.value("p_multi_act", c.user.p_multi_act);
  c.user.p_null = u.value("p_null", c.user.p_null);
  c.user.p_reqalts_on_bad_offer = u.value("p_reqalts_on_bad_offer", c.user.p_reqalts_on_bad_offer);
  c.user.p_reqmore = u.value("p_reqmore", c.user.p_reqmore);
  c.user.p_restart = u.value("p_restart", c.user.p_restart);
  const json& e = Section(j, "error");
  c.error.p_confuse = e.value("p_confuse", c.error.p_confuse);
  c.error.p_drop = e.value("p_drop", c.error.p_drop);
  c.error.nbest_size = e.value("nbest_size", c.error.nbest_size);
  c.error.concentration = e.value("concentration", c.error.concentration);
  return c;
}

json ToJson(const ExperimentConfig& c) {
  json q = ToJson(c.q);
  q.erase("gamma");
  q.erase("excluded");
  json a2c = ToJson(c.a2c);
  a2c.erase("gamma");
  a2c.erase("excluded");
  json gp = ToJson(c.gp);
  gp.erase("gamma");
  return {{"name", c.name},
          {"algorithm", std::string(ToString(c.algorithm))},
          {"env", ToJson(c.env)},
          {"q", q},
          {"a2c", a2c},
          {"gp", gp},
          {"gp_allow_original", c.gp_allow_original},
          {"excluded_actions", c.excluded_actions},
          {"epsilon",
           {{"mode", c.epsilon.mode == EpsilonSchedule::Mode::kGeometric ? "geometric" : "linear"},
            {"unit", c.epsilon.unit == EpsilonSchedule::Unit::kTransition ? "transition" : "dialogue"},
            {"start", c.epsilon.start},
            {"rate", c.epsilon.rate},
            {"floor", c.epsilon.floor}}},
          {"pretrain", c.pretrain},
          {"pretrain_options", ToJson(c.pretrain_options)},
          {"corpus",
           {{"path", c.corpus.path},
            {"size", c.corpus.size},
            {"seed", c.corpus.seed},
            {"filter", c.corpus.filter},
            {"schedule", ToJson(c.corpus.schedule)}}},
          {"handcrafted_threshold", c.handcrafted_threshold},
          {"seeds", c.seeds},
          {"train_dialogues", c.train_dialogues},
          {"eval_period", c.eval_period},
          {"eval_dialogues", c.eval_dialogues},
          {"checkpoint_period", c.checkpoint_period},
          {"output_dir", c.output_dir}};
}

ExperimentConfig ExperimentConfigFromJson(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig c;
  CheckKeys(j, ToJson(c), "");
  try {
    c.name = j.value("name", c.name);
    if (j.contains("algorithm")) c.algorithm = ParseAlgorithm(j.at("algorithm").get<std::string>());
    c.env = EnvConfigFromJson(Section(j, "env"));
    c.q = QAgentConfigFromJson(Section(j, "q"));
    c.a2c = A2CConfigFromJson(Section(j, "a2c"));
    c.gp = GpConfigFromJson(Section(j, "gp"));
    c.gp_allow_original = j.value("gp_allow_original", c.gp_allow_original);
    c.excluded_actions = j.value("excluded_actions", c.excluded_actions);
    const json& e = Section(j, "epsilon");
    if (e.contains("mode")) {
      const auto m = e.at("mode").get<std::string>();
      if (m != "geometric" && m != "linear") throw ConfigError("epsilon.mode must be geometric or linear");
      c.epsilon.mode = m == "geometric" ? EpsilonSchedule::Mode::kGeometric : EpsilonSchedule::Mode::kLinear;
    }
    if (e.contains("unit")) {
      const auto u = e.at("unit").get<std::string>();
      if (u != "transition" && u != "dialogue") throw ConfigError("epsilon.unit must be transition or dialogue");
      c.epsilon.unit = u == "transition" ? EpsilonSchedule::Unit::kTransition : EpsilonSchedule::Unit::kDialogue;
    }
    c.epsilon.start = e.value("start", c.epsilon.start);
    c.epsilon.rate = e.value("rate", c.epsilon.rate);
    c.epsilon.floor = e.value("floor", c.epsilon.floor);
    c.pretrain = j.value("pretrain", c.pretrain);
    c.pretrain_options = PretrainConfigFromJson(Section(j, "pretrain_options"));
    const json& k = Section(j, "corpus");
    c.corpus.path = k.value("path", c.corpus.path);
    c.corpus.size = k.value("size", c.corpus.size);
    c.corpus.seed = k.value("seed", c.corpus.seed);
    c.corpus.filter = k.value("filter", c.corpus.filter);
    c.corpus.schedule = BlunderScheduleFromJson(Section(k, "schedule"));
    c.handcrafted_threshold = j.value("handcrafted_threshold", c.handcrafted_threshold);
    c.seeds = j.value("seeds", c.seeds);
    c.train_dialogues = j.value("train_dialogues", c.train_dialogues);
    c.eval_period = j.value("eval_period", c.eval_period);
    c.eval_dialogues = j.value("eval_dialogues", c.eval_dialogues);
    c.checkpoint_period = j.value("checkpoint_period", c.checkpoint_period);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("configuration type error: ") + ex.what());
  }
  c.q.gamma = c.a2c.gamma = c.gp.gamma = c.env.gamma;
  c.q.excluded = c.a2c.excluded = ExcludedIndices(c);
  c.Validate();
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  return ExperimentConfigFromJson(ReadJsonFile(path));
}

void ApplyOverride(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override path '" + key + "' crosses a non-object");
    node = &(*node)[path[i]];
    if (node->is_null()) *node = json::object();
  }
  (*node)[path.back()] = value;
}

// ---------------------------------------------------------------------------
// Building blocks

World MakeWorld(const EnvConfig& cfg) {
  auto ontology = std::make_shared<const Ontology>(DefaultOntology());
  auto db = std::make_shared<const Database>(GenerateDatabase(*ontology, cfg.db_size, cfg.db_seed));
  return {ontology, db};
}

std::unique_ptr<Agent> MakeAgent(const ExperimentConfig& cfg, const Ontology& ontology, uint64_t seed) {
  Rng init(DeriveSeed(seed, 1));
  const int input = FeatureSize(cfg.env.space);
  const int n = NumActions(cfg.env.space);
  const auto excluded = ExcludedIndices(cfg);
  std::unique_ptr<Agent> agent;
  switch (cfg.algorithm) {
    case Algorithm::kGpSarsa: {
      GpConfig g = cfg.gp;
      g.gamma = cfg.env.gamma;
      agent = std::make_unique<GpSarsaAgent>(n, g);
      break;
    }
    case Algorithm::kDqn:
    case Algorithm::kDdqn: {
      QAgentConfig q = cfg.q;
      q.gamma = cfg.env.gamma;
      q.excluded = excluded;
      q.double_dqn = cfg.algorithm == Algorithm::kDdqn;
      agent = std::make_unique<QAgent>(input, n, q, init);
      break;
    }
    case Algorithm::kDa2c:
    case Algorithm::kTda2c: {
      A2CConfig a = cfg.a2c;
      a.gamma = cfg.env.gamma;
      a.excluded = excluded;
      agent = std::make_unique<ActorCriticAgent>(input, n, a, init, std::string(ToString(cfg.algorithm)));
      break;
    }
  }
  agent->set_layout(FeatureLayout(cfg.env.space, ontology));
  return agent;
}

int GreedyPolicy::Act(const PolicyInput& input, Rng& /*rng*/) { return agent_.GreedyAction(input.features); }

int RandomPolicy::Act(const PolicyInput& input, Rng& rng) { return UniformInt(rng, NumActions(input.space)); }

EvalResult Evaluate(Policy& policy, DialogueEnv& env, int n, uint64_t seed) {
  if (n <= 0) throw ConfigError("evaluation needs at least one dialogue");
  EvalResult out;
  for (int i = 0; i < n; ++i) {
    Rng rng(DeriveSeed(seed, static_cast<uint64_t>(i)));
    const EpisodeLog log = RunEpisode(env, policy, rng);
    out.success += log.success ? 1.0 : 0.0;
    out.mean_return += log.total_return;
    out.mean_length += log.length;
  }
  out.dialogues = n;
  out.success /= n;
  out.mean_return /= n;
  out.mean_length /= n;
  return out;
}

EvalResult Evaluate(const Agent& agent, DialogueEnv& env, int n, uint64_t seed) {
  GreedyPolicy policy(agent);
  return Evaluate(policy, env, n, seed);
}

Corpus PrepareCorpus(const ExperimentConfig& cfg, const World& world) {
  Corpus corpus;
  if (!cfg.corpus.path.empty()) {
    corpus = LoadCorpusFile(cfg.corpus.path);
    if (corpus.space != cfg.env.space) throw ConfigError("corpus action space differs from the experiment");
  } else {
    DialogueEnv env(cfg.env, world.ontology, world.database);
    HandcraftedPolicy policy(cfg.handcrafted_threshold);
    corpus = GenerateCorpus(env, policy, cfg.corpus.size, cfg.corpus.schedule, cfg.corpus.seed);
  }
  return cfg.corpus.filter == "expert" ? FilterExpert(corpus) : corpus;
}

std::vector<std::string> RunPretraining(const ExperimentConfig& cfg, const World& world, Agent& agent, Rng& rng) {
  const std::string mode = cfg.ResolvedPretrain();
  std::vector<std::string> log;
  if (mode == "none") return log;
  const Corpus corpus = PrepareCorpus(cfg, world);
  const auto hist = RatingHistogram(corpus);
  log.push_back("corpus " + cfg.corpus.filter + ": " + std::to_string(corpus.dialogues.size()) +
                " dialogues, ratings 0/1/2/3 = " + std::to_string(hist[0]) + "/" + std::to_string(hist[1]) + "/" +
                std::to_string(hist[2]) + "/" + std::to_string(hist[3]));
  const auto pairs = ToSupervised(corpus, agent.layout());
  const auto transitions = ToTransitions(corpus, agent.layout());
  if (auto* ac = dynamic_cast<ActorCriticAgent*>(&agent)) {
    PretrainConfig pc = cfg.pretrain_options;
    pc.supervised = mode.find("supervised") != std::string::npos;
    pc.batch_rl = mode.find("batch") != std::string::npos;
    const PretrainReport report = ac->Pretrain(pairs, transitions, corpus.layout, pc, rng);
    for (auto& line : report.StageLog()) log.push_back(std::move(line));
  } else if (auto* q = dynamic_cast<QAgent*>(&agent)) {
    if (transitions.empty()) {
      log.push_back("pretrain skipped: empty corpus; agent left unchanged");
      return log;
    }
    for (const auto& t : transitions) q->pool().Store(t);
    const size_t bs = static_cast<size_t>(q->config().batch_size);
    const int64_t steps = static_cast<int64_t>((transitions.size() + bs - 1) / bs) * cfg.pretrain_options.sweeps;
    double loss = 0.0;
    for (int64_t s = 0; s < steps; ++s) {
      if (auto l = q->TrainStep(rng)) loss = *l;
    }
    q->SyncTarget();
    log.push_back("batch value steps " + std::to_string(steps) + " final loss " + std::to_string(loss));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Curves

void WriteCurveRow(std::ostream& out, const CurveRow& r) {
  out << r.dialogues << ',' << std::setprecision(6) << r.success << ',' << r.mean_return << ',' << r.mean_length
      << ',' << std::setprecision(4) << std::fixed << r.seconds << std::defaultfloat << '\n';
}

LearningCurve ReadCurve(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || Trim(line) != kCurveHeader) throw ParseError("curve file lacks the header");
  LearningCurve curve;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw ParseError("curve line " + std::to_string(line_no) + ": expected 5 columns");
    try {
      CurveRow r{std::stoi(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                 std::stod(cells[4])};
      if (!curve.empty() && r.dialogues <= curve.back().dialogues) {
        throw ParseError("curve line " + std::to_string(line_no) + ": rows out of order");
      }
      curve.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("curve line " + std::to_string(line_no) + ": bad number");
    }
  }
  return curve;
}

LearningCurve ReadCurveFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open curve " + path);
  return ReadCurve(in);
}

// ---------------------------------------------------------------------------
// Training

void WriteJsonFile(const std::string& path, const json& j) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp);
    out << j.dump(1) << '\n';
    if (!out) throw Error("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

namespace {

// One training dialogue. Returns the number of transitions.
int64_t TrainDialogue(DialogueEnv& env, Agent& agent, const EpsilonSchedule& schedule, int64_t transitions,
                      int dialogues, Rng& rng) {
  auto eps = [&](int64_t t) {
    return schedule.At(schedule.unit == EpsilonSchedule::Unit::kTransition ? t : dialogues);
  };
  Features features = env.Reset(rng);
  int action = agent.SelectAction(features, eps(transitions), rng);
  int64_t steps = 0;
  while (true) {
    StepResult res = env.Step(action, rng);
    ++steps;
    const int next = res.terminal ? -1 : agent.SelectAction(res.features, eps(transitions + steps), rng);
    Transition t{std::move(features), action, res.reward, res.features, res.terminal};
    agent.Learn(t, next, rng);
    if (res.terminal) break;
    features = std::move(res.features);
    action = next;
  }
  return steps;
}

}  // namespace

TrainResult Train(const ExperimentConfig& cfg, uint64_t seed, const std::string& run_dir,
                  const TrainOptions& options) {
  cfg.Validate();
  const World world = MakeWorld(cfg.env);
  DialogueEnv env(cfg.env, world.ontology, world.database);
  DialogueEnv eval_env(cfg.env, world.ontology, world.database);
  TrainResult result;
  result.agent = MakeAgent(cfg, *world.ontology, seed);
  Agent& agent = *result.agent;
  Rng rng(DeriveSeed(seed, 2));
  const uint64_t eval_seed = DeriveSeed(seed, 3);

  const bool persist = !run_dir.empty();
  const std::string ckpt_path = run_dir + "/checkpoint.json";
  const std::string curve_path = run_dir + "/curve.csv";
  int dialogues = 0;
  double seconds = 0.0;
  int written_until = -1;
  bool resumed = false;

  if (persist) {
    fs::create_directories(run_dir);
    if (options.resume && fs::exists(ckpt_path)) {
      const json ck = ReadJsonFile(ckpt_path);
      if (ck.value("schema", "") != "dialrl.run" || ck.at("seed").get<uint64_t>() != seed) {
        throw ConfigError("checkpoint in " + run_dir + " does not belong to this run");
      }
      agent.Restore(ck.at("agent"));
      rng = DeserializeRng(ck.at("rng").get<std::string>());
      dialogues = ck.at("dialogues").get<int>();
      result.transitions = ck.at("transitions").get<int64_t>();
      seconds = ck.at("seconds").get<double>();
      for (const auto& r : ck.at("curve")) result.curve.push_back(RowFromJson(r));
      result.stage_log = ck.at("stage_log").get<std::vector<std::string>>();
      result.stage_log.push_back("resumed at " + std::to_string(dialogues) + " dialogues");
      resumed = true;
      if (fs::exists(curve_path)) {
        const LearningCurve on_disk = ReadCurveFile(curve_path);
        if (!on_disk.empty()) written_until = on_disk.back().dialogues;
      }
    } else {
      WriteJsonFile(run_dir + "/config.json", ToJson(cfg));
      std::ofstream(curve_path, std::ios::trunc) << kCurveHeader << '\n';
    }
  }

  std::ofstream curve_out;
  if (persist) curve_out.open(curve_path, std::ios::app);
  auto emit = [&](const CurveRow& row) {
    if (persist && row.dialogues > written_until) {
      WriteCurveRow(curve_out, row);
      curve_out.flush();
      written_until = row.dialogues;
    }
    if (options.log) {
      std::ostringstream line;
      line << cfg.name << " seed " << seed << " dialogues " << row.dialogues << " success " << row.success
           << " return " << row.mean_return;
      options.log(line.str());
    }
  };
  auto evaluate = [&]() {
    const EvalResult e = Evaluate(agent, eval_env, cfg.eval_dialogues, eval_seed);
    CurveRow row{dialogues, e.success, e.mean_return, e.mean_length, seconds};
    result.curve.push_back(row);
    return row;
  };
  auto checkpoint = [&]() {
    if (!persist) return;
    json rows = json::array();
    for (const auto& r : result.curve) rows.push_back(RowJson(r));
    WriteJsonFile(ckpt_path, {{"schema", "dialrl.run"},
                              {"version", 1},
                              {"seed", seed},
                              {"dialogues", dialogues},
                              {"transitions", result.transitions},
                              {"seconds", seconds},
                              {"rng", SerializeRng(rng)},
                              {"curve", rows},
                              {"stage_log", result.stage_log},
                              {"agent", agent.Checkpoint()}});
  };
  auto write_stages = [&]() {
    if (!persist) return;
    std::ofstream out(run_dir + "/stages.log", std::ios::trunc);
    for (const auto& line : result.stage_log) out << line << '\n';
  };

  if (resumed) {
    for (const auto& row : result.curve) emit(row);
  } else {
    const auto t0 = std::chrono::steady_clock::now();
    for (auto& line : RunPretraining(cfg, world, agent, rng)) result.stage_log.push_back(std::move(line));
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    emit(evaluate());
    checkpoint();
  }
  write_stages();

  const int start = dialogues;
  const auto* gp_agent = dynamic_cast<const GpSarsaAgent*>(&agent);
  bool alarmed = false;
  while (dialogues < cfg.train_dialogues) {
    const auto t0 = std::chrono::steady_clock::now();
    result.transitions += TrainDialogue(env, agent, cfg.epsilon, result.transitions, dialogues, rng);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++dialogues;
    if (gp_agent && !alarmed && gp_agent->gp().size() > cfg.gp.dictionary_alarm) {
      result.stage_log.push_back("warning: GP dictionary exceeded " + std::to_string(cfg.gp.dictionary_alarm) +
                                 " points at dialogue " + std::to_string(dialogues));
      alarmed = true;
    }
    const bool last = dialogues == cfg.train_dialogues;
    if (dialogues % cfg.eval_period == 0 || last) emit(evaluate());
    if (dialogues % cfg.checkpoint_period == 0 || last) checkpoint();
  }
  if (dialogues > start) {
    result.stage_log.push_back("online dialogues " + std::to_string(start) + ".." + std::to_string(dialogues) +
                               ", transitions " + std::to_string(result.transitions));
  }
  if (gp_agent) result.stage_log.push_back("GP dictionary size " + std::to_string(gp_agent->gp().size()));
  write_stages();
  return result;
}

void TrainAllSeeds(const ExperimentConfig& cfg, const TrainOptions& options) {
  if (cfg.output_dir.empty()) throw ConfigError("output_dir is required to train every seed");
  fs::create_directories(cfg.output_dir);
  WriteJsonFile(cfg.output_dir + "/config.json", ToJson(cfg));
  for (uint64_t s : cfg.seeds) Train(cfg, s, cfg.output_dir + "/seed_" + std::to_string(s), options);
}

// ---------------------------------------------------------------------------
// Comparison

double DialoguesToThreshold(const LearningCurve& curve, double threshold) {
  for (const auto& r : curve) {
    if (r.success >= threshold) return r.dialogues;
  }
  return kNever;
}

double Median(std::vector<double> v) {
  if (v.empty()) return kNever;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  const double a = v[n / 2 - 1], b = v[n / 2];
  if (std::isinf(a) || std::isinf(b)) return std::isinf(a) ? a : b;
  return 0.5 * (a + b);
}

LearningCurve MeanCurve(const RunCurves& run) {
  if (run.seeds.empty()) throw ConfigError(run.name + ": no curves");
  const size_t rows = run.seeds.front().size();
  if (rows == 0) throw ConfigError(run.name + ": curve has no eval rows");
  LearningCurve mean(rows);
  for (const auto& c : run.seeds) {
    if (c.size() != rows) throw ConfigError(run.name + ": seeds have different numbers of eval rows");
    for (size_t i = 0; i < rows; ++i) {
      if (c[i].dialogues != run.seeds.front()[i].dialogues) {
        throw ConfigError(run.name + ": seeds disagree on eval points");
      }
      mean[i].dialogues = c[i].dialogues;
      mean[i].success += c[i].success / run.seeds.size();
      mean[i].mean_return += c[i].mean_return / run.seeds.size();
      mean[i].mean_length += c[i].mean_length / run.seeds.size();
      mean[i].seconds += c[i].seconds / run.seeds.size();
    }
  }
  return mean;
}

const RunSummary& CompareReport::Find(const std::string& name) const {
  for (const auto& r : runs) {
    if (r.name == name) return r;
  }
  throw ConfigError("no run named '" + name + "' in the comparison");
}

std::string CompareReport::ToText() const {
  std::ostringstream out;
  out << "threshold " << std::setprecision(4) << threshold << '\n';
  out << std::left << std::setw(24) << "run" << std::setw(10) << "median" << std::setw(10) << "min"
      << std::setw(10) << "max" << std::setw(10) << "initial" << std::setw(10) << "final" << "seconds\n";
  std::vector<const RunSummary*> order;
  for (const auto& r : runs) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->median < b->median; });
  auto num = [](double v) {
    std::ostringstream s;
    if (std::isinf(v)) s << "inf"; else s << v;
    return s.str();
  };
  for (const auto* r : order) {
    out << std::setw(24) << r->name << std::setw(10) << num(r->median) << std::setw(10) << num(r->min)
        << std::setw(10) << num(r->max) << std::setw(10) << r->initial_success << std::setw(10) << r->final_success
        << r->final_seconds << '\n';
  }
  out << "order:";
  for (const auto* r : order) out << ' ' << r->name;
  out << '\n';
  return out.str();
}

CompareReport Compare(const std::vector<RunCurves>& runs, double frac, int min_seeds) {
  if (runs.size() < 2) throw ConfigError("compare needs at least two runs");
  if (!(frac > 0.0 && frac <= 1.0)) throw ConfigError("threshold fraction outside (0,1]");
  CompareReport report;
  std::vector<LearningCurve> means;
  double best = 0.0;
  for (const auto& run : runs) {
    if (static_cast<int>(run.seeds.size()) < min_seeds) {
      throw ConfigError(run.name + ": needs at least " + std::to_string(min_seeds) + " seeds");
    }
    means.push_back(MeanCurve(run));
    for (const auto& r : means.back()) best = std::max(best, r.success);
  }
  report.threshold = frac * best;
  for (size_t i = 0; i < runs.size(); ++i) {
    RunSummary s;
    s.name = runs[i].name;
    for (const auto& c : runs[i].seeds) s.to_threshold.push_back(DialoguesToThreshold(c, report.threshold));
    s.median = Median(s.to_threshold);
    s.min = *std::min_element(s.to_threshold.begin(), s.to_threshold.end());
    s.max = *std::max_element(s.to_threshold.begin(), s.to_threshold.end());
    s.initial_success = means[i].front().success;
    s.final_success = means[i].back().success;
    s.final_seconds = means[i].back().seconds;
    report.runs.push_back(std::move(s));
  }
  return report;
}

RunCurves LoadRunCurves(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("run directory " + dir + " does not exist");
  RunCurves run;
  run.name = fs::path(dir).filename().string();
  if (run.name.empty()) run.name = fs::path(dir).parent_path().filename().string();
  std::vector<fs::path> seeds;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0 &&
        fs::exists(entry.path() / "curve.csv")) {
      seeds.push_back(entry.path());
    }
  }
  std::sort(seeds.begin(), seeds.end());
  for (const auto& p : seeds) run.seeds.push_back(ReadCurveFile((p / "curve.csv").string()));
  return run;
}

void WritePlotData(const std::vector<RunCurves>& runs, std::ostream& out) {
  if (runs.empty()) throw ConfigError("plot-data needs at least one run");
  std::map<int, std::map<size_t, std::array<double, 3>>> table;
  out << "dialogues";
  for (size_t i = 0; i < runs.size(); ++i) {
    out << ',' << runs[i].name << "_mean," << runs[i].name << "_min," << runs[i].name << "_max";
    const LearningCurve mean = MeanCurve(runs[i]);
    for (size_t r = 0; r < mean.size(); ++r) {
      double lo = 1.0, hi = 0.0;
      for (const auto& c : runs[i].seeds) {
        lo = std::min(lo, c[r].success);
        hi = std::max(hi, c[r].success);
      }
      table[mean[r].dialogues][i] = {mean[r].success, lo, hi};
    }
  }
  out << '\n';
  for (const auto& [d, cols] : table) {
    out << d;
    for (size_t i = 0; i < runs.size(); ++i) {
      auto it = cols.find(i);
      if (it == cols.end()) {
        out << ",,,";
      } else {
        out << ',' << it->second[0] << ',' << it->second[1] << ',' << it->second[2];
      }
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Interactive session

ChatResult RunChat(const ExperimentConfig& cfg, const World& world, const Agent& agent,
                   const std::optional<UserGoal>& goal, std::istream& in, std::ostream& out, uint64_t seed) {
  const Ontology& ontology = *world.ontology;
  Rng rng(seed);
  BeliefState belief = FreshBelief(ontology);
  UserState user;
  if (goal) {
    ValidateGoal(ontology, *goal);
    user.goal = *goal;
  }
  ChatResult result;
  out << "Type user acts such as inform(food=italian) or request(phone); separate several with ';'.\n"
      << "An empty line is null(). bye ends the session.\n";
  while (result.turns < cfg.env.max_turns) {
    const Features features = ExtractFeatures(cfg.env.space, belief);
    const int action = agent.GreedyAction(features);
    const SystemAct sys =
        cfg.env.space == ActionSpace::kSummary
            ? RealizeSummaryAct(static_cast<SystemActType>(action), belief, ontology, *world.database, cfg.env)
            : RealizeOriginalAct(action, belief, ontology, *world.database, cfg.env);
    out << "system: " << sys.ToString() << '\n';
    if (goal) NoteSystemAct(user, sys);

    std::vector<UserAct> acts;
    bool have_input = false;
    std::string line;
    while (!have_input) {
      out << "user> " << std::flush;
      if (!std::getline(in, line)) {
        if (goal) result.success = IsSatisfied(user);
        return result;
      }
      acts.clear();
      try {
        std::stringstream ss(line);
        std::string piece;
        while (std::getline(ss, piece, ';')) {
          piece = Trim(piece);
          if (!piece.empty()) acts.push_back(ParseUserAct(piece));
        }
        if (acts.empty()) acts.push_back(UserAct::Make(UserActType::kNull));
        for (const auto& a : acts) {
          if (a.slot && a.type == UserActType::kRequest && !ontology.IsRequestSlot(*a.slot)) {
            throw ParseError("unknown request slot " + *a.slot);
          }
          if (a.slot && (a.type == UserActType::kInform || a.type == UserActType::kConfirm) &&
              ontology.ValueIndex(*a.slot, *a.value) < 0) {
            throw ParseError("unknown value " + *a.value + " for slot " + *a.slot);
          }
        }
        have_input = true;
      } catch (const Error& e) {
        out << "could not parse '" << line << "': " << e.what() << '\n'
            << "acts: inform(slot=value) request(slot) confirm(slot=value) affirm negate bye null ...\n";
      }
    }
    const TurnObservation obs = Corrupt(acts, cfg.env.error, ontology, rng);
    belief = UpdateBelief(belief, obs, 0, ontology, &sys);
    belief.db_count = MatchCount(belief, ontology, *world.database);
    ++result.turns;
    out << DescribeBelief(belief, ontology) << '\n';
    const bool bye = std::any_of(acts.begin(), acts.end(), [](const UserAct& a) { return a.type == UserActType::kBye; });
    if (bye) {
      result.said_bye = true;
      break;
    }
  }
  if (goal) {
    result.success = IsSatisfied(user);
    out << "verdict: " << (*result.success ? "success" : "failure") << '\n';
  }
  return result;
}

}  // namespace dialrl
