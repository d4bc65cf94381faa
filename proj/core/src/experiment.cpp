#include "paco/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace paco {

using nlohmann::json;

namespace {

json toy_to_json(const ToyConfig& toy) {
  return json{{"k_id", toy.k_id},   {"k_st", toy.k_st},   {"k_ct", toy.k_ct},
              {"tau_c", toy.tau_c}, {"tau_a", toy.tau_a}};
}

ToyConfig toy_from_json(const json& j) {
  ToyConfig toy;
  toy.k_id = j.value("k_id", toy.k_id);
  toy.k_st = j.value("k_st", toy.k_st);
  toy.k_ct = j.value("k_ct", toy.k_ct);
  toy.tau_c = j.value("tau_c", toy.tau_c);
  toy.tau_a = j.value("tau_a", toy.tau_a);
  return toy;
}

}  // namespace

std::string config_to_json_string(const ExperimentConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  j["seed"] = cfg.seed;
  // out_dir is a runtime concern; keeping it out of the serialized form
  // makes run-dir config copies identical across output locations
  j["toyworld"] = toy_to_json(cfg.toy);
  j["dataset"] = {{"prompts", cfg.dataset.prompts},
                  {"grids_per_prompt", cfg.dataset.grids_per_prompt},
                  {"rows", cfg.dataset.rows},
                  {"cols", cfg.dataset.cols},
                  {"noise_scale", cfg.dataset.noise_scale},
                  {"identity_jitter", cfg.dataset.identity_jitter},
                  {"holdout", cfg.dataset.holdout},
                  {"resolution", cfg.dataset.resolution},
                  {"pair_policy", cfg.dataset.pair_policy}};
  j["scorer"] = {{"hidden", cfg.scorer.hidden}, {"alpha", cfg.scorer.alpha},
                 {"lr", cfg.scorer.lr},         {"epochs", cfg.scorer.epochs},
                 {"batch", cfg.scorer.batch},   {"fast", cfg.scorer.fast}};
  j["grpo"] = {{"group_size", cfg.grpo.group_size},
               {"conditions_per_epoch", cfg.grpo.conditions_per_epoch},
               {"clip_eps", cfg.grpo.clip_eps},
               {"kl_beta", cfg.grpo.kl_beta},
               {"noise_a", cfg.grpo.noise_a},
               {"sde_indices", cfg.grpo.sde_indices},
               {"timesteps", cfg.grpo.timesteps},
               {"d_train", cfg.grpo.d_train},
               {"d_eval", cfg.grpo.d_eval},
               {"delta_mode", cfg.grpo.delta_mode},
               {"delta", cfg.grpo.delta},
               {"taming_enabled", cfg.grpo.taming_enabled},
               {"lr", cfg.grpo.lr},
               {"epochs", cfg.grpo.epochs}};
  auto& channels = j["channels"] = json::array();
  for (const auto& ch : cfg.channels)
    channels.push_back(
        {{"name", ch.name},
         {"weight", ch.weight},
         {"gamma", ch.gamma},
         {"scale", ch.scale}});
  j["eval_prompts"] = cfg.eval_prompts;
  j["fm_pretrain_steps"] = cfg.fm_pretrain_steps;
  j["fm_pretrain_batch"] = cfg.fm_pretrain_batch;
  j["fm_pretrain_lr"] = cfg.fm_pretrain_lr;
  j["timing"] = cfg.timing;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json_string(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("config: malformed JSON");
  ExperimentConfig cfg;
  cfg.version = j.value("version", 1);
  if (cfg.version != 1)
    throw DataError("config: unsupported version " +
                    std::to_string(cfg.version));
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("toyworld")) cfg.toy = toy_from_json(j["toyworld"]);
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    cfg.dataset.prompts = d.value("prompts", cfg.dataset.prompts);
    cfg.dataset.grids_per_prompt =
        d.value("grids_per_prompt", cfg.dataset.grids_per_prompt);
    cfg.dataset.rows = d.value("rows", cfg.dataset.rows);
    cfg.dataset.cols = d.value("cols", cfg.dataset.cols);
    cfg.dataset.noise_scale = d.value("noise_scale", cfg.dataset.noise_scale);
    cfg.dataset.identity_jitter =
        d.value("identity_jitter", cfg.dataset.identity_jitter);
    cfg.dataset.holdout = d.value("holdout", cfg.dataset.holdout);
    cfg.dataset.resolution = d.value("resolution", cfg.dataset.resolution);
    cfg.dataset.pair_policy = d.value("pair_policy", cfg.dataset.pair_policy);
  }
  if (j.contains("scorer")) {
    const auto& s = j["scorer"];
    cfg.scorer.hidden = s.value("hidden", cfg.scorer.hidden);
    cfg.scorer.alpha = s.value("alpha", cfg.scorer.alpha);
    cfg.scorer.lr = s.value("lr", cfg.scorer.lr);
    cfg.scorer.epochs = s.value("epochs", cfg.scorer.epochs);
    cfg.scorer.batch = s.value("batch", cfg.scorer.batch);
    cfg.scorer.fast = s.value("fast", cfg.scorer.fast);
  }
  if (j.contains("grpo")) {
    const auto& g = j["grpo"];
    cfg.grpo.group_size = g.value("group_size", cfg.grpo.group_size);
    cfg.grpo.conditions_per_epoch =
        g.value("conditions_per_epoch", cfg.grpo.conditions_per_epoch);
    cfg.grpo.clip_eps = g.value("clip_eps", cfg.grpo.clip_eps);
    cfg.grpo.kl_beta = g.value("kl_beta", cfg.grpo.kl_beta);
    cfg.grpo.noise_a = g.value("noise_a", cfg.grpo.noise_a);
    if (g.contains("sde_indices"))
      cfg.grpo.sde_indices = g["sde_indices"].get<std::vector<int>>();
    cfg.grpo.timesteps = g.value("timesteps", cfg.grpo.timesteps);
    cfg.grpo.d_train = g.value("d_train", cfg.grpo.d_train);
    cfg.grpo.d_eval = g.value("d_eval", cfg.grpo.d_eval);
    cfg.grpo.delta_mode = g.value("delta_mode", cfg.grpo.delta_mode);
    cfg.grpo.delta = g.value("delta", cfg.grpo.delta);
    cfg.grpo.taming_enabled =
        g.value("taming_enabled", cfg.grpo.taming_enabled);
    cfg.grpo.lr = g.value("lr", cfg.grpo.lr);
    cfg.grpo.epochs = g.value("epochs", cfg.grpo.epochs);
  }
  if (j.contains("channels")) {
    cfg.channels.clear();
    for (const auto& c : j["channels"])
      cfg.channels.push_back(ChannelSpec{c.at("name").get<std::string>(),
                                         c.value("weight", 1.0),
                                         c.value("gamma", 1.0),
                                         c.value("scale", 1.0)});
  }
  cfg.eval_prompts = j.value("eval_prompts", cfg.eval_prompts);
  cfg.fm_pretrain_steps = j.value("fm_pretrain_steps", cfg.fm_pretrain_steps);
  cfg.fm_pretrain_batch = j.value("fm_pretrain_batch", cfg.fm_pretrain_batch);
  cfg.fm_pretrain_lr = j.value("fm_pretrain_lr", cfg.fm_pretrain_lr);
  cfg.timing = j.value("timing", cfg.timing);
  cfg.scorer.toy = cfg.toy;
  return cfg;
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return config_from_json_string(text);
}

void config_to_json_file(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("config: cannot open " + path + " for writing");
  os << config_to_json_string(cfg);
}

// ---- dataset pipeline ----

BuiltDataset build_dataset(const ExperimentConfig& cfg) {
  BuiltDataset data;
  RngStream root(cfg.seed, 1);
  int contents = cfg.dataset.rows * cfg.dataset.cols;
  RngStream prompt_stream = root.split(10);
  for (int p = 0; p < cfg.dataset.prompts; ++p) {
    RngStream s = prompt_stream.split(static_cast<std::uint64_t>(p));
    data.prompts.push_back(random_prompt(s, contents, cfg.toy));
  }
  RngStream grid_stream = root.split(20);
  data.grids = build_grids(data.prompts, cfg.dataset, grid_stream, cfg.toy);
  data.instances = subfigure_pairing(data.grids);
  for (auto& inst : data.instances) oracle_annotate(inst, cfg.toy);
  RngStream split_stream = root.split(30);
  data.split =
      split_benchmark(data.instances, cfg.dataset.holdout, split_stream);
  for (int id : data.split.train_ids) {
    auto pairs =
        ranking_to_pairs(data.instances[id], cfg.dataset.pair_policy, cfg.toy);
    data.train_pairs.insert(data.train_pairs.end(), pairs.begin(), pairs.end());
  }
  return data;
}

void write_dataset(const BuiltDataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_prompts_jsonl(dir + "/prompts.jsonl", data.prompts);
  write_grids_jsonl(dir + "/grids.jsonl", data.grids);
  write_instances_jsonl(dir + "/instances.jsonl", data.instances);
  write_pairs_jsonl(dir + "/pairs.jsonl", data.train_pairs);
  write_split_json(dir + "/split.json", data.split);
}

BuiltDataset load_dataset(const std::string& dir) {
  BuiltDataset data;
  data.prompts = read_prompts_jsonl(dir + "/prompts.jsonl");
  data.grids = read_grids_jsonl(dir + "/grids.jsonl");
  data.instances = read_instances_jsonl(dir + "/instances.jsonl", data.grids);
  data.train_pairs = read_pairs_jsonl(dir + "/pairs.jsonl", data.grids);
  data.split = read_split_json(dir + "/split.json");
  return data;
}

std::vector<const RankingInstance*> select_instances(
    const BuiltDataset& data, std::span<const int> ids) {
  std::vector<const RankingInstance*> out;
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(data.instances.size()))
      throw DataError("select_instances: id out of range");
    out.push_back(&data.instances[id]);
  }
  return out;
}

// ---- reward-model evaluation ----

std::vector<int> rank_by_score(const RankingInstance& instance,
                               const ScoreFn& fn) {
  std::vector<double> scores;
  for (const auto& cand : instance.cand_signals)
    scores.push_back(fn(instance.ref_signal, cand));
  std::vector<int> order(instance.cand_signals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

MetricRow evaluate_scorer(const std::string& method,
                          std::span<const RankingInstance* const> benchmark,
                          const ScoreFn& fn) {
  std::vector<RankingPairSample> samples;
  std::size_t pair_hits = 0, pair_total = 0;
  for (const RankingInstance* inst : benchmark) {
    if (!inst->annotation)
      throw DataError("evaluate_scorer: unannotated benchmark instance " +
                      std::to_string(inst->id));
    RankingPairSample sample;
    sample.predicted = rank_by_score(*inst, fn);
    sample.annotated = *inst->annotation;
    // extremes-derived pairwise decision: best vs worst annotated candidate
    int top = sample.annotated.front(), bottom = sample.annotated.back();
    double s_top = fn(inst->ref_signal, inst->cand_signals[top]);
    double s_bot = fn(inst->ref_signal, inst->cand_signals[bottom]);
    if (s_top > s_bot) ++pair_hits;
    ++pair_total;
    samples.push_back(std::move(sample));
  }
  double pairwise =
      pair_total ? static_cast<double>(pair_hits) / pair_total : 0.0;
  return summarize(method, samples, pairwise);
}

ScoreFn oracle_score_fn(const ToyConfig& toy) {
  return [toy](const Signal& a, const Signal& b) {
    return true_consistency(a, b, toy);
  };
}

ScoreFn random_score_fn(std::uint64_t seed) {
  return [seed](const Signal& a, const Signal& b) {
    std::uint64_t h = RngStream::mix(seed ^ 0x7a3c9e1fULL);
    auto fold = [&h](const Signal& s) {
      for (double v : s.samples) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        h = RngStream::mix(h ^ bits);
      }
    };
    fold(a);
    fold(b);
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
  };
}

ScoreFn cosine_score_fn() {
  return [](const Signal& a, const Signal& b) {
    if (a.resolution != b.resolution)
      throw DataError("cosine_score_fn: resolution mismatch");
    double ab = 0, aa = 0, bb = 0;
    for (int j = 0; j < a.resolution; ++j) {
      ab += a.samples[j] * b.samples[j];
      aa += a.samples[j] * a.samples[j];
      bb += b.samples[j] * b.samples[j];
    }
    double denom = std::sqrt(aa * bb);
    return denom == 0.0 ? 0.0 : ab / denom;
  };
}

double scorer_decision_accuracy(const PairScorer& scorer,
                                std::span<const LabeledPair> pairs) {
  if (pairs.empty()) throw DataError("scorer_decision_accuracy: no pairs");
  return decision_accuracy(scorer, pairs);
}

// ---- policy / RL ----

std::vector<Condition> make_conditions(std::span<const PromptSpec> prompts,
                                       int contents_per_prompt) {
  std::vector<Condition> conditions;
  for (const auto& prompt : prompts)
    for (int c = 0; c < contents_per_prompt; ++c)
      conditions.push_back(Condition{prompt, c});
  return conditions;
}

FlowModel pretrain_policy(const ExperimentConfig& cfg, RngStream stream) {
  RngStream init_stream = stream.split(1);
  FlowConfig flow_cfg;
  flow_cfg.toy = cfg.toy;
  FlowModel model = init_flow_model(init_stream, flow_cfg);
  AdamState adam = AdamState::init(model.params);

  RngStream data_stream = stream.split(2);
  constexpr int kTrainPrompts = 16;
  std::vector<PromptSpec> prompts;
  for (int p = 0; p < kTrainPrompts; ++p) {
    RngStream s = data_stream.split(static_cast<std::uint64_t>(p));
    prompts.push_back(random_prompt(s, 4, cfg.toy));
  }

  RngStream train_stream = stream.split(3);
  for (int step = 0; step < cfg.fm_pretrain_steps; ++step) {
    std::vector<std::pair<Signal, Condition>> batch;
    for (int b = 0; b < cfg.fm_pretrain_batch; ++b) {
      int p = static_cast<int>(train_stream.next_u64() % kTrainPrompts);
      int c = static_cast<int>(train_stream.next_u64() % 4);
      Signal x = render(prompts[p], c, 0.02, train_stream, cfg.grpo.d_train,
                        cfg.toy);
      batch.emplace_back(std::move(x), Condition{prompts[p], c});
    }
    fm_train_step(model, adam, batch, cfg.fm_pretrain_lr, train_stream);
  }
  return model;
}

std::vector<RewardChannel> make_channels(const ExperimentConfig& cfg,
                                         const PairScorer* scorer) {
  std::vector<RewardChannel> channels;
  for (const auto& spec : cfg.channels) {
    RewardChannel ch;
    ch.name = spec.name;
    ch.weight = spec.weight;
    double gamma = spec.gamma;
    double scale = spec.scale;
    ToyConfig toy = cfg.toy;
    if (spec.name == "consistency") {
      if (scorer) {
        PairScorer local = *scorer;
        ch.fn = [local, toy, gamma, scale](const Signal& x,
                                           const Condition& cond) {
          RngStream unused(0, 0);
          Signal ref = render(cond.prompt, 0, 0.0, unused, x.resolution, toy);
          return scale * std::pow(score(local, ref, x), gamma);
        };
      } else {
        ch.fn = [toy, gamma, scale](const Signal& x, const Condition& cond) {
          RngStream unused(0, 0);
          Signal ref = render(cond.prompt, 0, 0.0, unused, x.resolution, toy);
          return scale * std::pow(true_consistency(ref, x, toy), gamma);
        };
      }
    } else if (spec.name == "alignment") {
      ch.fn = [toy, gamma, scale](const Signal& x, const Condition& cond) {
        return scale * std::pow(
            alignment_reward(x, cond.prompt, cond.content_index, toy), gamma);
      };
    } else {
      throw DataError("make_channels: unknown channel '" + spec.name + "'");
    }
    channels.push_back(std::move(ch));
  }
  return channels;
}

EvalResult evaluate_policy(const FlowModel& model,
                           std::span<const PromptSpec> prompts,
                           const ExperimentConfig& cfg) {
  EvalResult result;
  double cons_sum = 0, align_sum = 0;
  std::size_t align_n = 0;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    std::vector<Signal> set;
    for (int c = 0; c < 4; ++c) {
      RngStream stream(cfg.seed,
                       RngStream::mix(0xe7a1 ^ (p * 64 + static_cast<std::size_t>(c))));
      Trajectory traj = sample_trajectory(model, Condition{prompts[p], c},
                                          cfg.grpo.d_eval, cfg.grpo.timesteps,
                                          {}, 0.0, stream);
      set.push_back(traj.latents.back());
      align_sum += alignment_reward(set.back(), prompts[p], c, cfg.toy);
      ++align_n;
    }
    cons_sum += consistency_reward_set(set, cfg.toy);
  }
  result.set_consistency = cons_sum / static_cast<double>(prompts.size());
  result.alignment = align_sum / static_cast<double>(align_n);
  double w_cons = 1.0, w_align = 1.0;
  for (const auto& spec : cfg.channels) {
    if (spec.name == "consistency") w_cons = spec.weight;
    if (spec.name == "alignment") w_align = spec.weight;
  }
  result.aggregated =
      w_cons * result.set_consistency + w_align * result.alignment;
  return result;
}

GrpoRunResult run_grpo(FlowModel& model, const ExperimentConfig& cfg,
                       const PairScorer* scorer, RngStream stream) {
  GrpoRunResult result;
  auto channels = make_channels(cfg, scorer);

  RngStream cond_stream = stream.split(100);
  int n_prompts = (cfg.grpo.conditions_per_epoch + 3) / 4;
  std::vector<PromptSpec> rl_prompts;
  for (int p = 0; p < n_prompts; ++p) {
    RngStream s = cond_stream.split(static_cast<std::uint64_t>(p));
    rl_prompts.push_back(random_prompt(s, 4, cfg.toy));
  }
  auto all_conditions = make_conditions(rl_prompts, 4);
  all_conditions.resize(cfg.grpo.conditions_per_epoch);

  RngStream eval_prompt_stream = stream.split(200);
  std::vector<PromptSpec> eval_prompts;
  for (int p = 0; p < cfg.eval_prompts; ++p) {
    RngStream s = eval_prompt_stream.split(static_cast<std::uint64_t>(p));
    eval_prompts.push_back(random_prompt(s, 4, cfg.toy));
  }

  result.pre_eval = evaluate_policy(model, eval_prompts, cfg);
  ParamSet ref_params = model.params;
  AdamState adam = AdamState::init(model.params);
  for (int epoch = 0; epoch < cfg.grpo.epochs; ++epoch) {
    EpochReport report =
        grpo_epoch(model, adam, all_conditions, channels, cfg.grpo, ref_params,
                   stream.split(1000 + static_cast<std::uint64_t>(epoch)), epoch);
    if (!cfg.timing) report.seconds = 0.0;
    if (report.channel_mean.size() == 2)
      report.dominance = result.epochs.empty()
                             ? 0.0
                             : dominance_ratio(report, result.epochs.front());
    result.epochs.push_back(std::move(report));
  }
  result.post_eval = evaluate_policy(model, eval_prompts, cfg);
  return result;
}

// ---- ablations ----

LogTameAblation run_logtame_ablation(const ExperimentConfig& cfg,
                                     std::uint64_t seed) {
  LogTameAblation result;
  ExperimentConfig base = cfg;
  base.seed = seed;
  RngStream pre_stream(seed, 7);
  FlowModel initial = pretrain_policy(base, pre_stream);
  for (bool tamed : {false, true}) {
    ExperimentConfig run_cfg = base;
    run_cfg.grpo.taming_enabled = tamed;
    FlowModel model = initial;  // shared initial checkpoint
    GrpoRunResult run = run_grpo(model, run_cfg, nullptr, RngStream(seed, 8));
    std::string series = tamed ? "tamed" : "naive";
    for (const auto& ep : run.epochs)
      result.curve.push_back(
          CurvePoint{ep.epoch, series, ep.dominance, ep.points_processed});
    double final_dom = run.epochs.back().dominance;
    (tamed ? result.final_tamed : result.final_naive) = final_dom;
  }
  return result;
}

ResolutionAblation run_resolution_ablation(const ExperimentConfig& cfg,
                                           std::span<const int> resolutions) {
  ResolutionAblation result;
  RngStream pre_stream(cfg.seed, 7);
  FlowModel initial = pretrain_policy(cfg, pre_stream);

  RngStream eval_prompt_stream = RngStream(cfg.seed, 8).split(200);
  std::vector<PromptSpec> eval_prompts;
  for (int p = 0; p < cfg.eval_prompts; ++p) {
    RngStream s = eval_prompt_stream.split(static_cast<std::uint64_t>(p));
    eval_prompts.push_back(random_prompt(s, 4, cfg.toy));
  }

  for (int d_train : resolutions) {
    ResolutionRun run;
    run.d_train = d_train;
    ExperimentConfig run_cfg = cfg;
    run_cfg.grpo.d_train = d_train;
    run.points_per_epoch = static_cast<long long>(run_cfg.grpo.group_size) *
                           run_cfg.grpo.conditions_per_epoch *
                           run_cfg.grpo.timesteps * d_train;
    FlowModel model = initial;
    try {
      auto channels = make_channels(run_cfg, nullptr);
      RngStream run_stream(cfg.seed, 8);
      RngStream cond_stream = run_stream.split(100);
      int n_prompts = (run_cfg.grpo.conditions_per_epoch + 3) / 4;
      std::vector<PromptSpec> rl_prompts;
      for (int p = 0; p < n_prompts; ++p) {
        RngStream s = cond_stream.split(static_cast<std::uint64_t>(p));
        rl_prompts.push_back(random_prompt(s, 4, cfg.toy));
      }
      auto conditions = make_conditions(rl_prompts, 4);
      conditions.resize(run_cfg.grpo.conditions_per_epoch);
      ParamSet ref_params = model.params;
      AdamState adam = AdamState::init(model.params);
      std::string series = "d_train=" + std::to_string(d_train);
      for (int epoch = 0; epoch < run_cfg.grpo.epochs; ++epoch) {
        grpo_epoch(model, adam, conditions, channels, run_cfg.grpo, ref_params,
                   run_stream.split(1000 + static_cast<std::uint64_t>(epoch)),
                   epoch);
        EvalResult ev = evaluate_policy(model, eval_prompts, run_cfg);
        run.curve.push_back(
            CurvePoint{epoch, series, ev.aggregated, run.points_per_epoch});
      }
      run.final_reward = run.curve.back().value;
    } catch (const DataError& e) {
      run.precondition_failed = true;
      run.failure = e.what();
    }
    result.runs.push_back(std::move(run));
  }
  return result;
}

// ---- reports / serialization ----

std::string epoch_csv_header(std::span<const std::string> channel_names) {
  std::string h = "epoch";
  for (const auto& name : channel_names)
    h += "," + name + "_mean," + name + "_std," + name + "_cv," + name +
         "_tamed";
  h += ",rhat_mean,jclip,kl,dominance,points,seconds";
  return h;
}

std::string epoch_csv_row(const EpochReport& report, bool timing) {
  char buf[128];
  std::string row = std::to_string(report.epoch);
  for (std::size_t k = 0; k < report.channel_mean.size(); ++k) {
    std::snprintf(buf, sizeof(buf), ",%.9f,%.9f,%.9f,%d",
                  report.channel_mean[k], report.channel_std[k], report.cv[k],
                  report.tamed_flags[k] ? 1 : 0);
    row += buf;
  }
  std::snprintf(buf, sizeof(buf), ",%.9f,%.9f,%.9f,%.9f,%lld,%.3f",
                report.rhat_mean, report.jclip, report.kl, report.dominance,
                report.points_processed, timing ? report.seconds : 0.0);
  row += buf;
  return row;
}

void write_epoch_csv(const std::string& path,
                     std::span<const EpochReport> epochs, bool timing) {
  std::ofstream os(path);
  if (!os) throw DataError("write_epoch_csv: cannot open " + path);
  if (epochs.empty()) return;
  os << epoch_csv_header(epochs.front().channel_names) << "\n";
  for (const auto& ep : epochs) os << epoch_csv_row(ep, timing) << "\n";
}

void write_curve_csv(const std::string& path,
                     std::span<const CurvePoint> points) {
  std::ofstream os(path);
  if (!os) throw DataError("write_curve_csv: cannot open " + path);
  os << "epoch,series,value,cost_points\n";
  for (const auto& pt : points) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.9f,%lld\n", pt.epoch,
                  pt.series.c_str(), pt.value, pt.cost_points);
    os << buf;
  }
}

void dump_trajectory_jsonl(const std::string& path, const FlowModel& model,
                           const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw DataError("dump_trajectory_jsonl: cannot open " + path);
  std::size_t sde_pos = 0;
  for (std::size_t k = 0; k + 1 < traj.latents.size(); ++k) {
    double t = traj.times[k];
    double dt = traj.times[k + 1] - traj.times[k];
    Signal v = velocity(model, traj.latents[k], t, traj.condition);
    bool stochastic = sde_pos < traj.sde_steps.size() &&
                      traj.sde_steps[sde_pos] == static_cast<int>(k);
    double sigma = stochastic ? noise_scale(t, traj.noise_a) : 0.0;
    double std_dev = sigma * std::sqrt(std::fabs(dt));
    std::vector<double> mean(traj.latents[k].samples.size());
    double s2 = sigma * sigma;
    for (std::size_t j = 0; j < mean.size(); ++j) {
      double drift = v.samples[j];
      if (stochastic)
        drift += s2 / (2.0 * t) *
                 (traj.latents[k].samples[j] + (1.0 - t) * v.samples[j]);
      mean[j] = traj.latents[k].samples[j] + drift * dt;
    }
    json line{{"t", t}, {"mean", mean}, {"std", std_dev}};
    if (stochastic)
      line["logprob"] = traj.logprobs[sde_pos++];
    else
      line["logprob"] = nullptr;
    os << line.dump() << "\n";
  }
}

}  // namespace paco
