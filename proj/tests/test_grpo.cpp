#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "paco/grpo.hpp"

using namespace paco;

namespace {

std::vector<Condition> make_conditions(int n, std::uint64_t seed) {
  std::vector<Condition> out;
  RngStream s(seed, 21);
  for (int i = 0; i < n; ++i) {
    RngStream local = s.split(i);
    Condition c;
    c.prompt = random_prompt(local, 4);
    c.content_index = i % 4;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<RewardChannel> oracle_channels() {
  std::vector<RewardChannel> chs(2);
  chs[0].name = "consistency";
  chs[0].fn = [](const Signal& x, const Condition& cond) {
    RngStream s(0, 0);
    Signal ref = render(cond.prompt, 0, 0.0, s, x.resolution);
    return true_consistency(ref, x);
  };
  chs[1].name = "alignment";
  chs[1].fn = [](const Signal& x, const Condition& cond) {
    return alignment_reward(x, cond.prompt, cond.content_index);
  };
  return chs;
}

}  // namespace

TEST_CASE("coefficient of variation: hand values and scale invariance") {
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  // mean 2.5, population std sqrt(1.25)
  CHECK(coefficient_of_variation(xs) ==
        doctest::Approx(std::sqrt(1.25) / 2.5).epsilon(1e-12));
  double base = coefficient_of_variation(xs);
  for (double c : {0.1, 3.0, 100.0}) {
    std::vector<double> scaled;
    for (double x : xs) scaled.push_back(c * x);
    CHECK(coefficient_of_variation(scaled) ==
          doctest::Approx(base).epsilon(1e-12));
  }
  CHECK_THROWS_AS(coefficient_of_variation(std::vector<double>{}), DataError);
  std::vector<double> zero_mean{-1.0, 1.0};
  CHECK_THROWS_AS(coefficient_of_variation(zero_mean), DataError);
}

TEST_CASE("guarded cv shifts low-mean channels to mean 0.5") {
  std::vector<double> xs{-1.0, 1.0};  // mean 0, std 1
  auto [h, shift] = guarded_cv(xs);
  CHECK(shift == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(h == doctest::Approx(2.0).epsilon(1e-12));

  std::vector<double> high{2.0, 4.0};  // mean 3 >= 0.5: untouched
  auto [h2, shift2] = guarded_cv(high);
  CHECK(shift2 == 0.0);
  CHECK(h2 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("log_tame preserves order and passes through verbatim below delta") {
  RngStream s(77, 1);
  std::vector<double> rewards;
  for (int i = 0; i < 10000; ++i) rewards.push_back(5.0 * s.uniform() - 0.9);
  auto tamed = log_tame(rewards, 1.0, 0.2);
  for (std::size_t i = 0; i < rewards.size(); ++i)
    CHECK(tamed[i] == std::log1p(rewards[i]));
  for (std::size_t i = 0; i + 1 < rewards.size(); ++i)
    CHECK((rewards[i] < rewards[i + 1]) == (tamed[i] < tamed[i + 1]));

  // h <= delta: bit-identical passthrough
  auto same = log_tame(rewards, 0.2, 0.2);
  CHECK(same == rewards);

  std::vector<double> bad{0.5, -1.5};
  CHECK_THROWS_AS(log_tame(bad, 1.0, 0.2), DataError);
}

TEST_CASE("aggregate is the weighted channel sum") {
  std::vector<std::vector<double>> tamed{{1.0, 2.0}, {10.0, 20.0}};
  std::vector<double> w{0.5, 0.1};
  auto rhat = aggregate(tamed, w);
  REQUIRE(rhat.size() == 2);
  CHECK(rhat[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(rhat[1] == doctest::Approx(3.0).epsilon(1e-12));
  std::vector<double> short_w{0.5};
  CHECK_THROWS_AS(aggregate(tamed, short_w), DataError);
}

TEST_CASE("group advantages standardize within each group") {
  RngStream s(31, 2);
  int N = 3, G = 8;
  std::vector<double> rhat;
  for (int i = 0; i < N * G; ++i) rhat.push_back(s.uniform() * 4.0);
  auto adv = group_advantages(rhat, N, G);
  for (int i = 0; i < N; ++i) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < G; ++j) mean += adv[i * G + j];
    mean /= G;
    for (int j = 0; j < G; ++j) {
      double d = adv[i * G + j] - mean;
      var += d * d;
    }
    var /= G;
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-9);
  }

  // degenerate group collapses to zeros, other groups unaffected
  std::vector<double> degen(2 * G, 0.7);
  for (int j = 0; j < G; ++j) degen[G + j] = j;
  auto adv2 = group_advantages(degen, 2, G);
  for (int j = 0; j < G; ++j) CHECK(adv2[j] == 0.0);
  double second = 0.0;
  for (int j = 0; j < G; ++j) second += std::abs(adv2[G + j]);
  CHECK(second > 0.0);

  CHECK_THROWS_AS(group_advantages(rhat, N + 1, G), DataError);
}

TEST_CASE("clipped objective vanishes when nothing moved") {
  std::vector<double> lp{-3.0, -1.0, -2.5};
  std::vector<double> adv{1.0, -2.0, 0.5};
  // ratios of 1 mean the objective equals mean advantage
  double mean_adv = (adv[0] + adv[1] + adv[2]) / 3.0;
  CHECK(clipped_objective(lp, lp, adv, 1e-4) ==
        doctest::Approx(mean_adv).epsilon(1e-12));
}

TEST_CASE("clipped objective caps the favorable branch") {
  std::vector<double> old_lp{0.0};
  std::vector<double> new_lp{0.5};  // ratio e^0.5 ~ 1.65
  std::vector<double> adv{2.0};
  double eps = 0.1;
  // min(r*A, clip(r)*A) = 1.1 * 2
  CHECK(clipped_objective(new_lp, old_lp, adv, eps) ==
        doctest::Approx(2.2).epsilon(1e-12));
  std::vector<double> neg{-2.0};
  // negative advantage: min picks the unclipped branch
  CHECK(clipped_objective(new_lp, old_lp, neg, eps) ==
        doctest::Approx(std::exp(0.5) * -2.0).epsilon(1e-12));
}

TEST_CASE("kl monitor is zero at the reference and positive away from it") {
  std::vector<double> ref{-1.0, -2.0};
  CHECK(kl_penalty(ref, ref) == 0.0);
  std::vector<double> moved{-1.3, -1.8};
  CHECK(kl_penalty(moved, ref) > 0.0);
  std::vector<double> one{-1.0};
  CHECK_THROWS_AS(kl_penalty(one, ref), DataError);
}

TEST_CASE("build_panel wires cv, taming, aggregation and advantages") {
  GrpoConfig cfg;
  cfg.delta = 0.2;
  auto channels = oracle_channels();
  channels[0].weight = 0.5;
  channels[1].weight = 0.25;
  // channel 0 dispersed (cv > delta), channel 1 tight (cv < delta)
  std::vector<std::vector<double>> raw{{0.1, 2.0, 0.5, 3.0},
                                       {1.0, 1.05, 0.95, 1.0}};
  RewardPanel panel = build_panel(raw, channels, 2, 2, cfg);
  CHECK(panel.tamed_flags[0]);
  CHECK_FALSE(panel.tamed_flags[1]);
  for (std::size_t i = 0; i < raw[0].size(); ++i) {
    CHECK(panel.tamed[0][i] == std::log1p(raw[0][i]));
    CHECK(panel.tamed[1][i] == raw[1][i]);
    CHECK(panel.aggregated[i] ==
          doctest::Approx(0.5 * panel.tamed[0][i] + 0.25 * panel.tamed[1][i])
              .epsilon(1e-12));
  }
  CHECK(panel.delta_used == 0.2);
  CHECK(panel.advantages.size() == 4);

  GrpoConfig off = cfg;
  off.taming_enabled = false;
  RewardPanel raw_panel = build_panel(raw, channels, 2, 2, off);
  CHECK(raw_panel.tamed[0] == raw[0]);
  CHECK_FALSE(raw_panel.tamed_flags[0]);

  GrpoConfig dyn = cfg;
  dyn.delta_mode = "dynamic-mean";
  RewardPanel dyn_panel = build_panel(raw, channels, 2, 2, dyn);
  CHECK(dyn_panel.delta_used ==
        doctest::Approx((dyn_panel.cv[0] + dyn_panel.cv[1]) / 2.0)
            .epsilon(1e-12));

  GrpoConfig bad = cfg;
  bad.delta_mode = "median";
  CHECK_THROWS_AS(build_panel(raw, channels, 2, 2, bad), DataError);
}

TEST_CASE("dominance ratio guards the denominator") {
  EpochReport start, now;
  start.channel_mean = {0.5, 0.6};
  now.channel_mean = {0.7, 0.6005};
  CHECK(dominance_ratio(now, start) ==
        doctest::Approx(0.2 / 1e-3).epsilon(1e-9));
  now.channel_mean = {0.7, 0.8};
  CHECK(dominance_ratio(now, start) == doctest::Approx(1.0).epsilon(1e-9));
  EpochReport mono;
  mono.channel_mean = {0.5};
  CHECK_THROWS_AS(dominance_ratio(mono, start), DataError);
}

TEST_CASE("grpo_epoch: report bookkeeping and reward improvement") {
  RngStream init(42, 3);
  FlowModel policy = init_flow_model(init);
  // light pretrain so the policy is in the oracle's basin
  AdamState fm_adam = AdamState::init(policy.params);
  auto conds = make_conditions(4, 42);
  RngStream data(42, 4);
  for (int step = 0; step < 60; ++step) {
    std::vector<std::pair<Signal, Condition>> batch;
    for (const auto& c : conds) {
      RngStream local = data.split(step * 16 + batch.size());
      batch.emplace_back(
          render(c.prompt, c.content_index, 0.02, local, 32), c);
    }
    fm_train_step(policy, fm_adam, batch, 3e-3, data);
  }

  GrpoConfig cfg;
  cfg.group_size = 8;
  cfg.epochs = 10;
  auto channels = oracle_channels();
  AdamState adam = AdamState::init(policy.params);
  ParamSet ref = policy.params;
  RngStream stream(42, 5);
  EpochReport first = grpo_epoch(policy, adam, conds, channels, cfg, ref,
                                 stream.split(0), 0);
  REQUIRE(first.channel_names.size() == 2);
  CHECK(first.channel_names[0] == "consistency");
  CHECK(first.points_processed ==
        4LL * cfg.group_size * cfg.timesteps * cfg.d_train);
  CHECK(first.cv.size() == 2);
  CHECK(std::isfinite(first.jclip));
  CHECK(first.kl >= 0.0);
  // on-policy single step: ratios are exactly 1, so jclip is mean advantage
  CHECK(std::abs(first.jclip) <= 1e-9);
  CHECK(first.kl <= 1e-12);

  EpochReport last = first;
  for (int e = 1; e < 10; ++e)
    last = grpo_epoch(policy, adam, conds, channels, cfg, ref,
                      stream.split(e), e);
  double gain = last.channel_mean[0] - first.channel_mean[0];
  CHECK(gain > 0.0);

  // determinism: identical inputs reproduce the epoch bit for bit
  FlowModel p2 = policy;
  AdamState a2 = adam;
  EpochReport r1 = grpo_epoch(policy, adam, conds, channels, cfg, ref,
                              stream.split(99), 99);
  EpochReport r2 = grpo_epoch(p2, a2, conds, channels, cfg, ref,
                              stream.split(99), 99);
  CHECK(r1.channel_mean == r2.channel_mean);
  CHECK(r1.rhat_mean == r2.rhat_mean);
  for (std::size_t i = 0; i < policy.params.size(); ++i)
    CHECK(policy.params[i].values == p2.params[i].values);
}

TEST_CASE("grpo_epoch: reward channel failure names the channel") {
  RngStream init(7, 3);
  FlowModel policy = init_flow_model(init);
  AdamState adam = AdamState::init(policy.params);
  auto conds = make_conditions(1, 7);
  std::vector<RewardChannel> channels(1);
  channels[0].name = "broken";
  channels[0].fn = [](const Signal&, const Condition&) -> double {
    throw DataError("inner failure");
  };
  GrpoConfig cfg;
  cfg.group_size = 2;
  try {
    grpo_epoch(policy, adam, conds, channels, cfg, policy.params,
               RngStream(7, 8), 0);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find("broken") != std::string::npos);
  }
}
