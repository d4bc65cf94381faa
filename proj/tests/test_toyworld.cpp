#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "paco/toyworld.hpp"

using namespace paco;

namespace {

PromptSpec neutral_prompt(int n_contents = 4) {
  PromptSpec p;
  p.identity.assign(4, 0.0);
  p.style.assign(2, 0.0);
  p.contents.assign(n_contents, std::vector<double>(4, 0.0));
  p.category_label = "test";
  return p;
}

}  // namespace

TEST_CASE("render: all-zero prompt leaves only the style carrier") {
  ToyConfig cfg;
  RngStream s(1, 1);
  Signal x = render(neutral_prompt(), 0, 0.0, s, 64);
  for (int j = 0; j < 64; ++j) {
    double u = static_cast<double>(j) / 64.0;
    double carrier =
        0.25 * std::cos(2.0 * std::numbers::pi * cfg.style_mode() * u);
    CHECK(std::abs(x.samples[j] - carrier) < 1e-12);
  }
  for (double c : extract_identity(x)) CHECK(std::abs(c) < 1e-12);
  for (double c : extract_content(x)) CHECK(std::abs(c) < 1e-12);
}

TEST_CASE("render: single identity mode is a pure cosine plus the carrier") {
  ToyConfig cfg;
  PromptSpec p = neutral_prompt();
  p.identity[0] = 1.0;
  RngStream s(1, 1);
  Signal x = render(p, 0, 0.0, s, 64);
  for (int j = 0; j < 64; ++j) {
    double u = static_cast<double>(j) / 64.0;
    double expect =
        std::cos(2.0 * std::numbers::pi * u) +
        0.25 * std::cos(2.0 * std::numbers::pi * cfg.style_mode() * u);
    CHECK(x.samples[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("render/extract: identity round trip") {
  RngStream s(3, 9);
  for (int rep = 0; rep < 20; ++rep) {
    RngStream local = s.split(rep);
    PromptSpec p = random_prompt(local, 4);
    Signal x = render(p, rep % 4, 0.0, local, 64);
    auto id = extract_identity(x);
    REQUIRE(id.size() == p.identity.size());
    for (std::size_t i = 0; i < id.size(); ++i)
      CHECK(id[i] == doctest::Approx(p.identity[i]).epsilon(1e-6));
    auto ct = extract_content(x);
    for (std::size_t i = 0; i < ct.size(); ++i)
      CHECK(ct[i] == doctest::Approx(p.contents[rep % 4][i]).epsilon(1e-6));
  }
}

TEST_CASE("band separation: identity and content do not leak") {
  RngStream s(8, 2);
  PromptSpec p = random_prompt(s, 4);
  Signal base = render(p, 0, 0.0, s, 64);
  auto content_before = extract_content(base);
  PromptSpec q = p;
  for (auto& v : q.identity) v = -v * 0.5 + 0.1;
  Signal changed = render(q, 0, 0.0, s, 64);
  auto content_after = extract_content(changed);
  for (std::size_t i = 0; i < content_before.size(); ++i)
    CHECK(std::abs(content_before[i] - content_after[i]) <= 1e-9);

  auto id_before = extract_identity(base);
  PromptSpec r = p;
  for (auto& v : r.contents[0]) v = -v * 0.3 + 0.2;
  Signal changed2 = render(r, 0, 0.0, s, 64);
  auto id_after = extract_identity(changed2);
  for (std::size_t i = 0; i < id_before.size(); ++i)
    CHECK(std::abs(id_before[i] - id_after[i]) <= 1e-9);
}

TEST_CASE("render: resolution below band limit rejected") {
  RngStream s(1, 1);
  ToyConfig cfg;
  CHECK_THROWS_AS(render(neutral_prompt(), 0, 0.0, s, cfg.min_resolution() - 1),
                  DataError);
  CHECK_THROWS_AS(extract_identity(Signal::zeros(8)), DataError);
}

TEST_CASE("render: bad content index rejected") {
  RngStream s(1, 1);
  CHECK_THROWS_AS(render(neutral_prompt(2), 5, 0.0, s, 64), DataError);
}

TEST_CASE("true_consistency: identical signals score 1") {
  RngStream s(4, 4);
  PromptSpec p = random_prompt(s, 4);
  Signal x = render(p, 0, 0.0, s, 64);
  CHECK(true_consistency(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("true_consistency: distance squared tau gives exp(-1)") {
  ToyConfig cfg;
  PromptSpec a = neutral_prompt(), b = neutral_prompt();
  b.identity[0] = std::sqrt(cfg.tau_c);
  RngStream s(1, 1);
  Signal xa = render(a, 0, 0.0, s, 64);
  Signal xb = render(b, 0, 0.0, s, 64);
  CHECK(true_consistency(xa, xb) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
}

TEST_CASE("true_consistency: ordering follows identity distance") {
  RngStream s(5, 5);
  PromptSpec ref = neutral_prompt();
  Signal xref = render(ref, 0, 0.0, s, 64);
  std::vector<double> dists{0.1, 0.35, 0.6, 0.9};
  double prev = 2.0;
  for (double d : dists) {
    PromptSpec p = neutral_prompt();
    p.identity[1] = d;
    Signal x = render(p, 0, 0.0, s, 64);
    double c = true_consistency(xref, x);
    CHECK(c < prev);
    prev = c;
  }
}

TEST_CASE("style does not enter consistency") {
  RngStream s(6, 6);
  PromptSpec p = random_prompt(s, 4);
  PromptSpec q = p;
  q.style[0] = -q.style[0] + 0.4;
  q.style[1] = 0.9;
  Signal xp = render(p, 0, 0.0, s, 64);
  Signal xq = render(q, 0, 0.0, s, 64);
  CHECK(true_consistency(xp, xq) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("alignment reward: exact content match scores 1") {
  RngStream s(7, 7);
  PromptSpec p = random_prompt(s, 4);
  Signal x = render(p, 2, 0.0, s, 64);
  CHECK(alignment_reward(x, p, 2) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(alignment_reward(x, p, 1) < 1.0);
}

TEST_CASE("consistency_reward_set: mean over unordered pairs") {
  RngStream s(9, 9);
  std::vector<Signal> xs;
  for (int i = 0; i < 3; ++i) {
    PromptSpec p = neutral_prompt();
    p.identity[0] = 0.2 * i;
    xs.push_back(render(p, 0, 0.0, s, 64));
  }
  double expect = (true_consistency(xs[0], xs[1]) +
                   true_consistency(xs[0], xs[2]) +
                   true_consistency(xs[1], xs[2])) /
                  3.0;
  CHECK(consistency_reward_set(xs) == doctest::Approx(expect).epsilon(1e-12));
  std::vector<Signal> one{xs[0]};
  CHECK_THROWS_AS(consistency_reward_set(one), DataError);
}

TEST_CASE("random_prompt: components bounded") {
  RngStream s(10, 10);
  for (int rep = 0; rep < 50; ++rep) {
    RngStream local = s.split(rep);
    PromptSpec p = random_prompt(local, 4);
    for (double v : p.identity) CHECK((v >= -1.0 && v <= 1.0));
    for (double v : p.style) CHECK((v >= -1.0 && v <= 1.0));
    REQUIRE(p.contents.size() == 4);
    for (const auto& c : p.contents)
      for (double v : c) CHECK((v >= -1.0 && v <= 1.0));
  }
}
