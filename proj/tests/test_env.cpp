#include <catch2/catch.hpp>
#include <set>

#include "common/stats.hpp"
#include "icql/env.hpp"

using namespace icql;

namespace {

EnvConfig task_config() {
  EnvConfig cfg;  // defaults: 41x10, 4 agents, 2 prey
  return cfg;
}

bool states_equal(const GridState& a, const GridState& b) {
  if (a.agents != b.agents || a.step_count != b.step_count || a.done != b.done) return false;
  if (a.prey.size() != b.prey.size()) return false;
  for (size_t i = 0; i < a.prey.size(); ++i)
    if (!(a.prey[i].pos == b.prey[i].pos) || a.prey[i].kind != b.prey[i].kind ||
        a.prey[i].alive != b.prey[i].alive)
      return false;
  return a.rng == b.rng;
}

}  // namespace

TEST_CASE("reset places everything on its spawn row") {
  Env env(task_config());
  auto [st, obs] = env.reset(Rng(1));
  REQUIRE(st.prey[0].kind == PreyKind::Valley);
  REQUIRE(st.prey[0].pos.row == 0);
  REQUIRE(st.prey[1].kind == PreyKind::Mountain);
  REQUIRE(st.prey[1].pos.row == 40);
  REQUIRE(st.agents.size() == 4);
  std::set<std::pair<int, int>> cells;
  for (const auto& a : st.agents) {
    REQUIRE(a.row == 20);
    REQUIRE(a.col >= 0);
    REQUIRE(a.col < 10);
    cells.insert({a.row, a.col});
  }
  REQUIRE(cells.size() == 4);  // distinct
  REQUIRE(st.step_count == 0);
  REQUIRE(obs.size() == 4);
}

TEST_CASE("reset fills the whole row when width equals the agent count") {
  EnvConfig cfg;
  cfg.height = 3;
  cfg.width = 4;
  cfg.n_agents = 4;
  Env env(cfg);
  auto [st, obs] = env.reset(Rng(3));
  std::set<int> cols;
  for (const auto& a : st.agents) {
    REQUIRE(a.row == 1);
    cols.insert(a.col);
  }
  REQUIRE(cols == std::set<int>{0, 1, 2, 3});
}

TEST_CASE("reset rejects more agents than columns") {
  EnvConfig cfg;
  cfg.width = 3;
  cfg.n_agents = 4;
  REQUIRE_THROWS_AS(Env(cfg), ConfigError);
}

TEST_CASE("spawn columns are uniform (chi-square)") {
  Env env(task_config());
  const int resets = 10000;
  std::vector<long> valley(10, 0), mountain(10, 0), agent0(10, 0);
  Rng seeder(99);
  for (int i = 0; i < resets; ++i) {
    auto [st, obs] = env.reset(Rng(seeder.next()));
    ++valley[static_cast<size_t>(st.prey[0].pos.col)];
    ++mountain[static_cast<size_t>(st.prey[1].pos.col)];
    ++agent0[static_cast<size_t>(st.agents[0].col)];
  }
  for (const auto& counts : {valley, mountain, agent0}) {
    const double stat = teststats::chi_square_uniform_stat(counts);
    const double p = teststats::chi_square_p_value(stat, 9);
    INFO("chi-square stat " << stat << " p " << p);
    REQUIRE(p > 0.001);
  }
}

TEST_CASE("agent Up moves execute at the slip rate") {
  EnvConfig cfg = task_config();
  cfg.n_agents = 1;
  cfg.prey_moves = false;
  Env env(cfg);
  const int trials = 100000;
  int executed = 0;
  Rng seeder(7);
  for (int i = 0; i < trials; ++i) {
    GridState st;
    st.rng = Rng(seeder.next());
    st.agents = {{20, 5}};
    st.prey = {{{0, 0}, PreyKind::Valley, true}, {{40, 9}, PreyKind::Mountain, true}};
    env.step(st, {Action::Up});
    if (st.agents[0].row == 21) ++executed;
  }
  const double rate = static_cast<double>(executed) / trials;
  REQUIRE(rate >= 0.495);
  REQUIRE(rate <= 0.505);
}

TEST_CASE("slip primitive: valley Up and mountain Down fail half the time") {
  Rng rng(11);
  const int trials = 100000;
  int valley_exec = 0, mountain_exec = 0, down_untouched = 0;
  for (int i = 0; i < trials; ++i) {
    if (apply_slip(Action::Up, Action::Up, 0.5, rng) == Action::Up) ++valley_exec;
    if (apply_slip(Action::Down, Action::Down, 0.5, rng) == Action::Down) ++mountain_exec;
    if (apply_slip(Action::Down, Action::Up, 0.5, rng) == Action::Down) ++down_untouched;
  }
  REQUIRE(static_cast<double>(valley_exec) / trials == Approx(0.5).margin(0.005));
  REQUIRE(static_cast<double>(mountain_exec) / trials == Approx(0.5).margin(0.005));
  REQUIRE(down_untouched == trials);  // only the slip direction is affected
}

TEST_CASE("prey movement shows the slip through the full step path") {
  EnvConfig cfg = task_config();
  cfg.n_agents = 1;
  Env env(cfg);
  const int trials = 100000;
  int up = 0, down = 0;
  Rng seeder(13);
  for (int i = 0; i < trials; ++i) {
    GridState st;
    st.rng = Rng(seeder.next());
    st.agents = {{20, 5}};
    st.prey = {{{0, 0}, PreyKind::Valley, true}, {{30, 5}, PreyKind::Mountain, true}};
    env.step(st, {Action::Stay});
    if (st.prey[1].pos.row == 31) ++up;
    if (st.prey[1].pos.row == 29) ++down;
  }
  // uniform action draw (0.2 each); Down additionally slips half the time
  REQUIRE(static_cast<double>(up) / trials == Approx(0.2).margin(0.006));
  REQUIRE(static_cast<double>(down) / trials == Approx(0.1).margin(0.005));
}

TEST_CASE("capture_check examples") {
  EnvConfig cfg = task_config();
  Env env(cfg);
  GridState st;
  st.prey = {{{0, 0}, PreyKind::Valley, true}, {{40, 9}, PreyKind::Mountain, true}};

  SECTION("corner prey with two agents is captured") {
    st.agents = {{0, 1}, {1, 0}, {20, 5}, {20, 7}};
    REQUIRE(env.capture_check(st, 0));
  }
  SECTION("interior prey with three agents is not captured") {
    st.prey[0].pos = {5, 5};
    st.agents = {{4, 5}, {6, 5}, {5, 4}, {20, 7}};
    REQUIRE_FALSE(env.capture_check(st, 0));
  }
}

TEST_CASE("capture_check equals brute force on every 4x4 configuration") {
  EnvConfig cfg;
  cfg.height = 4;
  cfg.width = 4;
  cfg.n_agents = 4;
  cfg.n_prey = 1;
  Env env(cfg);

  auto oracle = [](Pos prey, uint16_t mask) {
    const int offs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& o : offs) {
      const int r = prey.row + o[0], c = prey.col + o[1];
      if (r < 0 || r >= 4 || c < 0 || c >= 4) continue;
      if (!(mask & (1u << (r * 4 + c)))) return false;
    }
    return true;
  };

  for (int prey_cell = 0; prey_cell < 16; ++prey_cell) {
    const Pos prey{prey_cell / 4, prey_cell % 4};
    // enumerate agent sets over the other 15 cells
    std::vector<int> other_cells;
    for (int c = 0; c < 16; ++c)
      if (c != prey_cell) other_cells.push_back(c);
    for (uint32_t subset = 0; subset < (1u << 15); ++subset) {
      uint16_t mask = 0;
      GridState st;
      st.prey = {{prey, PreyKind::Valley, true}};
      for (int b = 0; b < 15; ++b)
        if (subset & (1u << b)) {
          const int cell = other_cells[static_cast<size_t>(b)];
          mask |= static_cast<uint16_t>(1u << cell);
          st.agents.push_back({cell / 4, cell % 4});
        }
      if (env.capture_check(st, 0) != oracle(prey, mask)) {
        INFO("prey " << prey.row << "," << prey.col << " subset " << subset);
        REQUIRE(false);
      }
    }
  }
  SUCCEED();
}

TEST_CASE("step: staying put with no trap gives zero reward") {
  EnvConfig cfg = task_config();
  cfg.prey_moves = false;
  Env env(cfg);
  auto [st, obs] = env.reset(Rng(5));
  const GridState before = st;
  auto res = env.step(st, JointAction(4, Action::Stay));
  REQUIRE(res.reward == 0.0);
  REQUIRE_FALSE(res.terminated);
  REQUIRE(st.agents == before.agents);
  REQUIRE(st.prey[0].pos == before.prey[0].pos);
  REQUIRE(st.step_count == 1);
}

TEST_CASE("step: mountain capture pays 10 and terminates") {
  EnvConfig cfg = task_config();
  cfg.prey_moves = false;
  Env env(cfg);
  GridState st;
  st.rng = Rng(2);
  // mountain prey pinned in the top-left corner, two agents sealing it
  st.prey = {{{0, 5}, PreyKind::Valley, true}, {{40, 0}, PreyKind::Mountain, true}};
  st.agents = {{39, 0}, {40, 1}, {20, 5}, {20, 7}};
  auto res = env.step(st, JointAction(4, Action::Stay));
  REQUIRE(res.reward == 10.0);
  REQUIRE(res.terminated);
  REQUIRE_FALSE(st.prey[1].alive);
  REQUIRE(st.done);
  REQUIRE_THROWS_AS(env.step(st, JointAction(4, Action::Stay)), std::logic_error);
}

TEST_CASE("step: simultaneous double capture pays the mountain reward") {
  EnvConfig cfg = task_config();
  cfg.prey_moves = false;
  cfg.n_agents = 4;
  Env env(cfg);
  GridState st;
  st.rng = Rng(2);
  st.prey = {{{0, 0}, PreyKind::Valley, true}, {{40, 0}, PreyKind::Mountain, true}};
  st.agents = {{0, 1}, {1, 0}, {39, 0}, {40, 1}};
  auto res = env.step(st, JointAction(4, Action::Stay));
  REQUIRE(res.reward == 10.0);
  REQUIRE(res.terminated);
  REQUIRE_FALSE(st.prey[0].alive);
  REQUIRE_FALSE(st.prey[1].alive);
}

TEST_CASE("step: truncation after the episode limit") {
  EnvConfig cfg = task_config();
  cfg.episode_limit = 3;
  cfg.prey_moves = false;
  Env env(cfg);
  auto [st, obs] = env.reset(Rng(8));
  for (int t = 0; t < 2; ++t) {
    auto res = env.step(st, JointAction(4, Action::Stay));
    REQUIRE_FALSE(res.truncated);
  }
  auto res = env.step(st, JointAction(4, Action::Stay));
  REQUIRE(res.truncated);
  REQUIRE_FALSE(res.terminated);
  REQUIRE(st.done);
}

TEST_CASE("observation: empty neighborhood sees only zeros") {
  EnvConfig cfg = task_config();
  Env env(cfg);
  GridState st;
  st.agents = {{20, 5}, {10, 1}, {10, 8}, {30, 5}};
  st.prey = {{{0, 0}, PreyKind::Valley, true}, {{40, 9}, PreyKind::Mountain, true}};
  const Observation obs = env.observe(st, 0);
  for (float v : obs) REQUIRE(v == 0.0f);
}

TEST_CASE("observation: corner agent sees 16 out-of-bounds cells") {
  EnvConfig cfg = task_config();
  cfg.n_agents = 1;
  Env env(cfg);
  GridState st;
  st.agents = {{0, 0}};
  st.prey = {{{0, 5}, PreyKind::Valley, true}, {{40, 9}, PreyKind::Mountain, true}};
  const Observation obs = env.observe(st, 0);
  int oob = 0;
  for (int i = 75; i < 100; ++i) oob += obs[static_cast<size_t>(i)] > 0 ? 1 : 0;
  REQUIRE(oob == 16);
  // cells below and left of the grid are out of bounds
  auto at = [&](int wr, int wc) { return obs[static_cast<size_t>(75 + wr * 5 + wc)]; };
  for (int wr = 0; wr < 5; ++wr)
    for (int wc = 0; wc < 5; ++wc) {
      const bool outside = (wr < 2) || (wc < 2);
      REQUIRE(at(wr, wc) == (outside ? 1.0f : 0.0f));
    }
}

TEST_CASE("observation: entities land on the translated window cell") {
  EnvConfig cfg = task_config();
  Env env(cfg);
  GridState st;
  st.agents = {{20, 5}, {21, 5}, {10, 1}, {10, 8}};
  st.prey = {{{22, 5}, PreyKind::Valley, true}, {{20, 3}, PreyKind::Mountain, true}};
  const Observation obs = env.observe(st, 0);
  // other agent one row up: plane 0, window (3, 2)
  REQUIRE(obs[0 * 25 + 3 * 5 + 2] == 1.0f);
  REQUIRE(obs[0 * 25 + 2 * 5 + 2] == 0.0f);  // self excluded
  // valley prey two rows up: plane 1, window (4, 2)
  REQUIRE(obs[1 * 25 + 4 * 5 + 2] == 1.0f);
  // mountain prey two columns left: plane 2, window (2, 0)
  REQUIRE(obs[2 * 25 + 2 * 5 + 0] == 1.0f);
}

TEST_CASE("observation: entities beyond the window radius are invisible") {
  EnvConfig cfg = task_config();
  Env env(cfg);
  GridState st;
  st.agents = {{20, 5}, {10, 1}, {10, 8}, {30, 5}};
  st.prey = {{{5, 5}, PreyKind::Valley, true}, {{35, 5}, PreyKind::Mountain, true}};
  const Observation base = env.observe(st, 0);
  GridState moved_far = st;
  moved_far.prey[0].pos = {6, 6};      // still > 2 Chebyshev away
  moved_far.agents[3] = {30, 6};       // ditto
  REQUIRE(env.observe(moved_far, 0) == base);
}

TEST_CASE("global features hit the normalization endpoints") {
  EnvConfig cfg = task_config();
  cfg.n_agents = 2;
  cfg.episode_limit = 100;
  Env env(cfg);
  GridState st;
  st.agents = {{0, 0}, {40, 9}};
  st.prey = {{{0, 3}, PreyKind::Valley, true}, {{40, 7}, PreyKind::Mountain, false}};
  st.step_count = 50;
  const StateFeatures f = env.global_features(st);
  REQUIRE(f.size() == 2 * 2 + 3 * 2 + 1);
  REQUIRE(f[0] == 0.0f);
  REQUIRE(f[1] == 0.0f);
  REQUIRE(f[2] == 1.0f);
  REQUIRE(f[3] == 1.0f);
  REQUIRE(f[6] == 1.0f);               // valley prey alive flag
  REQUIRE(f[9] == 0.0f);               // mountain prey alive flag
  REQUIRE(f.back() == 0.5f);
  for (float v : f) {
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }
}

TEST_CASE("global features: width-one grids normalize columns to zero") {
  EnvConfig cfg;
  cfg.height = 5;
  cfg.width = 1;
  cfg.n_agents = 1;
  cfg.n_prey = 1;
  Env env(cfg);
  auto [st, obs] = env.reset(Rng(4));
  const StateFeatures f = env.global_features(st);
  REQUIRE(f[1] == 0.0f);  // agent column
  REQUIRE(f[3] == 0.0f);  // prey column
}

TEST_CASE("step is deterministic given state, actions and rng state") {
  Env env(task_config());
  auto [st, obs] = env.reset(Rng(21));
  GridState copy = st;
  JointAction act = {Action::Up, Action::Left, Action::Stay, Action::Right};
  env.step(st, act);
  env.step(copy, act);
  REQUIRE(states_equal(st, copy));
}

TEST_CASE("random rollouts keep the occupancy and reward invariants") {
  Env env(task_config());
  Rng rng(31);
  for (int episode = 0; episode < 60; ++episode) {
    auto [st, obs] = env.reset(Rng(rng.next()));
    int steps = 0;
    while (!st.done) {
      JointAction act;
      for (int a = 0; a < 4; ++a) act.push_back(static_cast<Action>(rng.uniform_int(5)));
      auto res = env.step(st, act);
      ++steps;
      std::set<std::pair<int, int>> cells;
      for (const auto& a : st.agents) {
        REQUIRE(env.in_bounds(a));
        cells.insert({a.row, a.col});
      }
      for (const auto& p : st.prey)
        if (p.alive) {
          REQUIRE(env.in_bounds(p.pos));
          cells.insert({p.pos.row, p.pos.col});
        }
      size_t living = st.agents.size();
      for (const auto& p : st.prey) living += p.alive ? 1 : 0;
      REQUIRE(cells.size() == living);
      const bool nonzero = res.reward != 0.0;
      REQUIRE((res.reward == 0.0 || res.reward == 5.0 || res.reward == 10.0));
      REQUIRE(nonzero == res.terminated);
    }
    REQUIRE(steps <= 100);
  }
}
