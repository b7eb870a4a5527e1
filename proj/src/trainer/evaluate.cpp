#include "macrpo/trainer/evaluate.hpp"

#include <cmath>
#include <memory>

#include "macrpo/errors.hpp"

namespace macrpo {

using nn::LstmState;
using nn::Tensor2;

EvalResult evaluate(const ActorNet& actor, const envs::MarkovGame& env, std::size_t episodes, Rng& rng) {
  if (episodes == 0) throw ContractError("evaluate: episodes must be at least 1");
  const std::uint64_t base = rng();
  const std::size_t n = env.num_agents();
  const std::size_t obs_w = env.obs_width();

  struct Episode {
    std::unique_ptr<envs::MarkovGame> game;
    Rng env_rng;
    Rng act_rng;
    envs::Observations obs;
    LstmState state;
    double total = 0.0;
    bool running = true;
  };
  std::vector<Episode> eps;
  eps.reserve(episodes);
  for (std::size_t k = 0; k < episodes; ++k) {
    Episode e{env.clone(), make_rng(base, {k, 0}), make_rng(base, {k, 1}), {}, LstmState(n, actor.hidden())};
    e.obs = e.game->reset(e.env_rng);
    eps.push_back(std::move(e));
  }

  std::vector<std::size_t> live(episodes);
  for (std::size_t k = 0; k < episodes; ++k) live[k] = k;
  for (std::size_t step = 0; !live.empty(); ++step) {
    if (step >= kMaxEvalSteps) throw EnvError("evaluate: episode did not terminate");
    const std::size_t rows = live.size() * n;
    Tensor2 x(rows, obs_w);
    LstmState state(rows, actor.hidden());
    for (std::size_t k = 0; k < live.size(); ++k) {
      const Episode& e = eps[live[k]];
      for (std::size_t i = 0; i < n; ++i) {
        std::copy(e.obs[i].begin(), e.obs[i].end(), x.row(k * n + i).begin());
        state.set_row(k * n + i, e.state.slice(i));
      }
    }
    LstmState next;
    const Tensor2 head = actor.step(x, state, next);

    std::vector<std::size_t> still;
    still.reserve(live.size());
    for (std::size_t k = 0; k < live.size(); ++k) {
      Episode& e = eps[live[k]];
      std::vector<Action> actions(n);
      for (std::size_t i = 0; i < n; ++i) {
        actions[i] = sample_action(actor.distribution(head.row(k * n + i)), e.act_rng).action;
        e.state.set_row(i, next.slice(k * n + i));
      }
      envs::StepResult r = e.game->step(actions);
      for (double v : r.rewards) e.total += v;
      if (r.done) {
        e.running = false;
      } else {
        e.obs = std::move(r.observations);
        still.push_back(live[k]);
      }
    }
    live = std::move(still);
  }

  EvalResult out;
  out.totals.reserve(episodes);
  double sum = 0.0;
  for (const Episode& e : eps) {
    out.totals.push_back(e.total);
    sum += e.total;
  }
  out.mean = sum / static_cast<double>(episodes);
  double sq = 0.0;
  for (double v : out.totals) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(episodes));
  return out;
}

}  // namespace macrpo
