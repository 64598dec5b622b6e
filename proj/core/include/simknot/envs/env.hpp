#pragma once

#include "simknot/common.hpp"

#include <memory>
#include <string>
#include <vector>

namespace simknot::envs {

struct EnvSpec {
  std::string id;
  int state_dim = 0;
  int action_dim = 0;
  std::vector<Interval> state_bounds;
  std::vector<Interval> action_bounds;
  Interval reward_bounds;
  int max_episode_steps = 1;

  void validate() const;
};

struct StepResult {
  double reward = 0.0;
  Vec next_state;
  bool restart = false;
};

// Episodic environment with internal state. step() runs one transition;
// when the episode ends the returned state is already the next episode's
// initial state and restart is true.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Vec reset(uint64_t seed) = 0;
  virtual StepResult step(const Vec& action) = 0;

  long action_clamp_events() const { return clamp_events_; }

 protected:
  Vec clamp_action(const Vec& action);
  long clamp_events_ = 0;
};

// Base for the analytic tasks: handles step counting, state clamping and
// auto-reset at the step limit.
class AnalyticEnv : public Env {
 public:
  const EnvSpec& spec() const override { return spec_; }
  Vec reset(uint64_t seed) override;
  StepResult step(const Vec& action) override;

  int steps_taken() const { return steps_taken_; }

 protected:
  virtual Vec draw_initial(Rng& rng) const = 0;
  virtual double reward(const Vec& s, const Vec& a) const = 0;
  virtual Vec integrate(const Vec& s, const Vec& a) const = 0;

  EnvSpec spec_;
  Vec state_;
  int steps_taken_ = 0;
  Rng rng_{0};
  bool initialized_ = false;
};

std::unique_ptr<Env> make_env(const std::string& id);
std::vector<std::string> registered_env_ids();

}  // namespace simknot::envs
