#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlvr {

struct GroupTooSmall : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SupportMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NonFiniteGradient : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Categorical policy parameterized by unnormalized logits; probabilities are
/// the softmax of the logits, so every action keeps positive mass.
struct CategoricalPolicy {
    std::vector<double> logits;

    size_t action_count() const { return logits.size(); }
    std::vector<double> probabilities() const;
    std::vector<double> log_probabilities() const;
};

/// Frozen snapshot of the policy taken at optimization start.
class ReferencePolicy {
  public:
    explicit ReferencePolicy(CategoricalPolicy snapshot) : snapshot_(std::move(snapshot)) {}

    const CategoricalPolicy& policy() const { return snapshot_; }

  private:
    CategoricalPolicy snapshot_;
};

/// G sampled responses to one query with their rewards and normalized
/// advantages.
struct Group {
    int query_id = 0;
    std::vector<int> actions;
    std::vector<std::string> responses;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

struct TrainerConfig {
    int group_size = 8;
    double learning_rate = 0.1;
    double beta = 0.04;  // KL coefficient
    int steps = 500;
    std::uint64_t seed = 0;
    double std_floor = 1e-8;  // epsilon under the advantage denominator
};

struct StepStats {
    double mean_reward = 0.0;
    double kl = 0.0;
    double grad_norm = 0.0;
};

/// Group-relative advantages: A_i = (r_i - mean) / max(population_std, eps).
/// An all-equal group with eps = 0 yields all-zero advantages.
/// Throws GroupTooSmall for fewer than two rewards.
std::vector<double> group_advantages(std::span<const double> rewards, double eps);

/// Exact KL(p || ref) over the categorical action space. Non-negative and
/// zero iff the distributions coincide. Throws SupportMismatch when the
/// action spaces differ.
double kl_divergence(const CategoricalPolicy& p, const ReferencePolicy& ref);

/// One ascent step on the surrogate
///   sum_i A_i * log pi(o_i)  -  beta * KL(pi || ref),
/// with the gradient computed analytically for the softmax parameterization.
/// Throws NonFiniteGradient when any gradient component is not finite.
StepStats grpo_step(CategoricalPolicy& policy, const ReferencePolicy& ref, const Group& group,
                    const TrainerConfig& cfg);

/// Draws group_size independent actions from the policy, deterministically
/// under the seed. Rewards and responses are left for the caller to fill.
Group sample_group(const CategoricalPolicy& policy, int group_size, std::uint64_t seed);

/// Deterministic 64-bit mix used to derive per-step sampling seeds.
std::uint64_t mix_seed(std::uint64_t state);

}  // namespace rlvr
