#include "rlvr/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rlvr {

std::vector<double> CategoricalPolicy::log_probabilities() const {
    std::vector<double> lp(logits.size());
    double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - max_logit);
    double log_z = max_logit + std::log(sum);
    for (size_t i = 0; i < logits.size(); ++i) lp[i] = logits[i] - log_z;
    return lp;
}

std::vector<double> CategoricalPolicy::probabilities() const {
    std::vector<double> probs = log_probabilities();
    for (double& v : probs) v = std::exp(v);
    return probs;
}

std::vector<double> group_advantages(std::span<const double> rewards, double eps) {
    if (rewards.size() < 2) {
        throw GroupTooSmall("group_advantages: need at least 2 rewards, got " +
                            std::to_string(rewards.size()));
    }
    double n = static_cast<double>(rewards.size());
    double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    double std_dev = std::sqrt(var / n);

    double denom = std::max(std_dev, eps);
    std::vector<double> advantages(rewards.size(), 0.0);
    if (denom == 0.0) return advantages;  // all-equal group, eps 0
    for (size_t i = 0; i < rewards.size(); ++i) advantages[i] = (rewards[i] - mean) / denom;
    return advantages;
}

double kl_divergence(const CategoricalPolicy& p, const ReferencePolicy& ref) {
    const CategoricalPolicy& q = ref.policy();
    if (p.action_count() != q.action_count()) {
        throw SupportMismatch("kl_divergence: action spaces differ (" +
                              std::to_string(p.action_count()) + " vs " +
                              std::to_string(q.action_count()) + ")");
    }
    std::vector<double> lp = p.log_probabilities();
    std::vector<double> lq = q.log_probabilities();
    double kl = 0.0;
    for (size_t i = 0; i < lp.size(); ++i) {
        double pi = std::exp(lp[i]);
        if (pi > 0.0) kl += pi * (lp[i] - lq[i]);
    }
    return std::max(kl, 0.0);
}

StepStats grpo_step(CategoricalPolicy& policy, const ReferencePolicy& ref, const Group& group,
                    const TrainerConfig& cfg) {
    size_t action_count = policy.action_count();
    if (group.actions.size() < 2 || group.actions.size() != group.advantages.size()) {
        throw GroupTooSmall("grpo_step: group needs >= 2 actions with advantages");
    }
    for (int a : group.actions) {
        if (a < 0 || static_cast<size_t>(a) >= action_count) {
            throw SupportMismatch("grpo_step: action id out of range");
        }
    }

    std::vector<double> lp = policy.log_probabilities();
    std::vector<double> lq = ref.policy().log_probabilities();
    if (lq.size() != action_count) {
        throw SupportMismatch("grpo_step: reference action space differs");
    }

    std::vector<double> probs(action_count);
    double kl = 0.0;
    for (size_t k = 0; k < action_count; ++k) {
        probs[k] = std::exp(lp[k]);
        if (probs[k] > 0.0) kl += probs[k] * (lp[k] - lq[k]);
    }
    kl = std::max(kl, 0.0);

    // d/dtheta_k sum_i A_i log pi(a_i) = sum_{i: a_i = k} A_i - pi_k * sum_i A_i
    // d/dtheta_k KL(pi || ref)         = pi_k * (log(pi_k / q_k) - KL)
    double advantage_sum = std::accumulate(group.advantages.begin(), group.advantages.end(), 0.0);
    std::vector<double> grad(action_count, 0.0);
    for (size_t i = 0; i < group.actions.size(); ++i) {
        grad[static_cast<size_t>(group.actions[i])] += group.advantages[i];
    }
    double norm_sq = 0.0;
    for (size_t k = 0; k < action_count; ++k) {
        grad[k] -= probs[k] * advantage_sum;
        grad[k] -= cfg.beta * probs[k] * ((lp[k] - lq[k]) - kl);
        if (!std::isfinite(grad[k])) {
            throw NonFiniteGradient("grpo_step: non-finite gradient at action " +
                                    std::to_string(k));
        }
        norm_sq += grad[k] * grad[k];
    }

    for (size_t k = 0; k < action_count; ++k) {
        policy.logits[k] += cfg.learning_rate * grad[k];
    }

    StepStats stats;
    if (!group.rewards.empty()) {
        stats.mean_reward = std::accumulate(group.rewards.begin(), group.rewards.end(), 0.0) /
                            static_cast<double>(group.rewards.size());
    }
    stats.kl = kl;
    stats.grad_norm = std::sqrt(norm_sq);
    return stats;
}

namespace {

// 53-bit uniform in [0, 1).
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Group sample_group(const CategoricalPolicy& policy, int group_size, std::uint64_t seed) {
    if (group_size < 2) {
        throw GroupTooSmall("sample_group: group size must be >= 2, got " +
                            std::to_string(group_size));
    }
    std::vector<double> probs = policy.probabilities();

    Group group;
    group.actions.reserve(static_cast<size_t>(group_size));
    std::mt19937_64 rng(seed);
    for (int g = 0; g < group_size; ++g) {
        double u = uniform01(rng);
        double cumulative = 0.0;
        size_t action = probs.size() - 1;
        for (size_t a = 0; a < probs.size(); ++a) {
            cumulative += probs[a];
            if (u < cumulative) {
                action = a;
                break;
            }
        }
        group.actions.push_back(static_cast<int>(action));
    }
    return group;
}

std::uint64_t mix_seed(std::uint64_t state) {
    // splitmix64 finalizer
    state += 0x9e3779b97f4a7c15ULL;
    state = (state ^ (state >> 30)) * 0xbf58476d1ce4e5b9ULL;
    state = (state ^ (state >> 27)) * 0x94d049bb133111ebULL;
    return state ^ (state >> 31);
}

}  // namespace rlvr
