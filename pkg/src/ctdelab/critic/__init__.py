from .critics import CRITIC_KINDS, CriticVariant, distinct_state_values
from .expectation import enumerate_paths, expected_actor_gradient
from .losses import coma_advantage, coma_advantages, mappo_actor_loss, mappo_critic_loss, policy_entropy
from .maddpg import (DeterministicActor, JointActionCritic, MADDPGConfig, MADDPGResult, SumGameSpec,
                     maddpg_actor_grad, maddpg_actor_objective, maddpg_critic_loss, policy_return, train_maddpg)
from .study import (STUDY_DEFAULTS, StudyReport, belief_consistency, critic_study, critic_value,
                    heard_left_twice, history_features, study_config)
from .train import (AC_ALGORITHMS, ACConfig, ACResult, ActorCriticNets, LocalCritic, actor_critic_losses,
                    evaluate_actors, greedy_policy, joint_probs, make_sampler, ppo_update, sample_actions,
                    stochastic_policy, train_actor_critic)

__all__ = [
    "CRITIC_KINDS", "CriticVariant", "distinct_state_values", "enumerate_paths", "expected_actor_gradient",
    "coma_advantage", "coma_advantages", "mappo_actor_loss", "mappo_critic_loss", "policy_entropy",
    "DeterministicActor", "JointActionCritic", "MADDPGConfig", "MADDPGResult", "SumGameSpec",
    "maddpg_actor_grad", "maddpg_actor_objective", "maddpg_critic_loss", "policy_return", "train_maddpg", "StudyReport",
    "belief_consistency", "critic_study", "critic_value", "heard_left_twice", "history_features",
    "STUDY_DEFAULTS", "study_config", "AC_ALGORITHMS", "ACConfig",
    "ACResult", "ActorCriticNets", "LocalCritic", "actor_critic_losses", "evaluate_actors", "greedy_policy",
    "joint_probs", "make_sampler", "ppo_update", "sample_actions", "stochastic_policy", "train_actor_critic",
]
