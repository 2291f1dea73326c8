from .model import (DecPomdpModel, belief_filter, decode_joint, encode_joint, joint_table,
                    restrict_actions, sample_step)
from .model_io import format_model, load_model, parse_model, save_model
from .policy import (JointDeterministicPolicy, JointHistory, JointPolicy, JointStochasticPolicy,
                     LocalHistory, action_observation_histories, observation_sequences)
from .exact import (OptimalResult, brute_force_optimal, count_policies, exact_policy_value,
                    exact_q_value, history_belief, joint_policy_count, monte_carlo_returns,
                    monte_carlo_value, reachable_histories, tabulate_policy)

__all__ = [
    "DecPomdpModel", "belief_filter", "decode_joint", "encode_joint", "joint_table",
    "restrict_actions", "sample_step", "format_model", "load_model", "parse_model", "save_model",
    "JointDeterministicPolicy", "JointHistory", "JointPolicy", "JointStochasticPolicy",
    "LocalHistory", "action_observation_histories", "observation_sequences", "OptimalResult",
    "brute_force_optimal", "count_policies", "exact_policy_value", "exact_q_value",
    "history_belief", "joint_policy_count", "monte_carlo_returns", "monte_carlo_value",
    "reachable_histories", "tabulate_policy",
]
