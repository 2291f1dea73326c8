from .buffer import EpisodeBuffer
from .igm import additive_fit, advantage_igm_check, argmax_set, igm_check
from .losses import (ALGORITHMS, FactorizationNets, drqn_loss, drqn_target, qmix_loss, qplex_loss,
                     qtran_losses, total_loss, vdn_loss, wqmix_losses, wqmix_weight)
from .mixers import (MixerQMIX, MixerVDN, QPLEXHeads, QStarMixer, QTRANHeads, dueling, qmix_forward,
                     qplex_forward, qtran_value_identity, vdn_joint)
from .train import (TargetBank, VFConfig, VFResult, build_nets, eps_greedy, evaluate_greedy, greedy_policy,
                    make_actor, train_value_factorization)

__all__ = [
    "EpisodeBuffer", "additive_fit", "advantage_igm_check", "argmax_set", "igm_check", "ALGORITHMS",
    "FactorizationNets", "drqn_loss", "drqn_target", "qmix_loss", "qplex_loss", "qtran_losses", "total_loss",
    "vdn_loss", "wqmix_losses", "wqmix_weight", "MixerQMIX", "MixerVDN", "QPLEXHeads", "QStarMixer",
    "QTRANHeads", "dueling", "qmix_forward", "qplex_forward", "qtran_value_identity", "vdn_joint", "TargetBank",
    "VFConfig", "VFResult", "build_nets", "eps_greedy", "evaluate_greedy", "greedy_policy", "make_actor",
    "train_value_factorization",
]
