"""Multi-timescale PPO lab.

Trains small actor-critic policies against a set of discount factors at
once, routes the per-discount advantages into the policy objective through
interchangeable strategies (learned attention, TD-error weighting, or hard
long-horizon selection), and logs the diagnostics needed to see each
strategy's characteristic failure or fix.
"""

from .advantage import (GammaSet, MultiGammaAdvantages, batch_normalize,
                        compute_gae, td_residuals, value_bound)
from .diagnostics import (DiagnosticsRecord, ReliabilitySummary, hack_rate,
                          long_adv_variance, reliability_summary, router_entropy)
from .envs import (DistractorChain, EnvSpec, MiniLander, OracleSolution,
                   StepResult, make_env, optimal_return_oracle)
from .harness import RunArtifact, TrainConfig, run_experiment, sweep
from .nn import Adam, DenseNet, NonFiniteError, Tensor, backward, gradients
from .ppo import (MultiHeadCritic, PpoHyper, Trainer, Trajectory,
                  clip_objective, collect_rollout, critic_loss)
from .routing import (RouterOutput, make_router, route_attention,
                      route_by_error, route_decoupled, softmax)

__version__ = "0.1.0"

__all__ = [
    "Adam", "DenseNet", "DiagnosticsRecord", "DistractorChain", "EnvSpec",
    "GammaSet", "MiniLander", "MultiGammaAdvantages", "MultiHeadCritic",
    "NonFiniteError", "OracleSolution", "PpoHyper", "ReliabilitySummary",
    "RouterOutput", "RunArtifact", "StepResult", "Tensor", "TrainConfig",
    "Trainer", "Trajectory", "backward", "batch_normalize", "clip_objective",
    "collect_rollout", "compute_gae", "critic_loss", "gradients", "hack_rate",
    "long_adv_variance", "make_env", "make_router", "optimal_return_oracle",
    "reliability_summary", "route_attention", "route_by_error",
    "route_decoupled", "router_entropy", "run_experiment", "softmax", "sweep",
    "td_residuals", "value_bound",
]
