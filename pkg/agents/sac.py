"""
Soft actor-critic with twin critics, learned temperature and prioritized replay.

The agent consumes Observation.features() vectors and emits raw actions in
[-1, 1]^A; StarMecEnv decodes them. train() runs the act / store / sample /
update loop and returns one TrainingLogRow per finished episode.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from slugify import slugify

from agents.nn import AdamState, DenseNet, SquashedGaussianPolicy, adam_step, load_networks, save_networks
from agents.replay import Batch, PrioritizedReplayBuffer
from core.env import Observation, StarMecEnv
from core.errors import ConfigurationError, TrainingDivergedError
from core.rollout import evaluate
from utils.console import console, get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class AgentConfig:
    """Learning hyperparameters; JSON keys are the field names."""

    gamma: float = 0.99
    lr_actor: float = 1e-4
    lr_critic: float = 1e-4
    lr_alpha: float = 3e-4
    batch_size: int = 256
    replay_capacity: int = 1_000_000
    tau_soft: float = 5e-3
    target_update_period: int = 1
    priority_exponent: float = 0.6
    is_beta_start: float = 0.4
    is_beta_end: float = 1.0
    target_entropy: Optional[float] = None    # defaults to -action_dim
    init_temperature: float = 0.1
    max_episodes: int = 5000
    steps_per_epoch: int = 100
    warmup_steps: int = 1000
    hidden: Tuple[int, ...] = (256, 256)
    total_env_steps: int = 30_000
    eval_interval: int = 25                   # episodes between evaluations
    eval_episodes: int = 5
    seed: int = 2024

    def validate(self) -> "AgentConfig":
        for name in ("lr_actor", "lr_critic", "lr_alpha", "tau_soft", "priority_exponent"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigurationError(name, f"must lie in (0, 1], got {value}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError("gamma", f"must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.is_beta_start <= 1.0 or not 0.0 <= self.is_beta_end <= 1.0:
            raise ConfigurationError("is_beta_start", "importance-sampling exponents must lie in [0, 1]")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size", "must be positive")
        if self.replay_capacity < self.batch_size:
            raise ConfigurationError("replay_capacity", "must be at least batch_size")
        if self.target_update_period < 1:
            raise ConfigurationError("target_update_period", "must be at least 1")
        if self.init_temperature <= 0.0:
            raise ConfigurationError("init_temperature", "must be positive")
        if self.total_env_steps < 1 or self.steps_per_epoch < 1:
            raise ConfigurationError("total_env_steps", "training budget must be positive")
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ConfigurationError("hidden", "hidden widths must be positive")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["hidden"] = list(self.hidden)
        return data

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AgentConfig":
        names = set(cls.field_names())
        kwargs = {}
        for key, value in data.items():
            if key not in names:
                raise ConfigurationError(key, "unknown agent key")
            kwargs[key] = tuple(value) if isinstance(value, list) else value
        return cls(**kwargs).validate()

    def with_overrides(self, **overrides: Any) -> "AgentConfig":
        return replace(self, **overrides).validate()


@dataclass
class TrainingLogRow:
    episode: int
    env_steps: int
    mean_return: float
    critic_loss: float
    actor_loss: float
    alpha: float
    eval_energy_J: float


@dataclass
class UpdateStats:
    critic_loss: float = 0.0
    actor_loss: float = 0.0
    alpha: float = 0.0


class SacAgent:
    """
    Twin-critic SAC agent owning its networks, optimizers and replay buffer.

    Args:
        obs_dim: Feature width
        act_dim: Action width
        config: Hyperparameters
        seed: Seed of the agent stream (initialization, exploration, replay)
    """

    def __init__(self, obs_dim: int, act_dim: int, config: AgentConfig = AgentConfig(),
                 seed: Optional[int] = None):
        self.config = config.validate()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        seed = config.seed if seed is None else seed
        init_seq, act_seq, replay_seq = np.random.SeedSequence(seed).spawn(3)
        init_rng = np.random.default_rng(init_seq)
        self.rng = np.random.default_rng(act_seq)

        hidden = tuple(config.hidden)
        self.actor = SquashedGaussianPolicy(obs_dim, act_dim, hidden, init_rng)
        self.critics = [DenseNet([obs_dim + act_dim, *hidden, 1], init_rng) for _ in range(2)]
        self.targets = [c.copy() for c in self.critics]
        self.log_alpha = math.log(config.init_temperature)
        self.target_entropy = -float(act_dim) if config.target_entropy is None else config.target_entropy

        self.actor_opt = AdamState.for_params(self.actor.params(), lr=config.lr_actor)
        self.critic_opts = [AdamState.for_params(c.params(), lr=config.lr_critic) for c in self.critics]
        self.alpha_opt = AdamState.for_params([np.zeros(1)], lr=config.lr_alpha)

        self.replay = PrioritizedReplayBuffer(config.replay_capacity, obs_dim, act_dim,
                                              config.priority_exponent, np.random.default_rng(replay_seq))
        self.updates = 0

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    def select_action(self, obs, deterministic: bool = False) -> np.ndarray:
        """Squashed sample (training) or squashed mean (evaluation) for one observation."""
        features = obs.features() if isinstance(obs, Observation) else np.asarray(obs, dtype=np.float64)
        return self.actor.sample(features, self.rng, deterministic=deterministic).action

    def policy(self, deterministic: bool = True):
        """Observation -> action callable for rollouts."""
        return lambda obs: self.select_action(obs, deterministic=deterministic)

    def _q(self, nets: List[DenseNet], obs: np.ndarray, actions: np.ndarray) -> List[np.ndarray]:
        x = np.concatenate([obs, actions], axis=1)
        return [net.forward(x)[:, 0] for net in nets]

    def compute_targets(self, batch: Batch) -> np.ndarray:
        """y = r + gamma (1 - done) (min target Q(s', a') - alpha log pi(a'|s'))."""
        nxt = self.actor.sample(batch.next_obs, self.rng)
        q1, q2 = self._q(self.targets, batch.next_obs, nxt.action)
        soft_value = np.minimum(q1, q2) - self.alpha * nxt.log_prob
        return batch.rewards + self.config.gamma * (1.0 - batch.dones) * soft_value

    def update_critics(self, batch: Batch) -> float:
        """
        One importance-weighted squared-TD step on both critics.

        Priorities of the sampled transitions become the mean |TD| of the two
        critics plus the replay floor.

        Returns:
            Mean of the two critic losses
        """
        y = self.compute_targets(batch)
        x = np.concatenate([batch.obs, batch.actions], axis=1)
        n = len(y)
        losses, abs_td = [], np.zeros(n)
        for critic, opt in zip(self.critics, self.critic_opts):
            q = critic.forward(x)[:, 0]
            td = q - y
            losses.append(float(np.mean(batch.weights * td ** 2)))
            abs_td += 0.5 * np.abs(td)
            grads, _ = critic.backward((2.0 * batch.weights * td / n)[:, None])
            adam_step(opt, critic.params(), grads)
        self.replay.update_priorities(batch.indices, abs_td)
        return 0.5 * (losses[0] + losses[1])

    def update_actor(self, batch: Batch) -> Tuple[float, np.ndarray]:
        """
        Reparameterized step on mean(alpha log pi(a|s) - min Q(s, a)).

        Returns:
            (actor loss, log-probabilities of the fresh actions)
        """
        obs = batch.obs
        n = len(obs)
        sample = self.actor.sample(obs, self.rng)
        x = np.concatenate([obs, sample.action], axis=1)
        q_values, input_grads = [], []
        for critic in self.critics:
            q_values.append(critic.forward(x)[:, 0])
            _, g_in = critic.backward(np.ones((n, 1)))
            input_grads.append(g_in[:, self.obs_dim:])
        use_first = q_values[0] <= q_values[1]
        q_min = np.where(use_first, q_values[0], q_values[1])
        dq_da = np.where(use_first[:, None], input_grads[0], input_grads[1])

        loss = float(np.mean(self.alpha * sample.log_prob - q_min))
        grads = self.actor.backward(sample, -dq_da / n, np.full(n, self.alpha / n))
        adam_step(self.actor_opt, self.actor.params(), grads)
        return loss, sample.log_prob

    def update_temperature(self, batch: Optional[Batch] = None,
                           log_probs: Optional[np.ndarray] = None) -> float:
        """
        Gradient step on J(alpha) = E[-alpha (log pi + target_entropy)] through log alpha.

        Returns:
            The new temperature
        """
        if log_probs is None:
            log_probs = self.actor.sample(batch.obs, self.rng).log_prob
        grad = -self.alpha * float(np.mean(log_probs + self.target_entropy))
        param = np.array([self.log_alpha])
        adam_step(self.alpha_opt, [param], [np.array([grad])])
        self.log_alpha = float(param[0])
        return self.alpha

    def soft_update_targets(self, rho: Optional[float] = None) -> None:
        rho = self.config.tau_soft if rho is None else rho
        for target, online in zip(self.targets, self.critics):
            target.soft_update_from(online, rho)

    def update(self, beta: float) -> UpdateStats:
        batch = self.replay.sample(self.config.batch_size, beta)
        critic_loss = self.update_critics(batch)
        actor_loss, log_probs = self.update_actor(batch)
        alpha = self.update_temperature(log_probs=log_probs)
        self.updates += 1
        if self.updates % self.config.target_update_period == 0:
            self.soft_update_targets()
        return UpdateStats(critic_loss=critic_loss, actor_loss=actor_loss, alpha=alpha)

    def save(self, path: Path) -> Path:
        networks = {"actor": self.actor.net, "critic1": self.critics[0], "critic2": self.critics[1],
                    "target1": self.targets[0], "target2": self.targets[1]}
        extra = {"log_alpha": self.log_alpha, "obs_dim": self.obs_dim, "act_dim": self.act_dim,
                 "agent_config": self.config.to_dict()}
        return save_networks(path, networks, extra)

    @classmethod
    def load(cls, path: Path) -> "SacAgent":
        networks, extra = load_networks(path)
        agent = cls(extra["obs_dim"], extra["act_dim"], AgentConfig.from_dict(extra["agent_config"]))
        agent.actor.net = networks["actor"]
        agent.critics = [networks["critic1"], networks["critic2"]]
        agent.targets = [networks["target1"], networks["target2"]]
        agent.log_alpha = float(extra["log_alpha"])
        agent.actor_opt = AdamState.for_params(agent.actor.params(), lr=agent.config.lr_actor)
        agent.critic_opts = [AdamState.for_params(c.params(), lr=agent.config.lr_critic) for c in agent.critics]
        return agent


def checkpoint_name(*parts) -> str:
    return slugify("-".join(str(p) for p in parts)) + ".json"


def _beta_at(config: AgentConfig, step: int, total: int) -> float:
    frac = min(1.0, step / max(1, total))
    return config.is_beta_start + frac * (config.is_beta_end - config.is_beta_start)


def evaluate_energy(agent: SacAgent, env: StarMecEnv, seeds) -> float:
    """Mean total energy of deterministic-policy episodes."""
    results = evaluate(env, agent.policy(deterministic=True), seeds)
    return float(np.mean([r.total_energy for r in results]))


def train(env: StarMecEnv, config: AgentConfig, agent: Optional[SacAgent] = None,
          checkpoint_dir: Optional[Path] = None, run_name: str = "run",
          show_progress: bool = True) -> Tuple[SacAgent, List[TrainingLogRow]]:
    """
    Train an agent on env for config.total_env_steps environment steps.

    Exploration is uniform during the warmup; afterwards every environment
    step is followed by one gradient update. Evaluation runs on a spawned
    environment with fixed seeds every eval_interval episodes.

    Args:
        env: Training environment
        config: Hyperparameters
        agent: Agent to continue training; a fresh one is built when None
        checkpoint_dir: Where a diverged run dumps its networks
        run_name: Slug source for checkpoint names
        show_progress: Draw a rich progress bar

    Returns:
        (trained agent, one TrainingLogRow per finished episode)

    Raises:
        TrainingDivergedError: when a loss becomes non-finite
    """
    config = config.validate()
    agent = agent or SacAgent(env.obs_dim, env.action_dim, config)
    if agent.act_dim != env.action_dim or agent.obs_dim != env.obs_dim:
        raise ConfigurationError("action_dim", "agent and environment dimensions differ")

    total = min(config.total_env_steps, config.max_episodes * env.decision_steps)
    eval_env = env.spawn(config.seed + 1)
    eval_seeds = [config.seed * 1000 + i for i in range(config.eval_episodes)]
    window = max(1, config.steps_per_epoch // env.decision_steps)

    log: List[TrainingLogRow] = []
    returns: List[float] = []
    stats = UpdateStats(alpha=agent.alpha)
    eval_energy = float("nan")
    steps = 0
    episode = 0
    started = time.perf_counter()

    progress = Progress(TextColumn("[bold blue]{task.description}"), BarColumn(),
                        TextColumn("{task.completed}/{task.total} steps"), TimeElapsedColumn(),
                        console=console, disable=not show_progress, transient=True)
    with progress:
        task = progress.add_task(f"Training {run_name}", total=total)
        while steps < total:
            obs = env.reset()
            done = False
            episode_return = 0.0
            while not done:
                features = obs.features()
                if steps < config.warmup_steps:
                    action = agent.rng.uniform(-1.0, 1.0, size=agent.act_dim)
                else:
                    action = agent.select_action(features)
                next_obs, reward, done, _ = env.step(action)
                agent.replay.add(features, action, reward, next_obs.features(), done)
                episode_return += reward
                steps += 1
                obs = next_obs

                if steps > config.warmup_steps and len(agent.replay) >= config.batch_size:
                    stats = agent.update(_beta_at(config, steps, total))
                    if not (math.isfinite(stats.critic_loss) and math.isfinite(stats.actor_loss)):
                        path = None
                        if checkpoint_dir is not None:
                            path = agent.save(Path(checkpoint_dir) / ("diverged-" + checkpoint_name(run_name)))
                        raise TrainingDivergedError(
                            f"non-finite loss at step {steps} (critic={stats.critic_loss}, actor={stats.actor_loss})",
                            checkpoint_path=str(path) if path else None,
                        )
            progress.update(task, completed=min(steps, total))

            returns.append(episode_return)
            if episode % config.eval_interval == 0 or steps >= total:
                eval_energy = evaluate_energy(agent, eval_env, eval_seeds)
                logger.info("episode %d: eval energy %.4f J, alpha %.4g", episode, eval_energy, agent.alpha)
            log.append(TrainingLogRow(
                episode=episode,
                env_steps=steps,
                mean_return=float(np.mean(returns[-window:])),
                critic_loss=stats.critic_loss,
                actor_loss=stats.actor_loss,
                alpha=agent.alpha,
                eval_energy_J=eval_energy,
            ))
            episode += 1

    logger.info("trained %s: %d episodes, %d steps in %.1fs", run_name, episode, steps,
                time.perf_counter() - started)
    return agent, log
