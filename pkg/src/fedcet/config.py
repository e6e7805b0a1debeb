"""Experiment configuration, resolution, and run manifests.

Configs are flat ``key = value`` text files; every key has a default
reproducing the benchmark setup (10 clients, 10 samples each, dimension
60, two local steps, targets uniform on [-10, 10), rate search with
h = 0.001 of the starting rate).  Unknown keys are errors.  A manifest
written next to a run's CSV output echoes the resolved configuration and
hashes, and is sufficient to replay the run byte for byte.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import __version__
from .algorithms import HyperParams
from .data import gen_data, problem_digest, vector_digest
from .errors import ConfigurationError
from .harness import ALGORITHMS, StopRule
from .lr_search import RateReport, c_max, rho1, rho2, initial_bound, search_with_fraction


@dataclass(frozen=True)
class ExperimentConfig:
    num_clients: int = 10
    samples_per_client: int = 10
    dim: int = 60
    tau: int = 2
    alpha: float | str = "auto"
    c: float | str = "auto"
    h_frac: float = 0.001
    data_lo: float = -10.0
    data_hi: float = 10.0
    algorithms: tuple[str, ...] = ("fedcet", "fedavg", "scaffold")
    seeds: tuple[int, ...] = (1, 2, 3)
    max_rounds: int = 200_000
    tol: float = 1e-10
    divergence_cap: float = 1e12
    downlink: str = "broadcast"
    x_init_value: float = 0.0
    out_dir: str = "results"

    def __post_init__(self):
        if self.downlink not in ("broadcast", "unicast"):
            raise ConfigurationError(f"downlink must be broadcast or unicast, got {self.downlink!r}")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {name!r}; choose from {ALGORITHMS}")
        if not self.algorithms:
            raise ConfigurationError("need at least one algorithm")
        if not self.seeds:
            raise ConfigurationError("need at least one seed")
        if self.data_lo > self.data_hi:
            raise ConfigurationError(f"data range is empty: {self.data_lo} > {self.data_hi}")
        if isinstance(self.alpha, str) and self.alpha != "auto":
            raise ConfigurationError(f"alpha must be a number or 'auto', got {self.alpha!r}")
        if isinstance(self.c, str) and self.c != "auto":
            raise ConfigurationError(f"c must be a number or 'auto', got {self.c!r}")

    def stop_rule(self) -> StopRule:
        return StopRule(max_rounds=self.max_rounds, tol=self.tol,
                        divergence_cap=self.divergence_cap)


_INT_KEYS = {"num_clients", "samples_per_client", "dim", "tau", "max_rounds"}
_FLOAT_KEYS = {"h_frac", "tol", "divergence_cap", "x_init_value"}
_AUTO_FLOAT_KEYS = {"alpha", "c"}
_STR_KEYS = {"downlink", "out_dir"}
_LIST_KEYS = {"algorithms", "seeds"}
_RANGE_KEYS = {"data_range"}

CONFIG_KEYS = _INT_KEYS | _FLOAT_KEYS | _AUTO_FLOAT_KEYS | _STR_KEYS | _LIST_KEYS | _RANGE_KEYS


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return {key: int(raw)}
        if key in _FLOAT_KEYS:
            return {key: float(raw)}
        if key in _AUTO_FLOAT_KEYS:
            return {key: "auto" if raw == "auto" else float(raw)}
        if key in _STR_KEYS:
            return {key: raw}
        if key == "algorithms":
            return {key: tuple(p.strip() for p in raw.split(",") if p.strip())}
        if key == "seeds":
            return {key: tuple(int(p) for p in raw.split(",") if p.strip())}
        if key == "data_range":
            lo, hi = (p.strip() for p in raw.split(","))
            return {"data_lo": float(lo), "data_hi": float(hi)}
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
    raise ConfigurationError(f"unknown config key {key!r}")


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    updates = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in stripped.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"line {lineno}: unknown config key {key!r}")
        updates.update(_parse_value(key, raw))
    cfg = base if base is not None else ExperimentConfig()
    return replace(cfg, **updates)


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), base=base)


@dataclass(frozen=True)
class ResolvedRun:
    """Hyperparameters shared by all seeds of one experiment."""

    hp: HyperParams
    report: RateReport
    alpha0_bound: float


def resolve_hyperparams(cfg: ExperimentConfig, L: float, mu: float) -> ResolvedRun:
    """Turn 'auto' learning rate / mixing weight into concrete values.

    The rate comes from the feasibility scan; manual values are accepted
    as long as the basic protocol constraints hold, and their predicted
    contraction factors are still reported.
    """
    if cfg.alpha == "auto":
        alpha, report = search_with_fraction(mu, L, cfg.tau, cfg.h_frac)
    else:
        alpha = float(cfg.alpha)
        report = RateReport(
            alpha=alpha,
            rho1=rho1(alpha, mu, L, cfg.tau),
            rho2=rho2(alpha, mu, L, cfg.tau),
            rho=max(rho1(alpha, mu, L, cfg.tau), rho2(alpha, mu, L, cfg.tau)),
            c_max=c_max(alpha, mu),
        )
    c = report.c_max if cfg.c == "auto" else float(cfg.c)
    hp = HyperParams(
        num_clients=cfg.num_clients,
        dim=cfg.dim,
        tau=cfg.tau,
        alpha=alpha,
        c=c,
        L=L,
        mu=mu,
    )
    return ResolvedRun(hp=hp, report=report, alpha0_bound=initial_bound(mu, L, cfg.tau))


def build_problem(cfg: ExperimentConfig, seed: int):
    return gen_data(cfg.num_clients, cfg.samples_per_client, cfg.dim,
                    cfg.data_lo, cfg.data_hi, seed)


# ---------------------------------------------------------------------------
# Manifest


def _config_lines(cfg: ExperimentConfig) -> list[str]:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in ("data_lo", "data_hi"):
            continue
        if isinstance(v, tuple):
            lines.append(f"{f.name} = {','.join(str(p) for p in v)}")
        else:
            lines.append(f"{f.name} = {v}")
    lines.append(f"data_range = {cfg.data_lo},{cfg.data_hi}")
    return lines


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, cfg: ExperimentConfig, resolved: ResolvedRun,
                   per_seed: dict[int, dict[str, str]]) -> None:
    """Write the replayable record of a run.

    per_seed maps each seed to its digests: the problem data, the
    optimum, and one CSV hash per algorithm.
    """
    lines = [f"tool_version = {__version__}", ""]
    lines += ["# configuration"] + _config_lines(cfg)
    lines += [
        "",
        "# resolved values",
        f"resolved_alpha = {resolved.hp.alpha:.17g}",
        f"resolved_c = {resolved.hp.c:.17g}",
        f"L = {resolved.hp.L:.17g}",
        f"mu = {resolved.hp.mu:.17g}",
        f"alpha0_bound = {resolved.alpha0_bound:.17g}",
        f"rho1 = {resolved.report.rho1:.17g}",
        f"rho2 = {resolved.report.rho2:.17g}",
        f"rho_pred = {resolved.report.rho:.17g}",
        "",
        "# per-seed digests",
    ]
    for seed in sorted(per_seed):
        for key, value in sorted(per_seed[seed].items()):
            lines.append(f"{key}.seed{seed} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> tuple[ExperimentConfig, dict[str, str]]:
    """Parse a manifest back into its config and its recorded values."""
    config_lines = []
    extras: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        stripped = line.split("#", 1)[0].strip()
        if not stripped or "=" not in stripped:
            continue
        key, raw = (p.strip() for p in stripped.split("=", 1))
        if key in CONFIG_KEYS:
            config_lines.append(stripped)
        else:
            extras[key] = raw
    cfg = parse_config_text("\n".join(config_lines))
    return cfg, extras
