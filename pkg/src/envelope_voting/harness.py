"""Scenario files, seeded scenario generation and single-round execution."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .agents import (
    Belief,
    check_valuations,
    expected_utility,
    feasible_p_bound,
    optimal_deposits,
    sybil_expected_utility,
)
from .exceptions import BeliefInfeasibleError, ConfigError, MechanismError, ScenarioError
from .mechanism import (
    ATOL,
    TieBreak,
    deposits_from_votes,
    scale_param,
    settle_round,
)
from .seeding import trial_rng
from .verification import SybilPlan, random_belief

SCENARIO_VERSION = 1


@dataclass
class Player:
    """One player in a scenario.

    ``deposits`` pins a single envelope's deposits ("fixed deposits mode")
    and bypasses optimal play; ``valuations`` may then be omitted.
    """

    valuations: list | None = None
    belief: Belief | None = None
    sybil: SybilPlan | None = None
    deposits: list | None = None
    name: str = ""

    def to_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.valuations is not None:
            out["valuations"] = [float(v) for v in self.valuations]
        if self.belief is not None:
            out["belief"] = {"p0": self.belief.p0.tolist(), "p": self.belief.p}
        if self.deposits is not None:
            out["deposits"] = [float(v) for v in self.deposits]
        if self.sybil is not None:
            plan: dict = {"split": self.sybil.split.tolist()}
            if self.sybil.strategies is not None:
                plan["strategies"] = self.sybil.strategies.tolist()
            out["sybil"] = plan
        return out


@dataclass
class Scenario:
    m: int
    omega: float
    players: list[Player]
    tie_break: TieBreak = TieBreak.LOWEST_INDEX
    seed: int = 0

    @property
    def n(self) -> int:
        return len(self.players)

    def to_dict(self) -> dict:
        return {
            "version": SCENARIO_VERSION,
            "m": self.m,
            "omega": self.omega,
            "tie_break": TieBreak(self.tie_break).value,
            "seed": self.seed,
            "players": [p.to_dict() for p in self.players],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def validate(self) -> "Scenario":
        """Check every invariant; raise :class:`ScenarioError` on the first failure."""
        if isinstance(self.m, bool) or not isinstance(self.m, (int, np.integer)) or self.m < 2:
            raise ScenarioError(f"m must be an integer >= 2, got {self.m!r}")
        if isinstance(self.omega, bool) or not isinstance(self.omega, (int, float)) or not self.omega > 0:
            raise ScenarioError(f"omega must be positive, got {self.omega!r}")
        if not self.players:
            raise ScenarioError("scenario has no players")
        try:
            TieBreak(self.tie_break)
        except ValueError:
            raise ScenarioError(f"unknown tie-break policy {self.tie_break!r}") from None
        a_n = scale_param(self.n)
        for idx, pl in enumerate(self.players):
            where = f"player {idx}"
            if pl.deposits is None and pl.valuations is None:
                raise ScenarioError(f"{where}: needs valuations or fixed deposits")
            if pl.deposits is not None:
                d = np.asarray(pl.deposits, dtype=float)
                if d.shape != (self.m,) or np.any(d < 0) or not np.all(np.isfinite(d)):
                    raise ScenarioError(f"{where}: deposits must be {self.m} non-negative numbers")
                if pl.sybil is not None:
                    raise ScenarioError(f"{where}: fixed deposits and a Sybil plan are exclusive")
            if pl.valuations is not None:
                u = np.asarray(pl.valuations, dtype=float)
                if u.shape != (self.m,):
                    raise ScenarioError(f"{where}: expected {self.m} valuations, got {u.size}")
                try:
                    check_valuations(u, self.omega)
                except MechanismError as exc:
                    raise ScenarioError(f"{where}: {exc}") from None
            if pl.belief is not None:
                if pl.belief.m != self.m:
                    raise ScenarioError(f"{where}: belief has {pl.belief.m} alternatives, expected {self.m}")
                if pl.belief.p > feasible_p_bound(pl.belief.p0, self.omega, a_n) * (1 + 1e-12):
                    raise ScenarioError(f"{where}: belief p={pl.belief.p} exceeds the feasible bound")
            if pl.sybil is not None:
                if pl.valuations is None:
                    raise ScenarioError(f"{where}: a Sybil plan needs valuations")
                if pl.sybil.split.shape[1] != self.m:
                    raise ScenarioError(f"{where}: Sybil split has wrong width")
                if not np.allclose(pl.sybil.valuation(), pl.valuations, atol=ATOL, rtol=0):
                    raise ScenarioError(f"{where}: Sybil split does not add up to the valuations")
        return self


def _player_from_dict(raw: dict, idx: int) -> Player:
    if not isinstance(raw, dict):
        raise ScenarioError(f"player {idx}: expected an object")
    unknown = set(raw) - {"name", "valuations", "belief", "deposits", "sybil"}
    if unknown:
        raise ScenarioError(f"player {idx}: unknown fields {sorted(unknown)}")
    try:
        belief = None
        if raw.get("belief") is not None:
            belief = Belief(np.asarray(raw["belief"]["p0"], dtype=float), float(raw["belief"]["p"]))
        sybil = None
        if raw.get("sybil") is not None:
            sybil = SybilPlan(raw["sybil"]["split"], raw["sybil"].get("strategies"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"player {idx}: {exc}") from None
    return Player(
        valuations=raw.get("valuations"),
        belief=belief,
        sybil=sybil,
        deposits=raw.get("deposits"),
        name=str(raw.get("name", f"player-{idx}")),
    )


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    for key in ("m", "omega", "players"):
        if key not in raw:
            raise ScenarioError(f"missing field {key!r}")
    try:
        tie = TieBreak(raw.get("tie_break", TieBreak.LOWEST_INDEX.value))
    except ValueError:
        raise ScenarioError(f"unknown tie-break policy {raw.get('tie_break')!r}") from None
    if not isinstance(raw["players"], list):
        raise ScenarioError("players must be a list")
    scenario = Scenario(
        m=raw["m"],
        omega=raw["omega"],
        players=[_player_from_dict(p, i) for i, p in enumerate(raw["players"])],
        tie_break=tie,
        seed=int(raw.get("seed", 0)),
    )
    return scenario.validate()


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"no such scenario file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: malformed JSON ({exc})") from None
    return scenario_from_dict(raw)


# -------------------------------------------------------------------- generation


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    m: int
    omega: float = 100.0
    sybil_probability: float = 0.0
    max_envelopes: int = 3

    def validate(self) -> None:
        if self.n < 1 or self.m < 2 or not self.omega > 0:
            raise ConfigError(f"need n >= 1, m >= 2, omega > 0; got {self}")
        if not 0.0 <= self.sybil_probability <= 1.0 or self.max_envelopes < 2:
            raise ConfigError("sybil_probability must lie in [0, 1] and max_envelopes >= 2")


def generate_scenario(config: GeneratorConfig, seed: int, index: int = 0) -> Scenario:
    """Uniform valuations on ``[0, omega]``, simplex baselines, ``p`` uniform on ``(0, p_max]``."""
    config.validate()
    rng = trial_rng(seed, index)
    a_n = scale_param(config.n)
    players = []
    for i in range(config.n):
        u = rng.uniform(0.0, config.omega, size=config.m)
        belief = random_belief(rng, config.m, config.omega, a_n)
        plan = None
        if config.sybil_probability and rng.random() < config.sybil_probability:
            w = int(rng.integers(2, config.max_envelopes + 1))
            weights = rng.dirichlet(np.ones(w), size=config.m).T
            split = weights * u
            split[-1] = np.maximum(u - split[:-1].sum(axis=0), 0.0)
            plan = SybilPlan(split)
        players.append(Player(valuations=u.tolist(), belief=belief, sybil=plan, name=f"player-{i}"))
    return Scenario(m=config.m, omega=config.omega, players=players, seed=int(seed)).validate()


# ---------------------------------------------------------------------- running


@dataclass
class PlayerResult:
    name: str
    envelopes: int
    deposited: float
    refunded: float
    realized_utility: float | None
    expected_utility: float | None


@dataclass
class RunReport:
    scenario_digest: str
    selected: int
    scale: float
    envelopes: int
    surplus: float
    players: list[PlayerResult] = field(default_factory=list)
    properties: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunReport":
        raw = dict(raw)
        raw["players"] = [PlayerResult(**p) for p in raw.get("players", [])]
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    CSV_FIELDS = ("scenario_digest", "selected", "scale", "envelopes", "surplus",
                  "player", "player_envelopes", "deposited", "refunded",
                  "realized_utility", "expected_utility")

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow(self.CSV_FIELDS)
        for p in self.players:
            writer.writerow([
                self.scenario_digest, self.selected, repr(self.scale), self.envelopes,
                repr(self.surplus), p.name, p.envelopes, repr(p.deposited), repr(p.refunded),
                "" if p.realized_utility is None else repr(p.realized_utility),
                "" if p.expected_utility is None else repr(p.expected_utility),
            ])
        return buf.getvalue()


def _envelopes_for(player: Player, a_h: float) -> np.ndarray:
    if player.deposits is not None:
        return np.asarray([player.deposits], dtype=float)
    if player.sybil is not None:
        plan = player.sybil
        if plan.strategies is None:
            return np.array([optimal_deposits(uq) for uq in plan.split])
        rows = []
        for x in plan.strategies:
            m = x.size
            shift = max(0.0, float(-(a_h * (m - 1) ** 2 / m * x).min()))
            rows.append(deposits_from_votes(x, a_h, shift))
        return np.array(rows)
    return optimal_deposits(player.valuations)[None, :]


def run_scenario(scenario: Scenario) -> RunReport:
    """Settle one round in which every player submits its envelope(s)."""
    scenario.validate()
    counts = [1 if p.sybil is None else p.sybil.w for p in scenario.players]
    h = sum(counts)
    a_h = scale_param(h)
    blocks = [_envelopes_for(p, a_h) for p in scenario.players]
    D = np.vstack(blocks)
    try:
        outcome = settle_round(D, scenario.tie_break)
    except MechanismError as exc:
        raise ScenarioError(f"scenario {scenario.digest()}: {exc}") from exc

    results = []
    start = 0
    for p, w in zip(scenario.players, counts):
        rows = slice(start, start + w)
        start += w
        deposited = float(D[rows].sum())
        refunded = float(outcome.refunds[rows].sum())
        realized = expected = None
        if p.valuations is not None:
            u = np.asarray(p.valuations, dtype=float)
            realized = float(u[outcome.selected]) - deposited + refunded
            if p.belief is not None:
                X = outcome.votes[rows]
                try:
                    if w == 1:
                        expected = expected_utility(u, p.belief, X[0], a_h)
                    else:
                        expected = sybil_expected_utility(u, p.belief, X, h - w)
                except BeliefInfeasibleError as exc:
                    raise ScenarioError(f"scenario {scenario.digest()}, {p.name}: {exc}") from exc
        results.append(PlayerResult(p.name, w, deposited, refunded, realized, expected))

    return RunReport(
        scenario_digest=scenario.digest(),
        selected=outcome.selected,
        scale=a_h,
        envelopes=h,
        surplus=outcome.surplus,
        players=results,
    )


def worked_example_scenario() -> Scenario:
    """Two envelopes over three alternatives whose votes are (3, 1, -4) and (-3, 2, 1)."""
    a = scale_param(2)
    d1 = deposits_from_votes([3.0, 1.0, -4.0], a, 12.0)
    d2 = deposits_from_votes([-3.0, 2.0, 1.0], a, 9.0)
    return Scenario(
        m=3,
        omega=100.0,
        players=[Player(deposits=d1.tolist(), name="participant-1"),
                 Player(deposits=d2.tolist(), name="participant-2")],
    ).validate()
