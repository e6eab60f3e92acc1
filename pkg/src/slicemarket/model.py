"""Domain model of the slicing market.

A scenario describes cells holding capacity-constrained resources, user
classes with per-unit-rate base demands, and budget-constrained service
providers (SPs) that serve class/cell pairs under an alpha-fairness
criterion.  Solvers operate on a normalized view in which every resource
capacity is rescaled to 1 and demands become fractions of the whole
resource per unit service rate; all file I/O stays in physical units.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

SCHEMA_VERSION = 1

#: Budgets must sum to one within this tolerance.
BUDGET_SUM_TOL = 1e-12


class ScenarioError(ValueError):
    """Raised when a scenario violates a structural invariant."""


@dataclass(frozen=True)
class ResourceDef:
    """A resource pool at one cell, capacity in native physical units."""

    name: str
    capacity: float


@dataclass(frozen=True)
class CellDef:
    id: str
    resources: tuple[ResourceDef, ...]


@dataclass(frozen=True)
class ClassDef:
    """A user class; ``demand[r]`` is the physical amount of resource ``r``
    needed per unit service rate (the base demand vector)."""

    name: str
    demand: dict[str, float]


@dataclass(frozen=True)
class SupportEntry:
    """One (cell, class) pair served by a provider.

    ``weight`` defaults to ``users ** alpha`` for finite alpha and to
    ``users`` when alpha is infinite (where ``users ** alpha`` diverges and
    the max-min form weighs classes by their population).
    """

    cell: str
    klass: str
    users: int
    weight: float | None = None


@dataclass(frozen=True)
class ProviderDef:
    name: str
    budget: float
    alpha: float
    support: tuple[SupportEntry, ...]


@dataclass(frozen=True)
class ScenarioSpec:
    """A full market instance in physical units."""

    cells: tuple[CellDef, ...]
    classes: tuple[ClassDef, ...]
    sps: tuple[ProviderDef, ...]

    def class_by_name(self, name: str) -> ClassDef:
        for k in self.classes:
            if k.name == name:
                return k
        raise KeyError(name)

    def cell_by_id(self, cell_id: str) -> CellDef:
        for c in self.cells:
            if c.id == cell_id:
                return c
        raise KeyError(cell_id)

    def with_alphas(self, alpha: float) -> "ScenarioSpec":
        """Copy with every SP's fairness parameter set to ``alpha``.

        Defaulted weights are recomputed downstream from the new alpha;
        explicit weights are kept as supplied.
        """
        return replace(self, sps=tuple(replace(sp, alpha=alpha) for sp in self.sps))

    def with_budgets(self, budgets: dict[str, float]) -> "ScenarioSpec":
        sps = tuple(replace(sp, budget=budgets[sp.name]) for sp in self.sps)
        return replace(self, sps=sps)

    def with_users(self, users: dict[tuple[str, str, str], int]) -> "ScenarioSpec":
        """Copy with user counts replaced per (sp, cell, class) key."""
        sps = []
        for sp in self.sps:
            entries = tuple(
                replace(e, users=users.get((sp.name, e.cell, e.klass), e.users))
                for e in sp.support
            )
            sps.append(replace(sp, support=entries))
        return replace(self, sps=tuple(sps))


def validate_scenario(spec: ScenarioSpec) -> None:
    """Check structural invariants; raises :class:`ScenarioError`.

    Enforced: positive capacities, positive demands on consumed resources,
    budgets summing to 1, alpha >= 0, nonnegative integer user counts,
    every supported class existing at its cell with all consumed resources
    present there.
    """
    if not spec.cells:
        raise ScenarioError("scenario has no cells")
    if not spec.sps:
        raise ScenarioError("scenario has no service providers")
    seen_cells: set[str] = set()
    for cell in spec.cells:
        if cell.id in seen_cells:
            raise ScenarioError(f"duplicate cell id {cell.id!r}")
        seen_cells.add(cell.id)
        names = set()
        for res in cell.resources:
            if res.name in names:
                raise ScenarioError(f"duplicate resource {res.name!r} at cell {cell.id!r}")
            names.add(res.name)
            if not (res.capacity > 0) or not math.isfinite(res.capacity):
                raise ScenarioError(
                    f"capacity of {res.name!r} at cell {cell.id!r} must be positive"
                )
    class_names = set()
    for k in spec.classes:
        if k.name in class_names:
            raise ScenarioError(f"duplicate class {k.name!r}")
        class_names.add(k.name)
        if not k.demand:
            raise ScenarioError(f"class {k.name!r} consumes no resources")
        for r, d in k.demand.items():
            if not (d > 0) or not math.isfinite(d):
                raise ScenarioError(f"class {k.name!r} demand for {r!r} must be positive")

    total_budget = 0.0
    sp_names = set()
    for sp in spec.sps:
        if sp.name in sp_names:
            raise ScenarioError(f"duplicate SP {sp.name!r}")
        sp_names.add(sp.name)
        if not (sp.budget > 0):
            raise ScenarioError(f"SP {sp.name!r} budget must be positive")
        total_budget += sp.budget
        if math.isnan(sp.alpha) or sp.alpha < 0:
            raise ScenarioError(f"SP {sp.name!r} alpha must be >= 0")
        seen = set()
        for e in sp.support:
            if (e.cell, e.klass) in seen:
                raise ScenarioError(
                    f"SP {sp.name!r} lists ({e.cell!r}, {e.klass!r}) twice"
                )
            seen.add((e.cell, e.klass))
            if e.klass not in class_names:
                raise ScenarioError(f"SP {sp.name!r} supports unknown class {e.klass!r}")
            if e.cell not in seen_cells:
                raise ScenarioError(f"SP {sp.name!r} supports unknown cell {e.cell!r}")
            if e.users < 0 or e.users != int(e.users):
                raise ScenarioError(
                    f"user count for ({sp.name!r}, {e.cell!r}, {e.klass!r}) "
                    "must be a nonnegative integer"
                )
            if e.weight is not None and not (e.weight > 0):
                raise ScenarioError(
                    f"weight for ({sp.name!r}, {e.cell!r}, {e.klass!r}) must be positive"
                )
            cell = spec.cell_by_id(e.cell)
            have = {r.name for r in cell.resources}
            demand = spec.class_by_name(e.klass).demand
            missing = set(demand) - have
            if missing:
                raise ScenarioError(
                    f"class {e.klass!r} needs {sorted(missing)} absent at cell {e.cell!r}"
                )
    if abs(total_budget - 1.0) > BUDGET_SUM_TOL:
        raise ScenarioError(f"budgets sum to {total_budget!r}, expected 1")


def effective_weight(users: int, alpha: float, weight: float | None) -> float:
    """Class weight: explicit if given, else ``users**alpha`` (``users`` at
    alpha=inf)."""
    if weight is not None:
        return float(weight)
    if math.isinf(alpha):
        return float(users)
    w = float(users) ** alpha
    if not math.isfinite(w):
        raise ScenarioError(
            f"default weight {users}**{alpha} overflows; supply explicit weights"
        )
    return w


@dataclass(frozen=True)
class MarketIndex:
    """Compiled array view of a scenario over its supported (sp, cell, class)
    triples and (cell, resource) goods.

    Bid tensors, allocations and demand matrices are dense ``[n_triples,
    n_goods]`` arrays, zero outside each triple's consumed goods.  Capacities
    are normalized to 1; ``capacity[g]`` keeps the physical scale for
    denormalization.
    """

    goods: tuple[tuple[str, str], ...]
    capacity: np.ndarray
    sp_names: tuple[str, ...]
    budgets: np.ndarray
    alphas: np.ndarray
    triples: tuple[tuple[str, str, str], ...]
    sp_of: np.ndarray
    users: np.ndarray
    weights: np.ndarray
    demand: np.ndarray
    consumed: np.ndarray

    @property
    def n_goods(self) -> int:
        return len(self.goods)

    @property
    def n_triples(self) -> int:
        return len(self.triples)

    @property
    def n_sps(self) -> int:
        return len(self.sp_names)

    def sp_rows(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.sp_of == s)

    def sp_sum(self, per_triple: np.ndarray) -> np.ndarray:
        """Sum a per-triple vector into a per-SP vector."""
        return np.bincount(self.sp_of, weights=per_triple, minlength=self.n_sps)

    def demanded_goods(self) -> np.ndarray:
        """Boolean mask of goods consumed by at least one triple."""
        return self.consumed.any(axis=0)


@dataclass(frozen=True)
class NormalizedScenario:
    """A validated scenario plus its compiled normalized index."""

    spec: ScenarioSpec
    index: MarketIndex

    def denormalize_allocation(self, x: np.ndarray) -> np.ndarray:
        """Fractional allocation [n_triples, n_goods] back to physical units."""
        return x * self.index.capacity[None, :]


def normalize_scenario(spec: ScenarioSpec) -> NormalizedScenario:
    """Validate and compile ``spec`` into its normalized form.

    Demands become ``d' = d / C`` (fraction of the whole resource per unit
    rate) so the trading-post fractional shares and capacity constraints
    live on the same scale.  Support triples with zero users are dropped
    from the index (they would put zero weights inside logarithms).
    """
    validate_scenario(spec)

    goods: list[tuple[str, str]] = []
    cap: list[float] = []
    good_pos: dict[tuple[str, str], int] = {}
    for cell in spec.cells:
        for res in cell.resources:
            good_pos[(cell.id, res.name)] = len(goods)
            goods.append((cell.id, res.name))
            cap.append(res.capacity)

    triples: list[tuple[str, str, str]] = []
    sp_of: list[int] = []
    users: list[int] = []
    weights: list[float] = []
    rows: list[np.ndarray] = []
    G = len(goods)
    for s, sp in enumerate(spec.sps):
        for e in sp.support:
            if e.users == 0:
                continue
            row = np.zeros(G)
            demand = spec.class_by_name(e.klass).demand
            for rname, d in demand.items():
                g = good_pos[(e.cell, rname)]
                row[g] = d / cap[g]
            triples.append((sp.name, e.cell, e.klass))
            sp_of.append(s)
            users.append(e.users)
            weights.append(effective_weight(e.users, sp.alpha, e.weight))
            rows.append(row)

    if not triples:
        raise ScenarioError("no supported (sp, cell, class) triple has users")

    demand_mat = np.array(rows)
    index = MarketIndex(
        goods=tuple(goods),
        capacity=_frozen(np.array(cap)),
        sp_names=tuple(sp.name for sp in spec.sps),
        budgets=_frozen(np.array([sp.budget for sp in spec.sps])),
        alphas=_frozen(np.array([sp.alpha for sp in spec.sps])),
        triples=tuple(triples),
        sp_of=_frozen(np.array(sp_of, dtype=np.intp)),
        users=_frozen(np.array(users, dtype=np.intp)),
        weights=_frozen(np.array(weights)),
        demand=_frozen(demand_mat),
        consumed=_frozen(demand_mat > 0),
    )
    idle = ~index.demanded_goods()
    if idle.any():
        names = [goods[g] for g in np.flatnonzero(idle)]
        warnings.warn(f"resources demanded by no SP are ignored: {names}", stacklevel=2)
    return NormalizedScenario(spec=spec, index=index)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# JSON serialization (schema_version 1)
# ---------------------------------------------------------------------------

def _alpha_to_json(alpha: float):
    return "inf" if math.isinf(alpha) else alpha


def _alpha_from_json(value) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return math.inf
        raise ScenarioError(f"unrecognized alpha value {value!r}")
    return float(value)


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "cells": [
            {
                "id": c.id,
                "resources": [{"name": r.name, "capacity": r.capacity} for r in c.resources],
            }
            for c in spec.cells
        ],
        "classes": [{"name": k.name, "demand": dict(k.demand)} for k in spec.classes],
        "sps": [
            {
                "name": sp.name,
                "budget": sp.budget,
                "alpha": _alpha_to_json(sp.alpha),
                "support": [
                    {
                        "cell": e.cell,
                        "class": e.klass,
                        "users": e.users,
                        **({"weight": e.weight} if e.weight is not None else {}),
                    }
                    for e in sp.support
                ],
            }
            for sp in spec.sps
        ],
    }


def scenario_from_dict(doc: dict) -> ScenarioSpec:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    try:
        cells = tuple(
            CellDef(
                id=str(c["id"]),
                resources=tuple(
                    ResourceDef(name=str(r["name"]), capacity=float(r["capacity"]))
                    for r in c["resources"]
                ),
            )
            for c in doc["cells"]
        )
        classes = tuple(
            ClassDef(
                name=str(k["name"]),
                demand={str(r): float(d) for r, d in k["demand"].items()},
            )
            for k in doc["classes"]
        )
        sps = tuple(
            ProviderDef(
                name=str(sp["name"]),
                budget=float(sp["budget"]),
                alpha=_alpha_from_json(sp["alpha"]),
                support=tuple(
                    SupportEntry(
                        cell=str(e["cell"]),
                        klass=str(e["class"]),
                        users=int(e["users"]),
                        weight=float(e["weight"]) if "weight" in e else None,
                    )
                    for e in sp["support"]
                ),
            )
            for sp in doc["sps"]
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from exc
    return ScenarioSpec(cells=cells, classes=classes, sps=sps)


def save_scenario(spec: ScenarioSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(spec), fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_scenario(path) -> ScenarioSpec:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
