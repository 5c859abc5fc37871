"""Bipartite instances for online matching with stochastic rewards.

Offline vertices carry weights; online vertices arrive in list order; every
edge carries a success probability in (0, 1].  Ids are strings in files and
dense integer indices in the inner loops (see ``Instance.csr``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class InstanceError(ValueError):
    """Raised for invalid or unparsable instances; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class Csr:
    """Online-major adjacency: neighbors of online vertex j are ``u[indptr[j]:indptr[j+1]]``.

    Neighbors appear in lexicographic order of their offline ids.
    """

    indptr: np.ndarray
    u: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class Instance:
    offline: tuple[tuple[str, float], ...]
    online: tuple[str, ...]
    edges: dict = field(hash=False)  # (offline id, online id) -> p_uv

    def __post_init__(self):
        object.__setattr__(self, "offline", tuple((str(u), float(w)) for u, w in self.offline))
        object.__setattr__(self, "online", tuple(str(v) for v in self.online))
        object.__setattr__(self, "edges", {(str(u), str(v)): float(p) for (u, v), p in self.edges.items()})

    @property
    def n_offline(self) -> int:
        return len(self.offline)

    @property
    def n_online(self) -> int:
        return len(self.online)

    @property
    def p_max(self) -> float:
        return max(self.edges.values(), default=0.0)

    @cached_property
    def offline_ids(self) -> list[str]:
        return [u for u, _ in self.offline]

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.offline], dtype=float)

    @cached_property
    def offline_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.offline_ids)}

    @cached_property
    def online_index(self) -> dict[str, int]:
        return {v: j for j, v in enumerate(self.online)}

    @cached_property
    def lex_rank(self) -> np.ndarray:
        """Position of each offline vertex in lexicographic id order (tie-break key)."""
        order = sorted(range(self.n_offline), key=lambda i: self.offline_ids[i])
        rank = np.empty(self.n_offline, dtype=np.int64)
        rank[order] = np.arange(self.n_offline)
        return rank

    @cached_property
    def csr(self) -> Csr:
        ui, vi = self.offline_index, self.online_index
        rank = self.lex_rank
        rows = [[] for _ in range(self.n_online)]
        for (u, v), p in self.edges.items():
            rows[vi[v]].append((rank[ui[u]], ui[u], p))
        indptr = np.zeros(self.n_online + 1, dtype=np.int64)
        us, ps = [], []
        for j, row in enumerate(rows):
            row.sort()
            us.extend(r[1] for r in row)
            ps.extend(r[2] for r in row)
            indptr[j + 1] = len(us)
        return Csr(indptr, np.array(us, dtype=np.int64), np.array(ps, dtype=float))

    def neighbors(self, u: str) -> list[str]:
        """Online neighbors of offline vertex ``u`` in arrival order."""
        nb = {v for (uu, v) in self.edges if uu == u}
        return [v for v in self.online if v in nb]

    def offline_neighbors(self, v: str) -> list[str]:
        j = self.online_index[v]
        c = self.csr
        return [self.offline_ids[i] for i in c.u[c.indptr[j]:c.indptr[j + 1]]]

    def has_equal_probabilities(self, rtol: float = 1e-12) -> bool:
        ps = list(self.edges.values())
        return not ps or (max(ps) - min(ps)) <= rtol * max(ps)

    def with_weights(self, weights) -> "Instance":
        return Instance(tuple(zip(self.offline_ids, weights)), self.online, self.edges)

    def scaled(self, factor: float) -> "Instance":
        """Same graph with every probability multiplied by ``factor``."""
        return Instance(self.offline, self.online, {e: p * factor for e, p in self.edges.items()})

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.offline == other.offline and self.online == other.online and self.edges == other.edges

    __hash__ = None


def validate(inst: Instance) -> list[str]:
    """Every invariant violation found (empty list means valid)."""
    errors = []
    off = [u for u, _ in inst.offline]
    seen = set()
    for u in off:
        if u in seen:
            errors.append(f"duplicate offline id {u!r}")
        seen.add(u)
    seen_on = set()
    for v in inst.online:
        if v in seen_on:
            errors.append(f"duplicate online id {v!r}")
        seen_on.add(v)
    for u, w in inst.offline:
        if not math.isfinite(w) or w < 0:
            errors.append(f"weight of {u!r} must be finite and non-negative, got {w}")
    for (u, v), p in inst.edges.items():
        if u not in seen:
            errors.append(f"dangling endpoint: edge ({u!r}, {v!r}) names unknown offline id {u!r}")
        if v not in seen_on:
            errors.append(f"dangling endpoint: edge ({u!r}, {v!r}) names unknown online id {v!r}")
        if not math.isfinite(p) or p <= 0:
            errors.append(f"probability must be positive on edge ({u!r}, {v!r}), got {p}")
        elif p > 1:
            errors.append(f"probability must be at most 1 on edge ({u!r}, {v!r}), got {p}")
    return errors


def neighbor_mass(inst: Instance, u: str, S) -> float:
    """min(sum of p_uv over v in S, 1)."""
    total = 0.0
    for v in S:
        p = inst.edges.get((u, v))
        if p is None:
            raise InstanceError(f"{v!r} is not a neighbor of {u!r}")
        total += p
    return min(total, 1.0)


# ---------------------------------------------------------------- generators

def _ids(prefix: str, n: int) -> list[str]:
    width = len(str(n))
    return [f"{prefix}{i:0{width}d}" for i in range(1, n + 1)]


def _weights(spec, n: int) -> list[float]:
    if spec == "uniform" or spec is None:
        return [1.0] * n
    kind, r = spec
    if kind != "geometric":
        raise ValueError(f"unknown weight family {spec!r}")
    return [float(r) ** i for i in range(n)]


def gen_upper_triangular(n: int, p: float, weights="uniform") -> Instance:
    """n offline vertices; online block j (of ceil(1/p) copies) is adjacent to offline j..n.

    Blocks arrive in order 1..n, so the perfect assignment sends block j to
    offline vertex j.  ``weights`` is ``"uniform"`` or ``("geometric", r)``
    giving w_j = r**(j-1).
    """
    if n < 1 or not 0 < p <= 1:
        raise ValueError("need n >= 1 and 0 < p <= 1")
    k = math.ceil(1 / p - 1e-9)
    us = _ids("u", n)
    online, edges = [], {}
    width = len(str(n * k))
    t = 0
    for j in range(n):
        for _ in range(k):
            t += 1
            v = f"v{t:0{width}d}"
            online.append(v)
            for u in us[j:]:
                edges[(u, v)] = p
    return Instance(tuple(zip(us, _weights(weights, n))), tuple(online), edges)


def gen_random(n_off: int, n_on: int, density: float, p_range=(0.01, 0.1), w_range=(1.0, 1.0),
               seed: int = 0, copies: int = 1) -> Instance:
    """Erdos-Renyi bipartite graph; p_uv ~ U(p_range], w_u ~ U[w_range] (a degenerate range is a constant).

    With ``copies > 1`` every generated online vertex is repeated that many
    times (same neighbors and probabilities) before the arrival order is
    shuffled, which keeps the total edge mass comparable as p shrinks.
    """
    lo, hi = p_range
    wlo, whi = w_range
    if not (0 <= lo <= hi <= 1) or hi == 0 or not (0 <= wlo <= whi) or not 0 <= density <= 1:
        raise ValueError(f"empty or invalid range: p_range={p_range}, w_range={w_range}, density={density}")
    if n_off < 1 or n_on < 0 or copies < 1:
        raise ValueError("need n_off >= 1, n_on >= 0, copies >= 1")
    rng = np.random.default_rng(seed)
    us = _ids("u", n_off)
    w = rng.uniform(wlo, whi, n_off) if whi > wlo else np.full(n_off, wlo)
    mask = rng.random((n_on, n_off)) < density
    # (lo, hi]: reflect numpy's [lo, hi)
    probs = hi - rng.random((n_on, n_off)) * (hi - lo)
    vs = _ids("v", n_on * copies)
    order = rng.permutation(n_on * copies)
    online, edges = [], {}
    for t, slot in enumerate(order):
        j = slot // copies
        v = vs[t]
        online.append(v)
        for i in np.flatnonzero(mask[j]):
            edges[(us[i], v)] = float(probs[j, i])
    return Instance(tuple(zip(us, w.tolist())), tuple(online), edges)


def gen_cascade(depth: int, eps: float, repeat: int = 1) -> Instance:
    """Layered instance in which one displaced online vertex displaces 2**k vertices at layer k.

    Root ``r`` has p = eps with ``u0`` and p = 2*eps with the layer-1
    alternative.  Each alternative at layer k already holds two displaced
    vertices (p = eps) that arrived earlier, and each of those has its own
    alternative at layer k+1 with p = 2*eps.  ``repeat`` replays the whole
    arrival sequence that many times so offline loads reach O(1).
    """
    if depth < 1 or repeat < 1:
        raise ValueError("depth and repeat must be >= 1")
    if eps <= 0 or 2 ** depth * eps > 1:
        raise ValueError(f"2**depth * eps = {2 ** depth * eps} exceeds 1")
    offline = [("u0", 1.0)] + [(f"a{k}_{i}", 1.0) for k in range(1, depth + 2) for i in range(2 ** (k - 1))]
    online, edges = [], {}

    def add(v, nbrs):
        online.append(v)
        for u, p in nbrs:
            edges[(u, v)] = p

    for t in range(repeat):
        tag = f"#{t}" if repeat > 1 else ""
        add(f"t0{tag}", [("u0", eps)])
        for k in range(depth, 0, -1):
            for i in range(2 ** k):
                add(f"d{k}_{i}{tag}", [(f"a{k}_{i // 2}", eps), (f"a{k + 1}_{i}", 2 * eps)])
        add(f"r{tag}", [("u0", eps), ("a1_0", 2 * eps)])
    return Instance(tuple(offline), tuple(online), edges)


def cascade_layer_sizes(inst: Instance) -> dict[int, int]:
    """Displaced vertices per layer in one round (layer 0 is the root)."""
    sizes: dict[int, int] = {}
    for v in inst.online:
        if "#" in v and not v.endswith("#0"):
            continue
        if v.startswith("r"):
            sizes[0] = sizes.get(0, 0) + 1
        elif v.startswith("d"):
            k = int(v[1:].split("_")[0])
            sizes[k] = sizes.get(k, 0) + 1
    return dict(sorted(sizes.items()))


# ---------------------------------------------------------------- file format

def instance_to_dict(inst: Instance) -> dict:
    return {
        "offline": [{"id": u, "weight": w} for u, w in inst.offline],
        "online": list(inst.online),
        "edges": [{"u": u, "v": v, "p": float(f"{p:.17g}")} for (u, v), p in inst.edges.items()],
    }


def write_instance(inst: Instance, path) -> None:
    # repr-precision floats round-trip exactly (>= 12 significant digits)
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


def instance_from_dict(doc: dict, source: str = "<dict>") -> Instance:
    def fail(msg):
        raise InstanceError(f"{source}: {msg}")

    if not isinstance(doc, dict):
        fail("top level must be an object")
    for key in ("offline", "online", "edges"):
        if key not in doc:
            fail(f"missing field {key!r}")
    offline = []
    for i, rec in enumerate(doc["offline"]):
        if not isinstance(rec, dict) or "id" not in rec or "weight" not in rec:
            fail(f"offline[{i}]: expected object with fields 'id' and 'weight'")
        try:
            offline.append((str(rec["id"]), float(rec["weight"])))
        except (TypeError, ValueError):
            fail(f"offline[{i}].weight: not a number: {rec['weight']!r}")
    if not isinstance(doc["online"], list):
        fail("field 'online' must be a list of ids")
    edges = {}
    for i, rec in enumerate(doc["edges"]):
        if not isinstance(rec, dict):
            fail(f"edges[{i}]: expected object with fields 'u', 'v', 'p'")
        for k in ("u", "v", "p"):
            if k not in rec:
                fail(f"edges[{i}]: missing field {k!r}")
        try:
            p = float(rec["p"])
        except (TypeError, ValueError):
            fail(f"edges[{i}].p: not a number: {rec['p']!r}")
        key = (str(rec["u"]), str(rec["v"]))
        if key in edges:
            fail(f"edges[{i}]: duplicate edge {key}")
        edges[key] = p
    inst = Instance(tuple(offline), tuple(str(v) for v in doc["online"]), edges)
    errs = validate(inst)
    if errs:
        raise InstanceError([f"{source}: {e}" for e in errs])
    return inst


def read_instance(path) -> Instance:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    return instance_from_dict(doc, str(path))
