"""Bell inequalities as site-resolved measurement settings plus correlator sums.

Three built-in families, each a sum of correlators over N parties with K=2
dichotomic settings per party:

* ``i1``: a chain of nearest-neighbour two-body correlators whose quantum
  expression (after fixing the optimal settings) is an open XXZ-type operator
  with staggered bond weights g_k = 4*(1 + (-1)**k * delta)/sqrt(3); bond k
  couples sites (k+1, k+2) for k = 0..N-2.
* ``i2``: symmetrized one- and two-body correlators over all ordered pairs,
  classical bound -2N, with setting 0 = z and setting 1 a tilted z/x axis
  whose angle is drawn per party from U[theta-eps, theta+eps].
* ``i3``: a CHSH-like combination of two N-body correlators and averaged
  two-body pair correlators, classical bound -2, whose quantum minimum is
  -2*sqrt(2) independent of N.

A correlator term references abstract (party, setting) labels; `compile_bell_operator`
substitutes concrete measurement axes and expands the products into a
`WeightedPauliSum`.  Only axes in the x-z plane are supported there (every
built-in family lives in that plane), which keeps all compiled coefficients
real.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .operators import PauliString, WeightedPauliSum
from .rngs import make_rng

BRUTE_FORCE_BIT_CAP = 24

_SQ3 = math.sqrt(3.0)


@dataclass(frozen=True)
class Measurement:
    """A dichotomic spin observable n . sigma with unit Bloch vector n."""

    n_x: float
    n_y: float
    n_z: float

    def __post_init__(self):
        norm = math.sqrt(self.n_x**2 + self.n_y**2 + self.n_z**2)
        if not math.isfinite(norm) or abs(norm - 1.0) > 1e-12:
            raise ValueError(f"Bloch vector must be unit length, got |n| = {norm!r}")

    @property
    def bloch(self) -> tuple[float, float, float]:
        return (self.n_x, self.n_y, self.n_z)


def measurement_zx(angle: float) -> Measurement:
    """cos(angle)*Z + sin(angle)*X, the tilted axis used by the i2 family."""
    return Measurement(n_x=math.sin(angle), n_y=0.0, n_z=math.cos(angle))


def measurement_xz(angle: float) -> Measurement:
    """cos(angle)*X + sin(angle)*Z, the tilted axis used by the i3 family."""
    return Measurement(n_x=math.cos(angle), n_y=0.0, n_z=math.sin(angle))


MEAS_Z = Measurement(0.0, 0.0, 1.0)
MEAS_X = Measurement(1.0, 0.0, 0.0)


@dataclass(frozen=True)
class MeasurementAssignment:
    """Concrete observables for every (party, setting) label of an experiment.

    Parties are 1-based, settings 0-based; `table` maps (party, setting) to a
    Measurement.
    """

    n: int
    k: int
    table: dict[tuple[int, int], Measurement] = field(repr=False)

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("need n >= 1 parties and k >= 1 settings")
        for (party, setting) in self.table:
            if not (1 <= party <= self.n):
                raise ValueError(f"party {party} outside 1..{self.n}")
            if not (0 <= setting < self.k):
                raise ValueError(f"setting {setting} outside 0..{self.k - 1}")

    def get(self, party: int, setting: int) -> Measurement:
        try:
            return self.table[(party, setting)]
        except KeyError:
            raise KeyError(f"no measurement assigned for party {party}, setting {setting}") from None


@dataclass(frozen=True)
class CorrelatorTerm:
    """coeff * product of observables at (party, setting) labels, parties distinct."""

    coeff: float
    sites: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not math.isfinite(self.coeff):
            raise ValueError("coefficient must be finite")
        parties = [p for p, _ in self.sites]
        if len(set(parties)) != len(parties):
            raise ValueError(f"repeated party in correlator term {self.sites}")
        for party, setting in self.sites:
            if party < 1 or setting < 0:
                raise ValueError(f"bad (party, setting) label ({party}, {setting})")


@dataclass(frozen=True)
class BellInequality:
    """I = sum of correlator terms, with classical bound I >= classical_bound."""

    name: str
    n: int
    k: int
    terms: tuple[CorrelatorTerm, ...]
    classical_bound: float

    def __post_init__(self):
        for term in self.terms:
            for party, setting in term.sites:
                if party > self.n:
                    raise ValueError(f"term uses party {party} but n = {self.n}")
                if setting >= self.k:
                    raise ValueError(f"term uses setting {setting} but k = {self.k}")


# ---------------------------------------------------------------------------
# family i1: staggered XXZ chain
# ---------------------------------------------------------------------------

def _check_i1_args(n: int, delta: float, anisotropy: float):
    if n < 2 or n % 2 != 0:
        raise ValueError(f"i1 needs even n >= 2, got {n}")
    if not (math.isfinite(delta) and abs(delta) <= 1.0):
        raise ValueError(f"i1 needs |delta| <= 1, got {delta}")
    if not (math.isfinite(anisotropy) and abs(anisotropy) <= 3.0):
        raise ValueError(f"i1 needs |anisotropy| <= 3, got {anisotropy}")


def i1_bond_weights(n: int, delta: float) -> np.ndarray:
    """g_k = 4*(1 + (-1)**k * delta)/sqrt(3) for bonds k = 0..n-2."""
    k = np.arange(n - 1)
    return 4.0 * (1.0 + ((-1.0) ** k) * delta) / _SQ3


def build_i1_hamiltonian(n: int, delta: float, anisotropy: float) -> WeightedPauliSum:
    """Open-chain sum_k g_k (X X + Y Y + anisotropy * Z Z) on bonds (k+1, k+2)."""
    _check_i1_args(n, delta, anisotropy)
    g = i1_bond_weights(n, delta)
    terms = []
    for k in range(n - 1):
        i, j = k + 1, k + 2
        for axis in ("X", "Y"):
            terms.append((g[k], PauliString.from_factors([(i, axis), (j, axis)])))
        terms.append((g[k] * anisotropy, PauliString.from_factors([(i, "Z"), (j, "Z")])))
    return WeightedPauliSum.from_terms(terms, n)


def classical_bound_i1(n: int, delta: float, anisotropy: float) -> float:
    """Deterministic-strategy minimum of the i1 correlator sum.

    -(4 + 2|anisotropy|) n for |anisotropy| <= 2, else -4 |anisotropy| n.
    """
    _check_i1_args(n, delta, anisotropy)
    d = abs(anisotropy)
    if d <= 2.0:
        return -(4.0 + 2.0 * d) * n
    return -4.0 * d * n


# ---------------------------------------------------------------------------
# family i2: symmetrized one- and two-body correlators
# ---------------------------------------------------------------------------

def build_i2(n: int) -> BellInequality:
    """-2*S0 - S01 + (S00 + S11)/2 >= -2n.

    S0 = sum_k <M0^(k)>, and Sab = sum over ordered pairs k != l of
    <Ma^(k) Mb^(l)>.
    """
    if n < 2:
        raise ValueError(f"i2 needs n >= 2, got {n}")
    terms = [CorrelatorTerm(-2.0, ((k, 0),)) for k in range(1, n + 1)]
    acc: dict[tuple[tuple[int, int], ...], float] = {}
    for k, l in itertools.permutations(range(1, n + 1), 2):
        for a, b, c in ((0, 1, -1.0), (0, 0, 0.5), (1, 1, 0.5)):
            pair = tuple(sorted(((k, a), (l, b))))
            acc[pair] = acc.get(pair, 0.0) + c
    terms.extend(CorrelatorTerm(c, pair) for pair, c in sorted(acc.items()) if c != 0.0)
    return BellInequality("i2", n, 2, tuple(terms), -2.0 * n)


def i2_settings_random(n: int, theta: float, eps: float, seed: int) -> MeasurementAssignment:
    """Setting 0 = z for every party; setting 1 tilted by a per-party angle.

    Angles are drawn once, in party order, from U[theta-eps, theta+eps] using a
    Philox stream keyed by ``seed`` alone, so the same seed always reproduces
    the same assignment.
    """
    if eps < 0.0:
        raise ValueError(f"need eps >= 0, got {eps}")
    rng = make_rng(seed)
    angles = rng.uniform(theta - eps, theta + eps, size=n)
    table = {}
    for party in range(1, n + 1):
        table[(party, 0)] = MEAS_Z
        table[(party, 1)] = measurement_zx(float(angles[party - 1]))
    return MeasurementAssignment(n, 2, table)


# ---------------------------------------------------------------------------
# family i3: CHSH-like N-body correlators
# ---------------------------------------------------------------------------

def build_i3(n: int) -> BellInequality:
    """Two N-body correlators plus averaged pair correlators, classical bound -2.

    I3 = -<M0^(1) M0^(2) .. M0^(N)> - <M1^(1) M0^(2) .. M0^(N)>
         + (N-1)^-1 sum_{k=2}^{N} [<M0^(1) M1^(k)> - <M1^(1) M1^(k)>]
    """
    if n < 2:
        raise ValueError(f"i3 needs n >= 2, got {n}")
    rest = tuple((k, 0) for k in range(2, n + 1))
    w = 1.0 / (n - 1)
    terms = [
        CorrelatorTerm(-1.0, ((1, 0),) + rest),
        CorrelatorTerm(-1.0, ((1, 1),) + rest),
    ]
    for k in range(2, n + 1):
        terms.append(CorrelatorTerm(w, ((1, 0), (k, 1))))
        terms.append(CorrelatorTerm(-w, ((1, 1), (k, 1))))
    return BellInequality("i3", n, 2, tuple(terms), -2.0)


def i3_settings(n: int, theta: float) -> MeasurementAssignment:
    """Party 1: M0 = z, M1 = cos(theta) x + sin(theta) z; parties >= 2: z and x."""
    table = {(1, 0): MEAS_Z, (1, 1): measurement_xz(theta)}
    for party in range(2, n + 1):
        table[(party, 0)] = MEAS_Z
        table[(party, 1)] = MEAS_X
    return MeasurementAssignment(n, 2, table)


# ---------------------------------------------------------------------------
# compilation to a Pauli sum
# ---------------------------------------------------------------------------

def compile_bell_operator(ineq: BellInequality, settings: MeasurementAssignment) -> WeightedPauliSum:
    """Substitute measurement axes into the correlators and expand.

    Each site contributes n_x X + n_z Z; a term over m sites expands into at
    most 2**m Pauli strings.  Axes with n_y != 0 are rejected: they would make
    coefficients complex, and nothing in the built-in families needs them.
    """
    if settings.n < ineq.n or settings.k < ineq.k:
        raise ValueError(
            f"assignment covers {settings.n} parties x {settings.k} settings, "
            f"inequality needs {ineq.n} x {ineq.k}"
        )
    terms = []
    for term in ineq.terms:
        branches = []
        for party, setting in term.sites:
            meas = settings.get(party, setting)
            if meas.n_y != 0.0:
                raise ValueError(
                    f"measurement for party {party}, setting {setting} has a y "
                    "component; only axes in the x-z plane compile to real coefficients"
                )
            site_parts = [(w, axis) for w, axis in ((meas.n_x, "X"), (meas.n_z, "Z")) if w != 0.0]
            branches.append([(party, axis, w) for w, axis in site_parts])
        for combo in itertools.product(*branches):
            coeff = term.coeff * math.prod(w for _, _, w in combo)
            factors = [(party, axis) for party, axis, _ in combo]
            terms.append((coeff, PauliString.from_factors(factors)))
    return WeightedPauliSum.from_terms(terms, ineq.n)


# ---------------------------------------------------------------------------
# brute-force classical minimum
# ---------------------------------------------------------------------------

def brute_force_classical_min(ineq: BellInequality, chunk: int = 1 << 16) -> float:
    """Exact minimum of the correlator sum over deterministic strategies.

    A strategy assigns +-1 to each of the n*k (party, setting) labels; bit
    (party-1)*k + setting of the strategy index holds the sign.  Each term
    contributes coeff * (-1)**popcount(strategy & mask).  Local randomness
    cannot beat a deterministic strategy, so this is the classical bound.
    """
    bits = ineq.n * ineq.k
    if bits > BRUTE_FORCE_BIT_CAP:
        raise CapacityError(
            f"{ineq.n} parties x {ineq.k} settings needs 2**{bits} strategies; "
            f"cap is 2**{BRUTE_FORCE_BIT_CAP}"
        )
    coeffs = np.array([t.coeff for t in ineq.terms])
    masks = np.array(
        [sum(1 << ((p - 1) * ineq.k + s) for p, s in t.sites) for t in ineq.terms],
        dtype=np.uint64,
    )
    total = 1 << bits
    best = math.inf
    for start in range(0, total, chunk):
        x = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        parity = np.bitwise_count(x[:, None] & masks[None, :]) & 1
        values = (1.0 - 2.0 * parity) @ coeffs
        best = min(best, float(values.min()))
    return best


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def experiment_to_document(
    ineq: BellInequality,
    settings: MeasurementAssignment | None = None,
    seed: int | None = None,
) -> dict:
    doc = {
        "name": ineq.name,
        "N": ineq.n,
        "K": ineq.k,
        "terms": [{"coeff": t.coeff, "sites": [list(s) for s in t.sites]} for t in ineq.terms],
        "classical_bound": ineq.classical_bound,
    }
    if settings is not None:
        doc["settings"] = [
            {"party": p, "setting": s, "bloch": list(m.bloch)}
            for (p, s), m in sorted(settings.table.items())
        ]
    if seed is not None:
        doc["seed"] = int(seed)
    return doc


def experiment_from_document(doc: dict) -> tuple[BellInequality, MeasurementAssignment | None, int | None]:
    terms = tuple(
        CorrelatorTerm(float(t["coeff"]), tuple((int(p), int(s)) for p, s in t["sites"]))
        for t in doc["terms"]
    )
    ineq = BellInequality(str(doc["name"]), int(doc["N"]), int(doc["K"]), terms,
                          float(doc["classical_bound"]))
    settings = None
    if "settings" in doc:
        table = {
            (int(e["party"]), int(e["setting"])): Measurement(*map(float, e["bloch"]))
            for e in doc["settings"]
        }
        settings = MeasurementAssignment(ineq.n, ineq.k, table)
    seed = int(doc["seed"]) if "seed" in doc else None
    return ineq, settings, seed


def dump_experiment(path, ineq, settings=None, seed=None):
    with open(path, "w") as f:
        json.dump(experiment_to_document(ineq, settings, seed), f, indent=2)
        f.write("\n")


def load_experiment(path):
    with open(path) as f:
        return experiment_from_document(json.load(f))
