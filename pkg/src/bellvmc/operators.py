"""Spin configurations and Pauli strings in the sigma^z eigenbasis.

A spin configuration is a length-N numpy array with entries +1/-1 (the
sigma^z eigenvalues).  Sites are labelled 1..N.  A Pauli string is a product
of single-site Pauli operators on distinct sites; acting on a basis state it
produces exactly one basis state and a unit-modulus phase:

    X:  flips sigma,            factor 1
    Y:  flips sigma,            factor i*sigma   (sigma = value before flip)
    Z:  leaves sigma unchanged, factor sigma

Hermitian operators are kept as real-weighted sums of Pauli strings in a
canonical merged form (no repeated string, no zero coefficient).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AXES = ("X", "Y", "Z")


def spin_config(values) -> np.ndarray:
    """Validate and return a spin configuration as an int8 array of +-1."""
    config = np.asarray(values)
    if config.ndim != 1 or config.shape[0] < 2:
        raise ValueError("spin configuration must be 1-d with N >= 2 sites")
    if not np.all(np.abs(config) == 1):
        raise ValueError("spin configuration entries must be +1 or -1")
    return config.astype(np.int8)


@dataclass(frozen=True)
class PauliString:
    """Product of Pauli factors on strictly increasing sites (1-based).

    An empty factor tuple is the identity string.
    """

    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        last = 0
        for site, axis in self.factors:
            if axis not in AXES:
                raise ValueError(f"unknown Pauli axis {axis!r}")
            if site <= last:
                raise ValueError("sites must be strictly increasing and >= 1")
            last = site

    @classmethod
    def from_factors(cls, factors) -> "PauliString":
        """Build a string from (site, axis) pairs in any order."""
        ordered = tuple(sorted(((int(s), a) for s, a in factors)))
        return cls(ordered)

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(site for site, _ in self.factors)

    def sites_on(self, *axes: str) -> tuple[int, ...]:
        return tuple(site for site, axis in self.factors if axis in axes)

    @property
    def is_diagonal(self) -> bool:
        return all(axis == "Z" for _, axis in self.factors)

    def max_site(self) -> int:
        return self.factors[-1][0] if self.factors else 0

    def __str__(self) -> str:
        return " ".join(f"{axis}@{site}" for site, axis in self.factors)


def pauli_string(spec: str) -> PauliString:
    """Parse a string like ``"X@1 Z@3"`` (empty input gives the identity)."""
    factors = []
    for token in spec.split():
        axis, _, site = token.partition("@")
        if not site:
            raise ValueError(f"malformed Pauli factor {token!r}")
        factors.append((int(site), axis.upper()))
    return PauliString.from_factors(factors)


def apply_string(string: PauliString, config) -> tuple[np.ndarray, complex]:
    """Apply a Pauli string to a basis state.

    Returns the unique connected configuration ``new`` and the matrix element
    ``<new|P|config>`` (a product of the per-site factors listed in the
    module docstring).
    """
    config = np.asarray(config)
    n = config.shape[0]
    if string.max_site() > n:
        raise ValueError(
            f"Pauli string acts on site {string.max_site()} but config has {n} sites"
        )
    new = config.copy()
    phase = complex(1.0)
    for site, axis in string.factors:
        sigma = config[site - 1]
        if axis == "X":
            new[site - 1] = -sigma
        elif axis == "Y":
            new[site - 1] = -sigma
            phase *= 1j * sigma
        else:  # Z
            phase *= sigma
    return new, phase


@dataclass(frozen=True)
class WeightedPauliSum:
    """Hermitian operator: real-weighted Pauli strings on N sites.

    ``terms`` must be canonical: every coefficient real, finite and nonzero,
    and no string repeated.  Use :func:`merge_terms` to canonicalize.
    """

    terms: tuple[tuple[float, PauliString], ...]
    n: int

    def __post_init__(self):
        seen = set()
        for coeff, string in self.terms:
            if not np.isfinite(coeff):
                raise ValueError("coefficients must be real and finite")
            if string.max_site() > self.n:
                raise ValueError(
                    f"term {string} exceeds system size N={self.n}"
                )
            if string in seen:
                raise ValueError(f"duplicate Pauli string {string}; merge first")
            seen.add(string)

    @classmethod
    def from_terms(cls, terms, n: int) -> "WeightedPauliSum":
        """Canonicalize arbitrary (coeff, string) pairs: merge and drop zeros."""
        merged: dict[PauliString, float] = {}
        for coeff, string in terms:
            merged[string] = merged.get(string, 0.0) + float(coeff)
        canon = tuple(
            (coeff, string) for string, coeff in merged.items() if coeff != 0.0
        )
        return cls(canon, n)

    def __len__(self) -> int:
        return len(self.terms)

    def coefficient_norm(self) -> float:
        """Sum of |coefficients| -- an upper bound on the operator norm."""
        return float(sum(abs(c) for c, _ in self.terms))


def merge_terms(op: WeightedPauliSum) -> WeightedPauliSum:
    """Merge identical strings and drop zero-coefficient terms."""
    return WeightedPauliSum.from_terms(op.terms, op.n)


def format_pauli_sum(op: WeightedPauliSum) -> str:
    """Render one term per line: ``<coeff> <axis>@<site> ...``."""
    lines = []
    for coeff, string in op.terms:
        body = str(string)
        lines.append(f"{coeff!r} {body}".rstrip())
    return "\n".join(lines)


def parse_pauli_sum(text: str, n: int) -> WeightedPauliSum:
    """Parse the textual operator format produced by :func:`format_pauli_sum`."""
    terms = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, *rest = line.split(None, 1)
        coeff = float(head)
        string = pauli_string(rest[0]) if rest else PauliString()
        terms.append((coeff, string))
    return WeightedPauliSum.from_terms(terms, n)
