"""Sparse algebra of multi-mode bosonic Fock states.

A mode is a (spatial, polarization) label pair.  States are stored as sparse
maps from occupation patterns to complex amplitudes in the orthonormal Fock
basis, so norms and probabilities are direct sums of |amplitude|^2.  All
values are immutable after construction and every operation is a pure
function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

Mode = tuple[str, str]
# Occupation pattern: sorted ((spatial, pol), count) pairs, counts > 0.
FockKey = tuple[tuple[Mode, int], ...]

DROP_TOL = 1e-12
DEFAULT_MAX_PHOTONS = 8


class FockError(Exception):
    pass


class ConfigError(FockError):
    """Invalid configuration (duplicate modes, unmapped modes, bad ranges)."""


class TruncationError(FockError):
    """Photon-number truncation exceeded."""


def mode(spatial: str, pol: str) -> Mode:
    return (spatial, pol)


def mode_str(m: Mode) -> str:
    return f"{m[0]}.{m[1]}"


def parse_mode(text: str) -> Mode:
    spatial, _, pol = text.partition(".")
    if not spatial or not pol:
        raise ValueError(f"bad mode literal {text!r}, expected spatial.pol")
    return (spatial, pol)


def canonical_key(occupations: Mapping[Mode, int]) -> FockKey:
    for m, n in occupations.items():
        if n < 0:
            raise ConfigError(f"negative occupation for mode {mode_str(m)}")
    return tuple(sorted((m, n) for m, n in occupations.items() if n > 0))


def key_photons(key: FockKey) -> int:
    return sum(n for _, n in key)


def key_occupation(key: FockKey, m: Mode) -> int:
    for km, n in key:
        if km == m:
            return n
    return 0


class PureState:
    """Sparse superposition of Fock basis states with complex amplitudes."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[FockKey, complex] | None = None,
                 drop_tol: float = DROP_TOL):
        clean: dict[FockKey, complex] = {}
        if terms:
            for key, amp in terms.items():
                if abs(amp) > drop_tol:
                    clean[key] = complex(amp)
        self.terms = clean

    @classmethod
    def from_occupations(cls, occupations: Mapping[Mode, int],
                         amplitude: complex = 1.0) -> "PureState":
        return cls({canonical_key(occupations): amplitude})

    def norm_sq(self) -> float:
        return sum(abs(a) ** 2 for a in self.terms.values())

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return abs(self.norm_sq() - 1.0) <= tol

    def scaled(self, factor: complex) -> "PureState":
        return PureState({k: a * factor for k, a in self.terms.items()})

    def normalized(self) -> "PureState":
        n2 = self.norm_sq()
        if n2 == 0.0:
            return PureState()
        return self.scaled(1.0 / math.sqrt(n2))

    def add(self, other: "PureState") -> "PureState":
        terms = dict(self.terms)
        for key, amp in other.terms.items():
            terms[key] = terms.get(key, 0.0) + amp
        return PureState(terms)

    def occupied_modes(self) -> set[Mode]:
        out: set[Mode] = set()
        for key in self.terms:
            out.update(m for m, _ in key)
        return out

    def max_photons(self) -> int:
        return max((key_photons(k) for k in self.terms), default=0)

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"PureState({len(self.terms)} terms, norm^2={self.norm_sq():.6g})"


VACUUM_KEY: FockKey = ()


def make_vacuum(modes: Iterable[Mode] = ()) -> PureState:
    """Vacuum over a declared mode universe (modes must be distinct)."""
    seen = set()
    for m in modes:
        if m in seen:
            raise ConfigError(f"duplicate mode {mode_str(m)}")
        seen.add(m)
    return PureState({VACUUM_KEY: 1.0})


def apply_creation(state: PureState, m: Mode,
                   max_photons: int = DEFAULT_MAX_PHOTONS) -> PureState:
    """Apply a creation operator: |n> -> sqrt(n+1) |n+1> on the given mode."""
    terms: dict[FockKey, complex] = {}
    for key, amp in state.terms.items():
        if key_photons(key) + 1 > max_photons:
            raise TruncationError(
                f"creation on {mode_str(m)} exceeds truncation {max_photons}")
        occ = dict(key)
        n = occ.get(m, 0)
        occ[m] = n + 1
        new_key = canonical_key(occ)
        terms[new_key] = terms.get(new_key, 0.0) + amp * math.sqrt(n + 1)
    return PureState(terms)


def inner_product(bra: PureState, ket: PureState) -> complex:
    if len(bra.terms) > len(ket.terms):
        return inner_product(ket, bra).conjugate()
    total = 0.0 + 0.0j
    for key, amp in bra.terms.items():
        other = ket.terms.get(key)
        if other is not None:
            total += amp.conjugate() * other
    return total


def _compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """All ways to write n as an ordered sum of k non-negative integers."""
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def _power_expansion(column: tuple[tuple[complex, Mode], ...],
                     n: int) -> list[tuple[complex, tuple[tuple[Mode, int], ...]]]:
    """Multinomial expansion of (sum_j c_j b_j^dag)^n as monomial powers."""
    out = []
    k = len(column)
    for split in _compositions(n, k):
        coef = float(math.factorial(n))
        powers = []
        for (c, m), kj in zip(column, split):
            coef /= math.factorial(kj)
            if kj:
                coef = coef * c ** kj
                powers.append((m, kj))
        out.append((coef, tuple(powers)))
    return out


def substitute_modes(state: PureState, transform: "ModeTransformLike",
                     drop_tol: float = DROP_TOL) -> PureState:
    """Linear substitution of creation operators.

    Each occupied input mode must have a column in the transform.  Basis
    states are re-expanded as products of substituted creation-operator
    monomials acting on vacuum, with sqrt(n!) conversion factors applied so
    amplitudes stay in the orthonormal Fock basis.
    """
    columns = transform.columns
    cache: dict[tuple[Mode, int], list] = {}
    out: dict[FockKey, complex] = {}
    for key, amp in state.terms.items():
        # partial products: output-mode power accumulator -> coefficient
        partial: dict[tuple[tuple[Mode, int], ...], complex] = {(): amp}
        for m, n in key:
            col = columns.get(m)
            if col is None:
                raise ConfigError(
                    f"transform has no column for occupied mode {mode_str(m)}")
            exp = cache.get((m, n))
            if exp is None:
                exp = [(c / math.sqrt(math.factorial(n)), powers)
                       for c, powers in _power_expansion(col, n)]
                cache[(m, n)] = exp
            nxt: dict[tuple[tuple[Mode, int], ...], complex] = {}
            for acc_powers, acc_coef in partial.items():
                acc = dict(acc_powers)
                for coef, powers in exp:
                    merged = dict(acc)
                    for om, p in powers:
                        merged[om] = merged.get(om, 0) + p
                    mkey = tuple(sorted(merged.items()))
                    nxt[mkey] = nxt.get(mkey, 0.0) + acc_coef * coef
            partial = nxt
        for powers, coef in partial.items():
            factor = 1.0
            for _, p in powers:
                factor *= math.factorial(p)
            out_key: FockKey = tuple(powers)
            out[out_key] = out.get(out_key, 0.0) + coef * math.sqrt(factor)
    return PureState(out, drop_tol=drop_tol)


def project_occupation(state: PureState,
                       condition: Mapping[Mode, int]
                       ) -> tuple[PureState, float]:
    """Condition on exact occupations of the given modes.

    Returns the renormalized conditional state over the remaining modes and
    the probability of the condition.  A zero-probability condition yields an
    empty state, not an error.
    """
    cond = dict(condition)
    selected: dict[FockKey, complex] = {}
    prob = 0.0
    for key, amp in state.terms.items():
        if all(key_occupation(key, m) == n for m, n in cond.items()):
            prob += abs(amp) ** 2
            rest = tuple((m, n) for m, n in key if m not in cond)
            selected[rest] = selected.get(rest, 0.0) + amp
    if prob <= 0.0:
        return PureState(), 0.0
    scale = 1.0 / math.sqrt(prob)
    return PureState({k: a * scale for k, a in selected.items()}), prob


@dataclass(frozen=True)
class MixedState:
    """Probabilistic mixture of pure states (weights may be sub-normalized)."""

    branches: tuple[tuple[float, PureState], ...]

    def total_weight(self) -> float:
        return sum(w for w, _ in self.branches)

    @classmethod
    def pure(cls, state: PureState, weight: float = 1.0) -> "MixedState":
        return cls(((weight, state),))


def branch_on_modes(state: PureState, env_modes: Iterable[Mode]) -> MixedState:
    """Trace out environment modes into an incoherent mixture.

    One branch per environment occupation pattern; branch weight is the
    marginal probability and branch states are renormalized.  Total weight
    equals the input norm^2.
    """
    env = set(env_modes)
    groups: dict[FockKey, dict[FockKey, complex]] = {}
    for key, amp in state.terms.items():
        env_part = tuple((m, n) for m, n in key if m in env)
        sys_part = tuple((m, n) for m, n in key if m not in env)
        bucket = groups.setdefault(env_part, {})
        bucket[sys_part] = bucket.get(sys_part, 0.0) + amp
    branches = []
    for env_part in sorted(groups):
        terms = groups[env_part]
        weight = sum(abs(a) ** 2 for a in terms.values())
        if weight <= 0.0:
            continue
        scale = 1.0 / math.sqrt(weight)
        branches.append((weight,
                         PureState({k: a * scale for k, a in terms.items()})))
    return MixedState(tuple(branches))


def as_mixed(state: PureState | MixedState) -> MixedState:
    if isinstance(state, MixedState):
        return state
    return MixedState.pure(state)


def serialize_state(state: PureState) -> str:
    """Canonical text form: one term per line, `re im | mode:count ...`."""
    lines = []
    for key in sorted(state.terms):
        amp = state.terms[key]
        mods = " ".join(f"{mode_str(m)}:{n}" for m, n in key)
        lines.append(f"{amp.real:.17g} {amp.imag:.17g} | {mods}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")


def deserialize_state(text: str) -> PureState:
    terms: dict[FockKey, complex] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        try:
            head, _, tail = line.partition("|")
            re_s, im_s = head.split()
            occ: dict[Mode, int] = {}
            for tok in tail.split():
                mtxt, _, cnt = tok.rpartition(":")
                occ[parse_mode(mtxt)] = int(cnt)
            terms[canonical_key(occ)] = complex(float(re_s), float(im_s))
        except (ValueError, KeyError) as exc:
            raise FockError(f"malformed state line {line!r}: {exc}") from exc
    return PureState(terms)


class ModeTransformLike:
    """Protocol stub: anything with a `.columns` mapping Mode -> column."""

    columns: Mapping[Mode, tuple[tuple[complex, Mode], ...]]
