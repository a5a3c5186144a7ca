"""Seeded generation of families of pairwise totally incompatible bases.

Two ordered orthonormal bases are totally incompatible when every
projection onto a nonempty proper subset of one fails to commute with
every such projection of the other. Candidates are drawn pseudo-uniformly
from the unitary group; a candidate that lands too close to an existing
member's commuting locus is nudged by a small random unitary, with the
move bounded by a per-member budget that halves at each family index.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from itertools import permutations
from pathlib import Path

import numpy as np

from .errors import RepairExhaustedError, ValidationError
from .opcore import (
    OrthonormalBasis,
    basis_distance,
    basis_from_json,
    basis_to_json,
    nontrivial_masks,
    pairwise_commutator_norms,
    require_same_dim,
    subset_projections,
)

DEFAULT_FLOOR = 1e-8
# empirical coverage radius: for n = 3 families of 50 seeded members,
# Haar targets land within 1.7 of some member well over 95 times in 100
DEFAULT_NET_BOUND = 1.7
ATTEMPTS_PER_RADIUS = 64
RADIUS_LEVELS = 10

__all__ = [
    "DEFAULT_FLOOR",
    "DEFAULT_NET_BOUND",
    "Provenance",
    "FamilyMember",
    "BasisFamily",
    "haar_basis",
    "random_nearby_basis",
    "min_cross_commutator_norm",
    "totally_incompatible",
    "repair_member",
    "generate_family",
    "nearest_member",
]


@dataclass(frozen=True)
class Provenance:
    """How a member came to be: generator seed, repair attempts, distance moved."""

    seed: int | None
    replacements: int
    distance_moved: float


@dataclass(frozen=True)
class FamilyMember:
    index: int
    basis: OrthonormalBasis
    provenance: Provenance


@dataclass(frozen=True)
class BasisFamily:
    """An ordered family of pairwise totally incompatible bases."""

    dim: int
    net_bound: float
    floor: float
    seed: int
    members: tuple[FamilyMember, ...]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def member(self, index: int) -> FamilyMember:
        for m in self.members:
            if m.index == index:
                return m
        raise ValidationError(f"no member with index {index}")

    def to_json(self) -> dict:
        return {
            "n": self.dim,
            "net_bound": self.net_bound,
            "floor": self.floor,
            "seed": self.seed,
            "members": [
                {
                    "index": m.index,
                    "basis": basis_to_json(m.basis),
                    "provenance": asdict(m.provenance),
                }
                for m in self.members
            ],
        }

    @classmethod
    def from_json(cls, obj) -> "BasisFamily":
        try:
            members = tuple(
                FamilyMember(
                    index=int(entry["index"]),
                    basis=basis_from_json(entry["basis"]),
                    provenance=Provenance(**entry["provenance"]),
                )
                for entry in obj["members"]
            )
            return cls(
                dim=int(obj["n"]),
                net_bound=float(obj["net_bound"]),
                floor=float(obj["floor"]),
                seed=int(obj["seed"]),
                members=members,
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed family object: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1))

    @classmethod
    def load(cls, path) -> "BasisFamily":
        return cls.from_json(json.loads(Path(path).read_text()))


def haar_basis(n: int, rng: np.random.Generator) -> OrthonormalBasis:
    """Pseudo-uniform basis: complex Gaussian matrix, QR, phase-fixed R diagonal."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return OrthonormalBasis(q)


def random_nearby_basis(basis: OrthonormalBasis, radius: float, rng: np.random.Generator) -> OrthonormalBasis:
    """Apply exp(itH) for random Hermitian H, with t scaled so |I - U| < radius."""
    if radius <= 0:
        raise ValidationError("radius must be positive")
    n = basis.dim
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = (z + z.conj().T) / 2
    w, v = np.linalg.eigh(h)
    top = float(np.max(np.abs(w)))
    # |1 - e^{ia}| = 2 sin(a/2) < a, so capping t*max|eig| below the radius
    # keeps the move strictly inside it without phase wrap-around. The sin
    # gap is a^3/24, smaller than float roundoff for tiny radii, hence the
    # absolute shave; radii below it degenerate to no move at all, which is
    # still strictly inside.
    reach = min(radius, 2.0) - 1e-13
    if top < 1e-12 or reach <= 0:
        return basis
    t = reach / top
    u = (v * np.exp(1j * t * w)) @ v.conj().T
    return OrthonormalBasis(u @ basis.mat)


def _nontrivial_stack(basis: OrthonormalBasis) -> np.ndarray:
    return subset_projections(basis, nontrivial_masks(basis.dim))


def min_cross_commutator_norm(first: OrthonormalBasis, second: OrthonormalBasis) -> float:
    """Smallest |[P, P']| over nonempty proper subset projections of each basis."""
    require_same_dim(first.mat, second.mat)
    if first.dim < 2:
        raise ValidationError("total incompatibility needs dimension >= 2")
    norms = pairwise_commutator_norms(_nontrivial_stack(first), _nontrivial_stack(second))
    return float(norms.min())


def totally_incompatible(first: OrthonormalBasis, second: OrthonormalBasis, floor: float = DEFAULT_FLOOR) -> bool:
    """True when every cross pair of nontrivial subset projections has |[P, P']| > floor."""
    if floor <= 0:
        raise ValidationError("floor must be positive")
    return min_cross_commutator_norm(first, second) > floor


def _clears(stack: np.ndarray, predecessor_stacks, floor: float) -> bool:
    for other in predecessor_stacks:
        if pairwise_commutator_norms(stack, other).min() <= floor:
            return False
    return True


def repair_member(
    candidate: OrthonormalBasis,
    predecessors,
    budget: float,
    floor: float = DEFAULT_FLOOR,
    rng: np.random.Generator | None = None,
    index: int | None = None,
    seed: int | None = None,
    attempts_per_radius: int = ATTEMPTS_PER_RADIUS,
    radius_levels: int = RADIUS_LEVELS,
    _predecessor_stacks=None,
) -> FamilyMember:
    """Return a member totally incompatible with all ``predecessors``.

    The candidate is kept unchanged when it already clears everything.
    Otherwise random nearby bases are tried at radii budget, budget/2, ...
    (``radius_levels`` levels, ``attempts_per_radius`` draws each) until one
    clears, so the returned basis is within ``budget`` of the candidate.
    Raises RepairExhaustedError when every attempt fails.
    """
    if budget <= 0:
        raise ValidationError("budget must be positive")
    preds = list(predecessors)
    if index is None:
        index = len(preds) + 1
    if _predecessor_stacks is None:
        _predecessor_stacks = [_nontrivial_stack(p.basis) for p in preds]
    cand_stack = _nontrivial_stack(candidate)
    if _clears(cand_stack, _predecessor_stacks, floor):
        return FamilyMember(index, candidate, Provenance(seed, 0, 0.0))
    if rng is None:
        raise ValidationError("candidate needs repair but no rng was supplied")
    attempts = 0
    radius = budget
    for _ in range(radius_levels):
        for _ in range(attempts_per_radius):
            attempts += 1
            moved = random_nearby_basis(candidate, radius, rng)
            if _clears(_nontrivial_stack(moved), _predecessor_stacks, floor):
                dist = basis_distance(candidate, moved)
                return FamilyMember(index, moved, Provenance(seed, attempts, dist))
        radius /= 2
    raise RepairExhaustedError(
        f"gave up after {attempts} attempts (budget {budget:g}, floor {floor:g}); "
        "the floor or the budget is too demanding"
    )


def generate_family(n: int, count: int, seed: int, net_bound: float = DEFAULT_NET_BOUND,
                    floor: float = DEFAULT_FLOOR) -> BasisFamily:
    """Grow a family of ``count`` pairwise totally incompatible bases.

    Member m gets repair budget min(net_bound, 2**-m), so the sequence of
    raw pseudo-uniform draws is disturbed less and less as it grows.
    Deterministic: the same seed reproduces the family bit for bit.
    """
    if n < 2:
        raise ValidationError("dimension must be at least 2")
    if count < 1:
        raise ValidationError("count must be at least 1")
    if net_bound <= 0 or floor <= 0:
        raise ValidationError("net_bound and floor must be positive")
    rng = np.random.default_rng(seed)
    members: list[FamilyMember] = []
    stacks: list[np.ndarray] = []
    for m in range(1, count + 1):
        raw = haar_basis(n, rng)
        budget = min(net_bound, 2.0 ** (-m))
        member = repair_member(
            raw, members, budget, floor, rng, index=m, seed=seed, _predecessor_stacks=stacks
        )
        members.append(member)
        stacks.append(_nontrivial_stack(member.basis))
    return BasisFamily(
        dim=n, net_bound=float(net_bound), floor=float(floor), seed=int(seed), members=tuple(members)
    )


def nearest_member(family: BasisFamily, target: OrthonormalBasis, order_insensitive: bool = False):
    """Index and distance of the family member closest to ``target``.

    The default metric respects vector order. With ``order_insensitive``
    the distance is minimized over all column orderings of the target,
    which is factorial in the dimension and therefore capped at n <= 6.
    """
    if not family.members:
        raise ValidationError("family has no members")
    n = family.dim
    require_same_dim(family.members[0].basis.mat, target.mat)
    if order_insensitive and n > 6:
        raise ValidationError("order-insensitive matching is capped at dimension 6")
    orderings = list(permutations(range(n))) if order_insensitive else [tuple(range(n))]
    targets = [target.permuted(p) for p in orderings]
    best_index = None
    best_dist = np.inf
    for member in family.members:
        d = min(basis_distance(member.basis, t) for t in targets)
        if d < best_dist:
            best_index = member.index
            best_dist = d
    return best_index, float(best_dist)
