"""Two-state objects and the pre/post-selected measurement rules.

A two-state generalizes the quantum state to ensembles conditioned on both an
initial ket at t1 and a final ket at t2. It is a generally non-Hermitian
operator

    rho(t) = U(t - t1) |psi_in><psi_out| U†(t - t2),

the left slot carrying the initial condition forward and the right slot the
final condition backward. A rank-one ("generic") two-state factors into its
slots; interaction with an environment drives it to higher rank at
intermediate times, and the reduction over a pre- and post-selected
environment forces it back to rank one at both boundaries.

Intermediate-time probabilities come from squared projections of the
two-state onto measurement projectors, not from the Born rule; the Born rule
is recovered when only the initial condition is imposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .qcore import (
    HilbertSpace,
    Ket,
    Operator,
    evolve,
    partial_trace,
    _propagate,
    _u_repr,
)

__all__ = [
    "FormalismError",
    "TwoState",
    "ProjectorSet",
    "EffectiveDensity",
    "GENERIC_RTOL",
    "schmidt_spectrum",
    "is_generic",
    "from_conditions",
    "prob_pre_post",
    "prob_pre_only",
    "reduce_over_environment",
    "weak_value",
    "weak_evolution_operator",
    "effective_density",
    "prob_env_post_only",
    "purity",
]

# rank-one test: second singular value below this fraction of the first
GENERIC_RTOL = 1e-9

# boundary conditions with smaller overlap make conditioned probabilities undefined
ORTHOGONAL_TOL = 1e-14

# free environment overlap below this leaves the reduction normalization undefined
ENV_OVERLAP_TOL = 1e-12

PROJECTOR_TOL = 1e-10

_AMPLITUDE_FLOOR = 1e-24


class FormalismError(Exception):
    """Raised where the pre/post-selected formalism is undefined."""


@dataclass(eq=False)
class TwoState:
    """Operator-valued state with independent boundary conditions.

    ``mat`` is the (generally non-Hermitian) operator at the current time
    ``t``, with ``t1 <= t <= t2``. ``boundary_overlap`` records the
    in/out overlap amplitude when the constructor knows it; probability
    queries on two-states flagged with a vanishing overlap fail loudly
    instead of returning ill-defined numbers.
    """

    space: HilbertSpace
    mat: np.ndarray
    t1: float
    t2: float
    t: float
    boundary_overlap: Optional[complex] = None

    def __post_init__(self):
        m = np.array(self.mat, dtype=complex)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise ValueError(f"two-state matrix shape {m.shape} does not match dimension {d}")
        if self.t2 < self.t1:
            raise ValueError("t2 must not precede t1")
        slack = 1e-9 * max(1.0, self.t2 - self.t1)
        if not (self.t1 - slack <= self.t <= self.t2 + slack):
            raise ValueError(f"current time {self.t} outside [{self.t1}, {self.t2}]")
        if float(np.linalg.norm(m)) == 0.0:
            raise FormalismError("two-state matrix is zero: boundary conditions are inconsistent")
        m.setflags(write=False)
        self.mat = m

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    @property
    def duration(self) -> float:
        return self.t2 - self.t1

    def is_flagged_orthogonal(self) -> bool:
        return self.boundary_overlap is not None and abs(self.boundary_overlap) < ORTHOGONAL_TOL


def schmidt_spectrum(ts: TwoState) -> np.ndarray:
    """Singular values of the two-state matrix, descending.

    A single dominant value means the two-state factors into its slots.
    """
    return np.linalg.svd(ts.mat, compute_uv=False)


def is_generic(ts: TwoState, rtol: float = GENERIC_RTOL) -> bool:
    """Rank-one test at relative tolerance on the second singular value."""
    sv = schmidt_spectrum(ts)
    if sv.size < 2:
        return True
    return sv[1] < rtol * sv[0]


def from_conditions(
    psi_in: Ket,
    psi_out: Ket,
    h: Operator,
    t1: float,
    t2: float,
    t: float,
) -> TwoState:
    """Two-state of a closed system from its two boundary kets.

    The left slot is U(t-t1)|psi_in>, the right slot the final condition
    evolved backward, <psi_out|U(t2-t). Orthogonal boundary conditions
    (|<psi_out|U(t2-t1)|psi_in>| < 1e-14) still construct, but the result is
    flagged and conditioned probability queries on it raise.
    """
    if psi_in.space != psi_out.space or psi_in.space != h.space:
        raise ValueError("boundary kets and Hamiltonian must share one space")
    if not h.is_hermitian():
        raise ValueError("Hamiltonian must be Hermitian within 1e-10")
    left = evolve(h, t - t1, psi_in)
    right = evolve(h, t - t2, psi_out)
    overlap = complex(np.vdot(psi_out.amps, evolve(h, t2 - t1, psi_in).amps))
    mat = np.outer(left.amps, np.conj(right.amps))
    return TwoState(psi_in.space, mat, float(t1), float(t2), float(t), boundary_overlap=overlap)


@dataclass(eq=False)
class ProjectorSet:
    """Complete family of mutually orthogonal Hermitian projectors."""

    labels: tuple
    projectors: tuple

    def __post_init__(self):
        if len(self.labels) != len(self.projectors) or not self.projectors:
            raise ValueError("need one label per projector, at least one projector")
        space = self.projectors[0].space
        d = space.total_dim
        total = np.zeros((d, d), dtype=complex)
        for lab, p in zip(self.labels, self.projectors):
            if p.space != space:
                raise ValueError("all projectors must share one space")
            e = p.entries
            if float(np.max(np.abs(e - e.conj().T))) > PROJECTOR_TOL:
                raise ValueError(f"projector {lab!r} is not Hermitian within 1e-10")
            if float(np.max(np.abs(e @ e - e))) > PROJECTOR_TOL:
                raise ValueError(f"projector {lab!r} is not idempotent within 1e-10")
            total += e
        if float(np.max(np.abs(total - np.eye(d)))) > PROJECTOR_TOL:
            raise ValueError("projectors do not sum to the identity within 1e-10")
        ps = list(self.projectors)
        for i in range(len(ps)):
            for j in range(i + 1, len(ps)):
                if float(np.max(np.abs(ps[i].entries @ ps[j].entries))) > PROJECTOR_TOL:
                    raise ValueError(
                        f"projectors {self.labels[i]!r} and {self.labels[j]!r} are not orthogonal"
                    )
        self.labels = tuple(self.labels)
        self.projectors = tuple(self.projectors)

    @property
    def space(self) -> HilbertSpace:
        return self.projectors[0].space

    @classmethod
    def from_basis(cls, kets: Sequence[Ket], labels: Optional[Sequence[Any]] = None) -> "ProjectorSet":
        """Rank-one family |k><k| from an orthonormal basis."""
        if labels is None:
            labels = tuple(range(len(kets)))
        projs = tuple(
            Operator(k.space, np.outer(k.amps, np.conj(k.amps))) for k in kets
        )
        return cls(tuple(labels), projs)

    @classmethod
    def from_observable(cls, op: Operator, degeneracy_tol: float = 1e-8) -> "ProjectorSet":
        """Spectral family of a Hermitian operator, eigenvalues as labels.

        Eigenvalues closer than ``degeneracy_tol`` are merged into one
        projector.
        """
        if not op.is_hermitian():
            raise ValueError("observable must be Hermitian within 1e-10")
        vals, vecs = np.linalg.eigh(op.entries)
        labels = []
        projs = []
        i = 0
        while i < len(vals):
            j = i
            while j + 1 < len(vals) and vals[j + 1] - vals[i] < degeneracy_tol:
                j += 1
            block = vecs[:, i : j + 1]
            labels.append(float(np.mean(vals[i : j + 1])))
            projs.append(Operator(op.space, block @ block.conj().T))
            i = j + 1
        return cls(tuple(labels), tuple(projs))


def _require_queryable(ts: TwoState):
    if ts.is_flagged_orthogonal():
        raise FormalismError(
            "orthogonal boundary conditions: conditioned probabilities are undefined"
        )


def prob_pre_post(ts: TwoState, ps: ProjectorSet) -> dict:
    """Outcome distribution for a measurement between both conditions.

    Prob(a) = |<P_a, rho>|^2 / sum_a' |<P_a', rho>|^2, with <.,.> the trace
    inner product. Invariant under rescaling of the two-state.
    """
    if ps.space != ts.space:
        raise ValueError("projectors and two-state live on different spaces")
    _require_queryable(ts)
    weights = {}
    for lab, p in zip(ps.labels, ps.projectors):
        amp = complex(np.vdot(p.entries.ravel(), ts.mat.ravel()))
        weights[lab] = abs(amp) ** 2
    total = sum(weights.values())
    scale = float(np.linalg.norm(ts.mat)) ** 2
    if total <= _AMPLITUDE_FLOOR * max(1.0, scale**2):
        raise FormalismError("forbidden intermediate measurement: every two-state amplitude vanishes")
    return {lab: w / total for lab, w in weights.items()}


def prob_pre_only(ts: TwoState, ps: ProjectorSet) -> dict:
    """Outcome distribution when only the initial condition is imposed.

    Prob(a) = tr(P_a rho_in)/tr(rho_in) with rho_in = rho rho†; for a
    rank-one two-state |u><v| this is the Born rule from u, independent of
    the final slot.
    """
    if ps.space != ts.space:
        raise ValueError("projectors and two-state live on different spaces")
    rho_in = ts.mat @ ts.mat.conj().T
    norm = float(np.real(np.trace(rho_in)))
    if norm <= 0.0:
        raise FormalismError("zero-norm two-state")
    return {
        lab: float(np.real(np.trace(p.entries @ rho_in))) / norm
        for lab, p in zip(ps.labels, ps.projectors)
    }


def _split_env(space: HilbertSpace, env_space: HilbertSpace) -> tuple[int, ...]:
    """System factor indices, with the environment as the trailing factors."""
    n = space.n_factors
    ne = env_space.n_factors
    if ne >= n or space.factor_dims[n - ne :] != env_space.factor_dims:
        raise ValueError(
            f"environment dims {env_space.factor_dims} are not the trailing factors of {space.factor_dims}"
        )
    return tuple(range(n - ne))


def reduce_over_environment(joint: TwoState, h_e: Operator, e1: Ket, e2: Ket) -> TwoState:
    """Trace the environment out of a joint two-state and normalize.

    The normalization N = <e2| exp(-i h_e (t2-t1)) |e1> is the free
    environment overlap; it is time independent, so the reduced two-state
    obeys the same dynamics as the unnormalized trace.
    """
    if e1.space != e2.space or h_e.space != e1.space:
        raise ValueError("environment kets and Hamiltonian must share one space")
    keep = _split_env(joint.space, e1.space)
    big_t = joint.t2 - joint.t1
    n_amp = complex(np.vdot(e2.amps, evolve(h_e, big_t, e1).amps))
    if abs(n_amp) <= ENV_OVERLAP_TOL:
        raise FormalismError(
            "orthogonal free environment conditions: reduction normalization undefined"
        )
    reduced = partial_trace(Operator(joint.space, joint.mat), keep).entries / n_amp
    overlap = None if joint.boundary_overlap is None else joint.boundary_overlap / n_amp
    sys_space = HilbertSpace(tuple(joint.space.factor_dims[i] for i in keep))
    return TwoState(sys_space, reduced, joint.t1, joint.t2, joint.t, boundary_overlap=overlap)


def weak_value(
    o: Operator,
    e1: Ket,
    e2: Ket,
    h_e: Operator,
    t1: float,
    t2: float,
) -> complex:
    """Weak value of ``o`` with respect to the free two-state |e1><e2(t1)|.

    tr(O rho_e0)/tr(rho_e0); equal to <e2|e^{-i h_e T} O|e1> / <e2|e^{-i h_e T}|e1>
    for pure conditions. May be complex and lie outside the spectrum of ``o``.
    """
    if o.space != e1.space:
        raise ValueError("operator and environment kets live on different spaces")
    rho_e0 = from_conditions(e1, e2, h_e, t1, t2, t1).mat
    den = complex(np.trace(rho_e0))
    if abs(den) <= ENV_OVERLAP_TOL:
        raise FormalismError("orthogonal environment conditions: weak value undefined")
    num = complex(np.trace(o.entries @ rho_e0))
    return num / den


def weak_evolution_operator(
    h_tot: Operator,
    h_e: Operator,
    e1: Ket,
    e2: Ket,
    t1: float,
    t2: float,
) -> Operator:
    """Environment-sandwiched joint evolution, an operator on the system.

    W = <e2| U_tot(T) |e1> / <e2| exp(-i h_e T) |e1>. Generally non-unitary;
    it maps the initial system condition onto the left slot of the reduced
    two-state at t2, and multiplies its right slot at t1.
    """
    keep = _split_env(h_tot.space, e1.space)
    ds = math.prod(h_tot.space.factor_dims[i] for i in keep)
    de = e1.space.total_dim
    big_t = float(t2) - float(t1)

    if not h_e.is_hermitian() or not h_tot.is_hermitian():
        raise ValueError("Hamiltonians must be Hermitian within 1e-10")
    den = complex(np.vdot(e2.amps, _propagate(h_e.entries, big_t, e1.amps)))
    if abs(den) <= ENV_OVERLAP_TOL:
        raise FormalismError("orthogonal free environment conditions")

    kind, u = _u_repr(h_tot.entries, big_t)
    if kind == "diag":
        phases = u.reshape(ds, de)
        diag = np.einsum("am,m,m->a", phases, np.conj(e2.amps), e1.amps)
        num = np.diag(diag)
    else:
        u4 = u.reshape(ds, de, ds, de)
        num = np.einsum("m,ambn,n->ab", np.conj(e2.amps), u4, e1.amps)

    sys_space = HilbertSpace(tuple(h_tot.space.factor_dims[i] for i in keep))
    return Operator(sys_space, num / den)


@dataclass(eq=False)
class EffectiveDensity:
    """Per-outcome positive matrices rho(a) = sum_s2 rho(s2) P_a rho†(s2).

    The family behaves as one ordinary density matrix only when the
    normalized rho(a) coincide across outcomes; ``a_independence_score``
    measures the worst pairwise deviation.
    """

    outcomes: dict

    def labels(self) -> tuple:
        return tuple(self.outcomes.keys())

    def matrix(self, label) -> np.ndarray:
        return self.outcomes[label]

    def a_independence_score(self) -> float:
        mats = []
        traces = [float(np.real(np.trace(m))) for m in self.outcomes.values()]
        floor = 1e-14 * max(traces) if traces else 0.0
        for m, tr in zip(self.outcomes.values(), traces):
            if tr > floor:
                mats.append(m / tr)
        score = 0.0
        for i in range(len(mats)):
            for j in range(i + 1, len(mats)):
                score = max(score, float(np.linalg.norm(mats[i] - mats[j])))
        return score


def effective_density(two_states: Sequence[TwoState], ps: ProjectorSet) -> EffectiveDensity:
    """Outcome-indexed effective density matrices from a family of two-states."""
    if not two_states:
        raise ValueError("effective_density needs at least one two-state")
    space = two_states[0].space
    t0 = two_states[0].t
    for ts in two_states:
        if ts.space != space:
            raise ValueError("all two-states must share one space")
        if abs(ts.t - t0) > 1e-9 * max(1.0, abs(t0)):
            raise ValueError("all two-states must be taken at the same time")
    if ps.space != space:
        raise ValueError("projectors and two-states live on different spaces")
    out = {}
    for lab, p in zip(ps.labels, ps.projectors):
        rho = np.zeros((space.total_dim,) * 2, dtype=complex)
        for ts in two_states:
            half = ts.mat @ p.entries
            rho += half @ ts.mat.conj().T
        out[lab] = (rho + rho.conj().T) / 2.0
    return EffectiveDensity(out)


def prob_env_post_only(
    psi_in: Ket,
    h_tot: Operator,
    e2: Ket,
    s2_basis: Sequence[Ket],
    ps: ProjectorSet,
    t1: float,
    t2: float,
    t: float,
) -> dict:
    """Outcome distribution when only the environment is post-selected.

    Prob(a) = sum_s2 |<P_a, rho_s(s2)>|^2 / sum_{s2,a'} |<P_a', rho_s(s2)>|^2,
    where rho_s(s2) is the reduced two-state with final system condition
    |s2>. The result is independent of the complete basis {|s2>}, which is
    what makes the rule well defined.
    """
    keep = _split_env(h_tot.space, e2.space)
    ds = math.prod(h_tot.space.factor_dims[i] for i in keep)
    de = e2.space.total_dim
    if any(k.space.total_dim != ds for k in s2_basis) or len(s2_basis) != ds:
        raise ValueError("s2_basis must be a complete basis of the system factor")
    b = np.column_stack([k.amps for k in s2_basis])
    if float(np.max(np.abs(b.conj().T @ b - np.eye(ds)))) > PROJECTOR_TOL:
        raise ValueError("s2_basis is not orthonormal/complete within 1e-10")
    if ps.space.total_dim != ds:
        raise ValueError("projectors must act on the system factor")
    if not h_tot.is_hermitian():
        raise ValueError("joint Hamiltonian must be Hermitian within 1e-10")

    # the reduction normalization is common to every s2 and cancels in the ratio
    u_left = _propagate(h_tot.entries, t - t1, psi_in.amps).reshape(ds, de)
    kind, u = _u_repr(h_tot.entries, t - t2)
    weights = {lab: 0.0 for lab in ps.labels}
    for s2 in s2_basis:
        out_ket = np.kron(s2.amps, e2.amps)
        v = (u * out_ket if kind == "diag" else u @ out_ket).reshape(ds, de)
        reduced = u_left @ v.conj().T
        for lab, p in zip(ps.labels, ps.projectors):
            amp = complex(np.vdot(p.entries.ravel(), reduced.ravel()))
            weights[lab] += abs(amp) ** 2
    total = sum(weights.values())
    scale = float(np.linalg.norm(u_left)) ** 2
    if total <= _AMPLITUDE_FLOOR * max(1.0, scale**2):
        raise FormalismError("vanishing denominator: every two-state amplitude vanishes")
    return {lab: w / total for lab, w in weights.items()}


def purity(rho) -> float:
    """tr(rho^2)/tr(rho)^2 for a positive matrix; 1 exactly on pure states."""
    m = rho.entries if isinstance(rho, Operator) else np.asarray(rho, dtype=complex)
    tr = float(np.real(np.trace(m)))
    if tr <= 0.0:
        raise FormalismError("purity undefined for zero or negative trace")
    return float(np.real(np.trace(m @ m))) / tr**2
