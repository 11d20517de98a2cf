"""Exactly solvable dephasing model: one spin-1/2 coupled to a bath of spins.

The joint Hamiltonian is pure coupling,

    H = sum_k g_k sigma_z (x) sigma_z^(k),      (free parts zero)

with product pre-selection (a|up> + b|down>) prod_k (alpha_k|up_k> + beta_k|down_k>)
at t=0 and product post-selection at t=T. Basis index 0 is the sigma_z = +1
eigenstate throughout.

Tracing the bath out of the joint two-state gives a closed form whose
coefficients are values of the bath dephasing product

    chi(x) = prod_k ( alpha_k alpha'_k* e^{+i g_k x} + beta_k beta'_k* e^{-i g_k x} ).

The diagonal coefficients are time independent, the off-diagonal ones carry
chi(T-2t) and chi(2t-T), so the reduced two-state is rank one at both
boundaries and generically entangled in between: the post-selection forces
recoherence. `brute_force_reduced` re-derives the same object from the full
2^(n+1)-dimensional joint evolution with exact per-basis-state phases and is
the oracle everything else is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .qcore import Ket, Operator, qubits
from .twostate import FormalismError, TwoState

__all__ = [
    "SpinBathParams",
    "decoherence_factor",
    "exact_reduced_two_state",
    "brute_force_reduced",
    "env_postselected_two_states",
    "effective_density_xy",
    "suppression_scenario",
    "random_params",
    "joint_hamiltonian",
    "joint_conditions",
    "env_kets",
    "system_kets",
    "weak_evolution_closed_form",
]

NORM_TOL = 1e-12
MAX_BATH_SPINS = 12

_QUBIT = qubits(1)


@dataclass(eq=False)
class SpinBathParams:
    """Couplings and boundary amplitudes of the spin-bath model.

    Per-spin amplitude pairs are (alpha_k, beta_k) before and
    (alpha_post_k, beta_post_k) after; the system pair (a_post, b_post) is
    optional, absent meaning only the environment is post-selected.
    """

    n: int
    g: np.ndarray
    a: complex
    b: complex
    alpha: np.ndarray
    beta: np.ndarray
    alpha_post: np.ndarray
    beta_post: np.ndarray
    t_final: float = 1.0
    a_post: Optional[complex] = None
    b_post: Optional[complex] = None

    def __post_init__(self):
        self.n = int(self.n)
        if not 1 <= self.n <= MAX_BATH_SPINS:
            raise ValueError(f"bath size must be in [1, {MAX_BATH_SPINS}], got {self.n}")
        self.g = np.asarray(self.g, dtype=float)
        for name in ("alpha", "beta", "alpha_post", "beta_post"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (self.n,):
                raise ValueError(f"{name} must have one entry per bath spin")
            setattr(self, name, arr)
        if self.g.shape != (self.n,):
            raise ValueError("g must have one coupling per bath spin")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if (self.a_post is None) != (self.b_post is None):
            raise ValueError("a_post and b_post must be given together")

        if abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1.0) > NORM_TOL:
            raise ValueError("system pre-selection amplitudes are not normalized")
        if self.a_post is not None:
            if abs(abs(self.a_post) ** 2 + abs(self.b_post) ** 2 - 1.0) > NORM_TOL:
                raise ValueError("system post-selection amplitudes are not normalized")
        pre_norm = np.abs(self.alpha) ** 2 + np.abs(self.beta) ** 2
        post_norm = np.abs(self.alpha_post) ** 2 + np.abs(self.beta_post) ** 2
        if np.max(np.abs(pre_norm - 1.0)) > NORM_TOL:
            raise ValueError("environment pre-selection amplitudes are not normalized")
        if np.max(np.abs(post_norm - 1.0)) > NORM_TOL:
            raise ValueError("environment post-selection amplitudes are not normalized")

        if abs(decoherence_factor(self, 0.0)) <= 1e-12:
            raise FormalismError(
                "orthogonal free environment conditions: the reduction normalization vanishes"
            )

    @property
    def has_system_post(self) -> bool:
        return self.a_post is not None


def decoherence_factor(p: SpinBathParams, tprime: float) -> complex:
    """Bath interference product chi(t')."""
    terms = (
        p.alpha * np.conj(p.alpha_post) * np.exp(1j * p.g * tprime)
        + p.beta * np.conj(p.beta_post) * np.exp(-1j * p.g * tprime)
    )
    return complex(np.prod(terms))


def _check_time(p: SpinBathParams, t: float):
    slack = 1e-9 * max(1.0, p.t_final)
    if not -slack <= t <= p.t_final + slack:
        raise ValueError(f"time {t} outside [0, {p.t_final}]")


def exact_reduced_two_state(p: SpinBathParams, t: float) -> TwoState:
    """Closed-form reduced two-state of the system spin.

    Diagonal coefficients are constant in t; the coherences carry
    chi(T-2t) and chi(2t-T), so the state is rank one at t=0 and t=T.
    """
    if not p.has_system_post:
        raise ValueError("exact_reduced_two_state needs a system post-selection")
    _check_time(p, t)
    big_t = p.t_final
    chi0 = decoherence_factor(p, 0.0)
    mat = np.array(
        [
            [
                p.a * np.conj(p.a_post) * decoherence_factor(p, -big_t),
                p.a * np.conj(p.b_post) * decoherence_factor(p, big_t - 2 * t),
            ],
            [
                p.b * np.conj(p.a_post) * decoherence_factor(p, 2 * t - big_t),
                p.b * np.conj(p.b_post) * decoherence_factor(p, big_t),
            ],
        ]
    ) / chi0
    return TwoState(_QUBIT, mat, 0.0, big_t, float(t), boundary_overlap=complex(np.trace(mat)))


def _env_product_kets(p: SpinBathParams) -> tuple[np.ndarray, np.ndarray]:
    e1 = np.ones(1, dtype=complex)
    e2 = np.ones(1, dtype=complex)
    for k in range(p.n):
        e1 = np.kron(e1, np.array([p.alpha[k], p.beta[k]]))
        e2 = np.kron(e2, np.array([p.alpha_post[k], p.beta_post[k]]))
    return e1, e2


def _env_energies(p: SpinBathParams) -> np.ndarray:
    """eps[m] = sum_k g_k z_k(m) over bath basis states, z = +/-1."""
    z = np.array([1.0, -1.0])
    eps = np.zeros(1)
    for gk in p.g:
        eps = np.add.outer(eps, gk * z).reshape(-1)
    return eps


def brute_force_reduced(p: SpinBathParams, t: float) -> TwoState:
    """Independent oracle: full joint evolution, traced and normalized.

    Builds the 2^(n+1)-dimensional boundary kets, applies the exact
    per-basis-state phases e^{-i E t} (left slot) and e^{-i E (t-T)}
    (right slot) with E(s, m) = sum_k g_k z_s z_k, contracts over the bath
    and divides by the free overlap <e2|e1>. No matrix is ever built, so
    the full n = 12 range stays cheap.
    """
    if not p.has_system_post:
        raise ValueError("brute_force_reduced needs a system post-selection")
    _check_time(p, t)
    big_t = p.t_final
    e1, e2 = _env_product_kets(p)
    eps = _env_energies(p)
    s1 = (p.a, p.b)
    s2 = (p.a_post, p.b_post)
    de = e1.size
    u = np.empty((2, de), dtype=complex)
    v = np.empty((2, de), dtype=complex)
    for i, sgn in enumerate((1.0, -1.0)):
        u[i] = s1[i] * np.exp(-1j * sgn * eps * t) * e1
        v[i] = s2[i] * np.exp(-1j * sgn * eps * (t - big_t)) * e2
    norm = complex(np.vdot(e2, e1))
    if abs(norm) <= 1e-12:
        raise FormalismError("orthogonal free environment conditions")
    mat = (u @ v.conj().T) / norm
    return TwoState(_QUBIT, mat, 0.0, big_t, float(t), boundary_overlap=complex(np.trace(mat)))


def env_postselected_two_states(p: SpinBathParams, t: float) -> tuple[TwoState, TwoState]:
    """The two reduced two-states when only the bath is post-selected.

    Summing the final system condition over the sigma_z eigenstates gives
    one generic two-state per outcome; feeding both into effective_density
    realizes the environment-only measurement rule.
    """
    if p.has_system_post:
        raise ValueError("env_postselected_two_states needs system post-selection absent")
    _check_time(p, t)
    big_t = p.t_final
    chi0 = decoherence_factor(p, 0.0)
    up = np.array(
        [
            [p.a * decoherence_factor(p, -big_t), 0.0],
            [p.b * decoherence_factor(p, 2 * t - big_t), 0.0],
        ]
    ) / chi0
    down = np.array(
        [
            [0.0, p.a * decoherence_factor(p, big_t - 2 * t)],
            [0.0, p.b * decoherence_factor(p, big_t)],
        ]
    ) / chi0
    ts_up = TwoState(_QUBIT, up, 0.0, big_t, float(t), boundary_overlap=complex(np.trace(up)))
    ts_down = TwoState(_QUBIT, down, 0.0, big_t, float(t), boundary_overlap=complex(np.trace(down)))
    return ts_up, ts_down


def effective_density_xy(p: SpinBathParams, t: float) -> Operator:
    """Effective density matrix for equatorial observables, closed form.

    Valid only for measurements whose projectors have constant diagonal in
    the sigma_z basis (sigma_x, sigma_y): for those the per-outcome matrices
    collapse to the single Hermitian average (1/2) sum_s2 rho(s2) rho†(s2).
    Pure at t=0 and t=T, mixed in between.
    """
    if p.has_system_post:
        raise ValueError("effective_density_xy needs system post-selection absent")
    _check_time(p, t)
    big_t = p.t_final
    c = lambda x: decoherence_factor(p, x)
    chi0sq = abs(c(0.0)) ** 2
    cm, cp = c(-big_t), c(big_t)
    cback, cfwd = c(big_t - 2 * t), c(2 * t - big_t)
    d_up = abs(p.a) ** 2 * (abs(cm) ** 2 + abs(cback) ** 2)
    d_dn = abs(p.b) ** 2 * (abs(cp) ** 2 + abs(cfwd) ** 2)
    off = p.a * np.conj(p.b) * (cm * np.conj(cfwd) + cback * np.conj(cp))
    mat = np.array([[d_up, off], [np.conj(off), d_dn]]) / (2.0 * chi0sq)
    return Operator(_QUBIT, mat)


def suppression_scenario(
    n: int,
    g: np.ndarray,
    t_final: float,
    a: complex = 0.6,
    b: complex = 0.8j,
) -> SpinBathParams:
    """Bath selected so post-selection suppresses decoherence entirely.

    Pre- and post-selecting every bath spin along +x makes the dephasing
    product real and even, chi(x) = prod_k cos(g_k x); the weak evolution
    operator becomes proportional to the identity and near t=0 the system is
    described by a pure state for any observable.
    """
    amp = np.full(int(n), 1.0 / np.sqrt(2.0), dtype=complex)
    return SpinBathParams(
        n=int(n),
        g=np.asarray(g, dtype=float),
        a=a,
        b=b,
        alpha=amp.copy(),
        beta=amp.copy(),
        alpha_post=amp.copy(),
        beta_post=amp.copy(),
        t_final=float(t_final),
    )


def _bloch_pair(rng: np.random.Generator) -> tuple[complex, complex]:
    theta = np.arccos(1.0 - 2.0 * rng.random())
    phi = 2.0 * np.pi * rng.random()
    return complex(np.cos(theta / 2.0)), complex(np.exp(1j * phi) * np.sin(theta / 2.0))


def random_params(
    rng: np.random.Generator,
    n: int,
    t_final: float = 1.0,
    system_post: bool = True,
    min_pair_overlap: float = 1e-3,
) -> SpinBathParams:
    """Bloch-uniform boundary amplitudes, couplings uniform in [0.1, 2.0]/T.

    Per-spin pre/post pairs are redrawn while their free overlap is below
    ``min_pair_overlap``, avoiding accidental orthogonality without biasing
    the generic case.
    """
    g = rng.uniform(0.1, 2.0, int(n)) / t_final
    a, b = _bloch_pair(rng)
    post = _bloch_pair(rng) if system_post else (None, None)
    alpha = np.empty(n, dtype=complex)
    beta = np.empty(n, dtype=complex)
    alpha_p = np.empty(n, dtype=complex)
    beta_p = np.empty(n, dtype=complex)
    for k in range(int(n)):
        while True:
            alpha[k], beta[k] = _bloch_pair(rng)
            alpha_p[k], beta_p[k] = _bloch_pair(rng)
            overlap = alpha[k] * np.conj(alpha_p[k]) + beta[k] * np.conj(beta_p[k])
            if abs(overlap) >= min_pair_overlap:
                break
    return SpinBathParams(
        n=int(n),
        g=g,
        a=a,
        b=b,
        alpha=alpha,
        beta=beta,
        alpha_post=alpha_p,
        beta_post=beta_p,
        t_final=float(t_final),
        a_post=post[0],
        b_post=post[1],
    )


def joint_hamiltonian(p: SpinBathParams) -> Operator:
    """Dense diagonal joint Hamiltonian sum_k g_k sigma_z sigma_z^(k).

    Materializes a 2^(n+1) square matrix; meant for cross-checks at small n,
    the oracle path never needs it.
    """
    z = np.array([1.0, -1.0])
    diag = np.kron(z, _env_energies(p))
    return Operator(qubits(p.n + 1), np.diag(diag).astype(complex))


def system_kets(p: SpinBathParams) -> tuple[Ket, Optional[Ket]]:
    pre = Ket(_QUBIT, np.array([p.a, p.b]))
    post = Ket(_QUBIT, np.array([p.a_post, p.b_post])) if p.has_system_post else None
    return pre, post


def env_kets(p: SpinBathParams) -> tuple[Ket, Ket]:
    e1, e2 = _env_product_kets(p)
    space = qubits(p.n)
    return Ket(space, e1), Ket(space, e2)


def joint_conditions(p: SpinBathParams) -> tuple[Ket, Ket]:
    """Joint product boundary kets on the (n+1)-spin space."""
    if not p.has_system_post:
        raise ValueError("joint_conditions needs a system post-selection")
    e1, e2 = _env_product_kets(p)
    space = qubits(p.n + 1)
    psi1 = np.kron(np.array([p.a, p.b]), e1)
    psi2 = np.kron(np.array([p.a_post, p.b_post]), e2)
    return Ket(space, psi1), Ket(space, psi2)


def weak_evolution_closed_form(p: SpinBathParams) -> Operator:
    """diag(chi(-T), chi(T)) / chi(0): the bath-sandwiched joint evolution."""
    chi0 = decoherence_factor(p, 0.0)
    mat = np.diag(
        [
            decoherence_factor(p, -p.t_final) / chi0,
            decoherence_factor(p, p.t_final) / chi0,
        ]
    )
    return Operator(_QUBIT, mat)
