"""Gaussian phase-space states, gates, and loss channels.

Conventions, fixed for the whole package: hbar = 1/2, so [x_i, p_j] =
i delta_ij / 2 and every vacuum quadrature has variance 1/4.  Vectors and
matrices are ordered xxpp, i.e. (x_1, ..., x_N, p_1, ..., p_N), and the
symplectic form is J = [[0, I], [-I, 0]].

States and transforms are value types: every operation is a pure function
returning a new object, so ensembles parallelize trivially over trials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "VACUUM_VARIANCE",
    "ORDERING",
    "PHYSICALITY_TOL",
    "SYMPLECTIC_TOL",
    "QuadratureConvention",
    "CONVENTION",
    "GaussianState",
    "SymplecticTransform",
    "LossModel",
    "symplectic_form",
    "vacuum",
    "squeezed_vacuum",
    "squeezed_variance",
    "tensor",
    "identity_transform",
    "squeeze_gate",
    "qnd_gate",
    "beam_splitter",
    "phase_shift",
    "displacement",
    "apply",
    "apply_loss",
    "quadrature_selector",
    "form_vector",
    "quadrature_variance",
    "quadrature_mean",
]

#: Variance of each quadrature of the vacuum state (hbar = 1/2).
VACUUM_VARIANCE = 0.25

#: Quadrature ordering used by every vector and matrix in this package.
ORDERING = "xxpp"

#: Physicality margin: min eigenvalue of cov + (i/4) J must be >= -PHYSICALITY_TOL.
PHYSICALITY_TOL = 1e-9

#: Tolerance for the symplectic condition S^T J S = J.
SYMPLECTIC_TOL = 1e-10

_SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class QuadratureConvention:
    """Numeric conventions shared by every state and report."""

    ordering: str = ORDERING
    vacuum_variance: float = VACUUM_VARIANCE
    hbar: float = 2 * VACUUM_VARIANCE


CONVENTION = QuadratureConvention()


def symplectic_form(n_modes: int) -> np.ndarray:
    """Return the 2N x 2N symplectic form J for the xxpp ordering."""
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of an N-mode Gaussian state.

    Attributes:
        mean: length-2N quadrature mean vector, xxpp ordering.
        cov: 2N x 2N symmetric covariance matrix.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.size == 0 or mean.size % 2 != 0:
            raise ValueError("state needs an even, positive number of quadratures")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        scale = max(1.0, float(np.abs(cov).max()))
        if float(np.abs(cov - cov.T).max()) > _SYMMETRY_RTOL * scale:
            raise ValueError("covariance matrix must be symmetric")
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "cov", _readonly(cov))

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def uncertainty_eigenvalue(self) -> float:
        """Smallest eigenvalue of cov + (i/4) J.

        Physical states give a value >= 0 up to rounding; pure states touch 0.
        """
        j = symplectic_form(self.n_modes)
        return float(np.linalg.eigvalsh(self.cov + 0.25j * j)[0].real)

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        return self.uncertainty_eigenvalue() >= -tol

    def require_physical(self, tol: float = PHYSICALITY_TOL) -> "GaussianState":
        value = self.uncertainty_eigenvalue()
        if value < -tol:
            raise ValueError(f"state violates the uncertainty relation: min eig {value:.3e}")
        return self

    def marginal(self, modes: Sequence[int]) -> "GaussianState":
        """Reduced state of the given modes (partial trace over the rest)."""
        n = self.n_modes
        modes = list(modes)
        for m in modes:
            if not 0 <= m < n:
                raise ValueError(f"mode index {m} out of range for {n} modes")
        idx = modes + [n + m for m in modes]
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])


@dataclass(frozen=True, eq=False)
class SymplecticTransform:
    """Affine Gaussian unitary: quadratures map to matrix @ r + shift."""

    matrix: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        shift = np.asarray(self.shift, dtype=float).reshape(-1)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
            raise ValueError("transform matrix must be square with even dimension")
        if shift.size != matrix.shape[0]:
            raise ValueError("shift length must match the matrix dimension")
        object.__setattr__(self, "matrix", _readonly(matrix))
        object.__setattr__(self, "shift", _readonly(shift))

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def __matmul__(self, other: "SymplecticTransform") -> "SymplecticTransform":
        """Composition: (self @ other) applies other first, then self."""
        if self.matrix.shape != other.matrix.shape:
            raise ValueError("cannot compose transforms of different sizes")
        return SymplecticTransform(
            self.matrix @ other.matrix, self.matrix @ other.shift + self.shift
        )

    def inverse(self) -> "SymplecticTransform":
        inv = np.linalg.inv(self.matrix)
        return SymplecticTransform(inv, -inv @ self.shift)

    def symplecticity_defect(self) -> float:
        """Max-norm deviation of S^T J S from J."""
        j = symplectic_form(self.n_modes)
        return float(np.abs(self.matrix.T @ j @ self.matrix - j).max())

    def require_symplectic(self, tol: float = SYMPLECTIC_TOL) -> "SymplecticTransform":
        defect = self.symplecticity_defect()
        if defect > tol:
            raise ValueError(f"matrix is not symplectic: defect {defect:.3e}")
        return self


# ---------------------------------------------------------------------------
# state constructors
# ---------------------------------------------------------------------------


def vacuum(n_modes: int) -> GaussianState:
    """Vacuum state of n_modes modes: zero mean, covariance I/4."""
    if n_modes < 1:
        raise ValueError("need at least one mode")
    return GaussianState(np.zeros(2 * n_modes), VACUUM_VARIANCE * np.eye(2 * n_modes))


def squeezed_variance(db: float) -> float:
    """Variance of the squeezed quadrature at a given squeezing level in dB."""
    if db < 0:
        raise ValueError("squeezing level in dB must be non-negative")
    return VACUUM_VARIANCE * 10.0 ** (-db / 10.0)


def squeezed_vacuum(db: float, quadrature: str = "p") -> GaussianState:
    """Single-mode squeezed vacuum.

    Args:
        db: squeezing level in dB below the vacuum variance; 0 gives vacuum.
        quadrature: which quadrature carries the reduced variance, "x" or "p".

    Returns:
        A pure single-mode state with variances (1/4) 10^(+-db/10).
    """
    low = squeezed_variance(db)
    high = VACUUM_VARIANCE * 10.0 ** (db / 10.0)
    if quadrature == "p":
        diag = [high, low]
    elif quadrature == "x":
        diag = [low, high]
    else:
        raise ValueError("quadrature must be 'x' or 'p'")
    return GaussianState(np.zeros(2), np.diag(diag))


def tensor(*states: GaussianState) -> GaussianState:
    """Product state of the given states, modes concatenated in order."""
    if not states:
        raise ValueError("need at least one state")
    total = sum(s.n_modes for s in states)
    mean = np.zeros(2 * total)
    cov = np.zeros((2 * total, 2 * total))
    offset = 0
    for s in states:
        n = s.n_modes
        xs = slice(offset, offset + n)
        ps = slice(total + offset, total + offset + n)
        mean[xs] = s.mean[:n]
        mean[ps] = s.mean[n:]
        cov[xs, xs] = s.cov[:n, :n]
        cov[ps, ps] = s.cov[n:, n:]
        cov[xs, ps] = s.cov[:n, n:]
        cov[ps, xs] = s.cov[n:, :n]
        offset += n
    return GaussianState(mean, cov)


# ---------------------------------------------------------------------------
# gates
# ---------------------------------------------------------------------------


def identity_transform(n_modes: int) -> SymplecticTransform:
    return SymplecticTransform(np.eye(2 * n_modes), np.zeros(2 * n_modes))


def _check_mode(n_modes: int, mode: int) -> None:
    if not 0 <= mode < n_modes:
        raise ValueError(f"mode index {mode} out of range for {n_modes} modes")


def squeeze_gate(n_modes: int, mode: int, db: float, quadrature: str = "p") -> SymplecticTransform:
    """Single-mode squeezer scaling one quadrature down by 10^(-db/20)."""
    _check_mode(n_modes, mode)
    if db < 0:
        raise ValueError("squeezing level in dB must be non-negative")
    if quadrature not in ("x", "p"):
        raise ValueError("quadrature must be 'x' or 'p'")
    down = 10.0 ** (-db / 20.0)
    mat = np.eye(2 * n_modes)
    if quadrature == "p":
        mat[mode, mode] = 1.0 / down
        mat[n_modes + mode, n_modes + mode] = down
    else:
        mat[mode, mode] = down
        mat[n_modes + mode, n_modes + mode] = 1.0 / down
    return SymplecticTransform(mat, np.zeros(2 * n_modes))


def qnd_gate(n_modes: int, i: int, j: int, gain: float = 1.0) -> SymplecticTransform:
    """Sum-type two-mode interaction: p_i += gain x_j and p_j += gain x_i.

    Both x quadratures are left untouched, so the interaction is its own
    complement: composing gains g and -g gives the identity.

    Args:
        n_modes: total number of modes.
        i: first mode index.
        j: second mode index, distinct from i.
        gain: interaction strength, default 1.

    Returns:
        The corresponding SymplecticTransform.
    """
    _check_mode(n_modes, i)
    _check_mode(n_modes, j)
    if i == j:
        raise ValueError("the interaction couples two distinct modes")
    mat = np.eye(2 * n_modes)
    mat[n_modes + i, j] = gain
    mat[n_modes + j, i] = gain
    return SymplecticTransform(mat, np.zeros(2 * n_modes))


def beam_splitter(n_modes: int, i: int, j: int, reflectivity: float) -> SymplecticTransform:
    """Real beam splitter acting identically on the x and p blocks.

    The 2x2 mixing matrix is [[sqrt(r), sqrt(1-r)], [sqrt(1-r), -sqrt(r)]],
    which is an involution: applying the same splitter twice is the identity.
    """
    _check_mode(n_modes, i)
    _check_mode(n_modes, j)
    if i == j:
        raise ValueError("beam splitter couples two distinct modes")
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError("reflectivity must lie in [0, 1]")
    c = np.sqrt(reflectivity)
    s = np.sqrt(1.0 - reflectivity)
    mat = np.eye(2 * n_modes)
    for a, b in ((i, j), (n_modes + i, n_modes + j)):
        mat[a, a] = c
        mat[a, b] = s
        mat[b, a] = s
        mat[b, b] = -c
    return SymplecticTransform(mat, np.zeros(2 * n_modes))


def phase_shift(n_modes: int, mode: int, theta: float) -> SymplecticTransform:
    """Single-mode phase rotation.

    Orientation is fixed package-wide: x -> x cos(theta) - p sin(theta) and
    p -> x sin(theta) + p cos(theta), so theta = pi/2 maps x to -p and p to x.
    """
    _check_mode(n_modes, mode)
    c = np.cos(theta)
    s = np.sin(theta)
    mat = np.eye(2 * n_modes)
    mat[mode, mode] = c
    mat[mode, n_modes + mode] = -s
    mat[n_modes + mode, mode] = s
    mat[n_modes + mode, n_modes + mode] = c
    return SymplecticTransform(mat, np.zeros(2 * n_modes))


def displacement(n_modes: int, mode: int, quadrature: str, amount: float) -> SymplecticTransform:
    """Shift one quadrature of one mode by a classical amount.

    The convention is additive: displacing p_i by s maps p_i to p_i + s.
    """
    _check_mode(n_modes, mode)
    shift = np.zeros(2 * n_modes)
    if quadrature == "x":
        shift[mode] = amount
    elif quadrature == "p":
        shift[n_modes + mode] = amount
    else:
        raise ValueError("quadrature must be 'x' or 'p'")
    return SymplecticTransform(np.eye(2 * n_modes), shift)


def apply(state: GaussianState, transform: SymplecticTransform) -> GaussianState:
    """Apply an affine Gaussian unitary to a state.

    Args:
        state: input state.
        transform: transform whose mode count matches the state.

    Returns:
        New state with mean S mean + shift and covariance S cov S^T.
    """
    if transform.matrix.shape[0] != state.mean.size:
        raise ValueError(
            f"transform acts on {transform.n_modes} modes, state has {state.n_modes}"
        )
    s = transform.matrix
    return GaussianState(s @ state.mean + transform.shift, s @ state.cov @ s.T)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------


def apply_loss(state: GaussianState, mode: int, eta: float) -> GaussianState:
    """Mix one mode with vacuum at transmission eta.

    The mode block of the covariance becomes eta V + (1 - eta)/4 I, its
    cross covariances scale by sqrt(eta), and its mean by sqrt(eta).
    Composing transmissions eta and eta' equals a single eta * eta'.

    Args:
        state: input state.
        mode: index of the lossy mode.
        eta: transmission in (0, 1]; 1 is the identity channel.
    """
    _check_mode(state.n_modes, mode)
    if not 0.0 < eta <= 1.0:
        raise ValueError("transmission eta must lie in (0, 1]")
    n = state.n_modes
    scale = np.ones(2 * n)
    scale[mode] = scale[n + mode] = np.sqrt(eta)
    cov = state.cov * np.outer(scale, scale)
    cov[mode, mode] += (1.0 - eta) * VACUUM_VARIANCE
    cov[n + mode, n + mode] += (1.0 - eta) * VACUUM_VARIANCE
    return GaussianState(state.mean * scale, cov)


@dataclass(frozen=True)
class LossModel:
    """Per-stage, per-node transmission budget.

    stages maps a stage label (for example "source", "propagation",
    "detection", "feedforward_tap") to either a single transmission applied
    to every node or a mapping from node id to transmission.  Stages
    compose multiplicatively.
    """

    stages: tuple

    def __init__(self, stages: dict):
        def checked(value) -> float:
            eta = float(value)
            if not 0.0 < eta <= 1.0:
                raise ValueError(f"transmission {eta} outside (0, 1]")
            return eta

        normalized = []
        for label, value in stages.items():
            if isinstance(value, dict):
                entry = tuple(sorted((int(k), checked(v)) for k, v in value.items()))
            else:
                entry = checked(value)
            normalized.append((str(label), entry))
        object.__setattr__(self, "stages", tuple(normalized))

    def stage_labels(self) -> tuple:
        return tuple(label for label, _ in self.stages)

    def efficiency(self, stage: str, node: int) -> float:
        """Transmission of one stage for one node; 1.0 when unspecified."""
        for label, entry in self.stages:
            if label != stage:
                continue
            if isinstance(entry, float):
                return entry
            for k, v in entry:
                if k == node:
                    return v
            return 1.0
        return 1.0

    def composite_efficiency(self, node: int) -> float:
        """Product of every stage's transmission for the node."""
        eta = 1.0
        for label, _ in self.stages:
            eta *= self.efficiency(label, node)
        return eta

    def apply_stage(
        self, state: GaussianState, stage: str, node_order: Sequence[int]
    ) -> GaussianState:
        """Apply one stage's loss to a state whose modes follow node_order."""
        if len(node_order) != state.n_modes:
            raise ValueError("node order length must match the state's mode count")
        out = state
        for index, node in enumerate(node_order):
            eta = self.efficiency(stage, node)
            if eta < 1.0:
                out = apply_loss(out, index, eta)
        return out

    def to_dict(self) -> dict:
        out = {}
        for label, entry in self.stages:
            if isinstance(entry, float):
                out[label] = entry
            else:
                out[label] = {str(k): v for k, v in entry}
        return out


# ---------------------------------------------------------------------------
# quadrature combinations
# ---------------------------------------------------------------------------


def quadrature_selector(n_modes: int, mode: int, angle: float) -> np.ndarray:
    """Unit vector selecting x_mode cos(angle) + p_mode sin(angle)."""
    _check_mode(n_modes, mode)
    u = np.zeros(2 * n_modes)
    u[mode] = np.cos(angle)
    u[n_modes + mode] = np.sin(angle)
    return u


def form_vector(form, n_modes: int, node_order: Sequence[int] | None = None) -> np.ndarray:
    """Resolve a linear quadrature combination to a length-2N vector.

    Accepts either a raw coefficient vector or any object exposing
    coefficient_vector(node_order), such as a nullifier.  When node_order is
    omitted the nodes are assumed to be labelled 1..N in mode order.
    """
    if hasattr(form, "coefficient_vector"):
        order = tuple(node_order) if node_order is not None else tuple(range(1, n_modes + 1))
        if len(order) != n_modes:
            raise ValueError("node order length must match the state's mode count")
        vec = form.coefficient_vector(order)
    else:
        vec = np.asarray(form, dtype=float).reshape(-1)
    if vec.size != 2 * n_modes:
        raise ValueError(f"form has {vec.size} coefficients, expected {2 * n_modes}")
    return vec


def quadrature_variance(
    state: GaussianState, form, node_order: Sequence[int] | None = None
) -> float:
    """Variance of a linear quadrature combination c^T r in the state."""
    c = form_vector(form, state.n_modes, node_order)
    return float(c @ state.cov @ c)


def quadrature_mean(
    state: GaussianState, form, node_order: Sequence[int] | None = None
) -> float:
    """Mean of a linear quadrature combination c^T r in the state."""
    c = form_vector(form, state.n_modes, node_order)
    return float(c @ state.mean)
