"""Truncated two-mode Fock space, optionally tensored with a two-level atom.

Factor order is always (mode 1, mode 2, atom). Operators are plain numpy
arrays; states carry their basis tag ("a" for the physical cavity modes,
"b" for the Bogoliubov modes defined by a squeeze parameter ``r``).

Phase convention: ``S(r) = exp(r a1 a2 - r a1^dag a2^dag)`` with real
``r >= 0``, so ``S(r)^dag |0,0>`` has positive amplitudes
``sech(r) tanh(r)^n`` on ``|n,n>``. A state with b-basis coefficient vector
``c`` is the physical state ``S^dag c``, hence going a -> b applies ``S``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError, TruncationWarning

LEAKAGE_THRESHOLD = 1e-6
EXPM_TOL = 1e-12


@dataclass(frozen=True)
class HilbertSpec:
    """Cutoffs and factor structure of the simulation space."""

    n_max1: int
    n_max2: int
    include_atom: bool = False

    def __post_init__(self):
        for name in ("n_max1", "n_max2"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def dims(self) -> tuple[int, ...]:
        dims = (self.n_max1 + 1, self.n_max2 + 1)
        return dims + (2,) if self.include_atom else dims

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    @property
    def field_dim(self) -> int:
        return (self.n_max1 + 1) * (self.n_max2 + 1)

    def field_only(self) -> HilbertSpec:
        return HilbertSpec(self.n_max1, self.n_max2, False)

    def with_atom(self) -> HilbertSpec:
        return HilbertSpec(self.n_max1, self.n_max2, True)

    @classmethod
    def square(cls, n_max, include_atom=False):
        return cls(n_max, n_max, include_atom)


def recommended_cutoff(n_bar, pad=10, threshold=LEAKAGE_THRESHOLD) -> int:
    """Photon-number cutoff for a mode with mean occupation ``n_bar``.

    Takes the larger of the moment heuristic
    ``ceil(n + 6 sqrt(n (n+1)) + pad)`` and the smallest cutoff at which a
    geometric (thermal / TMSV-marginal) distribution of that mean has
    top-level population below ``threshold / 2`` (the leakage budget is
    shared by two modes). The moment heuristic alone undershoots the tail
    for n_bar above ~2.
    """
    n_bar = float(n_bar)
    if n_bar < 0:
        raise ValueError("n_bar must be non-negative")
    heuristic = math.ceil(n_bar + 6.0 * math.sqrt(n_bar * (n_bar + 1.0)) + pad)
    if n_bar == 0:
        return max(1, heuristic)
    lam = n_bar / (n_bar + 1.0)
    tail = math.ceil(math.log(0.5 * threshold * (1.0 + n_bar)) / math.log(lam))
    return max(1, heuristic, tail)


def annihilation_op(n_max: int) -> np.ndarray:
    """Lowering operator on ``{|0>, ..., |n_max>}``, with ``<n-1|a|n> = sqrt(n)``."""
    if int(n_max) != n_max or n_max < 1:
        raise ValueError(f"n_max must be an integer >= 1, got {n_max!r}")
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


def number_op(n_max: int) -> np.ndarray:
    return np.diag(np.arange(n_max + 1, dtype=float))


def embed(op, factor_index: int, spec: HilbertSpec) -> np.ndarray:
    """Tensor ``op`` into factor ``factor_index`` (0: mode 1, 1: mode 2, 2: atom)."""
    dims = spec.dims
    if not 0 <= factor_index < len(dims):
        raise ValueError(f"factor_index {factor_index} out of range for dims {dims}")
    op = np.asarray(op)
    if op.shape != (dims[factor_index],) * 2:
        raise ValueError(
            f"operator shape {op.shape} does not match factor {factor_index} of dimension {dims[factor_index]}"
        )
    out = np.ones((1, 1))
    for i, d in enumerate(dims):
        out = np.kron(out, op if i == factor_index else np.eye(d))
    return out


def mode_ops(spec: HilbertSpec) -> tuple[np.ndarray, np.ndarray]:
    """Embedded lowering operators of mode 1 and mode 2."""
    return (
        embed(annihilation_op(spec.n_max1), 0, spec),
        embed(annihilation_op(spec.n_max2), 1, spec),
    )


def expm(a, *, check=True, tol=EXPM_TOL) -> np.ndarray:
    """Matrix exponential by scaling and squaring, with a one-level self-check.

    The check recomputes ``expm(a/2)**2`` and requires agreement with the
    direct result to ``tol`` relative to the largest entry.
    """
    a = np.asarray(a)
    result = scipy.linalg.expm(a)
    if not np.all(np.isfinite(result)):
        raise NumericalError("matrix exponential overflowed")
    if check and a.size:
        half = scipy.linalg.expm(a / 2)
        scale = max(1.0, float(np.max(np.abs(result))))
        err = float(np.max(np.abs(half @ half - result))) / scale
        if err > tol:
            raise NumericalError(f"matrix exponential self-check failed: extra squaring changed result by {err:.2e}")
    return result


# --- squeeze operator, built sector by sector ---------------------------------
#
# The generator r (a1 a2 - a1^dag a2^dag) conserves L = n1 - n2, so S is block
# diagonal in L. Each block is a small tridiagonal exponential.


def charge_sector(L: int, n_max1: int, n_max2: int) -> np.ndarray:
    """Mode-1 occupations of the states ``|n1, n1 - L>`` inside the cutoffs."""
    lo = max(L, 0)
    hi = min(n_max1, n_max2 + L)
    return np.arange(lo, hi + 1)


def squeeze_sector_blocks(r, n_max1, n_max2, *, inverse=False, charges=None):
    """Blocks ``{L: S_L}`` of ``S(r)`` (or ``S(r)^dag`` if ``inverse``) over charge sectors."""
    sign = -1.0 if inverse else 1.0
    blocks = {}
    for L in range(-n_max2, n_max1 + 1) if charges is None else charges:
        n1 = charge_sector(L, n_max1, n_max2)
        if len(n1) == 1 or r == 0:
            blocks[L] = np.eye(len(n1))
            continue
        n2 = n1 - L
        # a1 a2 maps position p to p-1 with amplitude sqrt(n1 n2) of the source
        upper = np.zeros((len(n1), len(n1)))
        idx = np.arange(1, len(n1))
        upper[idx - 1, idx] = np.sqrt(n1[1:] * n2[1:])
        gen = sign * r * (upper - upper.T)
        blocks[L] = expm(gen)
    return blocks


def squeeze_op(r, spec: HilbertSpec, *, threshold=LEAKAGE_THRESHOLD) -> np.ndarray:
    """Two-mode squeeze unitary ``S(r) = exp(r a1 a2 - r a1^dag a2^dag)``, real ``r >= 0``.

    Embedded in ``spec`` (identity on the atom if present). Warns with
    :class:`TruncationWarning` if ``S^dag|0,0>`` puts more than ``threshold``
    in the top level of either mode.
    """
    r = float(r)
    if r < 0:
        raise ValueError("squeeze parameter must be real and non-negative")
    n1max, n2max = spec.n_max1, spec.n_max2
    blocks = squeeze_sector_blocks(r, n1max, n2max)
    dim2 = n2max + 1
    s = np.zeros((spec.field_dim, spec.field_dim))
    for L, block in blocks.items():
        n1 = charge_sector(L, n1max, n2max)
        flat = n1 * dim2 + (n1 - L)
        s[np.ix_(flat, flat)] = block
    if r > 0:
        # S is real, so S^dag|00> is the first row of S
        tmsv = s[0, :].reshape(n1max + 1, n2max + 1)
        top = float(np.sum(tmsv[-1, :] ** 2) + np.sum(tmsv[:, -1] ** 2))
        if top > threshold:
            warnings.warn(
                TruncationWarning(
                    f"squeeze_op(r={r}) leaks {top:.2e} into the top Fock level", leakage=top, threshold=threshold
                ),
                stacklevel=2,
            )
    if spec.include_atom:
        s = np.kron(s, np.eye(2))
    return s


# --- states --------------------------------------------------------------------


@dataclass(frozen=True)
class QuantumState:
    """Pure vector or density matrix on ``spec``, tagged with its basis.

    ``basis == "b"`` means the coefficients refer to the Bogoliubov Fock
    basis ``|n1, n2>_b = S(r)^dag |n1, n2>_a``; ``r`` is then required.
    """

    data: np.ndarray
    spec: HilbertSpec
    basis: str = "a"
    r: float | None = None
    truncation_suspect: bool = False
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.basis not in ("a", "b"):
            raise ValueError(f"basis must be 'a' or 'b', got {self.basis!r}")
        if self.basis == "b" and self.r is None:
            raise ValueError("b-basis states need the squeeze parameter r")
        dim = self.spec.dim
        if data.shape not in ((dim,), (dim, dim)):
            raise ValueError(f"state shape {data.shape} does not match dimension {dim}")
        if self.validate:
            self._check()

    def _check(self, tol=1e-10, psd_tol=-1e-8):
        d = self.data
        if d.ndim == 1:
            norm = np.linalg.norm(d)
            if abs(norm - 1) > tol:
                raise ValueError(f"pure state not normalized (norm {norm:.12f})")
            return
        if np.max(np.abs(d - d.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(d).real
        if abs(tr - 1) > tol:
            raise ValueError(f"density matrix trace {tr:.12f} != 1")
        if d.shape[0] <= 2048:
            low = np.linalg.eigvalsh(d)[0]
            if low < psd_tol:
                raise ValueError(f"density matrix has negative eigenvalue {low:.3e}")

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def replace(self, data, **kw):
        """New state with the same tags and new data (no re-validation unless asked)."""
        kw.setdefault("validate", False)
        return QuantumState(
            data,
            kw.pop("spec", self.spec),
            kw.pop("basis", self.basis),
            kw.pop("r", self.r),
            kw.pop("truncation_suspect", self.truncation_suspect),
            **kw,
        )


def fock_state(n1, n2, spec: HilbertSpec, basis="a", r=None) -> QuantumState:
    psi = np.zeros((spec.n_max1 + 1, spec.n_max2 + 1), dtype=complex)
    psi[n1, n2] = 1.0
    return QuantumState(psi.ravel(), spec.field_only(), basis, r)


def vacuum_state(spec: HilbertSpec, basis="a", r=None) -> QuantumState:
    return fock_state(0, 0, spec, basis, r)


def thermal_probabilities(n_bar, n_max) -> np.ndarray:
    """Truncated, renormalized Bose-Einstein distribution."""
    n = np.arange(n_max + 1)
    if n_bar == 0:
        p = (n == 0).astype(float)
    else:
        lam = n_bar / (1.0 + n_bar)
        p = (1 - lam) * lam**n
    return p / p.sum()


def thermal_state(n_bar1, n_bar2, spec: HilbertSpec) -> QuantumState:
    """Product of thermal states of the two physical modes (a basis)."""
    p = np.outer(thermal_probabilities(n_bar1, spec.n_max1), thermal_probabilities(n_bar2, spec.n_max2))
    return QuantumState(np.diag(p.ravel()), spec.field_only(), "a")


def tmsv_amplitudes(r, n_max) -> np.ndarray:
    """Closed-form ``sech(r) tanh(r)^n``, n = 0..n_max (not renormalized)."""
    n = np.arange(n_max + 1)
    return np.tanh(r) ** n / np.cosh(r)


def tmsv_state(r, spec: HilbertSpec, *, sign=1.0, basis="a", r_tag=None) -> QuantumState:
    """Two-mode squeezed vacuum ``S(r)^dag |0,0>`` from the closed-form series.

    ``sign=-1`` gives ``S(r)|0,0>`` (alternating amplitudes), which is the
    b-basis representation of the physical vacuum. Raises if the truncated
    series keeps less than ``1 - 1e-6`` of the norm.
    """
    r = float(r)
    if r < 0:
        raise ValueError("squeeze parameter must be non-negative")
    n_max = min(spec.n_max1, spec.n_max2)
    amps = tmsv_amplitudes(r, n_max) * sign ** np.arange(n_max + 1)
    captured = float(np.sum(amps**2))
    if captured < 1 - 1e-6:
        raise ValueError(
            f"cutoff {n_max} keeps only {captured:.8f} of the TMSV norm; use at least "
            f"{recommended_cutoff(math.sinh(r) ** 2)}"
        )
    psi = np.zeros((spec.n_max1 + 1, spec.n_max2 + 1), dtype=complex)
    psi[np.arange(n_max + 1), np.arange(n_max + 1)] = amps / math.sqrt(captured)
    return QuantumState(psi.ravel(), spec.field_only(), basis, r_tag)


def joint_distribution(state: QuantumState) -> np.ndarray:
    """Fock-basis populations ``P(n1, n2)`` of the field (atom traced out)."""
    spec = state.spec
    d = state.data
    if state.is_pure:
        p = np.abs(d) ** 2
    else:
        p = np.real(np.diag(d))
    if spec.include_atom:
        p = p.reshape(-1, 2).sum(axis=1)
    return p.reshape(spec.n_max1 + 1, spec.n_max2 + 1)


def top_level_population(state) -> float:
    """Population in ``n1 = n_max1`` plus population in ``n2 = n_max2``."""
    p = state.joint_distribution() if hasattr(state, "joint_distribution") else joint_distribution(state)
    return float(p[-1, :].sum() + p[:, -1].sum())


def check_leakage(state, threshold=LEAKAGE_THRESHOLD, where="state", *, stacklevel=2) -> bool:
    """Warn and return True when top-level population exceeds ``threshold``."""
    leak = top_level_population(state)
    if leak > threshold:
        warnings.warn(
            TruncationWarning(
                f"{where}: top Fock level holds {leak:.2e} (> {threshold:.0e}); raise the cutoff",
                leakage=leak,
                threshold=threshold,
            ),
            stacklevel=stacklevel + 1,
        )
        return True
    return False


def basis_transform(state, r, direction: str, *, threshold=LEAKAGE_THRESHOLD):
    """Re-express ``state`` between the physical (a) and Bogoliubov (b) bases.

    ``direction`` is ``"a->b"`` (applies ``S(r)``) or ``"b->a"`` (applies
    ``S(r)^dag``). Works on :class:`QuantumState` and on
    :class:`~epr_reservoir.sectors.SectorState`. The result is flagged
    truncation-suspect, with a warning, when it leaks into the top level.
    """
    if direction not in ("a->b", "b->a"):
        raise ValueError("direction must be 'a->b' or 'b->a'")
    src = direction[0]
    if state.basis != src:
        raise ValueError(f"state is in the {state.basis} basis, cannot apply {direction}")
    if src == "b" and not np.isclose(state.r, r, rtol=0, atol=1e-12):
        raise ValueError(f"state carries r={state.r}, transform requested with r={r}")
    if hasattr(state, "squeeze_conjugate"):
        out = state.squeeze_conjugate(r, inverse=(src == "b"))
    else:
        spec = state.spec
        s = squeeze_op(r, spec, threshold=np.inf)
        u = s if src == "a" else s.T
        if state.is_pure:
            data = u @ state.data
        else:
            data = u @ state.data @ u.conj().T
        out = state.replace(data, basis="b" if src == "a" else "a", r=float(r) if src == "a" else None)
    suspect = check_leakage(out, threshold, where=f"basis_transform({direction}, r={r:.4g})")
    if suspect and not out.truncation_suspect:
        out = out.replace(out.data, truncation_suspect=True) if isinstance(out, QuantumState) else out.flagged()
    return out
