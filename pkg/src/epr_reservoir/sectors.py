"""Block-sparse density matrices for states that commute with ``n1 - n2``.

Every state the protocol produces has this symmetry: the physical vacuum,
thermal products, the TMSV and the two-mode squeeze itself all conserve the
photon-number difference, and so do single-mode damping and the
Jaynes-Cummings kicks. Such a density matrix only has elements

    <n1, n2| rho |n1 - k, n2 - k>,

so it is stored as one ``(n_max1+1-|k|) x (n_max2+1-|k|)`` array per offset
``k``, indexed by ``(n1 - max(k,0), n2 - max(k,0))``. That is O(N^3) numbers
instead of O(N^4), which is what makes mu = 0.97 (about 180 levels per
b-mode) tractable.

Two other block structures show up and are produced on demand:

* charge blocks (fixed ``L = n1 - n2``) - where the squeeze unitary acts;
* total-number blocks of the partial transpose - for the log-negativity.
"""

from __future__ import annotations

import numpy as np

from .fock import HilbertSpec, QuantumState, charge_sector, squeeze_sector_blocks, thermal_probabilities

__all__ = ["SectorState"]


class SectorState:
    """Density matrix commuting with ``n1 - n2``, stored by offset blocks."""

    __slots__ = ("stack", "n_max1", "n_max2", "basis", "r", "truncation_suspect")

    def __init__(self, stack, n_max1, n_max2, basis="a", r=None, truncation_suspect=False):
        K = min(n_max1, n_max2)
        stack = np.asarray(stack, dtype=complex)
        if stack.shape != (2 * K + 1, n_max1 + 1, n_max2 + 1):
            raise ValueError(f"stack shape {stack.shape} inconsistent with cutoffs ({n_max1}, {n_max2})")
        if basis not in ("a", "b"):
            raise ValueError("basis must be 'a' or 'b'")
        if basis == "b" and r is None:
            raise ValueError("b-basis states need the squeeze parameter r")
        stack.setflags(write=False)
        self.stack = stack
        self.n_max1 = int(n_max1)
        self.n_max2 = int(n_max2)
        self.basis = basis
        self.r = None if r is None else float(r)
        self.truncation_suspect = bool(truncation_suspect)

    # --- structure ----------------------------------------------------------

    @property
    def K(self) -> int:
        return min(self.n_max1, self.n_max2)

    @property
    def spec(self) -> HilbertSpec:
        return HilbertSpec(self.n_max1, self.n_max2)

    @property
    def is_pure(self) -> bool:
        return False

    def block(self, k: int) -> np.ndarray:
        a = abs(k)
        return self.stack[k + self.K, : self.n_max1 + 1 - a, : self.n_max2 + 1 - a]

    def _new(self, stack, **kw):
        return SectorState(
            stack,
            self.n_max1,
            self.n_max2,
            kw.get("basis", self.basis),
            kw.get("r", self.r),
            kw.get("truncation_suspect", self.truncation_suspect),
        )

    def flagged(self) -> SectorState:
        return self._new(self.stack, truncation_suspect=True)

    def __repr__(self):
        return (
            f"SectorState(n_max=({self.n_max1}, {self.n_max2}), basis={self.basis!r}, r={self.r}, "
            f"trace={self.trace():.6f})"
        )

    @staticmethod
    def _empty(n_max1, n_max2):
        K = min(n_max1, n_max2)
        return np.zeros((2 * K + 1, n_max1 + 1, n_max2 + 1), dtype=complex)

    # --- conversions ----------------------------------------------------------

    @classmethod
    def from_dense(cls, state: QuantumState, tol=1e-12) -> SectorState:
        """Compress a dense field state; raises if it does not commute with ``n1 - n2``."""
        spec = state.spec
        if spec.include_atom:
            raise ValueError("sector storage is for field-only states")
        n1max, n2max = spec.n_max1, spec.n_max2
        T = state.density_matrix().reshape(n1max + 1, n2max + 1, n1max + 1, n2max + 1)
        stack = cls._empty(n1max, n2max)
        K = min(n1max, n2max)
        kept = 0.0
        for k in range(-K, K + 1):
            lo = max(k, 0)
            n1 = np.arange(lo, n1max + 1 + min(k, 0))[:, None]
            n2 = np.arange(lo, n2max + 1 + min(k, 0))[None, :]
            blk = T[n1, n2, n1 - k, n2 - k]
            stack[k + K, : blk.shape[0], : blk.shape[1]] = blk
            kept += float(np.sum(np.abs(blk) ** 2))
        total = float(np.sum(np.abs(T) ** 2))
        if total - kept > tol * max(total, 1.0):
            raise ValueError("state does not commute with n1 - n2; it cannot be stored by sectors")
        return cls(stack, n1max, n2max, state.basis, state.r, state.truncation_suspect)

    def to_dense(self, validate=False) -> QuantumState:
        n1max, n2max, K = self.n_max1, self.n_max2, self.K
        T = np.zeros((n1max + 1, n2max + 1, n1max + 1, n2max + 1), dtype=complex)
        for k in range(-K, K + 1):
            lo = max(k, 0)
            n1 = np.arange(lo, n1max + 1 + min(k, 0))[:, None]
            n2 = np.arange(lo, n2max + 1 + min(k, 0))[None, :]
            T[n1, n2, n1 - k, n2 - k] = self.block(k)
        dim = (n1max + 1) * (n2max + 1)
        return QuantumState(
            T.reshape(dim, dim), self.spec, self.basis, self.r, self.truncation_suspect, validate=validate
        )

    def _charge_index(self, L):
        """Stack indices of the charge-``L`` block, shaped like ``rho_L``."""
        n1 = charge_sector(L, self.n_max1, self.n_max2)
        p = n1[:, None]
        q = n1[None, :]
        k = p - q
        lo = np.maximum(k, 0)
        return (k + self.K, p - lo, (p - L) - lo), len(n1)

    def charge_blocks(self) -> dict[int, np.ndarray]:
        """``{L: rho_L}`` with ``rho_L[p, q] = <n1_p, n1_p - L| rho |n1_q, n1_q - L>``."""
        out = {}
        for L in range(-self.n_max2, self.n_max1 + 1):
            idx, _ = self._charge_index(L)
            out[L] = self.stack[idx]
        return out

    @classmethod
    def from_charge_blocks(cls, blocks, n_max1, n_max2, basis="a", r=None, truncation_suspect=False):
        stack = cls._empty(n_max1, n_max2)
        proto = cls(stack.copy(), n_max1, n_max2, basis, r)
        for L, rho_L in blocks.items():
            idx, _ = proto._charge_index(L)
            stack[idx] = rho_L
        return cls(stack, n_max1, n_max2, basis, r, truncation_suspect)

    @classmethod
    def from_pure_diagonal(cls, amplitudes, n_max1, n_max2, basis="a", r=None) -> SectorState:
        """``|psi><psi|`` for ``psi = sum_n c_n |n, n>`` (TMSV-like vectors)."""
        amps = np.asarray(amplitudes, dtype=complex)
        if len(amps) > min(n_max1, n_max2) + 1:
            raise ValueError("more amplitudes than the cutoffs allow")
        stack = cls._empty(n_max1, n_max2)
        K = min(n_max1, n_max2)
        n = np.arange(len(amps))
        outer = np.outer(amps, amps.conj())
        for k in range(-(len(amps) - 1), len(amps)):
            lo = max(k, 0)
            rows = n[(n - k >= 0) & (n - k < len(amps))]
            stack[k + K, rows - lo, rows - lo] = outer[rows, rows - k]
        return cls(stack, n_max1, n_max2, basis, r)

    @classmethod
    def thermal(cls, n_bar1, n_bar2, n_max1, n_max2) -> SectorState:
        """Product of thermal states of the physical modes (a basis)."""
        stack = cls._empty(n_max1, n_max2)
        K = min(n_max1, n_max2)
        p = np.outer(thermal_probabilities(n_bar1, n_max1), thermal_probabilities(n_bar2, n_max2))
        stack[K] = p
        return cls(stack, n_max1, n_max2, "a")

    # --- dynamics ------------------------------------------------------------

    def apply_offset_maps(self, mode: int, maps) -> SectorState:
        """Apply a single-mode superoperator that preserves the offset ``k``.

        ``maps[k]`` acts on the mode-``mode`` index of block ``k`` (left
        multiplication for mode 1, right multiplication by the transpose for
        mode 2). Missing keys mean the identity.
        """
        stack = np.array(self.stack)
        K = self.K
        for k, m in maps.items():
            if abs(k) > K:
                continue
            a = abs(k)
            view = stack[k + K, : self.n_max1 + 1 - a, : self.n_max2 + 1 - a]
            if mode == 1:
                view[...] = m @ view
            elif mode == 2:
                view[...] = view @ m.T
            else:
                raise ValueError("mode must be 1 or 2")
        return self._new(stack)

    def squeeze_conjugate(self, r, inverse=False) -> SectorState:
        """``S rho S^dag`` (a -> b) or, with ``inverse``, ``S^dag rho S`` (b -> a)."""
        blocks = squeeze_sector_blocks(r, self.n_max1, self.n_max2, inverse=inverse)
        stack = np.array(self.stack)
        for L, s in blocks.items():
            idx, _ = self._charge_index(L)
            stack[idx] = s @ stack[idx] @ s.T
        if inverse:
            return self._new(stack, basis="a", r=None)
        return self._new(stack, basis="b", r=float(r))

    # --- expectation values ---------------------------------------------------

    def trace(self) -> float:
        return float(np.real(self.stack[self.K].sum()))

    def joint_distribution(self) -> np.ndarray:
        return np.real(self.stack[self.K]).copy()

    def mean_number(self, mode: int) -> float:
        p = self.joint_distribution()
        if mode == 1:
            return float(np.arange(self.n_max1 + 1) @ p.sum(axis=1))
        return float(np.arange(self.n_max2 + 1) @ p.sum(axis=0))

    def pair_moment(self) -> complex:
        """``Tr(rho m1 m2)`` for the lowering operators of the stored basis."""
        blk = self.block(1)  # <n1, n2| rho |n1 - 1, n2 - 1>
        i = np.sqrt(np.arange(1, blk.shape[0] + 1))[:, None]
        j = np.sqrt(np.arange(1, blk.shape[1] + 1))[None, :]
        return complex(np.sum(blk * i * j))

    def overlap(self, psi) -> float:
        """``<psi| rho |psi>`` for a field vector reshaped to ``(n_max1+1, n_max2+1)``."""
        psi = np.asarray(psi).reshape(self.n_max1 + 1, self.n_max2 + 1)
        total = 0.0
        for k in range(-self.K, self.K + 1):
            blk = self.block(k)
            lo = max(k, 0)
            rows, cols = blk.shape
            left = psi[lo : lo + rows, lo : lo + cols]
            right = psi[lo - k : lo - k + rows, lo - k : lo - k + cols]
            total += np.sum(left.conj() * blk * right)
        return float(np.real(total))

    def partial_transpose_blocks(self):
        """Yield the total-number blocks of ``rho^{T_2}`` (Hermitian matrices)."""
        K = self.K
        for M in range(self.n_max1 + self.n_max2 + 1):
            n1 = np.arange(max(0, M - self.n_max2), min(self.n_max1, M) + 1)
            p = n1[:, None]
            q = n1[None, :]
            k = p - q
            lo = np.maximum(k, 0)
            yield self.stack[k + K, p - lo, (M - q) - lo]

    def charge_eigenvalues(self) -> np.ndarray:
        return np.concatenate([np.linalg.eigvalsh(b) for b in self.charge_blocks().values()])
