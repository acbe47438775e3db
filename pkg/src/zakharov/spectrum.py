"""Generalized buckling eigenproblem A phi = lambda B phi.

The eigenvalues lambda_k of the discrete problem (bilaplacian vs
-Laplacian) set every existence window of the model: nonzero solutions
of the exponential problem exist iff kappa - omega^2 > lambda_1, and
k-fold multiplicity holds in the window (lambda_k, lambda_{k+1}).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .grids import DomainSpec, Field, OperatorSet

__all__ = ["EigenPair", "Spectrum", "solve_spectrum", "rayleigh_quotient"]

# below this matrix size a deterministic dense solve is used
_DENSE_LIMIT = 4700


class EigenSolveError(RuntimeError):
    pass


@dataclass
class EigenPair:
    lam: float
    phi: Field  # normalized so that int |Delta phi|^2 = 1


@dataclass
class Spectrum:
    spec: DomainSpec
    pairs: list[EigenPair]

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    def gap_diagnostic(self) -> np.ndarray:
        """Relative gaps between consecutive eigenvalues (cluster indicator)."""
        lam = self.lambdas
        if lam.size < 2:
            return np.zeros(0)
        return np.diff(lam) / np.maximum(lam[:-1], 1e-300)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12 * np.abs(v).max())
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def solve_spectrum(ops: OperatorSet, k_max: int) -> Spectrum:
    """Smallest k_max eigenpairs of A phi = lambda B phi, sorted ascending.

    Under Navier conditions A = B B exactly, so the pencil reduces to the
    well-conditioned symmetric problem B phi = lambda phi, which is what
    gets solved; the clamped case uses the symmetric-definite pencil
    solver directly.  Eigenfunctions are X-normalized (h^d phi^T A phi
    = 1) with the first nonzero component made positive.

    Residuals are checked in backward-error form,
    |A phi - lambda B phi| / (|A|_1 |phi|) <= 1e-10, since the ratio
    against |A phi| has a float64 rounding floor of roughly
    eps * cond(A) for fourth-order operators.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    m = ops.A.shape[0]
    if k_max >= m:
        raise ValueError("k_max must be much smaller than the number of nodes")
    navier = ops.spec.bc == "navier"
    target = ops.B if navier else ops.A
    if m <= _DENSE_LIMIT:
        if navier:
            lam, V = scipy.linalg.eigh(target.toarray(),
                                       subset_by_index=[0, k_max - 1])
        else:
            lam, V = scipy.linalg.eigh(ops.A.toarray(), ops.B.toarray(),
                                       subset_by_index=[0, k_max - 1])
    else:
        try:
            if navier:
                lam, V = spla.eigsh(target, k=k_max, sigma=0.0, which="LM",
                                    v0=np.ones(m), maxiter=5000)
            else:
                lam, V = spla.eigsh(ops.A, k=k_max, M=ops.B, sigma=0.0,
                                    which="LM", v0=np.ones(m), maxiter=5000)
        except spla.ArpackNoConvergence as exc:  # pragma: no cover
            raise EigenSolveError(f"eigensolver did not converge: {exc}") from exc
        order = np.argsort(lam)
        lam, V = lam[order], V[:, order]

    a_scale = float(abs(ops.A).sum(axis=0).max())  # 1-norm of A
    pairs = []
    for k in range(k_max):
        v = _fix_sign(V[:, k])
        xnorm_sq = ops.w * float(v @ (ops.A @ v))
        phi = Field(ops.spec, v / np.sqrt(xnorm_sq))
        resid = np.linalg.norm(ops.A @ phi.values - lam[k] * (ops.B @ phi.values))
        rel = resid / (a_scale * np.linalg.norm(phi.values))
        if rel > 1e-10:
            raise EigenSolveError(f"eigenpair {k} residual {rel:.2e} exceeds 1e-10")
        pairs.append(EigenPair(float(lam[k]), phi))
    if pairs[0].lam <= 0:
        raise EigenSolveError(f"lambda_1 = {pairs[0].lam} is not positive")
    return Spectrum(ops.spec, pairs)


def rayleigh_quotient(u: Field, ops: OperatorSet) -> float:
    """(u^T A u) / (u^T B u); lower-bounded by lambda_1."""
    v = u.values
    denom = float(v @ (ops.B @ v))
    if denom == 0.0:
        raise ValueError("Rayleigh quotient of the zero field is undefined")
    return float(v @ (ops.A @ v)) / denom
