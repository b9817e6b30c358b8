"""Field moments, synthetic heterodyne records and density-matrix estimation.

The record model is the standard phase-preserving amplification chain
``S = a + h^dag`` with ``h`` thermal: signal shots sample the Husimi Q of the
state plus a complex-Gaussian noise term, background shots the same with the
mode in vacuum.  Moment unscrambling then solves the binomial convolution
recursively, and the estimator fits a Cholesky-parameterized density matrix
to the moments by weighted least squares.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, IllConditionedError, TruncationError
from .hilbert import destroy, displaced_fock_block, padded_space_for

HERMITIAN_PAIR_TOL = 1e-10
SIGMA_FLOOR = 1e-6


def moment_pairs(order_cap: int) -> list[tuple[int, int]]:
    return [(m, n) for m in range(order_cap + 1) for n in range(order_cap + 1 - m)]


@dataclass
class MomentSet:
    """Map (m, n) -> <a^dag^m a^n> with optional standard errors."""

    order_cap: int
    entries: dict
    sigmas: dict | None = None

    def __post_init__(self):
        if (0, 0) in self.entries and abs(self.entries[(0, 0)] - 1.0) > 1e-6:
            raise ValueError("moment (0,0) must be 1")
        for (m, n), v in self.entries.items():
            w = self.entries.get((n, m))
            if w is not None and abs(np.conj(v) - w) > HERMITIAN_PAIR_TOL * max(1.0, abs(v)):
                raise ValueError(f"moments ({m},{n}) and ({n},{m}) not conjugate")

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "n", "re", "im", "sigma"])
            for (m, n), v in sorted(self.entries.items()):
                sig = "" if not self.sigmas else f"{self.sigmas.get((m, n), ''):.12g}"
                w.writerow([m, n, f"{v.real:.12g}", f"{v.imag:.12g}", sig])

    @classmethod
    def from_csv(cls, path) -> "MomentSet":
        import csv

        entries, sigmas = {}, {}
        with open(path, newline="") as fh:
            rd = csv.DictReader(row for row in fh if not row.startswith("#"))
            for row in rd:
                key = (int(row["m"]), int(row["n"]))
                entries[key] = float(row["re"]) + 1j * float(row["im"])
                if row.get("sigma"):
                    sigmas[key] = float(row["sigma"])
        cap = max(m + n for m, n in entries)
        return cls(order_cap=cap, entries=entries, sigmas=sigmas or None)


@dataclass(frozen=True)
class RecordBatch:
    """Complex mode amplitudes per shot, signal and noise-only background."""

    signal_records: np.ndarray
    background_records: np.ndarray

    @property
    def shots(self) -> int:
        return len(self.signal_records)

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["shot_index", "re_S", "im_S", "is_background"])
            for i, s in enumerate(self.signal_records):
                w.writerow([i, f"{s.real:.12g}", f"{s.imag:.12g}", 0])
            for i, s in enumerate(self.background_records):
                w.writerow([i, f"{s.real:.12g}", f"{s.imag:.12g}", 1])

    @classmethod
    def from_csv(cls, path) -> "RecordBatch":
        import csv

        sig, bg = [], []
        with open(path, newline="") as fh:
            rd = csv.DictReader(row for row in fh if not row.startswith("#"))
            for row in rd:
                v = float(row["re_S"]) + 1j * float(row["im_S"])
                (bg if int(row["is_background"]) else sig).append(v)
        return cls(np.asarray(sig), np.asarray(bg))


@dataclass(frozen=True)
class ReconstructionResult:
    rho: np.ndarray
    cost: float
    iterations: int
    fidelity_to_reference: float | None = None


def moment_operators(dim: int, pairs) -> dict:
    """Matrices a^dag^m a^n in the truncated space (exact for supported states)."""
    a = destroy(dim)
    ad = a.conj().T
    a_pows = [np.eye(dim, dtype=complex)]
    for _ in range(max(n for _, n in pairs) if pairs else 0):
        a_pows.append(a @ a_pows[-1])
    ad_pows = [np.eye(dim, dtype=complex)]
    for _ in range(max(m for m, _ in pairs) if pairs else 0):
        ad_pows.append(ad @ ad_pows[-1])
    return {(m, n): ad_pows[m] @ a_pows[n] for m, n in pairs}


def moments_from_state(rho: np.ndarray, order_cap: int = 6) -> MomentSet:
    """All <a^dag^m a^n> with m + n <= order_cap from a density matrix."""
    dim = rho.shape[0]
    pairs = moment_pairs(order_cap)
    ops = moment_operators(dim, pairs)
    entries = {k: complex(np.trace(rho @ op)) for k, op in ops.items()}
    entries[(0, 0)] = 1.0 + 0j
    return MomentSet(order_cap=order_cap, entries=entries)


def _sample_husimi(rho: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Heterodyne (Husimi Q) samples of rho by eigen-mixture rejection sampling."""
    dim = rho.shape[0]
    ev, umat = np.linalg.eigh(rho)
    ev = np.clip(ev.real, 0.0, None)
    ev /= ev.sum()
    counts = rng.multinomial(shots, ev)
    facs = np.sqrt([factorial(n) for n in range(dim)])
    out = np.empty(shots, dtype=complex)
    pos = 0
    for i, cnt in enumerate(counts):
        if cnt == 0:
            continue
        psi = umat[:, i]
        coeffs = psi / facs
        s2 = float(np.sum(np.arange(dim) * np.abs(psi) ** 2)) + 2.0
        # numeric envelope bound for Q/proposal over phase space
        rr = np.linspace(0.0, 4.0 * np.sqrt(s2), 160)
        th = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
        grid = rr[:, None] * np.exp(1j * th[None, :])
        qv = np.exp(-np.abs(grid) ** 2) * np.abs(
            np.polynomial.polynomial.polyval(grid.conj(), coeffs)) ** 2 / np.pi
        gv = np.exp(-np.abs(grid) ** 2 / s2) / (np.pi * s2)
        bound = 1.5 * float((qv / gv).max())
        need = cnt
        chunks = []
        while need > 0:
            nb = max(int(need * bound * 1.4) + 32, 128)
            cand = (rng.normal(size=nb) + 1j * rng.normal(size=nb)) * np.sqrt(s2 / 2.0)
            qc = np.exp(-np.abs(cand) ** 2) * np.abs(
                np.polynomial.polynomial.polyval(cand.conj(), coeffs)) ** 2 / np.pi
            gc = np.exp(-np.abs(cand) ** 2 / s2) / (np.pi * s2)
            acc = cand[rng.random(nb) * bound * gc < qc]
            chunks.append(acc[:need])
            need -= len(acc[:need])
        out[pos:pos + cnt] = np.concatenate(chunks)
        pos += cnt
    return rng.permutation(out)


def synthesize_records(rho: np.ndarray, noise_photons: float, shots: int,
                       seed: int) -> RecordBatch:
    """Draw records of S = a + h^dag with h thermal of mean ``noise_photons``.

    The heterodyne vacuum unit rides along automatically (Q sampling), so the
    background obeys <S^dag S> = 1 + noise_photons for a vacuum input.
    """
    if noise_photons < 0:
        raise ValueError("noise_photons must be nonnegative")
    rng = np.random.default_rng(seed)
    q_sig = _sample_husimi(rho, shots, rng)
    w_sig = (rng.normal(size=shots) + 1j * rng.normal(size=shots)) \
        * np.sqrt(noise_photons / 2.0)
    vac_q = (rng.normal(size=shots) + 1j * rng.normal(size=shots)) * np.sqrt(0.5)
    w_bg = (rng.normal(size=shots) + 1j * rng.normal(size=shots)) \
        * np.sqrt(noise_photons / 2.0)
    return RecordBatch(signal_records=q_sig + np.conj(w_sig),
                       background_records=vac_q + np.conj(w_bg))


def _empirical_moments(records: np.ndarray, order_cap: int) -> dict:
    conj_pows = {0: np.ones_like(records)}
    pows = {0: np.ones_like(records)}
    for k in range(1, order_cap + 1):
        conj_pows[k] = conj_pows[k - 1] * np.conj(records)
        pows[k] = pows[k - 1] * records
    return {(m, n): complex(np.mean(conj_pows[m] * pows[n]))
            for m, n in moment_pairs(order_cap)}


def _unscramble(sig_moms: dict, noise_moms: dict, order_cap: int) -> dict:
    out = {}
    for total in range(order_cap + 1):
        for m in range(total + 1):
            n = total - m
            val = sig_moms[(m, n)]
            for j in range(m + 1):
                for k in range(n + 1):
                    if j == m and k == n:
                        continue
                    val -= comb(m, j) * comb(n, k) * out[(j, k)] \
                        * noise_moms[(m - j, n - k)]
            out[(m, n)] = val
    return out


def moments_from_records(batch: RecordBatch, order_cap: int = 6,
                         n_bootstrap: int = 200, seed: int = 0) -> MomentSet:
    """Signal moments with the noise deconvolved via background statistics.

    <S^dag^m S^n> = sum C(m,j) C(n,k) <a^dag^j a^k> <h^{m-j} h^dag^{n-k}> is
    solved recursively in ascending order; the noise moments come from the
    background batch directly.  Bootstrap standard errors over shot resampling
    (signal and background jointly), deterministic per seed with pre-drawn
    child seeds so resamples may run in any order.
    """
    sig = np.asarray(batch.signal_records)
    bg = np.asarray(batch.background_records)
    if len(sig) == 0 or len(bg) == 0:
        raise ValueError("need nonempty signal and background batches")
    min_bg = 40 * (order_cap + 1) ** 2
    if len(bg) < min_bg:
        raise IllConditionedError(
            f"{len(bg)} background shots cannot pin order-{order_cap} noise "
            f"moments (need >= {min_bg})")

    est = _unscramble(_empirical_moments(sig, order_cap),
                      _empirical_moments(bg, order_cap), order_cap)
    est[(0, 0)] = 1.0 + 0j

    # relative scatter check on the top-order noise moment
    top = order_cap // 2
    if top >= 1:
        nn = _empirical_moments(bg, order_cap)[(top, top)]
        halves = [_empirical_moments(bg[: len(bg) // 2], order_cap)[(top, top)],
                  _empirical_moments(bg[len(bg) // 2:], order_cap)[(top, top)]]
        scatter = abs(halves[0] - halves[1])
        if scatter > 2.0 * max(abs(nn), 1.0):
            raise IllConditionedError(
                "background noise moments statistically indistinguishable at "
                f"order {2 * top}")

    sigmas = None
    if n_bootstrap > 0:
        seeds = np.random.SeedSequence(seed).spawn(n_bootstrap)
        samples = {k: [] for k in est}
        for child in seeds:
            rng = np.random.default_rng(child)
            s_idx = rng.integers(0, len(sig), len(sig))
            b_idx = rng.integers(0, len(bg), len(bg))
            boot = _unscramble(_empirical_moments(sig[s_idx], order_cap),
                               _empirical_moments(bg[b_idx], order_cap),
                               order_cap)
            for k, v in boot.items():
                samples[k].append(v)
        sigmas = {}
        for k, vals in samples.items():
            arr = np.asarray(vals)
            sigmas[k] = float(np.sqrt(np.var(arr.real) + np.var(arr.imag)))
        sigmas[(0, 0)] = 0.0

    # enforce the Hermitian pairing exactly (estimates differ by shot noise)
    sym = {}
    for (m, n), v in est.items():
        if (n, m) in est and m > n:
            avg = 0.5 * (v + np.conj(est[(n, m)]))
            sym[(m, n)] = avg
            sym[(n, m)] = np.conj(avg)
        elif m == n:
            sym[(m, n)] = complex(v.real)
    return MomentSet(order_cap=order_cap, entries=sym, sigmas=sigmas)


def mle_reconstruct(moments: MomentSet, dim: int, max_iter: int = 5000,
                    cost_tol: float = 1e-10,
                    reference: np.ndarray | None = None) -> ReconstructionResult:
    """Physical density matrix best matching the moments.

    rho = T^dag T / Tr(T^dag T) with lower-triangular T guarantees PSD and
    unit trace; the weighted squared moment residual is minimized by L-BFGS
    with the analytic gradient (weights 1/sigma^2, floored at 1e-6).
    """
    pairs = sorted(moments.entries)
    ops = moment_operators(dim, pairs)
    amat = np.stack([ops[k] for k in pairs])
    target = np.array([moments.entries[k] for k in pairs])
    if moments.sigmas:
        weights = 1.0 / np.maximum(
            np.array([moments.sigmas.get(k, SIGMA_FLOOR) for k in pairs]),
            SIGMA_FLOOR) ** 2
    else:
        weights = np.ones(len(pairs))

    tril = np.tril_indices(dim)
    n_tril = len(tril[0])

    def unpack(x):
        t = np.zeros((dim, dim), dtype=complex)
        t[tril] = x[:n_tril] + 1j * x[n_tril:]
        return t

    def cost_grad(x):
        t = unpack(x)
        gram = t.conj().T @ t
        s = np.trace(gram).real
        rho = gram / s
        resid = np.einsum("kij,ji->k", amat, rho) - target
        cost = float(np.sum(weights * np.abs(resid) ** 2))
        lam = np.einsum("k,kij->ij", weights * np.conj(resid), amat)
        sym = lam + lam.conj().T
        grad_t = 2.0 * (t @ sym - np.trace(sym @ rho).real * t) / s
        grad_t = np.tril(grad_t)
        return cost, np.concatenate([grad_t[tril].real, grad_t[tril].imag])

    # linear-inversion start, projected to the PSD cone
    bt = np.stack([ops[k].T.reshape(-1) for k in pairs])
    sol, *_ = np.linalg.lstsq(bt, target, rcond=None)
    r0 = sol.reshape(dim, dim)
    r0 = 0.5 * (r0 + r0.conj().T)
    ev, umat = np.linalg.eigh(r0)
    ev = np.clip(ev, 1e-6, None)
    r0 = (umat * ev) @ umat.conj().T
    r0 /= np.trace(r0).real
    t0 = np.linalg.cholesky(r0 + 1e-9 * np.eye(dim))
    x0 = np.concatenate([t0[tril].real, t0[tril].imag])

    res = minimize(cost_grad, x0, jac=True, method="L-BFGS-B",
                   options=dict(maxiter=max_iter, ftol=cost_tol, gtol=1e-14,
                                maxcor=40))
    t = unpack(res.x)
    gram = t.conj().T @ t
    rho = gram / np.trace(gram).real
    if not res.success and res.fun > 1e-6:
        raise ConvergenceError("moment fit did not converge", best=rho,
                               gradient_norm=float(np.linalg.norm(res.jac)))
    fid = fidelity(rho, reference) if reference is not None else None
    return ReconstructionResult(rho=rho, cost=float(res.fun),
                                iterations=int(res.nit),
                                fidelity_to_reference=fid)


def fidelity(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(a) b sqrt(a))."""
    if rho_a.shape != rho_b.shape:
        raise ValueError("dimension mismatch")
    ev, umat = np.linalg.eigh(0.5 * (rho_a + rho_a.conj().T))
    sq = (umat * np.sqrt(np.clip(ev, 0.0, None))) @ umat.conj().T
    inner = sq @ rho_b @ sq
    lam = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(lam, 0.0, None))))


def state_summary(rho: np.ndarray) -> dict:
    """Populations, purity and the leading off-diagonal coherences."""
    pops = np.diag(rho).real.copy()
    purity = float(np.trace(rho @ rho).real)
    coher = {(i, i + 1): complex(rho[i, i + 1]) for i in range(rho.shape[0] - 1)}
    return {"populations": pops, "purity": purity, "coherences": coher}


def displace_state(rho: np.ndarray, beta: complex, out_dim: int | None = None,
                   leak_tol: float = 1e-4) -> np.ndarray:
    """D(beta) rho D(beta)^dag, computed in a padded space and cropped back.

    The displacement block is exact (closed form), and the product is exact
    because rho's support lies inside it.  ``out_dim`` defaults to the input
    dimension; pass a larger value to keep the displaced tail.  Raises
    TruncationError when the cropped trace leakage exceeds ``leak_tol``.
    """
    dim = rho.shape[0]
    if abs(beta) ** 2 > dim / 4.0 + 1e-12:
        raise ValueError("|beta|^2 exceeds dim/4 cutoff safety bound")
    if out_dim is None:
        out_dim = dim
    space = padded_space_for(beta, max(dim, out_dim))
    nw = space.working_dim
    block = displaced_fock_block(complex(beta), nw)
    big = np.zeros((nw, nw), dtype=complex)
    big[:dim, :dim] = rho
    out = block @ big @ block.conj().T
    crop = out[:out_dim, :out_dim]
    leak = 1.0 - float(np.trace(crop).real)
    if leak > leak_tol:
        raise TruncationError(f"displacement leakage {leak:.2e} > {leak_tol}")
    return crop / np.trace(crop).real


def displace_moments(moments: MomentSet, beta: complex) -> MomentSet:
    """Moments of the displaced state, by the exact binomial shift.

    <a^dag^m a^n>_displaced = sum_jk C(m,j) C(n,k) conj(beta)^{m-j} beta^{n-k}
    <a^dag^j a^k>; no truncation is involved.  Standard errors, when present,
    are propagated by the same linear combination in quadrature.
    """
    out = {}
    sig_out = {} if moments.sigmas else None
    for (m, n) in moments.entries:
        val = 0.0 + 0j
        var = 0.0
        for j in range(m + 1):
            for k in range(n + 1):
                if (j, k) not in moments.entries:
                    continue
                coef = comb(m, j) * comb(n, k) \
                    * np.conj(beta) ** (m - j) * beta ** (n - k)
                val += coef * moments.entries[(j, k)]
                if sig_out is not None:
                    var += abs(coef) ** 2 * moments.sigmas.get((j, k), 0.0) ** 2
        out[(m, n)] = val
        if sig_out is not None:
            sig_out[(m, n)] = float(np.sqrt(var))
    out[(0, 0)] = 1.0 + 0j
    return MomentSet(order_cap=moments.order_cap, entries=out, sigmas=sig_out)
