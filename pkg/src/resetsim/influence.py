"""Discrete-time influence functional as a compressed matrix-product object.

The influence of a Gaussian bath on a system path over Liouville indices
nu_0..nu_{N-1} factorizes into per-lag weights

    I_k(nu, nu') = exp[-(s+ - s-)(Re K_k (s+' - s-') + i Im K_k (s+' + s-'))]

with s the eigenvalues of the coupling operator at the later (nu) and earlier
(nu') step, and K_k the double integral of the bath autocorrelation function
over the lag-k timestep cell.  In terms of the antiderivative kernel eta(t)
(see bath.eta_blocks) that cell integral equals minus the second difference,
which is the sign stored here: Re K_0 >= 0 damps coherences rather than
amplifying them, a convention pinned by the exactly solvable dephasing limit
and the weak-coupling decay-rate oracle.

The full product over pairs is compressed into an MPS over the per-step
Liouville legs by adding one step per layer inside a sliding memory window,
with a Gram-based orthogonalization pass and an SVD truncation pass per layer.
After the build, a gauge pass enforces the exact causal-closure property (any
diagonal Liouville value closes a slot identically), which makes trace
preservation of contractions exact rather than truncation-limited.
"""

import io
import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh, qr, svd

from .bath import DiscretizedBath, eta_blocks
from .errors import BondLimitError, DomainError
from .units import TWO_PI

QUBIT_COUPLING_EIGENVALUES = np.array([0.5, -0.5])


@dataclass
class InfluenceTensors:
    """Per-lag influence blocks for a fixed bath, timestep, and coupling."""

    dt: float
    memory_steps: int
    kernel: np.ndarray            # QUAPI-sign per-lag kernel, length n_steps
    coupling_eigenvalues: np.ndarray
    n_steps: int
    bath_key: str = ""

    @property
    def d_values(self):
        s = self.coupling_eigenvalues
        return np.subtract.outer(s, s).ravel()

    @property
    def p_values(self):
        s = self.coupling_eigenvalues
        return np.add.outer(s, s).ravel()

    @property
    def liouville_dim(self):
        return self.coupling_eigenvalues.size**2

    def lag0_diagonal(self):
        """Self-interaction weights of one step, diagonal over Liouville index."""
        d, p = self.d_values, self.p_values
        k0 = self.kernel[0]
        return np.exp(-d*(k0.real*d + 1j*k0.imag*p))

    def lag_block(self, k):
        """Weight matrix [nu_later, nu_earlier] for lag k >= 1."""
        if not 1 <= k < self.n_steps:
            raise DomainError(f"lag {k} outside 1..{self.n_steps-1}")
        d, p = self.d_values, self.p_values
        kk = self.kernel[k]
        w = kk.real*d + 1j*kk.imag*p
        if k > self.memory_steps:
            return np.ones((d.size, d.size), complex)
        return np.exp(-np.outer(d, w))


def choose_memory_steps(kernel, n_steps, memory_tol=1e-6, max_steps=None):
    """Smallest K whose dropped-lag weight is below memory_tol of the total."""
    mags = np.abs(kernel)
    total = mags.sum()
    if total == 0.0:
        return 1
    tail = np.cumsum(mags[::-1])[::-1]
    ok = np.nonzero(tail < memory_tol*total)[0]
    K = int(ok[0]) if ok.size else n_steps
    capped = max_steps is not None and int(max_steps) < K
    if capped:
        K = int(max_steps)
    elif K > n_steps - 1 and n_steps > 1:
        warnings.warn(
            f"memory tail criterion wants {K} steps; clipped to the "
            f"full {n_steps - 1}-lag horizon", stacklevel=2)
    return max(1, min(K, n_steps - 1 if n_steps > 1 else 1))


def build_influence(sd, dt, n_steps, coupling_eigenvalues=None,
                    memory_tol=1e-6, memory_max_steps=None):
    """Influence blocks from a SpectralDensity or DiscretizedBath.

    coupling_eigenvalues defaults to the two-level values (+1/2, -1/2) of the
    sigma_z/2 coupling operator.  The per-lag kernel carries the damping sign
    convention (cell double integral = minus the second difference of eta).
    """
    if coupling_eigenvalues is None:
        coupling_eigenvalues = QUBIT_COUPLING_EIGENVALUES
    svals = np.asarray(coupling_eigenvalues, dtype=float)
    kernel = -eta_blocks(sd, dt, n_steps)
    K = choose_memory_steps(kernel, n_steps, memory_tol, memory_max_steps)
    if isinstance(sd, DiscretizedBath):
        key = f"modes:{sd.n_modes}:{sd.omega_max:.6g}"
    else:
        key = ":".join(f"{v}" for v in sd.cache_key())
    return InfluenceTensors(dt=float(dt), memory_steps=K, kernel=kernel,
                            coupling_eigenvalues=svals, n_steps=int(n_steps),
                            bath_key=key)


@dataclass
class ProcessTensor:
    """Matrix-product form of the influence functional, reusable across protocols.

    cores[j] has legs [bond_left, liouville, bond_right]; log_scales[j] is a
    per-core log prefactor; caps[j] are the unit-norm causal closures of cores
    j..N-1 with cap_logs the corresponding log norms, and closure_scale the
    all-diagonal closure scalar (exactly 1 for the uncompressed functional).
    """

    dt: float
    n_steps: int
    cores: list
    log_scales: np.ndarray
    caps: list
    cap_logs: np.ndarray
    closure_scale: complex
    svd_cutoff: float
    max_bond: int
    memory_steps: int
    coupling_eigenvalues: np.ndarray
    truncation_error: float
    bath_key: str = ""

    @property
    def bond_dims(self):
        return [c.shape[2] for c in self.cores]

    @property
    def system_dim(self):
        return int(round(np.sqrt(self.cores[0].shape[1])))

    @property
    def liouville_dim(self):
        return self.cores[0].shape[1]


def _orth_gram(M, pre_cut):
    """M ~= Q R with isometric Q; directions below pre_cut (relative) dropped.

    R is recomputed as Q^H M so the factorization is an exact projection even
    when the small singular directions are eps-polluted.
    """
    G = M.conj().T @ M
    try:
        ev, V = eigh(G, check_finite=False)
    except LinAlgError:
        Qm, R = qr(M, mode="economic", check_finite=False)
        return Qm, R
    ev = ev[::-1]
    V = V[:, ::-1]
    top = ev[0]
    if top <= 0:
        return np.zeros((M.shape[0], 1), complex), np.zeros((1, M.shape[1]), complex)
    keep = max(1, int(np.sum(ev >= (pre_cut**2)*top)))
    s = np.sqrt(np.maximum(ev[:keep], top*1e-30))
    Q = (M @ V[:, :keep])/s[None, :]
    R = Q.conj().T @ M
    return Q, R


def _svd_trunc(mat, cutoff, max_bond, use_gram, step):
    """Truncated factorization mat ~= (U S) V; raises when the kept rank
    would have to exceed max_bond."""
    if use_gram and min(mat.shape) > 1:
        G = mat @ mat.conj().T
        try:
            ev, V = eigh(G, check_finite=False)
            ev = ev[::-1]
            V = V[:, ::-1]
            top = max(ev[0], 0.0)
            if top == 0.0:
                return (np.zeros((mat.shape[0], 1), complex), np.zeros(1),
                        np.zeros((1, mat.shape[1]), complex), 0.0)
            want = max(1, int(np.sum(ev >= (cutoff**2)*top)))
            if want > max_bond:
                raise BondLimitError(
                    f"bond dimension {want} exceeds max_bond={max_bond} "
                    f"at step {step}", step=step)
            sv = np.sqrt(np.maximum(ev[:want], top*1e-30))
            um = V[:, :want]
            vt = (um.conj().T @ mat)/sv[:, None]
            tot = float(np.sum(np.maximum(ev, 0.0)))
            err = float(np.sqrt(max(np.sum(np.maximum(ev[want:], 0.0)), 0.0)/tot))
            return um, sv, vt, err
        except LinAlgError:
            pass
    try:
        um, sv, vt = svd(mat, full_matrices=False, check_finite=False,
                         lapack_driver="gesdd")
    except LinAlgError:
        um, sv, vt = svd(mat, full_matrices=False, check_finite=False,
                         lapack_driver="gesvd")
    if sv[0] == 0.0:
        return um[:, :1], sv[:1], vt[:1], 0.0
    want = max(1, int(np.sum(sv >= cutoff*sv[0])))
    if want > max_bond:
        raise BondLimitError(
            f"bond dimension {want} exceeds max_bond={max_bond} at step {step}",
            step=step)
    err = float(np.sqrt((sv[want:]**2).sum())/np.sqrt((sv**2).sum()))
    return um[:, :want], sv[:want], vt[:want], err


def build_process_tensor(inf, svd_cutoff=1e-6, max_bond=256, progress=None,
                         forward="auto"):
    """Contract the influence blocks into matrix-product cores.

    One layer per timestep: the new step couples to the previous memory_steps
    slots through its lag blocks; layers are absorbed with a forward
    orthogonalization pass and a backward truncation pass over the active
    window.  Finishes with the causal-closure gauge pass.
    """
    n = inf.n_steps
    K = inf.memory_steps
    kernel = inf.kernel
    d, p = inf.d_values, inf.p_values
    D = d.size
    u, cls = np.unique(np.round(d, 12), return_inverse=True)
    q = u.size
    w = kernel.real[:, None]*d[None, :] + 1j*kernel.imag[:, None]*p[None, :]
    lag = np.exp(-u[None, :, None]*w[:, None, :])          # [k, class, nu]
    b0 = inf.lag0_diagonal()
    onehot = (cls[None, :] == np.arange(q)[:, None]).astype(complex)
    newsite = np.ascontiguousarray((onehot*b0[None, :]).reshape(q, D, 1))
    # The fast Gram-based factorizations square the conditioning: the forward
    # pre-cut cannot safely go below ~5e-8 and backward truncation below
    # ~1e-7, so tighter builds fall back to LAPACK QR/SVD.
    if forward == "auto":
        forward = "gram" if svd_cutoff >= 3e-6 else "qr"
    if forward not in ("gram", "qr"):
        raise DomainError(f"unknown forward pass method {forward!r}")
    use_fwd_gram = forward == "gram"
    use_bwd_gram = svd_cutoff >= 1e-7
    pre_cut = max(0.1*svd_cutoff, 2e-7)

    cores = [b0.reshape(1, D, 1).astype(complex)]
    logs = np.zeros(n)
    toterr = 0.0
    center = 0
    for j in range(1, n):
        W = min(j, K)
        s0 = j - W
        while center < s0:
            c = cores[center]
            a, _, b = c.shape
            Qm, R = qr(c.reshape(a*D, b), mode="economic", check_finite=False)
            nr = np.linalg.norm(R)
            if nr > 0:
                R = R/nr
                logs[center+1] += np.log(nr)
            cores[center] = np.ascontiguousarray(Qm.reshape(a, D, Qm.shape[1]))
            cn = cores[center+1]
            cores[center+1] = np.ascontiguousarray(
                (R @ cn.reshape(cn.shape[0], -1)).reshape(R.shape[0], D, cn.shape[2]))
            logs[center+1] += logs[center]
            logs[center] = 0.0
            center += 1
        # forward pass: expand with this layer's lag factors and orthogonalize
        c = cores[s0]
        a, _, b = c.shape
        f = lag[j - s0]
        M = (c[:, :, :, None]*f.T[None, :, None, :]).reshape(a*D, b*q)
        if use_fwd_gram:
            Qm, R = _orth_gram(M, pre_cut)
        else:
            Qm, R = qr(M, mode="economic", check_finite=False)
        nr = np.linalg.norm(R)
        if nr > 0:
            R = R/nr
            logs[s0+1] += np.log(nr)
        cores[s0] = np.ascontiguousarray(Qm.reshape(a, D, Qm.shape[1]))
        for m in range(s0+1, j):
            c = cores[m]
            a, _, b = c.shape
            r = R.shape[0]
            f = lag[j - m]
            Rr = np.ascontiguousarray(R.reshape(r, a, q).transpose(0, 2, 1))
            T = (Rr.reshape(r*q, a) @ c.reshape(a, D*b)).reshape(r, q, D, b)
            T *= f[None, :, :, None]
            M = T.transpose(0, 2, 3, 1).reshape(r*D, b*q)
            if use_fwd_gram:
                Qm, R = _orth_gram(M, pre_cut)
            else:
                Qm, R = qr(M, mode="economic", check_finite=False)
            nr = np.linalg.norm(R)
            if nr > 0:
                R = R/nr
                logs[m+1] += np.log(nr)
            cores[m] = np.ascontiguousarray(Qm.reshape(r, D, Qm.shape[1]))
        r = R.shape[0]
        cn = (R.reshape(r, q) @ newsite.reshape(q, D)).reshape(r, D, 1)
        cores.append(np.ascontiguousarray(cn))
        # backward pass: truncate
        for m in range(j, s0, -1):
            c = cores[m]
            a, _, b = c.shape
            um, sv, vt, err = _svd_trunc(c.reshape(a, D*b), svd_cutoff,
                                         max_bond, use_bwd_gram, j)
            toterr += err
            cores[m] = np.ascontiguousarray(vt.reshape(sv.size, D, b))
            cp = cores[m-1]
            cores[m-1] = np.ascontiguousarray(
                (cp.reshape(-1, cp.shape[2]) @ (um*sv[None, :]))
                .reshape(cp.shape[0], D, sv.size))
            logs[m-1] += logs[m]
            logs[m] = 0.0
        center = s0
        if progress is not None and j % progress == 0:
            chi_now = max(cc.shape[2] for cc in cores)
            print(f"  step {j}/{n}  chi={chi_now}", flush=True)

    caps, cap_logs, z0 = _causal_closure_gauge(cores, logs,
                                               inf.coupling_eigenvalues.size)
    return ProcessTensor(
        dt=inf.dt, n_steps=n, cores=cores, log_scales=logs, caps=caps,
        cap_logs=cap_logs, closure_scale=z0, svd_cutoff=float(svd_cutoff),
        max_bond=int(max_bond), memory_steps=K,
        coupling_eigenvalues=np.asarray(inf.coupling_eigenvalues, dtype=float),
        truncation_error=float(toterr), bath_key=inf.bath_key)


def _causal_closure_gauge(cores, logs, dim):
    """Make every diagonal Liouville value close each slot identically.

    The exact influence functional satisfies T[:, nu, :] cap = cap' for every
    diagonal nu (those carry no later-time influence), which is what makes
    traces of contracted states exact.  Compression breaks the identity at the
    truncation level; this pass restores it with rank-one updates of the
    diagonal slices and returns the closure caps.
    """
    n = len(cores)
    diag_idx = [a*dim + a for a in range(dim)]
    caps = [None]*(n+1)
    cap_logs = np.zeros(n+1)
    cap = np.ones(1, complex)
    caps[n] = cap
    for i in range(n-1, -1, -1):
        T = cores[i]
        S = np.stack([T[:, nu, :] @ cap for nu in diag_idx])
        cbar = S.mean(axis=0)
        for kk, nu in enumerate(diag_idx):
            T[:, nu, :] += np.outer(cbar - S[kk], cap.conj())
        nr = np.linalg.norm(cbar)
        if nr == 0:
            raise DomainError("vanishing causal closure; process tensor invalid")
        cap = cbar/nr
        caps[i] = cap
        cap_logs[i] = cap_logs[i+1] + np.log(nr) + logs[i]
    z0 = caps[0][0]*np.exp(cap_logs[0])
    return caps, cap_logs, z0


def _step_pair(prop):
    """Propagator halves from a StepPropagator-like object or a 2-tuple."""
    first = getattr(prop, "first", None)
    if first is not None:
        return prop.first, prop.second
    first, second = prop
    return first, second


def contract(pt, propagators, rho0, keep_trajectory=True):
    """Propagate rho0 through the process tensor with per-step system halves.

    propagators is a sequence of length n_steps whose elements provide the two
    symmetric-splitting halves of each step (StepPropagator or (first, second)
    tuples), expressed in the same basis the process tensor was built in.
    Returns the list [rho(t_0), ..., rho(t_N)].  Outputs are the Hermitian
    part of the contracted matrices: the exact functional is invariant under
    the swap-conjugate symmetry, so symmetrizing only removes truncation
    asymmetry.
    """
    dim = pt.system_dim
    D = dim*dim
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (dim, dim):
        raise DomainError(f"rho0 must be {dim}x{dim} for this process tensor")
    if len(propagators) != pt.n_steps:
        raise DomainError(
            f"need {pt.n_steps} propagators, got {len(propagators)}")
    first0, _ = _step_pair(propagators[0])
    if first0.shape != (D, D):
        raise DomainError(
            f"propagator dimension {first0.shape} does not match "
            f"Liouville dimension {D}")
    X = rho0.reshape(1, D).astype(complex)
    logX = 0.0
    out = [rho0.copy()] if keep_trajectory else None
    rho_last = rho0.copy()
    z0 = pt.closure_scale
    for j in range(pt.n_steps):
        g1, g2 = _step_pair(propagators[j])
        X = X @ g1.T
        X = np.matmul(X.T[:, None, :], pt.cores[j].transpose(1, 0, 2))[:, 0, :].T
        X = X @ g2.T
        nr = np.linalg.norm(X)
        if nr == 0.0:
            raise DomainError(f"state annihilated at step {j}")
        X = X/nr
        logX += np.log(nr) + pt.log_scales[j]
        rho = (pt.caps[j+1] @ X).reshape(dim, dim)
        rho = rho*(np.exp(logX + pt.cap_logs[j+1])/z0)
        rho = 0.5*(rho + rho.conj().T)
        rho_last = rho
        if keep_trajectory:
            out.append(rho)
    return out if keep_trajectory else rho_last


_MAGIC = b"RSPT"
_VERSION = 1


def save_process_tensor(pt, path):
    """Persist to the versioned little-endian binary cache format.

    Layout: magic 'RSPT', u32 version, u64 header length, JSON header,
    then for each core a u32 triple (shape) followed by complex128
    little-endian data, then the caps as u32 length + complex128 data.
    """
    header = {
        "dt": pt.dt, "n_steps": pt.n_steps, "svd_cutoff": pt.svd_cutoff,
        "max_bond": pt.max_bond, "memory_steps": pt.memory_steps,
        "coupling_eigenvalues": list(map(float, pt.coupling_eigenvalues)),
        "truncation_error": pt.truncation_error, "bath_key": pt.bath_key,
        "closure_scale": [pt.closure_scale.real, pt.closure_scale.imag],
        "log_scales": list(map(float, pt.log_scales)),
        "cap_logs": list(map(float, pt.cap_logs)),
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for c in pt.cores:
            fh.write(struct.pack("<III", *c.shape))
            fh.write(np.ascontiguousarray(c, dtype="<c16").tobytes())
        for cap in pt.caps:
            fh.write(struct.pack("<I", cap.size))
            fh.write(np.ascontiguousarray(cap, dtype="<c16").tobytes())


def load_process_tensor(path):
    """Inverse of save_process_tensor."""
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(4) != _MAGIC:
        raise DomainError(f"{path} is not a process-tensor cache file")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != _VERSION:
        raise DomainError(f"unsupported cache version {version}")
    (hlen,) = struct.unpack("<Q", buf.read(8))
    header = json.loads(buf.read(hlen).decode("utf-8"))
    n = header["n_steps"]
    cores = []
    for _ in range(n):
        shape = struct.unpack("<III", buf.read(12))
        count = shape[0]*shape[1]*shape[2]
        arr = np.frombuffer(buf.read(16*count), dtype="<c16").reshape(shape)
        cores.append(np.ascontiguousarray(arr))
    caps = []
    for _ in range(n + 1):
        (sz,) = struct.unpack("<I", buf.read(4))
        caps.append(np.ascontiguousarray(
            np.frombuffer(buf.read(16*sz), dtype="<c16")))
    zre, zim = header["closure_scale"]
    return ProcessTensor(
        dt=header["dt"], n_steps=n, cores=cores,
        log_scales=np.asarray(header["log_scales"], dtype=float),
        caps=caps, cap_logs=np.asarray(header["cap_logs"], dtype=float),
        closure_scale=complex(zre, zim), svd_cutoff=header["svd_cutoff"],
        max_bond=header["max_bond"], memory_steps=header["memory_steps"],
        coupling_eigenvalues=np.asarray(header["coupling_eigenvalues"]),
        truncation_error=header["truncation_error"],
        bath_key=header["bath_key"])
