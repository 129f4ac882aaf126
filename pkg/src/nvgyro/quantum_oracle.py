"""Exact Lindblad steady states at desk scale.

A truncated Fock mode coupled to a handful of three-level spins, solved as
a sparse superoperator.  Used to validate the mean-field closure where it
is provably tight (weak drive) and to document where it is not.
"""

import json
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lambda_dynamics import LambdaParams, lindblad_ops, solve_steady_state

DENSE_DIM_LIMIT = 200


@dataclass(frozen=True)
class OracleConfig:
    params: LambdaParams       # with n_spins := n_spins below
    n_spins: int = 1
    fock_cutoff: int = 20

    def __post_init__(self):
        if self.n_spins not in (1, 2, 3):
            raise ValueError("oracle supports 1-3 spins")
        if self.fock_cutoff > 30 or self.fock_cutoff < 2:
            raise ValueError("fock_cutoff must be in [2, 30]")
        if self.dim > 810:
            raise ValueError(
                f"Hilbert dimension {self.dim} too large "
                f"(superoperator would be {self.dim**2}x{self.dim**2})")

    @property
    def dim(self):
        return self.fock_cutoff * 3 ** self.n_spins


def rescale_to_collective(params: LambdaParams, n_spins,
                          target_collective=None) -> LambdaParams:
    """Single-spin coupling such that g sqrt(n_spins) matches a target
    collective coupling (default: the full ensemble's g sqrt(N))."""
    if target_collective is None:
        target_collective = params.g_s * np.sqrt(params.n_spins)
    g = target_collective / np.sqrt(n_spins)
    return replace(params, g_s=g, n_spins=float(n_spins))


def _annihilation(n):
    return sp.diags(np.sqrt(np.arange(1, n)), 1, format="csr")


def _embed(ops_per_site):
    """Kronecker product over (cavity, spin_1, ..., spin_n)."""
    out = ops_per_site[0]
    for o in ops_per_site[1:]:
        out = sp.kron(out, o, format="csr")
    return out


def _site_ops(config: OracleConfig):
    nf = config.fock_cutoff
    ns = config.n_spins
    id_f = sp.identity(nf, format="csr")
    id_s = sp.identity(3, format="csr")
    a = _embed([_annihilation(nf)] + [id_s] * ns)

    def spin_op(mat, k):
        ops = [id_f] + [id_s] * ns
        ops[1 + k] = sp.csr_matrix(mat)
        return _embed(ops)

    return a, spin_op


def build_hamiltonian(config: OracleConfig):
    """Rotating-frame Hamiltonian with the drive folded in as i J (a^dag - a)."""
    p = config.params
    a, spin_op = _site_ops(config)
    h = p.delta * (a.getH() @ a)
    h = h + 1j * p.drive_j * (a.getH() - a)
    e_ee = np.zeros((3, 3)); e_ee[2, 2] = 1.0
    e_22 = np.zeros((3, 3)); e_22[1, 1] = 1.0
    e_e1 = np.zeros((3, 3)); e_e1[2, 0] = 1.0
    e_e2 = np.zeros((3, 3)); e_e2[2, 1] = 1.0
    for k in range(config.n_spins):
        h = h + p.delta_s * spin_op(e_ee, k) + p.delta_2 * spin_op(e_22, k)
        cpl = p.g_s * (a @ spin_op(e_e1, k))
        h = h + cpl + cpl.getH()
        drv = 0.5 * p.omega_2 * spin_op(e_e2, k)
        h = h + drv + drv.getH()
    return h.tocsr()


def collapse_ops(config: OracleConfig):
    p = config.params
    a, spin_op = _site_ops(config)
    ops = [np.sqrt(p.kappa) * a]
    for k in range(config.n_spins):
        ops.extend(spin_op(l, k) for l in lindblad_ops(p))
    return ops


def build_liouvillian(config: OracleConfig):
    """Superoperator -i[H, .] + sum_k D[L_k] on column-major vectorized
    density matrices."""
    h = build_hamiltonian(config)
    d = config.dim
    eye = sp.identity(d, format="csr")
    # vec(A X B) = (B^T kron A) vec(X), column-major
    liou = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    for l in collapse_ops(config):
        l = sp.csr_matrix(l)
        ldl = (l.getH() @ l)
        liou = liou + sp.kron(l.conj(), l) \
            - 0.5 * (sp.kron(eye, ldl) + sp.kron(ldl.T, eye))
    return liou.tocsr()


def trace_residual(liou, dim):
    """Trace-preservation check: the identity left vector annihilates the
    generator.  Relative to the largest rate so it is scale-free."""
    tr = sp.identity(dim, format="csr").toarray().reshape(-1, order="F")
    scale = max(1.0, np.max(np.abs(liou.data)))
    return float(np.max(np.abs(tr @ liou)) / scale)


@dataclass(frozen=True)
class OracleSolution:
    rho: np.ndarray
    a_expect: complex
    photon_number: float
    top_fock_population: float
    config: OracleConfig

    def spin_reduced(self, spin=0):
        return _spin_reduced(self.rho, self.config, spin)

    def excited_population(self, spin=0):
        return float(np.real(self.spin_reduced(spin)[2, 2]))


def _spin_reduced(rho, config, spin=0):
    """3x3 reduced density matrix of one spin."""
    nf, ns = config.fock_cutoff, config.n_spins
    shape = [nf] + [3] * ns
    nd = len(shape)
    r = rho.reshape(shape + shape)
    keep = 1 + spin
    # sum the diagonal of every subsystem except the kept spin
    letters = "abcdefgh"
    row = "".join(letters[i] for i in range(nd))
    col = "".join(letters[keep].upper() if i == keep else letters[i]
                  for i in range(nd))
    return np.einsum(row + col + "->" +
                     letters[keep] + letters[keep].upper(), r)


def steady_state_exact(config: OracleConfig,
                       positivity_tol=1e-8) -> OracleSolution:
    """Unique trace-one null vector of the Liouvillian.

    Solved by replacing one row with the trace constraint; dense below
    DENSE_DIM_LIMIT, sparse LU above.
    """
    d = config.dim
    liou = build_liouvillian(config)
    n2 = d * d
    tr_row = sp.identity(d, format="csr").toarray().reshape(1, -1, order="F")
    rhs = np.zeros(n2, dtype=complex)
    rhs[0] = 1.0
    if d < DENSE_DIM_LIMIT:
        mat = liou.toarray()
        mat[0, :] = tr_row
        vec = np.linalg.solve(mat, rhs)
    else:
        mat = liou.tolil()
        mat[0, :] = tr_row
        vec = spla.spsolve(mat.tocsc(), rhs)
    rho = vec.reshape((d, d), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -positivity_tol:
        raise RuntimeError(
            f"steady state not positive: min eigenvalue {evals.min():.3e}")
    nf = config.fock_cutoff
    spin_d = 3 ** config.n_spins
    a_full = _embed([_annihilation(nf)] +
                    [sp.identity(3, format="csr")] * config.n_spins)
    a_expect = complex(np.trace(a_full.toarray() @ rho))
    r4 = rho.reshape(nf, spin_d, nf, spin_d)
    pops = np.einsum("nsns->n", r4).real
    return OracleSolution(rho=rho, a_expect=a_expect,
                          photon_number=float(np.sum(np.arange(nf) * pops)),
                          top_fock_population=float(pops[-1]),
                          config=config)


def cutoff_stability(config: OracleConfig, extra_levels=5):
    """|<a>| shift when the Fock cutoff grows; small iff the truncation is
    adequate."""
    s0 = steady_state_exact(config)
    s1 = steady_state_exact(
        replace(config, fock_cutoff=config.fock_cutoff + extra_levels))
    return abs(s1.a_expect - s0.a_expect), s0, s1


def compare_with_mean_field(config: OracleConfig):
    """JSON-ready record comparing <a> against the mean-field alpha."""
    sol = steady_state_exact(config)
    mf = solve_steady_state(config.params, classify=False)
    a_ex, a_mf = sol.a_expect, mf.state.alpha
    rel = abs(a_ex - a_mf) / max(abs(a_ex), 1e-300)
    return {
        "n_spins": config.n_spins,
        "fock_cutoff": config.fock_cutoff,
        "drive_j": config.params.drive_j,
        "photon_number": sol.photon_number,
        "top_fock_population": sol.top_fock_population,
        "a_exact": [a_ex.real, a_ex.imag],
        "a_meanfield": [a_mf.real, a_mf.imag],
        "rel_err": rel,
    }


def dump_records(records, path):
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")
