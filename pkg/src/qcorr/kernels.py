"""Differentiable building blocks on state factors.

States inside the optimizers are carried as factors ``A`` with
``rho = A A^dagger / ||A||_F^2``. Every constructor here returns a factor and
has a matching ``*_pullback`` mapping the gradient with respect to the output
(see :mod:`qcorr.parametrize` for the convention) to its inputs.
"""
from __future__ import annotations

import numpy as np

LN2 = np.log(2.0)
LOG_FLOOR = 1e-300
SUPPORT_CUTOFF = 1e-12
DEGENERATE_GAP = 1e-9


# distances between factored states ----------------------------------------


def fidelity_factors(a: np.ndarray, w: np.ndarray, want_a: bool = True, want_w: bool = True):
    """Root fidelity of ``a a^+ / |a|^2`` and ``w w^+ / |w|^2`` with gradients.

    Uses ``F = ||a^+ w||_* / (|a| |w|)``, valid for any pair of factors.
    """
    na = float(np.vdot(a, a).real)
    nw = float(np.vdot(w, w).real)
    m = a.conj().T @ w
    p, s, qh = np.linalg.svd(m, full_matrices=False)
    rt = np.sqrt(na * nw)
    f = float(np.sum(s)) / rt
    ga = gw = None
    if want_a or want_w:
        polar = p @ qh
        if want_w:
            gw = a @ polar / rt - f * w / nw
        if want_a:
            ga = w @ polar.conj().T / rt - f * a / na
    return f, ga, gw


def bures_factors(a, w, want_a=True, want_w=True):
    f, ga, gw = fidelity_factors(a, w, want_a, want_w)
    return 2.0 - 2.0 * f, (None if ga is None else -2.0 * ga), (None if gw is None else -2.0 * gw)


def _eig(m):
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return np.clip(w, 0.0, None), v


def _log2_on_support(w):
    out = np.zeros_like(w)
    on = w > SUPPORT_CUTOFF
    out[on] = np.log2(w[on])
    return out


def _dentropy(w):
    """``-d(x log2 x)/dx`` on the support, zero elsewhere."""
    out = np.zeros_like(w)
    on = w > SUPPORT_CUTOFF
    out[on] = -(np.log2(w[on]) + 1.0 / LN2)
    return out


def _dlog2_kernel(w):
    """Divided differences of log2 on eigenvalues ``w`` (log floored at LOG_FLOOR)."""
    lw = np.log(np.clip(w, LOG_FLOOR, None))
    da = w[:, None] - w[None, :]
    sa = w[:, None] + w[None, :]
    close = np.abs(da) <= DEGENERATE_GAP * np.maximum(sa, LOG_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(close, 2.0 / np.maximum(sa, LOG_FLOOR), (lw[:, None] - lw[None, :]) / np.where(close, 1.0, da))
    return k / LN2


def relent_factors(a, w, want_a=True, want_w=True):
    """``S(rho||sigma)`` in bits for factored states, with gradients.

    Returns ``inf`` (and no gradients) when the support condition fails.
    """
    na = float(np.vdot(a, a).real)
    nw = float(np.vdot(w, w).real)
    rho = a @ a.conj().T / na
    sigma = w @ w.conj().T / nw
    wr, vr = _eig(rho)
    ws, vs = _eig(sigma)
    rho_s = vs.conj().T @ rho @ vs
    diag = np.real(np.diag(rho_s))
    off = ws <= SUPPORT_CUTOFF
    if np.any(diag[off] > SUPPORT_CUTOFF):
        return np.inf, None, None
    lr = _log2_on_support(wr)
    ls = np.log2(np.clip(ws, LOG_FLOOR, None))
    ls_supp = np.where(off, 0.0, ls)
    value = float(np.sum(wr * lr) - np.sum(diag * ls_supp))
    ga = gw = None
    if want_w:
        k = -(vs @ (_dlog2_kernel(ws) * rho_s) @ vs.conj().T)
        gw = 2.0 * (k @ w - np.real(np.trace(k @ sigma)) * w) / nw
    if want_a:
        k = (vr * lr) @ vr.conj().T - (vs * ls) @ vs.conj().T
        ga = 2.0 * (k @ a - np.real(np.trace(k @ rho)) * a) / na
    return max(value, 0.0) if value > -1e-9 else value, ga, gw


def distance_factors(kind: str, a, w, want_a=True, want_w=True):
    if kind == "bures":
        return bures_factors(a, w, want_a, want_w)
    if kind == "relent":
        return relent_factors(a, w, want_a, want_w)
    raise ValueError(f"unknown distance {kind!r}")


def entropy_factor(a):
    """``-tr(rho log2 rho)`` of ``rho = a a^+`` (no normalization) and its gradient."""
    rho = a @ a.conj().T
    w, v = _eig(rho)
    val = -float(np.sum(w * _log2_on_support(w)))
    g = 2.0 * ((v * _dentropy(w)) @ v.conj().T) @ a
    return val, g


# structural factor maps ----------------------------------------------------


def sep_factor(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Columns ``left[k] (x) right[k]``: a mixture of K (unnormalized) product vectors."""
    k = left.shape[0]
    return (left[:, :, None] * right[:, None, :]).reshape(k, -1).T


def sep_pullback(left, right, g):
    k, da = left.shape
    db = right.shape[1]
    t = g.T.reshape(k, da, db)
    gl = np.einsum("kab,kb->ka", t, right.conj())
    gr = np.einsum("kab,ka->kb", t, left.conj())
    return gl, gr


def cq_factor(u: np.ndarray, blocks: np.ndarray) -> np.ndarray:
    """``W[(x,b),(i,c)] = u[x,i] B_i[b,c]`` so that ``W W^+ = sum_i |u_i><u_i| (x) B_i B_i^+``."""
    dcl = u.shape[0]
    _, db, t = blocks.shape
    w = np.einsum("xi,ibc->xbic", u, blocks)
    return w.reshape(dcl * db, dcl * t)


def cq_pullback(u, blocks, g):
    dcl = u.shape[0]
    _, db, t = blocks.shape
    t4 = g.reshape(dcl, db, dcl, t)
    gu = np.einsum("xbic,ibc->xi", t4, blocks.conj())
    gb = np.einsum("xbic,xi->ibc", t4, u.conj())
    return gu, gb


def kron_pullback(ua, ub, g):
    da, db = ua.shape[0], ub.shape[0]
    t = g.reshape(da, db, da, db)
    gua = np.einsum("ijkl,jl->ik", t, ub.conj())
    gub = np.einsum("ijkl,ik->jl", t, ua.conj())
    return gua, gub


def scaled_columns(u, c):
    """``u diag(c)``: for a unitary ``u`` this factors a state diagonal in that basis."""
    return u * c[None, :]


def scaled_columns_pullback(u, c, g):
    return g * np.conj(c)[None, :], np.einsum("xi,xi->i", g, u.conj())


def pinch_factor(a: np.ndarray, u: np.ndarray, dcl: int) -> np.ndarray:
    """Factor of the pinching of ``a a^+`` on its first ``dcl``-dimensional factor in basis ``u``.

    Column block ``i`` is ``(|u_i><u_i| (x) I) a``; the result has ``dcl`` times as many columns.
    """
    d, m = a.shape
    db = d // dcl
    t = a.reshape(dcl, db, m)
    c = np.einsum("yi,ybf->ibf", u.conj(), t)
    w = np.einsum("xi,ibf->xbif", u, c)
    return w.reshape(d, dcl * m)


def pinch_pullback(a, u, dcl, g):
    d, m = a.shape
    db = d // dcl
    t = a.reshape(dcl, db, m)
    c = np.einsum("yi,ybf->ibf", u.conj(), t)
    g4 = g.reshape(dcl, db, dcl, m)
    gu = np.einsum("xbif,ibf->xi", g4, c.conj())
    h = np.einsum("xi,xbif->ibf", u.conj(), g4)
    ga = np.einsum("yi,ibf->ybf", u, h).reshape(d, m)
    gu = gu + np.einsum("ibf,ybf->yi", h.conj(), t)
    return ga, gu


def ptrace_factor(w: np.ndarray, dims, traced) -> np.ndarray:
    """Factor of the partial trace over ``traced`` subsystems: traced indices move into columns."""
    dims = list(dims)
    n = len(dims)
    keep = [i for i in range(n) if i not in set(traced)]
    tr = sorted(set(traced))
    m = w.shape[1]
    t = w.reshape(dims + [m]).transpose(keep + tr + [n])
    dk = int(np.prod([dims[i] for i in keep]))
    return t.reshape(dk, -1)


def ptrace_pullback(dims, traced, m, g):
    dims = list(dims)
    n = len(dims)
    keep = [i for i in range(n) if i not in set(traced)]
    tr = sorted(set(traced))
    perm = keep + tr + [n]
    t = g.reshape([dims[i] for i in keep] + [dims[i] for i in tr] + [m])
    return t.transpose(np.argsort(perm)).reshape(int(np.prod(dims)), m)


def extension_factor(psi0: np.ndarray, v: np.ndarray, anc: tuple[int, ...]) -> np.ndarray:
    """Factor of an extension of ``rho_ab = psi0 psi0^+``.

    ``psi0`` has shape ``(da, db, r)``; the isometry ``v`` maps the purifying
    space (dim r) into ``a' (x) [b'] (x) F``. One ancilla entry gives layout
    ``(a, a', b)``; two give ``(a, a', b, b')``.
    """
    da, db, r = psi0.shape
    if len(anc) == 1:
        v4 = v.reshape(anc[0], -1, r)
        out = np.einsum("abk,xfk->axbf", psi0, v4)
    else:
        v4 = v.reshape(anc[0], anc[1], -1, r)
        out = np.einsum("abk,xyfk->axbyf", psi0, v4)
    return out.reshape(-1, out.shape[-1])


def extension_pullback(psi0, anc, g):
    da, db, r = psi0.shape
    if len(anc) == 1:
        g4 = g.reshape(da, anc[0], db, -1)
        gv = np.einsum("axbf,abk->xfk", g4, psi0.conj())
    else:
        g4 = g.reshape(da, anc[0], db, anc[1], -1)
        gv = np.einsum("axbyf,abk->xyfk", g4, psi0.conj())
    return gv.reshape(-1, r)


# pinched entropy -------------------------------------------------------------


def pinched_entropy(rho: np.ndarray, u: np.ndarray, dcl: int):
    """``S(P_u(rho))`` for the pinching on the first ``dcl`` factor, with gradients.

    Returns ``(value, K, grad_u)`` with ``K`` the Hermitian operator such that
    ``dS = tr(K d rho)``. No normalization is applied to ``rho``.
    """
    d = rho.shape[0]
    db = d // dcl
    t = rho.reshape(dcl, db, dcl, db)
    blocks = np.einsum("xi,xbyc,yi->ibc", u.conj(), t, u)
    val = 0.0
    derivs = np.empty_like(blocks)
    for i in range(dcl):
        w, v = _eig(blocks[i])
        val -= float(np.sum(w * _log2_on_support(w)))
        derivs[i] = (v * _dentropy(w)) @ v.conj().T
    # rho (u_i (x) I) S'(beta_i), traced over b
    m = np.einsum("xbyc,yi,icd->xibd", t, u, derivs)
    gu = 2.0 * np.einsum("xibb->xi", m)
    k = np.einsum("xi,ibc,yi->xbyc", u, derivs, u.conj()).reshape(d, d)
    return val, k, gu
