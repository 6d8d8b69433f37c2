"""Clamped, optionally dilated 2D neighborhood attention.

Each query position attends to a fixed-cardinality lattice of key/value
positions: `kernel` points per axis spaced `dilation` apart, centered on
the query and translated (never masked or zero-padded) to stay inside
the feature map near borders. Every row of the attention map therefore
mixes exactly k_eff_h * k_eff_w real positions and stays stochastic.

When the requested kernel cannot fit on an axis, it shrinks to the
largest odd count whose span (k_eff - 1) * dilation + 1 still fits,
with a floor of one. The lattice is enumerated height-major (all
column offsets of the first row, then the next row, ...); the backward
pass and the brute-force oracle both depend on that order, so it is
part of the public contract.

Both stages of the sparse-scan layer are instances of this one kernel:
the local-window stage uses dilation 1, the anchor stage uses
dilation equal to the anchor stride.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyDomainError, NumericError, ShapeError, StateError


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Kernel extent and dilation per axis (height, width)."""

    kernel: tuple[int, int]
    dilation: tuple[int, int] = (1, 1)

    def __post_init__(self):
        kh, kw = self.kernel
        dh, dw = self.dilation
        if kh < 1 or kw < 1 or kh % 2 == 0 or kw % 2 == 0:
            raise ConfigError(f"kernel extents must be positive odd, got {self.kernel}")
        if dh < 1 or dw < 1:
            raise ConfigError(f"dilation steps must be >= 1, got {self.dilation}")


def effective_kernel(k: int, side: int, d: int) -> int:
    """Largest odd count <= k whose span fits on an axis of extent `side`."""
    if side < 1:
        raise EmptyDomainError(f"axis of extent {side} has no lattice")
    fit = (side - 1) // d + 1
    if fit % 2 == 0:
        fit -= 1
    return max(1, min(k, fit))


def clamped_lattice(center: int, side: int, k: int, d: int = 1) -> np.ndarray:
    """Lattice of k_eff indices spaced `d` apart, translated into [0, side).

    The lattice is centered on `center` whenever the span fits there;
    near borders the whole lattice shifts (step preserved) so that all
    members stay in bounds.
    """
    if side < 1:
        raise EmptyDomainError(f"axis of extent {side} has no lattice")
    if k < 1 or k % 2 == 0 or d < 1:
        raise ConfigError(f"need odd k >= 1 and d >= 1, got k={k} d={d}")
    if not 0 <= center < side:
        raise ShapeError(f"center {center} outside axis of extent {side}")
    k_eff = effective_kernel(k, side, d)
    span = (k_eff - 1) * d
    start = min(max(center - (k_eff // 2) * d, 0), side - 1 - span)
    return start + d * np.arange(k_eff, dtype=np.int64)


def _axis_lattices(side: int, k: int, d: int) -> np.ndarray:
    """[side, k_eff] lattice member indices for every center on an axis."""
    k_eff = effective_kernel(k, side, d)
    out = np.empty((side, k_eff), dtype=np.int64)
    for c in range(side):
        out[c] = clamped_lattice(c, side, k, d)
    return out


def flat_index_map(H: int, W: int, spec: NeighborhoodSpec) -> np.ndarray:
    """[H, W, n] flattened (row*W + col) key positions per query, height-major."""
    lh = _axis_lattices(H, spec.kernel[0], spec.dilation[0])
    lw = _axis_lattices(W, spec.kernel[1], spec.dilation[1])
    flat = lh[:, None, :, None] * W + lw[None, :, None, :]
    return flat.reshape(H, W, -1)


def _check_qkhw(t: np.ndarray, name: str) -> tuple[int, int, int, int]:
    if t.ndim != 4:
        raise ShapeError(f"{name} must be [heads, H, W, dh], got shape {t.shape}")
    return t.shape


def neighborhood_scores(
    q: np.ndarray, k: np.ndarray, spec: NeighborhoodSpec, scale: float | None = None
) -> np.ndarray:
    """Per-query dot products with the scaled keys on the clamped lattice.

    scores[a, i, j, n] = <q[a, i, j, :], scale * k[a, p(n), :]> with p
    enumerating the lattice height-major. Default scale is dh ** -0.5.
    """
    heads, H, W, dh = _check_qkhw(q, "q")
    if k.shape != q.shape:
        raise ShapeError(f"q/k shapes differ: {q.shape} vs {k.shape}")
    if scale is None:
        scale = dh**-0.5
    idx = flat_index_map(H, W, spec)
    kg = k.reshape(heads, H * W, dh)[:, idx.reshape(H * W, -1), :]
    if scale != 1.0:
        kg = kg * q.dtype.type(scale)
    # batched matvec: [heads, HW, n, dh] @ [heads, HW, dh, 1]
    scores = np.matmul(kg, q.reshape(heads, H * W, dh)[..., None])[..., 0]
    return scores.reshape(heads, H, W, -1)


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    if np.isnan(scores).any():
        raise NumericError("softmax over NaN scores")
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def neighborhood_aggregate(
    attn: np.ndarray, v: np.ndarray, spec: NeighborhoodSpec
) -> np.ndarray:
    """Attention-weighted sum of lattice values, same enumeration as scores."""
    heads, H, W, dh = _check_qkhw(v, "v")
    idx = flat_index_map(H, W, spec)
    n = idx.shape[-1]
    if attn.shape != (heads, H, W, n):
        raise ShapeError(
            f"attn shape {attn.shape} does not match values {(heads, H, W, n)}"
        )
    vg = v.reshape(heads, H * W, dh)[:, idx.reshape(H * W, n), :]
    out = np.matmul(attn.reshape(heads, H * W, 1, n), vg)[:, :, 0, :]
    return out.reshape(heads, H, W, dh)


@dataclass
class KernelSaved:
    """Forward activations needed by kernel_backward."""

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    attn: np.ndarray
    spec: NeighborhoodSpec
    scale: float


def kernel_forward(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, spec: NeighborhoodSpec,
    scale: float | None = None,
) -> tuple[np.ndarray, KernelSaved]:
    """scores -> softmax -> aggregate, returning output and saved state."""
    if scale is None:
        scale = q.shape[-1] ** -0.5
    attn = softmax_rows(neighborhood_scores(q, k, spec, scale))
    out = neighborhood_aggregate(attn, v, spec)
    return out, KernelSaved(q=q, k=k, v=v, attn=attn, spec=spec, scale=scale)


def kernel_backward(grads_out: np.ndarray, saved: KernelSaved) -> dict[str, np.ndarray]:
    """Analytic gradients of the scores -> softmax -> aggregate composite."""
    if saved is None:
        raise StateError("kernel_backward called without saved state")
    for field in ("q", "k", "v", "attn", "spec"):
        if getattr(saved, field, None) is None:
            raise StateError(f"saved state is missing '{field}'")
    q, k, v, attn, spec, scale = (
        saved.q, saved.k, saved.v, saved.attn, saved.spec, saved.scale,
    )
    heads, H, W, dh = q.shape
    if grads_out.shape != v.shape:
        raise ShapeError(f"grads_out shape {grads_out.shape} != values {v.shape}")
    HW = H * W
    idx = flat_index_map(H, W, spec).reshape(HW, -1)
    n = idx.shape[-1]

    g = grads_out.reshape(heads, HW, dh)
    qf = q.reshape(heads, HW, dh)
    af = attn.reshape(heads, HW, n)
    kg = k.reshape(heads, HW, dh)[:, idx, :]  # [heads, HW, n, dh]
    vg = v.reshape(heads, HW, dh)[:, idx, :]

    d_attn = np.matmul(vg, g[..., None])[..., 0]  # [heads, HW, n]
    inner = (af * d_attn).sum(axis=-1, keepdims=True)
    d_scores = af * (d_attn - inner)

    sc = q.dtype.type(scale)
    grad_q = np.matmul(d_scores[:, :, None, :], kg)[:, :, 0, :]
    if scale != 1.0:
        grad_q = grad_q * sc

    # scatter-add into key/value positions (duplicates near borders)
    flat = idx.reshape(-1)
    contrib_k = d_scores[..., None] * qf[:, :, None, :]
    if scale != 1.0:
        contrib_k = contrib_k * sc
    contrib_v = af[..., None] * g[:, :, None, :]

    grad_k = np.zeros((HW, heads, dh), dtype=q.dtype)
    grad_v = np.zeros((HW, heads, dh), dtype=q.dtype)
    np.add.at(grad_k, flat, contrib_k.transpose(1, 2, 0, 3).reshape(HW * n, heads, dh))
    np.add.at(grad_v, flat, contrib_v.transpose(1, 2, 0, 3).reshape(HW * n, heads, dh))

    return {
        "grad_q": grad_q.reshape(heads, H, W, dh),
        "grad_k": grad_k.transpose(1, 0, 2).reshape(heads, H, W, dh),
        "grad_v": grad_v.transpose(1, 0, 2).reshape(heads, H, W, dh),
    }


def kernel_flops(H: int, W: int, heads: int, dh: int, spec: NeighborhoodSpec) -> int:
    """Multiply-accumulate count: scores plus aggregation, softmax excluded."""
    keh = effective_kernel(spec.kernel[0], H, spec.dilation[0])
    kew = effective_kernel(spec.kernel[1], W, spec.dilation[1])
    return 2 * H * W * heads * dh * keh * kew
