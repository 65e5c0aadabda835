"""Trimap generation and recursive per-pixel alpha estimation.

The solver refines opacity over the trimap's UNKNOWN band iteratively.  Each
round estimates local foreground and background colors as window means over
confidently-labeled pixels (trimap labels, plus pixels whose current alpha
has converged past 0.95 / below 0.05), projects the observed color onto the
F-B axis, and smooths the band with one 3x3 averaging pass.  Windows grow by
doubling until both color estimates have samples.  Iteration stops when the
largest per-pixel change drops under ``eps``.

Temporal knowledge of the keyed subject is held as a fuzzy membership grid
blended from successive mattes at rate ``lambda_t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InsufficientLabels, InvalidRadii
from .layering import _binary, _dilate, _erode
from .raster import BG, FG, UNKNOWN, AlphaMatte, Frame, Trimap

DEFAULT_WINDOW = 3
DEFAULT_MAX_ITERS = 20
DEFAULT_EPS = 1.0 / 255.0

# samples with alpha beyond these thresholds join the color estimates
_FG_CONF = 0.95
_BG_CONF = 0.05
# below this squared F-B separation the projection is meaningless
_DEGENERATE_SEP = 1.0


def trimap_from_mask(mask: Frame, r_fg: int = 2, r_bg: int = 4) -> Trimap:
    """Erode the mask into sure-FG, dilate into sure-BG, leave a band UNKNOWN.

    Morphology uses square structuring elements of the given radii with
    edge-replication padding, so a full-frame mask stays all-FG.
    """
    if r_fg < 0 or r_bg < r_fg:
        raise InvalidRadii(f"need r_bg >= r_fg >= 0, got r_fg={r_fg} r_bg={r_bg}")
    m = _binary(mask)
    fg = _erode(m, r_fg, "edge")
    bg = ~_dilate(m, r_bg, "edge")
    labels = np.full(m.shape, UNKNOWN, dtype=np.uint8)
    labels[fg] = FG
    labels[bg] = BG
    return Trimap.from_array(labels)


@dataclass(frozen=True)
class AlphaSolveResult:
    """Solved matte plus solver diagnostics."""

    matte: AlphaMatte
    iterations: int
    converged: bool
    degenerate: frozenset  # flat pixel indices that fell back to alpha = 0.5
    changes: tuple = ()    # max per-pixel change after each iteration


def _integral(arr: np.ndarray) -> np.ndarray:
    """Summed-area table with a zero top row and left column."""
    s = arr.cumsum(axis=0).cumsum(axis=1)
    out = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1) + arr.shape[2:], dtype=np.float64)
    out[1:, 1:] = s
    return out


def _box(ii: np.ndarray, ys, xs, radius, h, w):
    y0 = np.maximum(ys - radius, 0)
    y1 = np.minimum(ys + radius + 1, h)
    x0 = np.maximum(xs - radius, 0)
    x1 = np.minimum(xs + radius + 1, w)
    return ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]


def alpha_solve(
    frame: Frame,
    trimap: Trimap,
    max_iters: int = DEFAULT_MAX_ITERS,
    eps: float = DEFAULT_EPS,
    window: int = DEFAULT_WINDOW,
) -> AlphaSolveResult:
    """Estimate per-pixel opacity for the trimap's UNKNOWN band.

    FG pixels get alpha exactly 1 and BG exactly 0.  Pixels whose local
    foreground and background estimates coincide (squared separation < 1)
    default to 0.5 and are reported in ``degenerate``.
    """
    if (frame.width, frame.height) != (trimap.width, trimap.height):
        raise DimensionMismatch("frame and trimap dimensions differ")
    h, w = frame.height, frame.width
    labels = trimap.to_array()
    fg_lab = labels == FG
    bg_lab = labels == BG
    unk = labels == UNKNOWN

    alpha = np.zeros((h, w))
    alpha[fg_lab] = 1.0
    if not unk.any():
        matte = AlphaMatte.from_array(alpha)
        return AlphaSolveResult(
            matte=matte, iterations=0, converged=True, degenerate=frozenset(), changes=()
        )
    if not fg_lab.any() or not bg_lab.any():
        raise InsufficientLabels("unknown pixels need both FG and BG labels somewhere")

    colors = frame.to_array().astype(np.float64)
    ys, xs = np.nonzero(unk)
    cvals = colors[ys, xs]  # (n, C)
    alpha[unk] = 0.5
    max_radius = max(h, w)

    degenerate = frozenset()
    iterations = 0
    converged = False
    changes = []
    padded_cnt = np.pad(np.ones((h, w)), 1)
    wincnt = np.lib.stride_tricks.sliding_window_view(padded_cnt, (3, 3))
    neighbor_cnt = wincnt.sum(axis=(2, 3))  # in-bounds neighbors per pixel

    for _ in range(max_iters):
        fg_src = fg_lab | (alpha > _FG_CONF)
        bg_src = bg_lab | (alpha < _BG_CONF)
        fg_cnt_ii = _integral(fg_src.astype(np.float64))
        bg_cnt_ii = _integral(bg_src.astype(np.float64))
        fg_sum_ii = _integral(colors * fg_src[:, :, None])
        bg_sum_ii = _integral(colors * bg_src[:, :, None])

        n = ys.size
        fsum = np.zeros((n, frame.channels))
        bsum = np.zeros((n, frame.channels))
        fcnt = np.zeros(n)
        bcnt = np.zeros(n)
        unresolved = np.ones(n, dtype=bool)
        radius = window
        while unresolved.any():
            sel = np.nonzero(unresolved)[0]
            cf = _box(fg_cnt_ii, ys[sel], xs[sel], radius, h, w)
            cb = _box(bg_cnt_ii, ys[sel], xs[sel], radius, h, w)
            good = (cf > 0) & (cb > 0)
            done = sel[good]
            if done.size:
                fcnt[done] = cf[good]
                bcnt[done] = cb[good]
                fsum[done] = _box(fg_sum_ii, ys[done], xs[done], radius, h, w)
                bsum[done] = _box(bg_sum_ii, ys[done], xs[done], radius, h, w)
                unresolved[done] = False
            if radius >= max_radius:
                # precondition guarantees global samples; full-frame window
                rest = np.nonzero(unresolved)[0]
                fcnt[rest] = fg_cnt_ii[h, w]
                bcnt[rest] = bg_cnt_ii[h, w]
                fsum[rest] = fg_sum_ii[h, w]
                bsum[rest] = bg_sum_ii[h, w]
                unresolved[rest] = False
            radius *= 2

        fhat = fsum / fcnt[:, None]
        bhat = bsum / bcnt[:, None]
        d = fhat - bhat
        denom = (d * d).sum(axis=1)
        degen = denom < _DEGENERATE_SEP
        proj = np.zeros(n)
        ok = ~degen
        proj[ok] = ((cvals[ok] - bhat[ok]) * d[ok]).sum(axis=1) / denom[ok]
        proj = np.clip(proj, 0.0, 1.0)
        proj[degen] = 0.5

        projected = alpha.copy()
        projected[ys, xs] = proj

        # one Jacobi-style 3x3 averaging pass over the UNKNOWN band only
        padded = np.pad(projected, 1)
        win = np.lib.stride_tricks.sliding_window_view(padded, (3, 3))
        neighbor_sum = win.sum(axis=(2, 3))
        new_alpha = projected.copy()
        new_alpha[unk] = (neighbor_sum / neighbor_cnt)[unk]

        change = float(np.abs(new_alpha[unk] - alpha[unk]).max())
        changes.append(change)
        alpha = new_alpha
        degenerate = frozenset((ys[degen] * w + xs[degen]).tolist())
        iterations += 1
        if change < eps:
            converged = True
            break

    matte = AlphaMatte.from_array(np.clip(alpha, 0.0, 1.0))
    return AlphaSolveResult(
        matte=matte, iterations=iterations, converged=converged,
        degenerate=degenerate, changes=tuple(changes),
    )


@dataclass(frozen=True)
class FuzzyKnowledge:
    """Temporal foreground membership, blended from mattes at rate lambda_t."""

    width: int
    height: int
    membership: tuple
    lambda_t: float = 0.1

    def __post_init__(self):
        if len(self.membership) != self.width * self.height:
            raise ValueError("membership length != width*height")
        if any(m < 0.0 or m > 1.0 for m in self.membership):
            raise ValueError("membership values must lie in [0, 1]")
        if not 0.0 <= self.lambda_t <= 1.0:
            raise ValueError("lambda_t must lie in [0, 1]")

    def to_array(self) -> np.ndarray:
        return np.asarray(self.membership, dtype=np.float64).reshape(self.height, self.width)


def fuzzy_init(width: int, height: int, lambda_t: float = 0.1, value: float = 0.0) -> FuzzyKnowledge:
    return FuzzyKnowledge(
        width=width, height=height, membership=(value,) * (width * height), lambda_t=lambda_t
    )


def fuzzy_update(knowledge: FuzzyKnowledge, matte: AlphaMatte) -> FuzzyKnowledge:
    """Blend a matte into the membership grid: m' = (1-lambda)*m + lambda*alpha."""
    if (knowledge.width, knowledge.height) != (matte.width, matte.height):
        raise DimensionMismatch("matte dimensions do not match the knowledge grid")
    lam = knowledge.lambda_t
    mem = tuple(
        (1.0 - lam) * m + lam * a for m, a in zip(knowledge.membership, matte.alpha)
    )
    return FuzzyKnowledge(
        width=knowledge.width, height=knowledge.height, membership=mem, lambda_t=lam
    )
