"""State-space sequence kernels.

A linear time-invariant (LTI) state-space system with diagonal state matrix
maps an input sequence x to an output sequence y through a hidden state h:

    h'(t) = A h(t) + B x(t),     y(t) = C h(t)

Discretizing with step ``delta`` under a zero-order hold gives the recurrence

    h_t = A_bar * h_t-1 + B_bar * x_t,    y_t = C . h_t

with ``A_bar = exp(delta*A)`` and ``B_bar = ((exp(delta*A) - 1)/A) * B``.
Because the recurrence is time-invariant it is also a causal convolution with
the kernel ``K = (C.B_bar, C.A_bar.B_bar, ..., C.A_bar^(L-1).B_bar)``.

The selective variant makes ``delta``, ``B`` and ``C`` functions of the current
token, which turns the scan input-dependent (non-LTI); each channel carries its
own diagonal ``A`` row and the per-token parameters are re-discretized on the
fly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DTYPE, Tensor, softplus

# |delta*A| below this uses the series form of (e^z - 1)/z; the direct quotient
# is singular at A = 0 and loses precision nearby.
EXPREL_SWITCH = 1e-4

# elements per precomputed chunk in the selective scan (bounds transient memory)
_CHUNK_ELEMS = 1 << 22


def _exprel(z: Tensor, ez: Tensor | None = None) -> Tensor:
    """(e^z - 1) / z, elementwise, finite at z = 0.

    Below the switch threshold uses the 4-term series
    1 + z/2 + z^2/6 + z^3/24 (relative error < 1e-14 there).
    """
    z = np.asarray(z, dtype=DTYPE)
    if ez is None:
        ez = np.exp(z)
    small = np.abs(z) < EXPREL_SWITCH
    out = (ez - 1.0) / np.where(small, 1.0, z)
    if small.any():
        zs = z[small]
        out[small] = 1.0 + (zs / 2.0) * (1.0 + (zs / 3.0) * (1.0 + zs / 4.0))
    return out


@dataclass(frozen=True)
class LtiSsm:
    """Continuous-time diagonal system: state dim N, diagonal A, vectors B and C,
    time step delta."""

    a: Tensor
    b: Tensor
    c: Tensor
    delta: float

    def __post_init__(self):
        if self.a.ndim != 1 or self.a.shape != self.b.shape or self.a.shape != self.c.shape:
            raise ValueError(
                f"LtiSsm: a/b/c must be equal-length vectors, got "
                f"{self.a.shape}/{self.b.shape}/{self.c.shape}"
            )
        if self.a.shape[0] < 1:
            raise ValueError("LtiSsm: state dim must be >= 1")
        if self.delta <= 0:
            raise ValueError(f"LtiSsm: delta must be > 0, got {self.delta}")

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]


def random_stable_lti(rng: np.random.Generator, state_dim: int) -> LtiSsm:
    """Draw a system with strictly negative diagonal A (so |exp(delta*A)| < 1
    elementwise) and moderate delta; used by property suites."""
    a = -np.exp(rng.uniform(np.log(0.05), np.log(3.0), size=state_dim))
    b = rng.standard_normal(state_dim)
    c = rng.standard_normal(state_dim)
    delta = float(np.exp(rng.uniform(np.log(0.01), 0.0)))
    return LtiSsm(a=a, b=b, c=c, delta=delta)


@dataclass(frozen=True)
class DiscreteLtiSsm:
    """Zero-order-hold discretization of an LtiSsm (diagonal A_bar, vector B_bar)."""

    a_bar: Tensor
    b_bar: Tensor
    c: Tensor


def zoh_discretize(a: Tensor, b: Tensor, delta) -> tuple[Tensor, Tensor]:
    """Zero-order-hold step: A_bar = exp(delta*A), B_bar = ((exp(delta*A)-1)/A)*B.

    Elementwise over ``a`` of shape [N] or [D, N] (with ``b`` broadcastable);
    near delta*A = 0 the quotient is evaluated by series so A = 0 is exact
    (A_bar = 1, B_bar = delta*B).
    """
    delta = np.asarray(delta, dtype=DTYPE)
    if np.any(delta <= 0):
        raise ValueError(f"zoh_discretize: delta must be > 0, got {delta}")
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    z = delta * a
    a_bar = np.exp(z)
    b_bar = delta * _exprel(z, a_bar) * b
    return a_bar, b_bar


def discretize_lti(m: LtiSsm) -> DiscreteLtiSsm:
    a_bar, b_bar = zoh_discretize(m.a, m.b, m.delta)
    return DiscreteLtiSsm(a_bar=a_bar, b_bar=b_bar, c=m.c.astype(DTYPE))


def ssm_scan_recurrent(m: DiscreteLtiSsm, x: Tensor) -> Tensor:
    """Run the recurrence left to right from h_0 = 0: h_t = A_bar*h_t-1 + B_bar*x_t,
    y_t = C . h_t."""
    x = np.asarray(x, dtype=DTYPE)
    h = np.zeros_like(m.a_bar)
    y = np.empty(x.shape[0], dtype=DTYPE)
    for t in range(x.shape[0]):
        h = m.a_bar * h + m.b_bar * x[t]
        y[t] = m.c @ h
    return y


def ssm_kernel(m: DiscreteLtiSsm, length: int) -> Tensor:
    """Convolution kernel K[t] = C . A_bar^t . B_bar for t = 0..length-1."""
    if length < 1:
        raise ValueError(f"ssm_kernel: length must be >= 1, got {length}")
    powers = m.a_bar[:, None] ** np.arange(length, dtype=DTYPE)
    return (m.c * m.b_bar) @ powers


def apply_kernel(kernel: Tensor, x: Tensor) -> Tensor:
    """Causal convolution y_t = sum_{tau <= t} kernel[tau] * x[t - tau]."""
    x = np.asarray(x, dtype=DTYPE)
    return np.convolve(x, np.asarray(kernel, dtype=DTYPE))[: x.shape[0]]


@dataclass(frozen=True)
class SelectiveSsmParams:
    """Input-dependent scan parameters for D channels and state dim N.

    The diagonal state matrix is ``-exp(a_log)`` (strictly negative).  Per-token
    step sizes come from a low-rank projection chain followed by softplus
    (strictly positive); B and C rows are linear projections of the token.
    ``d_skip`` scales the residual passthrough added to the scan output.
    """

    a_log: Tensor  # [D, N]
    w_dt_down: Tensor  # [r, D]
    w_dt_up: Tensor  # [D, r]
    dt_bias: Tensor  # [D]
    w_b: Tensor  # [N, D]
    w_c: Tensor  # [N, D]
    d_skip: Tensor  # [D]

    @property
    def channels(self) -> int:
        return self.a_log.shape[0]

    @property
    def state_dim(self) -> int:
        return self.a_log.shape[1]


def init_selective_params(
    rng: np.random.Generator,
    channels: int,
    state_dim: int,
    dt_rank: int | None = None,
    proj_std: float = 0.02,
) -> SelectiveSsmParams:
    """Seeded initialization: a_log[d, n] = log(n + 1), Gaussian projections,
    zero step bias, unit residual skip."""
    if dt_rank is None:
        dt_rank = max(1, -(-channels // 16))
    a_log = np.tile(np.log(np.arange(1, state_dim + 1, dtype=DTYPE)), (channels, 1))
    return SelectiveSsmParams(
        a_log=a_log,
        w_dt_down=rng.normal(0.0, proj_std, size=(dt_rank, channels)),
        w_dt_up=rng.normal(0.0, proj_std, size=(channels, dt_rank)),
        dt_bias=np.zeros(channels, dtype=DTYPE),
        w_b=rng.normal(0.0, proj_std, size=(state_dim, channels)),
        w_c=rng.normal(0.0, proj_std, size=(state_dim, channels)),
        d_skip=np.ones(channels, dtype=DTYPE),
    )


def selective_scan_explicit(
    a: Tensor,
    delta: Tensor,
    b_tokens: Tensor,
    c_tokens: Tensor,
    d_skip: Tensor,
    x: Tensor,
) -> Tensor:
    """Scan with already-materialized per-token parameters.

    ``a`` is the [D, N] diagonal state matrix, ``delta`` [L, D], ``b_tokens``
    and ``c_tokens`` [L, N], ``x`` [L, D].  Each token is discretized by ZOH
    and folded into the recurrence; channels evolve independently.
    """
    l_len, d = x.shape
    h = np.zeros((d, a.shape[1]), dtype=DTYPE)
    y = np.empty((l_len, d), dtype=DTYPE)
    a_safe = np.where(a == 0.0, 1.0, a)
    chunk = max(1, _CHUNK_ELEMS // max(1, d * a.shape[1]))
    for s in range(0, l_len, chunk):
        e = min(l_len, s + chunk)
        z = delta[s:e, :, None] * a
        a_bar = np.exp(z)
        # delta * exprel(z) == (a_bar - 1)/a away from z ~ 0; series-patch the rest
        bx = (a_bar - 1.0) / a_safe
        small = np.abs(z) < EXPREL_SWITCH
        if small.any():
            zs = z[small]
            ds = np.broadcast_to(delta[s:e, :, None], z.shape)[small]
            bx[small] = ds * (1.0 + (zs / 2.0) * (1.0 + (zs / 3.0) * (1.0 + zs / 4.0)))
        bx *= b_tokens[s:e, None, :]
        bx *= x[s:e, :, None]
        for i in range(e - s):
            h *= a_bar[i]
            h += bx[i]
            y[s + i] = h @ c_tokens[s + i]
    return y + d_skip * x


def selective_scan(p: SelectiveSsmParams, x: Tensor) -> Tensor:
    """Input-dependent scan over ``x`` [L, D]: project each token to its step
    size, B and C rows, then run the per-channel recurrences."""
    x = np.asarray(x, dtype=DTYPE)
    delta = softplus((x @ p.w_dt_down.T) @ p.w_dt_up.T + p.dt_bias)
    b_tokens = x @ p.w_b.T
    c_tokens = x @ p.w_c.T
    a = -np.exp(p.a_log)
    return selective_scan_explicit(a, delta, b_tokens, c_tokens, p.d_skip, x)
