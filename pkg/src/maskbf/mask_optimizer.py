"""Per-utterance optimal masks by projected gradient descent.

For a beamformer method the objective in every frequency bin is the MSE
between the ideally scaled output and the reference-channel target,

    J(m) = <|s_k - gamma y|^2>_t = P_s - |r^H w|^2 / (w^H Phi_x w),

with ``r = <x conj(s_k)>``, ``P_s = <|s_k|^2>`` and ``w`` the filter the
method estimates from the masks. ``J`` only depends on the direction of
``w``, which is what makes the GEV eigenvector phase irrelevant.

Bins never interact, so every routine below runs all bins in lockstep.
"""
import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import masks as masklib
from .beamformers import (
    BeamformerFilter,
    GevFilterState,
    MethodId,
    Observation,
    gev_state,
    filter_mask_mwf,
    filter_ideal_mwf,
    target_reference,
)
from .cov_linalg import DEFAULT_LOADING, gev_batch, solve_loaded_batch
from .errors import InvalidConfig, InvalidInput
from .masks import MaskKind, MaskSet

log = logging.getLogger(__name__)


class GradientMode(enum.Enum):
    FINITE_DIFFERENCE = "fd"
    ANALYTIC = "analytic"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        for m in cls:
            if key in (m.value, m.name.lower()):
                return m
        raise InvalidConfig(f"unknown gradient mode {text!r}")


STEP_SCHEDULES = ("spectral", "adaptive", "fixed")
ALPHA_RANGE = (1e-20, 1e20)


@dataclass
class OptimizerConfig:
    iterations: int = 500
    step_size: float = 0.01
    gradient_mode: GradientMode = GradientMode.ANALYTIC
    fd_step: float = 1e-5
    early_stop_rel: float = 1e-12
    early_stop_window: int = 20
    loading: float = DEFAULT_LOADING
    seed: int = 0
    init: MaskKind = MaskKind.IRM
    init_noise: float = 0.0
    step_schedule: str = "spectral"
    step_grow: float = 1.2
    step_shrink: float = 0.5
    nonmonotone_window: int = 10

    def __post_init__(self):
        self.gradient_mode = GradientMode.parse(self.gradient_mode)
        if isinstance(self.init, str):
            self.init = MaskKind(self.init)
        if self.iterations < 1:
            raise InvalidConfig("iterations must be >= 1")
        if not self.step_size > 0:
            raise InvalidConfig("step_size must be positive")
        if not self.fd_step > 0:
            raise InvalidConfig("fd_step must be positive")
        if self.step_schedule not in STEP_SCHEDULES:
            raise InvalidConfig(f"step_schedule must be one of {STEP_SCHEDULES}")
        if self.nonmonotone_window < 1:
            raise InvalidConfig("nonmonotone_window must be >= 1")
        if self.early_stop_window < 1:
            raise InvalidConfig("early_stop_window must be >= 1")


@dataclass
class OptimizationTrace:
    """Optimization record.

    ``objective[i, f]`` is the post-projection objective of bin ``f`` after
    iteration ``i`` (row 0 is the initial mask); ``best`` is its running
    minimum, which is what the returned masks achieve.
    """

    method: MethodId
    masks: MaskSet
    objective: np.ndarray
    best: np.ndarray
    iterations: int
    warnings: list = field(default_factory=list)

    @property
    def final(self):
        return self.best[-1]

    @property
    def fullband(self):
        return self.best.sum(axis=1)

    def rows(self):
        """``(iteration, bin, objective)`` triples for CSV export."""
        n_it, n_bins = self.best.shape
        for i in range(n_it):
            for f in range(n_bins):
                yield i, f, float(self.objective[i, f])


def _required(method, masks):
    if masks is None:
        raise InvalidInput(f"{method.label} needs masks {method.roles}")
    for role in method.roles:
        if not masks.has(role):
            raise InvalidInput(f"{method.label} needs mask {role}")


def scaled_mse(w, phi_x, r, p_s):
    """Per-bin ``P_s - |r^H w|^2 / (w^H Phi_x w)``; ``P_s`` where the output vanishes."""
    a = np.einsum("fn,fn->f", np.conj(r), w)
    b = np.real(np.einsum("fn,fnm,fm->f", np.conj(w), phi_x, w))
    ok = b > 0
    return np.where(ok, p_s - np.abs(a) ** 2 / np.where(ok, b, 1.0), p_s)


def _cogradient(w, phi_x, r):
    """``dJ/d conj(w)`` of :func:`scaled_mse` (zero where the output vanishes)."""
    a = np.einsum("fn,fn->f", np.conj(r), w)
    pw = np.einsum("fnm,fm->fn", phi_x, w)
    b = np.real(np.einsum("fn,fn->f", np.conj(w), pw))
    ok = b > 0
    b = np.where(ok, b, 1.0)
    g = -(a / b)[:, None] * r + (np.abs(a) ** 2 / b ** 2)[:, None] * pw
    return np.where(ok[:, None], g, 0)


class MaskProblem:
    """The optimal-mask problem for one utterance and one beamformer method."""

    def __init__(self, method, x, s, ref_mic=0, loading=DEFAULT_LOADING):
        if method is MethodId.IDEAL_MWF:
            raise InvalidInput("the ideal MWF has no masks to optimize")
        self.method = method
        self.obs = x if isinstance(x, Observation) else Observation(x, loading)
        self.ref_mic = ref_mic
        self.s_k = target_reference(s, ref_mic)
        if self.s_k.shape != self.obs.shape[:2]:
            raise InvalidInput("target does not align with the observation")
        self.r = self.obs.cross(self.s_k)
        self.p_s = np.mean(np.abs(self.s_k) ** 2, axis=-1)
        self.x_k = self.obs.x[:, :, ref_mic]

    @classmethod
    def from_scene(cls, method, scene, loading=DEFAULT_LOADING, obs=None):
        obs = obs if obs is not None else Observation(scene.x_spec, loading)
        return cls(method, obs, scene.s_spec, scene.ref_mic, loading)

    @property
    def n_frames(self):
        return self.obs.shape[1]

    def state(self, masks):
        """Filter estimate for ``masks``; GEV methods keep their full decomposition."""
        _required(self.method, masks)
        if self.method is MethodId.MASK_MWF:
            return filter_mask_mwf(self.obs, masks.m_s, self.ref_mic)
        return gev_state(self.method, self.obs, masks, self.ref_mic)

    def filter(self, masks):
        st = self.state(masks)
        return getattr(st, "filter", st)

    def objective(self, masks, state=None):
        """Per-bin objective, shape (F,)."""
        st = state if state is not None else self.state(masks)
        w = getattr(st, "filter", st).weights
        return scaled_mse(w, self.obs.phi_x, self.r, self.p_s)

    def ideal_objective(self):
        w = filter_ideal_mwf(self.obs, self.s_k, self.ref_mic).weights
        return scaled_mse(w, self.obs.phi_x, self.r, self.p_s)

    # -- analytic adjoints -------------------------------------------------

    def gradient(self, masks, state=None):
        """Analytic gradient ``{role: dJ/dm_role}`` with arrays of shape (F, T)."""
        st = state if state is not None else self.state(masks)
        obs, nt = self.obs, self.n_frames
        if self.method is MethodId.MASK_MWF:
            w = st.weights
            gw = _cogradient(w, obs.phi_x, self.r)
            u, _ = solve_loaded_batch(obs.phi_x, gw, obs.loading)
            ux = np.einsum("fn,ftn->ft", np.conj(u), obs.x)
            return {"m_s": 2.0 / nt * np.real(ux * np.conj(self.x_k))}

        lam, vec, i = st.values, st.vectors, st.index
        v = vec[:, :, i]
        lam_i = lam[:, i]
        gw = _cogradient(v, obs.phi_x, self.r)
        # z = sum_{j != i} v_j (v_j^H g) / (lam_i - lam_j)
        proj = np.einsum("fnj,fn->fj", np.conj(vec), gw)
        gap = lam_i[:, None] - lam
        scale = np.abs(lam_i)[:, None] + np.abs(lam)
        keep = np.abs(gap) > 1e-12 * np.where(scale > 0, scale, 1.0)
        keep[:, i] = False
        coef = np.where(keep, proj / np.where(keep, gap, 1.0), 0)
        z = np.einsum("fnj,fj->fn", vec, coef)

        zx = np.einsum("fn,ftn->ft", np.conj(z), obs.x)
        vx = np.einsum("fn,ftn->ft", np.conj(v), obs.x)
        zv = np.einsum("fn,fn->f", np.conj(z), v)
        # d/dm(t) of a masked covariance is (x x^H + delta I) / T
        core = 2.0 / nt * np.real(zx * np.conj(vx) + (obs.delta * zv)[:, None])
        if self.method is MethodId.MAX_SNR:
            return {"m_s": core, "m_n": -lam_i[:, None] * core}
        role = self.method.roles[0]
        return {role: core}

    # -- finite differences --------------------------------------------------

    def _perturbed_objective(self, role, masks, frames, h):
        """Objective of every bin with ``m_role[:, t] += h`` for each ``t`` in ``frames``.

        Returns shape (F, len(frames)). Masked covariances are linear in the
        mask, so each perturbation is applied to the assembled matrices.
        """
        obs, nt = self.obs, self.n_frames
        nf, _, n = obs.shape
        c = len(frames)
        xt = obs.x[:, frames, :]
        bump = h / nt * (np.einsum("fci,fcj->fcij", xt, np.conj(xt))
                         + obs.delta[:, None, None, None] * np.eye(n))
        phi_x = np.repeat(obs.phi_x, c, axis=0)
        r = np.repeat(self.r, c, axis=0)
        p_s = np.repeat(self.p_s, c)
        if self.method is MethodId.MASK_MWF:
            q = obs.cross(masks.m_s * self.x_k)
            dq = h / nt * xt * np.conj(self.x_k[:, frames])[:, :, None]
            qp = (q[:, None, :] + dq).reshape(nf * c, n)
            w, ok = solve_loaded_batch(phi_x, qp, obs.loading)
            return scaled_mse(w, phi_x, r, p_s).reshape(nf, c)

        a_role, b_role = {
            MethodId.MAX_SNR: ("m_s", "m_n"),
            MethodId.MAX_SOR: ("m_s", None),
            MethodId.MIN_NOR: ("m_n", None),
        }[self.method]
        a = obs.masked_cov(getattr(masks, a_role))
        b = obs.masked_cov(masks.m_n) if b_role else obs.phi_x_loaded()
        a = np.repeat(a[:, None], c, axis=1)
        b = np.repeat(b[:, None], c, axis=1)
        if role == a_role:
            a = a + bump
        else:
            b = b + bump
        dec = gev_batch(a.reshape(nf * c, n, n), b.reshape(nf * c, n, n))
        _, w = dec.extreme("min" if self.method is MethodId.MIN_NOR else "max")
        w = np.where(dec.ok[:, None], w, 0)
        return scaled_mse(w, phi_x, r, p_s).reshape(nf, c)

    def gradient_fd(self, masks, h=1e-5, chunk=64):
        """Central differences ``[J(m + h e_t) - J(m - h e_t)] / 2h`` for every entry."""
        _required(self.method, masks)
        out = {}
        nt = self.n_frames
        for role in self.method.roles:
            g = np.empty(self.obs.shape[:2])
            for start in range(0, nt, chunk):
                frames = np.arange(start, min(start + chunk, nt))
                jp = self._perturbed_objective(role, masks, frames, h)
                jm = self._perturbed_objective(role, masks, frames, -h)
                g[:, frames] = (jp - jm) / (2 * h)
            out[role] = g
        return out

    def gradient_by_mode(self, masks, config, state=None):
        if config.gradient_mode is GradientMode.ANALYTIC:
            return self.gradient(masks, state)
        return self.gradient_fd(masks, config.fd_step)


def objective(method, masks, scene, ref_mic=None, loading=DEFAULT_LOADING):
    """Per-bin objective and its fullband sum for ``masks`` on ``scene``."""
    problem = MaskProblem(method, scene.x_spec, scene.s_spec,
                          scene.ref_mic if ref_mic is None else ref_mic, loading)
    per_bin = problem.objective(masks)
    return per_bin, float(per_bin.sum())


def gradient(method, masks, scene, config=None):
    config = config or OptimizerConfig()
    problem = MaskProblem.from_scene(method, scene, config.loading)
    return problem.gradient_by_mode(masks, config)


def initial_masks(method, scene, config):
    """Projected starting masks for the roles ``method`` consumes."""
    if config.init is MaskKind.IRM:
        base = masklib.irm(scene.s_spec, scene.n_spec, scene.ref_mic, 1.0)
    elif config.init is MaskKind.UNIFORM:
        shape = scene.x_spec.bins.shape[1:]
        base = MaskSet(np.ones(shape), np.ones(shape))
    else:
        raise InvalidConfig(f"cannot initialize from {config.init}")
    rng = np.random.default_rng(config.seed)
    out = {}
    for role in method.roles:
        m = getattr(base, role)
        if config.init_noise > 0:
            m = m * (1.0 + config.init_noise * rng.uniform(-1, 1, m.shape))
        out[role] = masklib.project_constraints(m)
    return MaskSet(**out)


def _merge_state(take, new, old):
    """Per-bin mix of two filter states: ``new`` where ``take`` is set, else ``old``."""
    if isinstance(new, GevFilterState):
        return GevFilterState(
            _merge_state(take, new.filter, old.filter),
            np.where(take[:, None], new.values, old.values),
            np.where(take[:, None, None], new.vectors, old.vectors),
            new.index,
        )
    w = np.where(take[:, None], new.weights, old.weights)
    failed = sorted(set(np.flatnonzero(take)) & set(new.failed_bins)
                    | set(np.flatnonzero(~take)) & set(old.failed_bins))
    return BeamformerFilter(w, new.method, new.ref_mic, [int(f) for f in failed])


def _inf_norm(grad, roles):
    return np.max(np.stack([np.max(np.abs(grad[r]), axis=1) for r in roles]), axis=0)


def _where(take, new, old):
    return {r: np.where(take[:, None], new[r], old[r]) for r in old}


def run_descent(problem, init, config):
    """Projected gradient descent on every bin with best-so-far retention.

    Every step moves against the gradient and projects back onto the
    constraint set (:func:`masks.project_constraints`). The step length per
    bin depends on ``config.step_schedule``:

    ``"spectral"``
        Barzilai-Borwein step ``<s, s> / <s, y>`` from the last accepted
        move, accepted when the objective does not exceed the maximum of the
        last ``nonmonotone_window`` accepted values; a rejected step is
        retried from the same point with the step scaled by ``step_shrink``.
    ``"adaptive"``
        Infinity-norm-normalized steps; the step grows by ``step_grow`` after
        an improvement, otherwise shrinks by ``step_shrink`` and the iterate
        returns to the best mask so far.
    ``"fixed"``
        Infinity-norm-normalized steps of ``step_size``.

    The first step of every schedule changes no mask entry by more than
    ``step_size``.
    """
    roles = problem.method.roles
    schedule = config.step_schedule
    cur = {role: masklib.project_constraints(getattr(init, role)) for role in roles}
    state = problem.state(MaskSet(**cur))
    j = problem.objective(None, state)
    grad = problem.gradient_by_mode(MaskSet(**cur), config, state)
    gmax = _inf_norm(grad, roles)
    best = {role: m.copy() for role, m in cur.items()}
    best_j = j.copy()
    best_state = state
    nf = j.shape[0]
    steps = np.full(nf, float(config.step_size))
    alpha = steps / np.where(gmax > 0, gmax, 1.0)
    accepted = [j.copy()]
    hist_obj, hist_best = [j.copy()], [best_j.copy()]
    active = np.ones(nf, dtype=bool)
    window = config.early_stop_window
    executed = 0
    for it in range(1, config.iterations + 1):
        move = active & (gmax > 0) & np.isfinite(gmax)
        if schedule == "spectral":
            scale = alpha
        else:
            scale = steps / np.where(move, gmax, 1.0)
        scale = np.where(move, scale, 0.0)
        trial = {r: masklib.project_constraints(cur[r] - scale[:, None] * grad[r]) for r in roles}
        trial = _where(move, trial, cur)
        trial_state = problem.state(MaskSet(**trial))
        j = problem.objective(None, trial_state)
        better = j < best_j
        best_j = np.where(better, j, best_j)
        best = _where(better, trial, best)
        best_state = _merge_state(better, trial_state, best_state)

        if schedule == "spectral":
            ok = move & (j <= np.max(np.stack(accepted[-config.nonmonotone_window:]), axis=0))
            g_trial = problem.gradient_by_mode(MaskSet(**trial), config, trial_state)
            ss = sum(np.sum((trial[r] - cur[r]) ** 2, axis=1) for r in roles)
            sy = sum(np.sum((trial[r] - cur[r]) * (g_trial[r] - grad[r]), axis=1) for r in roles)
            curved = sy > 0
            bb = np.where(curved, ss / np.where(curved, sy, 1.0), alpha / config.step_shrink)
            alpha = np.clip(np.where(ok, bb, alpha * config.step_shrink), *ALPHA_RANGE)
            cur = _where(ok, trial, cur)
            grad = {r: np.where(ok[:, None], g_trial[r], grad[r]) for r in roles}
            accepted.append(np.where(ok, j, accepted[-1]))
        elif schedule == "adaptive":
            steps = np.where(better, steps * config.step_grow,
                             np.where(move, steps * config.step_shrink, steps))
            cur = {r: m.copy() for r, m in best.items()}
            grad = problem.gradient_by_mode(MaskSet(**cur), config, best_state)
        else:
            cur = trial
            grad = problem.gradient_by_mode(MaskSet(**cur), config, trial_state)
        gmax = _inf_norm(grad, roles)

        hist_obj.append(j.copy())
        hist_best.append(best_j.copy())
        executed = it
        if it >= window:
            old = hist_best[it - window]
            stalled = (old - best_j) <= config.early_stop_rel * np.abs(old)
            active &= ~stalled
        if not active.any():
            break
    return OptimizationTrace(
        problem.method, MaskSet(**best), np.array(hist_obj), np.array(hist_best), executed
    )


def optimize(method, scene, init=None, config=None, obs=None):
    """Find the mask set minimizing the ideally scaled MSE of ``method`` on ``scene``."""
    config = config or OptimizerConfig()
    if init is not None and not isinstance(init, MaskSet):
        config = OptimizerConfig(**{**config.__dict__, "init": MaskKind(init)})
    problem = MaskProblem.from_scene(method, scene, config.loading, obs)
    start = init if isinstance(init, MaskSet) else initial_masks(method, scene, config)
    trace = run_descent(problem, start, config)
    failed = problem.filter(trace.masks).failed_bins
    if failed:
        trace.warnings.append(f"{len(failed)} bin(s) with failed filter estimation: {failed[:10]}")
    return trace
