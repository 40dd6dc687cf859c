"""Monte Carlo for the branching diffusion: populations, linear functionals, spines and their reversal.

Every individual moves by Euler-Maruyama for dX = dB - a(X) dt, then branches
into two at rate b or dies at rate d. Within one step of length dt the rates
are averaged over the step's two endpoints and a single uniform decides the
outcome: death with probability 1 - e^{-d dt}, branching with probability
e^{-d dt}(e^{b dt} - 1), otherwise nothing. The expected number of
individuals descending from one step is then exactly e^{(b - d) dt}, so the
population mean agrees with the path-weight estimator using trapezoid
integrals of V. Offspring are placed at the parent's new trait and first
move in the following step.

Two engines share that step. ``simulate_population`` keeps the full
genealogy of a single tree. The batch engine behind the estimators advances
thousands of trees at once and only carries what the estimators need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelSpec
from .qsd import build_qsd
from .rng import stream
from .semigroup import KernelEvaluator

LN2 = math.log(2.0)
CHUNK = 8192


class NumericalError(ArithmeticError):
    """A simulated trait became NaN or infinite."""


class EmptySampleError(RuntimeError):
    """Every tree went extinct; there is nothing to sample a spine from."""


def _require_rates(spec: ModelSpec) -> None:
    if not spec.has_rates:
        raise ValueError("branching simulation needs birth and death rates b, d")


def _step(spec: ModelSpec, x: np.ndarray, dt: float, rng: np.random.Generator):
    """One step for every individual: returns (new traits, death mask, birth mask)."""
    n = x.size
    xi = rng.standard_normal(n)
    u = rng.random(n)
    x_new = x - spec.a(x) * dt + math.sqrt(dt) * xi
    if not np.all(np.isfinite(x_new)):
        raise NumericalError("non-finite trait produced by the Euler-Maruyama step")
    bb = 0.5 * (spec.b(x) + spec.b(x_new))
    dd = 0.5 * (spec.d(x) + spec.d(x_new))
    if not (np.all(np.isfinite(bb)) and np.all(np.isfinite(dd))):
        raise NumericalError("non-finite birth or death rate")
    if n and bb.max() * dt > LN2:
        raise ValueError(f"dt={dt:g} too large: birth rate {bb.max():.3g} needs b dt <= ln 2")
    survive = np.exp(-dd * dt)
    p_die = 1.0 - survive
    p_birth = survive * np.expm1(bb * dt)
    die = u < p_die
    birth = ~die & (u < p_die + p_birth)
    return x_new, die, birth


def _n_steps(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T:g} must be a positive multiple of dt={dt:g}")
    return n


# --- single tree with genealogy -------------------------------------------


@dataclass
class Individual:
    id: int
    parent: int | None
    birth_time: float
    death_time: float
    times: np.ndarray
    trajectory: np.ndarray


@dataclass
class PopulationTree:
    """Genealogy of one realization. Times are step indices times dt."""

    T: float
    dt: float
    rng_seed: int | None
    parent: np.ndarray
    birth_step: np.ndarray
    death_step: np.ndarray  # -1 while alive at the horizon
    history: list  # per step: (ids alive after the step, their traits)
    live_counts: np.ndarray
    truncated: bool = False

    @property
    def n_individuals(self) -> int:
        return int(self.parent.size)

    def alive_ids(self, step: int | None = None) -> np.ndarray:
        step = len(self.history) - 1 if step is None else step
        return self.history[step][0]

    def alive_at(self, s: float) -> int:
        """Population size at time s reconstructed from birth/death records."""
        k = int(math.floor(s / self.dt + 1e-9))
        born = self.birth_step <= k
        dead = (self.death_step >= 0) & (self.death_step <= k)
        return int(np.count_nonzero(born & ~dead))

    @property
    def n_T(self) -> int:
        return int(self.history[-1][0].size)

    def individual(self, i: int) -> Individual:
        b, d = int(self.birth_step[i]), int(self.death_step[i])
        last = d if d >= 0 else len(self.history) - 1
        steps, traits = [], []
        for s in range(b, last + 1):
            ids, x = self.history[s]
            j = np.searchsorted(ids, i)
            if j < ids.size and ids[j] == i:
                steps.append(s)
                traits.append(x[j])
        parent = int(self.parent[i])
        return Individual(
            i,
            None if parent < 0 else parent,
            b * self.dt,
            d * self.dt if d >= 0 else math.inf,
            np.array(steps) * self.dt,
            np.array(traits),
        )

    def ancestral_path(self, i: int) -> "SpinePath":
        """Trait of i's ancestral line at every step from 0 to the horizon."""
        n = len(self.history)
        out = np.empty(n)
        cur, s = i, n - 1
        while s >= 0:
            ids, x = self.history[s]
            j = np.searchsorted(ids, cur)
            if j < ids.size and ids[j] == cur:
                out[s] = x[j]
                s -= 1
            else:
                # cur was born during step s+1; before that its parent carries the line
                cur = int(self.parent[cur])
                if cur < 0:
                    raise RuntimeError("broken ancestry")
        return SpinePath(np.arange(n) * self.dt, out, float(self.n_T))

    def summary(self) -> dict:
        return {
            "n_individuals": self.n_individuals,
            "n_T": self.n_T,
            "truncated": self.truncated,
            "live_counts": self.live_counts.tolist(),
            "final_traits": self.history[-1][1].tolist(),
        }


def simulate_population(spec: ModelSpec, x0: float, T: float, dt: float, rng: np.random.Generator,
                        cap: int = 10**6, rng_seed: int | None = None) -> PopulationTree:
    """Simulate one tree from a single ancestor at x0, keeping the whole genealogy.

    ``cap`` bounds the total individual-steps; hitting it stops the simulation
    and marks the tree truncated.
    """
    _require_rates(spec)
    if dt > 1e-2:
        raise ValueError("dt must be at most 1e-2")
    if cap < 1:
        raise ValueError("cap must be at least 1")
    n = _n_steps(T, dt)
    parent = [-1]
    birth = [0]
    death = [-1]
    ids = np.array([0])
    x = np.array([float(x0)])
    history = [(ids, x)]
    counts = [1]
    work = 1
    truncated = False
    for step in range(1, n + 1):
        x_new, die, br = _step(spec, x, dt, rng)
        for i in ids[die]:
            death[i] = step
        new_ids = np.arange(len(parent), len(parent) + int(br.sum()))
        parent.extend(ids[br].tolist())
        birth.extend([step] * new_ids.size)
        death.extend([-1] * new_ids.size)
        keep = ~die
        ids = np.concatenate([ids[keep], new_ids])
        x = np.concatenate([x_new[keep], x_new[br]])
        history.append((ids, x))
        counts.append(ids.size)
        work += ids.size
        if work > cap:
            truncated = True
            break
        if ids.size == 0:
            # extinct: the remaining records are empty
            for _ in range(step + 1, n + 1):
                history.append((ids, x))
                counts.append(0)
            break
    return PopulationTree(
        T, dt, rng_seed, np.array(parent), np.array(birth), np.array(death), history, np.array(counts), truncated
    )


# --- batch engine -----------------------------------------------------------


@dataclass
class SpinePath:
    times: np.ndarray
    traits: np.ndarray
    weight: float

    def reversed(self) -> "SpinePath":
        return SpinePath(self.times, self.traits[::-1].copy(), self.weight)


@dataclass
class _Chunk:
    n_T: np.ndarray
    phi_sums: np.ndarray  # (n_trees, n_phi)
    capped: np.ndarray
    spine: np.ndarray | None  # (n_trees, n_checkpoints), NaN where extinct
    roots: np.ndarray


def _simulate_chunk(spec, roots, n_steps, dt, rng, cap, phis, checkpoint_steps):
    n_trees = roots.size
    x = roots.astype(float).copy()
    tree = np.arange(n_trees)
    work = np.zeros(n_trees)
    capped = np.zeros(n_trees, dtype=bool)
    ck = {s: j for j, s in enumerate(checkpoint_steps)} if checkpoint_steps is not None else None
    anc = None
    if ck is not None:
        anc = np.full((n_trees, len(ck)), np.nan)
        if 0 in ck:
            anc[:, ck[0]] = x
    for step in range(1, n_steps + 1):
        x_new, die, br = _step(spec, x, dt, rng)
        keep = ~die
        x = np.concatenate([x_new[keep], x_new[br]])
        tree = np.concatenate([tree[keep], tree[br]])
        if anc is not None:
            anc = np.concatenate([anc[keep], anc[br]])
            j = ck.get(step)
            if j is not None:
                anc[:, j] = x
        work += np.bincount(tree, minlength=n_trees)
        over = (work > cap) & ~capped
        if over.any():
            capped |= over
            alive = ~capped[tree]
            x, tree = x[alive], tree[alive]
            if anc is not None:
                anc = anc[alive]
        if x.size == 0:
            break
    n_T = np.bincount(tree, minlength=n_trees)
    phi_sums = np.stack([np.bincount(tree, weights=f(x), minlength=n_trees) for f in phis], axis=1) if phis else None
    spine = None
    if anc is not None:
        spine = np.full((n_trees, anc.shape[1]), np.nan)
        if x.size:
            keys = rng.random(x.size)
            order = np.lexsort((keys, tree))
            first = order[np.r_[True, tree[order][1:] != tree[order][:-1]]]
            spine[tree[first]] = anc[first]
    return _Chunk(n_T, phi_sums, capped, spine, roots)


def _roots(x0, n: int, rng: np.random.Generator) -> np.ndarray:
    if callable(x0):
        return np.asarray(x0(rng, n), dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 0:
        return np.full(n, float(x0))
    if x0.size != n:
        raise ValueError("per-tree roots must have one entry per replica")
    return x0


def run_trees(spec: ModelSpec, x0, T: float, dt: float, reps: int, seed: int, cap: int = 10**6,
              phis=(), checkpoint_times=None, first_chunk: int = 0) -> list:
    """Simulate ``reps`` independent trees in chunks; chunk c uses the stream (seed, c).

    ``first_chunk`` offsets the chunk numbering so that a run can be extended
    with fresh, non-overlapping streams.
    """
    _require_rates(spec)
    if dt > 1e-2:
        raise ValueError("dt must be at most 1e-2")
    n = _n_steps(T, dt)
    steps = None
    if checkpoint_times is not None:
        steps = [int(round(t / dt)) for t in checkpoint_times]
        if any(s < 0 or s > n for s in steps):
            raise ValueError("checkpoint times must lie in [0, T]")
    chunks = []
    x0_arr = None if callable(x0) or np.ndim(x0) == 0 else np.asarray(x0, dtype=float)
    for c, start in enumerate(range(0, reps, CHUNK)):
        m = min(CHUNK, reps - start)
        rng = stream(seed, first_chunk + c)
        roots = _roots(x0 if x0_arr is None else x0_arr[start : start + m], m, rng)
        chunks.append(_simulate_chunk(spec, roots, n, dt, rng, cap, list(phis), steps))
    return chunks


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    if n < 2:
        raise ValueError("need at least two replicas")
    mean = math.fsum(values) / n
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass
class Estimate:
    estimate: float
    stderr: float
    n_used: int
    n_capped: int = 0
    extinct_fraction: float = 0.0
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.estimate, self.stderr))

    def z_score(self, target: float) -> float:
        return (self.estimate - target) / self.stderr if self.stderr > 0 else math.inf * np.sign(self.estimate - target)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n_used": self.n_used,
            "n_capped": self.n_capped,
            "extinct_fraction": self.extinct_fraction,
            **self.extra,
        }


def estimate_linear_functionals(spec, phis, x0, T, dt, reps, seed, cap=10**6) -> list[Estimate]:
    """Mean and standard error of sum_{i alive at T} phi(X^i_T) for several phi at once."""
    if reps < 100:
        raise ValueError("reps must be at least 100")
    chunks = run_trees(spec, x0, T, dt, reps, seed, cap, phis=phis)
    capped = np.concatenate([c.capped for c in chunks])
    sums = np.concatenate([c.phi_sums for c in chunks])[~capped]
    n_T = np.concatenate([c.n_T for c in chunks])[~capped]
    out = []
    for j in range(len(phis)):
        mean, se = _mean_stderr(sums[:, j])
        out.append(Estimate(mean, se, int(sums.shape[0]), int(capped.sum()), float(np.mean(n_T == 0))))
    return out


def estimate_linear_functional(spec, phi, x0, T, dt, reps, seed, cap=10**6) -> Estimate:
    return estimate_linear_functionals(spec, [phi], x0, T, dt, reps, seed, cap)[0]


def estimate_mass(spec, x0, T, dt, reps, seed, cap=10**6) -> Estimate:
    return estimate_linear_functional(spec, lambda x: np.ones_like(x), x0, T, dt, reps, seed, cap)


def ratio_limit_estimate(spec, phi, x0, T, dt, reps, seed, cap=10**6) -> Estimate:
    """Average over surviving trees of sum_i phi(X^i_T) / N_T."""
    chunks = run_trees(spec, x0, T, dt, reps, seed, cap, phis=[phi])
    capped = np.concatenate([c.capped for c in chunks])
    sums = np.concatenate([c.phi_sums[:, 0] for c in chunks])[~capped]
    n_T = np.concatenate([c.n_T for c in chunks])[~capped]
    alive = n_T > 0
    if alive.sum() < 2:
        raise EmptySampleError("fewer than two surviving trees")
    mean, se = _mean_stderr(sums[alive] / n_T[alive])
    return Estimate(mean, se, int(alive.sum()), int(capped.sum()), float(1 - alive.mean()))


def ratio_of_means_estimate(spec, phi, x0, T, dt, reps, seed, cap=10**6) -> Estimate:
    """sum over trees of sum_i phi(X^i_T) divided by the total population, with a delta-method stderr.

    This estimates E<Z_T, phi> / E<Z_T, 1>, the population-weighted counterpart
    of ``ratio_limit_estimate``.
    """
    chunks = run_trees(spec, x0, T, dt, reps, seed, cap, phis=[phi])
    capped = np.concatenate([c.capped for c in chunks])
    s = np.concatenate([c.phi_sums[:, 0] for c in chunks])[~capped]
    n = np.concatenate([c.n_T for c in chunks])[~capped].astype(float)
    if n.sum() == 0:
        raise EmptySampleError("every tree went extinct")
    ratio = math.fsum(s) / math.fsum(n)
    resid = s - ratio * n
    se = math.sqrt(math.fsum(resid**2) / (n.size - 1) / n.size) / (math.fsum(n) / n.size)
    return Estimate(ratio, se, int(n.size), int(capped.sum()), float(np.mean(n == 0)))


def feynman_kac_mc(spec: ModelSpec, phi, x0, T, dt, reps, seed) -> Estimate:
    """Single-path estimator of E_x[exp(int_0^T V(X_s) ds) phi(X_T)].

    The time integral uses the trapezoid rule on the Euler-Maruyama path and
    is accumulated in log space.
    """
    if reps < 100:
        raise ValueError("reps must be at least 100")
    n = _n_steps(T, dt)
    vals, logs = [], []
    for c, start in enumerate(range(0, reps, CHUNK)):
        m = min(CHUNK, reps - start)
        rng = stream(seed, c)
        x = _roots(x0, m, rng).copy()
        logw = np.zeros(m)
        v_old = spec.V(x)
        sq = math.sqrt(dt)
        for _ in range(n):
            x = x - spec.a(x) * dt + sq * rng.standard_normal(m)
            v_new = spec.V(x)
            logw += 0.5 * (v_old + v_new) * dt
            v_old = v_new
        if not np.all(np.isfinite(x)):
            raise NumericalError("non-finite trait in Feynman-Kac path")
        logs.append(logw)
        vals.append(phi(x))
    logw = np.concatenate(logs)
    f = np.concatenate(vals)
    shift = float(logw.max())
    mean, se = _mean_stderr(np.exp(logw - shift) * f)
    scale = math.exp(shift)
    return Estimate(mean * scale, se * scale, int(logw.size))


# --- spines -------------------------------------------------------------------


@dataclass
class SpineSample:
    """One uniformly chosen survivor per surviving tree, its ancestral traits at ``times``, weight N_T."""

    times: np.ndarray
    traits: np.ndarray  # (n_spines, n_times)
    weights: np.ndarray
    roots: np.ndarray
    n_trees: int
    n_capped: int

    def __len__(self) -> int:
        return int(self.weights.size)

    @property
    def ess(self) -> float:
        w = self.weights
        return float(w.sum() ** 2 / np.sum(w * w))

    def weighted_mean(self, values) -> float:
        w = self.weights
        return float(math.fsum(w * values) / math.fsum(w))

    def paths(self) -> list[SpinePath]:
        return [SpinePath(self.times, self.traits[i], float(self.weights[i])) for i in range(len(self))]

    @staticmethod
    def concat(parts: list["SpineSample"]) -> "SpineSample":
        return SpineSample(
            parts[0].times,
            np.concatenate([p.traits for p in parts]),
            np.concatenate([p.weights for p in parts]),
            np.concatenate([p.roots for p in parts]),
            sum(p.n_trees for p in parts),
            sum(p.n_capped for p in parts),
        )


def sample_spines(spec, x0, T, dt, reps, seed, cap=10**6, times=None, first_chunk: int = 0) -> SpineSample:
    """Spines at the given times (default: every 0.1 time units, or every step if coarser)."""
    if times is None:
        stride = max(1, int(round(0.1 / dt)))
        times = np.arange(0, _n_steps(T, dt) + 1, stride) * dt
        if not np.isclose(times[-1], T):
            times = np.append(times, T)
    times = np.asarray(times, dtype=float)
    chunks = run_trees(spec, x0, T, dt, reps, seed, cap, checkpoint_times=times, first_chunk=first_chunk)
    parts = []
    for c in chunks:
        ok = (c.n_T > 0) & ~c.capped
        parts.append(SpineSample(times, c.spine[ok], c.n_T[ok].astype(float), c.roots[ok], c.n_T.size, int(c.capped.sum())))
    sample = SpineSample.concat(parts)
    if len(sample) == 0:
        raise EmptySampleError("every tree went extinct before the horizon")
    return sample


# --- time reversal ------------------------------------------------------------


def grid_sampler(grid, density):
    """Inverse-CDF sampler for a grid density (linear interpolation of the trapezoid CDF)."""
    cdf = grid.cumtrapz(density)
    cdf = cdf / cdf[-1]
    x = grid.nodes

    def draw(rng, n):
        return np.interp(rng.random(n), cdf, x)

    return draw


def _bin_probs(grid, density, edges):
    cdf = grid.cumtrapz(density)
    c = np.interp(edges, grid.nodes, cdf)
    return np.diff(c)


def reversed_density_chain(kern: KernelEvaluator, T: float, u: float, r: float, z: float, ys) -> dict:
    """Stages turning the reversed spine's transition density into q(u, z, y).

    With roots drawn from nu, the reversed spine Y_t = X_{T-t} has conditional
    density of Y_{r+u} = y given Y_r = z equal to
        int nu(x) p(s,x,y) dx p(u,y,z) m_r(z) / int nu(x) p(T-r,x,z) dx m_r(z),  s = T - r - u.
    Stage 1 applies the QSD identity to both integrals, stage 2 collects the
    exponentials, stage 3 uses the symmetry of p against e^{-2l}, stage 4 is
    the q kernel itself. ``z`` and ``ys`` are snapped to grid nodes, and the
    integrals use the unclamped truncated series so that each step is exact.
    """
    b = kern.basis
    g = b.grid
    s = T - (u + r)
    if s < 0 or u <= 0 or r <= 0:
        raise ValueError("need u > 0, r > 0 and u + r <= T")
    lam0 = b.lambdas[0]
    iz = g.index_of(z)
    iy = g.index_of(np.asarray(ys, dtype=float))
    z, ys = g.nodes[iz], g.nodes[iy]
    nu = build_qsd(b).density
    th0 = b.thetas[0]
    m_r = float(kern.mass(r)[iz])
    p_u_yz = kern.kernel_p(u, ys, z)
    w = g.weights * nu
    if s > 0:
        num = (w @ kern.kernel_matrix(s, g.nodes, ys, "p", clamp=False)) * p_u_yz * m_r
    else:
        num = nu[iy] * p_u_yz * m_r
    den = float(w @ kern.kernel_matrix(T - r, g.nodes, [z], "p", clamp=False)[:, 0]) * m_r
    stage0 = num / den
    stage1 = math.exp(-lam0 * s) * nu[iy] * p_u_yz / (math.exp(-lam0 * (T - r)) * nu[iz])
    stage2 = math.exp(lam0 * u) * nu[iy] / nu[iz] * p_u_yz
    stage3 = math.exp(lam0 * u) * th0[iy] / th0[iz] * kern.kernel_p(u, z, ys)
    stage4 = kern.kernel_q(u, z, ys)
    stages = [stage0, stage1, stage2, stage3, stage4]
    gaps = [float(np.max(np.abs(a_ - c_))) for a_, c_ in zip(stages, stages[1:])]
    return {"u": u, "r": r, "s": s, "z": float(z), "ys": ys.tolist(),
            "stages": [st.tolist() for st in stages], "gaps": gaps, "max_gap": max(gaps)}


def _tv_hist(weights, values, edges, probs):
    h, _ = np.histogram(values, bins=edges, weights=weights)
    h = h / weights.sum()
    return 0.5 * float(np.sum(np.abs(h - probs)))


def reversed_spine_transition_check(spec, basis, T: float, t_lag: float, dt: float, reps: int, seed: int,
                                    kern: KernelEvaluator | None = None, cap: int = 10**6,
                                    n_marginal_bins: int = 40, n_z_bins: int = 8, n_y_bins: int = 20,
                                    min_ess: float = 500.0, short_lag: float | None = None,
                                    target_ess: float | None = None, max_reps: int = 10**6) -> dict:
    """Compare the reversed spine started from nu with the Q-kernel.

    Roots are drawn from nu; each spine then carries weight N_T, which makes
    the weighted law of its starting point e^{lambda_0 T} m_T nu. Under that
    law the reversed spine starts from nu and moves with the kernel q.
    Reported: binned TV of the reversed initial marginal against nu; the
    z-bin-averaged binned TV of the one-lag conditional law against q(t_lag,
    z, .); the binned TV of the forward initial marginal against
    e^{lambda_0 T} m_T nu; and, when ``short_lag`` is given, the weighted
    variance of the reversed increment over that lag.
    """
    if not 0 < t_lag < T:
        raise ValueError("need 0 < t_lag < T")
    kern = kern or KernelEvaluator(basis)
    g = basis.grid
    nu = build_qsd(basis)
    draw = grid_sampler(g, nu.density)
    times = [0.0, T - t_lag, T]
    if short_lag is not None:
        times.append(T - short_lag)
    sample = sample_spines(spec, draw, T, dt, reps, seed, cap, times=np.array(times))
    # extend with fresh chunks until the requested effective sample size is reached
    used, rounds = reps, 1
    per_round = -(-reps // CHUNK)
    while target_ess is not None and sample.ess < target_ess and used < max_reps:
        more = sample_spines(spec, draw, T, dt, reps, seed, cap, times=np.array(times),
                             first_chunk=rounds * per_round)
        sample = SpineSample.concat([sample, more])
        used += reps
        rounds += 1
    w = sample.weights
    ess = sample.ess
    y_T, y_lag, y_0 = sample.traits[:, 2], sample.traits[:, 1], sample.traits[:, 0]
    report = {
        "T": T,
        "t_lag": t_lag,
        "dt": dt,
        "n_trees": sample.n_trees,
        "n_spines": len(sample),
        "n_capped": sample.n_capped,
        "ess": ess,
        "reps": used,
        "conclusive": bool(ess >= min_ess),
    }
    if ess < min_ess:
        return report

    # marginal of the reversed start, Y_T, against nu
    lo, hi = np.quantile(y_T, [0.0005, 0.9995])
    edges = np.linspace(min(lo, -4), max(hi, 4), n_marginal_bins + 1)
    edges = np.clip(edges, -g.L, g.L)
    report["tv_marginal"] = _tv_hist(w, y_T, edges, _bin_probs(g, nu.density, edges))

    # forward start Y_0 against e^{lambda_0 T} m_T nu
    start_density = math.exp(basis.lambdas[0] * T) * kern.mass(T) * nu.density
    report["start_mass"] = float(g.trapz(start_density))
    report["tv_start"] = _tv_hist(w, y_0, edges, _bin_probs(g, start_density, edges))

    # conditional law of Y_{T - t_lag} given Y_T, binned in z by nu-quantiles
    cdf = g.cumtrapz(nu.density)
    cdf /= cdf[-1]
    z_edges = np.interp(np.linspace(0, 1, n_z_bins + 1), cdf, g.nodes)
    z_edges[0], z_edges[-1] = -g.L, g.L
    y_edges = np.linspace(-4.0, 4.0, n_y_bins + 1)
    y_edges[0], y_edges[-1] = -g.L, g.L
    # q(t_lag, z, .) on a thinned set of start nodes carrying non-negligible nu mass
    support = np.flatnonzero(nu.density > 1e-14 * nu.density.max())
    stride = max(1, support.size // 1000)
    z_nodes = support[::stride]
    Q = kern.kernel_matrix(t_lag, g.nodes[z_nodes], g.nodes, "q")
    Qcdf = np.concatenate([np.zeros((Q.shape[0], 1)), np.cumsum(0.5 * g.h * (Q[:, 1:] + Q[:, :-1]), axis=1)], axis=1)
    per_bin, bin_w = [], []
    zb = np.digitize(y_T, z_edges[1:-1])
    for j in range(n_z_bins):
        sel = zb == j
        if not sel.any():
            continue
        zz = g.nodes[z_nodes]
        in_bin = (zz >= z_edges[j]) & (zz <= z_edges[j + 1])
        wz = nu.density[z_nodes[in_bin]]
        cond = np.array([np.interp(y_edges, g.nodes, Qcdf[i]) for i in np.flatnonzero(in_bin)])
        probs = np.diff((wz[:, None] * cond).sum(axis=0) / wz.sum())
        per_bin.append(_tv_hist(w[sel], y_lag[sel], y_edges, probs))
        bin_w.append(w[sel].sum())
    bin_w = np.array(bin_w)
    report["tv_conditional_bins"] = per_bin
    report["tv_conditional"] = float(np.dot(per_bin, bin_w) / bin_w.sum())

    if short_lag is not None:
        inc = sample.traits[:, 3] - y_T
        m = sample.weighted_mean(inc)
        report["short_lag"] = short_lag
        report["short_lag_variance"] = sample.weighted_mean((inc - m) ** 2)
    return report
