"""Square-lattice Ising model with free boundary and single-site Gibbs sampling.

Spins live in {-1,+1} on a side x side grid with 4-neighbor interactions;
configurations are exposed to the enumeration oracle as 0/1 tuples in
row-major order.  The potential is the negated energy
beta * (J * sum_{i~j} s_i s_j + H * sum_i s_i), so ``exp(potential)`` is the
unnormalized Boltzmann weight.
"""

import numpy as np

from .oracle import DiscreteSpace, EnergyModel
from .rng import derive_rng


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class IsingModel(EnergyModel):
    def __init__(self, side, coupling=1.0, field=0.0, beta=1.0):
        self.side = int(side)
        self.n_sites = self.side * self.side
        self.coupling = float(coupling)
        self.field = float(field)
        self.beta = float(beta)
        self._pairs = self._neighbor_pairs()
        self._neighbors = self._neighbor_lists()

    def _neighbor_pairs(self):
        pairs = []
        s = self.side
        for r in range(s):
            for c in range(s):
                i = r * s + c
                if c + 1 < s:
                    pairs.append((i, i + 1))
                if r + 1 < s:
                    pairs.append((i, i + s))
        return np.array(pairs, dtype=np.int64)

    def _neighbor_lists(self):
        out = [[] for _ in range(self.n_sites)]
        for i, j in self._pairs:
            out[i].append(int(j))
            out[j].append(int(i))
        return out

    def space(self, cap=None) -> DiscreteSpace:
        kwargs = {} if cap is None else {"cap": cap}
        return DiscreteSpace.binary(self.n_sites, **kwargs)

    # -- potential ---------------------------------------------------------
    def potential(self, x) -> float:
        s = 2.0 * np.asarray(x, dtype=np.float64) - 1.0
        pair_term = float((s[self._pairs[:, 0]] * s[self._pairs[:, 1]]).sum())
        return self.beta * (self.coupling * pair_term + self.field * float(s.sum()))

    def potential_batch(self, xs) -> np.ndarray:
        s = 2.0 * np.asarray(xs, dtype=np.float64) - 1.0
        pair_term = (s[:, self._pairs[:, 0]] * s[:, self._pairs[:, 1]]).sum(axis=1)
        return self.beta * (self.coupling * pair_term + self.field * s.sum(axis=1))

    # treat (J, H) as the trainable parameters at fixed beta
    def grad_params(self, x) -> np.ndarray:
        s = 2.0 * np.asarray(x, dtype=np.float64) - 1.0
        pair_term = float((s[self._pairs[:, 0]] * s[self._pairs[:, 1]]).sum())
        return self.beta * np.array([pair_term, float(s.sum())])

    def get_flat_params(self) -> np.ndarray:
        return np.array([self.coupling, self.field])

    def set_flat_params(self, values) -> None:
        self.coupling, self.field = float(values[0]), float(values[1])

    # -- Gibbs full conditionals --------------------------------------------
    @property
    def n_coords(self) -> int:
        return self.n_sites

    def gibbs_conditional(self, x, site) -> float:
        """P(spin(site) = +1 | rest) = sigmoid(2 beta (J * nbr_sum + H))."""
        if not 0 <= site < self.n_sites:
            raise ValueError(f"site {site} outside lattice")
        nbr = sum(2 * x[j] - 1 for j in self._neighbors[site])
        return float(_sigmoid(2.0 * self.beta * (self.coupling * nbr + self.field)))

    def conditional(self, x, i) -> np.ndarray:
        p_up = self.gibbs_conditional(x, i)
        return np.array([1.0 - p_up, p_up])


def ising_gibbs_run(model: IsingModel, sweeps, seed, init=None, record_states=False,
                    record_magnetization=False, snapshot_every=None, burn_in=0):
    """Fixed-ascending-scan Gibbs sweeps with a fast lookup inner loop.

    Returns a dict with the final 0/1 state and any requested recordings;
    snapshots are (side, side) arrays of +-1 spins.
    """
    n = model.n_sites
    rng = derive_rng(seed, "ising")
    if init is None:
        state = [int(v) for v in rng.integers(0, 2, size=n)]
    else:
        state = [int(v) for v in np.ravel(init)]
    # P(+1 | neighbor spin sum) for sums -4..4
    table = [float(_sigmoid(2.0 * model.beta * (model.coupling * s + model.field)))
             for s in range(-4, 5)]
    neighbors = model._neighbors
    states, mags, snapshots = [], [], []
    for sweep in range(sweeps):
        u = rng.random(n)
        for i in range(n):
            total = -len(neighbors[i])
            for j in neighbors[i]:
                total += 2 * state[j]
            state[i] = 1 if u[i] < table[total + 4] else 0
        if sweep >= burn_in:
            if record_states:
                states.append(tuple(state))
            if record_magnetization:
                mags.append(abs(2.0 * sum(state) / n - 1.0))
        if snapshot_every and (sweep + 1) % snapshot_every == 0:
            snapshots.append(2 * np.array(state).reshape(model.side, model.side) - 1)
    return {
        "final": tuple(state),
        "states": states,
        "magnetizations": np.array(mags),
        "snapshots": snapshots,
    }


def ising_sample_grid(model: IsingModel, sweeps, seed, snapshot_every=None):
    """Spin-image sequence from Gibbs sampling (for rendering / demos)."""
    if snapshot_every is None:
        snapshot_every = max(1, sweeps // 8)
    run = ising_gibbs_run(model, sweeps, seed, snapshot_every=snapshot_every)
    return run["snapshots"]


def write_pgm(path, grid) -> None:
    """ASCII PGM; -1 spins render black, +1 white."""
    grid = np.asarray(grid)
    pixels = np.where(grid > 0, 255, 0)
    lines = [f"P2", f"{grid.shape[1]} {grid.shape[0]}", "255"]
    lines += [" ".join(str(int(v)) for v in row) for row in pixels]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
