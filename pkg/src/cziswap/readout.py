"""Three-state dispersive readout: IQ shots, nearest-centroid assignment and confusion matrices."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import multivariate_normal

from .noise import amplitude_damping
from .rng import stream

TAU_RO = 2.3e-6
ROW_TOL = 1e-9
TARGET_FIDELITY = (0.8793, 0.8873)
REFERENCE_AMPLITUDES_MV = (82.0, 45.0)
CHI_01_HZ = (80e3, 110e3)
CHI_12_HZ = (60e3, 130e3)
FIG11_LARGEST_INCREASES = (0.36, 0.35, 0.26, 0.25, 0.21, 0.17)

# Unit-separation geometry of the three population centres; |2> sits closer
# to |1> than to |0>, as is typical for dispersive readout.
DEFAULT_CENTROIDS = np.array([[0.0, 0.0], [1.0, 0.0], [1.25, 0.75]])


class ReadoutError(ValueError):
    pass


def labels(dim: int) -> list:
    if dim == 3:
        return ["0", "1", "2"]
    if dim == 9:
        return [f"{i}{j}" for i in range(3) for j in range(3)]
    raise ReadoutError(f"unsupported confusion dimension {dim}")


@dataclass(frozen=True)
class ReadoutModel:
    centroids: np.ndarray            # (3, 2) IQ centres for |0>, |1>, |2>
    sigma: float                     # isotropic blob width, same units
    t1: float = 77e-6
    tau_ro: float = TAU_RO
    decay: bool = True
    amplitude: float = 1.0           # drive scale; centres are already scaled by it
    excitation: float = 0.0          # per-shot measurement-induced |n> -> |n+1> probability

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=float)
        if c.shape != (3, 2):
            raise ReadoutError("need three 2D centroids")
        d = np.linalg.norm(c[:, None] - c[None, :], axis=-1)
        if np.any(d[np.triu_indices(3, 1)] <= 0):
            raise ReadoutError("centroids must be pairwise distinct")
        if not self.sigma > 0:
            raise ReadoutError("sigma must be positive")
        if not 0 <= self.excitation <= 1:
            raise ReadoutError("excitation probability outside [0, 1]")
        object.__setattr__(self, "centroids", c)

    def transitions(self) -> np.ndarray:
        """M[n, m] = P(blob of |m> | prepared |n>) from relaxation and induced excitation."""
        m = np.eye(3)
        if self.decay:
            ch = amplitude_damping(self.tau_ro, self.t1, 3)
            m = sum(np.abs(k.T) ** 2 for k in ch.operators)
        if self.excitation:
            up = np.eye(3) * (1 - self.excitation)
            up[0, 1] = up[1, 2] = self.excitation
            up[2, 2] = 1.0
            m = m @ up
        return m

    def assign(self, iq: np.ndarray) -> np.ndarray:
        """Nearest centroid; exact ties go to the lower-index state."""
        d2 = ((np.asarray(iq)[:, None, :] - self.centroids[None]) ** 2).sum(-1)
        return np.argmin(d2, axis=1)


def table1_readout() -> tuple:
    """Per-qubit models whose expected three-state fidelity matches 0.8793 / 0.8873."""
    return (ReadoutModel(DEFAULT_CENTROIDS, 0.3028, t1=77e-6),
            ReadoutModel(DEFAULT_CENTROIDS, 0.2938, t1=79e-6))


# -- shots -------------------------------------------------------------------------

def _locate(model: ReadoutModel, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    trans = model.transitions()
    if np.allclose(trans, np.eye(3)):
        return states
    cum = np.cumsum(trans, axis=1)
    u = rng.random(states.size)
    return np.minimum((u[:, None] > cum[states]).sum(axis=1), 2)


def sample_shots(model: ReadoutModel, true_state: int, n: int, *, seed: int = 0,
                 key: tuple = ()) -> tuple:
    """IQ points and assigned labels for ``n`` shots of a prepared level."""
    if n < 1:
        raise ReadoutError("need at least one shot")
    if true_state not in (0, 1, 2):
        raise ReadoutError("prepared level must be 0, 1 or 2")
    rng = stream(seed, "shots", *key, true_state)
    located = _locate(model, np.full(n, true_state), rng)
    iq = model.centroids[located] + model.sigma * rng.standard_normal((n, 2))
    return iq, model.assign(iq)


# -- confusion matrices ---------------------------------------------------------------

@dataclass
class ConfusionMatrix:
    """Row-stochastic T[i, j] = P(measured j | prepared i)."""
    matrix: np.ndarray
    shots: np.ndarray | None = None
    labels: list = field(default_factory=list)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ReadoutError("confusion matrix must be square")
        if np.any(m < -ROW_TOL) or np.any(m > 1 + ROW_TOL):
            raise ReadoutError("confusion entries outside [0, 1]")
        if np.abs(m.sum(axis=1) - 1).max() > ROW_TOL:
            raise ReadoutError("confusion rows must sum to 1")
        self.matrix = m
        if not self.labels:
            self.labels = labels(m.shape[0])
        if self.shots is not None:
            self.shots = np.asarray(self.shots, dtype=int)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "ConfusionMatrix":
        counts = np.asarray(counts, dtype=float)
        totals = counts.sum(axis=1)
        return cls(counts / totals[:, None], totals.astype(int))

    def tensor(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(np.kron(self.matrix, other.matrix))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["prepared"] + self.labels + ["shots"])
        for i, lab in enumerate(self.labels):
            shots = "" if self.shots is None else int(self.shots[i])
            w.writerow([lab] + [repr(float(x)) for x in self.matrix[i]] + [shots])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if header[0] != "prepared" or header[-1] != "shots":
            raise ReadoutError("confusion CSV needs 'prepared' and 'shots' columns")
        labs = header[1:-1]
        if labs != labels(len(labs)) or [r[0] for r in body] != labs:
            raise ReadoutError("confusion CSV labels out of order")
        m = np.array([[float(x) for x in r[1:-1]] for r in body])
        shots = None if any(r[-1] == "" for r in body) else [int(r[-1]) for r in body]
        return cls(m, shots)

    @classmethod
    def read_csv(cls, path) -> "ConfusionMatrix":
        with open(path, newline="") as fh:
            return cls.from_csv(fh.read())


def build_confusion(model: ReadoutModel, n_per_state: int, *, seed: int = 0,
                    qubit: int = 0) -> ConfusionMatrix:
    """Single-qubit 3 x 3 confusion matrix from simulated shots."""
    if n_per_state < 100:
        raise ReadoutError("need at least 100 shots per prepared state")
    counts = np.zeros((3, 3))
    for s in range(3):
        _, lab = sample_shots(model, s, n_per_state, seed=seed, key=("single", qubit))
        counts[s] = np.bincount(lab, minlength=3)
    return ConfusionMatrix.from_counts(counts)


def build_joint_confusion(models: Sequence[ReadoutModel], n_per_state: int, *, seed: int = 0,
                          extra_21: Sequence[float] = (0.0, 0.0)) -> ConfusionMatrix:
    """9 x 9 confusion matrix from simultaneous readout of both qubits.

    ``extra_21`` is a per-qubit probability that a shot whose blob is |2>
    lands on |1> instead; it only acts in joint readout.
    """
    if n_per_state < 100:
        raise ReadoutError("need at least 100 shots per prepared state")
    counts = np.zeros((9, 9))
    for a, b in itertools.product(range(3), repeat=2):
        assigned = []
        for q, (model, s) in enumerate(zip(models, (a, b))):
            rng = stream(seed, "joint", q, a, b)
            located = _locate(model, np.full(n_per_state, s), rng)
            if extra_21[q]:
                flip = (located == 2) & (rng.random(n_per_state) < extra_21[q])
                located = np.where(flip, 1, located)
            iq = model.centroids[located] + model.sigma * rng.standard_normal((n_per_state, 2))
            assigned.append(model.assign(iq))
        counts[3 * a + b] = np.bincount(3 * assigned[0] + assigned[1], minlength=9)
    return ConfusionMatrix.from_counts(counts)


def _blob_partition(model: ReadoutModel) -> np.ndarray:
    """G[m, j] = P(assign j | blob centred on |m>).

    Each nearest-centroid cell is the intersection of two half-planes, so the
    probability is a bivariate normal CDF of the two boundary projections.
    """
    c, s = model.centroids, model.sigma
    g = np.zeros((3, 3))
    for j in range(3):
        others = [k for k in range(3) if k != j]
        a = np.array([c[k] - c[j] for k in others])
        bound = np.array([0.5 * (c[k] @ c[k] - c[j] @ c[j]) for k in others])
        mvn = multivariate_normal(mean=np.zeros(2), cov=s * s * (a @ a.T))
        for m in range(3):
            g[m, j] = mvn.cdf(bound - a @ c[m])
    g = np.clip(g, 0.0, 1.0)
    return g / g.sum(axis=1, keepdims=True)


def expected_confusion(model: ReadoutModel) -> ConfusionMatrix:
    """Infinite-shot confusion matrix of a model."""
    return ConfusionMatrix(model.transitions() @ _blob_partition(model))


def expected_joint_confusion(models: Sequence[ReadoutModel],
                             extra_21: Sequence[float] = (0.0, 0.0)) -> ConfusionMatrix:
    mats = []
    for model, e in zip(models, extra_21):
        trans = model.transitions()
        shift = np.eye(3)
        shift[2, 2], shift[2, 1] = 1 - e, e
        mats.append(trans @ shift @ _blob_partition(model))
    return ConfusionMatrix(np.kron(mats[0], mats[1]))


def assignment_fidelity(c: ConfusionMatrix) -> tuple:
    """Mean diagonal of a 3 x 3 confusion matrix and its standard error over the three states."""
    if c.dim != 3:
        raise ReadoutError("assignment fidelity needs a 3 x 3 confusion matrix")
    d = np.diag(c.matrix)
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(3))


def calibrate_sigma(model: ReadoutModel, target: float, bounds=(1e-3, 3.0)) -> float:
    """Blob width at which the expected assignment fidelity equals ``target``."""
    def gap(s):
        return assignment_fidelity(expected_confusion(replace(model, sigma=s)))[0] - target
    return float(brentq(gap, *bounds, xtol=1e-6))


# -- amplitude and frequency choice ---------------------------------------------------

def optimize_amplitude(family: Callable[[float], ReadoutModel], amplitudes) -> tuple:
    """Amplitude of highest expected assignment fidelity (ties to the lower amplitude)."""
    amps = np.sort(np.asarray(amplitudes, dtype=float))
    if amps.size == 0:
        raise ReadoutError("empty amplitude grid")
    fids = np.array([assignment_fidelity(expected_confusion(family(a)))[0] for a in amps])
    k = int(np.flatnonzero(fids >= fids.max() - 1e-12)[0])
    return float(amps[k]), fids


def amplitude_family(base: ReadoutModel, gain: float = 1.0, threshold: float = np.inf,
                     penalty: float = 0.0) -> Callable[[float], ReadoutModel]:
    """Separation grows linearly with drive amplitude; above ``threshold`` a quadratic
    excess-transition probability sets in."""
    def family(a: float) -> ReadoutModel:
        excess = penalty * max(0.0, a - threshold) ** 2
        return replace(base, centroids=base.centroids * gain * a, amplitude=a,
                       excitation=min(excess, 1.0))
    return family


def perimeter(centroids: np.ndarray) -> float:
    c = np.asarray(centroids, dtype=float)
    return float(sum(np.linalg.norm(c[i] - c[(i + 1) % 3]) for i in range(3)))


def best_readout_frequency(frequencies, centroids_per_frequency) -> float:
    """Frequency whose three population centres span the largest triangle perimeter."""
    per = [perimeter(c) for c in centroids_per_frequency]
    return float(np.asarray(frequencies)[int(np.argmax(per))])


# -- measured vs constructed ------------------------------------------------------------

def confusion_difference(measured: ConfusionMatrix, q1: ConfusionMatrix, q2: ConfusionMatrix,
                         top: int = 6) -> tuple:
    """measured - q1 (x) q2, and the ``top`` largest positive entries as (value, prepared, measured)."""
    if measured.dim != 9 or q1.dim != 3 or q2.dim != 3:
        raise ReadoutError("need a 9 x 9 measured matrix and two 3 x 3 matrices")
    diff = measured.matrix - q1.tensor(q2).matrix
    labs = labels(9)
    order = np.argsort(diff, axis=None)[::-1][:top]
    peaks = [(float(diff.flat[k]), labs[k // 9], labs[k % 9]) for k in order if diff.flat[k] > 0]
    return diff, peaks
