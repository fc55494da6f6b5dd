"""Born probabilities and multinomial sampling for the four scenarios.

Scenario layout of the frequency arrays (``FrequencyTable.values``):

1. ancilla-assisted Pauli:  shape (3^2k, 2^2k), [setting, outcome]
2. direct Pauli:            shape (3^k, 3^k, 2^k, 2^k), [a, b, q, p] with
   input basis a / label q and measurement basis b / outcome p
3. ancilla-assisted MUB:    shape (d^2 (d^2+1),), one global distribution
4. direct MUB:              shape (d(d+1), d(d+1)), [input, outcome]

Frequencies are counts divided by nu, the (mean) number of repetitions per
setting.  In the fixed scheme every setting receives exactly nu shots and
each per-setting row sums to one; in the random scheme settings are drawn
uniformly and only the expectation of each row sum is one.

Sampling is reproducible: each setting draws from its own Philox stream
keyed by (seed, scenario, setting index), so results do not depend on how
the settings are scheduled across threads.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .channels import ChoiMatrix
from .designs import mub_family, pauli_basis_matrix, AXES

logger = logging.getLogger(__name__)

Scheme = Literal["fixed", "random", "exact"]

__all__ = [
    "SamplingPlan",
    "FrequencyTable",
    "setting_count",
    "pauli_joint_probabilities",
    "probability_array",
    "born_probabilities",
    "exact_table",
    "sample",
    "save_table",
    "load_table",
]


@dataclass(frozen=True)
class SamplingPlan:
    """How many shots to take and how to schedule settings."""

    scheme: Literal["fixed", "random"]
    n_shots: int
    seed: int

    def __post_init__(self):
        if self.scheme not in ("fixed", "random"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n_shots <= 0:
            raise ValueError("n_shots must be positive")


@dataclass(frozen=True)
class FrequencyTable:
    """Observed frequencies for one scenario, normalized by nu."""

    scenario: int
    dim: int                 # system dimension d
    values: np.ndarray
    nu: float
    total_shots: int
    scheme: Scheme
    seed: Optional[int] = None

    @property
    def k(self) -> int:
        """Qubit count for the Pauli scenarios (d = 2^k)."""
        k = self.dim.bit_length() - 1
        if 2**k != self.dim:
            raise ValueError("dimension is not a power of two")
        return k


def setting_count(scenario: int, k: Optional[int] = None, d: Optional[int] = None) -> int:
    """Number of distinct setting/input combinations cycled in each scenario."""
    if scenario == 1:
        return 3 ** (2 * k)
    if scenario == 2:
        return 3 ** (2 * k) * 2**k
    if scenario == 3:
        return 1
    if scenario == 4:
        return d * (d + 1)
    raise ValueError(f"unknown scenario {scenario}")


def _pauli_vector_table() -> np.ndarray:
    """2 x 6 matrix whose column u = 2*axis + o is the eigenvector |o, s>."""
    cols = []
    for axis in AXES:
        basis = pauli_basis_matrix(axis)
        cols.append(basis[:, 0])
        cols.append(basis[:, 1])
    return np.stack(cols, axis=1)


def pauli_joint_probabilities(phi: np.ndarray, n: int) -> np.ndarray:
    """Tr(Phi P^s_o) for every setting s in {x,y,z}^n and outcome o in {0,1}^n.

    Returns a (3^n, 2^n) array; the contraction processes one qubit at a
    time, so the cost is O(n 6^n) instead of O(18^n) for projector loops.
    """
    e = _pauli_vector_table()
    w = np.einsum("ru,cu->urc", e.conj(), e)
    t = np.asarray(phi, dtype=complex).reshape((2,) * (2 * n))
    for i in range(n):
        t = np.tensordot(t, w, axes=([i, n], [1, 2]))
        t = np.moveaxis(t, -1, i)
    t = t.real.reshape((3, 2) * n)
    perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return np.ascontiguousarray(t.transpose(perm)).reshape(3**n, 2**n)


def _mub_outcome_probabilities(phi: np.ndarray, d: int) -> np.ndarray:
    """Scenario-3 distribution over the d^2(d^2+1) MUB outcomes."""
    vecs = mub_family(d * d).vectors()
    p = np.einsum("vi,ij,vj->v", vecs.conj(), phi, vecs).real
    return p / (d * d + 1)


def _mub_direct_probabilities(phi: np.ndarray, d: int) -> np.ndarray:
    """Scenario-4 distributions p[input k, outcome l]."""
    vecs = mub_family(d).vectors()
    phi4 = np.asarray(phi).reshape(d, d, d, d)
    amp = np.einsum("li,kj,ijab,la,kb->kl", vecs.conj(), vecs.conj(), phi4, vecs, vecs)
    return amp.real * d / (d + 1)


def _clamp_rows(p: np.ndarray) -> np.ndarray:
    """Clamp tiny negative probabilities and renormalize each distribution."""
    if p.min() < -1e-12:
        raise ValueError(f"probability {p.min():.3e} too negative; Choi not physical?")
    q = np.clip(p, 0.0, None)
    sums = q.sum(axis=-1, keepdims=True)
    if np.abs(sums - 1.0).max() > 1e-9:
        logger.warning("renormalizing probabilities by up to %.3e", np.abs(sums - 1).max())
    return q / sums


def probability_array(choi: ChoiMatrix, scenario: int) -> np.ndarray:
    """Exact Born frequencies for a physical Choi matrix, in table layout.

    Every per-setting distribution is normalized; for scenario 2 the entries
    are the conditional outcome probabilities d * Tr(Phi (P^b_p (x) P^a_q)).
    """
    d = choi.dim
    phi = choi.matrix
    if scenario == 1:
        k = _qubits(d)
        return _clamp_rows(pauli_joint_probabilities(phi, 2 * k))
    if scenario == 2:
        k = _qubits(d)
        joint = pauli_joint_probabilities(phi, 2 * k)
        t = joint.reshape(3**k, 3**k, 2**k, 2**k)  # [b, a, p, q]
        p2 = d * t.transpose(1, 0, 3, 2)           # -> [a, b, q, p]
        return _clamp_rows(np.ascontiguousarray(p2))
    if scenario == 3:
        return _clamp_rows(_mub_outcome_probabilities(phi, d))
    if scenario == 4:
        return _clamp_rows(_mub_direct_probabilities(phi, d))
    raise ValueError(f"unknown scenario {scenario}")


def _qubits(d: int) -> int:
    k = d.bit_length() - 1
    if 2**k != d:
        raise ValueError(f"Pauli scenarios need a power-of-two dimension, got {d}")
    return k


def born_probabilities(choi: ChoiMatrix, scenario: int, index: int = 0) -> np.ndarray:
    """Outcome distribution for one setting (scenarios 1, 2), one input
    (scenario 4), or the single global setting (scenario 3).

    Scenario 2 settings are the (a, b, q) triples with a major and q minor.
    """
    p = probability_array(choi, scenario)
    if scenario == 1:
        return p[index]
    if scenario == 2:
        k = choi.dim.bit_length() - 1
        flat = p.reshape(3**k * 3**k * 2**k, 2**k)
        return flat[index]
    if scenario == 3:
        return p
    if scenario == 4:
        return p[index]
    raise ValueError(f"unknown scenario {scenario}")


def exact_table(choi: ChoiMatrix, scenario: int) -> FrequencyTable:
    """Frequency table holding exact Born probabilities (the N -> inf limit)."""
    values = probability_array(choi, scenario)
    return FrequencyTable(scenario=scenario, dim=choi.dim, values=values,
                          nu=math.nan, total_shots=0, scheme="exact")


def _stream(seed: int, scenario: int, idx: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=[int(seed) & (2**64 - 1), scenario, idx])
    return np.random.Generator(np.random.Philox(seq))


def sample(choi: ChoiMatrix, scenario: int, plan: SamplingPlan) -> FrequencyTable:
    """Draw a frequency table under the fixed or random setting scheme.

    Fixed: every setting receives exactly nu = N / n_settings shots (N must
    divide).  Random: one multinomial draw over the joint (setting, outcome)
    distribution, statistically identical to per-shot uniform settings.
    """
    d = choi.dim
    probs = probability_array(choi, scenario)
    k = d.bit_length() - 1 if d & (d - 1) == 0 else None
    n_settings = setting_count(scenario, k=k, d=d)
    rows = probs.reshape(n_settings, -1)
    nu = plan.n_shots / n_settings

    if plan.scheme == "fixed":
        if plan.n_shots % n_settings:
            raise ValueError(
                f"fixed scheme needs n_shots divisible by {n_settings} settings")
        reps = plan.n_shots // n_settings
        counts = np.empty_like(rows)
        for idx in range(n_settings):
            rng = _stream(plan.seed, scenario, idx)
            counts[idx] = rng.multinomial(reps, rows[idx] / rows[idx].sum())
        values = counts / reps
    else:
        joint = rows.reshape(-1) / n_settings
        rng = _stream(plan.seed, scenario, n_settings)
        counts = rng.multinomial(plan.n_shots, joint / joint.sum())
        values = counts.reshape(rows.shape) / nu

    return FrequencyTable(scenario=scenario, dim=d,
                          values=values.reshape(probs.shape), nu=float(nu),
                          total_shots=plan.n_shots, scheme=plan.scheme,
                          seed=plan.seed)


def _row_index_maps(table: FrequencyTable):
    """(setting, input, outcome) ids for each entry of the flattened values."""
    v = table.values
    if table.scenario == 1:
        s, o = np.divmod(np.arange(v.size), v.shape[1])
        return s, np.zeros(v.size, dtype=int), o
    if table.scenario == 2:
        na, nb, nq, npp = v.shape
        idx = np.arange(v.size)
        p = idx % npp
        q = (idx // npp) % nq
        b = (idx // (npp * nq)) % nb
        a = idx // (npp * nq * nb)
        return a * nb + b, q, p
    if table.scenario == 3:
        n = v.size
        z = np.zeros(n, dtype=int)
        return z, z, np.arange(n)
    if table.scenario == 4:
        kk, ll = np.divmod(np.arange(v.size), v.shape[1])
        return np.zeros(v.size, dtype=int), kk, ll
    raise ValueError(f"unknown scenario {table.scenario}")


def save_table(table: FrequencyTable, path) -> None:
    """Columnar serialization: commented header, then one row per entry."""
    s_id, i_id, o_id = _row_index_maps(table)
    flat = table.values.reshape(-1)
    with open(path, "w", newline="") as fh:
        fh.write(f"# scenario={table.scenario} d={table.dim} "
                 f"N={table.total_shots} nu={table.nu!r} "
                 f"seed={table.seed} scheme={table.scheme} "
                 f"shape={','.join(map(str, table.values.shape))}\n")
        writer = csv.writer(fh)
        writer.writerow(["setting", "input", "outcome", "frequency"])
        for row in zip(s_id, i_id, o_id, flat):
            writer.writerow([row[0], row[1], row[2], repr(float(row[3]))])


def load_table(path) -> FrequencyTable:
    with open(path) as fh:
        header = fh.readline().strip().lstrip("# ")
        meta = dict(item.split("=", 1) for item in header.split())
        reader = csv.reader(fh)
        next(reader)  # column names
        flat = np.array([float(row[3]) for row in reader])
    shape = tuple(int(x) for x in meta["shape"].split(","))
    seed = None if meta["seed"] == "None" else int(meta["seed"])
    return FrequencyTable(scenario=int(meta["scenario"]), dim=int(meta["d"]),
                          values=flat.reshape(shape), nu=float(meta["nu"]),
                          total_shots=int(meta["N"]), scheme=meta["scheme"],
                          seed=seed)
