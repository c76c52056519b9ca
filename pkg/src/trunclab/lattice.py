"""Rank-1 lattice rules with a single random shift, and QMC averaging.

Nodes are frac(i*z/n + shift) - 1/2 on [-1/2, 1/2)^s; the products i*z_j are
reduced mod n in exact integer arithmetic before any division.  All averages
follow a fixed blocked pairwise summation tree, so results are bit-identical
no matter how many workers share the index range.

Generating vectors are ingested from plain text files, either one component
per line or the common two-column "dimension value" layout of published
lattice parameter files.
"""

import importlib.resources
import re
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .field import truncate

MAX_NODES = 2 ** 20
BUILTIN_VECTOR = "lattice-rcbc-1024-1048576.3600.txt"

_MEAN_BLOCK = 1024  # indices per partial sum in qmc_mean
_SWEEP_BLOCK = 64   # indices per partial sum in truncation sweeps


class LatticeFormatError(ValueError):
    """Malformed generating-vector text."""


class EvaluationError(RuntimeError):
    """An integrand produced a non-finite value."""


@dataclass(frozen=True)
class LatticeRule:
    """Shifted rank-1 lattice: node count, reduced vector, shift, seed."""

    n: int
    z: np.ndarray
    shift: np.ndarray
    seed: int


def draw_shift(seed: int, s: int) -> np.ndarray:
    """Uniform shift in [0,1)^s drawn from a PCG64 stream seeded with `seed`."""
    return np.random.Generator(np.random.PCG64(int(seed))).random(int(s))


def lattice_rule(n: int, z, seed: int = 1) -> LatticeRule:
    """Build a shifted rule: validate n, reduce z mod n, draw the shift.

    The rule is fully reproducible from (n, z, seed); the shift has one
    component per dimension of z.
    """
    n = int(n)
    if n < 2 or n & (n - 1):
        raise ValueError(f"node count {n} is not a power of two >= 2")
    if n > MAX_NODES:
        raise ValueError(f"node count {n} exceeds the supported maximum 2^20")
    z = np.asarray(z, dtype=np.int64)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("generating vector must be a nonempty 1-D integer array")
    reduced = np.mod(z, n)
    if np.any(reduced == 0):
        j = int(np.flatnonzero(reduced == 0)[0])
        raise ValueError(f"component z_{j + 1} = {int(z[j])} reduces to 0 mod {n}")
    if reduced[0] != 1:
        warnings.warn(
            f"z_1 reduces to {int(reduced[0])}; standard generating vectors have z_1 = 1"
        )
    shift = draw_shift(seed, z.size)
    reduced.setflags(write=False)
    shift.setflags(write=False)
    return LatticeRule(n=n, z=reduced, shift=shift, seed=int(seed))


def with_seed(rule: LatticeRule, seed: int) -> LatticeRule:
    """Same lattice, fresh random shift."""
    return lattice_rule(rule.n, rule.z, seed=seed)


def generate_node(rule: LatticeRule, i: int, s: int) -> np.ndarray:
    """Shifted node for index i (taken mod n) in [-1/2, 1/2)^s."""
    if s > rule.z.size:
        raise ValueError(
            f"dimension {s} exceeds generating vector length {rule.z.size}"
        )
    i = int(i) % rule.n
    residue = (i * rule.z[:s]) % rule.n
    return (residue / rule.n + rule.shift[:s]) % 1.0 - 0.5


def generate_nodes(rule: LatticeRule, start: int, stop: int, s: int) -> np.ndarray:
    """Nodes for the index range [start, stop) as a (stop-start, s) array."""
    if s > rule.z.size:
        raise ValueError(
            f"dimension {s} exceeds generating vector length {rule.z.size}"
        )
    idx = np.arange(start, stop, dtype=np.int64) % rule.n
    residue = (idx[:, None] * rule.z[None, :s]) % rule.n
    return (residue / rule.n + rule.shift[None, :s]) % 1.0 - 0.5


def _pairwise_sum(values):
    """Fixed-tree pairwise sum of a sequence of floats or arrays."""
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        paired = [vals[k] + vals[k + 1] for k in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            paired.append(vals[-1])
        vals = paired
    return vals[0]


def _check_n_used(rule: LatticeRule, n_used):
    if n_used is None:
        return rule.n
    n_used = int(n_used)
    if n_used < 1 or n_used & (n_used - 1):
        raise ValueError(f"n_used = {n_used} is not a power of two")
    if n_used > rule.n:
        raise ValueError(f"n_used = {n_used} exceeds the rule's node count {rule.n}")
    return n_used


def qmc_mean(f, rule: LatticeRule, s: int, n_used=None) -> float:
    """Equal-weight average of f over the first n_used shifted nodes.

    Evaluations are streamed in fixed blocks of 1024 indices; block sums are
    combined by a fixed pairwise tree.  A non-finite value of f aborts with
    the offending node index.
    """
    n_used = _check_n_used(rule, n_used)
    block_sums = []
    for start in range(0, n_used, _MEAN_BLOCK):
        stop = min(start + _MEAN_BLOCK, n_used)
        nodes = generate_nodes(rule, start, stop, s)
        vals = np.array([f(nodes[k]) for k in range(stop - start)], dtype=float)
        finite = np.isfinite(vals)
        if not finite.all():
            k = int(np.flatnonzero(~finite)[0])
            raise EvaluationError(
                f"integrand returned {vals[k]!r} at node index {start + k}"
            )
        block_sums.append(float(np.sum(vals)))
    return _pairwise_sum(block_sums) / n_used


# Worker-side state for truncation sweeps.  Installed once per process by the
# pool initializer (or by the serial path), so large models are not re-pickled
# for every block.
_SWEEP_STATE = None


def _sweep_init(model, s_list, s_ref, rule, norm):
    global _SWEEP_STATE
    _SWEEP_STATE = (model, tuple(s_list), int(s_ref), rule, norm)


def _sweep_block(bounds):
    model, s_list, s_ref, rule, norm = _SWEEP_STATE
    start, stop = bounds
    sums = np.zeros(len(s_list))
    for i in range(start, stop):
        y = generate_node(rule, i, s_ref)
        try:
            reference = model(s_ref, y)
            values = [
                None if s == s_ref else model(s, truncate(y, s)) for s in s_list
            ]
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(f"model failed at node index {i}: {exc}") from exc
        for k, s in enumerate(s_list):
            if s == s_ref:
                continue
            d = float(norm(reference, values[k]))
            if not np.isfinite(d):
                raise EvaluationError(
                    f"non-finite distance {d!r} at node index {i}, s = {s}"
                )
            sums[k] += d * d
    return sums


def estimate_truncation_errors(
    model, s_list, s_ref, rule: LatticeRule, norm, n_used=None, workers: int = 1
):
    """QMC estimates of the L2 truncation error for every s in s_list.

    For each node the model is evaluated once at the reference dimension
    s_ref (the stand-in for infinity) and once per requested truncation
    level; `norm` maps two model outputs to their distance.  Returns an
    array aligned with s_list; entries with s = s_ref are exactly zero.

    Work is split into fixed blocks of 64 node indices.  With workers > 1
    the blocks go to a process pool (model, rule and norm must be
    picklable); the fixed block partition and pairwise reduction make the
    result bit-identical for every worker count.
    """
    global _SWEEP_STATE
    n_used = _check_n_used(rule, n_used)
    s_list = [int(s) for s in s_list]
    if not s_list:
        raise ValueError("s_list must be nonempty")
    for s in s_list:
        if not 0 <= s <= s_ref:
            raise ValueError(f"s = {s} outside [0, s_ref = {s_ref}]")
    if s_ref > rule.z.size:
        raise ValueError(
            f"s_ref = {s_ref} exceeds generating vector length {rule.z.size}"
        )
    blocks = [(b, min(b + _SWEEP_BLOCK, n_used)) for b in range(0, n_used, _SWEEP_BLOCK)]
    if workers <= 1:
        _sweep_init(model, s_list, s_ref, rule, norm)
        try:
            partials = [_sweep_block(block) for block in blocks]
        finally:
            _SWEEP_STATE = None
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_sweep_init,
            initargs=(model, s_list, s_ref, rule, norm),
        ) as pool:
            partials = list(pool.map(_sweep_block, blocks))
    totals = _pairwise_sum(partials)
    return np.sqrt(totals / n_used)


def estimate_truncation_error(
    model, s: int, s_ref: int, rule: LatticeRule, norm, n_used=None
) -> float:
    """Single-s convenience wrapper around estimate_truncation_errors."""
    return float(
        estimate_truncation_errors(model, [s], s_ref, rule, norm, n_used=n_used)[0]
    )


def multishift_truncation_estimates(
    model, s: int, s_ref: int, rule: LatticeRule, norm, seeds, n_used=None
):
    """Re-estimate under several independent shifts (variance diagnostic).

    Returns one estimate per seed; the root mean square of the returned
    array is the combined multi-shift estimate.  Headline numbers use the
    single shift baked into `rule`.
    """
    return np.array(
        [
            estimate_truncation_error(
                model, s, s_ref, with_seed(rule, seed), norm, n_used=n_used
            )
            for seed in seeds
        ]
    )


def scalar_distance(u, v) -> float:
    """Distance |u - v| for models returning plain numbers."""
    return abs(u - v)


def parse_generating_vector(text: str) -> np.ndarray:
    """Parse generating-vector text into an int64 array.

    Accepts one component per line, or two whitespace-separated columns
    (dimension, component) with a strictly increasing dimension column.
    """
    values = []
    last_index = None
    ncols = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (1, 2):
            raise LatticeFormatError(
                f"line {lineno}: expected 1 or 2 columns, found {len(parts)}"
            )
        if ncols is None:
            ncols = len(parts)
        elif len(parts) != ncols:
            raise LatticeFormatError(
                f"line {lineno}: mixed {ncols}-column and {len(parts)}-column rows"
            )
        try:
            numbers = [int(part) for part in parts]
        except ValueError:
            raise LatticeFormatError(
                f"line {lineno}: non-integer token in {line!r}"
            ) from None
        if ncols == 2:
            if last_index is not None and numbers[0] <= last_index:
                raise LatticeFormatError(
                    f"line {lineno}: dimension column must increase strictly "
                    f"({numbers[0]} after {last_index})"
                )
            last_index = numbers[0]
            component = numbers[1]
        else:
            component = numbers[0]
        if component <= 0:
            raise LatticeFormatError(
                f"line {lineno}: component {component} is not positive"
            )
        values.append(component)
    if not values:
        raise LatticeFormatError("no generating-vector entries found")
    return np.asarray(values, dtype=np.int64)


def load_generating_vector(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        return parse_generating_vector(fh.read())


def load_builtin_vector() -> np.ndarray:
    """The vendored generating vector shipped with the package."""
    resource = importlib.resources.files("trunclab") / "data" / BUILTIN_VECTOR
    return parse_generating_vector(resource.read_text(encoding="ascii"))


def declared_node_range(filename: str):
    """(n_min, n_max) declared in names like 'lattice-x-1024-1048576.3600.txt'.

    Returns None when the name does not follow that layout.
    """
    match = re.search(r"-(\d+)-(\d+)\.(\d+)(?:\.\w+)?$", str(filename))
    if not match:
        return None
    return int(match.group(1)), int(match.group(2))
