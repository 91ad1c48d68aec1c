"""Generators for overlapping benchmark problems.

Families:

* line topology (consecutive subcomponents share ``m`` variables),
* ring topology (a line whose last subcomponent also overlaps the first),
* complex topology (randomized overlap graph built by :func:`ctoc`),
* a multi-degree family sweeping the overlap size.

Every instance is deterministic given its seed. Construction draws from a
counter-based (Philox) generator in a fixed order: permutation, global
optimum, then per subcomponent weight, rotation, and (for conflicting
instances) the shared-slot shift redraws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import basefuncs
from .errors import CapabilityError, GenerationError, StructuralError
from .problem import GroundTruth, OverlappingProblem, ProblemInfo

DEFAULT_BOUNDS = (-100.0, 100.0)
DESCRIPTOR_FORMAT = "overlapping-instance/1"


def hash_part(part) -> int:
    """Stable small-int encoding of seed-path parts (no salted hashing)."""
    if isinstance(part, (int, np.integer)):
        return int(part)
    import zlib
    return zlib.crc32(str(part).encode("utf8"))


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, tuple):
        return np.random.SeedSequence([abs(hash_part(p)) for p in seed])
    return np.random.SeedSequence(seed)


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int, tuple of parts, SeedSequence, or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(as_seed_sequence(seed)))


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Random orthogonal matrix via QR of a Gaussian, positive diagonal."""
    if d < 1:
        raise StructuralError("matrix dimension must be >= 1")
    a = rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


@dataclass(frozen=True)
class SubcomponentSpec:
    """One subcomponent: where it lives and how its slice is transformed."""

    indices: tuple[int, ...]          # post-permutation positions, sorted
    rotation: np.ndarray              # orthogonal, |indices| x |indices|
    shift: np.ndarray                 # optimum of this slice, aligned to indices
    weight: float
    base: str

    def validate(self, n: int, lb: np.ndarray, ub: np.ndarray) -> None:
        d = len(self.indices)
        if d == 0:
            raise StructuralError("subcomponent with no variables")
        if any(i < 0 or i >= n for i in self.indices):
            raise StructuralError("subcomponent index outside the variable set")
        if tuple(sorted(self.indices)) != self.indices:
            raise StructuralError("subcomponent indices must be sorted")
        if self.rotation.shape != (d, d):
            raise StructuralError("rotation shape does not match the slice")
        err = np.max(np.abs(self.rotation.T @ self.rotation - np.eye(d)))
        if err > 1e-9:
            raise StructuralError(f"rotation is not orthogonal (deviation {err:.2e})")
        idx = np.asarray(self.indices)
        if np.any(self.shift <= lb[idx]) or np.any(self.shift >= ub[idx]):
            raise StructuralError("shift must lie strictly inside the bounds")
        if self.weight <= 0:
            raise StructuralError("weight must be positive")
        if self.base not in basefuncs.BASE_KINDS:
            raise StructuralError(f"unknown base function {self.base!r}")


@dataclass
class TopologyConfig:
    """Declarative description of one benchmark instance."""

    topology: str                     # line | ring | complex
    sizes: tuple[int, ...] | None = None
    overlap: int = 0                  # m
    conflict: str = "conforming"
    base: str | tuple[str, ...] = "elliptic"
    seed: object = 0
    n_sub: int | None = None          # complex topology
    size: int | None = None           # complex topology: uniform subcomponent size
    p: float = 0.0                    # complex topology: extra-link probability
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    permute: bool = True
    name: str = ""

    def base_for(self, i: int, count: int) -> str:
        if isinstance(self.base, str):
            return self.base
        return self.base[i % len(self.base)]


class _ComposedEvaluator:
    """Fused evaluator for a sum of weighted, rotated, shifted base slices.

    One gather, one block-diagonal sparse matvec, then per-kind segment
    reductions. ``batch`` evaluates a (k, n) matrix of points column-wise
    with the same accumulation order as the single-point path.
    """

    def __init__(self, specs: list[SubcomponentSpec]):
        self.specs = specs
        pos = [np.asarray(s.indices, dtype=np.intp) for s in specs]
        self.gather = np.concatenate(pos)
        self.shift_cat = np.concatenate([s.shift for s in specs])
        self.scale_cat = np.concatenate([
            np.full(len(s.indices), basefuncs.INPUT_SCALE[s.base]) for s in specs])
        self.rot_block = sp.block_diag([sp.csr_matrix(s.rotation) for s in specs],
                                       format="csr")
        lengths = np.array([len(s.indices) for s in specs])
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        self.weights = np.array([s.weight for s in specs])

        by_kind: dict[str, list[int]] = {}
        for i, s in enumerate(specs):
            by_kind.setdefault(s.base, []).append(i)
        self._plans = {}
        for kind, segs in by_kind.items():
            seg_pos = np.concatenate([
                np.arange(starts[i], starts[i] + lengths[i]) for i in segs])
            seg_lengths = lengths[segs]
            seg_starts = np.concatenate([[0], np.cumsum(seg_lengths)[:-1]])
            plan = {
                "segments": np.asarray(segs),
                "positions": seg_pos,
                "starts": seg_starts,
                "lengths": seg_lengths,
            }
            if kind == "elliptic":
                plan["coef"] = np.concatenate([
                    basefuncs.elliptic_coefficients(lengths[i]) for i in segs])
            self._plans[kind] = plan

    def _segment_values(self, z: np.ndarray) -> np.ndarray:
        """Weighted value of every subcomponent; z has shape (L,) or (L, k)."""
        single = z.ndim == 1
        if single:
            z = z[:, None]
        out = np.zeros((len(self.specs), z.shape[1]))
        for kind, plan in self._plans.items():
            zs = z[plan["positions"], :]
            if kind == "elliptic":
                terms = zs * zs * plan["coef"][:, None]
            elif kind == "rastrigin":
                terms = zs * zs - 10.0 * np.cos(2.0 * np.pi * zs) + 10.0
            else:  # schwefel_1_2
                c = np.cumsum(zs, axis=0)
                head = np.zeros((len(plan["starts"]), z.shape[1]))
                nz = plan["starts"] > 0
                head[nz] = c[plan["starts"][nz] - 1, :]
                prefix = c - np.repeat(head, plan["lengths"], axis=0)
                terms = prefix * prefix
            sums = np.add.reduceat(terms, plan["starts"], axis=0)
            out[plan["segments"], :] = sums
        out *= self.weights[:, None]
        return out[:, 0] if single else out

    def _z(self, x: np.ndarray) -> np.ndarray:
        return self.rot_block @ ((x[..., self.gather] - self.shift_cat)
                                 * self.scale_cat).T

    def __call__(self, x: np.ndarray) -> float:
        z = self.rot_block @ ((x[self.gather] - self.shift_cat) * self.scale_cat)
        return float(np.sum(self._segment_values(z)))

    def batch(self, xs: np.ndarray) -> np.ndarray:
        z = self.rot_block @ ((xs[:, self.gather] - self.shift_cat)
                              * self.scale_cat).T
        return np.sum(self._segment_values(z), axis=0)

    def subcomponent_values(self, x: np.ndarray) -> np.ndarray:
        z = self.rot_block @ ((x[self.gather] - self.shift_cat) * self.scale_cat)
        return self._segment_values(z)


def compose_overlapping(specs, permutation=None, conflict="conforming",
                        bounds=DEFAULT_BOUNDS, info: ProblemInfo | None = None
                        ) -> OverlappingProblem:
    """Assemble an evaluatable problem from subcomponent specs.

    ``specs`` carry post-permutation index sets; ``permutation`` is retained
    as metadata so descriptors round-trip. The evaluator computes
    ``sum_i w_i * base_i(R_i (x[S_i] - o_i))`` with slices in sorted index
    order.
    """
    specs = [s if isinstance(s, SubcomponentSpec) else SubcomponentSpec(*s)
             for s in specs]
    cover = set()
    for s in specs:
        cover |= set(s.indices)
    n = max(cover) + 1 if cover else 0
    if cover != set(range(n)) or n == 0:
        raise StructuralError("subcomponent index sets must cover {0..n-1}")
    lb = np.full(n, bounds[0])
    ub = np.full(n, bounds[1])
    for s in specs:
        s.validate(n, lb, ub)
    truth = GroundTruth.from_subcomponents([s.indices for s in specs])
    evaluator = _ComposedEvaluator(specs)
    from .problem import overlapping_degree
    od = overlapping_degree(truth, n)
    if info is None:
        info = ProblemInfo(topology="custom", conflict=conflict,
                           overlapping_degree=od)
    else:
        info = ProblemInfo(name=info.name, topology=info.topology,
                           conflict=conflict, overlapping_degree=od,
                           extra=info.extra)
    problem = OverlappingProblem(n, lb, ub, evaluator, truth, info)
    problem.specs = specs
    problem.permutation = (np.arange(n) if permutation is None
                           else np.asarray(permutation, dtype=int))
    return problem


def _line_blocks(sizes, m, ring):
    offsets = []
    pos = 0
    for s in sizes:
        offsets.append(pos)
        pos += s - m
    blocks = [list(range(off, off + s)) for off, s in zip(offsets, sizes)]
    if ring:
        tail = blocks[-1]
        blocks[-1] = tail[:len(tail) - m] + list(range(m))
    return blocks


def _validate_chain(sizes, m, ring):
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 1:
        raise StructuralError("need at least one subcomponent")
    if m < 0 or (sizes and m >= min(sizes)):
        raise StructuralError("overlap must satisfy 0 <= m < min subcomponent size")
    if ring:
        if len(sizes) < 3:
            raise StructuralError("ring topology needs at least 3 subcomponents")
        two_sided = sizes
    else:
        two_sided = sizes[1:-1]
    if any(s < 2 * m for s in two_sided):
        raise StructuralError("a subcomponent with two overlaps needs size >= 2m")
    return sizes


def _draw_shift(rng, lb, ub):
    return lb + (0.1 + 0.8 * rng.random(lb.shape)) * (ub - lb)


def _specs_from_groups(logical_groups, config: TopologyConfig, seed=None):
    """Permute, shift, rotate, and weight logical variable groups."""
    n = max(max(g) for g in logical_groups) + 1
    rng = make_rng(config.seed if seed is None else seed)
    if config.permute is True:
        perm = rng.permutation(n)
    elif config.permute is False:
        perm = np.arange(n)
    else:
        perm = np.asarray(config.permute, dtype=int)
        if sorted(perm.tolist()) != list(range(n)):
            raise StructuralError("explicit permutation must be a bijection on {0..n-1}")
    lb = np.full(n, config.bounds[0])
    ub = np.full(n, config.bounds[1])
    x_opt = _draw_shift(rng, lb, ub)

    final_groups = [tuple(sorted(int(perm[v]) for v in g)) for g in logical_groups]
    counts: dict[int, int] = {}
    for g in final_groups:
        for v in g:
            counts[v] = counts.get(v, 0) + 1

    conflicting = config.conflict == "conflicting"
    specs = []
    for i, g in enumerate(final_groups):
        idx = np.asarray(g)
        weight = float(10.0 ** (3.0 * abs(rng.standard_normal())))
        rot = random_orthogonal(len(g), rng)
        shift = x_opt[idx].copy()
        if conflicting:
            shared_slots = np.flatnonzero([counts[v] >= 2 for v in g])
            if shared_slots.size:
                shift[shared_slots] = _draw_shift(rng, lb[idx[shared_slots]],
                                                  ub[idx[shared_slots]])
        specs.append(SubcomponentSpec(g, rot, shift, weight,
                                      config.base_for(i, len(final_groups))))
    return specs, perm


def build_line(config: TopologyConfig) -> OverlappingProblem:
    """Line topology: consecutive subcomponents share ``overlap`` variables."""
    sizes = _validate_chain(config.sizes, config.overlap, ring=False)
    blocks = _line_blocks(sizes, config.overlap, ring=False)
    specs, perm = _specs_from_groups(blocks, config)
    info = ProblemInfo(name=config.name or "line", topology="line",
                       extra={"sizes": list(sizes), "overlap": config.overlap})
    return compose_overlapping(specs, perm, config.conflict, config.bounds, info)


def build_ring(config: TopologyConfig) -> OverlappingProblem:
    """Ring topology: a line whose last subcomponent also overlaps the first."""
    sizes = _validate_chain(config.sizes, config.overlap, ring=True)
    blocks = _line_blocks(sizes, config.overlap, ring=True)
    specs, perm = _specs_from_groups(blocks, config)
    info = ProblemInfo(name=config.name or "ring", topology="ring",
                       extra={"sizes": list(sizes), "overlap": config.overlap})
    return compose_overlapping(specs, perm, config.conflict, config.bounds, info)


@dataclass(frozen=True)
class CtocTopology:
    """Index sets produced by :func:`ctoc` plus the drawn link groups."""

    groups: tuple[frozenset[int], ...]
    link_groups: tuple[frozenset[int], ...]

    @property
    def dimension(self) -> int:
        return max(max(g) for g in self.groups) + 1


def ctoc(n_sub: int, s: int, m: int, p: float, rng: np.random.Generator,
         max_redraws: int = 20) -> CtocTopology:
    """Randomized complex-topology constructor.

    The first subcomponent takes ``s`` fresh variables. Every later one takes
    ``m`` shared variables from one randomly chosen predecessor, adds, with
    probability ``p`` per other predecessor, ``m`` more from it, then pads
    with fresh variables up to size ``s``. Oversubscribed draws (shared pool
    exceeding ``s``) are redrawn wholesale up to ``max_redraws`` times.

    Fresh variables are allocated in id order and draw nothing from ``rng``;
    the stream is consumed only by the subcomponent/link choices, so a run
    can be replayed from the seed.
    """
    if n_sub < 2:
        raise StructuralError("need at least 2 subcomponents")
    if not 0.0 <= p <= 1.0:
        raise StructuralError("p must lie in [0, 1]")
    if m < 1 or m >= s:
        raise StructuralError("overlap must satisfy 1 <= m < s")
    next_id = 0

    def fresh(k):
        nonlocal next_id
        ids = list(range(next_id, next_id + k))
        next_id += k
        return ids

    groups = [np.array(fresh(s))]
    links: list[frozenset[int]] = []
    for i in range(1, n_sub):
        for _ in range(max_redraws):
            k = int(rng.integers(len(groups)))
            drawn = [frozenset(int(v) for v in
                               rng.choice(groups[k], size=m, replace=False))]
            for j in range(len(groups)):
                if j == k:
                    continue
                if rng.uniform() < p:
                    drawn.append(frozenset(int(v) for v in
                                           rng.choice(groups[j], size=m,
                                                      replace=False)))
            pool = set().union(*drawn)
            if len(pool) <= s:
                break
        else:
            raise GenerationError(
                f"subcomponent {i}: shared draws kept exceeding size {s} "
                f"after {max_redraws} redraws")
        g = sorted(pool) + fresh(s - len(pool))
        groups.append(np.array(sorted(g)))
        links.extend(drawn)
    return CtocTopology(tuple(frozenset(int(v) for v in g) for g in groups),
                        tuple(links))


def build_complex(config: TopologyConfig) -> OverlappingProblem:
    """Complex topology instance from CTOC plus the usual transforms."""
    if config.n_sub is None or config.size is None:
        raise StructuralError("complex topology needs n_sub and size")
    topo_seq, spec_seq = as_seed_sequence(config.seed).spawn(2)
    topo = ctoc(config.n_sub, config.size, config.overlap, config.p,
                make_rng(topo_seq))
    blocks = [sorted(g) for g in topo.groups]
    specs, perm = _specs_from_groups(blocks, config, seed=spec_seq)
    info = ProblemInfo(
        name=config.name or "complex", topology="complex",
        extra={"n_sub": config.n_sub, "size": config.size,
               "overlap": config.overlap, "p": config.p,
               "link_groups": [sorted(int(perm[v]) for v in g)
                               for g in topo.link_groups]})
    return compose_overlapping(specs, perm, config.conflict, config.bounds, info)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

SUITE_NAMES = ("LTO", "RTO", "CTO", "MDO", "NAO")

_TABLE_BASES = ("schwefel_1_2", "elliptic", "rastrigin")
_PAPER_NONUNIFORM = (100,) * 5 + (50,) * 5 + (25,) * 10
_PAPER_UNIFORM = (50,) * 20


def _chain_suite_configs(scale: str, desk_factor: int):
    if scale == "paper":
        nonuni, uni, m = _PAPER_NONUNIFORM, _PAPER_UNIFORM, 5
    else:
        nonuni = tuple(s // desk_factor for s in _PAPER_NONUNIFORM)
        uni = tuple(s // desk_factor for s in _PAPER_UNIFORM)
        m = 2
    # table ordering: per base, nonuniform conf/confl then uniform conf/confl
    ordered = []
    for base in _TABLE_BASES:
        ordered.append((base, nonuni, "conforming"))
        ordered.append((base, nonuni, "conflicting"))
        ordered.append((base, uni, "conforming"))
        ordered.append((base, uni, "conflicting"))
    return ordered, m


def _suite_seed(master_seed, suite: str, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([hash_part(master_seed), hash_part(suite), index])


def suite(name: str, scale: str = "desk", master_seed: int = 0,
          desk_factor: int = 5) -> list[OverlappingProblem]:
    """Materialize one benchmark family.

    ``desk`` scale divides the subcomponent sizes by ``desk_factor`` and uses
    an overlap of 2 for the line/ring families; topology and naming follow
    the paper-scale layout.
    """
    name = name.upper()
    if name not in SUITE_NAMES:
        raise StructuralError(f"unknown suite {name!r}; choose from {SUITE_NAMES}")
    if scale not in ("paper", "desk"):
        raise StructuralError("scale must be 'paper' or 'desk'")
    if name == "NAO":
        raise CapabilityError(
            "the NAO family needs a non-additive interaction detector, which "
            "this package does not provide; see the README for the plug-in seam")

    problems = []
    if name in ("LTO", "RTO"):
        configs, m = _chain_suite_configs(scale, desk_factor)
        ring = name == "RTO"
        base_index = 13 if ring else 1
        for i, (base, sizes, conflict) in enumerate(configs):
            label = f"{name.lower()}_f{base_index + i}"
            cfg = TopologyConfig(topology="ring" if ring else "line",
                                 sizes=sizes, overlap=m, conflict=conflict,
                                 base=base, seed=_suite_seed(master_seed, name, i),
                                 name=label)
            problems.append(build_ring(cfg) if ring else build_line(cfg))
    elif name == "CTO":
        if scale == "paper":
            n_sub, size, m = 20, 50, 5
        else:
            n_sub, size, m = 20, 10, 2
        for i in range(12):
            base = _TABLE_BASES[(i // 4) % 3]
            conflict = "conforming" if i % 2 == 0 else "conflicting"
            label = f"cto_f{25 + i}"
            cfg = TopologyConfig(topology="complex", overlap=m, conflict=conflict,
                                 base=base, seed=_suite_seed(master_seed, name, i),
                                 n_sub=n_sub, size=size, p=0.2, name=label)
            problems.append(build_complex(cfg))
    else:  # MDO
        if scale == "paper":
            chain_sizes, chain_ms = (50,) * 20, (1, 3, 5, 10, 15)
            ctoc_args, ctoc_ms = (20, 50), (3, 5, 8, 12, 16)
        else:
            chain_sizes, chain_ms = (20,) * 12, (1, 3, 5, 8, 10)
            ctoc_args, ctoc_ms = (12, 34), (3, 5, 8, 12, 16)
        idx = 1
        for ring in (False, True):
            for m in chain_ms:
                label = f"mdo_f{idx}"
                cfg = TopologyConfig(topology="ring" if ring else "line",
                                     sizes=chain_sizes, overlap=m,
                                     base="elliptic",
                                     seed=_suite_seed(master_seed, name, idx),
                                     name=label)
                problems.append(build_ring(cfg) if ring else build_line(cfg))
                idx += 1
        for m in ctoc_ms:
            label = f"mdo_f{idx}"
            cfg = TopologyConfig(topology="complex", overlap=m, base="elliptic",
                                 seed=_suite_seed(master_seed, name, idx),
                                 n_sub=ctoc_args[0], size=ctoc_args[1], p=0.2,
                                 name=label)
            problems.append(build_complex(cfg))
            idx += 1
    return problems


# ---------------------------------------------------------------------------
# Instance descriptors
# ---------------------------------------------------------------------------


def descriptor_dict(problem: OverlappingProblem) -> dict:
    """JSON-ready description of a composed instance (1-based indices)."""
    specs = getattr(problem, "specs", None)
    if specs is None:
        raise StructuralError("only composed instances can be serialized")
    return {
        "format": DESCRIPTOR_FORMAT,
        "name": problem.info.name,
        "topology": problem.info.topology,
        "conflict": problem.info.conflict,
        "dimension": problem.dimension,
        "overlapping_degree": problem.info.overlapping_degree,
        "lower_bound": problem.lower_bound.tolist(),
        "upper_bound": problem.upper_bound.tolist(),
        "permutation": [int(v) + 1 for v in problem.permutation],
        "extra": {k: v for k, v in problem.info.extra.items()},
        "subcomponents": [
            {
                "indices": [i + 1 for i in s.indices],
                "weight": s.weight,
                "base": s.base,
                "shift": s.shift.tolist(),
                "rotation": [row.tolist() for row in s.rotation],
            }
            for s in specs
        ],
    }


def save_descriptor(problem: OverlappingProblem, path) -> None:
    Path(path).write_text(json.dumps(descriptor_dict(problem), indent=1) + "\n",
                          encoding="utf8")


def load_descriptor(path) -> OverlappingProblem:
    data = json.loads(Path(path).read_text(encoding="utf8"))
    if data.get("format") != DESCRIPTOR_FORMAT:
        raise StructuralError(f"unrecognized descriptor format in {path}")
    specs = [
        SubcomponentSpec(
            indices=tuple(int(i) - 1 for i in sub["indices"]),
            rotation=np.asarray(sub["rotation"], dtype=float),
            shift=np.asarray(sub["shift"], dtype=float),
            weight=float(sub["weight"]),
            base=sub["base"],
        )
        for sub in data["subcomponents"]
    ]
    lb = np.asarray(data["lower_bound"], dtype=float)
    bounds = (float(lb[0]), float(np.asarray(data["upper_bound"])[0]))
    info = ProblemInfo(name=data["name"], topology=data["topology"],
                       conflict=data["conflict"], extra=data.get("extra", {}))
    problem = compose_overlapping(specs,
                                  [int(v) - 1 for v in data["permutation"]],
                                  data["conflict"], bounds, info)
    return problem


def verify_instance(problem: OverlappingProblem) -> None:
    """Re-check the structural invariants of a (re)loaded instance."""
    problem.ground_truth.validate(problem.dimension)
    for s in problem.specs:
        s.validate(problem.dimension, problem.lower_bound, problem.upper_bound)
    from .problem import overlapping_degree
    od = overlapping_degree(problem.ground_truth, problem.dimension)
    if abs(od - problem.info.overlapping_degree) > 1e-12:
        raise StructuralError("recorded overlapping degree disagrees with structure")
    if problem.info.conflict == "conforming":
        x_opt = np.empty(problem.dimension)
        for s in problem.specs:
            x_opt[np.asarray(s.indices)] = s.shift
        val = problem._evaluator(x_opt)
        if val != 0.0:
            raise StructuralError(
                f"conforming instance should vanish at its optimum, got {val!r}")


def parse_sizes(text: str) -> tuple[int, ...]:
    """Parse '100x5+50x5+25x10' into a size tuple (size x count blocks)."""
    sizes: list[int] = []
    for block in text.split("+"):
        block = block.strip().lower()
        if "x" in block:
            size, count = block.split("x", 1)
            sizes.extend([int(size)] * int(count))
        elif block:
            sizes.append(int(block))
    if not sizes:
        raise StructuralError(f"could not parse sizes from {text!r}")
    return tuple(sizes)
