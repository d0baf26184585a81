"""File formats: model specs, state dumps, run manifests and atomic writes.

Model-spec files are JSON with sections ``version``, ``graph``, ``K1``,
``K2``, ``beta``, ``t`` and ``product_state``. Complex numbers are written
as ``[re, im]`` pairs and matrices row-major. A few shorthands keep
hand-written files short::

    {"fixture": "FX-CHAIN4", "beta": 0.3}
    "graph": "path(4)"            # also cycle(L), grid(Lx,Ly,open|periodic)
    "K1": {"per_edge": "ising", "sign": 1}
    "K2": {"per_edge": "projector11"}
    "product_state": "plus"       # or "zero"
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, lattice
from .lattice import Graph
from .models import KET0, KET_PLUS, ModelSpec, fixture
from .operators import CommutingFamily, LocalOperator, family_radius, ising_edge, plus_projector, projector11

MODEL_VERSION = 1


# Complex numbers --------------------------------------------------------------------


def encode_complex(a) -> list:
    """Nested lists with every entry an ``[re, im]`` pair."""
    arr = np.asarray(a, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def decode_complex(x, ndim: int = 2) -> np.ndarray:
    """Inverse of :func:`encode_complex` for an ``ndim``-dimensional array.

    An array with exactly ``ndim`` axes is read as real.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == ndim:
        return arr.astype(complex)
    raise ValueError(f"expected a {ndim}-dimensional array of reals or [re, im] pairs, got shape {arr.shape}")


# Model specs ------------------------------------------------------------------------


def _graph_to_dict(g: Graph) -> dict:
    return {"vertices": g.vertex_count, "edges": [list(e) for e in g.sorted_edges()]}


_LATTICE_RE = re.compile(r"^\s*(path|cycle|grid)\s*\(([^)]*)\)\s*$")


def parse_graph(spec) -> Graph:
    if isinstance(spec, dict):
        return Graph(int(spec["vertices"]), [tuple(e) for e in spec.get("edges", [])])
    m = _LATTICE_RE.match(str(spec))
    if not m:
        raise ValueError(f"unrecognized graph {spec!r}")
    kind, args = m.group(1), [a.strip() for a in m.group(2).split(",") if a.strip()]
    if kind == "grid":
        return lattice.grid(int(args[0]), int(args[1]), args[2] if len(args) > 2 else "open")
    return getattr(lattice, kind)(int(args[0]))


def _family_to_dict(f: CommutingFamily) -> dict:
    return {
        "declared_radius": f.declared_radius,
        "terms": [{"support": list(k.support), "matrix": encode_complex(k.matrix)} for k in f],
    }


def _named_term(name: str, sites, sign: int = 1) -> LocalOperator:
    if name == "ising":
        return ising_edge(*sites, sign=sign)
    if name == "projector11":
        return projector11(*sites)
    if name == "plus_projector":
        return plus_projector(*sites)
    raise ValueError(f"unknown named term {name!r}")


def parse_family(spec, g: Graph) -> CommutingFamily:
    if spec is None or spec == []:
        return CommutingFamily([], 0)
    if isinstance(spec, dict) and "per_edge" in spec:
        terms = [_named_term(spec["per_edge"], e, spec.get("sign", 1)) for e in g.sorted_edges()]
        return CommutingFamily(terms, family_radius(g, terms))
    if isinstance(spec, dict) and "per_site" in spec:
        terms = [_named_term(spec["per_site"], [v]) for v in range(g.vertex_count)]
        return CommutingFamily(terms, family_radius(g, terms))
    entries = spec["terms"] if isinstance(spec, dict) else spec
    terms = []
    for e in entries:
        if "named" in e:
            terms.append(_named_term(e["named"], e["sites"], e.get("sign", 1)))
        else:
            terms.append(LocalOperator(e["support"], decode_complex(e["matrix"]), minimize=False))
    radius = spec.get("declared_radius") if isinstance(spec, dict) else None
    return CommutingFamily(terms, family_radius(g, terms) if radius is None else radius)


def model_to_dict(model: ModelSpec) -> dict:
    return {
        "version": MODEL_VERSION,
        "name": model.name,
        "graph": _graph_to_dict(model.graph),
        "K1": _family_to_dict(model.K1),
        "K2": _family_to_dict(model.K2),
        "beta": model.beta,
        "t": model.t,
        "product_state": encode_complex(model.product_state),
    }


def model_from_dict(d: dict) -> ModelSpec:
    if "fixture" in d:
        m = fixture(d["fixture"], d.get("beta"), d.get("n", 3))
        return m.with_params(t=d["t"]) if "t" in d else m
    if d.get("version", MODEL_VERSION) != MODEL_VERSION:
        raise ValueError(f"unsupported model-spec version {d.get('version')}")
    g = parse_graph(d["graph"])
    ps = d.get("product_state", "plus")
    if ps == "plus":
        ps = np.tile(KET_PLUS, (g.vertex_count, 1))
    elif ps == "zero":
        ps = np.tile(KET0, (g.vertex_count, 1))
    else:
        ps = decode_complex(ps)
    return ModelSpec(
        g, parse_family(d.get("K1"), g), parse_family(d.get("K2"), g), float(d.get("beta", 0.0)), float(d.get("t", 0.0)), ps, d.get("name", "")
    )


def dumps_model(model: ModelSpec) -> str:
    return json.dumps(model_to_dict(model), indent=1) + "\n"


def load_model(path: str | Path) -> ModelSpec:
    return model_from_dict(json.loads(Path(path).read_text()))


# State dumps ------------------------------------------------------------------------


def state_header(n_qubits: int, norm_constant: float, fmt: str, extra: dict | None = None) -> dict:
    return (extra or {}) | {
        "format": f"tnsprep-state/1-{fmt}",
        "qubits": n_qubits,
        "bit_order": "site 0 is the most significant bit of the amplitude index",
        "norm_constant": norm_constant,
    }


def state_to_text(amplitudes: np.ndarray, norm_constant: float = 1.0, extra: dict | None = None) -> str:
    n = int(np.log2(amplitudes.size))
    lines = [json.dumps(state_header(n, norm_constant, "text", extra))]
    lines += [f"{a.real:.17g} {a.imag:.17g}" for a in amplitudes]
    return "\n".join(lines) + "\n"


def state_to_bytes(amplitudes: np.ndarray, norm_constant: float = 1.0, extra: dict | None = None) -> bytes:
    """JSON header line followed by little-endian complex128 amplitudes."""
    n = int(np.log2(amplitudes.size))
    head = json.dumps(state_header(n, norm_constant, "complex128-le", extra)).encode() + b"\n"
    return head + np.asarray(amplitudes, dtype="<c16").tobytes()


def state_from_bytes(data: bytes) -> tuple[dict, np.ndarray]:
    head, _, body = data.partition(b"\n")
    meta = json.loads(head)
    if meta["format"].endswith("text"):
        rows = [line.split() for line in body.decode().splitlines() if line.strip()]
        amps = np.array([float(r) + 1j * float(i) for r, i in rows])
    else:
        amps = np.frombuffer(body, dtype="<c16").copy()
    if amps.size != 2 ** meta["qubits"]:
        raise ValueError("amplitude count does not match the header")
    return meta, amps


# Manifests and atomic writes --------------------------------------------------------


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_digest(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def atomic_write(path: str | Path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    """Reproducibility record written next to every artifact."""

    argv: list[str]
    config: dict
    seed: int | None
    code_version: str = __version__
    inputs: dict[str, str] = field(default_factory=dict)
    wall_clock_s: float = 0.0
    outputs: dict[str, str] = field(default_factory=dict)

    @property
    def run_id(self) -> str:
        """Digest of everything that determines the outputs (not timings or output digests)."""
        key = json.dumps([self.argv, self.config, self.seed, self.code_version, self.inputs], sort_keys=True, default=str)
        return sha256_bytes(key.encode())[:16]

    def to_dict(self) -> dict:
        return asdict(self) | {"run_id": self.run_id, "format": "tnsprep-manifest/1"}

    @classmethod
    def from_dict(cls, d: dict) -> RunManifest:
        return cls(d["argv"], d["config"], d["seed"], d["code_version"], d["inputs"], d["wall_clock_s"], d["outputs"])


def manifest_path(output: str | Path) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def load_manifest(path: str | Path) -> RunManifest:
    return RunManifest.from_dict(json.loads(Path(path).read_text()))
