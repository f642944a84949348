"""Case bundles: the on-disk unit the command line operates on.

A bundle directory holds a JSON meta descriptor, the input tensor, the
segmentation, optional per-label attribution maps, and a model endpoint
descriptor (an embedded synthetic model or connection details for a served
one). Every binary file's digest is pinned in the meta, so verification
runs against exactly the bytes the claim was made about.

Binary formats: input and attributions are little-endian float32; the
segmentation is little-endian uint32 per pixel, row-major.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

from .core import InputVector, LabelId, ModelHandle, PlantedModelSpec, make_planted_model, predict
from .errors import BundleError
from .oracle import Fixture
from .search import PairCase, build_case
from .segattr import (
    AttributionMap,
    Segmentation,
    attribution_from_bytes,
    attribution_to_bytes,
    occlusion_attribution,
    segmentation_from_bytes,
    segmentation_to_bytes,
)
from .wire import WireClient, wire_model

META_NAME = "meta.json"
SCHEMA_VERSION = "1"
BASELINE_TOL = 1e-4


def _sha256(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


@dataclass(frozen=True)
class CaseBundle:
    """A loaded, digest-checked bundle."""

    path: Path
    meta: dict
    input: InputVector
    seg: Segmentation

    @property
    def model_id(self) -> str:
        return self.meta["model_id"]

    @property
    def n(self) -> int:
        return int(self.meta["n"])

    @property
    def m(self) -> int:
        return int(self.meta["m"])

    @property
    def geometry(self) -> Optional[tuple[int, int, int]]:
        g = self.meta.get("geometry")
        return None if g is None else tuple(int(x) for x in g)

    def label(self, spec: Union[int, str]) -> LabelId:
        """Resolve a label index or display name against the meta."""
        names = self.meta.get("label_names") or {}
        if isinstance(spec, str) and not spec.lstrip("-").isdigit():
            for idx, name in names.items():
                if name == spec:
                    return LabelId(int(idx), name)
            raise BundleError(f"unknown label name {spec!r}")
        idx = int(spec)
        if not (0 <= idx < self.m):
            raise BundleError(f"label index {idx} outside [0, {self.m})")
        return LabelId(idx, names.get(str(idx)))

    def attribution(self, label: LabelId) -> Optional[AttributionMap]:
        entry = self.meta["files"].get(f"attribution_{label.index}")
        if entry is None:
            return None
        raw = _read_checked(self.path, entry)
        attr = attribution_from_bytes(raw, label)
        if attr.n != self.n:
            raise BundleError(f"attribution file for label {label.index} has wrong length")
        return attr

    @contextlib.contextmanager
    def open_model(self) -> Iterator[ModelHandle]:
        """Yield a ModelHandle for the bundle's endpoint, closing any transport."""
        desc = self.meta["model"]
        kind = desc.get("kind")
        if kind == "planted":
            yield make_planted_model(PlantedModelSpec.from_json(desc), self.model_id)
            return
        if kind == "bridge":
            transport = desc.get("transport")
            if transport == "tcp":
                client = WireClient.connect_tcp(desc["host"], int(desc["port"]))
            elif transport == "stdio":
                client = WireClient.spawn_stdio(desc["argv"])
            else:
                raise BundleError(f"unknown bridge transport {transport!r}")
            try:
                yield wire_model(client, self.model_id, self.n, self.m, self.input)
            finally:
                client.close()
            return
        raise BundleError(f"unknown model descriptor kind {kind!r}")


def _read_checked(root: Path, entry: dict) -> bytes:
    path = root / entry["path"]
    if not path.is_file():
        raise BundleError(f"missing bundle file {path.name}")
    raw = path.read_bytes()
    if _sha256(raw) != entry["sha256"]:
        raise BundleError(f"digest mismatch for {path.name}")
    return raw


def load_bundle(directory: Union[str, Path]) -> CaseBundle:
    root = Path(directory)
    meta_path = root / META_NAME
    if not meta_path.is_file():
        raise BundleError(f"no {META_NAME} in {root}")
    try:
        meta = json.loads(meta_path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleError(f"unreadable meta: {exc}") from exc
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise BundleError(f"unknown bundle schema {meta.get('schema_version')!r}")

    try:
        n, m = int(meta["n"]), int(meta["m"])
        geometry = meta.get("geometry")
        geometry = None if geometry is None else tuple(int(x) for x in geometry)
        files = meta["files"]
        input_raw = _read_checked(root, files["input"])
        input = InputVector.frombytes(input_raw, geometry)
        if input.n != n:
            raise BundleError(f"input file holds {input.n} values, meta says {n}")
        if geometry is None:
            raise BundleError("bundle lacks grid geometry")
        seg_raw = _read_checked(root, files["segmentation"])
        seg = segmentation_from_bytes(seg_raw, geometry)
    except BundleError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise BundleError(f"malformed bundle: {exc}") from exc

    for key in meta.get("label_names") or {}:
        if not (0 <= int(key) < m):
            raise BundleError(f"label name entry {key} outside [0, {m})")
    for key in meta.get("baselines") or {}:
        if not (0 <= int(key) < m):
            raise BundleError(f"baseline entry {key} outside [0, {m})")
    return CaseBundle(root, meta, input, seg)


def write_bundle(
    directory: Union[str, Path],
    *,
    model_id: str,
    model_descriptor: dict,
    input: InputVector,
    seg: Segmentation,
    m: int,
    attributions: dict[int, AttributionMap] | None = None,
    label_names: dict[int, str] | None = None,
    baselines: dict[int, float] | None = None,
    preprocessing: str = "none",
) -> Path:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    files: dict[str, dict] = {}

    def put(key: str, name: str, raw: bytes):
        (root / name).write_bytes(raw)
        files[key] = {"path": name, "sha256": _sha256(raw)}

    put("input", "input.f32", input.tobytes())
    put("segmentation", "segmentation.u32", segmentation_to_bytes(seg))
    for idx, attr in sorted((attributions or {}).items()):
        put(f"attribution_{idx}", f"attr_{idx}.f32", attribution_to_bytes(attr))

    meta = {
        "schema_version": SCHEMA_VERSION,
        "model_id": model_id,
        "n": input.n,
        "m": m,
        "geometry": None if input.geometry is None else list(input.geometry),
        "preprocessing": preprocessing,
        "files": files,
        "label_names": {str(k): v for k, v in sorted((label_names or {}).items())},
        "baselines": {str(k): float(v) for k, v in sorted((baselines or {}).items())},
        "model": model_descriptor,
    }
    (root / META_NAME).write_text(json.dumps(meta, indent=2) + "\n", "utf-8")
    return root


def write_fixture_bundle(fixture: Fixture, directory: Union[str, Path]) -> Path:
    """Materialize a synthetic fixture as a self-contained bundle."""
    base = predict(fixture.model, fixture.input)
    attrs = {
        label.index: occlusion_attribution(fixture.model, fixture.input, fixture.seg, label)
        for label in (fixture.l1, fixture.l2)
    }
    return write_bundle(
        directory,
        model_id=fixture.model.model_id,
        model_descriptor=fixture.model_spec.to_json(),
        input=fixture.input,
        seg=fixture.seg,
        m=fixture.model.m,
        attributions=attrs,
        label_names={fixture.l1.index: fixture.l1.name, fixture.l2.index: fixture.l2.name},
        baselines={fixture.l1.index: base[fixture.l1], fixture.l2.index: base[fixture.l2]},
    )


def make_case(
    bundle: CaseBundle,
    model: ModelHandle,
    l1: LabelId,
    l2: LabelId,
    delta: float,
    v: float = 0.0,
    min_p: float = 0.01,
    max_fraction: float = 1.0,
) -> PairCase:
    """Build a PairCase from bundle contents, preferring stored attributions.

    Recorded baselines, when present for the chosen labels, must agree with
    a fresh evaluation; a drifted endpoint is a bundle error, not a verdict.
    """
    from .segattr import accumulate  # local to avoid import noise at module top

    recorded = bundle.meta.get("baselines") or {}
    base = predict(model, bundle.input)
    for label in (l1, l2):
        pinned = recorded.get(str(label.index))
        if pinned is not None and abs(float(pinned) - base[label]) > BASELINE_TOL:
            raise BundleError(
                f"recorded baseline for label {label.index} is {float(pinned):.6g} "
                f"but the endpoint predicts {base[label]:.6g}"
            )
    attr1 = bundle.attribution(l1)
    attr2 = bundle.attribution(l2)
    return build_case(
        model, bundle.input, bundle.seg, l1, l2, delta, v=v, min_p=min_p,
        attr1=None if attr1 is None else accumulate(attr1, bundle.seg),
        attr2=None if attr2 is None else accumulate(attr2, bundle.seg),
        max_fraction=max_fraction,
    )
