"""Frozen vision-language encoder abstraction.

Holds the per-class text embeddings, the class-description templates, a
frozen linear image-encoder surrogate, and the JSON embedding file format
that lets externally produced (real) text embeddings replace the synthetic
ones. Everything here is immutable once constructed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePromptError, EmbeddingFormatError, InvalidInputError
from .seeding import child_seed

UNIT_NORM_ATOL = 1e-6       # for already-normalized rows held in memory
FILE_NORM_ATOL = 1e-3       # accepted pre-normalization band when loading files
COLLISION_COS = 0.99        # synthetic rows are re-drawn above this |cosine|

_TEMPLATES = {
    "general": "a photo of {c}",
    "pets": "a photo of {c}",
    "texture": "{c} texture",
    "satellite": "a centered satellite photo of {c}",
    "digits": "a photo of digit {c}",
    "synthetic": "class {c}",
}


def prompt_template(dataset_kind: str, class_name: str) -> str:
    """Natural-language description of a class for the given dataset family."""
    try:
        return _TEMPLATES[dataset_kind].format(c=class_name)
    except KeyError:
        raise InvalidInputError(
            f"unknown dataset kind {dataset_kind!r}; expected one of {sorted(_TEMPLATES)}"
        ) from None


@dataclass
class EmbeddingMatrix:
    """C unit-norm text-embedding rows, aligned with class index order."""

    rows: np.ndarray
    class_names: list[str]
    descriptions: list[str]

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.rows.setflags(write=False)
        if self.rows.ndim != 2:
            raise InvalidInputError("embedding rows must form a (C, d) matrix")
        if not (len(self.class_names) == len(self.descriptions) == len(self.rows)):
            raise InvalidInputError("names, descriptions and rows must have equal length")
        if len(set(self.class_names)) != len(self.class_names):
            raise InvalidInputError("duplicate class names")
        norms = np.linalg.norm(self.rows, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_ATOL):
            raise InvalidInputError("embedding rows must be unit norm")

    @property
    def n_classes(self) -> int:
        return len(self.rows)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def fingerprint(self) -> str:
        return hashlib.sha256(self.rows.tobytes()).hexdigest()


def synth_text_embed(
    descriptions: list[str],
    dim: int,
    seed: int,
    class_names: list[str] | None = None,
) -> EmbeddingMatrix:
    """Deterministic unit-norm rows derived by hashing each description.

    Distinct descriptions are guaranteed pairwise |cosine| < 0.99: a colliding
    row is re-drawn with an incremented salt.
    """
    if len(descriptions) < 2:
        raise InvalidInputError("need at least 2 class descriptions")
    if dim < 2:
        raise InvalidInputError("embedding dimension must be >= 2")
    if len(set(descriptions)) != len(descriptions):
        raise InvalidInputError("duplicate class descriptions")
    rows = np.zeros((len(descriptions), dim))
    for i, desc in enumerate(descriptions):
        salt = 0
        while True:
            rng = np.random.default_rng(child_seed(seed, "text-embed", desc, salt))
            row = rng.normal(size=dim)
            row /= np.linalg.norm(row)
            if i == 0 or np.max(np.abs(rows[:i] @ row)) < COLLISION_COS:
                rows[i] = row
                break
            salt += 1
    names = list(class_names) if class_names is not None else list(descriptions)
    return EmbeddingMatrix(rows, names, list(descriptions))


class FrozenImageEncoder:
    """A fixed full-rank linear map from prompt space to embedding space.

    The projection never changes after construction; :meth:`fingerprint` lets
    callers assert that across an experiment.
    """

    def __init__(self, projection: np.ndarray):
        proj = np.array(projection, dtype=np.float64)
        if proj.ndim != 2 or proj.shape[0] != proj.shape[1]:
            raise InvalidInputError("projection must be a square matrix")
        proj.setflags(write=False)
        self._projection = proj

    @classmethod
    def orthogonal(cls, dim: int, seed: int) -> "FrozenImageEncoder":
        """Seeded orthogonal projection (QR of a Gaussian matrix, sign-canonical)."""
        rng = np.random.default_rng(child_seed(seed, "image-encoder"))
        q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
        q = q * np.sign(np.diag(r))
        enc = cls(q)
        if enc.min_singular_value() <= 1e-8:
            raise InvalidInputError("synthetic projection is numerically rank-deficient")
        return enc

    @classmethod
    def identity(cls, dim: int) -> "FrozenImageEncoder":
        return cls(np.eye(dim))

    @property
    def projection(self) -> np.ndarray:
        return self._projection

    @property
    def dim(self) -> int:
        return self._projection.shape[0]

    def min_singular_value(self) -> float:
        return float(np.linalg.svd(self._projection, compute_uv=False)[-1])

    def encode(self, h: np.ndarray) -> np.ndarray:
        """projection @ h for a single vector, or row-wise for a (n, d) batch."""
        h = np.asarray(h, dtype=np.float64)
        if not np.all(np.isfinite(h)):
            raise InvalidInputError("prompt vector contains non-finite entries")
        return h @ self._projection.T

    def fingerprint(self) -> str:
        return hashlib.sha256(self._projection.tobytes()).hexdigest()


def image_encode(enc: FrozenImageEncoder, h: np.ndarray) -> np.ndarray:
    return enc.encode(h)


def _fmt(x: float) -> str:
    # >= 9 significant digits, '.' decimal; e-notation keeps it unambiguous
    return f"{x:.9e}"


def save_embeddings(matrix: EmbeddingMatrix, path: str) -> None:
    """Write the UTF-8 JSON embedding file (the producer/consumer contract)."""
    lines = ["{", f'  "dim": {matrix.dim},', '  "classes": [']
    for i in range(matrix.n_classes):
        nums = ", ".join(_fmt(v) for v in matrix.rows[i])
        entry = (
            "    {"
            + f'"name": {json.dumps(matrix.class_names[i])}, '
            + f'"description": {json.dumps(matrix.descriptions[i])}, '
            + f'"embedding": [{nums}]'
            + "}"
        )
        lines.append(entry + ("," if i < matrix.n_classes - 1 else ""))
    lines += ["  ]", "}", ""]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))


def load_embeddings(path: str) -> EmbeddingMatrix:
    """Load and validate an embedding file; rows are re-normalized to unit norm.

    Rows whose pre-normalization norm is farther than 1e-3 from 1 are
    rejected, as are duplicate class names and any structural defect.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise EmbeddingFormatError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise EmbeddingFormatError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e

    if not isinstance(doc, dict):
        raise EmbeddingFormatError(f"{path}: top level must be a JSON object")
    dim = doc.get("dim")
    if not isinstance(dim, int) or dim < 2:
        raise EmbeddingFormatError(f"{path}: field 'dim' must be an integer >= 2, got {dim!r}")
    classes = doc.get("classes")
    if not isinstance(classes, list) or not classes:
        raise EmbeddingFormatError(f"{path}: field 'classes' must be a non-empty array")
    unknown = set(doc) - {"dim", "classes"}
    if unknown:
        raise EmbeddingFormatError(f"{path}: unknown top-level fields {sorted(unknown)}")

    names: list[str] = []
    descriptions: list[str] = []
    rows = np.zeros((len(classes), dim))
    for i, entry in enumerate(classes):
        where = f"{path}: classes[{i}]"
        if not isinstance(entry, dict):
            raise EmbeddingFormatError(f"{where}: must be an object")
        for key in ("name", "description", "embedding"):
            if key not in entry:
                raise EmbeddingFormatError(f"{where}: missing field '{key}'")
        if not isinstance(entry["name"], str) or not entry["name"]:
            raise EmbeddingFormatError(f"{where}.name: must be a non-empty string")
        if not isinstance(entry["description"], str):
            raise EmbeddingFormatError(f"{where}.description: must be a string")
        vec = entry["embedding"]
        if not isinstance(vec, list) or len(vec) != dim:
            raise EmbeddingFormatError(f"{where}.embedding: must be an array of {dim} numbers")
        try:
            row = np.asarray(vec, dtype=np.float64)
        except (TypeError, ValueError):
            raise EmbeddingFormatError(f"{where}.embedding: entries must be numbers") from None
        if not np.all(np.isfinite(row)):
            raise EmbeddingFormatError(f"{where}.embedding: non-finite entries")
        norm = float(np.linalg.norm(row))
        if abs(norm - 1.0) > FILE_NORM_ATOL:
            raise EmbeddingFormatError(
                f"{where}.embedding: norm {norm:.6f} outside the accepted [0.999, 1.001] band"
            )
        names.append(entry["name"])
        descriptions.append(entry["description"])
        rows[i] = row / norm
    if len(set(names)) != len(names):
        raise EmbeddingFormatError(f"{path}: duplicate class names")
    return EmbeddingMatrix(rows, names, descriptions)


def check_nonzero_prompts(encoded: np.ndarray) -> None:
    """Raise DegeneratePromptError naming the first class whose encoding is zero."""
    norms = np.linalg.norm(encoded, axis=-1)
    zero = np.flatnonzero(norms == 0.0)
    if len(zero):
        raise DegeneratePromptError(int(zero[0]))
