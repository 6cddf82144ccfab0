"""Versioned text format for trained models.

Layout (one ``key value...`` record per line, ``#`` starts a comment)::

    hohmm-model
    format_version 1
    order 3
    num_states 6
    dim 32
    num_mixtures 5
    feature_fingerprint <hex or ->
    train_fingerprint <hex or ->
    variance_floor <float>
    initial <N floats>
    trans1 <N**2 floats>   # row-major, index order (i, j): P(q2=j | q1=i)
    trans2 <N**3 floats>   # (i, j, k): P(q3=k | q1=i, q2=j)
    trans3 <N**4 floats>   # (i, j, k, w): P(qt=w | q_{t-3}=i, q_{t-2}=j, q_{t-1}=k)
    state <j> <M_j>
    weights <M_j floats>
    means <M_j * D floats>      # row-major (component, dim)
    variances <M_j * D floats>

States are 0-based. Floats use 17 significant digits, which round-trips
IEEE doubles exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import atomic_write_text
from .gmm import GaussianMixture
from .model import HmmModel

MAGIC = "hohmm-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ModelFile:
    model: HmmModel
    feature_fingerprint: str = ""
    train_fingerprint: str = ""


def _floats(values) -> str:
    return " ".join(f"{v:.17g}" for v in np.asarray(values, dtype=np.float64).ravel())


def dumps(model: HmmModel, feature_fingerprint: str = "", train_fingerprint: str = "") -> str:
    floor = min(g.variance_floor for g in model.emissions)
    lines = [
        MAGIC,
        f"format_version {FORMAT_VERSION}",
        f"order {model.order}",
        f"num_states {model.num_states}",
        f"dim {model.dim}",
        f"num_mixtures {model.num_mixtures}",
        f"feature_fingerprint {feature_fingerprint or '-'}",
        f"train_fingerprint {train_fingerprint or '-'}",
        f"variance_floor {floor:.17g}",
        f"initial {_floats(model.initial)}",
    ]
    for rank, tensor in enumerate(model.transitions, start=1):
        lines.append(f"trans{rank} {_floats(tensor)}")
    for j, g in enumerate(model.emissions):
        lines += [
            f"state {j} {g.num_components}",
            f"weights {_floats(g.weights)}",
            f"means {_floats(g.means)}",
            f"variances {_floats(g.variances)}",
        ]
    return "\n".join(lines) + "\n"


def save_model(path, model: HmmModel, feature_fingerprint: str = "", train_fingerprint: str = "") -> None:
    atomic_write_text(path, dumps(model, feature_fingerprint, train_fingerprint))


def loads(text: str) -> ModelFile:
    records = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            records.append(line.split())
    if not records or records[0] != [MAGIC]:
        raise ModelFormatError("not a hohmm model file")
    pos = 1

    def take(key):
        nonlocal pos
        if pos >= len(records) or records[pos][0] != key:
            found = records[pos][0] if pos < len(records) else "end of file"
            raise ModelFormatError(f"expected {key!r}, found {found!r}")
        rec = records[pos][1:]
        pos += 1
        return rec

    def take_floats(key, count):
        vals = take(key)
        if len(vals) != count:
            raise ModelFormatError(f"{key}: expected {count} values, got {len(vals)}")
        return np.array([float(v) for v in vals], dtype=np.float64)

    version = int(take("format_version")[0])
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version} (this build reads {FORMAT_VERSION})")
    order = int(take("order")[0])
    n = int(take("num_states")[0])
    dim = int(take("dim")[0])
    take("num_mixtures")
    ffp = take("feature_fingerprint")[0]
    tfp = take("train_fingerprint")[0]
    floor = float(take("variance_floor")[0])
    initial = take_floats("initial", n)
    tensors = [take_floats(f"trans{rank}", n ** (rank + 1)).reshape((n,) * (rank + 1)) for rank in range(1, order + 1)]
    emissions = []
    for j in range(n):
        head = take("state")
        if int(head[0]) != j:
            raise ModelFormatError(f"expected state {j}, found state {head[0]}")
        m = int(head[1])
        weights = take_floats("weights", m)
        means = take_floats("means", m * dim).reshape(m, dim)
        variances = take_floats("variances", m * dim).reshape(m, dim)
        emissions.append(GaussianMixture(weights, means, variances, floor))
    if pos != len(records):
        raise ModelFormatError(f"unexpected trailing record {records[pos][0]!r}")
    model = HmmModel(
        order=order,
        initial=initial,
        trans1=tensors[0],
        trans2=tensors[1] if order >= 2 else None,
        trans3=tensors[2] if order >= 3 else None,
        emissions=emissions,
    )
    return ModelFile(model, "" if ffp == "-" else ffp, "" if tfp == "-" else tfp)


def load_model(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
