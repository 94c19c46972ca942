"""Random preferential-attachment BDGs and the ``BDG v1`` text format.

File layout (0-based indices, space separated, UTF-8, ``\\n`` line ends)::

    BDG v1 <M> <N>
    Q <j> <leak complement> <k1>:<inhibition> <k2>:<inhibition> ...   (N lines, j = 0..N-1)
    PRIOR <a_0> <a_1> ... <a_{M-1}>

Probabilities are written as plain decimals with the shortest digit string
that round-trips the float exactly.
"""

from __future__ import annotations

import io
import os
from pathlib import Path
from typing import TextIO

import numpy as np

from .model import BipartiteDiagnosisGraph, QmrDtNoiseModel

__all__ = ["BdgParseError", "generate_pa_bdg", "save_graph", "load_graph", "dumps", "loads"]

MAGIC = "BDG"
VERSION = "v1"


class BdgParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


def generate_pa_bdg(
    num_objects: int, num_queries: int, edges_per_query: int, rng: np.random.Generator
) -> BipartiteDiagnosisGraph:
    """Bipartite preferential attachment.

    Queries arrive one at a time; each picks ``edges_per_query`` distinct
    objects, one draw after another, with probability proportional to the
    object's current degree plus one.
    """
    if num_objects < 1 or num_queries < 1:
        raise ValueError("need at least one object and one query")
    if not 1 <= edges_per_query <= num_objects:
        raise ValueError(
            f"edges_per_query must be in [1, {num_objects}], got {edges_per_query}"
        )
    weight = np.ones(num_objects)
    parents = []
    for _ in range(num_queries):
        w = weight.copy()
        chosen = []
        for _ in range(edges_per_query):
            k = int(rng.choice(num_objects, p=w / w.sum()))
            chosen.append(k)
            w[k] = 0.0
        weight[chosen] += 1.0
        parents.append(sorted(chosen))
    return BipartiteDiagnosisGraph(num_objects, parents)


def _fmt(x: float) -> str:
    return np.format_float_positional(float(x), unique=True, trim="-")


def _write(graph: BipartiteDiagnosisGraph, model: QmrDtNoiseModel, out: TextIO) -> None:
    out.write(f"{MAGIC} {VERSION} {graph.num_objects} {graph.num_queries}\n")
    for j, pa in enumerate(graph.parents):
        fields = ["Q", str(j), _fmt(model.leak_complement[j])]
        fields += [f"{k}:{_fmt(model.inhibition[(k, j)])}" for k in pa]
        out.write(" ".join(fields) + "\n")
    out.write(" ".join(["PRIOR"] + [_fmt(a) for a in model.prior]) + "\n")


def dumps(graph: BipartiteDiagnosisGraph, model: QmrDtNoiseModel) -> str:
    buf = io.StringIO()
    _write(graph, model, buf)
    return buf.getvalue()


def save_graph(graph: BipartiteDiagnosisGraph, model: QmrDtNoiseModel, destination) -> None:
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            _write(graph, model, fh)
    else:
        _write(graph, model, destination)


def _prob(token: str, line: int, what: str) -> float:
    try:
        v = float(token)
    except ValueError:
        raise BdgParseError(line, f"{what}: not a number: {token!r}") from None
    if not 0.0 <= v <= 1.0:
        raise BdgParseError(line, f"{what}: probability {token} outside [0, 1]")
    return v


def _int(token: str, line: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise BdgParseError(line, f"{what}: not an integer: {token!r}") from None


def loads(text: str) -> tuple[BipartiteDiagnosisGraph, QmrDtNoiseModel]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise BdgParseError(1, "empty file")

    head = lines[0].split()
    if len(head) != 4 or head[0] != MAGIC or head[1] != VERSION:
        raise BdgParseError(1, f"expected header '{MAGIC} {VERSION} M N', got {lines[0]!r}")
    M = _int(head[2], 1, "M")
    N = _int(head[3], 1, "N")
    if M < 1 or N < 1:
        raise BdgParseError(1, "M and N must be positive")

    parents, leak, inhibition = [], [], {}
    for j in range(N):
        lineno = j + 2
        if lineno > len(lines):
            raise BdgParseError(lineno, f"file truncated: expected query line {j} of {N}")
        tok = lines[lineno - 1].split()
        if len(tok) < 3 or tok[0] != "Q":
            raise BdgParseError(lineno, "expected 'Q j rho0 k:rho ...'")
        if _int(tok[1], lineno, "query id") != j:
            raise BdgParseError(lineno, f"expected query id {j}, got {tok[1]}")
        leak.append(_prob(tok[2], lineno, "leak complement"))
        pa = []
        for item in tok[3:]:
            k_str, sep, r_str = item.partition(":")
            if not sep:
                raise BdgParseError(lineno, f"edge {item!r} is not 'object:inhibition'")
            k = _int(k_str, lineno, "object index")
            if not 0 <= k < M:
                raise BdgParseError(lineno, f"object index {k} out of range [0, {M})")
            if k in pa:
                raise BdgParseError(lineno, f"duplicate object {k}")
            pa.append(k)
            inhibition[(k, j)] = _prob(r_str, lineno, f"inhibition {k}:{j}")
        parents.append(pa)

    lineno = N + 2
    if lineno > len(lines):
        raise BdgParseError(lineno, "file truncated: missing PRIOR line")
    tok = lines[lineno - 1].split()
    if not tok or tok[0] != "PRIOR":
        raise BdgParseError(lineno, "expected 'PRIOR a_0 ... a_{M-1}'")
    if len(tok) - 1 != M:
        raise BdgParseError(lineno, f"expected {M} prior values, got {len(tok) - 1}")
    prior = [_prob(t, lineno, f"prior[{i}]") for i, t in enumerate(tok[1:])]
    if len(lines) > lineno:
        raise BdgParseError(lineno + 1, "unexpected content after PRIOR line")

    graph = BipartiteDiagnosisGraph(M, parents)
    model = QmrDtNoiseModel(np.array(prior), np.array(leak), inhibition)
    return graph, model


def load_graph(source) -> tuple[BipartiteDiagnosisGraph, QmrDtNoiseModel]:
    if isinstance(source, (str, os.PathLike)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    return loads(text)
