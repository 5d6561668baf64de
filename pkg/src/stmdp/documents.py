"""Line-oriented text documents for models and self-triggered policies.

Both formats start with a magic line carrying a version, followed by
``key = value`` header lines, a blank line and tab-separated tables. Floats
are written with ``repr`` so a write/read cycle is lossless.
"""
import hashlib
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .mdp import MdpModel
from .trigger import SelfTriggeredPolicy

POLICY_MAGIC = "stmdp-policy"
MODEL_MAGIC = "stmdp-model"
VERSION = 1


class DocumentError(ValueError):
    pass


class FingerprintMismatch(DocumentError):
    pass


def fingerprint(model: MdpModel) -> str:
    h = hashlib.sha256()
    h.update(f"{MODEL_MAGIC}:{model.num_actions}:{model.num_states}\n".encode())
    h.update(np.ascontiguousarray(model.transitions, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(model.costs, dtype="<f8").tobytes())
    labels = model.action_labels or tuple(str(a) for a in range(model.num_actions))
    h.update("\t".join(labels).encode())
    return "sha256:" + h.hexdigest()


@dataclass
class StateRecord:
    display: str
    tau: int
    action: str
    value: float


@dataclass
class PolicyDocument:
    fingerprint: str
    problem: int
    parameter: float  # update penalty for problem 1, alpha for problem 2
    beta: float
    t_bar: int
    tolerance: float
    iterations: int
    residual: float
    records: List[StateRecord] = field(default_factory=list)

    @property
    def parameter_name(self) -> str:
        return "penalty" if self.problem == 1 else "alpha"

    def check_model(self, model: MdpModel):
        actual = fingerprint(model)
        if actual != self.fingerprint:
            raise FingerprintMismatch(
                f"policy was computed for model {self.fingerprint[:19]}..., "
                f"current model is {actual[:19]}... (stale policy?)"
            )

    def policy(self, model: MdpModel) -> SelfTriggeredPolicy:
        self.check_model(model)
        labels = [model.action_label(a) for a in range(model.num_actions)]
        try:
            pi = [labels.index(r.action) for r in self.records]
        except ValueError as exc:
            raise DocumentError(f"unknown action label in policy document: {exc}") from None
        return SelfTriggeredPolicy([r.tau for r in self.records], pi)

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])


def policy_document(model, policy, values, *, problem, parameter, beta, t_bar, tolerance, iterations, residual, label=None):
    label = label or (lambda s: str(s + 1))
    records = [
        StateRecord(label(x), int(policy.tau[x]), model.action_label(int(policy.pi[x])), float(values[x]))
        for x in range(model.num_states)
    ]
    return PolicyDocument(
        fingerprint(model), int(problem), float(parameter), float(beta), int(t_bar),
        float(tolerance), int(iterations), float(residual), records,
    )


def dump_policy(doc: PolicyDocument) -> str:
    lines = [
        f"{POLICY_MAGIC} {VERSION}",
        f"fingerprint = {doc.fingerprint}",
        f"problem = {doc.problem}",
        f"{doc.parameter_name} = {doc.parameter!r}",
        f"beta = {doc.beta!r}",
        f"t_bar = {doc.t_bar}",
        f"tolerance = {doc.tolerance!r}",
        f"iterations = {doc.iterations}",
        f"residual = {doc.residual!r}",
        f"states = {len(doc.records)}",
        "",
        "state\ttau\taction\tvalue",
    ]
    lines += [f"{r.display}\t{r.tau}\t{r.action}\t{r.value!r}" for r in doc.records]
    return "\n".join(lines) + "\n"


def _split_header(text: str, magic: str) -> Tuple[dict, List[str]]:
    lines = text.split("\n")
    first = lines[0].split()
    if len(first) != 2 or first[0] != magic:
        raise DocumentError(f"not a {magic} document")
    if first[1] != str(VERSION):
        raise DocumentError(f"unsupported {magic} version {first[1]}")
    header = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            return header, lines[i:]
        key, sep, value = line.partition("=")
        if not sep:
            raise DocumentError(f"line {i}: expected 'key = value'")
        header[key.strip()] = value.strip()
    raise DocumentError("document has no body")


def _get(header, key, conv):
    try:
        return conv(header[key])
    except KeyError:
        raise DocumentError(f"missing header field {key!r}") from None
    except ValueError:
        raise DocumentError(f"bad value for {key!r}: {header[key]!r}") from None


def load_policy(text: str, model: Optional[MdpModel] = None) -> PolicyDocument:
    header, body = _split_header(text, POLICY_MAGIC)
    problem = _get(header, "problem", int)
    if problem not in (1, 2):
        raise DocumentError(f"problem must be 1 or 2, got {problem}")
    parameter = _get(header, "penalty" if problem == 1 else "alpha", float)
    n = _get(header, "states", int)
    body = [b for b in body if b]
    if not body or body[0].split("\t") != ["state", "tau", "action", "value"]:
        raise DocumentError("missing state table header")
    records = []
    for line in body[1:]:
        parts = line.split("\t")
        if len(parts) != 4:
            raise DocumentError(f"malformed state record {line!r}")
        try:
            records.append(StateRecord(parts[0], int(parts[1]), parts[2], float(parts[3])))
        except ValueError:
            raise DocumentError(f"malformed state record {line!r}") from None
    if len(records) != n or len({r.display for r in records}) != n:
        raise DocumentError(f"expected {n} distinct state records, found {len(records)}")
    doc = PolicyDocument(
        fingerprint=_get(header, "fingerprint", str),
        problem=problem,
        parameter=parameter,
        beta=_get(header, "beta", float),
        t_bar=_get(header, "t_bar", int),
        tolerance=_get(header, "tolerance", float),
        iterations=_get(header, "iterations", int),
        residual=_get(header, "residual", float),
        records=records,
    )
    if model is not None:
        doc.check_model(model)
    return doc


def dump_model(model: MdpModel) -> str:
    labels = [model.action_label(a) for a in range(model.num_actions)]
    lines = [
        f"{MODEL_MAGIC} {VERSION}",
        f"fingerprint = {fingerprint(model)}",
        f"num_states = {model.num_states}",
        f"num_actions = {model.num_actions}",
        f"actions = {' '.join(labels)}",
        "",
        "costs",
    ]
    lines += ["\t".join(repr(float(c)) for c in row) for row in model.costs]
    for a, name in enumerate(labels):
        lines.append(f"transitions {name}")
        lines += ["\t".join(repr(float(p)) for p in row) for row in model.transitions[a]]
    return "\n".join(lines) + "\n"


def load_model(text: str) -> MdpModel:
    header, body = _split_header(text, MODEL_MAGIC)
    n = _get(header, "num_states", int)
    m = _get(header, "num_actions", int)
    labels = header.get("actions", "").split()
    if len(labels) != m:
        raise DocumentError("action label count does not match num_actions")
    body = [b for b in body if b]

    def table(start, title):
        if start >= len(body) or body[start] != title:
            raise DocumentError(f"expected section {title!r}")
        rows = body[start + 1 : start + 1 + n]
        try:
            return np.array([[float(v) for v in row.split("\t")] for row in rows])
        except ValueError:
            raise DocumentError(f"malformed number in section {title!r}") from None

    costs = table(0, "costs")
    p = np.stack([table(1 + (n + 1) * a + n, f"transitions {labels[a]}") for a in range(m)])
    if costs.shape != (n, m) or p.shape != (m, n, n):
        raise DocumentError("table dimensions do not match header")
    try:
        model = MdpModel(p, costs, labels)
    except ValueError as exc:
        raise DocumentError(str(exc)) from None
    if fingerprint(model) != header.get("fingerprint"):
        raise FingerprintMismatch("model contents do not match the recorded fingerprint")
    return model
