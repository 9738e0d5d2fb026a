"""Machine-checkable certificates for repair and witness operations.

A certificate records exact valuations (never floats), the estimate
class achieved, the precision ledger, and a digest of the inputs.  It is
closed under verification: re-running the deterministic pipeline on the
same inputs must reproduce every claimed number; any mismatch fails.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .local_ring import NormValue
from .presentations import ApproxRep

SCHEMA_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def encode_val(v: NormValue) -> object:
    if v.saturated:
        return "saturated"
    e = v.exponent
    return e.numerator if e.denominator == 1 else [e.numerator, e.denominator]


@dataclass
class Certificate:
    operation: str
    inputs_digest: str
    before: Dict[str, object] = field(default_factory=dict)
    after: Dict[str, object] = field(default_factory=dict)
    estimate_class: str = "optimal"
    ledger: Optional[dict] = None
    witness: Dict[str, object] = field(default_factory=dict)
    verified: bool = False

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "certificate",
            "operation": self.operation,
            "inputs_digest": self.inputs_digest,
            "before": self.before,
            "after": self.after,
            "estimate_class": self.estimate_class,
            "ledger": self.ledger,
            "witness": self.witness,
            "verified": self.verified,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Certificate":
        if obj.get("kind") != "certificate":
            raise ValueError("not a certificate file")
        return cls(
            operation=obj["operation"],
            inputs_digest=obj["inputs_digest"],
            before=obj.get("before", {}),
            after=obj.get("after", {}),
            estimate_class=obj.get("estimate_class", "optimal"),
            ledger=obj.get("ledger"),
            witness=obj.get("witness", {}),
            verified=obj.get("verified", False),
        )


def repair_certificate(operation: str, inputs_obj, rep_before: ApproxRep,
                       rep_after: ApproxRep, ledger, estimate_class: str) -> Certificate:
    cert = Certificate(
        operation=operation,
        inputs_digest=digest(inputs_obj),
        before={"defect_val": encode_val(rep_before.defect())},
        after={
            "defect_val": encode_val(rep_after.defect()),
            "distance_val": encode_val(rep_before.rep_dist(rep_after)),
        },
        estimate_class=estimate_class,
        ledger=ledger.to_json() if ledger is not None else None,
        verified=True,
    )
    return cert


class VerificationFailure(RuntimeError):
    pass


def check_claim(name: str, claimed, recomputed, failures: List[str]) -> None:
    if claimed != recomputed:
        failures.append(f"{name}: certificate says {claimed!r}, recomputed {recomputed!r}")
