"""Contraction kernels and the full suite of norm identities they satisfy.

The contraction of an order-p kernel against an order-q kernel identifies r
arguments and integrates l of them out, producing an order p + q - r - l
tensor whose axes are blocked as (shared kept, first-kernel own, second-kernel
own).  Contraction outputs are generally NOT symmetric and nothing downstream
assumes they are.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DiscreteMeasure,
    SymmetricKernel,
    contract_tensors,
    lp_norm,
    tensor_inner,
    tensor_lp_norm,
)
from .errors import DimensionError, ParameterError

#: additive slack for inequality checks (float accumulation over <= 1e6 terms)
INEQ_SLACK = 1e-12

#: relative tolerance for the norm equality in check (vi)
EQ_RTOL = 1e-9


@dataclass(frozen=True)
class ContractionResult:
    """Dense contraction output plus its L2 norm under the product measure."""

    tensor: np.ndarray
    r: int
    l: int
    l2_norm: float

    @property
    def order(self) -> int:
        return int(self.tensor.ndim)


def contract(psi: SymmetricKernel, phi: SymmetricKernel, r: int, l: int,
             mu: DiscreteMeasure) -> ContractionResult:
    """Exact contraction ``psi *_r^l phi`` over the finite alphabet.

    For l = 0 no integration happens and the result is the pointwise product
    on the identified coordinates; r = l = 0 gives the tensor product.
    """
    if psi.alphabet_size != phi.alphabet_size or psi.alphabet_size != mu.alphabet_size:
        raise DimensionError("kernels and measure must share one alphabet")
    p, q = psi.order, phi.order
    if not (0 <= l <= r <= min(p, q)):
        raise ParameterError(f"need 0 <= l <= r <= min({p}, {q}), got r={r}, l={l}")
    out = contract_tensors(psi.values, phi.values, r, l, mu)
    return ContractionResult(tensor=out, r=r, l=l,
                             l2_norm=tensor_lp_norm(out, mu, 2.0))


def _norm(psi, phi, r, l, mu) -> float:
    return contract(psi, phi, r, l, mu).l2_norm


def verify_contraction_inequalities(psi: SymmetricKernel, phi: SymmetricKernel,
                                    mu: DiscreteMeasure) -> dict:
    """Run the six contraction-norm checks over every admissible (r, l).

    Items: (i) well-definedness (automatic on a finite space, recorded as
    such); (ii)/(iii) the two self-contraction Cauchy-Schwarz bounds; (iv) the
    L4 product bound; (v) the L2 product bound for fully integrated
    contractions; (vi) the inner-product identity together with its
    Cauchy-Schwarz consequence.  Finite-measure constants are all 1 here
    because mu is a probability measure, so no separate variant is needed.

    Returns a report dict with one record per (r, l) and an ``all_pass`` flag.
    Equalities are tested at relative 1e-9, inequalities with additive slack.
    """
    p, q = psi.order, phi.order
    l2_psi = lp_norm(psi, mu, 2.0)
    l2_phi = lp_norm(phi, mu, 2.0)
    l4_psi = lp_norm(psi, mu, 4.0)
    l4_phi = lp_norm(phi, mu, 4.0)

    records = []
    for r in range(0, min(p, q) + 1):
        for l in range(0, r + 1):
            res = contract(psi, phi, r, l, mu)
            nsq = res.l2_norm**2
            rec = {"r": r, "l": l, "norm": res.l2_norm, "well_defined": True}

            rhs2 = _norm(psi, psi, p, p - r + l, mu) * _norm(phi, phi, q, q - r + l, mu)
            rec["ii"] = {"lhs": nsq, "rhs": rhs2, "ok": nsq <= rhs2 + INEQ_SLACK}

            rhs3 = _norm(psi, psi, p, p - r, mu) * _norm(phi, phi, q, q - r, mu)
            rec["iii"] = {"lhs": nsq, "rhs": rhs3, "ok": nsq <= rhs3 + INEQ_SLACK}

            rhs4 = l4_psi * l4_phi
            rec["iv"] = {"lhs": res.l2_norm, "rhs": rhs4,
                         "ok": res.l2_norm <= rhs4 + INEQ_SLACK}

            if l == r:
                rhs5 = l2_psi * l2_phi
                rec["v"] = {"lhs": res.l2_norm, "rhs": rhs5,
                            "ok": res.l2_norm <= rhs5 + INEQ_SLACK}

            left = contract(psi, psi, p - l, p - r, mu)
            right = contract(phi, phi, q - l, q - r, mu)
            ip = tensor_inner(left.tensor, right.tensor, mu)
            eq_ok = abs(nsq - ip) <= EQ_RTOL * (1.0 + abs(ip))
            rhs6 = _norm(psi, psi, r, l, mu) * _norm(phi, phi, r, l, mu)
            rec["vi"] = {
                "lhs": nsq,
                "inner": ip,
                "rhs": rhs6,
                "ok": eq_ok and nsq <= rhs6 + INEQ_SLACK,
            }
            records.append(rec)

    all_pass = all(
        rec[item]["ok"]
        for rec in records
        for item in ("ii", "iii", "iv", "v", "vi")
        if item in rec
    )
    return {"orders": (p, q), "checks": records, "all_pass": all_pass}
