"""Finite-difference validation of every differentiable operation.

Each check builds a scalar via a fixed random-weight readout of the op
output (a plain mean would leave structurally zero gradient entries whose
finite-difference noise, divided by the small-denominator floor, looks
like spurious error). Per-op tolerance is 1e-5; the fully composed
adapter is checked end to end at 1e-4.
"""

from __future__ import annotations

import numpy as np

from histadapter import autodiff as ad
from histadapter.adapter import HistAdapter
from histadapter.autodiff import GradCheckReport, Tensor, finite_difference_check
from histadapter.losses import binary_cross_entropy_with_logits, gram, tsr_pair
from histadapter.tokens import TokenGrid, TokenSequence

__all__ = ["run_gradient_checks", "OP_TOLERANCE", "COMPOSED_TOLERANCE"]

OP_TOLERANCE = 1e-5
COMPOSED_TOLERANCE = 1e-4


def _readout(rng, shape):
    w = Tensor(rng.standard_normal(shape))

    def head(out):
        return ad.sum_all(ad.mul(out, w))

    return head


def _merge(name: str, reports, tolerance: float) -> GradCheckReport:
    worst = max(r.max_relative_error for r in reports)
    total = sum(r.element_count for r in reports)
    return GradCheckReport(name, worst, total, worst < tolerance)


def _elementwise_checks(rng, instances):
    cases = {
        "add": lambda a, b: ad.add(a, b),
        "sub": lambda a, b: ad.sub(a, b),
        "mul": lambda a, b: ad.mul(a, b),
        "scale": lambda a, b: ad.scale(a, 0.73),
    }
    for name, op in cases.items():
        reports = []
        for _ in range(instances):
            shape = (3, 4)
            head = _readout(rng, shape)
            other = Tensor(rng.standard_normal(shape))
            x = Tensor(rng.standard_normal(shape), requires_grad=True)
            reports.append(finite_difference_check(
                lambda t: head(op(t, other)), x, op_name=name))
        yield _merge(name, reports, OP_TOLERANCE)


def _unary_checks(rng, instances):
    cases = {
        "exp": (ad.exp, (3, 4)),
        "gelu": (ad.gelu, (3, 4)),
        "softmax_lastdim": (ad.softmax_lastdim, (4, 5)),
        "window_sum3x3": (lambda t: ad.window_sum3x3(ad.pad2d(t, 1)), (2, 4, 5)),
        "reindexings": (
            lambda t: ad.take_rows(
                ad.reshape(ad.transpose(ad.pad2d(t, 1), (0, 2, 1)), (14, 7))[2:9],
                [0, 3, 3, 5],
            ),
            (2, 5, 5),
        ),
    }
    for name, (op, shape) in cases.items():
        reports = []
        for _ in range(instances):
            x = Tensor(rng.standard_normal(shape), requires_grad=True)
            probe = op(Tensor(x.data.copy()))
            head = _readout(rng, probe.shape)
            reports.append(finite_difference_check(
                lambda t: head(op(t)), x, op_name=name))
        yield _merge(name, reports, OP_TOLERANCE)


def _scalar_checks(rng, instances):
    cases = {
        "sum_all": ad.sum_all,
        "mean_all": ad.mean_all,
        "frobenius_sq": ad.frobenius_sq,
    }
    for name, op in cases.items():
        reports = []
        for _ in range(instances):
            x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
            reports.append(finite_difference_check(op, x, op_name=name))
        yield _merge(name, reports, OP_TOLERANCE)


def _matmul_checks(rng, instances):
    for side, name in ((0, "matmul/lhs"), (1, "matmul/rhs")):
        reports = []
        for _ in range(instances):
            a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
            b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
            head = _readout(rng, (3, 2))
            target = (a, b)[side]
            fn = (lambda t: head(ad.matmul(t, b))) if side == 0 else \
                (lambda t: head(ad.matmul(a, t)))
            reports.append(finite_difference_check(fn, target, op_name=name))
        yield _merge(name, reports, OP_TOLERANCE)


def _conv_checks(rng, instances):
    specs = [
        ("conv2d/input", 0), ("conv2d/kernel", 1), ("conv2d/bias", 2),
    ]
    for name, which in specs:
        reports = []
        for _ in range(instances):
            x = Tensor(rng.standard_normal((2, 5, 5)), requires_grad=True)
            k = Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
            b = Tensor(rng.standard_normal(3), requires_grad=True)
            head = _readout(rng, (3, 5, 5))
            parts = [x, k, b]

            def fn(t, which=which, parts=parts, head=head):
                args = list(parts)
                args[which] = t
                return head(ad.conv2d(args[0], args[1], args[2], stride=1, padding=1))

            reports.append(finite_difference_check(fn, parts[which], op_name=name))
        yield _merge(name, reports, OP_TOLERANCE)
    for name, which in (("central_difference/input", 0), ("central_difference/kernel", 1)):
        reports = []
        for _ in range(instances):
            x = Tensor(rng.standard_normal((2, 5, 5)), requires_grad=True)
            k = Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
            head = _readout(rng, (3, 5, 5))
            pair = [x, k]

            def fn(t, which=which, pair=pair, head=head):
                args = list(pair)
                args[which] = t
                return head(ad.central_difference_term(args[0], args[1]))

            reports.append(finite_difference_check(fn, pair[which], op_name=name))
        yield _merge(name, reports, OP_TOLERANCE)


def _norm_checks(rng, instances):
    for which, name in ((0, "layernorm/input"), (1, "layernorm/gain"), (2, "layernorm/shift")):
        reports = []
        for _ in range(instances):
            x = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
            gain = Tensor(rng.standard_normal(6), requires_grad=True)
            shift = Tensor(rng.standard_normal(6), requires_grad=True)
            head = _readout(rng, (4, 6))
            parts = [x, gain, shift]

            def fn(t, which=which, parts=parts, head=head):
                args = list(parts)
                args[which] = t
                return head(ad.layernorm(args[0], args[1], args[2]))

            reports.append(finite_difference_check(fn, parts[which], op_name=name))
        yield _merge(name, reports, OP_TOLERANCE)


def _objective_checks(rng, instances):
    reports = []
    for _ in range(instances):
        logits = Tensor(rng.standard_normal((6, 2)), requires_grad=True)
        labels = rng.integers(0, 2, 6)
        reports.append(finite_difference_check(
            lambda t: binary_cross_entropy_with_logits(t, labels),
            logits, op_name="bce_with_logits"))
    yield _merge("bce_with_logits", reports, OP_TOLERANCE)

    reports = []
    for _ in range(instances):
        z = Tensor(rng.standard_normal((3, 4, 4)), requires_grad=True)
        head = _readout(rng, (3, 3))
        reports.append(finite_difference_check(
            lambda t: head(gram(TokenGrid(t))), z, op_name="gram"))
    yield _merge("gram", reports, OP_TOLERANCE)

    reports = []
    for _ in range(instances):
        z1 = Tensor(rng.standard_normal((3, 4, 4)), requires_grad=True)
        z2 = Tensor(rng.standard_normal((3, 4, 4)))
        reports.append(finite_difference_check(
            lambda t: tsr_pair(TokenGrid(t), TokenGrid(z2)), z1, op_name="tsr_pair"))
    yield _merge("tsr_pair", reports, OP_TOLERANCE)


def _composed_adapter_checks(rng):
    """End-to-end check through the full adapter at composed tolerance."""
    model_dim, adapter_dim, side = 16, 4, 3
    adapter = HistAdapter(model_dim, rng, adapter_dim=adapter_dim, theta=0.7,
                          variant="full")
    # zero-init dim_up would silence most parameter gradients; perturb it
    adapter.dim_up.weight.data = rng.normal(0.0, 0.2, adapter.dim_up.weight.shape)
    adapter.dim_up.bias.data = rng.normal(0.0, 0.2, adapter.dim_up.bias.shape)
    tokens = rng.standard_normal((side * side + 1, model_dim))
    head = _readout(rng, (side * side + 1, model_dim))

    def run(seq_tokens):
        seq = TokenSequence(seq_tokens, side, side, has_class=True)
        return head(adapter.apply(seq).tokens)

    x = Tensor(tokens.copy(), requires_grad=True)
    yield finite_difference_check(run, x, tolerance=COMPOSED_TOLERANCE,
                                  op_name="adapter/input")
    for name, param in adapter.parameters().items():
        fixed = Tensor(tokens.copy())
        yield finite_difference_check(lambda t, p=param: run(fixed),
                                      param, tolerance=COMPOSED_TOLERANCE,
                                      op_name=f"adapter/{name}")


def run_gradient_checks(instances_per_op: int = 5, seed: int = 0) -> list:
    """All per-op checks plus the composed-adapter checks, as reports."""
    rng = np.random.default_rng(np.random.SeedSequence([41, seed]))
    reports = []
    reports.extend(_elementwise_checks(rng, instances_per_op))
    reports.extend(_unary_checks(rng, instances_per_op))
    reports.extend(_scalar_checks(rng, instances_per_op))
    reports.extend(_matmul_checks(rng, instances_per_op))
    reports.extend(_conv_checks(rng, instances_per_op))
    reports.extend(_norm_checks(rng, instances_per_op))
    reports.extend(_objective_checks(rng, instances_per_op))
    reports.extend(_composed_adapter_checks(rng))
    return reports
