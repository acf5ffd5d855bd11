import dataclasses

import numpy as np

from semtab.model import (
    grad_check,
    init_model,
    unused_embedding_rows_have_zero_grad,
)

from modelutil import TINY_CFG, TINY_VOCABS, make_batch

# generic parameter point: large enough that no tensor's gradient is
# numerically tiny relative to finite-difference noise
GC_CFG = dataclasses.replace(TINY_CFG, init_scale=0.1)


class TestGradCheck:
    def test_max_relative_error_below_1e4(self):
        model = init_model(GC_CFG, TINY_VOCABS, seed=0, dtype=np.float64)
        batch = make_batch([5, 6], seed=20)
        worst, per_tensor = grad_check(model, batch, eps=1e-5)
        assert worst < 1e-4, f"worst {worst:.2e}; offenders: " + ", ".join(
            f"{k}={v:.2e}" for k, v in sorted(per_tensor.items(),
                                              key=lambda kv: -kv[1])[:5])

    def test_unused_embedding_rows_zero_grad(self):
        model = init_model(TINY_CFG, TINY_VOCABS, seed=0, dtype=np.float64)
        batch = make_batch([4, 4], seed=21)
        # force some indices to never appear
        batch.tokens["mcc"][batch.tokens["mcc"] == 5] = 2
        batch.tdelta[batch.tdelta >= 6] = 0
        assert unused_embedding_rows_have_zero_grad(model, batch)

    def test_deterministic_across_runs(self):
        model = init_model(TINY_CFG, TINY_VOCABS, seed=3, dtype=np.float64)
        batch = make_batch([4, 5], seed=22)
        a, _ = grad_check(model, batch, eps=1e-5)
        b, _ = grad_check(model, batch, eps=1e-5)
        assert a == b
