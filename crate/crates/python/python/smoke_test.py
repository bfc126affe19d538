"""Quick end-to-end check of the extension module."""

import math

import tunneldeduce as td

assert math.isclose(td.cell_angle(50, 1), 2 * math.pi * 0.5 / 50)
assert td.mirror(50, 1) == 50

cfg = td.SectionConfig.builtin("S9")
print(cfg)
field = cfg.load_field()
assert len(field["radial"]) == cfg.parts
assert len(field["q_weights"]) == cfg.parts - 1
assert all(0.0 <= q <= 1.0 for q in field["q_weights"])

days = td.synthesize(cfg, days=2, seed=1)
date, readings = sorted(days.items())[0]
result = td.deduce(cfg, date, readings)
print(result)
assert len(result.dense) == 3 and len(result.dense[0]) == 50
assert result.value(*result.max_cell) == result.max_value
assert td.DeductionResult.from_json(result.to_json()).to_svg() == result.to_svg()

dense, report = td.factorize(2, 4, {(1, 1): 1.0, (1, 2): 2.0, (2, 1): 2.0, (2, 2): 4.0},
                             [1.0, 1.0, 1.0], rank=1, lambda1=0.0, lambda2=0.0, patience=0)
assert abs(dense[1][1] - 4.0) < 1e-3, dense
assert report["epochs_run"] == 5000

m = td.metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
assert m["rmse"] == 0.0 and m["pcc"] == 1.0
assert td.metrics([1.0, 1.0], [1.0, 2.0])["pcc"] is None

folds = td.kfold_split([(1, n) for n in range(1, 11)], 3, 0)
assert sorted(c for f in folds for c in f) == [(1, n) for n in range(1, 11)]

try:
    td.SectionConfig.builtin("S7")
except ValueError as e:
    print("rejected:", e)
else:
    raise AssertionError("unknown section accepted")

print("smoke test passed")
