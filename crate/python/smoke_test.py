"""Smoke test for the gsp extension module. Build with `pip install crates/py`."""

import json
import math

import gsp


def main():
    iid = gsp.Measure.catalog("iid")
    assert iid.domain == "integer_time"
    assert abs(iid.covariance(0.0) - 1.0) < 1e-12
    assert abs(iid.covariance(3.0)) < 1e-12

    est = gsp.estimate(iid, 8, seed=1)
    assert abs(est["log_p"] + 8 * math.log(2)) < 1e-9, est

    again = gsp.Measure.from_json(iid.to_json())
    assert again.digest() == iid.digest()

    sinc = gsp.Measure.catalog("sinc")
    paths = gsp.sample(sinc, 64, n_paths=4, step=0.25, seed=7)
    assert len(paths) == 4 and all(len(p) == 64 for p in paths)

    pw = gsp.Measure.catalog("power", alpha=-0.5)
    pts = gsp.curve(pw, [4, 8, 16], n_samples=5000, seed=3)
    assert len(pts) == 3

    lo = gsp.lower_bound(pw, 16)
    assert lo["log_bound"] < 0 and lo["params_used"]["beta"] > 2.8
    up = gsp.upper_bound(sinc, 16)
    assert math.isfinite(up["log_bound"]) and up["params_used"]["ac_floor"] is not None
    try:
        gsp.upper_bound(pw, 16)
    except ArithmeticError:
        pass
    else:
        raise AssertionError("upper bound without an absolutely continuous floor")

    nodes = gsp.chebyshev_extrema(4)
    assert len(nodes) == 5
    report = gsp.min_norm_check([0.0, 0.0, 0.0, 0.0, 1.0])
    print(json.dumps({"log_p": est["log_p"], "lower": lo["log_bound"], "min_norm": report}))

    try:
        gsp.Measure.catalog("power", alpha=-1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha <= -1 accepted")
    print("smoke test OK")


if __name__ == "__main__":
    main()
