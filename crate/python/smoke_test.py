"""Smoke test for the `ldm` extension module.

Build and install first, e.g. `pip install --no-build-isolation ./crates/py`.
"""

import csv
import math
import os
import random
import tempfile

import ldm

AR1 = """ProgramName: AR1
Indices: t 0 59
a ~ N(0, 10)
b ~ N(0, 10)
sigma ~ HalfNormal(10)
y[0] ~ N(0, 10)
y[t] ~ N(a*y[t-1] + b, sigma)
"""


def write_series(path, n, missing):
    rng = random.Random(3)
    y = 1.0
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "y"])
        for t in range(n):
            y = 0.9 * y + 0.1 + rng.gauss(0.0, 0.5)
            w.writerow([t, "" if t in missing else repr(y)])


def main():
    assert ldm.check(AR1) == []
    assert len(ldm.check("ProgramName: Bad\nx ~ Foo(1)\n")) == 1

    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "y.csv")
        write_series(data, 60, {7, 30})
        model = ldm.Model(AR1, data=[data], obs=["y"])
        assert model.latent_names == ["a", "b", "sigma", "y[7]", "y[30]"]
        assert model.structure() == {"y": "RECURRENCE"}
        assert model.block_counts == (4, 0, 1)

        lp, grad = model.log_density([0.0] * model.latent_dim)
        assert math.isfinite(lp) and len(grad) == model.latent_dim

        slow = ldm.Model(AR1, data=[data], obs=["y"], optimize=False)
        lp2, _ = slow.log_density([0.0] * model.latent_dim)
        assert abs(lp - lp2) < 1e-9

        draws = model.sample(warmup=300, samples=300, chains=2, seed=1)
        assert draws.n_chains == 2 and draws.n_samples == 300
        stats = dict(draws.summary())
        assert 0.6 < stats["a"]["mean"] < 1.1, stats["a"]
        assert all(v > 0 for chain in draws.column("sigma") for v in chain)
        score = model.score(draws)
        assert score["k"] == 3 and score["n"] == 58
        assert abs(score["aic"] - (6 + 2 * score["nll"])) < 1e-9

        out = os.path.join(tmp, "draws.csv")
        draws.to_csv(out)
        with open(out) as f:
            assert f.readline().startswith("chain,draw,a,b,sigma")

        prior = ldm.Model(AR1).simulate(draws=2, seed=5)
        assert "t" in prior and prior["t"].startswith("draw,t,y")

    print("ldm", ldm.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
