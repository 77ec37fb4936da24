"""Smoke test for the hqlab_py extension module."""

import math

import hqlab_py as hq


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    assert hq.sigma(2, [1.0, 2.0, 3.0]) == 11.0
    assert sorted(hq.lambda_of([1.0, 2.0, 4.0], 2)) == [3.0, 5.0, 6.0]

    cfg = hq.OperatorConfig(3, 2, 2, 0)
    assert (cfg.n, cfg.p, cfg.k, cfg.l, cfg.big_n) == (3, 2, 2, 0, 3)

    op = hq.HqOperator(3, 1, 2, 0)
    ident = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    point = op.evaluate(ident)
    assert point["admissible"]
    assert close(point["f"], 3.0, 1e-12)
    assert close(point["ftilde"], math.sqrt(3.0), 1e-12)

    a = [[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 0.5]]
    f_grad, ft_grad = op.gradient(a)
    f_grad_w, _ = op.gradient(a, via_derivation=True)
    for i in range(3):
        for j in range(3):
            assert close(f_grad[i][j], f_grad_w[i][j], 1e-8)

    h = 1e-6
    e = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
    plus = [[a[i][j] + h * e[i][j] for j in range(3)] for i in range(3)]
    minus = [[a[i][j] - h * e[i][j] for j in range(3)] for i in range(3)]
    fd = (op.evaluate(plus)["ftilde"] - op.evaluate(minus)["ftilde"]) / (2 * h)
    assert close(fd, ft_grad[2][2], 1e-6)
    assert op.hessian_form(a, a) <= 1e-8 * op.evaluate(a)["ftilde"]

    w = hq.derivation_matrix(a, 2)
    assert len(w) == 3 and len(w[0]) == 3

    assert hq.constant_c1(hq.OperatorConfig(3, 2, 2, 0)) > 0.0
    report = hq.verify_lemma(hq.OperatorConfig(3, 2, 2, 0), "f11", 500, 1)
    assert report["pass"], report

    reports = hq.verify({"configs": [{"n": 3, "p": 2, "k": 2, "l": 0}], "lemmas": ["f11"], "count": 200, "seed": 3})
    assert all(r["pass"] for r in reports)

    res = hq.solve({
        "n": 3, "p": 1, "k": 2, "l": 0,
        "geometry": "radial", "grid": {"m": 33},
        "exact": {"kind": "quadratic", "a": 1.0},
        "f": {"kind": "from_exact"}, "phi": {"kind": "from_exact"},
        "eps": 1.0,
    })
    assert res["summary"]["error_vs_exact"] <= 1e-8, res["summary"]
    assert len(res["u"]) == 33

    try:
        hq.HqOperator(3, 3, 1, 0)
    except hq.HqlabError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    print("hqlab_py smoke test ok")


if __name__ == "__main__":
    main()
