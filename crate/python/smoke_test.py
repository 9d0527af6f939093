"""Smoke test for the bpsignal_py extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import json
import math

import bpsignal_py as bp


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok   {what}")


def main():
    toks = bp.tokenize("I'm feeling GREAT today, aren't you?")
    check(toks[0] == "i'm" and "great" in toks, f"tokenize -> {toks}")

    check(bp.porter_stem("caresses") == "caress", "porter_stem caresses")
    check(bp.porter_stem("relational") == "relat", "porter_stem relational")

    lex = bp.Lexicon.demo()
    names = lex.category_names()
    check("posemo" in names, "demo lexicon has posemo")
    pct = dict(lex.percentages("happy happy sad table"))
    check(abs(pct["posemo"] - 50.0) < 1e-12, "posemo percentage")

    dic = "%\n1\talpha\n2\tbeta\n%\nab*\t1\nabc\t2\n"
    small = bp.Lexicon.from_dic(dic)
    check(small.match_token("abc") == ["beta"], "exact entry beats prefix")
    check(small.match_token("abd") == ["alpha"], "prefix entry matches")

    model = bp.TfidfModel.fit(["a a b", "a"], min_df=1)
    w = dict(model.transform("a a b"))
    norm = math.sqrt(sum(v * v for v in w.values()))
    check(abs(norm - 1.0) < 1e-9, "tf-idf rows are unit length")
    back = bp.TfidfModel.from_json(model.to_json())
    check(back.terms() == model.terms(), "tf-idf json roundtrip")

    t = bp.welch_ttest([1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 5.0])
    check(0.0 < t.p < 1.0 and t.t < 0, f"welch t={t.t:.4f} p={t.p:.4f}")

    labels = [0] * 10 + [1] * 6
    folds = bp.stratified_kfold(labels, 3, 11)
    flat = sorted(i for f in folds for i in f)
    check(flat == list(range(16)), "folds partition the rows")

    rows = [[float(i), float(i % 3)] for i in range(20)]
    y = [int(i >= 10) for i in range(20)]
    for params in ({"model": "logreg", "c": 10.0}, {"model": "rf", "n_trees": 10, "max_depth": 3}):
        m = bp.Model.train(rows, y, json.dumps(params), 5)
        pred = m.predict(rows)
        acc, _ = bp.metrics(y, pred)
        check(acc >= 0.9, f"{params['model']} training accuracy {acc:.2f}")
        again = bp.Model.from_json(m.to_json())
        check(again.predict(rows) == pred, f"{params['model']} json roundtrip")

    try:
        bp.Model.train(rows, [1] * 20, '{"model": "svm", "c": 1.0}', 0)
    except ValueError:
        check(True, "single-class training raises ValueError")
    else:
        check(False, "single-class training raises ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
