"""Record API responses from a running server for the UI tests.

Usage: capture_fixtures.py http://127.0.0.1:8099 tests/fixtures
"""

import json
import sys
import urllib.error
import urllib.request
from pathlib import Path

PROMPT = "I went up to my friend and said"


def call(base, method, path, body=None):
    req = urllib.request.Request(
        base + path,
        method=method,
        data=None if body is None else json.dumps(body).encode(),
        headers={"content-type": "application/json"},
    )
    try:
        with urllib.request.urlopen(req) as res:
            return res.status, json.loads(res.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


def steer(layer, coefficient, keywords=None, n=3):
    body = {
        "prompt": PROMPT,
        "pair": {"p_plus": " weddings", "p_minus": " "},
        "layer": layer,
        "coefficient": coefficient,
        "n_completions": n,
        "params": {"seed": 7, "max_new_tokens": 24},
    }
    if keywords:
        body["keywords"] = keywords
    return body


def main():
    base, out = sys.argv[1].rstrip("/"), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    keywords = sys.argv[3].split(",") if len(sys.argv) > 3 else None

    def save(name, status, body, request=None):
        record = {"status": status, "body": body}
        if request is not None:
            record["request"] = request
        (out / name).write_text(json.dumps(record, indent=1, ensure_ascii=False) + "\n")

    save("model.json", *call(base, "GET", "/v1/model"))
    for name, body in [
        ("steer_c0.json", steer(2, 0.0, keywords)),
        ("steer_keywords.json", steer(1, 8.0, keywords)),
        ("error_400.json", {**steer(99, 1.0), "params": {"top_p": 0}}),
    ]:
        save(name, *call(base, "POST", "/v1/steer", body), request=body)
    for axis, values, fixed in [("layer", [0, 1, 2, 3], {"coefficient": 8.0}), ("coefficient", [0, 2, 4, 8, 16], {"layer": 1})]:
        points = []
        for v in values:
            body = steer(fixed.get("layer", v), fixed.get("coefficient", v), keywords)
            status, res = call(base, "POST", "/v1/steer", body)
            points.append({"x": v, "status": status, "body": res})
        save(f"sweep_{axis}.json", 200, points)


if __name__ == "__main__":
    main()
