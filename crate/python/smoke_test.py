"""Exercise the Python bindings end to end on the bundled instance.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json
import pathlib
import sys

import freight_routing_py as fr

EXAMPLES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "examples"


def main():
    net = fr.Network.from_file(str(EXAMPLES / "hypothetical15.json"))
    print(net)
    report = net.validate()
    assert report["errors"] == [], report["errors"]
    assert fr.Network.from_json(net.to_json()).node_ids == net.node_ids

    paths = net.paths("1", "15")
    assert paths and paths[0][0][0] == "1" and paths[0][0][-1] == "15"

    spec = fr.DisruptionSpec.from_file(str(EXAMPLES / "disruption_link.json"))
    scenarios = fr.sample_scenarios(net, spec, n=3, seed=5)
    again = fr.sample_scenarios(net, spec, n=3, seed=5)
    assert [s.to_json() for s in scenarios] == [s.to_json() for s in again]
    assert all(s.impacted_elements for s in scenarios)

    sol = fr.solve(net, scenarios[0])
    assert sol["status"] == "Optimal", sol["status"]
    assert sol["violations"] == 0
    print("single scenario objective %.2f, unmet %g" % (sol["objective"], sol["unmet"]))

    res = fr.run_saa(net, spec, m=4, n=1, n_prime=20, seed=7)
    twin = fr.run_saa(net, spec, m=4, n=1, n_prime=20, seed=7)
    assert res.to_json() == twin.to_json()
    assert abs(res.gap - (res.f_tilde - res.f_bar)) < 1e-9 * max(1.0, res.f_bar)
    assert json.loads(res.report("json"))
    assert fr.SaaResult.from_json(res.to_json()).to_json() == res.to_json()
    print(res.report("text"))

    try:
        fr.Network.from_json("{}")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed network accepted")
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
