#!/usr/bin/env python3
"""Writes the synthetic feeder fixtures in data/ (JSON network documents, SI units)."""

import argparse
import json
import math
import pathlib

V_PHASE = 230.0
BASE_KVA = 10.0


def cplx(z):
    return {"re": z.real, "im": z.imag}


def line_z(length_km, self_ohm_km, mutual_ohm_km):
    z = []
    for r in range(3):
        row = []
        for c in range(3):
            row.append(cplx((self_ohm_km if r == c else mutual_ohm_km) * length_km))
        z.append(row)
    return z


def root_voltage(periods, vm):
    out = []
    for _ in range(periods):
        out.append([cplx(vm * complex(math.cos(a), math.sin(a)))
                    for a in (0.0, -2.0 * math.pi / 3.0, 2.0 * math.pi / 3.0)])
    return out


def load_shape(t):
    """Relative residential demand for hour-of-day t in [0, 24)."""
    night = 0.35
    morning = 0.55 * math.exp(-((t - 7.5) / 1.5) ** 2)
    evening = 0.9 * math.exp(-((t - 19.0) / 2.0) ** 2)
    midday = 0.15 * math.exp(-((t - 13.0) / 3.0) ** 2)
    return night + morning + evening + midday


def pv_shape(t):
    return max(0.0, math.sin(math.pi * (t - 6.0) / 12.0)) if 6.0 < t < 18.0 else 0.0


def demand(periods, peak_kw, pv_kw, pf=0.95, phase_shift=0.0):
    out = []
    tanphi = math.tan(math.acos(pf))
    for k in range(periods):
        t = (k + 0.5) * 24.0 / periods
        p_load = peak_kw * 1000.0 * load_shape((t + phase_shift) % 24.0)
        p_pv = pv_kw * 1000.0 * pv_shape(t)
        out.append({"p": p_load - p_pv, "q": p_load * tanphi})
    return out


def node(id_, vmin=216.2, vmax=253.0, **flags):
    d = {"id": id_, "vmin": vmin, "vmax": vmax}
    d.update(flags)
    return d


def dt_impedance(kva=200.0, pct=0.04, xr=3.0):
    z_base = 400.0 ** 2 / (kva * 1000.0)
    mag = pct * z_base
    r = mag / math.sqrt(1.0 + xr * xr)
    return r + 1j * r * xr


def ieee13_like(periods=24, pv_kw=2.5, svc_kva=9.0, n_o=1):
    nodes = [node("x", vmin=216.2, vmax=253.0, root=True), node("y", secondary=True)]
    nodes += [node("n%d" % i) for i in range(1, 12)]
    zdt = dt_impedance()
    lines = [{"from": "x", "to": "y", "z": line_z(1.0, zdt, 0.0), "ampacity": 290.0}]
    self_z = 0.45 + 0.30j
    mutual_z = 0.10 + 0.18j
    tree = [("y", "n1", 0.12), ("n1", "n2", 0.10), ("n2", "n3", 0.10), ("n1", "n4", 0.08), ("n4", "n5", 0.10),
            ("n4", "n6", 0.09), ("y", "n7", 0.11), ("n7", "n8", 0.10), ("n8", "n9", 0.12), ("y", "n10", 0.09),
            ("n10", "n11", 0.10)]
    for a, b, km in tree:
        lines.append({"from": a, "to": b, "z": line_z(km, self_z, mutual_z)})
    placement = [("n1", "a"), ("n2", "b"), ("n3", "a"), ("n3", "c"), ("n5", "a"), ("n5", "b"), ("n6", "c"),
                 ("n6", "a"), ("n8", "a"), ("n9", "b"), ("n9", "c"), ("n9", "a"), ("n10", "b"), ("n11", "c"),
                 ("n11", "a"), ("n2", "c"), ("n4", "a")]
    adjustable = {3, 5, 9, 12, 17}
    with_pv = {1, 3, 8, 12, 15}
    customers = []
    for j, (nd, ph) in enumerate(placement, start=1):
        peak = 1.2 + 0.9 * ((j * 7) % 5) / 4.0
        customers.append({
            "id": str(j),
            "node": nd,
            "kind": "adjustable" if j in adjustable else "fixed",
            "initial_phase": ph,
            "service_z": cplx(0.025 + 0.012j),
            "demand": demand(periods, peak, pv_kw if j in with_pv else 0.0, phase_shift=0.3 * (j % 4)),
            "vmin": 216.2,
            "vmax": 253.0,
        })
    doc = {
        "base": {"kva": BASE_KVA, "volts": V_PHASE},
        "nodes": nodes,
        "lines": lines,
        "customers": customers,
        "svc": {"node": "y", "s_cap": svc_kva * 1000.0, "s_ind": svc_kva * 1000.0, "v_rated": 400.0},
        "horizon": {"T": periods, "n_o": n_o, "root_voltage": root_voltage(periods, 1.02 * V_PHASE)},
    }
    return doc


def high_pv(pv_kw=10.0, svc_kva=9.0):
    """Single period at midday: three PV customers on phase a at the end of a long lateral."""
    nodes = [node("x", root=True), node("y", secondary=True), node("m1"), node("m2"), node("m3")]
    zdt = dt_impedance()
    lines = [{"from": "x", "to": "y", "z": line_z(1.0, zdt, 0.0), "ampacity": 290.0}]
    for a, b in [("y", "m1"), ("m1", "m2"), ("m2", "m3")]:
        lines.append({"from": a, "to": b, "z": line_z(0.12, 0.45 + 0.30j, 0.10 + 0.18j)})
    customers = []
    for j in range(1, 4):
        customers.append({"id": "pv%d" % j, "node": "m3", "kind": "adjustable", "initial_phase": "a",
                          "service_z": cplx(0.025 + 0.012j), "demand": [{"p": 300.0 - pv_kw * 1000.0, "q": 100.0}],
                          "vmin": 216.2, "vmax": 253.0})
    for j, (nd, ph) in enumerate([("m1", "b"), ("m1", "c"), ("m2", "b"), ("m2", "c")], start=1):
        customers.append({"id": "l%d" % j, "node": nd, "kind": "fixed", "initial_phase": ph,
                          "service_z": cplx(0.025 + 0.012j), "demand": [{"p": 800.0, "q": 250.0}],
                          "vmin": 216.2, "vmax": 253.0})
    return {
        "base": {"kva": BASE_KVA, "volts": V_PHASE},
        "nodes": nodes,
        "lines": lines,
        "customers": customers,
        "svc": {"node": "y", "s_cap": svc_kva * 1000.0, "s_ind": svc_kva * 1000.0, "v_rated": 400.0},
        "horizon": {"T": 1, "n_o": 1, "root_voltage": root_voltage(1, 1.02 * V_PHASE)},
    }


def balanced(periods=4):
    nodes = [node("x", root=True), node("y", secondary=True), node("b1")]
    zdt = dt_impedance()
    lines = [{"from": "x", "to": "y", "z": line_z(1.0, zdt, 0.0), "ampacity": 290.0},
             {"from": "y", "to": "b1", "z": line_z(0.1, 0.45 + 0.30j, 0.0)}]
    customers = []
    for j, ph in enumerate("abc", start=1):
        customers.append({"id": str(j), "node": "b1", "kind": "fixed", "initial_phase": ph,
                          "service_z": cplx(0.025 + 0.012j), "demand": demand(periods, 1.5, 0.0),
                          "vmin": 216.2, "vmax": 253.0})
    return {
        "base": {"kva": BASE_KVA, "volts": V_PHASE},
        "nodes": nodes,
        "lines": lines,
        "customers": customers,
        "horizon": {"T": periods, "n_o": 1, "root_voltage": root_voltage(periods, 1.0 * V_PHASE)},
    }


def cyclic():
    doc = balanced(1)
    doc["nodes"].append(node("b2"))
    doc["lines"].append({"from": "b1", "to": "b2", "z": line_z(0.1, 0.45 + 0.30j, 0.0)})
    doc["lines"].append({"from": "y", "to": "b2", "z": line_z(0.1, 0.45 + 0.30j, 0.0)})
    return doc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fixtures = {
        "ieee13-like.json": ieee13_like(),
        "high-pv.json": high_pv(),
        "balanced.json": balanced(),
        "cyclic-invalid.json": cyclic(),
    }
    for name, doc in fixtures.items():
        (out / name).write_text(json.dumps(doc, indent=1) + "\n")
        print("wrote", out / name)


if __name__ == "__main__":
    main()
