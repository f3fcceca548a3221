"""Brute-force stepper used as an independent check on the engine.

Shares only the net records with the package. Speeds are evaluated from
their printed form, and the step is spelled out with plain loops.
"""

import math
import re

_REF = re.compile(r"\bm\((\d+)\)|\bm(\d+)")


def _speed_fn(text):
    code = _REF.sub(lambda m: f"M[{m.group(1) or m.group(2)}]", text)
    return lambda M: eval(code, {"min": min, "max": max, "inf": math.inf}, {"M": M})


def oracle_trace(net, steps, dt=1.0):
    """Markings after 0..steps steps, as a list of dicts."""
    P = sorted(net.places)
    T = sorted(net.transitions)
    arcs = list(net.arcs.values())
    pre = {t: [(a.source, a.kind, a.k, a.w) for a in arcs if a.target == t] for t in T}
    post = {t: [(a.target, a.w) for a in arcs if a.source == t] for t in T}
    speed = {t: _speed_fn(str(net.transitions[t].speed)) for t in T}
    explicit = {t: {int(a or b) for a, b in _REF.findall(str(net.transitions[t].speed))} for t in T}
    cont = [t for t in T if net.transitions[t].kind == "continuous"]
    disc = [t for t in T if net.transitions[t].kind == "discrete"]

    def live(t, M):
        for p, kind, k, w in pre[t]:
            if kind == "inhibitory":
                if M[p] >= k:
                    return False
            elif M[p] < k or (t in disc and M[p] < w):
                return False
        return True

    M = {p: float(net.places[p].m) for p in P}
    age = {t: 0.0 for t in T}
    out = [dict(M)]
    for _ in range(steps):
        v = {}
        for t in cont:
            if age[t] + 1e-12 < net.transitions[t].delay or not live(t, M):
                v[t] = 0.0
                continue
            x = speed[t](M)
            for p, kind, k, w in pre[t]:
                if kind == "associative" and net.places[p].boost and p not in explicit[t]:
                    x += M[p]
            for p, kind, k, w in pre[t]:
                if kind == "normal":
                    x = min(x, M[p] / (w * dt))
            v[t] = max(x, 0.0)
        need = {p: 0.0 for p in P}
        for t in cont:
            for p, kind, k, w in pre[t]:
                if kind == "normal":
                    need[p] += w * v[t] * dt
        for t in cont:
            scale = 1.0
            for p, kind, k, w in pre[t]:
                if kind == "normal" and need[p] > M[p] and v[t] > 0:
                    scale = min(scale, M[p] / need[p])
            v[t] *= scale
        N = dict(M)
        for t in cont:
            for p, kind, k, w in pre[t]:
                if kind == "normal":
                    N[p] -= w * v[t] * dt
            for p, w in post[t]:
                N[p] += w * v[t] * dt
        fired = set()
        for t in disc:
            if age[t] + 1e-12 < net.transitions[t].delay or not live(t, N):
                continue
            for p, kind, k, w in pre[t]:
                if kind == "normal":
                    N[p] -= w
            for p, w in post[t]:
                N[p] += w
            fired.add(t)
        for p in P:
            if N[p] < 0:
                assert N[p] > -1e-6, (p, N[p])
                N[p] = 0.0
        age = {t: (age[t] + dt if live(t, M) and t not in fired else 0.0) for t in T}
        M = N
        out.append(dict(M))
    return out
