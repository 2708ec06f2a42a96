"""Command-line front end: JSON in, a JSON report and an exit code out.

Exit codes: 0 yes, 1 no, 2 unknown, 65 unreadable input, 66 failed
precondition, 70 internal inconsistency.
"""
from __future__ import annotations

import argparse
import dataclasses
import enum
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import KERNEL_BACKEND, __version__
from .algebra import OperatorAlgebra, algebra_from_json, full_algebra, make_algebra, upper_triangular
from .bimodule import (
    bimodule_from_tripotent,
    expis_maps,
    phii_check,
    principal_witness,
    quad,
    support_tripotent_search,
)
from .calculus import in_S, power_t_report, s_violation, support_projection
from .equivalence import (
    LinearMap,
    PedersenWitness,
    blackadar_decide,
    c_verify,
    m1_check,
    noncommuting_pair,
    pedersen_decide,
    pedersen_decide_full,
    pedersen_verify,
    subequiv_decide,
)
from .errors import ConsistencyError, DimensionError, OatError, ParseError, PreconditionError
from .matcore import DEFAULT_TOL, MatSubspace, Tolerance, dag, matrix_from_json, matrix_to_json, opnorm
from .tripotent import pz_decide, pz_verify
from .tro import make_tro, tro_from_json, tro_pz_verify
from .verdict import Answer, Verdict, yes

EXIT = {Answer.YES: 0, Answer.NO: 1, Answer.UNKNOWN: 2}
DEMOS = ("counterexample", "triangular", "m1span", "unitary", "k-sweep")


# ---------------------------------------------------------------- serialization

def to_jsonable(obj):
    """Recursively convert results to JSON; 2-d arrays use the matrix format."""
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return matrix_to_json(obj)
        if np.iscomplexobj(obj) and np.any(np.abs(obj.imag) > 0):
            return [[float(z.real), float(z.imag)] for z in obj.reshape(-1)]
        return [float(z) for z in np.real(obj).reshape(-1)]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, MatSubspace):
        return obj.to_json()
    if isinstance(obj, OperatorAlgebra):
        return obj.to_json()
    if isinstance(obj, LinearMap):
        return {"domain": obj.domain.to_json(), "images": [matrix_to_json(m) for m in obj.images]}
    if isinstance(obj, Verdict):
        return {"answer": obj.answer.value, "witness": to_jsonable(obj.witness), "audit": obj.notes}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not f.name.startswith("_")}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    return repr(obj)


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ParseError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


class Loader:
    """Reads inputs and enforces the size limit."""

    def __init__(self, max_dim: int, tol: Tolerance, convention: str | None):
        self.max_dim = max_dim
        self.tol = tol
        self.convention = convention

    def _check(self, m: np.ndarray) -> np.ndarray:
        if max(m.shape) > self.max_dim:
            raise DimensionError(f"matrix of shape {m.shape} exceeds --max-dim {self.max_dim}")
        return m

    def matrix(self, path: str) -> np.ndarray:
        return self._check(matrix_from_json(_load_json(path)))

    def algebra(self, path: str | None, n: int) -> OperatorAlgebra:
        conv = self.convention or "half-ball"
        if path is None:
            return full_algebra(n, conv, self.tol)
        obj = _load_json(path)
        if self.convention is not None and isinstance(obj, dict):
            obj = dict(obj, convention=self.convention)
        A = algebra_from_json(obj, self.tol)
        if A.n > self.max_dim:
            raise DimensionError(f"algebra in M_{A.n} exceeds --max-dim {self.max_dim}")
        if A.n != n:
            raise DimensionError(f"inputs are {n} x {n} but the algebra lives in M_{A.n}")
        return A

    def subspace(self, path: str) -> MatSubspace:
        obj = _load_json(path)
        try:
            mats = [self._check(matrix_from_json(m)) for m in obj["basis"]]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: expected {{\"basis\": [matrix, ...]}}") from exc
        if not mats:
            raise ParseError(f"{path}: empty basis; give the shape with a zero matrix")
        return MatSubspace.span(mats, mats[0].shape, self.tol)

    def witness(self, path: str) -> PedersenWitness:
        obj = _load_json(path)
        if not isinstance(obj, dict) or "variant" not in obj:
            raise ParseError(f"{path}: witness needs a 'variant' field")

        def mat(key):
            return self._check(matrix_from_json(obj[key])) if obj.get(key) is not None else None

        seq = [(self._check(matrix_from_json(x)), self._check(matrix_from_json(y)))
               for x, y in obj.get("sequence", [])]
        return PedersenWitness(obj["variant"], mat("x"), mat("y"), mat("v"), seq)


# ---------------------------------------------------------------- verbs

def _cmd_check_s(args, ld: Loader):
    a = ld.matrix(args.inputs[0])
    A = ld.algebra(args.algebra, a.shape[0])
    ok = in_S(A, a)
    viol = s_violation(a, A.convention)
    return Verdict(Answer.YES if ok else Answer.NO, {"violation": viol},
                   [f"in algebra: {A.contains(a)}", f"norm test excess {viol:.3e}"])


def _cmd_root(args, ld: Loader):
    a = ld.matrix(args.inputs[0])
    conv = ld.convention or "half-ball"
    t = args.t if args.t is not None else 1.0 / args.k
    rep = power_t_report(a, t, conv, ld.tol)
    return yes({"value": rep.value, "terms": rep.terms, "tail": rep.tail_bound},
               f"exponent {t}", f"{rep.terms} series terms")


def _cmd_support(args, ld: Loader):
    a = ld.matrix(args.inputs[0])
    cert = support_projection(a, ld.convention or "half-ball", ld.tol, certify=True)
    return yes(cert, f"rank {cert.rank}", f"root iterates {cert.iterates}",
               f"deviation from range projector {cert.deviation:.2e}")


def _pair(args, ld: Loader):
    a, b = ld.matrix(args.inputs[0]), ld.matrix(args.inputs[1])
    if a.shape != b.shape:
        raise DimensionError("the two inputs have different shapes")
    return a, b, ld.algebra(args.algebra, a.shape[0])


def _cmd_quad(args, ld: Loader):
    a, b, A = _pair(args, ld)
    res = quad(A, a, b)
    return yes({"aAa": res.aAa, "bAb": res.bAb, "aAb": res.aAb, "bAa": res.bAa,
                "max_angle": res.max_angle}, *res.notes)


def _cmd_pedersen_verify(args, ld: Loader):
    a, b, A = _pair(args, ld)
    return pedersen_verify(A, a, b, ld.witness(args.inputs[2]))


def _cmd_pedersen_decide(args, ld: Loader):
    a, b, A = _pair(args, ld)
    if args.budget is not None:
        return pedersen_decide(A, a, b, args.seed, args.budget)
    return pedersen_decide(A, a, b, args.seed)


def _cmd_blackadar(args, ld: Loader):
    a, b, A = _pair(args, ld)
    return blackadar_decide(A, a, b, args.seed)


def _cmd_subequiv(args, ld: Loader):
    a, b, A = _pair(args, ld)
    return subequiv_decide(A, a, b, args.seed)


def _cmd_pz_verify(args, ld: Loader):
    p, q, A = _pair(args, ld)
    return pz_verify(A, p, q, ld.matrix(args.inputs[2]))


def _cmd_pz_decide(args, ld: Loader):
    p, q, A = _pair(args, ld)
    return pz_decide(A, p, q, args.seed)


def _subspace_and_algebra(args, ld: Loader):
    X = ld.subspace(args.inputs[0])
    if X.shape[0] != X.shape[1]:
        raise DimensionError("the subspace must consist of square matrices")
    return X, ld.algebra(args.algebra, X.shape[0])


def _cmd_bimodule_verify(args, ld: Loader):
    X, A = _subspace_and_algebra(args, ld)
    return phii_check(A, X, ld.matrix(args.inputs[1]), ld.matrix(args.inputs[2]))


def _search(args, ld: Loader, X, A):
    if args.budget is not None:
        return support_tripotent_search(A, X, args.seed, starts=args.budget, method="als")
    return support_tripotent_search(A, X, args.seed)


def _cmd_bimodule_search(args, ld: Loader):
    X, A = _subspace_and_algebra(args, ld)
    return _search(args, ld, X, A)


def _cmd_bimodule_principal(args, ld: Loader):
    X, A = _subspace_and_algebra(args, ld)
    found = _search(args, ld, X, A)
    if not found.yes:
        return found
    H = bimodule_from_tripotent(A, found.witness, args.seed)
    maps = expis_maps(H, args.seed)
    if not maps.yes:
        raise ConsistencyError("bimodule maps failed: " + "; ".join(maps.notes))
    pw = principal_witness(A, H)
    a, b = pw.witness
    return Verdict(pw.answer, {"u": H.u, "a": a, "b": b},
                   found.notes + H.notes + maps.notes + pw.notes)


def _cmd_tro_verify(args, ld: Loader):
    obj = _load_json(args.inputs[0])
    try:
        shape = (int(obj["rows"]), int(obj["cols"]))
        gens = [ld._check(matrix_from_json(g)) for g in obj["generators"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad TRO object: {exc}") from exc
    span = MatSubspace.span(gens, shape, ld.tol)
    Z = make_tro(gens, shape, ld.convention or "half-ball", ld.tol)
    closed = Z.Z.dim == span.dim
    notes = [f"span of generators: dim {span.dim}", f"ternary closure: dim {Z.Z.dim}"] + Z.notes
    return Verdict(Answer.YES if closed else Answer.NO,
                   {"closure": Z.Z, "left": Z.left, "right": Z.right}, notes)


def _cmd_tro_pz(args, ld: Loader):
    obj = _load_json(args.inputs[0])
    if ld.convention is not None:
        obj = dict(obj, convention=ld.convention)
    Z = tro_from_json(obj, ld.tol)
    return tro_pz_verify(Z, ld.matrix(args.inputs[1]))


# ---------------------------------------------------------------- demos

def _expect(cond: bool, what: str):
    if not cond:
        raise ConsistencyError(f"demo did not reproduce the expected outcome: {what}")


def demo_counterexample(K: float, tol: Tolerance = DEFAULT_TOL, seed: int = 0) -> Verdict:
    data = noncommuting_pair(K)
    a, b, x, y = data["a"], data["b"], data["x"], data["y"]
    M2 = full_algebra(2, "half-ball", tol)
    if not (in_S(M2, a) and in_S(M2, b)):
        raise PreconditionError(f"K = {K} is too large: x y or y x leaves the cone base")
    cv = c_verify(a, b, x, y, tol)
    dec = pedersen_decide_full(a, b, "half-ball", tol, seed=seed)
    _expect(cv.yes, "a = x y, b = y x with contractions")
    _expect(dec.no, "x y and y x not unitarily equivalent")
    na, nb = opnorm(a), opnorm(b)
    _expect(abs(na - nb) > 1e-6, "norms differ")
    return Verdict(dec.answer, {"K": K, "x": x, "y": y, "norm_xy": na, "norm_yx": nb,
                                "difference": na - nb, "decision": dec.witness},
                   ["x y in cone base: ok", "y x in cone base: ok"] + cv.notes + dec.notes)


def demo_triangular(tol: Tolerance = DEFAULT_TOL, seed: int = 0) -> Verdict:
    e11, e22 = np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)
    tri = pz_decide(upper_triangular(2, tol=tol), e11, e22, seed)
    full = pz_decide(full_algebra(2, tol=tol), e11, e22, seed)
    _expect(tri.no, "E11, E22 not equivalent in the upper triangular 2 x 2 matrices")
    _expect(full.yes, "E11, E22 equivalent in M_2")
    return Verdict(tri.answer, {"triangular": tri, "full": full},
                   ["upper triangular: " + tri.answer.value, "full: " + full.answer.value])


def m1span_algebra(R=None, tol: Tolerance = DEFAULT_TOL) -> dict:
    """The 4-dimensional algebra spanned by ``I ⊕ 0``, ``0 ⊕ I``, ``E12 ⊗ R``, ``E21 ⊗ R^-1``."""
    R = np.diag([2.0, 0.5]).astype(complex) if R is None else np.asarray(R, dtype=complex)
    k = R.shape[0]
    e = np.eye(2, dtype=complex)
    eye_k = np.eye(k, dtype=complex)
    a = np.kron(np.diag([1.0, 0.0]), eye_k).astype(complex)
    b = np.kron(np.diag([0.0, 1.0]), eye_k).astype(complex)
    x = np.kron(np.outer(e[0], e[1]), R)
    y = np.kron(np.outer(e[1], e[0]), np.linalg.inv(R))
    A = make_algebra(2 * k, [a, b, x, y], tol=tol)
    return {"A": A, "a": a, "b": b, "x": x, "y": y, "R": R}


def demo_m1span(tol: Tolerance = DEFAULT_TOL, seed: int = 0) -> Verdict:
    d = m1span_algebra(tol=tol)
    A = d["A"]
    inside = blackadar_decide(A, d["a"], d["b"], seed)
    ambient = m1_check(d["a"], d["b"], d["x"], d["y"], tol)
    _expect(inside.no, "supports not equivalent inside the span algebra")
    _expect(ambient.yes, "supports equivalent in the ambient M_4")
    return Verdict(inside.answer, {"algebra_dim": A.dim, "in_algebra": inside, "ambient": ambient},
                   [f"algebra dimension {A.dim}", "in algebra: " + inside.answer.value,
                    "ambient: " + ambient.answer.value])


def demo_unitary(tol: Tolerance = DEFAULT_TOL, seed: int = 0, n: int = 3) -> Verdict:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    U = np.linalg.qr(z)[0]
    h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (h + dag(h)) / 2
    w, q = np.linalg.eigh(h)
    pos = q @ np.diag(rng.uniform(0.05, 0.5, n)) @ dag(q)
    skew = 0.05 * (h - np.trace(h) / n * np.eye(n)) * 1j
    a = pos + skew
    M = full_algebra(n, tol=tol)
    if not in_S(M, a):
        a = a / (2 * opnorm(a))
    b = U @ a @ dag(U)
    dec = pedersen_decide_full(a, b, "half-ball", tol, seed=seed)
    _expect(dec.yes, "a and U a U* equivalent")
    return Verdict(dec.answer, {"a": a, "b": b, "U": U, "decision": dec.witness}, dec.notes)


def demo_k_sweep(tol: Tolerance = DEFAULT_TOL, seed: int = 0) -> Verdict:
    M2 = full_algebra(2, tol=tol)
    rows = []
    threshold = None
    for K in np.round(np.arange(0.01, 0.2 + 1e-9, 0.01), 2):
        data = noncommuting_pair(float(K))
        ok = in_S(M2, data["a"]) and in_S(M2, data["b"])
        rows.append({"K": float(K), "in_cone_base": ok,
                     "excess_xy": s_violation(data["a"]), "excess_yx": s_violation(data["b"]),
                     "norm_gap": opnorm(data["a"]) - opnorm(data["b"])})
        if not ok and threshold is None:
            threshold = float(K)
    first_bad = next((i for i, r in enumerate(rows) if not r["in_cone_base"]), len(rows))
    _expect(all(r["in_cone_base"] for r in rows[:first_bad]) and
            not any(r["in_cone_base"] for r in rows[first_bad:]),
            "membership is monotone in K")
    note = f"first K leaving the cone base: {threshold}" if threshold else "all K in the cone base"
    return yes({"rows": rows, "threshold": threshold}, note)


def _cmd_demo(args, ld: Loader):
    name = args.inputs[0] if args.inputs else None
    if name not in DEMOS:
        raise PreconditionError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
    if name == "counterexample":
        return demo_counterexample(args.k, ld.tol, args.seed)
    if name == "triangular":
        return demo_triangular(ld.tol, args.seed)
    if name == "m1span":
        return demo_m1span(ld.tol, args.seed)
    if name == "unitary":
        return demo_unitary(ld.tol, args.seed)
    return demo_k_sweep(ld.tol, args.seed)


VERBS = {
    "check-s": (_cmd_check_s, "A", "is A.json in the cone base (of --algebra, default M_n)?"),
    "root": (_cmd_root, "A", "fractional power a^(1/k) or a^t via the binomial series"),
    "support": (_cmd_support, "A", "support projection with its root-iteration certificate"),
    "quad": (_cmd_quad, "A B", "the four corner spaces of a and b, aAb computed six ways"),
    "pedersen-verify": (_cmd_pedersen_verify, "A B WITNESS", "check a witness of a ~ b"),
    "pedersen-decide": (_cmd_pedersen_decide, "A B", "decide a ~ b"),
    "blackadar-decide": (_cmd_blackadar, "A B", "decide whether the supports are equivalent"),
    "subequiv-decide": (_cmd_subequiv, "A B", "is p_a equivalent to a subprojection of p_b?"),
    "pz-verify": (_cmd_pz_verify, "P Q V", "check that v implements p ~ q"),
    "pz-decide": (_cmd_pz_decide, "P Q", "decide equivalence of projections"),
    "bimodule-verify": (_cmd_bimodule_verify, "X C D", "does (c, d) exhibit X as hereditary?"),
    "bimodule-search": (_cmd_bimodule_search, "X", "find a support tripotent for X"),
    "bimodule-principal": (_cmd_bimodule_principal, "X", "write X as aAb with a ~ b"),
    "tro-verify": (_cmd_tro_verify, "TRO", "is the span of the generators ternary closed?"),
    "tro-pz": (_cmd_tro_pz, "TRO V", "does v implement an equivalence in the TRO?"),
    "demo": (_cmd_demo, "NAME", f"worked examples: {', '.join(DEMOS)}"),
}


def _parse_tolerance(specs: list[str] | None) -> Tolerance:
    if not specs:
        return DEFAULT_TOL
    values = DEFAULT_TOL.as_dict()
    for spec in specs:
        for part in spec.split(","):
            key, sep, val = part.partition("=")
            if not sep:
                key, val = "eq_eps", key
            key = key.strip().replace("-", "_")
            if key not in values:
                raise PreconditionError(f"unknown tolerance {key!r}; expected one of {sorted(values)}")
            try:
                values[key] = float(val)
            except ValueError as exc:
                raise ParseError(f"tolerance {key} is not a number: {val!r}") from exc
    return Tolerance(**values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oat", description="Equivalence of positive-type elements in finite-dimensional "
        "operator algebras.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")
    for verb, (_, metavar, helptext) in VERBS.items():
        p = sub.add_parser(verb, help=helptext, description=helptext)
        p.add_argument("inputs", nargs="*", metavar=metavar)
        p.add_argument("--algebra", help="algebra JSON (default: the full matrix algebra)")
        p.add_argument("--tolerance", action="append",
                       help="eq_eps value, or key=value pairs for eq_eps, rank_eps, series_eps")
        p.add_argument("--convention", choices=["half-ball", "shifted"])
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $OAT_SEED or 0)")
        p.add_argument("--budget", type=int, default=None, help="search budget")
        p.add_argument("--report", help="write the JSON report here instead of stdout")
        p.add_argument("--max-dim", type=int, default=64)
        if verb == "root":
            p.add_argument("--k", type=int, default=2, help="take the k-th root")
            p.add_argument("--t", type=float, default=None, help="exponent in (0, 1]")
        if verb == "demo":
            p.add_argument("--k", type=float, default=0.05, help="K for the counterexample")
    return parser


def _arity(verb: str) -> int:
    return len(VERBS[verb][1].split())


def run(argv: list[str] | None = None, stdout=None) -> int:
    """Run one command; returns the exit code."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        env = os.environ.get("OAT_SEED")
        try:
            args.seed = int(env) if env else 0
        except ValueError:
            print(f"oat: OAT_SEED is not an integer: {env!r}", file=sys.stderr)
            return ParseError.exit_code
    report = {"verb": args.verb, "inputs": args.inputs, "seed": args.seed,
              "backend": KERNEL_BACKEND}
    start = time.perf_counter()
    try:
        tol = _parse_tolerance(args.tolerance)
        report["tolerances"] = tol.as_dict()
        if len(args.inputs) != _arity(args.verb):
            raise ParseError(f"{args.verb} expects {VERBS[args.verb][1]}")
        ld = Loader(args.max_dim, tol, args.convention)
        handler = VERBS[args.verb][0]
        verdict = handler(args, ld)
        code = EXIT[verdict.answer]
        report.update({"verdict": verdict.answer.value, "witness": to_jsonable(verdict.witness),
                       "audit": verdict.notes})
    except OatError as exc:
        code = exc.exit_code
        report.update({"verdict": "error", "error": type(exc).__name__, "message": str(exc)})
        print(f"oat: {type(exc).__name__}: {exc}", file=sys.stderr)
    report["timings"] = {"total_seconds": time.perf_counter() - start}
    report["exit_code"] = code
    text = json.dumps(report, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n")
        print(f"{args.verb}: {report['verdict']} (report in {args.report})", file=stdout)
    else:
        print(text, file=stdout)
    return code


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
