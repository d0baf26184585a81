"""Command-line entry point: ``tnsprep <group> <command> [options]``.

Exit codes: 0 on success, 1 on domain errors (invalid model, no certificate,
rejected verification, failed checks), 2 on usage errors. Every file written
with ``--out`` (or ``--transcript``) is accompanied by
``<file>.manifest.json`` and carries the run id of that manifest; ``tnsprep
--replay <manifest>`` re-executes the recorded command and compares outputs.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import io as tio
from .gap import NoCertificate, certify_interval, certify_point, parse_mode
from .models import ModelSpec, fixture, small_gibbs_path, zero_variant
from .observables import build_Q_j, build_Q_lambda, build_Z_pm, completeness_gram, pauli_product
from .operators import LocalMatrix
from .oracle import spectrum
from .state import AdiabaticSchedule, BudgetError, IntegrationError, adiabatic_evolve, build_parent_hamiltonian, build_state
from .verify import parse_prover, run_verification

WORKERS_ENV = "TNSPREP_WORKERS"
OUTPUT_OPTIONS = ("--out", "--transcript")


class UsageError(Exception):
    pass


class DomainError(Exception):
    pass


# Output handling ---------------------------------------------------------------------


class Outputs:
    """Collects artifacts, writes them atomically and then the manifest."""

    def __init__(self, argv: list[str], args: argparse.Namespace):
        self.argv = argv
        self.args = args
        self.inputs = {}
        for name in ("model", "file"):
            path = getattr(args, name, None)
            if path and Path(path).is_file():
                self.inputs[Path(path).name] = tio.file_digest(path)
        self.manifest = tio.RunManifest(_normalized_argv(argv), _config(args), getattr(args, "seed", None), inputs=self.inputs)
        self.pending: list[tuple[Path, bytes]] = []
        self.t0 = time.perf_counter()

    def ref(self, path: str | Path) -> dict:
        return {"file": tio.manifest_path(path).name, "run_id": self.manifest.run_id}

    def emit(self, path: str | None, data: str | bytes) -> None:
        if path is None:
            sys.stdout.write(data if isinstance(data, str) else data.decode(errors="replace"))
            return
        self.pending.append((Path(path), data.encode() if isinstance(data, str) else data))

    def emit_json(self, path: str | None, payload: dict) -> None:
        if path is not None:
            payload = {"manifest": self.ref(path)} | payload
        self.emit(path, json.dumps(payload, indent=1, default=_json_default) + "\n")

    def flush(self) -> None:
        if not self.pending:
            return
        for path, data in self.pending:
            tio.atomic_write(path, data)
            self.manifest.outputs[path.name] = tio.sha256_bytes(data)
        self.manifest.wall_clock_s = time.perf_counter() - self.t0
        text = json.dumps(self.manifest.to_dict(), indent=1) + "\n"
        for path, _ in self.pending:
            tio.atomic_write(tio.manifest_path(path), text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (frozenset, set, tuple)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _normalized_argv(argv: list[str]) -> list[str]:
    """Output paths reduced to their file names, so the run id ignores the directory."""
    out, it = [], iter(argv)
    for a in it:
        opt, eq, val = a.partition("=")
        if opt in OUTPUT_OPTIONS:
            if eq:
                out.append(f"{opt}={Path(val).name}")
            else:
                out.append(a)
                nxt = next(it, None)
                if nxt is not None:
                    out.append(Path(nxt).name)
        else:
            out.append(a)
    return out


def _config(args: argparse.Namespace) -> dict:
    skip = {"func", "replay", "replay_dir", "out", "transcript"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# Model loading -----------------------------------------------------------------------


def _add_model_args(p: argparse.ArgumentParser, beta: bool = True) -> None:
    p.add_argument("--model", help="model-spec file")
    p.add_argument("--fixture", help="named fixture instead of a file (FX-CHAIN4, FX-GIBBS4, FX-PROD(n), add -Z for the |0> variant)")
    if beta:
        p.add_argument("--beta", type=float, help="override beta")
        p.add_argument("--t", type=float, help="override t")


def _load_model(args) -> ModelSpec:
    if bool(args.model) == bool(args.fixture):
        raise UsageError("give exactly one of --model and --fixture")
    try:
        m = tio.load_model(args.model) if args.model else fixture(args.fixture)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot load model: {exc}") from exc
    m = m.with_params(beta=getattr(args, "beta", None), t=getattr(args, "t", None))
    problems = m.validate()
    if problems:
        raise DomainError("invalid model:\n  " + "\n  ".join(problems))
    return m


# Handlers ----------------------------------------------------------------------------


def cmd_model_build(args, out: Outputs) -> int:
    try:
        m = fixture(args.fixture, args.beta, args.n)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    if args.t is not None:
        m = m.with_params(t=args.t)
    if args.zero_variant:
        m = zero_variant(m)
    payload = tio.model_to_dict(m)
    out.emit_json(args.out, payload)
    return 0


def cmd_model_validate(args, out: Outputs) -> int:
    try:
        m = tio.load_model(args.file)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"cannot load {args.file}: {exc}", file=sys.stderr)
        return 1
    problems = m.validate()
    for p in problems:
        print(p, file=sys.stderr)
    out.emit_json(args.out, {"file": Path(args.file).name, "valid": not problems, "violations": problems})
    return 1 if problems else 0


def cmd_state_build(args, out: Outputs) -> int:
    m = _load_model(args)
    st = build_state(m)
    ref = {"manifest": out.ref(args.out)} if args.out else None
    if args.format == "binary":
        if not args.out:
            raise UsageError("--format binary needs --out")
        out.emit(args.out, tio.state_to_bytes(st.amplitudes, st.norm_constant, ref))
    else:
        out.emit(args.out, tio.state_to_text(st.amplitudes, st.norm_constant, ref))
    return 0


def cmd_state_check(args, out: Outputs) -> int:
    m = _load_model(args)
    res = build_parent_hamiltonian(m).annihilation_residuals(build_state(m))
    worst = float(res.max(initial=0.0))
    out.emit_json(args.out, {"residuals": res.tolist(), "max_residual": worst, "tol": args.tol, "ok": worst <= args.tol})
    return 0 if worst <= args.tol else 1


def cmd_state_adiabatic(args, out: Outputs) -> int:
    m = _load_model(args)
    target = m.beta if args.beta_target is None else args.beta_target
    sched = AdiabaticSchedule(args.T, target, m.t, steps=args.grid, tol=args.tol)
    res = adiabatic_evolve(m, sched)
    out.emit_json(
        args.out,
        {"T": args.T, "beta_target": target, "fidelity": res.fidelity, "infidelity": 1 - res.fidelity,
         "steps": res.steps, "norm_drift": res.norm_drift, "step_error": res.step_error},
    )
    return 0


def cmd_gap_certify(args, out: Outputs) -> int:
    m = _load_model(args)
    cert = certify_point(m, parse_mode(args.mode, args.projectorized), box=args.box)
    out.emit_json(args.out, cert.to_dict())
    return 0


def cmd_gap_interval(args, out: Outputs) -> int:
    m = _load_model(args)
    res = certify_interval(m, args.beta_target, args.floor, parse_mode(args.mode))
    out.emit_json(args.out, res.to_dict())
    if not res.covered:
        print(f"interval not covered: {res.stall_reason}", file=sys.stderr)
    return 0 if res.covered else 1


def _sites(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad site list {text!r}") from exc


def _local_pauli(sites: list[int], letters: str) -> LocalMatrix:
    if len(letters) != len(sites):
        raise UsageError(f"Pauli string {letters!r} must have one letter per site {sites}")
    full = ["I"] * (max(sites) + 1)
    for s, ch in zip(sites, letters):
        full[s] = ch
    _, P = pauli_product("".join(full))
    return P


def cmd_obs_gen(args, out: Outputs) -> int:
    m = _load_model(args)
    if args.kind in ("zplus", "zminus"):
        lam = _sites(args.lam)
        spec = build_Z_pm(m, lam)[0 if args.kind == "zplus" else 1]
    elif args.kind == "q":
        lam = _sites(args.lam)
        if not args.P:
            raise UsageError("--kind q needs --P")
        spec = build_Q_lambda(m, lam, _local_pauli(lam, args.P))
    else:
        if args.site is None:
            raise UsageError("--kind qj needs --site")
        Pp = _local_pauli(_sites(args.p_sites), args.P) if args.P else None
        spec = build_Q_j(m, args.site, Pp, args.variant)
    payload = {
        "kind": spec.kind,
        "lambda": list(spec.lam),
        "site": spec.site,
        "support": list(spec.operator.support),
        "expected": spec.expected,
        "pauli_expansion": {k: [v.real, v.imag] for k, v in sorted(spec.expansion.terms.items())},
        "matrix": tio.encode_complex(spec.operator.matrix),
    }
    out.emit_json(args.out, payload)
    return 0


def cmd_obs_gram(args, out: Outputs) -> int:
    if args.model or args.fixture:
        m = _load_model(args)
    else:
        m = zero_variant(small_gibbs_path(args.n, args.beta or 0.0))
    rep = completeness_gram(m)
    out.emit_json(args.out, {"n": m.N, "beta": m.beta, "sigma_min": rep.sigma_min, "condition": rep.condition, "nonsingular": rep.nonsingular})
    return 0 if rep.nonsingular else 1


def cmd_verify_run(args, out: Outputs) -> int:
    m = _load_model(args)
    try:
        prover = parse_prover(args.prover)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.delta is not None:
        delta, source = args.delta, "given"
    else:
        delta, source = certify_point(m, parse_mode(args.mode)).delta, f"certified ({args.mode})"
    rep = run_verification(
        m, prover, delta, args.epsilon, args.alpha, args.seed, args.check_rounds,
        rounds_per_term=args.rounds_per_term, energy_method=args.energy_method,
    )
    if args.transcript:
        out.emit(args.transcript, _with_ref(rep.transcript, out.ref(args.transcript)))
    out.emit_json(args.out, rep.to_dict() | {"delta": delta, "delta_source": source, "epsilon": args.epsilon})
    print(f"{rep.verdict}: F >= {rep.fidelity_conservative:.6f} (threshold {1 - args.epsilon:.6f})", file=sys.stderr)
    for r in rep.reasons:
        print(f"  {r}", file=sys.stderr)
    return 0 if rep.accepted else 1


def _with_ref(transcript: str, ref: dict) -> str:
    head, _, body = transcript.partition("\n")
    return json.dumps({"manifest": ref} | json.loads(head), sort_keys=True) + "\n" + body


def cmd_oracle_spectrum(args, out: Outputs) -> int:
    m = _load_model(args)
    rep = spectrum(build_parent_hamiltonian(m), args.k)
    out.emit_json(
        args.out,
        {"eigenvalues": rep.eigenvalues.tolist(), "E0": rep.E0, "gap": rep.gap, "ground_degeneracy": rep.ground_degeneracy, "max_residual": rep.max_residual},
    )
    return 0


def _sweep_row(job: tuple[ModelSpec, float, str]) -> tuple[float, float, float, float]:
    m, beta, mode = job
    mb = m.with_params(beta=beta)
    rep = spectrum(build_parent_hamiltonian(mb), k=2)
    try:
        delta = certify_point(mb, parse_mode(mode)).delta
    except NoCertificate:
        delta = math.nan
    return beta, rep.E0, rep.gap, delta


def _betas(text: str) -> list[float]:
    try:
        start, stop, num = text.split(":")
        return np.linspace(float(start), float(stop), int(num)).tolist()
    except ValueError as exc:
        raise UsageError(f"--betas expects start:stop:count, got {text!r}") from exc


def cmd_oracle_sweep(args, out: Outputs) -> int:
    m = _load_model(args)
    jobs = [(m, b, args.mode) for b in _betas(args.betas)]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    buf = _stdio.StringIO()
    if args.out:
        ref = out.ref(args.out)
        buf.write(f"# manifest: {ref['file']} run_id={ref['run_id']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "E0", "gap", "delta_sdp"])
    for r in rows:
        w.writerow([repr(float(x)) for x in r])
    out.emit(args.out, buf.getvalue())
    return 0


# Parser ------------------------------------------------------------------------------


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tnsprep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tnsprep {__version__}")
    p.add_argument("--replay", metavar="MANIFEST", help="re-run a recorded command and compare its outputs")
    p.add_argument("--replay-dir", help="directory for replayed outputs (default: a temporary directory)")
    groups = p.add_subparsers(dest="group")

    def leaf(sub, name, func, help_, model=True, beta=True, out=True):
        q = sub.add_parser(name, help=help_)
        if model:
            _add_model_args(q, beta)
        if out:
            q.add_argument("--out", help="output file (default: standard output)")
        q.set_defaults(func=func)
        return q

    g = groups.add_parser("model", help="build and validate model specs").add_subparsers(dest="command")
    q = leaf(g, "build", cmd_model_build, "write a fixture as a model-spec file", model=False)
    q.add_argument("--fixture", required=True)
    q.add_argument("--beta", type=float)
    q.add_argument("--t", type=float)
    q.add_argument("--n", type=int, default=3, help="size for FX-PROD")
    q.add_argument("--zero-variant", action="store_true", help="rotate every site to |0>")
    q = leaf(g, "validate", cmd_model_validate, "check all model invariants", model=False)
    q.add_argument("file")

    g = groups.add_parser("state", help="state construction and simulation").add_subparsers(dest="command")
    q = leaf(g, "build", cmd_state_build, "dump the normalized state")
    q.add_argument("--format", choices=("text", "binary"), default="text")
    q = leaf(g, "check-annihilation", cmd_state_check, "residuals <Psi|h_j|Psi>")
    q.add_argument("--tol", type=float, default=1e-9)
    q = leaf(g, "adiabatic", cmd_state_adiabatic, "adiabatic ramp from beta=0")
    q.add_argument("--T", type=float, required=True, help="total evolution time")
    q.add_argument("--grid", type=int, default=200, help="initial number of time steps")
    q.add_argument("--beta-target", type=float)
    q.add_argument("--tol", type=float, default=1e-6, help="step-doubling convergence tolerance")

    g = groups.add_parser("gap", help="SDP gap certificates").add_subparsers(dest="command")
    q = leaf(g, "certify", cmd_gap_certify, "certificate at one beta")
    q.add_argument("--mode", default="overlapping-only", help="overlapping-only, all-pairs or blocked:k")
    q.add_argument("--projectorized", action="store_true")
    q.add_argument("--box", type=float, default=20.0)
    q = leaf(g, "interval", cmd_gap_interval, "certificate over [0, beta-target]")
    q.add_argument("--beta-target", type=float, required=True)
    q.add_argument("--floor", type=float, default=0.0)
    q.add_argument("--mode", default="overlapping-only")

    g = groups.add_parser("obs", help="observables with known expectations").add_subparsers(dest="command")
    q = leaf(g, "gen", cmd_obs_gen, "emit one observable with its Pauli expansion")
    q.add_argument("--kind", choices=("zplus", "zminus", "q", "qj"), required=True)
    q.add_argument("--lambda", dest="lam", default="0", help="comma-separated sites")
    q.add_argument("--P", help="Pauli letters, one per site of --lambda (or of --p-sites for qj)")
    q.add_argument("--p-sites", default="", help="sites of P' for qj")
    q.add_argument("--site", type=int)
    q.add_argument("--variant", type=int, choices=(1, 2, 3), default=1)
    q = leaf(g, "gram", cmd_obs_gram, "completeness Gram matrix")
    q.add_argument("--n", type=int, default=3)

    g = groups.add_parser("verify", help="verification protocol").add_subparsers(dest="command")
    q = leaf(g, "run", cmd_verify_run, "simulate a prover and decide ACCEPT or REJECT")
    q.add_argument("--prover", default="honest", help="honest, depolarized:p, marginal or signalling[:q]")
    q.add_argument("--epsilon", type=float, default=0.1)
    q.add_argument("--alpha", type=float, default=0.05)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--delta", type=float, help="gap lower bound (default: certify with --mode)")
    q.add_argument("--mode", default="overlapping-only")
    q.add_argument("--check-rounds", type=int, default=20_000)
    q.add_argument("--rounds-per-term", type=int, help="override the planned rounds per term")
    q.add_argument("--energy-method", choices=("auto", "explicit", "counts"), default="auto")
    q.add_argument("--transcript", help="write the check-round transcript here")

    g = groups.add_parser("oracle", help="exact diagonalization").add_subparsers(dest="command")
    q = leaf(g, "spectrum", cmd_oracle_spectrum, "lowest eigenvalues and gap")
    q.add_argument("--k", type=int, default=4)
    q = leaf(g, "sweep", cmd_oracle_sweep, "CSV of beta, E0, gap, delta_sdp", beta=False)
    q.add_argument("--betas", default="0:0.5:21", help="start:stop:count")
    q.add_argument("--mode", default="overlapping-only")
    q.add_argument("--workers", type=int, default=_default_workers(), help=f"parallel workers (env {WORKERS_ENV})")
    return p


# Replay ------------------------------------------------------------------------------


def _redirect(argv: list[str], outdir: Path) -> list[str]:
    out, it = [], iter(argv)
    for a in it:
        opt, eq, val = a.partition("=")
        if opt in OUTPUT_OPTIONS and eq:
            out.append(f"{opt}={outdir / Path(val).name}")
        elif opt in OUTPUT_OPTIONS:
            out.append(a)
            out.append(str(outdir / Path(next(it)).name))
        else:
            out.append(a)
    return out


def _numbers_close(a, b, rtol: float = 1e-6, atol: float = 1e-9) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        keys = (a.keys() | b.keys()) - {"wall_clock_s"}
        return all(k in a and k in b and _numbers_close(a[k], b[k], rtol, atol) for k in keys)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_numbers_close(x, y, rtol, atol) for x, y in zip(a, b))
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
        return (math.isnan(a) and math.isnan(b)) or abs(a - b) <= atol + rtol * abs(b)
    return a == b


def replay(manifest_file: str, replay_dir: str | None) -> int:
    try:
        man = tio.load_manifest(manifest_file)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"cannot read manifest: {exc}", file=sys.stderr)
        return 2
    base = Path(manifest_file).parent
    outdir = Path(replay_dir) if replay_dir else Path(tempfile.mkdtemp(prefix="tnsprep-replay-"))
    outdir.mkdir(parents=True, exist_ok=True)
    cwd = os.getcwd()
    try:
        # inputs are resolved relative to the manifest's directory
        os.chdir(base)
        code = main(_redirect(man.argv, outdir.resolve()))
    finally:
        os.chdir(cwd)
    ok = True
    for name, digest in man.outputs.items():
        new = outdir / name
        if not new.exists():
            print(f"{name}: missing", file=sys.stderr)
            ok = False
            continue
        same = tio.file_digest(new) == digest
        if not same and (base / name).exists() and name.endswith(".json"):
            same = _numbers_close(json.loads(new.read_text()), json.loads((base / name).read_text()))
        print(f"{name}: {'reproduced' if same else 'DIFFERS'}", file=sys.stderr)
        ok &= same
    print(f"replayed into {outdir} (exit {code})", file=sys.stderr)
    return 0 if ok else 1


# Dispatch ----------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.replay:
        return replay(args.replay, args.replay_dir)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    out = Outputs(argv, args)
    try:
        code = args.func(args, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, NoCertificate, BudgetError, IntegrationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
